//! Gauss rules on the reference interval, quad, hexahedron and triangle.

/// Gauss-Legendre points and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    match n {
        1 => vec![(0.0, 2.0)],
        2 => {
            let p = 1.0 / 3f64.sqrt();
            vec![(-p, 1.0), (p, 1.0)]
        }
        3 => {
            let p = (3.0f64 / 5.0).sqrt();
            vec![(-p, 5.0 / 9.0), (0.0, 8.0 / 9.0), (p, 5.0 / 9.0)]
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            vec![(-b, wb), (-a, wa), (a, wa), (b, wb)]
        }
        _ => panic!("gauss_legendre: unsupported order {n}"),
    }
}

/// Tensor rule on [-1,1]²: ((xi, eta), weight).
pub fn quad_rule(n: usize) -> Vec<([f64; 2], f64)> {
    let g = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for &(y, wy) in &g {
        for &(x, wx) in &g {
            out.push(([x, y], wx * wy));
        }
    }
    out
}

/// Tensor rule on [-1,1]³.
pub fn hex_rule(n: usize) -> Vec<([f64; 3], f64)> {
    let g = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n * n);
    for &(z, wz) in &g {
        for &(y, wy) in &g {
            for &(x, wx) in &g {
                out.push(([x, y, z], wx * wy * wz));
            }
        }
    }
    out
}

/// Seven-point degree-5 triangle rule: barycentric coordinates and weights
/// normalized to sum to one (multiply by the triangle area).
pub fn triangle_rule_deg5() -> [([f64; 3], f64); 7] {
    let s15 = 15f64.sqrt();
    let a = (6.0 - s15) / 21.0;
    let b = (6.0 + s15) / 21.0;
    let wa = (155.0 - s15) / 1200.0;
    let wb = (155.0 + s15) / 1200.0;
    let c = 1.0 / 3.0;
    [
        ([c, c, c], 9.0 / 40.0),
        ([a, a, 1.0 - 2.0 * a], wa),
        ([a, 1.0 - 2.0 * a, a], wa),
        ([1.0 - 2.0 * a, a, a], wa),
        ([b, b, 1.0 - 2.0 * b], wb),
        ([b, 1.0 - 2.0 * b, b], wb),
        ([1.0 - 2.0 * b, b, b], wb),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        for n in 1..=4 {
            let deg = 2 * n - 1;
            for p in 0..=deg {
                let q: f64 = gauss_legendre(n).iter().map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn triangle_rule_is_degree_five() {
        // reference triangle (0,0),(1,0),(0,1), area 1/2; ∫ x^i y^j = i! j! / (i+j+2)!
        fn fact(n: u32) -> f64 {
            (1..=n).map(|k| k as f64).product()
        }
        for i in 0..=5u32 {
            for j in 0..=(5 - i) {
                let q: f64 = triangle_rule_deg5()
                    .iter()
                    .map(|(l, w)| 0.5 * w * l[1].powi(i as i32) * l[2].powi(j as i32))
                    .sum();
                let exact = fact(i) * fact(j) / fact(i + j + 2);
                assert!((q - exact).abs() < 1e-15, "i={i} j={j}");
            }
        }
    }
}
