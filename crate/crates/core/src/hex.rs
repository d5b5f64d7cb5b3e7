//! Trilinear hexahedron and bilinear quadrilateral shape functions.
//!
//! Corner ordering: bottom quad 0-1-2-3 counter-clockwise seen from +ζ,
//! then the top quad 4-5-6-7 directly above it.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;

/// Reference coordinates of the eight corners.
pub const HEX_CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Local faces, ordered counter-clockwise about the outward normal.
/// 0: ζ=-1, 1: ζ=+1, 2: η=-1, 3: ξ=+1, 4: η=+1, 5: ξ=-1.
pub const HEX_FACES: [[usize; 4]; 6] = [
    [0, 3, 2, 1],
    [4, 5, 6, 7],
    [0, 1, 5, 4],
    [1, 2, 6, 5],
    [2, 3, 7, 6],
    [3, 0, 4, 7],
];

/// Reference coordinates of the four quad corners, counter-clockwise.
pub const QUAD_CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

pub fn hex_shape(xi: [f64; 3]) -> [f64; 8] {
    let mut n = [0.0; 8];
    for (a, c) in HEX_CORNERS.iter().enumerate() {
        n[a] = 0.125 * (1.0 + c[0] * xi[0]) * (1.0 + c[1] * xi[1]) * (1.0 + c[2] * xi[2]);
    }
    n
}

/// Derivatives dN_a/dξ_k, indexed `[a][k]`.
pub fn hex_shape_grad(xi: [f64; 3]) -> [[f64; 3]; 8] {
    let mut g = [[0.0; 3]; 8];
    for (a, c) in HEX_CORNERS.iter().enumerate() {
        let fx = 1.0 + c[0] * xi[0];
        let fy = 1.0 + c[1] * xi[1];
        let fz = 1.0 + c[2] * xi[2];
        g[a] = [
            0.125 * c[0] * fy * fz,
            0.125 * fx * c[1] * fz,
            0.125 * fx * fy * c[2],
        ];
    }
    g
}

/// Jacobian J[i][k] = ∂x_i/∂ξ_k.
pub fn hex_jacobian(coords: &[Vec3; 8], grad: &[[f64; 3]; 8]) -> Matrix3<f64> {
    let mut j = Matrix3::zeros();
    for a in 0..8 {
        for i in 0..3 {
            for k in 0..3 {
                j[(i, k)] += coords[a][i] * grad[a][k];
            }
        }
    }
    j
}

pub fn quad_shape(xi: [f64; 2]) -> [f64; 4] {
    let mut n = [0.0; 4];
    for (a, c) in QUAD_CORNERS.iter().enumerate() {
        n[a] = 0.25 * (1.0 + c[0] * xi[0]) * (1.0 + c[1] * xi[1]);
    }
    n
}

pub fn quad_shape_grad(xi: [f64; 2]) -> [[f64; 2]; 4] {
    let mut g = [[0.0; 2]; 4];
    for (a, c) in QUAD_CORNERS.iter().enumerate() {
        g[a] = [
            0.25 * c[0] * (1.0 + c[1] * xi[1]),
            0.25 * (1.0 + c[0] * xi[0]) * c[1],
        ];
    }
    g
}

/// Position and surface element (|∂x/∂ξ × ∂x/∂η|) of a bilinear face.
pub fn quad_point(coords: &[Vec3; 4], xi: [f64; 2]) -> (Vec3, Vec3) {
    let n = quad_shape(xi);
    let g = quad_shape_grad(xi);
    let mut x = Vec3::zeros();
    let mut dxi = Vec3::zeros();
    let mut deta = Vec3::zeros();
    for a in 0..4 {
        x += coords[a] * n[a];
        dxi += coords[a] * g[a][0];
        deta += coords[a] * g[a][1];
    }
    (x, dxi.cross(&deta))
}

/// Inverts a planar bilinear map `x(ξ) = Σ N_a(ξ) p_a` by Newton iteration.
/// Returns `None` if the iteration fails to converge.
pub fn invert_bilinear_2d(p: &[[f64; 2]; 4], target: [f64; 2], tol: f64, max_iter: usize) -> Option<[f64; 2]> {
    let mut xi = [0.0, 0.0];
    for _ in 0..max_iter {
        let n = quad_shape(xi);
        let g = quad_shape_grad(xi);
        let mut x = [0.0; 2];
        let mut j = [[0.0; 2]; 2];
        for a in 0..4 {
            for i in 0..2 {
                x[i] += n[a] * p[a][i];
                for k in 0..2 {
                    j[i][k] += g[a][k] * p[a][i];
                }
            }
        }
        let r = [target[0] - x[0], target[1] - x[1]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return None;
        }
        let d0 = (j[1][1] * r[0] - j[0][1] * r[1]) / det;
        let d1 = (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
        xi[0] += d0;
        xi[1] += d1;
        if d0.abs().max(d1.abs()) < tol {
            return Some(xi);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_and_kronecker() {
        let xi = [0.3, -0.7, 0.1];
        let s: f64 = hex_shape(xi).iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
        for (a, c) in HEX_CORNERS.iter().enumerate() {
            let n = hex_shape(*c);
            for (b, v) in n.iter().enumerate() {
                assert_eq!(*v, if a == b { 1.0 } else { 0.0 });
            }
        }
        let g = hex_shape_grad(xi);
        for k in 0..3 {
            let s: f64 = g.iter().map(|d| d[k]).sum();
            assert!(s.abs() < 1e-15);
        }
    }

    #[test]
    fn face_normals_point_outward() {
        let coords: [Vec3; 8] = HEX_CORNERS.map(|c| Vec3::new(c[0], c[1], c[2]));
        let expected = [
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
        ];
        for (f, e) in HEX_FACES.iter().zip(expected) {
            let q = [coords[f[0]], coords[f[1]], coords[f[2]], coords[f[3]]];
            let (_, n) = quad_point(&q, [0.0, 0.0]);
            assert!((n.normalize() - e).norm() < 1e-14);
        }
    }

    #[test]
    fn bilinear_inverse_recovers_reference_point() {
        let p = [[0.0, 0.0], [2.0, 0.1], [2.3, 1.9], [-0.2, 1.5]];
        let xi = [0.37, -0.52];
        let n = quad_shape(xi);
        let mut x = [0.0; 2];
        for a in 0..4 {
            x[0] += n[a] * p[a][0];
            x[1] += n[a] * p[a][1];
        }
        let back = invert_bilinear_2d(&p, x, 1e-13, 20).unwrap();
        assert!((back[0] - xi[0]).abs() < 1e-12 && (back[1] - xi[1]).abs() < 1e-12);
    }
}
