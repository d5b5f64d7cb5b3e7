use nalgebra::Vector2;
use proptest::prelude::*;

use faultmortar::benchmarks::{infsup_problem, oscillation_metric, stabilization_checks};
use faultmortar::friction::{friction_derivatives, limiting_traction, FrictionMaterial};
use faultmortar::interface::InterfaceTopology;
use faultmortar::io::{read_mesh, write_mesh};
use faultmortar::mesh::{generate_structured, Mesh};
use faultmortar::mortar::{clip_polygon, polygon_area, MortarCoupling, MultiplierSpace};
use faultmortar::solver::Model;

fn stacked(n1: [usize; 2], n2: [usize; 2], shift: f64) -> Mesh {
    let lower = generate_structured([1.0, 1.0, 0.5], [n1[0], n1[1], 1], [0.0, 0.0, -0.5]).unwrap();
    let upper = generate_structured([1.0, 1.0, 0.5], [n2[0], n2[1], 1], [shift, 0.0, 0.0]).unwrap();
    let mut m = Mesh::default();
    m.merge(&lower, "nm");
    m.merge(&upper, "m");
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn friction_derivatives_match_finite_differences(
        gx in -1.0f64..1.0, gy in -1.0f64..1.0, t_n in -5.0f64..-0.1, c in 0.0f64..1.0, phi in 5.0f64..60.0,
    ) {
        let dg = Vector2::new(gx, gy);
        prop_assume!(dg.norm() > 1e-2);
        let mat = FrictionMaterial::from_degrees(c, phi).unwrap();
        let eps = 1e-8;
        let d = friction_derivatives(&dg, t_n, &mat, eps);
        let t = |g: Vector2<f64>, tn: f64| limiting_traction(&g, faultmortar::friction::coulomb_limit(tn, &mat), eps);
        let h = 1e-6;
        for k in 0..2 {
            let mut e = Vector2::zeros();
            e[k] = h;
            let fd = (t(dg + e, t_n) - t(dg - e, t_n)) / (2.0 * h);
            prop_assert!((fd - d.d_slip.column(k)).norm() <= 1e-6 * (1.0 + d.d_slip.norm()));
        }
        let fd = (t(dg, t_n + h) - t(dg, t_n - h)) / (2.0 * h);
        prop_assert!((fd - d.d_normal).norm() <= 1e-6 * (1.0 + d.d_normal.norm()));
    }

    #[test]
    fn limiting_traction_lies_on_the_cone(gx in -1.0f64..1.0, gy in -1.0f64..1.0, tau in 0.0f64..10.0) {
        let dg = Vector2::new(gx, gy);
        prop_assume!(dg.norm() > 1e-6);
        let t = limiting_traction(&dg, tau, 1e-12);
        prop_assert!((t.norm() - tau).abs() <= 1e-12 * (1.0 + tau));
        prop_assert!(t.dot(&dg) >= 0.0);
    }

    #[test]
    fn mesh_text_round_trip(nx in 1usize..4, ny in 1usize..4, nz in 1usize..4, ox in -3.0f64..3.0, lx in 0.1f64..5.0) {
        let m = generate_structured([lx, 1.0, 2.0], [nx, ny, nz], [ox, 0.5, -1.0]).unwrap();
        let back = read_mesh(&write_mesh(&m)).unwrap();
        prop_assert_eq!(back.cells, m.cells.clone());
        prop_assert_eq!(back.regions, m.regions.clone());
        prop_assert_eq!(back.face_sets.keys().collect::<Vec<_>>(), m.face_sets.keys().collect::<Vec<_>>());
        for (a, b) in back.nodes.iter().zip(&m.nodes) {
            prop_assert!((a - b).norm() <= 1e-15 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn total_variation_bounds_the_net_change(v in prop::collection::vec(-10.0f64..10.0, 2..30)) {
        let tv = oscillation_metric(&v);
        prop_assert!(tv + 1e-12 >= (v[v.len() - 1] - v[0]).abs());
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert!((oscillation_metric(&sorted) - (sorted[sorted.len() - 1] - sorted[0])).abs() <= 1e-9);
    }

    #[test]
    fn overlap_area_is_symmetric(a in 0.0f64..1.0, b in 0.0f64..1.0, w in 0.1f64..2.0, h in 0.1f64..2.0) {
        let p = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let q = [[a, b], [a + w, b], [a + w, b + h], [a, b + h]];
        let exact = ((a + w).min(1.0) - a).max(0.0) * ((b + h).min(1.0) - b).max(0.0);
        prop_assert!((polygon_area(&clip_polygon(&q, &p)) - exact).abs() <= 1e-13);
        prop_assert!((polygon_area(&clip_polygon(&p, &q)) - exact).abs() <= 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mortar_rows_reproduce_constants(n1 in 1usize..6, n2 in 1usize..6, m1 in 1usize..6, m2 in 1usize..6) {
        let mesh = stacked([n1, n2], [m1, m2], 0.0);
        let topo = InterfaceTopology::build(&mesh, "nm.zmax", "m.zmin").unwrap();
        for space in [MultiplierSpace::P0, MultiplierSpace::Nodal] {
            let c = MortarCoupling::assemble(&mesh, &topo, space).unwrap();
            for d in c.coverage_defect() {
                prop_assert!(d.abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn stabilization_is_symmetric_psd_and_blind_to_constants(n1 in 2usize..6, n2 in 2usize..5) {
        let model = Model::new(infsup_problem(n1, n2, true).unwrap()).unwrap();
        let c = stabilization_checks(&model.interfaces[0]).unwrap();
        prop_assert!(c.asymmetry <= 1e-14);
        prop_assert!(c.psd);
        prop_assert!(!(c.min_eigenvalue_defect > 1e-12));
        prop_assert!(c.constant <= 1e-12);
    }
}
