//! Invariants on random convex polygons.

mod common;

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use pvem::assembly::{local_stiffness, Discretization, Formulation};
use pvem::mesh_geometry::{Element, Point2};
use pvem::polynomials::mgs_orthonormalize;
use pvem::projectors::engine::{flux_coefficients, Block, Target};
use pvem::{Problem, SelfStabVersion, StabKind};

/// Convex polygon: vertices on a jittered circle at random angular gaps.
fn convex_polygon() -> impl Strategy<Value = Vec<Point2>> {
    (3usize..=8)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.3f64..1.0, n),
                0.5f64..2.0,
                0.0f64..1.0,
                0.0f64..1.0,
                0.0f64..std::f64::consts::TAU,
            )
        })
        .prop_map(|(gaps, r, cx, cy, phase)| {
            let total: f64 = gaps.iter().sum();
            let mut a = phase;
            gaps.iter()
                .map(|g| {
                    a += g / total * std::f64::consts::TAU;
                    Point2::new(cx + r * a.cos(), cy + r * a.sin())
                })
                .collect()
        })
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 12,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn elliptic_projection_reproduces_polynomials(poly in convex_polygon(), k in 1usize..=5) {
        let el = Element::polygon(&poly);
        let disc = Discretization::new(Problem::Laplace, Formulation::stabilized(StabKind::S3), k);
        let l = local_stiffness(&el, 0, &disc).unwrap();
        let ep = &l.projectors;
        let ph = Problem::Laplace.physics();
        let d = ep.dof_matrix(k);
        let exact = flux_coefficients(&ep.ed, &ph, &Target { blocks: vec![Block::Potential { degree: k }], kernel: false });
        let coef = &l.projection.pi_star * &d;
        for c in 0..ph.nd {
            prop_assert!((&l.projection.flux[c] * &coef - &exact[c]).amax() < 1e-9);
        }
        let pi = &d * &l.projection.pi_star;
        prop_assert!((&pi * &pi - &pi).amax() < 1e-10 * pi.amax().max(1.0));
    }

    #[test]
    fn stabilizations_are_psd_and_vanish_on_polynomials(poly in convex_polygon(), k in 1usize..=5, s in 0usize..5) {
        let el = Element::polygon(&poly);
        let disc = Discretization::new(Problem::Laplace, Formulation::stabilized(StabKind::ALL[s]), k);
        let l = local_stiffness(&el, 0, &disc).unwrap();
        let st = l.stabilization.unwrap();
        let scale = st.amax().max(1.0);
        prop_assert!((&st * l.projectors.dof_matrix(k)).amax() < 1e-10 * scale);
        prop_assert!((&st - st.transpose()).amax() < 1e-12 * scale);
        prop_assert!(SymmetricEigen::new(st).eigenvalues.min() > -1e-10 * scale);
    }

    #[test]
    fn rigid_motions_are_elasticity_kernel(poly in convex_polygon(), k in 1usize..=4, v in 0usize..6) {
        let el = Element::polygon(&poly);
        for form in [Formulation::stabilized(StabKind::S3), Formulation::self_stabilized(SelfStabVersion::ALL[v])] {
            let disc = Discretization::new(Problem::Elasticity, form, k);
            let l = local_stiffness(&el, 0, &disc).unwrap();
            let modes: [fn(Point2) -> [f64; 2]; 3] = [|_| [1.0, 0.0], |_| [0.0, 1.0], |p| [-p.y, p.x]];
            for m in modes {
                let r = l.projectors.interpolate(&m);
                prop_assert!((&l.matrix * &r).amax() < 1e-9 * l.matrix.amax() * r.amax());
            }
        }
    }

    #[test]
    fn self_stabilized_stiffness_has_physical_kernel_only(poly in convex_polygon(), k in 1usize..=4, v in 0usize..6) {
        let el = Element::polygon(&poly);
        let disc = Discretization::new(Problem::Laplace, Formulation::self_stabilized(SelfStabVersion::ALL[v]), k);
        let l = local_stiffness(&el, 0, &disc).unwrap();
        prop_assert_eq!(l.rank, l.matrix.nrows() - 1);
    }

    #[test]
    fn orthonormal_basis_gram_is_identity(poly in convex_polygon(), k in 0usize..=8) {
        let el = Element::polygon(&poly);
        let basis = mgs_orthonormalize(&el, k).unwrap();
        let (pts, wts) = common::polygon_rule(&poly, k + 2);
        let n = basis.dim();
        let mut g = DMatrix::<f64>::zeros(n, n);
        for (p, w) in pts.iter().zip(&wts) {
            let v = basis.eval(*p);
            g += &v * v.transpose() * *w;
        }
        prop_assert!((g - DMatrix::identity(n, n)).amax() < 1e-10);
    }
}
