use nalgebra::{DMatrix, DVector, Vector3};
use proptest::prelude::*;

use lie_dichotomy::algebra::{make_descriptor, AlgebraKind};
use lie_dichotomy::estimation::{alignment, fisher_stats, kantorovich_bound};
use lie_dichotomy::expmap::{frechet_adjoint, mat_exp, mat_exp_frechet, so3_exp, so3_log_vec};
use lie_dichotomy::optim::{conjugate_gradient, radius_project};

const KINDS: [(AlgebraKind, usize); 7] = [
    (AlgebraKind::SoN, 4),
    (AlgebraKind::SlN, 3),
    (AlgebraKind::Se3, 4),
    (AlgebraKind::GlN, 3),
    (AlgebraKind::DiagN, 4),
    (AlgebraKind::So3Product(2), 3),
    (AlgebraKind::SoN, 2),
];

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

fn square(n: usize, range: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-range..range, n * n).prop_map(move |v| DMatrix::from_vec(n, n, v))
}

fn kind_and_pair() -> impl Strategy<Value = (usize, DMatrix<f64>, DMatrix<f64>, f64)> {
    (0..KINDS.len()).prop_flat_map(|k| {
        let n = make_descriptor(KINDS[k].0, KINDS[k].1).unwrap().n();
        (Just(k), square(n, 5.0), square(n, 5.0), -3.0..3.0f64)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projector_is_an_orthogonal_projection((k, a, b, c) in kind_and_pair()) {
        let d = make_descriptor(KINDS[k].0, KINDS[k].1).unwrap();
        let (pa, pb) = (d.project(&a).unwrap(), d.project(&b).unwrap());
        let scale = 1.0 + a.norm() + b.norm();
        prop_assert!((d.project(&(&a * c + &b)).unwrap() - (&pa * c + &pb)).norm() <= 1e-10 * scale);
        prop_assert!((d.project(&pa).unwrap() - &pa).norm() <= 1e-10 * scale);
        prop_assert!(pa.norm() <= a.norm() + 1e-10 * scale);
        prop_assert!((inner(&pa, &b) - inner(&a, &pb)).abs() <= 1e-10 * scale * scale);
        // The residual is orthogonal to the algebra.
        prop_assert!(inner(&(&a - &pa), &pb).abs() <= 1e-10 * scale * scale);
        prop_assert!(inner(&(&pa - &pb), &(&a - &b)) >= -1e-10 * scale * scale);
        prop_assert!((d.project_by_basis(&a).unwrap() - &pa).norm() <= 1e-10 * scale);
        prop_assert!(d.membership_residual(&pa).unwrap() <= 1e-10 * scale);
    }

    #[test]
    fn coordinates_round_trip((k, a, _b, _c) in kind_and_pair()) {
        let d = make_descriptor(KINDS[k].0, KINDS[k].1).unwrap();
        let pa = d.project(&a).unwrap();
        let x = d.coords_of(&pa).unwrap();
        prop_assert!((d.matrix_of(&x).unwrap() - &pa).norm() <= 1e-10 * (1.0 + a.norm()));
        // Orthonormal basis: coordinates preserve the Frobenius norm.
        prop_assert!((x.norm() - pa.norm()).abs() <= 1e-10 * (1.0 + a.norm()));
    }

    #[test]
    fn frechet_adjoint_identity(a in square(3, 1.0), h in square(3, 1.0), w in square(3, 1.0)) {
        let (_, da) = mat_exp_frechet(&a, &h).unwrap();
        let adj = frechet_adjoint(&a, &w).unwrap();
        prop_assert!((inner(&da, &w) - inner(&h, &adj)).abs() <= 1e-8 * (1.0 + da.norm() * w.norm()));
    }

    #[test]
    fn exp_of_commuting_sum_factorizes(a in square(3, 1.0), s in -2.0..2.0f64, t in -2.0..2.0f64) {
        let lhs = mat_exp(&(&a * (s + t))).unwrap();
        let rhs = mat_exp(&(&a * s)).unwrap() * mat_exp(&(&a * t)).unwrap();
        prop_assert!((&lhs - &rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));
    }

    #[test]
    fn so3_log_inverts_exp(x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64) {
        let w = Vector3::new(x, y, z);
        prop_assume!(w.norm() < std::f64::consts::PI - 1e-3);
        let back = so3_log_vec(&so3_exp(&w)).unwrap();
        prop_assert!((back - w).norm() <= 1e-9);
    }

    #[test]
    fn alignment_respects_kantorovich(raw in prop::collection::vec(-2.0..2.0f64, 16), g in prop::collection::vec(-1.0..1.0f64, 4), ridge in 1e-3..1.0f64) {
        let m = DMatrix::from_vec(4, 4, raw);
        let f = &m * m.transpose() + DMatrix::<f64>::identity(4, 4) * ridge;
        let g = DVector::from_vec(g);
        prop_assume!(g.norm() > 1e-6);
        let kappa = fisher_stats(&f).unwrap().kappa;
        prop_assert!(alignment(&g, &f).unwrap() >= kantorovich_bound(kappa).unwrap() - 1e-10);
    }

    #[test]
    fn radius_projection_contract(v in prop::collection::vec(-10.0..10.0f64, 6), b in 0.1..5.0f64) {
        let v = DVector::from_vec(v);
        let (p, triggered) = radius_project(&v, b);
        prop_assert_eq!(triggered, v.norm() > b);
        prop_assert!(p.norm() <= b * (1.0 + 1e-12));
        if !triggered {
            prop_assert_eq!(p, v);
        } else {
            // Direction is preserved.
            prop_assert!((p.dot(&v) / (p.norm() * v.norm()) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn conjugate_gradient_solves_spd(raw in prop::collection::vec(-1.0..1.0f64, 25), g in prop::collection::vec(-1.0..1.0f64, 5)) {
        let m = DMatrix::from_vec(5, 5, raw);
        let f = &m * m.transpose() + DMatrix::<f64>::identity(5, 5);
        let g = DVector::from_vec(g);
        let v = conjugate_gradient(&f, &g, 20);
        prop_assert!((&f * &v - &g).norm() <= 1e-8 * (1.0 + g.norm()));
    }
}
