mod common;

use std::f64::consts::PI;

use common::*;
use proptest::prelude::*;
use qgeom_core::linalg::{c, hermitian_eigh};
use qgeom_core::model::*;
use qgeom_core::{build_gammas, Error};

#[test]
fn qhz_at_origin_is_five_gamma5() {
    let g = build_gammas(2).unwrap();
    let h = eval_hamiltonian(&qhz_4d(1.0), &g, &[0.0; 4]).unwrap();
    assert!(max_diff_c(&h, &(g.get(4) * c(5.0))) < 1e-15);
    let (e, _) = hermitian_eigh(&h);
    for (got, want) in e.iter().zip([-5.0, -5.0, 5.0, 5.0]) {
        assert!((got - want).abs() < 1e-12);
    }
    let s = spectrum(&qhz_4d(1.0), &g, &[0.0; 4]).unwrap();
    assert_eq!((s.e_minus, s.e_plus, s.d), (-5.0, 5.0, 5.0));
}

#[test]
fn gapless_points_are_refused() {
    let g1 = build_gammas(1).unwrap();
    assert!(matches!(
        spectrum(&qwz_2d(0.0), &g1, &[PI, 0.0]),
        Err(Error::GapClosure { .. })
    ));
    let g2 = build_gammas(2).unwrap();
    assert!(matches!(
        spectrum(&qhz_4d(4.0), &g2, &[PI; 4]),
        Err(Error::GapClosure { .. })
    ));
    assert!(matches!(
        occupied_projector(&qhz_4d(4.0), &g2, &[PI; 4]),
        Err(Error::GapClosure { .. })
    ));
}

#[test]
fn qwz_gap_matches_eigensolver() {
    let g = build_gammas(1).unwrap();
    let model = qwz_2d(1.0);
    let k = [0.3, 0.7];
    let s = spectrum(&model, &g, &k).unwrap();
    let (e, _) = hermitian_eigh(&eval_hamiltonian(&model, &g, &k).unwrap());
    assert!((s.d - 0.5 * (e[1] - e[0])).abs() < 1e-13);
}

#[test]
fn random_models_match_eigensolver() {
    let mut r = rng(11);
    for n in [1usize, 2] {
        let g = build_gammas(n).unwrap();
        for _ in 0..100 {
            let model = random_model(&mut r, n);
            let k = random_k(&mut r, 2 * n);
            let Ok(s) = spectrum(&model, &g, &k) else {
                continue;
            };
            let h = eval_hamiltonian(&model, &g, &k).unwrap();
            assert!(max_diff_c(&h, &h.adjoint()) < 1e-14);
            let (e, _) = hermitian_eigh(&h);
            let half = g.dim() / 2;
            for (i, ei) in e.iter().enumerate() {
                let want = if i < half { s.e_minus } else { s.e_plus };
                assert!((ei - want).abs() < 1e-12, "{ei} vs {want}");
            }
            let p = occupied_projector(&model, &g, &k).unwrap();
            let diff = max_diff_c(&p.matrix, &eigen_projector(&h, half));
            assert!(diff < 1e-10, "diff {diff} d {}", s.d);
            let hp = &h * &p.matrix;
            assert!(max_diff_c(&hp, &(&p.matrix * c(s.e_minus))) < 1e-12);
        }
    }
}

#[test]
fn projector_examples() {
    let g = build_gammas(2).unwrap();
    let p = occupied_projector(&qhz_4d(1.0), &g, &[0.0; 4]).unwrap();
    let want = (identity(4) - g.get(4)) * c(0.5);
    assert!(max_diff_c(&p.matrix, &want) < 1e-15);
    let p = occupied_projector(&qhz_4d(-3.0), &g, &[0.5, 0.2, 0.9, 1.3]).unwrap();
    assert!((p.rank() - 2.0).abs() < 1e-14);
}

#[test]
fn d_hat_is_a_unit_vector() {
    let mut r = rng(12);
    for _ in 0..100 {
        let k = random_k(&mut r, 4);
        let (hat, _) = d_hat(&qhz_4d(-3.0), &k).unwrap();
        assert!((hat.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn constant_model_has_zero_jacobian() {
    let d = (0..5)
        .map(|i| vec![FourierTerm::constant(i as f64 + 1.0)])
        .collect();
    let model = FourierModel::new(2, d).unwrap();
    let jac = d_hat_jacobian(&model, &[0.1, 0.2, 0.3, 0.4], DerivativeScheme::Analytic).unwrap();
    assert_eq!(jac.amax(), 0.0);
}

#[test]
fn analytic_and_fd_jacobians_agree() {
    let model = qhz_4d(-3.0);
    let k = [0.5, 0.2, 0.9, 1.3];
    let a = d_hat_jacobian(&model, &k, DerivativeScheme::Analytic).unwrap();
    let f = d_hat_jacobian(&model, &k, DerivativeScheme::CentralFdHat { step: 1e-5 }).unwrap();
    assert_eq!(a.shape(), (4, 5));
    assert!(max_diff_r(&a, &f) < 1e-8);

    let mut r = rng(13);
    for _ in 0..100 {
        let m = random_model(&mut r, 2);
        let k = random_k(&mut r, 4);
        let Ok(a) = d_hat_jacobian(&m, &k, DerivativeScheme::Analytic) else {
            continue;
        };
        let f = d_hat_jacobian(&m, &k, DerivativeScheme::CentralFdHat { step: 1e-5 }).unwrap();
        let scale = 1.0 + a.amax() * d_hat(&m, &k).unwrap().1.recip();
        assert!(max_diff_r(&a, &f) < 1e-6 * scale, "{}", max_diff_r(&a, &f));
    }
}

#[test]
fn jacobian_rows_are_orthogonal_to_d_hat() {
    let mut r = rng(14);
    let model = qhz_4d(-3.0);
    for _ in 0..100 {
        let k = random_k(&mut r, 4);
        let (hat, _) = d_hat(&model, &k).unwrap();
        let jac = d_hat_jacobian(&model, &k, DerivativeScheme::Analytic).unwrap();
        for a in 0..4 {
            let dot: f64 = (0..5).map(|i| hat[i] * jac[(a, i)]).sum();
            assert!(dot.abs() < 1e-12);
        }
    }
}

#[test]
fn energy_offset_changes_only_the_spectrum() {
    let g = build_gammas(2).unwrap();
    let k = [0.5, 0.2, 0.9, 1.3];
    let plain = qhz_4d(-3.0);
    let shifted = plain.clone().with_offset(vec![
        FourierTerm::single(0.7, 0, Trig::Cos),
        FourierTerm::constant(-0.3),
    ]);
    let (s0, s1) = (
        spectrum(&plain, &g, &k).unwrap(),
        spectrum(&shifted, &g, &k).unwrap(),
    );
    let shift = 0.7 * 0.5f64.cos() - 0.3;
    assert!((s1.e_minus - s0.e_minus - shift).abs() < 1e-14);
    assert_eq!(s0.d, s1.d);
    let (p0, p1) = (
        occupied_projector(&plain, &g, &k).unwrap(),
        occupied_projector(&shifted, &g, &k).unwrap(),
    );
    assert_eq!(p0.matrix, p1.matrix);
    for scheme in [
        DerivativeScheme::Analytic,
        DerivativeScheme::CentralFdHat { step: 1e-5 },
    ] {
        assert_eq!(
            d_hat_jacobian(&plain, &k, scheme).unwrap(),
            d_hat_jacobian(&shifted, &k, scheme).unwrap()
        );
    }
}

#[test]
fn analytic_scheme_needs_a_jacobian() {
    let model = NoJacobian(qwz_2d(1.0));
    assert_eq!(
        d_hat_jacobian(&model, &[0.1, 0.2], DerivativeScheme::Analytic),
        Err(Error::MissingJacobian)
    );
    assert!(matches!(
        DerivativeScheme::preferred(&model),
        DerivativeScheme::CentralFdHat { .. }
    ));
}

#[test]
fn model_specs_parse_and_reject_unknown_keys() {
    let spec: ModelSpec =
        serde_json::from_str(r#"{"builtin": {"name": "qhz4d", "params": {"m": -3}}}"#).unwrap();
    assert_eq!(spec.build().unwrap(), qhz_4d(-3.0));
    let custom = r#"{"fourier": {"n_half_dim": 1, "d": [
        [{"coeff": 1.0, "factors": [{"axis": 0, "trig": "sin"}]}],
        [{"coeff": 1.0, "factors": [{"axis": 1, "trig": "sin"}]}],
        [{"coeff": 1.0}, {"coeff": 1.0, "factors": [{"axis": 0, "trig": "cos"}]},
         {"coeff": 1.0, "factors": [{"axis": 1, "trig": "cos"}]}]]}}"#;
    let spec: ModelSpec = serde_json::from_str(custom).unwrap();
    let m = spec.build().unwrap();
    assert_eq!(m.d_vector(&[0.3, 0.4]), qwz_2d(1.0).d_vector(&[0.3, 0.4]));
    assert!(serde_json::from_str::<ModelSpec>(
        r#"{"builtin": {"name": "qhz4d", "params": {"m": 1}, "extra": 1}}"#
    )
    .is_err());
    let bad = ModelSpec::Builtin {
        name: "nope".into(),
        params: Default::default(),
    };
    assert!(matches!(bad.build(), Err(Error::InvalidModel(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projector_is_a_rank_half_orthogonal_projector(
        k in proptest::collection::vec(-PI..PI, 4),
        m in prop_oneof![-5.0..-4.1f64, -3.9..-2.1f64, -1.9..-0.1f64, 0.1..1.9f64, 2.1..3.9f64, 4.1..5.0f64],
    ) {
        let g = build_gammas(2).unwrap();
        let p = occupied_projector(&qhz_4d(m), &g, &k).unwrap().matrix;
        prop_assert!(max_diff_c(&(&p * &p), &p) < 1e-13);
        prop_assert!(max_diff_c(&p.adjoint(), &p) < 1e-15);
        prop_assert!((qgeom_core::linalg::trace(&p).re - 2.0).abs() < 1e-13);
    }
}
