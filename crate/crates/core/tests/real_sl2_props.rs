use orbit_krein::real_sl2::{classify_trace, real_krein_sign_with, DEFAULT_TOL};
use orbit_krein::{classify, real_krein_sign, Error, KreinSign, OrbitClass, RealCouple, RealSL2};
use proptest::prelude::*;

/// Random `SL(2,R)` element from `(a, b, c)` with `d = (1 + bc) / a`.
fn sl2() -> impl Strategy<Value = RealSL2> {
    (prop_oneof![-4.0..-0.2f64, 0.2..4.0f64], -4.0..4.0f64, -4.0..4.0f64)
        .prop_map(|(a, b, c)| RealSL2::new(a, b, c, (1.0 + b * c) / a, 1e-9).unwrap())
}

/// Random `SL^R` element `[[a, b], [c, a]]`.
fn slr() -> impl Strategy<Value = RealSL2> {
    (-4.0..4.0f64, prop_oneof![-4.0..-0.05f64, 0.05..4.0f64])
        .prop_map(|(a, b)| RealSL2::new(a, b, (a * a - 1.0) / b, a, 1e-9).unwrap())
}

fn away_from_degenerate(trace: f64) -> bool {
    (trace.abs() - 2.0).abs() > 1e-6
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn couple_products_share_their_diagonal(a in sl2()) {
        let (ab, ba) = RealCouple::from_a(a).products();
        let diag = a.a * a.d + a.b * a.c;
        let scale = a.norm_inf().powi(2);
        for v in [ab.a, ab.d, ba.a, ba.d] {
            prop_assert!((v - diag).abs() <= 1e-13 * scale);
        }
        prop_assert!((ab.trace() - ba.trace()).abs() <= 1e-13 * scale);
    }

    #[test]
    fn couple_products_are_in_slr(a in sl2()) {
        let (ab, ba) = RealCouple::from_a(a).products();
        prop_assert!(ab.coninv_residual() <= 1e-13);
        prop_assert!(ba.coninv_residual() <= 1e-13);
        prop_assert!(RealCouple::relation_residual(&a, &RealCouple::from_a(a).b) == 0.0);
    }

    #[test]
    fn signs_differ_exactly_for_negative_hyperbolic(a in sl2()) {
        let couple = RealCouple::from_a(a);
        let trace = couple.products().0.trace();
        prop_assume!(away_from_degenerate(trace));
        let (differ, negative) = couple.signs_differ_iff_negative(DEFAULT_TOL).unwrap();
        prop_assert_eq!(differ, negative);
        prop_assert_eq!(negative, trace < -2.0);
    }

    #[test]
    fn symmetric_couples_are_never_negative_hyperbolic(m in slr()) {
        let couple = RealCouple { a: m, b: m };
        prop_assert!(couple.is_symmetric(1e-12));
        let (p, q) = couple.products();
        prop_assert!(classify(&p, DEFAULT_TOL) != OrbitClass::NegativeHyperbolic);
        // tr M^2 = tr^2 - 2 >= -2
        prop_assert!(p.trace() >= -2.0 - 1e-12);
        if away_from_degenerate(p.trace()) {
            prop_assert_eq!(real_krein_sign(&p, DEFAULT_TOL).unwrap(), real_krein_sign(&q, DEFAULT_TOL).unwrap());
        }
    }

    #[test]
    fn krein_sign_is_rescale_invariant(m in slr(), mu in prop_oneof![-5.0..-0.1f64, 0.1..5.0f64]) {
        prop_assume!(away_from_degenerate(m.trace()));
        let r = m.rescale(mu);
        prop_assert!((r.det() - 1.0).abs() <= 1e-10 * (1.0 + m.norm_inf() * mu * mu + m.norm_inf() / (mu * mu)));
        prop_assert_eq!(classify(&r, DEFAULT_TOL), classify(&m, DEFAULT_TOL));
        prop_assert_eq!(
            real_krein_sign_with(&r, 1e-9, DEFAULT_TOL).unwrap(),
            real_krein_sign_with(&m, 1e-9, DEFAULT_TOL).unwrap()
        );
    }

    #[test]
    fn sign_flips_under_reflection(m in slr()) {
        prop_assume!(away_from_degenerate(m.trace()));
        let s = real_krein_sign(&m, DEFAULT_TOL).unwrap();
        let t = real_krein_sign(&m.reflect(), DEFAULT_TOL).unwrap();
        prop_assert_ne!(s, t);
    }

    #[test]
    fn classification_follows_the_trace(t in -6.0..6.0f64) {
        let class = classify_trace(t, DEFAULT_TOL);
        let expected = if (t - 2.0).abs() <= DEFAULT_TOL {
            OrbitClass::DegeneratePlus
        } else if (t + 2.0).abs() <= DEFAULT_TOL {
            OrbitClass::DegenerateMinus
        } else if t > 2.0 {
            OrbitClass::PositiveHyperbolic
        } else if t < -2.0 {
            OrbitClass::NegativeHyperbolic
        } else {
            OrbitClass::Elliptic
        };
        prop_assert_eq!(class, expected);
        prop_assert_eq!(class.to_string().parse::<OrbitClass>().unwrap(), class);
    }

    #[test]
    fn inverse_and_products_keep_unit_determinant(a in sl2(), b in sl2()) {
        let p = a * b;
        prop_assert!((p.det() - 1.0).abs() <= 1e-12 * (1.0 + a.norm_inf() * b.norm_inf()).powi(2));
        let e = a * a.inverse();
        prop_assert!(e.max_abs_diff(&RealSL2::IDENTITY) <= 1e-12 * a.norm_inf().powi(2));
    }
}

#[test]
fn not_slr_form_and_degenerate_are_rejected() {
    let m = RealSL2::new(2.0, 1.0, 1.0, 1.0, 1e-12).unwrap();
    assert!(matches!(real_krein_sign(&m, DEFAULT_TOL), Err(Error::NotSlrForm { .. })));
    assert!(matches!(real_krein_sign(&RealSL2::IDENTITY, DEFAULT_TOL), Err(Error::DegenerateTrace { .. })));
    let minus = RealSL2::new(-1.0, 0.0, 0.0, -1.0, 1e-12).unwrap();
    assert!(matches!(real_krein_sign(&minus, DEFAULT_TOL), Err(Error::DegenerateTrace { .. })));
}

#[test]
fn oracle_matrices() {
    let ph = RealSL2::new(3.0, 2.0, 4.0, 3.0, 1e-12).unwrap();
    assert_eq!(classify(&ph, DEFAULT_TOL), OrbitClass::PositiveHyperbolic);
    assert_eq!(real_krein_sign(&ph, DEFAULT_TOL).unwrap(), KreinSign::Plus);
    let rot = RealSL2::new(0.0, 1.0, -1.0, 0.0, 1e-12).unwrap();
    assert_eq!(classify(&rot, DEFAULT_TOL), OrbitClass::Elliptic);
    assert_eq!(real_krein_sign(&rot, DEFAULT_TOL).unwrap(), KreinSign::Plus);
    let nh = RealSL2::new(-3.0, -2.0, -4.0, -3.0, 1e-12).unwrap();
    assert_eq!(classify(&nh, DEFAULT_TOL), OrbitClass::NegativeHyperbolic);
    assert_eq!(real_krein_sign(&nh, DEFAULT_TOL).unwrap(), KreinSign::Minus);
}
