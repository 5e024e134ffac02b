use std::sync::OnceLock;

use orbit_krein::flow::{integrate_variational, FlowOptions};
use orbit_krein::monodromy::{
    build_reduced_frame, reduce_map, symmetric_orbit_report, CzParity, MonodromyReport, ReportOptions,
};
use orbit_krein::shooting::{
    continue_family, quarter_shift, shoot_doubly_symmetric, shoot_symmetric, Certificate, ContinuationOptions,
    ShootOptions, ShootResult,
};
use orbit_krein::systems::{hill_system, langmuir_system, Branch, Hamiltonian};
use orbit_krein::{Error, KreinSign, OrbitClass, RealCouple, RealSL2};
use proptest::prelude::*;

fn hill_shot() -> &'static ShootResult {
    static SHOT: OnceLock<ShootResult> = OnceLock::new();
    SHOT.get_or_init(|| {
        shoot_doubly_symmetric(&hill_system(), -2.5, (0.05, 0.6), Branch::Minus, &ShootOptions::default()).unwrap()
    })
}

fn langmuir_shot(energy: f64) -> ShootResult {
    let b = (0.1 / energy.abs(), 3.4 / energy.abs());
    shoot_doubly_symmetric(&langmuir_system(), energy, b, Branch::Plus, &ShootOptions::default()).unwrap()
}

#[test]
fn hill_retrograde_orbit() {
    let shot = hill_shot();
    let o = &shot.orbit;
    assert_eq!(o.certificate, Certificate::DoublySymmetric { primary: 0, secondary: 1 });
    assert!(o.residuals.closure <= 1e-9);
    assert!(o.residuals.symmetry <= 1e-7);
    assert!(o.residuals.dsym.unwrap() <= 1e-8);
    assert!(o.residuals.secondary_symmetry.unwrap() <= 1e-7);
    assert!(o.residuals.sample_gap <= 1e-8);
    assert_eq!(o.states.len(), 256);
    assert!((o.period - 4.0 * shot.t_quarter.unwrap()).abs() <= 1e-15);
    assert!(shot.iterates.last().unwrap().residual.abs() <= 1e-10);
    // retrograde start: p2 below q1 on the positive axis
    assert!(o.x0.q1() > 0.0 && o.x0.p2() < o.x0.q1());
}

#[test]
fn hill_report_has_equal_signs() {
    let r = symmetric_orbit_report(&hill_system(), &hill_shot().orbit, &ReportOptions::default()).unwrap();
    assert_ne!(r.classification, OrbitClass::NegativeHyperbolic);
    assert!(r.b_sign_0.is_some());
    assert_eq!(r.b_sign_0, r.b_sign_half);
    assert!(r.sign_dichotomy_holds());
    assert!(r.residuals.coninv_0 <= 1e-6 && r.residuals.coninv_half <= 1e-6);
    assert!(r.residuals.trace_gap <= 1e-7);
    assert!(r.residuals.product_gap <= 1e-7);
    assert!(r.residuals.xh_invariance <= 1e-7);
    assert!((r.m0.det() - 1.0).abs() <= 1e-8);
    assert_eq!(r.cz_parity, CzParity::of(r.classification));
    // a doubly symmetric orbit gives a symmetric couple
    assert!(r.couple.a.max_abs_diff(&r.couple.b) <= 1e-7 * r.couple.a.norm_inf());
}

#[test]
fn symmetric_shot_matches_doubly_symmetric() {
    let d = hill_shot();
    let s = shoot_symmetric(&hill_system(), 0, -2.5, (0.05, 0.6), Branch::Minus, &ShootOptions::default()).unwrap();
    assert_eq!(s.orbit.certificate, Certificate::Symmetric { inv: 0 });
    assert!(s.orbit.x0.dist_inf(&d.orbit.x0) <= 1e-8);
    assert!((s.orbit.period - d.orbit.period).abs() <= 1e-8);
    assert_eq!(s.t_quarter, None);
}

#[test]
fn degenerate_bracket_has_no_sign_change() {
    let r = shoot_symmetric(&hill_system(), 0, -2.5, (0.3, 0.3), Branch::Minus, &ShootOptions::default());
    assert!(matches!(r, Err(Error::NoSignChange { .. })), "{r:?}");
    let r = shoot_doubly_symmetric(&hill_system(), -2.5, (0.3, 0.3), Branch::Minus, &ShootOptions::default());
    assert!(matches!(r, Err(Error::NoSignChange { .. })), "{r:?}");
}

#[test]
fn hill_above_the_critical_value() {
    // the zero-velocity curve opens at the Lagrange points; either outcome
    // is acceptable, but a returned orbit must carry a valid certificate
    match shoot_doubly_symmetric(&hill_system(), -2.0, (0.05, 0.6), Branch::Minus, &ShootOptions::default()) {
        Ok(shot) => {
            assert!(shot.orbit.residuals.closure <= 1e-8 * shot.orbit.x0.norm_inf().max(1.0));
            let r = symmetric_orbit_report(&hill_system(), &shot.orbit, &ReportOptions::default()).unwrap();
            assert_ne!(r.classification, OrbitClass::NegativeHyperbolic);
        }
        Err(e) => assert!(matches!(e, Error::NoSignChange { .. } | Error::EventNotFound { .. }), "{e}"),
    }
}

#[test]
fn solver_is_deterministic() {
    let a = shoot_doubly_symmetric(&hill_system(), -2.5, (0.05, 0.6), Branch::Minus, &ShootOptions::default()).unwrap();
    let b = hill_shot();
    assert_eq!(a.iterates, b.iterates);
    assert_eq!(a.orbit, b.orbit);
}

#[test]
fn quarter_shift_swaps_the_involutions() {
    let hill = hill_system();
    let o = &hill_shot().orbit;
    let q = quarter_shift(&hill, o, &ShootOptions::default()).unwrap();
    assert_eq!(q.certificate, Certificate::DoublySymmetric { primary: 1, secondary: 0 });
    // starts on the vertical axis
    assert!(q.x0.q1().abs() <= 1e-9 && q.x0.p2().abs() <= 1e-9);
    assert!(q.residuals.symmetry <= 1e-7 && q.residuals.dsym.unwrap() <= 1e-8);
    let mut back = q;
    for _ in 0..3 {
        back = quarter_shift(&hill, &back, &ShootOptions::default()).unwrap();
    }
    assert!(back.x0.dist_inf(&o.x0) <= 1e-9);
    assert_eq!(back.states, o.states);

    let s = shoot_symmetric(&hill, 0, -2.5, (0.05, 0.6), Branch::Minus, &ShootOptions::default()).unwrap();
    assert!(matches!(quarter_shift(&hill, &s.orbit, &ShootOptions::default()), Err(Error::SymmetryViolated { .. })));
}

#[test]
fn langmuir_brake_orbit() {
    let lang = langmuir_system();
    let shot = langmuir_shot(-3.0);
    let o = &shot.orbit;
    // quarter period ends at a brake point: both momenta vanish
    let brake = o.states[o.states.len() / 4];
    assert!(brake.p1().abs() <= 1e-8 && brake.p2().abs() <= 1e-8);
    let r = symmetric_orbit_report(&lang, o, &ReportOptions::default()).unwrap();
    assert_ne!(r.classification, OrbitClass::NegativeHyperbolic);
    assert_eq!(r.b_sign_0, r.b_sign_half);

    // brake to brake on the second involution, compared after a quarter shift
    let q = quarter_shift(&lang, o, &ShootOptions::default()).unwrap();
    let s = shoot_symmetric(&lang, 1, -3.0, (0.05, 1.0), Branch::Minus, &ShootOptions::default()).unwrap();
    assert!(s.orbit.x0.dist_inf(&q.x0) <= 1e-8, "{} vs {}", s.orbit.x0, q.x0);
    assert!((s.orbit.period - o.period).abs() <= 1e-8);
}

#[test]
fn synthetic_negative_hyperbolic_couple() {
    let a = RealSL2::new(1.0, 1.0, -2.0, -1.0, 1e-12).unwrap();
    let r = MonodromyReport::from_couple("synthetic", RealCouple::from_a(a), false, 1e-9);
    assert_eq!(r.classification, OrbitClass::NegativeHyperbolic);
    assert_eq!(r.signs_differ(), Some(true));
    assert!(r.sign_dichotomy_holds());
    let id = MonodromyReport::from_couple("identity", RealCouple::from_a(RealSL2::IDENTITY), true, 1e-9);
    assert_eq!((id.b_sign_0, id.b_sign_half, id.cz_parity), (None, None, CzParity::Undefined));
}

#[test]
fn hill_family_segment() {
    let hill = hill_system();
    let seed = shoot_doubly_symmetric(&hill, -3.0, (0.05, 0.6), Branch::Minus, &ShootOptions::default()).unwrap();
    let fam = continue_family(&hill, &seed, (-3.0, -2.8), 0.05, &ContinuationOptions::default()).unwrap();
    assert!(fam.stalled.is_none());
    assert_eq!(fam.members.len(), 5);
    assert!(fam.no_negative_doubly_symmetric());
    for w in fam.members.windows(2) {
        assert!(w[1].energy > w[0].energy);
        // the start point moves outward monotonically
        assert!(w[1].shot.param > w[0].shot.param);
    }
    for m in &fam.members {
        assert_eq!(m.report.b_sign_0, Some(KreinSign::Plus));
        assert_eq!(m.report.b_sign_0, m.report.b_sign_half);
    }

    let single = continue_family(&hill, &seed, (-3.0, -3.0), 0.05, &ContinuationOptions::default()).unwrap();
    assert_eq!(single.members.len(), 1);
    let wide = continue_family(&hill, &seed, (-3.0, -2.98), 0.5, &ContinuationOptions::default()).unwrap();
    assert_eq!(wide.members.len(), 2);
    assert_eq!(wide.members[1].energy, -2.98);
}

fn hill_frames_and_map() -> (RealSL2, orbit_krein::monodromy::ReducedFrame, orbit_krein::Mat4) {
    let hill = hill_system();
    let o = &hill_shot().orbit;
    let d = integrate_variational(&hill, &o.x0, o.period, &FlowOptions::default()).unwrap().end_frame().unwrap();
    let f = build_reduced_frame(&hill, 0, &o.x0, 1e-6).unwrap();
    (reduce_map(&d, &f, &f, &hill).unwrap(), f, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reduced_monodromy_is_frame_rescale_covariant(mu in prop_oneof![-5.0..-0.2f64, 0.2..5.0f64]) {
        static BASE: OnceLock<(RealSL2, orbit_krein::monodromy::ReducedFrame, orbit_krein::Mat4)> = OnceLock::new();
        let (m, f, d) = BASE.get_or_init(hill_frames_and_map);
        let g = f.rescaled(mu);
        let scaled = reduce_map(d, &g, &g, &hill_system()).unwrap();
        // e_plus -> mu e_plus, e_minus -> e_minus / mu conjugates by diag(1/mu, mu)
        prop_assert!(scaled.max_abs_diff(&m.rescale(1.0 / mu)) <= 1e-9 * m.norm_inf() * (mu * mu + 1.0 / (mu * mu)));
        prop_assert!((scaled.trace() - m.trace()).abs() <= 1e-10);
        prop_assert_eq!(scaled.b > 0.0, m.b > 0.0);
    }
}

#[test]
fn frame_residuals_at_a_start_point() {
    let hill = hill_system();
    let x = orbit_krein::systems::state_on_fixed_set(&hill, 0, 0.2, -2.5, Branch::Minus).unwrap();
    assert!((x.p2() - (0.2 - 5.12f64.sqrt())).abs() <= 1e-12);
    let f = build_reduced_frame(&hill, 0, &x, 1e-6).unwrap();
    assert!(f.residuals(&hill).unwrap().max() <= 1e-10);
    let inv = &hill.involutions()[0];
    assert!((inv.jacobian() * f.e_plus - f.e_plus).amax() <= 1e-15);
}
