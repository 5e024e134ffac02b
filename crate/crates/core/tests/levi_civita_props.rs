use std::f64::consts::TAU;

use orbit_krein::levi_civita::{
    lc_forward, lc_involution_check, lc_lift_orbit, lc_lift_point, rho, winding_number, LCPoint, C64,
};
use orbit_krein::phase::symplectic_defect;
use orbit_krein::shooting::{shoot_doubly_symmetric, Certificate, Orbit, ShootOptions};
use orbit_krein::systems::{hill_system, Branch};
use orbit_krein::{Error, Mat4, State4};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn nonzero_state() -> impl Strategy<Value = State4> {
    (0.05..3.0f64, 0.0..TAU, -3.0..3.0f64, -3.0..3.0f64)
        .prop_map(|(r, th, p1, p2)| State4::new(r * th.cos(), r * th.sin(), p1, p2))
}

fn lc_point() -> impl Strategy<Value = LCPoint> {
    (0.05..2.0f64, 0.0..TAU, -3.0..3.0f64, -3.0..3.0f64)
        .prop_map(|(r, th, a, b)| LCPoint::new(C64::from_polar(r, th), C64::new(a, b)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lift_then_project_is_identity(x in nonzero_state(), plus in any::<bool>()) {
        let branch = if plus { Branch::Plus } else { Branch::Minus };
        let u = lc_lift_point(&x, branch).unwrap();
        prop_assert!(lc_forward(&u).unwrap().dist_inf(&x) <= 1e-13 * x.norm_inf().max(1.0));
        // the two sheets differ by the deck transformation
        let other = lc_lift_point(&x, if plus { Branch::Minus } else { Branch::Plus }).unwrap();
        prop_assert_eq!(other, u.neg());
    }

    #[test]
    fn lc_map_is_symplectic(u in lc_point()) {
        let mut j = Mat4::zeros();
        let s = u.to_state();
        for k in 0..4 {
            let h = 1e-6;
            let (mut a, mut b) = (s, s);
            a.0[k] += h;
            b.0[k] -= h;
            let col = (lc_forward(&LCPoint::from_state(&a)).unwrap().0 - lc_forward(&LCPoint::from_state(&b)).unwrap().0)
                / (2.0 * h);
            j.set_column(k, &col);
        }
        let scale = j.amax().powi(2).max(1.0);
        prop_assert!(symplectic_defect(&j) <= 1e-6 * scale, "defect {}", symplectic_defect(&j));
    }

    #[test]
    fn winding_matches_oversampled_unwrapping(
        k in -3i64..=3,
        amp in 0.0..0.8f64,
        m in 1u32..6,
        phase in 0.0..TAU,
        n in 200usize..400,
    ) {
        let curve = |t: f64| {
            let r = 1.0 + amp * (m as f64 * t + phase).cos();
            (r * (k as f64 * t).cos(), r * (k as f64 * t).sin())
        };
        let coarse: Vec<(f64, f64)> = (0..n).map(|i| curve(TAU * i as f64 / n as f64)).collect();
        let fine_n = 10 * n;
        let mut total = 0.0;
        for i in 0..fine_n {
            let (x0, y0) = curve(TAU * i as f64 / fine_n as f64);
            let (x1, y1) = curve(TAU * (i + 1) as f64 / fine_n as f64);
            total += (x0 * y1 - y0 * x1).atan2(x0 * x1 + y0 * y1);
        }
        let oracle = (total / TAU).round() as i64;
        prop_assert_eq!(oracle, k);
        prop_assert_eq!(winding_number(&coarse).unwrap(), oracle);
    }
}

#[test]
fn oracle_points() {
    let q = lc_forward(&LCPoint::new(C64::new(1.0, 0.0), C64::new(2.0, 0.0))).unwrap();
    assert_eq!(q, State4::new(1.0, 0.0, 1.0, 0.0));
    let q = lc_forward(&LCPoint::new(C64::new(0.0, 1.0), C64::new(0.0, 0.0))).unwrap();
    assert_eq!(q, State4::new(-1.0, 0.0, 0.0, 0.0));
    assert_eq!(lc_forward(&LCPoint::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0))), Err(Error::Origin));
    assert_eq!(lc_lift_point(&State4::new(0.0, 0.0, 1.0, 1.0), Branch::Plus), Err(Error::Origin));
}

#[test]
fn intertwining_on_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pts: Vec<LCPoint> = (0..1000)
        .map(|_| {
            let z = C64::from_polar(rng.gen_range(1e-3..10.0), rng.gen_range(0.0..TAU));
            LCPoint::new(z, C64::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)))
        })
        .collect();
    let r = lc_involution_check(&pts, 1e-13).unwrap();
    assert!(r.passed, "{r:?}");
    assert_eq!(r.samples, 1000);
    for u in &pts {
        assert_eq!(u.sigma1().sigma1(), *u);
        assert_eq!(u.sigma2().sigma2(), *u);
        assert_eq!(rho(&rho(&u.to_state())), u.to_state());
    }
}

#[test]
fn hill_lift_is_closed_and_doubly_symmetric() {
    let shot =
        shoot_doubly_symmetric(&hill_system(), -2.5, (0.05, 0.6), Branch::Minus, &ShootOptions::default()).unwrap();
    let plus = lc_lift_orbit(&shot.orbit, Branch::Plus, 1e-7).unwrap();
    assert_eq!(plus.winding.abs(), 1);
    assert_eq!(plus.points.len(), 2 * shot.orbit.states.len());
    assert!((plus.period - 2.0 * shot.orbit.period).abs() <= 1e-15);
    let r = plus.residuals;
    assert!(r.sigma1 <= 1e-8 && r.sigma2 <= 1e-8 && r.closure <= 1e-8, "{r:?}");
    assert!(r.projection <= 1e-12);
    let minus = lc_lift_orbit(&shot.orbit, Branch::Minus, 1e-7).unwrap();
    for (a, b) in plus.points.iter().zip(&minus.points) {
        assert_eq!(*b, a.neg());
    }
}

fn loop_orbit(turns: f64, n: usize) -> Orbit {
    let states: Vec<State4> = (0..n)
        .map(|k| {
            let th = turns * TAU * k as f64 / n as f64;
            State4::new(0.5 * th.cos(), 0.5 * th.sin(), -th.sin(), th.cos())
        })
        .collect();
    Orbit::from_samples(&hill_system(), 1.0, states, Certificate::Symmetric { inv: 0 }).unwrap()
}

#[test]
fn even_winding_is_rejected() {
    assert_eq!(lc_lift_orbit(&loop_orbit(2.0, 64), Branch::Plus, 1e-7), Err(Error::EvenWinding(2)));
    // a constant loop has winding zero
    assert_eq!(lc_lift_orbit(&loop_orbit(0.0, 64), Branch::Plus, 1e-7), Err(Error::EvenWinding(0)));
}

#[test]
fn coarse_sampling_is_a_branch_jump() {
    // eight samples over three turns: consecutive square roots are about equally
    // far from both candidates
    let o = loop_orbit(3.0, 8);
    assert!(matches!(lc_lift_orbit(&o, Branch::Plus, 1e-7), Err(Error::BranchJump(_))));
}
