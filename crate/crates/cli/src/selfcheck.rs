//! Invariant suite: algebraic identities, orbit certificates and the
//! sign dichotomy on concrete orbits of both systems.

use orbit_krein::levi_civita::{lc_involution_check, lc_lift_orbit, LCPoint, C64};
use orbit_krein::monodromy::{symmetric_orbit_report, MonodromyReport, ReportOptions};
use orbit_krein::shooting::{quarter_shift, shoot_doubly_symmetric, Orbit, ShootOptions};
use orbit_krein::systems::{critical_values, hill_system, langmuir_system, Branch, Hamiltonian};
use orbit_krein::{classify, Error, OrbitClass, RealCouple, RealSL2, State4};

use crate::commands::SelfcheckArgs;
use crate::Failure;

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check { name, passed, detail: detail.into() }
}

fn failed(name: &'static str, e: &Error) -> Check {
    check(name, false, e.to_string())
}

pub fn run(args: &SelfcheckArgs) -> Result<(), Failure> {
    let mut checks = vec![sign_dichotomy_sweep(), symmetric_couples_grid(), hill_critical_value(), lc_intertwining()];
    checks.extend(orbit_checks(&hill_system(), -2.5, (0.05, 0.6), Branch::Minus));
    checks.extend(orbit_checks(&langmuir_system(), -1.0, (0.1, 3.4), Branch::Plus));
    let mut all = true;
    for c in &checks {
        all &= c.passed;
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        if args.verbose || !c.passed {
            println!("{verdict} {}: {}", c.name, c.detail);
        } else {
            println!("{verdict} {}", c.name);
        }
    }
    if all {
        Ok(())
    } else {
        Err(Failure { code: 2, message: "invariant suite failed".into() })
    }
}

/// Every integer matrix in SL(2) with entries in [-5, 5], as the first map
/// of a real couple.
fn sign_dichotomy_sweep() -> Check {
    let (mut tested, mut bad) = (0usize, 0usize);
    for a in -5..=5 {
        for b in -5..=5 {
            for c in -5..=5 {
                for d in -5..=5 {
                    if a * d - b * c != 1 {
                        continue;
                    }
                    let m = RealSL2::new(a as f64, b as f64, c as f64, d as f64, 0.0).expect("integer det 1");
                    match RealCouple::from_a(m).signs_differ_iff_negative(1e-9) {
                        Ok((differ, negative)) => {
                            tested += 1;
                            bad += usize::from(differ != negative);
                        }
                        Err(Error::DegenerateTrace { .. }) => {}
                        Err(_) => bad += 1,
                    }
                }
            }
        }
    }
    check(
        "sign dichotomy on integer couples",
        bad == 0 && tested > 0,
        format!("{tested} nondegenerate, {bad} violations"),
    )
}

/// Symmetric couples `A = B` in SL^R on a deterministic grid.
fn symmetric_couples_grid() -> Check {
    let mut negative = 0usize;
    let mut count = 0usize;
    for i in 0..100 {
        for j in 0..100 {
            let a = -4.0 + 8.0 * (i as f64 + 0.5) / 100.0;
            let b = {
                let s = -3.0 + 6.0 * (j as f64 + 0.5) / 100.0;
                if s == 0.0 {
                    1e-3
                } else {
                    s
                }
            };
            let c = (a * a - 1.0) / b;
            let Ok(m) = RealSL2::new(a, b, c, a, 1e-9) else { continue };
            count += 1;
            if classify(&(m * m), 1e-9) == OrbitClass::NegativeHyperbolic {
                negative += 1;
            }
        }
    }
    check(
        "symmetric couples are never negative hyperbolic",
        negative == 0,
        format!("{count} couples, {negative} negative"),
    )
}

fn hill_critical_value() -> Check {
    let seeds = [State4::new(0.7, 0.0, 0.0, 0.7), State4::new(-0.7, 0.0, 0.0, -0.7)];
    let values = critical_values(&hill_system(), &seeds, 1e-13).values();
    let expected = -(3f64.powf(4.0 / 3.0)) / 2.0;
    let gap = values.first().map_or(f64::INFINITY, |v| (v - expected).abs());
    check("Hill critical value", values.len() == 1 && gap <= 1e-10, format!("gap {gap:.2e}"))
}

fn lc_intertwining() -> Check {
    let pts: Vec<LCPoint> = (0..1000)
        .map(|k| {
            let t = k as f64 * 0.618_033_988_749_895;
            let r = 0.2 + 2.0 * (t.fract());
            let phi = 7.0 * t;
            LCPoint::new(C64::from_polar(r, phi), C64::new((3.0 * t).sin(), (5.0 * t).cos()))
        })
        .collect();
    match lc_involution_check(&pts, 1e-13) {
        Ok(r) => check(
            "Levi-Civita intertwining",
            r.passed,
            format!("sigma1 {:.1e}, sigma2 {:.1e}, commute {:.1e}", r.sigma1, r.sigma2, r.commute),
        ),
        Err(e) => failed("Levi-Civita intertwining", &e),
    }
}

fn report_checks(r: &MonodromyReport) -> Vec<Check> {
    let res = &r.residuals;
    let coninv = res.coninv_0.max(res.coninv_half);
    let slr = res.slr_gap_0.max(res.slr_gap_half);
    vec![
        check(
            "  real structure of the monodromy",
            coninv <= 1e-6 && slr <= 1e-6,
            format!("coninv {coninv:.1e}, |a - d| {slr:.1e}"),
        ),
        check("  B-signs differ iff negative hyperbolic", r.sign_dichotomy_holds(), format!("{}", r.classification)),
        check(
            "  doubly symmetric orbit is not negative hyperbolic",
            !(r.doubly_symmetric && r.classification == OrbitClass::NegativeHyperbolic),
            format!("trace {:.10}", r.trace),
        ),
        check(
            "  tangent flow hygiene",
            res.sympl_drift <= 1e-8 && res.energy_drift <= 1e-10 && res.xh_invariance <= 1e-7,
            format!("sympl {:.1e}, energy {:.1e}, X_H {:.1e}", res.sympl_drift, res.energy_drift, res.xh_invariance),
        ),
    ]
}

fn orbit_checks<S: Hamiltonian>(system: &S, energy: f64, bracket: (f64, f64), branch: Branch) -> Vec<Check> {
    let name = match system.name() {
        "hill" => "Hill doubly symmetric orbit",
        _ => "Langmuir doubly symmetric orbit",
    };
    let opts = ShootOptions::default();
    let shot = match shoot_doubly_symmetric(system, energy, bracket, branch, &opts) {
        Ok(s) => s,
        Err(e) => return vec![failed(name, &e)],
    };
    let o = &shot.orbit;
    let mut out = vec![check(
        name,
        true,
        format!("energy {energy}, period {:.10}, closure {:.1e}", o.period, o.residuals.closure),
    )];
    match symmetric_orbit_report(system, o, &ReportOptions::default()) {
        Ok(r) => out.extend(report_checks(&r)),
        Err(e) => out.push(failed("  monodromy report", &e)),
    }
    out.push(quarter_shift_check(system, o, &opts));
    if system.name() == "hill" {
        out.push(match lc_lift_orbit(o, Branch::Plus, 1e-7) {
            Ok(l) => {
                let r = l.residuals;
                check(
                    "  Levi-Civita lift closes",
                    l.winding.rem_euclid(2) == 1 && r.sigma1 <= 1e-8 && r.sigma2 <= 1e-8 && r.closure <= 1e-8,
                    format!("winding {}, sigma1 {:.1e}, sigma2 {:.1e}", l.winding, r.sigma1, r.sigma2),
                )
            }
            Err(e) => failed("  Levi-Civita lift closes", &e),
        });
    }
    out
}

fn quarter_shift_check<S: Hamiltonian>(system: &S, orbit: &Orbit, opts: &ShootOptions) -> Check {
    let name = "  quarter shift round trip";
    let mut o = orbit.clone();
    let mut worst = 0.0f64;
    for _ in 0..4 {
        o = match quarter_shift(system, &o, opts) {
            Ok(s) => s,
            Err(e) => return failed(name, &e),
        };
        worst = worst.max(o.residuals.symmetry).max(o.residuals.dsym.unwrap_or(f64::INFINITY));
    }
    let back = o.x0.dist_inf(&orbit.x0);
    check(name, worst <= 1e-7 && back <= 1e-12, format!("certificates {worst:.1e}, return {back:.1e}"))
}
