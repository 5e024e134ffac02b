//! Perpendicular shooting between fixed sets of the involutions, and
//! continuation of orbit families in energy.
//!
//! A symmetric orbit starts perpendicularly on `Fix(rho)` and returns to it
//! perpendicularly after half a period. A doubly symmetric orbit already hits
//! `Fix(rho_2)` perpendicularly after a quarter period; reflecting the quarter
//! arc through `rho_2` and then `rho_1` closes it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{integrate, integrate_to_event, Direction, EventHit, EventSpec, FlowOptions, Trajectory};
use crate::monodromy::{symmetric_orbit_report, MonodromyReport, ReportOptions};
use crate::phase::State4;
use crate::real_sl2::OrbitClass;
use crate::systems::{state_on_fixed_set, Branch, Hamiltonian, Involution};

/// Symmetry type of an orbit, with the involutions by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// `rho(v(-t)) = v(t)`.
    Symmetric { inv: usize },
    /// Symmetric for `primary`, and `secondary(v(0)) = v(tau/2)`.
    DoublySymmetric { primary: usize, secondary: usize },
}

impl Certificate {
    pub fn primary(&self) -> usize {
        match *self {
            Certificate::Symmetric { inv } => inv,
            Certificate::DoublySymmetric { primary, .. } => primary,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Certificate::Symmetric { .. } => "symmetric",
            Certificate::DoublySymmetric { .. } => "doubly_symmetric",
        }
    }
}

/// Residuals measured on an orbit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrbitResiduals {
    /// `|phi^tau(x0) - x0|_inf`.
    pub closure: f64,
    /// `max_k |rho(v(-t_k)) - v(t_k)|_inf` over the sample times.
    pub symmetry: f64,
    /// Distances of `v(0)` and `v(tau/2)` from the fixed set.
    pub fixed_start: f64,
    pub fixed_half: f64,
    /// `|rho_2(v(0)) - v(tau/2)|_inf` for doubly symmetric orbits.
    pub dsym: Option<f64>,
    /// `max_k |rho_2(v(tau/4 - t_k)) - v(tau/4 + t_k)|_inf` for doubly
    /// symmetric orbits.
    pub secondary_symmetry: Option<f64>,
    /// `max_k |states[k] - phi^{t_k}(x0)|_inf`: assembled samples against the
    /// honest integration.
    pub sample_gap: f64,
    pub energy_drift: f64,
}

/// A periodic orbit with uniform samples `v(k tau / N)`, `k = 0..N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub system: String,
    pub energy: f64,
    pub period: f64,
    pub x0: State4,
    pub certificate: Certificate,
    pub residuals: OrbitResiduals,
    pub times: Vec<f64>,
    pub states: Vec<State4>,
}

impl Orbit {
    /// Wraps externally computed samples without integrating anything; the
    /// residuals are evaluated on the samples themselves, which must be
    /// uniform over one period and an even number.
    pub fn from_samples<S: Hamiltonian + ?Sized>(
        system: &S,
        period: f64,
        states: Vec<State4>,
        certificate: Certificate,
    ) -> Result<Orbit> {
        let n = states.len();
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!("need an even number of samples (got {n})")));
        }
        if !(period > 0.0) {
            return Err(Error::InvalidInput("period must be positive".into()));
        }
        let x0 = states[0];
        let times = (0..n).map(|k| period * k as f64 / n as f64).collect();
        let energy = system.energy(&x0);
        let inv = system.involution(certificate.primary())?;
        let symmetry = (0..n).map(|k| inv.apply(&states[(n - k) % n]).dist_inf(&states[k])).fold(0.0, f64::max);
        let energy_drift =
            states.iter().map(|x| (system.energy(x) - energy).abs()).fold(0.0, f64::max) / energy.abs().max(1.0);
        let mut residuals = OrbitResiduals {
            closure: 0.0,
            symmetry,
            fixed_start: inv.fixed_residual(&x0),
            fixed_half: inv.fixed_residual(&states[n / 2]),
            energy_drift,
            ..Default::default()
        };
        if let Certificate::DoublySymmetric { secondary, .. } = certificate {
            let inv2 = system.involution(secondary)?;
            residuals.dsym = Some(inv2.apply(&x0).dist_inf(&states[n / 2]));
        }
        Ok(Orbit { system: system.name().to_string(), energy, period, x0, certificate, residuals, times, states })
    }

    pub fn id(&self) -> String {
        format!("{}:{}:{:.10}", self.system, self.certificate.label(), self.energy)
    }

    /// Sample at half period.
    pub fn half_state(&self) -> State4 {
        self.states[self.states.len() / 2]
    }

    /// Configuration-space curve `(q1, q2)` of the samples, closed.
    pub fn configuration_curve(&self) -> Vec<(f64, f64)> {
        let mut c: Vec<(f64, f64)> = self.states.iter().map(|x| (x.q1(), x.q2())).collect();
        c.push((self.x0.q1(), self.x0.q2()));
        c
    }
}

/// Parameters of the shooting solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootOptions {
    pub flow: FlowOptions,
    /// Which section crossing closes the arc (1 = first).
    pub occurrence: usize,
    /// Number of grid intervals of the initial bracket scan.
    pub grid: usize,
    /// Bisection stops at this bracket width.
    pub bisect_width: f64,
    /// Secant stops when the parameter update is below this.
    pub root_tol: f64,
    /// Largest accepted `|F|` at the root.
    pub residual_tol: f64,
    /// Time limit for reaching the section.
    pub t_max: f64,
    /// Samples per period; must be a multiple of 4.
    pub samples: usize,
    /// Relative closure bound `|phi^tau(x0) - x0| <= tol max(1, |x0|)`.
    pub closure_tol: f64,
    pub symmetry_tol: f64,
    pub dsym_tol: f64,
    /// Number of sample times of the symmetry certificate.
    pub certificate_points: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            flow: FlowOptions::default(),
            occurrence: 1,
            grid: 48,
            bisect_width: 1e-3,
            root_tol: 1e-12,
            residual_tol: 1e-10,
            t_max: 100.0,
            samples: 256,
            closure_tol: 1e-8,
            symmetry_tol: 1e-7,
            dsym_tol: 1e-8,
            certificate_points: 32,
        }
    }
}

/// One evaluation of the shooting function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub param: f64,
    pub residual: f64,
}

/// A converged shot.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootResult {
    pub orbit: Orbit,
    pub branch: Branch,
    /// Root of the shooting function (chart coordinate of `v(0)`).
    pub param: f64,
    /// Every evaluation in order: grid scan, bisection, secant.
    pub iterates: Vec<Iterate>,
    pub t_quarter: Option<f64>,
    pub t_half: f64,
}

struct Problem<'a, S: ?Sized> {
    system: &'a S,
    start_inv: usize,
    event_inv: &'a Involution,
    energy: f64,
    branch: Branch,
    opts: &'a ShootOptions,
}

impl<S: Hamiltonian + ?Sized> Problem<'_, S> {
    fn shoot(&self, param: f64) -> Result<(State4, EventHit)> {
        let x0 = state_on_fixed_set(self.system, self.start_inv, param, self.energy, self.branch)?;
        let ev = EventSpec::coordinate(self.event_inv.section, Direction::Any).with_occurrence(self.opts.occurrence);
        let hit = integrate_to_event(self.system, &x0, &ev, self.opts.t_max, &self.opts.flow.relaxed())?;
        Ok((x0, hit))
    }

    fn residual(&self, hit: &EventHit) -> f64 {
        hit.state.0[self.event_inv.residual]
    }

    fn eval(&self, param: f64, iterates: &mut Vec<Iterate>) -> Option<f64> {
        let f = self.shoot(param).ok().map(|(_, hit)| self.residual(&hit));
        if let Some(residual) = f {
            iterates.push(Iterate { param, residual });
        }
        f
    }

    /// Bisection down to `bisect_width`, then safeguarded secant.
    fn refine(&self, mut a: f64, mut fa: f64, mut b: f64, mut fb: f64, iterates: &mut Vec<Iterate>) -> Option<f64> {
        let opts = self.opts;
        if fa == 0.0 {
            return Some(a);
        }
        if fb == 0.0 {
            return Some(b);
        }
        while (b - a).abs() > opts.bisect_width {
            let m = 0.5 * (a + b);
            let fm = self.eval(m, iterates)?;
            if fm == 0.0 {
                return Some(m);
            }
            if (fm > 0.0) == (fa > 0.0) {
                a = m;
                fa = fm;
            } else {
                b = m;
                fb = fm;
            }
        }
        let (mut x0, mut f0, mut x1, mut f1) = if fa.abs() < fb.abs() { (b, fb, a, fa) } else { (a, fa, b, fb) };
        for _ in 0..60 {
            if f1.abs() <= 1e-3 * opts.residual_tol {
                break;
            }
            let mut x2 = if f1 != f0 { x1 - f1 * (x1 - x0) / (f1 - f0) } else { 0.5 * (a + b) };
            if !(x2 > a.min(b) && x2 < a.max(b)) {
                x2 = 0.5 * (a + b);
            }
            let f2 = self.eval(x2, iterates)?;
            if (f2 > 0.0) == (fa > 0.0) {
                a = x2;
                fa = f2;
            } else {
                b = x2;
            }
            let step = (x2 - x1).abs();
            x0 = x1;
            f0 = f1;
            x1 = x2;
            f1 = f2;
            if step <= opts.root_tol * x1.abs().max(1.0) {
                break;
            }
        }
        (f1.abs() <= opts.residual_tol).then_some(x1)
    }

    /// Scans the bracket for sign changes and refines them, nearest to
    /// `prefer` first (lowest first without a preference).
    fn solve(&self, lo: f64, hi: f64, prefer: Option<f64>, iterates: &mut Vec<Iterate>) -> Result<f64> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::NoSignChange { lo, hi });
        }
        let n = self.opts.grid.max(1);
        let grid: Vec<(f64, Option<f64>)> = (0..=n)
            .map(|k| {
                let x = if k == n { hi } else { lo + (hi - lo) * k as f64 / n as f64 };
                (x, self.eval(x, iterates))
            })
            .collect();
        let mut brackets: Vec<(f64, f64, f64, f64)> = grid
            .windows(2)
            .filter_map(|w| match (w[0], w[1]) {
                ((a, Some(fa)), (b, Some(fb))) if fa == 0.0 || fa * fb < 0.0 => Some((a, fa, b, fb)),
                _ => None,
            })
            .collect();
        if let Some(p) = prefer {
            brackets.sort_by(|x, y| (0.5 * (x.0 + x.2) - p).abs().total_cmp(&(0.5 * (y.0 + y.2) - p).abs()));
        }
        for (a, fa, b, fb) in brackets {
            if let Some(root) = self.refine(a, fa, b, fb, iterates) {
                return Ok(root);
            }
        }
        Err(Error::NoSignChange { lo, hi })
    }
}

/// Honest full-period integration from `x0` and evaluation of every
/// certificate residual.
pub fn verify_orbit<S: Hamiltonian + ?Sized>(
    system: &S,
    x0: &State4,
    period: f64,
    certificate: Certificate,
    samples: &[State4],
    opts: &ShootOptions,
) -> Result<(OrbitResiduals, Trajectory)> {
    let full = integrate(system, x0, period, &opts.flow)?;
    let at = |t: f64| full.state_at(t).unwrap_or_else(|| full.end_state());
    let inv = system.involution(certificate.primary())?;
    let k = opts.certificate_points.max(1);
    let symmetry = (0..k)
        .map(|i| {
            let t = period * i as f64 / (2 * k) as f64;
            let back = if i == 0 { full.end_state() } else { at(period - t) };
            inv.apply(&back).dist_inf(&at(t))
        })
        .fold(0.0, f64::max);
    let half = at(0.5 * period);
    let mut res = OrbitResiduals {
        closure: full.end_state().dist_inf(x0),
        symmetry,
        fixed_start: inv.fixed_residual(x0),
        fixed_half: inv.fixed_residual(&half),
        energy_drift: full.stats.max_energy_drift,
        ..Default::default()
    };
    let n = samples.len();
    res.sample_gap =
        samples.iter().enumerate().map(|(k, x)| x.dist_inf(&at(period * k as f64 / n as f64))).fold(0.0, f64::max);
    if let Certificate::DoublySymmetric { secondary, .. } = certificate {
        let inv2 = system.involution(secondary)?;
        res.dsym = Some(inv2.apply(x0).dist_inf(&half));
        let q = 0.25 * period;
        let sec = (0..k)
            .map(|i| {
                let t = q * i as f64 / k as f64;
                inv2.apply(&at(q - t)).dist_inf(&at(q + t))
            })
            .fold(0.0, f64::max);
        res.secondary_symmetry = Some(sec);
    }
    Ok((res, full))
}

fn check_certificate(res: &OrbitResiduals, x0: &State4, opts: &ShootOptions) -> Result<()> {
    let closure_bound = opts.closure_tol * x0.norm_inf().max(1.0);
    let checks = [
        ("closure", res.closure, closure_bound),
        ("symmetry", res.symmetry, opts.symmetry_tol),
        ("fixed set at v(tau/2)", res.fixed_half, opts.symmetry_tol),
        ("double symmetry", res.dsym.unwrap_or(0.0), opts.dsym_tol),
        ("secondary symmetry", res.secondary_symmetry.unwrap_or(0.0), opts.symmetry_tol),
        ("assembled samples", res.sample_gap, opts.symmetry_tol),
    ];
    for (what, residual, tol) in checks {
        if !(residual <= tol) {
            return Err(Error::SymmetryViolated { what: what.into(), residual, tol });
        }
    }
    Ok(())
}

fn check_samples(opts: &ShootOptions) -> Result<()> {
    if opts.samples < 4 || !opts.samples.is_multiple_of(4) {
        return Err(Error::InvalidInput(format!("samples must be a positive multiple of 4 (got {})", opts.samples)));
    }
    Ok(())
}

/// Doubly symmetric orbit: start on `Fix(rho_1)` at chart coordinate `xi`,
/// stop at the `occurrence`-th crossing of the section of `Fix(rho_2)`, and
/// require the remaining coordinate of `Fix(rho_2)` to vanish there.
pub fn shoot_doubly_symmetric<S: Hamiltonian + ?Sized>(
    system: &S,
    energy: f64,
    bracket: (f64, f64),
    branch: Branch,
    opts: &ShootOptions,
) -> Result<ShootResult> {
    shoot_doubly_symmetric_near(system, energy, bracket, branch, None, opts)
}

fn shoot_doubly_symmetric_near<S: Hamiltonian + ?Sized>(
    system: &S,
    energy: f64,
    bracket: (f64, f64),
    branch: Branch,
    prefer: Option<f64>,
    opts: &ShootOptions,
) -> Result<ShootResult> {
    check_samples(opts)?;
    if system.involutions().len() < 2 {
        return Err(Error::InvalidInput(format!("{} has a single involution", system.name())));
    }
    let inv1 = system.involution(0)?;
    let inv2 = system.involution(1)?;
    let problem = Problem { system, start_inv: 0, event_inv: inv2, energy, branch, opts };
    let mut iterates = Vec::new();
    let param = problem.solve(bracket.0, bracket.1, prefer, &mut iterates)?;
    let (x0, hit) = problem.shoot(param)?;
    let tq = hit.t;
    let period = 4.0 * tq;
    let n = opts.samples;
    let quarter = |t: f64| -> State4 {
        if t >= tq {
            hit.state
        } else {
            hit.trajectory.state_at(t).unwrap_or(hit.state)
        }
    };
    let mut states: Vec<State4> = (0..n / 2)
        .map(|k| {
            let t = period * k as f64 / n as f64;
            if k == 0 {
                x0
            } else if 4 * k <= n {
                quarter(t)
            } else {
                inv2.apply(&quarter(2.0 * tq - t))
            }
        })
        .collect();
    // v(tau/2 + s) = rho_1 rho_2 v(s)
    let second: Vec<State4> = states.iter().map(|x| inv1.apply(&inv2.apply(x))).collect();
    states.extend(second);
    let certificate = Certificate::DoublySymmetric { primary: 0, secondary: 1 };
    let (residuals, _) = verify_orbit(system, &x0, period, certificate, &states, opts)?;
    check_certificate(&residuals, &x0, opts)?;
    let times = (0..n).map(|k| period * k as f64 / n as f64).collect();
    let orbit = Orbit { system: system.name().to_string(), energy, period, x0, certificate, residuals, times, states };
    Ok(ShootResult { orbit, branch, param, iterates, t_quarter: Some(tq), t_half: 2.0 * tq })
}

/// Symmetric orbit for one involution: start on `Fix(rho_i)`, stop at the
/// `occurrence`-th return to its section and require perpendicularity.
pub fn shoot_symmetric<S: Hamiltonian + ?Sized>(
    system: &S,
    inv_index: usize,
    energy: f64,
    bracket: (f64, f64),
    branch: Branch,
    opts: &ShootOptions,
) -> Result<ShootResult> {
    check_samples(opts)?;
    let inv = system.involution(inv_index)?;
    let problem = Problem { system, start_inv: inv_index, event_inv: inv, energy, branch, opts };
    let mut iterates = Vec::new();
    let param = problem.solve(bracket.0, bracket.1, None, &mut iterates)?;
    let (x0, hit) = problem.shoot(param)?;
    let th = hit.t;
    let period = 2.0 * th;
    let n = opts.samples;
    let half = |t: f64| -> State4 {
        if t >= th {
            hit.state
        } else {
            hit.trajectory.state_at(t).unwrap_or(hit.state)
        }
    };
    let states: Vec<State4> = (0..n)
        .map(|k| {
            let t = period * k as f64 / n as f64;
            if k == 0 {
                x0
            } else if 2 * k <= n {
                half(t)
            } else {
                inv.apply(&half(period - t))
            }
        })
        .collect();
    let certificate = Certificate::Symmetric { inv: inv_index };
    let (residuals, _) = verify_orbit(system, &x0, period, certificate, &states, opts)?;
    check_certificate(&residuals, &x0, opts)?;
    let times = (0..n).map(|k| period * k as f64 / n as f64).collect();
    let orbit = Orbit { system: system.name().to_string(), energy, period, x0, certificate, residuals, times, states };
    Ok(ShootResult { orbit, branch, param, iterates, t_quarter: None, t_half: th })
}

/// Time shift by a quarter period. A doubly symmetric orbit becomes symmetric
/// for its second involution and doubly symmetric with the roles swapped;
/// the certificate of the result is recomputed from scratch.
pub fn quarter_shift<S: Hamiltonian + ?Sized>(system: &S, orbit: &Orbit, opts: &ShootOptions) -> Result<Orbit> {
    let Certificate::DoublySymmetric { primary, secondary } = orbit.certificate else {
        return Err(Error::SymmetryViolated {
            what: "quarter shift needs a doubly symmetric orbit".into(),
            residual: f64::INFINITY,
            tol: opts.dsym_tol,
        });
    };
    let n = orbit.states.len();
    if !n.is_multiple_of(4) || n == 0 {
        return Err(Error::InvalidInput(format!("sample count {n} is not a multiple of 4")));
    }
    let dsym = orbit.residuals.dsym.unwrap_or(f64::INFINITY);
    if !(dsym <= opts.dsym_tol) {
        return Err(Error::SymmetryViolated { what: "double symmetry".into(), residual: dsym, tol: opts.dsym_tol });
    }
    let mut states = orbit.states.clone();
    states.rotate_left(n / 4);
    let x0 = states[0];
    let certificate = Certificate::DoublySymmetric { primary: secondary, secondary: primary };
    let (residuals, _) = verify_orbit(system, &x0, orbit.period, certificate, &states, opts)?;
    check_certificate(&residuals, &x0, opts)?;
    Ok(Orbit { x0, certificate, residuals, states, ..orbit.clone() })
}

/// A family member with its monodromy report.
#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub energy: f64,
    pub shot: ShootResult,
    pub report: MonodromyReport,
}

/// Class change between consecutive members, located by bisection in energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: OrbitClass,
    pub to: OrbitClass,
    pub energy_before: f64,
    pub energy_after: f64,
    /// Energy at which the trace meets `+-2`, and the trace there.
    pub energy: f64,
    pub trace: f64,
    /// `DegeneratePlus` or `DegenerateMinus` according to the crossed value.
    pub through: OrbitClass,
}

#[derive(Debug, Clone)]
pub struct Family {
    pub members: Vec<FamilyMember>,
    pub transitions: Vec<Transition>,
    /// Set when continuation stopped before the end of the range; the
    /// members computed so far are kept.
    pub stalled: Option<Error>,
}

impl Family {
    /// No member is both doubly symmetric and negative hyperbolic.
    pub fn no_negative_doubly_symmetric(&self) -> bool {
        !self
            .members
            .iter()
            .any(|m| m.report.doubly_symmetric && m.report.classification == OrbitClass::NegativeHyperbolic)
    }
}

/// Options of [`continue_family`].
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationOptions {
    pub shoot: ShootOptions,
    pub report: ReportOptions,
    /// Grid intervals of the warm-start bracket.
    pub warm_grid: usize,
    /// Smallest allowed energy step as a fraction of the requested one.
    pub min_step_fraction: f64,
    /// Transition bisection target `|trace -+ 2|`.
    pub transition_tol: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            shoot: ShootOptions::default(),
            report: ReportOptions::default(),
            warm_grid: 8,
            min_step_fraction: 1.0 / 64.0,
            transition_tol: 1e-6,
        }
    }
}

/// Warm-started doubly symmetric shot near `guess`, widening the bracket a
/// few times before giving up.
fn warm_shot<S: Hamiltonian + ?Sized>(
    system: &S,
    energy: f64,
    guess: f64,
    width: f64,
    branch: Branch,
    opts: &ContinuationOptions,
) -> Result<(ShootResult, MonodromyReport)> {
    let shoot_opts = ShootOptions { grid: opts.warm_grid, ..opts.shoot.clone() };
    let mut w = width;
    let mut last = Error::NoSignChange { lo: guess - w, hi: guess + w };
    for _ in 0..4 {
        match shoot_doubly_symmetric_near(system, energy, (guess - w, guess + w), branch, Some(guess), &shoot_opts) {
            Ok(shot) => {
                let report = symmetric_orbit_report(system, &shot.orbit, &opts.report)?;
                return Ok((shot, report));
            }
            Err(e @ Error::NoSignChange { .. }) => last = e,
            Err(e) => return Err(e),
        }
        w *= 3.0;
    }
    Err(last)
}

/// Natural-parameter continuation of a doubly symmetric family in energy
/// over `range`, warm-started from `seed` and then from the linear
/// extrapolation of the last two members.
pub fn continue_family<S: Hamiltonian + ?Sized>(
    system: &S,
    seed: &ShootResult,
    range: (f64, f64),
    step: f64,
    opts: &ContinuationOptions,
) -> Result<Family> {
    let (e_start, e_end) = range;
    if !(step > 0.0) || !e_start.is_finite() || !e_end.is_finite() {
        return Err(Error::InvalidInput("continuation needs a finite range and a positive step".into()));
    }
    let dir = if e_end >= e_start { 1.0 } else { -1.0 };
    let branch = seed.branch;
    let mut family = Family { members: Vec::new(), transitions: Vec::new(), stalled: None };
    let base_width = (opts.shoot.bisect_width * 8.0).max(1e-3);

    let (shot, report) = warm_shot(system, e_start, seed.param, base_width, branch, opts)?;
    family.members.push(FamilyMember { energy: e_start, shot, report });

    let mut h = step;
    let mut energy = e_start;
    while (e_end - energy) * dir > 1e-12 * energy.abs().max(1.0) {
        let next =
            if (e_end - energy - dir * h) * dir <= 1e-12 * energy.abs().max(1.0) { e_end } else { energy + dir * h };
        let m = family.members.len();
        let last = &family.members[m - 1];
        let (guess, width) = if m >= 2 {
            let prev = &family.members[m - 2];
            let slope = (last.shot.param - prev.shot.param) / (last.energy - prev.energy);
            let g = last.shot.param + slope * (next - last.energy);
            (g, (g - last.shot.param).abs().max(base_width))
        } else {
            (last.shot.param, base_width)
        };
        match warm_shot(system, next, guess, width, branch, opts) {
            Ok((shot, report)) => {
                let before = family.members.last().expect("nonempty");
                if before.report.classification != report.classification {
                    let t = locate_transition(system, before, next, &shot, &report, branch, opts);
                    family.transitions.push(t);
                }
                family.members.push(FamilyMember { energy: next, shot, report });
                energy = next;
                h = (h * 1.5).min(step);
            }
            Err(e) => {
                h *= 0.5;
                if h < step * opts.min_step_fraction {
                    family.stalled = Some(match e {
                        Error::NoSignChange { .. } | Error::EventNotFound { .. } => {
                            Error::ContinuationStalled { energy, members: family.members.len() }
                        }
                        other => other,
                    });
                    break;
                }
            }
        }
    }
    Ok(family)
}

fn locate_transition<S: Hamiltonian + ?Sized>(
    system: &S,
    before: &FamilyMember,
    e_after: f64,
    shot_after: &ShootResult,
    report_after: &MonodromyReport,
    branch: Branch,
    opts: &ContinuationOptions,
) -> Transition {
    let (ta, tb) = (before.report.trace, report_after.trace);
    let target = if (ta - 2.0) * (tb - 2.0) <= 0.0 || ta.min(tb) > 0.0 { 2.0 } else { -2.0 };
    let through = if target > 0.0 { OrbitClass::DegeneratePlus } else { OrbitClass::DegenerateMinus };
    let (mut lo, mut t_lo, mut p_lo) = (before.energy, ta, before.shot.param);
    let (mut hi, mut p_hi) = (e_after, shot_after.param);
    let mut best = if (ta - target).abs() < (tb - target).abs() { (lo, ta) } else { (hi, tb) };
    let width = (p_hi - p_lo).abs().max(opts.shoot.bisect_width * 8.0);
    for _ in 0..60 {
        if (best.1 - target).abs() <= opts.transition_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let guess = 0.5 * (p_lo + p_hi);
        let Ok((shot, report)) = warm_shot(system, mid, guess, width, branch, opts) else {
            break;
        };
        let t = report.trace;
        if (t - target).abs() < (best.1 - target).abs() {
            best = (mid, t);
        }
        if (t - target) * (t_lo - target) > 0.0 {
            lo = mid;
            t_lo = t;
            p_lo = shot.param;
        } else {
            hi = mid;
            p_hi = shot.param;
        }
        if (hi - lo).abs() <= 1e-14 * mid.abs().max(1.0) {
            break;
        }
    }
    Transition {
        from: before.report.classification,
        to: report_after.classification,
        energy_before: before.energy,
        energy_after: e_after,
        energy: best.0,
        trace: best.1,
        through,
    }
}
