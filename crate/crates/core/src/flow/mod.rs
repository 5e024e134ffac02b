//! Hamiltonian flow and its linearization.
//!
//! Integration uses the DOP853 pair with its continuous extension. The tangent
//! flow `D(t)` is integrated together with the state as one 20-dimensional
//! system, so both share the step-size control. Every accepted step keeps its
//! dense-output coefficients, which event location and resampling use.

mod dop853;
mod tableau;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::phase::{symplectic_defect, Mat4, State4};
use crate::systems::Hamiltonian;

use dop853::{dense_coefficients, dense_eval, trial_step};

/// Tolerances and limits of an integration run.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Bound on `|H(t) - H(0)| / max(1, |H(0)|)`.
    pub energy_tol: f64,
    /// Bound on `|D^T Omega D - Omega|_inf` for the tangent flow.
    pub sympl_tol: f64,
    /// Turn drift bounds into hard errors.
    pub enforce_bounds: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            rtol: 1e-12,
            atol: 1e-12,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
            energy_tol: 1e-10,
            sympl_tol: 1e-8,
            enforce_bounds: true,
        }
    }
}

impl FlowOptions {
    /// Same tolerances with drift bounds recorded but not enforced.
    pub fn relaxed(&self) -> Self {
        FlowOptions { enforce_bounds: false, ..self.clone() }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub max_energy_drift: f64,
    pub max_sympl_drift: f64,
}

#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    y0: Vec<f64>,
    f0: Vec<f64>,
    cont: Vec<f64>,
}

impl Segment {
    fn contains(&self, t: f64) -> bool {
        let t1 = self.t0 + self.h;
        let (lo, hi) = if self.h >= 0.0 { (self.t0, t1) } else { (t1, self.t0) };
        t >= lo && t <= hi
    }

    fn eval(&self, t: f64, out: &mut [f64]) {
        let s = if self.h == 0.0 { 0.0 } else { (t - self.t0) / self.h };
        dense_eval(&self.cont, self.y0.len(), s, out);
    }
}

/// A computed solution with its step points, optional tangent frames and
/// dense output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub system: String,
    pub times: Vec<f64>,
    pub states: Vec<State4>,
    /// Tangent flow `D(t)` at the sample times, when integrated.
    pub frames: Option<Vec<Mat4>>,
    pub stats: IntegratorStats,
    segments: Vec<Segment>,
}

impl Trajectory {
    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one sample")
    }

    pub fn end_state(&self) -> State4 {
        *self.states.last().expect("trajectory has at least one sample")
    }

    pub fn end_frame(&self) -> Option<Mat4> {
        self.frames.as_ref().and_then(|f| f.last().copied())
    }

    fn dense_at(&self, t: f64) -> Option<Vec<f64>> {
        if self.segments.is_empty() {
            return (t == self.times[0]).then(|| self.raw_start());
        }
        let forward = self.segments[0].h >= 0.0;
        // segments are ordered along the direction of integration
        let idx = self.segments.partition_point(|seg| {
            let t1 = seg.t0 + seg.h;
            if forward {
                t1 < t
            } else {
                t1 > t
            }
        });
        let seg = self.segments.get(idx)?;
        if !seg.contains(t) {
            return None;
        }
        let mut out = vec![0.0; seg.y0.len()];
        seg.eval(t, &mut out);
        Some(out)
    }

    fn raw_start(&self) -> Vec<f64> {
        let mut v = self.states[0].to_array().to_vec();
        if let Some(frames) = &self.frames {
            v.extend(frames[0].transpose().iter());
        }
        v
    }

    /// Dense-output state at time `t` inside the integrated range.
    pub fn state_at(&self, t: f64) -> Option<State4> {
        self.dense_at(t).map(|v| State4::new(v[0], v[1], v[2], v[3]))
    }

    /// Dense-output tangent frame at time `t` (variational runs only).
    pub fn frame_at(&self, t: f64) -> Option<Mat4> {
        self.frames.as_ref()?;
        self.dense_at(t).map(|v| unpack_frame(&v[4..]))
    }

    /// `n + 1` equally spaced dense samples covering the integrated range.
    pub fn resample(&self, n: usize) -> Vec<(f64, State4)> {
        let t0 = self.start_time();
        let t1 = self.end_time();
        (0..=n)
            .map(|k| {
                let t = if k == n { t1 } else { t0 + (t1 - t0) * k as f64 / n as f64 };
                let x = if k == n { self.end_state() } else { self.state_at(t).unwrap_or_else(|| self.end_state()) };
                (t, x)
            })
            .collect()
    }
}

fn unpack_frame(v: &[f64]) -> Mat4 {
    Mat4::from_row_slice(&v[..16])
}

fn pack_frame(m: &Mat4, out: &mut [f64]) {
    for i in 0..4 {
        for j in 0..4 {
            out[4 * i + j] = m[(i, j)];
        }
    }
}

/// Direction of a zero crossing of an event function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
    Any,
}

impl Direction {
    fn matches(&self, g_prev: f64, g_new: f64) -> bool {
        let crosses = (g_prev < 0.0 && g_new >= 0.0) || (g_prev > 0.0 && g_new <= 0.0);
        match self {
            Direction::Increasing => crosses && g_prev < 0.0,
            Direction::Decreasing => crosses && g_prev > 0.0,
            Direction::Any => crosses,
        }
    }
}

/// A scalar event `g(x) = 0` with crossing direction and occurrence index.
#[derive(Clone)]
pub struct EventSpec {
    g: Arc<dyn Fn(&State4) -> f64 + Send + Sync>,
    pub direction: Direction,
    /// Which matching crossing to stop at (1 = first).
    pub occurrence: usize,
    /// Refinement target for `|g(x(t*))|`.
    pub tol: f64,
}

impl fmt::Debug for EventSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventSpec")
            .field("direction", &self.direction)
            .field("occurrence", &self.occurrence)
            .field("tol", &self.tol)
            .finish_non_exhaustive()
    }
}

impl EventSpec {
    pub fn new(g: impl Fn(&State4) -> f64 + Send + Sync + 'static, direction: Direction) -> Self {
        EventSpec { g: Arc::new(g), direction, occurrence: 1, tol: 1e-13 }
    }

    /// Event on a single phase-space coordinate.
    pub fn coordinate(index: usize, direction: Direction) -> Self {
        Self::new(move |x: &State4| x.0[index], direction)
    }

    pub fn with_occurrence(mut self, n: usize) -> Self {
        self.occurrence = n;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn eval(&self, x: &State4) -> f64 {
        (self.g)(x)
    }
}

/// Located event.
#[derive(Debug, Clone)]
pub struct EventHit {
    pub t: f64,
    pub state: State4,
    /// `g(state)` after refinement.
    pub residual: f64,
    pub trajectory: Trajectory,
}

enum Control {
    Continue,
    Stop,
}

struct Accepted<'a> {
    t_prev: f64,
    t_new: f64,
    y_prev: &'a [f64],
    y_new: &'a [f64],
    segment: &'a Segment,
}

/// Adaptive DOP853 driver over an autonomous right-hand side. The callback
/// sees every accepted step and may stop the run.
fn drive<const N: usize, F, C>(
    mut rhs: F,
    y0: [f64; N],
    t_end: f64,
    opts: &FlowOptions,
    mut on_step: C,
) -> std::result::Result<(IntegratorStats, Vec<Segment>), DriveError>
where
    F: FnMut(&[f64; N], &mut [f64; N]) -> bool,
    C: FnMut(Accepted<'_>) -> Control,
{
    let mut stats = IntegratorStats::default();
    let mut segments = Vec::new();
    let mut f0 = [0.0; N];
    stats.rhs_evals += 1;
    if !rhs(&y0, &mut f0) {
        return Err(DriveError::Domain(0.0));
    }
    if t_end == 0.0 {
        return Ok((stats, segments));
    }
    let dir = t_end.signum();
    let mut t = 0.0;
    let mut y = y0;
    let mut h = dir * initial_step(&mut rhs, &y, &f0, opts, &mut stats).min(opts.h_max).min(t_end.abs());
    let mut last_rejected = false;

    loop {
        if (t_end - t) * dir <= 0.0 {
            break;
        }
        if stats.steps >= opts.max_steps {
            return Err(DriveError::Step(t, h));
        }
        let mut last = false;
        if (t + h - t_end) * dir >= 0.0 {
            h = t_end - t;
            last = true;
        }
        let h_min = 1e-14 * t.abs().max(1.0);
        if h.abs() < h_min {
            return Err(DriveError::Step(t, h));
        }

        stats.rhs_evals += 11;
        let trial = trial_step(&mut rhs, &y, &f0, h, opts.rtol, opts.atol);
        let Some(trial) = trial else {
            stats.rejected += 1;
            h *= 0.25;
            last_rejected = true;
            if h.abs() < h_min {
                return Err(DriveError::Domain(t));
            }
            continue;
        };

        let fac11 = trial.err.powf(0.125);
        if trial.err <= 1.0 {
            let mut f_new = [0.0; N];
            stats.rhs_evals += 4;
            let accepted = rhs(&trial.y_new, &mut f_new)
                .then(|| dense_coefficients(&mut rhs, &y, h, &trial.stages, &trial.y_new, &f_new))
                .flatten();
            let Some(cont) = accepted else {
                stats.rejected += 1;
                h *= 0.25;
                last_rejected = true;
                if h.abs() < h_min {
                    return Err(DriveError::Domain(t));
                }
                continue;
            };
            let t_new = if last { t_end } else { t + h };
            let segment =
                Segment { t0: t, h, y0: y.to_vec(), f0: f0.to_vec(), cont: cont.iter().flatten().copied().collect() };
            stats.steps += 1;
            let ctl = on_step(Accepted { t_prev: t, t_new, y_prev: &y, y_new: &trial.y_new, segment: &segment });
            segments.push(segment);
            t = t_new;
            y = trial.y_new;
            f0 = f_new;
            if matches!(ctl, Control::Stop) {
                break;
            }
            let fac = (fac11 / 0.9).clamp(1.0 / 6.0, 3.0);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.abs().min(h.abs()) * dir;
            }
            last_rejected = false;
            h = dir * h_new.abs().min(opts.h_max);
        } else {
            stats.rejected += 1;
            h /= (fac11 / 0.9).min(3.0);
            last_rejected = true;
        }
    }
    Ok((stats, segments))
}

enum DriveError {
    Domain(f64),
    Step(f64, f64),
}

impl DriveError {
    fn into_error(self, system: &str) -> Error {
        match self {
            DriveError::Domain(t) => Error::DomainExit { system: system.to_string(), t },
            DriveError::Step(t, h) => Error::StepFailure { t, h },
        }
    }
}

fn initial_step<const N: usize, F>(
    rhs: &mut F,
    y: &[f64; N],
    f0: &[f64; N],
    opts: &FlowOptions,
    stats: &mut IntegratorStats,
) -> f64
where
    F: FnMut(&[f64; N], &mut [f64; N]) -> bool,
{
    let sk = |i: usize| opts.atol + opts.rtol * y[i].abs();
    let rms = |v: &dyn Fn(usize) -> f64| ((0..N).map(|i| (v(i) / sk(i)).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d0 = rms(&|i| y[i]);
    let d1 = rms(&|i| f0[i]);
    let h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    let mut y1 = *y;
    for i in 0..N {
        y1[i] += h0 * f0[i];
    }
    let mut f1 = [0.0; N];
    stats.rhs_evals += 1;
    if !rhs(&y1, &mut f1) {
        return h0 * 1e-3;
    }
    let d2 = rms(&|i| f1[i] - f0[i]) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(1.0 / 8.0) };
    (100.0 * h0).min(h1)
}

fn relative_drift(h0: f64, h: f64) -> f64 {
    (h - h0).abs() / h0.abs().max(1.0)
}

fn check_bounds(stats: &IntegratorStats, opts: &FlowOptions, variational: bool) -> Result<()> {
    if !opts.enforce_bounds {
        return Ok(());
    }
    if stats.max_energy_drift > opts.energy_tol {
        return Err(Error::EnergyDrift { drift: stats.max_energy_drift, tol: opts.energy_tol });
    }
    if variational && stats.max_sympl_drift > opts.sympl_tol {
        return Err(Error::SymplecticDrift { drift: stats.max_sympl_drift, tol: opts.sympl_tol });
    }
    Ok(())
}

fn state_rhs<'a, S: Hamiltonian + ?Sized>(system: &'a S) -> impl FnMut(&[f64; 4], &mut [f64; 4]) -> bool + 'a {
    move |y: &[f64; 4], out: &mut [f64; 4]| {
        let x = State4::from_array(*y);
        if !system.in_domain(&x) {
            return false;
        }
        let v = system.vector_field(&x);
        out.copy_from_slice(v.as_slice());
        v.iter().all(|c| c.is_finite())
    }
}

fn variational_rhs<'a, S: Hamiltonian + ?Sized>(system: &'a S) -> impl FnMut(&[f64; 20], &mut [f64; 20]) -> bool + 'a {
    move |y: &[f64; 20], out: &mut [f64; 20]| {
        let x = State4::new(y[0], y[1], y[2], y[3]);
        if !system.in_domain(&x) {
            return false;
        }
        let v = system.vector_field(&x);
        out[..4].copy_from_slice(v.as_slice());
        let d = unpack_frame(&y[4..]);
        let dd = system.vector_field_jacobian(&x) * d;
        pack_frame(&dd, &mut out[4..]);
        out.iter().all(|c| c.is_finite())
    }
}

/// Integrates `x' = X_H(x)` from `x0` over `[0, t_end]` (`t_end < 0`
/// integrates backwards).
pub fn integrate<S: Hamiltonian + ?Sized>(
    system: &S,
    x0: &State4,
    t_end: f64,
    opts: &FlowOptions,
) -> Result<Trajectory> {
    if !system.in_domain(x0) {
        return Err(Error::DomainExit { system: system.name().to_string(), t: 0.0 });
    }
    let h0 = system.energy(x0);
    let mut times = vec![0.0];
    let mut states = vec![*x0];
    let mut drift = 0.0f64;
    let (mut stats, segments) = drive(state_rhs(system), x0.to_array(), t_end, opts, |acc| {
        let x = State4::new(acc.y_new[0], acc.y_new[1], acc.y_new[2], acc.y_new[3]);
        drift = drift.max(relative_drift(h0, system.energy(&x)));
        times.push(acc.t_new);
        states.push(x);
        Control::Continue
    })
    .map_err(|e| e.into_error(system.name()))?;
    stats.max_energy_drift = drift;
    check_bounds(&stats, opts, false)?;
    Ok(Trajectory { system: system.name().to_string(), times, states, frames: None, stats, segments })
}

/// Integrates the state together with the tangent flow `D' = DX_H(x) D`,
/// `D(0) = I`.
pub fn integrate_variational<S: Hamiltonian + ?Sized>(
    system: &S,
    x0: &State4,
    t_end: f64,
    opts: &FlowOptions,
) -> Result<Trajectory> {
    if !system.in_domain(x0) {
        return Err(Error::DomainExit { system: system.name().to_string(), t: 0.0 });
    }
    let h0 = system.energy(x0);
    let mut y0 = [0.0; 20];
    y0[..4].copy_from_slice(&x0.to_array());
    pack_frame(&Mat4::identity(), &mut y0[4..]);
    let mut times = vec![0.0];
    let mut states = vec![*x0];
    let mut frames = vec![Mat4::identity()];
    let mut drift = 0.0f64;
    let mut sympl = 0.0f64;
    let (mut stats, segments) = drive(variational_rhs(system), y0, t_end, opts, |acc| {
        let y = acc.y_new;
        let x = State4::new(y[0], y[1], y[2], y[3]);
        let d = unpack_frame(&y[4..]);
        drift = drift.max(relative_drift(h0, system.energy(&x)));
        sympl = sympl.max(symplectic_defect(&d));
        times.push(acc.t_new);
        states.push(x);
        frames.push(d);
        Control::Continue
    })
    .map_err(|e| e.into_error(system.name()))?;
    stats.max_energy_drift = drift;
    stats.max_sympl_drift = sympl;
    check_bounds(&stats, opts, true)?;
    Ok(Trajectory { system: system.name().to_string(), times, states, frames: Some(frames), stats, segments })
}

/// Integrates until the `occurrence`-th crossing of `g = 0` in the requested
/// direction, at most up to `t_max`.
pub fn integrate_to_event<S: Hamiltonian + ?Sized>(
    system: &S,
    x0: &State4,
    ev: &EventSpec,
    t_max: f64,
    opts: &FlowOptions,
) -> Result<EventHit> {
    if ev.occurrence == 0 {
        return Err(Error::InvalidInput("event occurrence index must be >= 1".into()));
    }
    if t_max <= 0.0 {
        return Err(Error::InvalidInput("t_max must be positive".into()));
    }
    if !system.in_domain(x0) {
        return Err(Error::DomainExit { system: system.name().to_string(), t: 0.0 });
    }
    let h0 = system.energy(x0);
    let g0 = ev.eval(x0);
    let mut g_prev = g0;
    let mut first = true;
    let mut count = 0usize;
    let mut degenerate = false;
    let mut found: Option<(f64, State4, f64)> = None;
    let mut times = vec![0.0];
    let mut states = vec![*x0];
    let mut drift = 0.0f64;
    let mut rhs = state_rhs(system);

    let (mut stats, mut segments) = {
        let rhs_ref = &mut rhs;
        drive(state_rhs(system), x0.to_array(), t_max, opts, |acc| {
            let x_new = State4::new(acc.y_new[0], acc.y_new[1], acc.y_new[2], acc.y_new[3]);
            let g_new = ev.eval(&x_new);
            if first {
                first = false;
                let mut mid = [0.0; 4];
                acc.segment.eval(0.5 * (acc.t_prev + acc.t_new), &mut mid);
                let g_mid = ev.eval(&State4::from_array(mid));
                let scale = 1e-12 * g0.abs().max(1.0);
                if (g_new - g0).abs() <= scale && (g_mid - g0).abs() <= scale {
                    degenerate = true;
                    return Control::Stop;
                }
            }
            let crossing = g_prev != 0.0 && ev.direction.matches(g_prev, g_new);
            if crossing {
                count += 1;
                if count == ev.occurrence {
                    let hit = refine_root(rhs_ref, ev, &acc, g_prev, g_new);
                    found = Some(hit);
                    return Control::Stop;
                }
            }
            if g_new != 0.0 || g_prev == 0.0 {
                g_prev = g_new;
            }
            drift = drift.max(relative_drift(h0, system.energy(&x_new)));
            times.push(acc.t_new);
            states.push(x_new);
            Control::Continue
        })
        .map_err(|e| e.into_error(system.name()))?
    };
    if degenerate {
        return Err(Error::EventNotFound { reason: "event function is constant along the first step".into() });
    }
    let Some((t_star, x_star, residual)) = found else {
        return Err(Error::EventNotFound {
            reason: format!("{} of {} crossings found before t = {t_max}", count, ev.occurrence),
        });
    };
    drift = drift.max(relative_drift(h0, system.energy(&x_star)));
    times.push(t_star);
    states.push(x_star);
    // the last segment extends past t*; it stays valid for t <= t*
    if let Some(last) = segments.last_mut() {
        if !last.contains(t_star) {
            segments.pop();
        }
    }
    stats.max_energy_drift = drift;
    check_bounds(&stats, opts, false)?;
    Ok(EventHit {
        t: t_star,
        state: x_star,
        residual,
        trajectory: Trajectory { system: system.name().to_string(), times, states, frames: None, stats, segments },
    })
}

/// Illinois regula falsi on the dense output of one step, then re-evaluation
/// of the state at the root by an exact sub-step from the step start.
fn refine_root<F>(rhs: &mut F, ev: &EventSpec, acc: &Accepted<'_>, g_a: f64, g_b: f64) -> (f64, State4, f64)
where
    F: FnMut(&[f64; 4], &mut [f64; 4]) -> bool,
{
    let dense_g = |t: f64| {
        let mut y = [0.0; 4];
        acc.segment.eval(t, &mut y);
        ev.eval(&State4::from_array(y))
    };
    let (mut a, mut b) = (acc.t_prev, acc.t_new);
    let (mut fa, mut fb) = (g_a, g_b);
    let mut side = 0i8;
    let mut t = b;
    for _ in 0..200 {
        if fb == 0.0 {
            t = b;
            break;
        }
        t = (a * fb - b * fa) / (fb - fa);
        if !(t > a.min(b) && t < a.max(b)) {
            t = 0.5 * (a + b);
        }
        let ft = dense_g(t);
        if ft.abs() <= 0.01 * ev.tol || (b - a).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            break;
        }
        if (ft > 0.0) == (fb > 0.0) {
            b = t;
            fb = ft;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = t;
            fa = ft;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
    }

    let y_prev: [f64; 4] = acc.segment.y0[..4].try_into().expect("state segment");
    let f_prev: [f64; 4] = acc.segment.f0[..4].try_into().expect("state segment");
    let exact = |rhs: &mut F, t: f64| -> State4 {
        let h = t - acc.t_prev;
        if h == 0.0 {
            return State4::from_array(y_prev);
        }
        match trial_step(rhs, &y_prev, &f_prev, h, 1.0, 1.0) {
            Some(trial) => State4::from_array(trial.y_new),
            None => {
                let mut y = [0.0; 4];
                acc.segment.eval(t, &mut y);
                State4::from_array(y)
            }
        }
    };
    let mut x = exact(rhs, t);
    let mut g = ev.eval(&x);
    // secant polish on exact sub-steps
    let mut t_old = if (t - acc.t_prev).abs() > (acc.t_new - t).abs() { acc.t_prev } else { acc.t_new };
    let mut g_old = ev.eval(&exact(rhs, t_old));
    for _ in 0..6 {
        if g.abs() <= ev.tol || g == g_old {
            break;
        }
        let t_next = t - g * (t - t_old) / (g - g_old);
        if !(t_next >= acc.t_prev.min(acc.t_new) && t_next <= acc.t_prev.max(acc.t_new)) {
            break;
        }
        let x_next = exact(rhs, t_next);
        let g_next = ev.eval(&x_next);
        if g_next.abs() >= g.abs() {
            break;
        }
        t_old = t;
        g_old = g;
        t = t_next;
        x = x_next;
        g = g_next;
    }
    let _ = acc.y_prev;
    let _ = acc.y_new;
    (t, x, g)
}
