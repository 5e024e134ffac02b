//! Levi-Civita lift `L(z, w) = (z^2, w / (2 conj z))`.
//!
//! `L` is the symplectic lift of the squaring map, a 2:1 cover of
//! `T*(C \ 0)` with deck transformation `(z, w) -> (-z, -w)`. Both
//! `sigma1(z, w) = (conj z, -conj w)` and `sigma2(z, w) = (-conj z, conj w)`
//! cover the reflection `rho(q, p) = (conj q, -conj p)`. A `rho`-symmetric
//! loop with odd winding around the origin lifts to one closed curve, twice
//! as long, which is symmetric for `sigma1` and doubly symmetric via `sigma2`.

use std::f64::consts::PI;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::State4;
use crate::shooting::Orbit;
use crate::systems::Branch;

pub type C64 = Complex<f64>;

/// A point of the regularized phase space, `z != 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LCPoint {
    pub z: C64,
    pub w: C64,
}

impl LCPoint {
    pub fn new(z: C64, w: C64) -> Self {
        LCPoint { z, w }
    }

    /// `(Re z, Im z, Re w, Im w)`.
    pub fn to_state(&self) -> State4 {
        State4::new(self.z.re, self.z.im, self.w.re, self.w.im)
    }

    pub fn from_state(x: &State4) -> Self {
        LCPoint { z: C64::new(x.q1(), x.q2()), w: C64::new(x.p1(), x.p2()) }
    }

    pub fn sigma1(&self) -> Self {
        LCPoint { z: self.z.conj(), w: -self.w.conj() }
    }

    pub fn sigma2(&self) -> Self {
        LCPoint { z: -self.z.conj(), w: self.w.conj() }
    }

    pub fn neg(&self) -> Self {
        LCPoint { z: -self.z, w: -self.w }
    }

    pub fn dist_inf(&self, other: &LCPoint) -> f64 {
        self.to_state().dist_inf(&other.to_state())
    }
}

impl Serialize for LCPoint {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_state().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LCPoint {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        State4::deserialize(deserializer).map(|x| LCPoint::from_state(&x))
    }
}

/// The reflection `rho(q, p) = (conj q, -conj p)` covered by both sigmas.
pub fn rho(x: &State4) -> State4 {
    State4::new(x.q1(), -x.q2(), -x.p1(), x.p2())
}

pub fn lc_forward(p: &LCPoint) -> Result<State4> {
    if p.z == C64::new(0.0, 0.0) {
        return Err(Error::Origin);
    }
    let q = p.z * p.z;
    let mom = p.w / (p.z.conj() * 2.0);
    Ok(State4::new(q.re, q.im, mom.re, mom.im))
}

/// Preimage of `s` on the sheet picked by `branch` (`+` is the principal
/// square root).
pub fn lc_lift_point(s: &State4, branch: Branch) -> Result<LCPoint> {
    let q = C64::new(s.q1(), s.q2());
    if q == C64::new(0.0, 0.0) {
        return Err(Error::Origin);
    }
    let z = q.sqrt() * branch.sign();
    Ok(lift_with_root(s, z))
}

fn lift_with_root(s: &State4, z: C64) -> LCPoint {
    let p = C64::new(s.p1(), s.p2());
    LCPoint { z, w: z.conj() * p * 2.0 }
}

/// Largest residuals of the intertwining identities over the samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvolutionCheck {
    /// `max |L(sigma1 u) - rho(L u)|_inf`.
    pub sigma1: f64,
    pub sigma2: f64,
    /// `max |sigma1 sigma2 u - sigma2 sigma1 u|_inf`.
    pub commute: f64,
    pub samples: usize,
    pub passed: bool,
}

pub fn lc_involution_check(samples: &[LCPoint], tol: f64) -> Result<InvolutionCheck> {
    let (mut s1, mut s2, mut comm) = (0.0f64, 0.0f64, 0.0f64);
    for u in samples {
        let base = rho(&lc_forward(u)?);
        // relative to the size of the image so that the check is scale-free
        let scale = base.norm_inf().max(1.0);
        s1 = s1.max(lc_forward(&u.sigma1())?.dist_inf(&base) / scale);
        s2 = s2.max(lc_forward(&u.sigma2())?.dist_inf(&base) / scale);
        comm = comm.max(u.sigma1().sigma2().dist_inf(&u.sigma2().sigma1()));
    }
    Ok(InvolutionCheck {
        sigma1: s1,
        sigma2: s2,
        commute: comm,
        samples: samples.len(),
        passed: s1.max(s2).max(comm) <= tol,
    })
}

/// Winding number of the closed polygon through `points` around the origin,
/// from summed argument increments.
pub fn winding_number(points: &[(f64, f64)]) -> Result<i64> {
    if points.iter().any(|&(x, y)| x == 0.0 && y == 0.0) {
        return Err(Error::Origin);
    }
    let n = points.len();
    let mut total = 0.0;
    for k in 0..n {
        let (x0, y0) = points[k];
        let (x1, y1) = points[(k + 1) % n];
        total += (x0 * y1 - y0 * x1).atan2(x0 * x1 + y0 * y1);
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Residuals of a lifted curve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LiftResiduals {
    /// `max_k |sigma1(u(-s_k)) - u(s_k)|_inf`.
    pub sigma1: f64,
    /// `|sigma2(u(0)) - u(T/2)|_inf`.
    pub sigma2: f64,
    /// Gap between the last lifted sample continued one step and `u(0)`.
    pub closure: f64,
    /// `max_k |L(u_k) - v_k|_inf`.
    pub projection: f64,
    /// Largest distance between consecutive lifted samples.
    pub max_step: f64,
}

/// The lift of an odd-winding loop: `2N` samples over twice the base period,
/// indexed by base time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedCurve {
    pub coordinates: String,
    pub winding: i64,
    pub period: f64,
    pub times: Vec<f64>,
    pub points: Vec<LCPoint>,
    pub residuals: LiftResiduals,
}

impl LiftedCurve {
    pub fn states(&self) -> Vec<State4> {
        self.points.iter().map(LCPoint::to_state).collect()
    }

    /// Configuration curve `z`, closed.
    pub fn configuration_curve(&self) -> Vec<(f64, f64)> {
        let mut c: Vec<(f64, f64)> = self.points.iter().map(|p| (p.z.re, p.z.im)).collect();
        if let Some(p) = self.points.first() {
            c.push((p.z.re, p.z.im));
        }
        c
    }
}

/// Lifts a `rho`-symmetric base orbit through `L`, tracking the root nearest
/// to the previous sample. The initial sheet is given by `branch`.
pub fn lc_lift_orbit(orbit: &Orbit, branch: Branch, symmetry_tol: f64) -> Result<LiftedCurve> {
    let base = &orbit.states;
    let n = base.len();
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("need an even number of samples (got {n})")));
    }
    let curve: Vec<(f64, f64)> = base.iter().map(|x| (x.q1(), x.q2())).collect();
    let winding = winding_number(&curve)?;
    if winding % 2 == 0 {
        return Err(Error::EvenWinding(winding));
    }
    let sym = (0..n).map(|k| rho(&base[(n - k) % n]).dist_inf(&base[k])).fold(0.0, f64::max);
    if !(sym <= symmetry_tol) {
        return Err(Error::SymmetryViolated {
            what: "base orbit rho symmetry".into(),
            residual: sym,
            tol: symmetry_tol,
        });
    }

    let mut points = Vec::with_capacity(2 * n);
    let mut prev = lc_lift_point(&base[0], branch)?;
    points.push(prev);
    let mut max_step = 0.0f64;
    for k in 1..=2 * n {
        let x = &base[k % n];
        let q = C64::new(x.q1(), x.q2());
        if q.norm() == 0.0 {
            return Err(Error::Origin);
        }
        let r = q.sqrt();
        let (near, far) = if (r - prev.z).norm() <= (-r - prev.z).norm() { (r, -r) } else { (-r, r) };
        // both roots about equally close: the sampling is too coarse to
        // decide the sheet
        if (near - prev.z).norm() >= 0.5 * (far - prev.z).norm() {
            return Err(Error::BranchJump(k));
        }
        let next = lift_with_root(x, near);
        max_step = max_step.max((next.z - prev.z).norm());
        if k == 2 * n {
            let closure = next.dist_inf(&points[0]);
            let projection = points
                .iter()
                .enumerate()
                .map(|(i, u)| lc_forward(u).map(|s| s.dist_inf(&base[i % n])))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let m = 2 * n;
            let sigma1 = (0..m).map(|i| points[(m - i) % m].sigma1().dist_inf(&points[i])).fold(0.0, f64::max);
            let sigma2 = points[0].sigma2().dist_inf(&points[n]);
            let times = (0..m).map(|i| orbit.period * i as f64 / n as f64).collect();
            return Ok(LiftedCurve {
                coordinates: "lc".into(),
                winding,
                period: 2.0 * orbit.period,
                times,
                points,
                residuals: LiftResiduals { sigma1, sigma2, closure, projection, max_step },
            });
        }
        points.push(next);
        prev = next;
    }
    unreachable!("loop returns on its last iteration")
}
