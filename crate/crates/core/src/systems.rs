//! Concrete two-degree-of-freedom Hamiltonians with their reflection symmetries.
//!
//! Every involution used here is a linear sign flip of the coordinates, so its
//! differential is the same diagonal matrix everywhere and its fixed set is a
//! coordinate plane. Two of the coordinates vanish on the fixed set; the first
//! of them serves as the crossing section for shooting and the second as the
//! perpendicularity residual. The two coordinates that stay free form the
//! chart of the fixed set: the first is the shooting parameter, the second is
//! solved from the energy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{hamiltonian_vector, Mat4, State4, Vec4};

/// Root selection for the free chart coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(&self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    /// Accepts `+`/`-`, `plus`/`minus`, and the Hill names `retro`/`direct`
    /// (a start on the positive x-axis with `p2 < q1` moves clockwise).
    pub fn parse(s: &str) -> Option<Branch> {
        match s {
            "+" | "plus" | "direct" | "prograde" => Some(Branch::Plus),
            "-" | "minus" | "retro" | "retrograde" => Some(Branch::Minus),
            _ => None,
        }
    }
}

/// A linear antisymplectic involution `x -> diag(signs) x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Involution {
    pub name: &'static str,
    pub signs: [f64; 4],
    /// Coordinate that vanishes on the fixed set and is used as crossing section.
    pub section: usize,
    /// Second vanishing coordinate: the perpendicularity residual at a crossing.
    pub residual: usize,
    /// Free coordinate used as the shooting parameter.
    pub chart: usize,
    /// Free coordinate solved from the energy.
    pub free: usize,
}

impl Involution {
    fn from_signs(name: &'static str, signs: [f64; 4]) -> Self {
        let zero: Vec<usize> = (0..4).filter(|&i| signs[i] < 0.0).collect();
        let fixed: Vec<usize> = (0..4).filter(|&i| signs[i] > 0.0).collect();
        assert!(zero.len() == 2 && fixed.len() == 2, "involution must fix a plane");
        Involution { name, signs, section: zero[0], residual: zero[1], chart: fixed[0], free: fixed[1] }
    }

    pub fn apply(&self, x: &State4) -> State4 {
        State4(x.0.component_mul(&Vec4::from(self.signs)))
    }

    /// Differential of the involution (constant).
    pub fn jacobian(&self) -> Mat4 {
        Mat4::from_diagonal(&Vec4::from(self.signs))
    }

    /// Distance of `x` from the fixed set.
    pub fn fixed_residual(&self, x: &State4) -> f64 {
        (0..4).filter(|&i| self.signs[i] < 0.0).map(|i| x.0[i].abs()).fold(0.0, f64::max)
    }

    pub fn is_fixed(&self, x: &State4, tol: f64) -> bool {
        self.fixed_residual(x) <= tol
    }

    /// Orthogonal projection onto the fixed set.
    pub fn project(&self, x: &State4) -> State4 {
        State4((x.0 + self.apply(x).0) * 0.5)
    }
}

/// A Hamiltonian system on (a domain of) `T*R^2` together with its reflection
/// symmetries.
pub trait Hamiltonian: Send + Sync {
    fn name(&self) -> &str;

    fn energy(&self, x: &State4) -> f64;

    fn gradient(&self, x: &State4) -> Vec4;

    fn hessian(&self, x: &State4) -> Mat4;

    /// False on the excluded sets (collisions, boundary of the half-plane).
    fn in_domain(&self, x: &State4) -> bool;

    fn involutions(&self) -> &[Involution];

    /// Closed-form solve for the free coordinate of `Fix(involution)` at the
    /// given chart coordinate and energy; `None` outside the Hill region.
    fn solve_free(&self, inv_index: usize, coord: f64, energy: f64, branch: Branch) -> Option<f64>;

    fn vector_field(&self, x: &State4) -> Vec4 {
        hamiltonian_vector(&self.gradient(x))
    }

    /// `D X_H = Omega^{-1} Hess H`.
    fn vector_field_jacobian(&self, x: &State4) -> Mat4 {
        let h = self.hessian(x);
        let mut out = Mat4::zeros();
        for j in 0..4 {
            out[(0, j)] = h[(2, j)];
            out[(1, j)] = h[(3, j)];
            out[(2, j)] = -h[(0, j)];
            out[(3, j)] = -h[(1, j)];
        }
        out
    }

    fn involution(&self, index: usize) -> Result<&Involution> {
        self.involutions()
            .get(index)
            .ok_or_else(|| Error::InvalidInput(format!("{} has no involution {index}", self.name())))
    }
}

/// Minimum distance to the collision for Hill's problem.
pub const HILL_COLLISION_GUARD: f64 = 1e-10;
/// Minimum height above the real axis for the Langmuir problem.
pub const LANGMUIR_AXIS_GUARD: f64 = 1e-10;

/// Hill's lunar problem in rotating coordinates,
/// `H = ((p1 + q2)^2 + (p2 - q1)^2)/2 - 1/|q| - 3 q1^2 / 2`.
#[derive(Debug, Clone)]
pub struct Hill {
    involutions: [Involution; 2],
}

impl Default for Hill {
    fn default() -> Self {
        Hill {
            involutions: [
                // reflection at the x-axis
                Involution::from_signs("rho1", [1.0, -1.0, -1.0, 1.0]),
                // reflection at the y-axis
                Involution::from_signs("rho2", [-1.0, 1.0, 1.0, -1.0]),
            ],
        }
    }
}

pub fn hill_system() -> Hill {
    Hill::default()
}

impl Hamiltonian for Hill {
    fn name(&self) -> &str {
        "hill"
    }

    fn energy(&self, x: &State4) -> f64 {
        let [q1, q2, p1, p2] = x.to_array();
        let r = q1.hypot(q2);
        0.5 * ((p1 + q2).powi(2) + (p2 - q1).powi(2)) - 1.0 / r - 1.5 * q1 * q1
    }

    fn gradient(&self, x: &State4) -> Vec4 {
        let [q1, q2, p1, p2] = x.to_array();
        let r = q1.hypot(q2);
        let r3 = r * r * r;
        let u = p1 + q2;
        let v = p2 - q1;
        Vec4::new(-v + q1 / r3 - 3.0 * q1, u + q2 / r3, u, v)
    }

    fn hessian(&self, x: &State4) -> Mat4 {
        let [q1, q2, ..] = x.to_array();
        let r = q1.hypot(q2);
        let r3 = r * r * r;
        let r5 = r3 * r * r;
        let h11 = -2.0 + 1.0 / r3 - 3.0 * q1 * q1 / r5;
        let h12 = -3.0 * q1 * q2 / r5;
        let h22 = 1.0 + 1.0 / r3 - 3.0 * q2 * q2 / r5;
        Mat4::new(
            h11, h12, 0.0, -1.0, //
            h12, h22, 1.0, 0.0, //
            0.0, 1.0, 1.0, 0.0, //
            -1.0, 0.0, 0.0, 1.0,
        )
    }

    fn in_domain(&self, x: &State4) -> bool {
        x.is_finite() && x.q1().hypot(x.q2()) >= HILL_COLLISION_GUARD
    }

    fn involutions(&self) -> &[Involution] {
        &self.involutions
    }

    fn solve_free(&self, inv_index: usize, coord: f64, energy: f64, branch: Branch) -> Option<f64> {
        if coord == 0.0 {
            return None;
        }
        match inv_index {
            // q2 = p1 = 0: (p2 - q1)^2 / 2 = E + 1/|q1| + 3 q1^2 / 2
            0 => {
                let rhs = 2.0 * (energy + 1.0 / coord.abs() + 1.5 * coord * coord);
                (rhs >= 0.0).then(|| coord + branch.sign() * rhs.sqrt())
            }
            // q1 = p2 = 0: (p1 + q2)^2 / 2 = E + 1/|q2|
            1 => {
                let rhs = 2.0 * (energy + 1.0 / coord.abs());
                (rhs >= 0.0).then(|| -coord + branch.sign() * rhs.sqrt())
            }
            _ => None,
        }
    }
}

/// Langmuir Hamiltonian on the cotangent bundle of the upper half-plane,
/// `H = |p|^2 - 4/|q| + 1/(2 q2)`.
#[derive(Debug, Clone)]
pub struct Langmuir {
    involutions: [Involution; 2],
}

impl Default for Langmuir {
    fn default() -> Self {
        Langmuir {
            involutions: [
                // (q, p) -> (-conj q, conj p): reflection at the imaginary axis
                Involution::from_signs("rho1", [-1.0, 1.0, 1.0, -1.0]),
                // (q, p) -> (q, -p): fixed set is the brake points
                Involution::from_signs("rho2", [1.0, 1.0, -1.0, -1.0]),
            ],
        }
    }
}

pub fn langmuir_system() -> Langmuir {
    Langmuir::default()
}

impl Langmuir {
    fn potential(q1: f64, q2: f64) -> f64 {
        -4.0 / q1.hypot(q2) + 0.5 / q2
    }

    /// Zero-velocity curve: solve `V(q1, q2) = E` for `q2 > 0`. For `q1 != 0`
    /// the potential along a vertical line has a single minimum at
    /// `q2 = |q1|/sqrt(3)` with value `-3 sqrt(3) / (2 |q1|)`; the branch picks
    /// the root below (`Minus`) or above (`Plus`) it.
    fn brake_height(q1: f64, energy: f64, branch: Branch) -> Option<f64> {
        if q1 == 0.0 {
            return (energy < 0.0).then(|| -3.5 / energy);
        }
        let q_min = q1.abs() / 3f64.sqrt();
        let v_min = Self::potential(q1, q_min);
        if energy < v_min {
            return None;
        }
        let f = |q2: f64| Self::potential(q1, q2) - energy;
        let (mut lo, mut hi) = match branch {
            Branch::Minus => (0.0, q_min),
            Branch::Plus => {
                if energy >= 0.0 {
                    return None;
                }
                let mut hi = 2.0 * q_min;
                while f(hi) < 0.0 {
                    hi *= 2.0;
                    if hi > 1e12 {
                        return None;
                    }
                }
                (q_min, hi)
            }
        };
        // f(lo) and f(hi) have opposite signs (lo = 0 stands for +infinity).
        let lo_positive = match branch {
            Branch::Minus => true,
            Branch::Plus => false,
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (f(mid) > 0.0) == lo_positive {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

impl Hamiltonian for Langmuir {
    fn name(&self) -> &str {
        "langmuir"
    }

    fn energy(&self, x: &State4) -> f64 {
        let [q1, q2, p1, p2] = x.to_array();
        p1 * p1 + p2 * p2 + Self::potential(q1, q2)
    }

    fn gradient(&self, x: &State4) -> Vec4 {
        let [q1, q2, p1, p2] = x.to_array();
        let r = q1.hypot(q2);
        let r3 = r * r * r;
        Vec4::new(4.0 * q1 / r3, 4.0 * q2 / r3 - 0.5 / (q2 * q2), 2.0 * p1, 2.0 * p2)
    }

    fn hessian(&self, x: &State4) -> Mat4 {
        let [q1, q2, ..] = x.to_array();
        let r = q1.hypot(q2);
        let r3 = r * r * r;
        let r5 = r3 * r * r;
        let h11 = 4.0 / r3 - 12.0 * q1 * q1 / r5;
        let h12 = -12.0 * q1 * q2 / r5;
        let h22 = 4.0 / r3 - 12.0 * q2 * q2 / r5 + 1.0 / (q2 * q2 * q2);
        Mat4::new(
            h11, h12, 0.0, 0.0, //
            h12, h22, 0.0, 0.0, //
            0.0, 0.0, 2.0, 0.0, //
            0.0, 0.0, 0.0, 2.0,
        )
    }

    fn in_domain(&self, x: &State4) -> bool {
        x.is_finite() && x.q2() >= LANGMUIR_AXIS_GUARD
    }

    fn involutions(&self) -> &[Involution] {
        &self.involutions
    }

    fn solve_free(&self, inv_index: usize, coord: f64, energy: f64, branch: Branch) -> Option<f64> {
        match inv_index {
            // q1 = p2 = 0, chart q2, solve p1^2 = E + 7 / (2 q2)
            0 => {
                if coord <= 0.0 {
                    return None;
                }
                let rhs = energy + 3.5 / coord;
                (rhs >= 0.0).then(|| branch.sign() * rhs.sqrt())
            }
            // p = 0, chart q1, solve the zero-velocity curve for q2
            1 => Self::brake_height(coord, energy, branch),
            _ => None,
        }
    }
}

/// Looks a system up by its CLI name.
pub fn system_by_name(name: &str) -> Option<Box<dyn Hamiltonian>> {
    match name {
        "hill" => Some(Box::new(hill_system())),
        "langmuir" => Some(Box::new(langmuir_system())),
        _ => None,
    }
}

/// Start state of a shooting attempt: the point of `Fix(involution)` with the
/// given chart coordinate and energy, Newton-polished so that
/// `|H - energy| <= 1e-12 max(1, |energy|)`.
pub fn state_on_fixed_set<S: Hamiltonian + ?Sized>(
    system: &S,
    inv_index: usize,
    coord: f64,
    energy: f64,
    branch: Branch,
) -> Result<State4> {
    let inv = system.involution(inv_index)?;
    let free = system.solve_free(inv_index, coord, energy, branch).ok_or(Error::EnergyUnreachable { coord, energy })?;
    let mut x = Vec4::zeros();
    x[inv.chart] = coord;
    x[inv.free] = free;
    let mut state = State4(x);
    if !system.in_domain(&state) {
        return Err(Error::EnergyUnreachable { coord, energy });
    }
    let tol = 1e-12 * energy.abs().max(1.0);
    for _ in 0..3 {
        let residual = system.energy(&state) - energy;
        if residual.abs() <= 0.25 * tol {
            break;
        }
        let slope = system.gradient(&state)[inv.free];
        if slope.abs() < 1e-8 {
            break;
        }
        let mut next = state;
        next.0[inv.free] -= residual / slope;
        if (system.energy(&next) - energy).abs() < residual.abs() {
            state = next;
        } else {
            break;
        }
    }
    let residual = (system.energy(&state) - energy).abs();
    if residual > tol {
        return Err(Error::EnergyUnreachable { coord, energy });
    }
    Ok(state)
}

/// Result of a Newton search for equilibria.
#[derive(Debug, Clone, Default)]
pub struct CriticalPoints {
    /// Distinct zeros of `grad H` with their energies.
    pub points: Vec<(State4, f64)>,
    /// Seeds from which Newton failed, with the reason.
    pub failures: Vec<(State4, Error)>,
}

impl CriticalPoints {
    /// Energies of the critical points, sorted and deduplicated.
    pub fn values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.points.iter().map(|(_, e)| *e).collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        v
    }
}

/// Newton-refined zeros of `grad H` from the given seeds, deduplicated.
pub fn critical_values<S: Hamiltonian + ?Sized>(system: &S, seeds: &[State4], tol: f64) -> CriticalPoints {
    let mut out = CriticalPoints::default();
    for seed in seeds {
        match newton_critical(system, seed, tol) {
            Ok(x) => {
                if !out.points.iter().any(|(y, _)| y.dist_inf(&x) <= 1e-8) {
                    out.points.push((x, system.energy(&x)));
                }
            }
            Err(e) => out.failures.push((*seed, e)),
        }
    }
    out
}

fn newton_critical<S: Hamiltonian + ?Sized>(system: &S, seed: &State4, tol: f64) -> Result<State4> {
    let fail = || Error::NoConvergence { seed: seed.to_array() };
    let mut x = *seed;
    if !system.in_domain(&x) {
        return Err(fail());
    }
    for _ in 0..100 {
        let g = system.gradient(&x);
        let step = system.hessian(&x).lu().solve(&g).ok_or_else(fail)?;
        // a small gradient alone is not enough: it also decays at infinity
        if g.amax() <= tol && step.amax() <= 1e-8 * x.norm_inf().max(1.0) {
            return Ok(x);
        }
        // damped update keeps iterates inside the domain
        let mut lambda = 1.0;
        let mut next = State4(x.0 - step);
        while (!system.in_domain(&next) || system.gradient(&next).amax() >= g.amax()) && lambda > 1e-6 {
            lambda *= 0.5;
            next = State4(x.0 - step * lambda);
        }
        if !system.in_domain(&next) || lambda <= 1e-6 {
            return Err(fail());
        }
        x = next;
    }
    Err(fail())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::antisymplectic_defect;

    #[test]
    fn hill_energy_examples() {
        let hill = hill_system();
        assert!((hill.energy(&State4::new(1.0, 0.0, 0.0, 1.0)) + 2.5).abs() < 1e-15);
        let s = State4::new(0.5, 0.2, -0.1, 0.4);
        let rho2 = &hill.involutions()[1];
        assert!((hill.energy(&rho2.apply(&s)) - hill.energy(&s)).abs() < 1e-15);
        let x = State4::new(0.3, -0.7, 2.0, -1.0);
        let rho1 = &hill.involutions()[0];
        assert_eq!(rho1.apply(&rho1.apply(&x)), x);
    }

    #[test]
    fn langmuir_examples() {
        let lang = langmuir_system();
        assert!((lang.energy(&State4::new(0.0, 1.0, 0.0, 0.0)) + 3.5).abs() < 1e-15);
        let rho1 = &lang.involutions()[0];
        assert_eq!(rho1.apply(&State4::new(0.2, 1.0, -0.3, 0.5)), State4::new(-0.2, 1.0, -0.3, -0.5));
        assert!(!lang.in_domain(&State4::new(0.0, -1.0, 0.0, 0.0)));
    }

    #[test]
    fn involutions_are_antisymplectic_and_commute() {
        let systems: Vec<Box<dyn Hamiltonian>> = vec![Box::new(hill_system()), Box::new(langmuir_system())];
        for sys in &systems {
            let invs = sys.involutions();
            for inv in invs {
                assert_eq!(antisymplectic_defect(&inv.jacobian()), 0.0, "{} {}", sys.name(), inv.name);
            }
            let x = State4::new(0.3, 0.8, -0.4, 1.2);
            let ab = invs[0].apply(&invs[1].apply(&x));
            let ba = invs[1].apply(&invs[0].apply(&x));
            assert_eq!(ab, ba);
        }
    }

    #[test]
    fn fixed_set_starts() {
        let hill = hill_system();
        let x = state_on_fixed_set(&hill, 0, 0.2, -2.5, Branch::Minus).unwrap();
        let expected = 0.2 - 5.12f64.sqrt();
        assert!((x.p2() - expected).abs() < 1e-12);
        assert_eq!((x.q1(), x.q2(), x.p1()), (0.2, 0.0, 0.0));
        assert!((x.p2() + 2.0627417).abs() < 1e-7);
        assert!(matches!(
            state_on_fixed_set(&hill, 0, 0.2, -10.0, Branch::Minus),
            Err(Error::EnergyUnreachable { .. })
        ));

        let lang = langmuir_system();
        let x = state_on_fixed_set(&lang, 0, 1.0, -3.0, Branch::Plus).unwrap();
        assert_eq!(x.q1(), 0.0);
        assert_eq!(x.q2(), 1.0);
        assert!((x.p1() - 0.5f64.sqrt()).abs() < 1e-14);
        assert_eq!(x.p2(), 0.0);
    }

    #[test]
    fn brake_points_lie_on_zero_velocity_curve() {
        let lang = langmuir_system();
        for &q1 in &[0.1, 0.3, -0.4] {
            for branch in [Branch::Minus, Branch::Plus] {
                let x = state_on_fixed_set(&lang, 1, q1, -5.0, branch).unwrap();
                assert!((lang.energy(&x) + 5.0).abs() < 1e-12);
                assert!(lang.involutions()[1].is_fixed(&x, 0.0));
                assert_eq!(x.q1(), q1);
            }
        }
        // below the minimum of the potential along the vertical line
        assert!(state_on_fixed_set(&lang, 1, 0.1, -100.0, Branch::Plus).is_err());
    }

    #[test]
    fn hill_critical_points() {
        let hill = hill_system();
        let seeds = [State4::new(0.7, 0.0, 0.0, 0.7), State4::new(-0.7, 0.0, 0.0, -0.7)];
        let found = critical_values(&hill, &seeds, 1e-13);
        assert_eq!(found.points.len(), 2);
        let expected = -(3f64.powf(4.0 / 3.0)) / 2.0;
        for (x, e) in &found.points {
            assert!((e - expected).abs() < 1e-12);
            assert!((x.q1().abs() - 3f64.powf(-1.0 / 3.0)).abs() < 1e-12);
        }
        assert!((found.points[0].0.q1() + found.points[1].0.q1()).abs() < 1e-12);
        assert_eq!(found.values().len(), 1);
    }

    #[test]
    fn langmuir_has_no_critical_points() {
        let lang = langmuir_system();
        let seeds = [State4::new(0.0, 1.0, 0.0, 0.0), State4::new(0.5, 0.5, 0.1, -0.1)];
        let found = critical_values(&lang, &seeds, 1e-12);
        assert!(found.points.is_empty());
        assert_eq!(found.failures.len(), 2);
    }

    #[test]
    fn langmuir_gradient_never_vanishes_on_grid() {
        // brute-force scan of |grad V| on the upper half-plane
        let lang = langmuir_system();
        let mut min_norm = f64::INFINITY;
        for i in -50..=50 {
            for j in 1..=100 {
                let x = State4::new(i as f64 * 0.1, j as f64 * 0.05, 0.0, 0.0);
                let g = lang.gradient(&x);
                min_norm = min_norm.min(g[0].hypot(g[1]));
            }
        }
        assert!(min_norm > 1e-3, "min |grad V| = {min_norm}");
    }
}
