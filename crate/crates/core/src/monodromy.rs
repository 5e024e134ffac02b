//! Reduced monodromy at the symmetric points of a symmetric periodic orbit.
//!
//! At a point `x` of `Fix(rho)` the tangent space splits into the `+1` and
//! `-1` eigenspaces of `d rho`, both Lagrangian. The `-1` part lies in
//! `ker dH` and contains `X_H(x)`, so an `R`-adapted symplectic basis of the
//! quotient `ker dH / <X_H>` is obtained from one vector of each eigenspace.
//! Half-period maps between the two symmetric points, written in such frames,
//! form a real couple `(Psi, Phi)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{integrate_variational, FlowOptions};
use crate::phase::{omega, Mat4, State4, Vec4};
use crate::real_sl2::{classify, real_krein_sign_with, KreinSign, OrbitClass, RealCouple, RealSL2, DEFAULT_TOL};
use crate::shooting::{Certificate, Orbit};
use crate::systems::Hamiltonian;

/// Gate for the determinant polish of a reduced map.
pub const DET_POLISH_GATE: f64 = 1e-6;

/// An `R`-adapted symplectic basis of `ker dH / <X_H>` at a point of a fixed
/// set: `d rho e_plus = e_plus`, `d rho e_minus = -e_minus`,
/// `omega(e_plus, e_minus) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedFrame {
    pub base: State4,
    pub inv_index: usize,
    pub e_plus: Vec4,
    pub e_minus: Vec4,
}

/// Invariant residuals of a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameResiduals {
    pub dh_plus: f64,
    pub dh_minus: f64,
    pub eigen_plus: f64,
    pub eigen_minus: f64,
    pub omega: f64,
}

impl FrameResiduals {
    pub fn max(&self) -> f64 {
        self.dh_plus.max(self.dh_minus).max(self.eigen_plus).max(self.eigen_minus).max(self.omega)
    }
}

impl ReducedFrame {
    /// The frame with `e_plus` scaled by `mu` and `e_minus` by `1/mu`: the
    /// remaining freedom of an adapted basis.
    pub fn rescaled(&self, mu: f64) -> Self {
        ReducedFrame { e_plus: self.e_plus * mu, e_minus: self.e_minus / mu, ..*self }
    }

    pub fn residuals<S: Hamiltonian + ?Sized>(&self, system: &S) -> Result<FrameResiduals> {
        let inv = system.involution(self.inv_index)?;
        let grad = system.gradient(&self.base);
        let r = inv.jacobian();
        Ok(FrameResiduals {
            dh_plus: grad.dot(&self.e_plus).abs(),
            dh_minus: grad.dot(&self.e_minus).abs(),
            eigen_plus: (r * self.e_plus - self.e_plus).amax(),
            eigen_minus: (r * self.e_minus + self.e_minus).amax(),
            omega: (omega(&self.e_plus, &self.e_minus) - 1.0).abs(),
        })
    }
}

/// Builds the adapted frame at `x`, which must lie on `Fix(rho_i)` within
/// `tol`.
///
/// `e_plus` spans `E_+ ∩ ker dH` and points towards increasing chart
/// coordinate. `e_minus` is the part of `E_-` Euclidean-orthogonal to `X_H`,
/// scaled so that `omega(e_plus, e_minus) = 1`.
pub fn build_reduced_frame<S: Hamiltonian + ?Sized>(
    system: &S,
    inv_index: usize,
    x: &State4,
    tol: f64,
) -> Result<ReducedFrame> {
    let inv = system.involution(inv_index)?;
    let fixed = inv.fixed_residual(x);
    if fixed > tol {
        return Err(Error::SymmetryViolated { what: format!("point on Fix({})", inv.name), residual: fixed, tol });
    }
    let grad = system.gradient(x);
    let xh = system.vector_field(x);
    let scale = x.norm_inf().max(1.0);
    if xh.amax() <= 1e-12 * scale {
        return Err(Error::ZeroVectorField(x.to_array()));
    }

    let mut e_plus = Vec4::zeros();
    e_plus[inv.chart] = grad[inv.free];
    e_plus[inv.free] = -grad[inv.chart];
    let n = e_plus.norm();
    if n <= 1e-14 * grad.norm().max(1.0) {
        return Err(Error::Tangency);
    }
    e_plus /= n;
    let orient = if e_plus[inv.chart] != 0.0 { e_plus[inv.chart] } else { e_plus[inv.free] };
    if orient < 0.0 {
        e_plus = -e_plus;
    }

    let mut e_minus = Vec4::zeros();
    e_minus[inv.section] = -xh[inv.residual];
    e_minus[inv.residual] = xh[inv.section];
    let pairing = omega(&e_plus, &e_minus);
    if pairing.abs() <= 1e-12 * e_minus.norm() {
        return Err(Error::Tangency);
    }
    e_minus /= pairing;
    Ok(ReducedFrame { base: *x, inv_index, e_plus, e_minus })
}

/// Matrix of the quotient map induced by `m` from `from` to `to`.
///
/// Entries come from symplectic pairings with the target frame; the `X_H`
/// component drops out because `omega(X_H, e) = 0` for `e` in `ker dH`.
pub fn reduce_map<S: Hamiltonian + ?Sized>(
    m: &Mat4,
    from: &ReducedFrame,
    to: &ReducedFrame,
    system: &S,
) -> Result<RealSL2> {
    let mp = m * from.e_plus;
    let mm = m * from.e_minus;
    let grad = system.gradient(&to.base);
    let leak = grad.dot(&mp).abs().max(grad.dot(&mm).abs());
    let size = grad.norm() * mp.norm().max(mm.norm()).max(1.0);
    if leak > 1e-6 * size.max(1.0) {
        return Err(Error::NotEnergyPreserving { residual: leak / size.max(1.0) });
    }
    let (fp, fm) = (&to.e_plus, &to.e_minus);
    let a = omega(&mp, fm);
    let c = omega(fp, &mp);
    let b = omega(&mm, fm);
    let d = omega(fp, &mm);
    let raw = RealSL2 { a, b, c, d };
    let det = raw.det();
    if !det.is_finite() || (det - 1.0).abs() > DET_POLISH_GATE {
        return Err(Error::Determinant { det, tol: DET_POLISH_GATE });
    }
    let s = det.sqrt().recip();
    Ok(RealSL2 { a: a * s, b: b * s, c: c * s, d: d * s })
}

/// Parity of the Conley-Zehnder index of a nondegenerate orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CzParity {
    Odd,
    Even,
    Undefined,
}

impl CzParity {
    pub fn of(class: OrbitClass) -> Self {
        match class {
            OrbitClass::Elliptic | OrbitClass::NegativeHyperbolic => CzParity::Odd,
            OrbitClass::PositiveHyperbolic => CzParity::Even,
            OrbitClass::DegeneratePlus | OrbitClass::DegenerateMinus => CzParity::Undefined,
        }
    }
}

/// Numerical residuals recorded with a report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportResiduals {
    /// `|R M R - M^{-1}|_inf / |M|_inf` at `v(0)` and `v(tau/2)`.
    pub coninv_0: f64,
    pub coninv_half: f64,
    /// `|a - d| / |M|_inf` at `v(0)` and `v(tau/2)`.
    pub slr_gap_0: f64,
    pub slr_gap_half: f64,
    /// `|tr M0 - tr M_half|`.
    pub trace_gap: f64,
    /// Entrywise gap between the reduction of the full monodromy and `Phi Psi`.
    pub product_gap: f64,
    /// `|M X_H - X_H|_inf` at `v(0)`.
    pub xh_invariance: f64,
    pub sympl_drift: f64,
    pub energy_drift: f64,
    /// Largest frame invariant residual.
    pub frame: f64,
}

/// Reduced monodromy data of one symmetric orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyReport {
    pub orbit_id: String,
    /// Unreduced monodromy, row-major; `None` for reports built from a couple.
    pub monodromy: Option<[[f64; 4]; 4]>,
    pub m0: RealSL2,
    pub m_half: RealSL2,
    pub couple: RealCouple,
    pub trace: f64,
    pub b_sign_0: Option<KreinSign>,
    pub b_sign_half: Option<KreinSign>,
    pub classification: OrbitClass,
    pub cz_parity: CzParity,
    pub doubly_symmetric: bool,
    pub residuals: ReportResiduals,
}

impl MonodromyReport {
    /// Report for a couple given directly as `(Psi, Phi)`.
    pub fn from_couple(orbit_id: &str, couple: RealCouple, doubly_symmetric: bool, tol: f64) -> Self {
        let m0 = couple.b * couple.a;
        let m_half = couple.a * couple.b;
        let classification = classify(&m0, tol);
        MonodromyReport {
            orbit_id: orbit_id.to_string(),
            monodromy: None,
            m0,
            m_half,
            couple,
            trace: m0.trace(),
            b_sign_0: real_krein_sign_with(&m0, DET_POLISH_GATE, tol).ok(),
            b_sign_half: real_krein_sign_with(&m_half, DET_POLISH_GATE, tol).ok(),
            classification,
            cz_parity: CzParity::of(classification),
            doubly_symmetric,
            residuals: ReportResiduals {
                coninv_0: m0.coninv_residual(),
                coninv_half: m_half.coninv_residual(),
                slr_gap_0: m0.slr_gap(),
                slr_gap_half: m_half.slr_gap(),
                trace_gap: (m0.trace() - m_half.trace()).abs(),
                ..Default::default()
            },
        }
    }

    /// `Some(true)` when both B-signs are defined and differ.
    pub fn signs_differ(&self) -> Option<bool> {
        Some(self.b_sign_0? != self.b_sign_half?)
    }

    /// B-signs differ exactly for negative hyperbolic orbits. Vacuous when
    /// the signs are undefined.
    pub fn sign_dichotomy_holds(&self) -> bool {
        match self.signs_differ() {
            Some(differ) => differ == (self.classification == OrbitClass::NegativeHyperbolic),
            None => self.classification.is_degenerate(),
        }
    }
}

/// Options of [`symmetric_orbit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub flow: FlowOptions,
    /// Width of the degenerate trace band.
    pub trace_tol: f64,
    /// Relative `SL^R` tolerance for the B-sign.
    pub slr_tol: f64,
    /// Bound on the orbit's recorded symmetry residuals.
    pub certificate_tol: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { flow: FlowOptions::default(), trace_tol: DEFAULT_TOL, slr_tol: 1e-6, certificate_tol: 1e-7 }
    }
}

/// Computes `Psi` and `Phi` from the half-period tangent maps started at the
/// two symmetric points, reduced in adapted frames there.
pub fn symmetric_orbit_report<S: Hamiltonian + ?Sized>(
    system: &S,
    orbit: &Orbit,
    opts: &ReportOptions,
) -> Result<MonodromyReport> {
    let res = &orbit.residuals;
    let worst = res.symmetry.max(res.fixed_start).max(res.fixed_half);
    if !(worst <= opts.certificate_tol) {
        return Err(Error::SymmetryViolated {
            what: "orbit symmetry certificate".into(),
            residual: worst,
            tol: opts.certificate_tol,
        });
    }
    let inv_index = orbit.certificate.primary();
    let inv = system.involution(inv_index)?;
    let half = orbit.period / 2.0;
    let v0 = orbit.x0;
    let v_half = orbit.half_state();

    let arc0 = integrate_variational(system, &v0, half, &opts.flow)?;
    let arc1 = integrate_variational(system, &v_half, half, &opts.flow)?;
    let d_psi = arc0.end_frame().expect("variational run");
    let d_phi = arc1.end_frame().expect("variational run");
    let m4 = d_phi * d_psi;

    let frame_tol = 1e-6;
    let f0 = build_reduced_frame(system, inv_index, &inv.project(&v0), frame_tol)?;
    let f1 = build_reduced_frame(system, inv_index, &inv.project(&v_half), frame_tol)?;
    let psi = reduce_map(&d_psi, &f0, &f1, system)?;
    let phi = reduce_map(&d_phi, &f1, &f0, system)?;
    let m0 = phi * psi;
    let m_half = psi * phi;
    let m0_direct = reduce_map(&m4, &f0, &f0, system)?;

    let xh = system.vector_field(&v0);
    let trace = m0.trace();
    let classification = classify(&m0, opts.trace_tol);
    let sign = |m: &RealSL2| match real_krein_sign_with(m, opts.slr_tol, opts.trace_tol) {
        Ok(s) => Ok(Some(s)),
        Err(Error::DegenerateTrace { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    let b_sign_0 = sign(&m0)?;
    let b_sign_half = sign(&m_half)?;
    let mut rows = [[0.0; 4]; 4];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m4[(i, j)];
        }
    }
    let frame = f0.residuals(system)?.max().max(f1.residuals(system)?.max());
    Ok(MonodromyReport {
        orbit_id: orbit.id(),
        monodromy: Some(rows),
        m0,
        m_half,
        couple: RealCouple { a: psi, b: phi },
        trace,
        b_sign_0,
        b_sign_half,
        classification,
        cz_parity: CzParity::of(classification),
        doubly_symmetric: matches!(orbit.certificate, Certificate::DoublySymmetric { .. }),
        residuals: ReportResiduals {
            coninv_0: m0.coninv_residual(),
            coninv_half: m_half.coninv_residual(),
            slr_gap_0: m0.slr_gap(),
            slr_gap_half: m_half.slr_gap(),
            trace_gap: (trace - m_half.trace()).abs(),
            product_gap: m0_direct.max_abs_diff(&m0) / m0.norm_inf().max(1.0),
            xh_invariance: (m4 * xh - xh).amax(),
            sympl_drift: arc0.stats.max_sympl_drift.max(arc1.stats.max_sympl_drift),
            energy_drift: arc0.stats.max_energy_drift.max(arc1.stats.max_energy_drift),
            frame,
        },
    })
}

/// An even cover of a negative hyperbolic orbit is bad.
pub fn is_bad_class(class: OrbitClass, cover: u32) -> Result<bool> {
    if cover == 0 {
        return Err(Error::InvalidInput("cover must be at least 1".into()));
    }
    if class.is_degenerate() {
        return Err(Error::DegenerateTrace { trace: if class == OrbitClass::DegeneratePlus { 2.0 } else { -2.0 } });
    }
    Ok(cover.is_multiple_of(2) && class == OrbitClass::NegativeHyperbolic)
}

pub fn is_bad(report: &MonodromyReport, cover: u32) -> Result<bool> {
    if report.classification.is_degenerate() {
        return Err(Error::DegenerateTrace { trace: report.trace });
    }
    is_bad_class(report.classification, cover)
}

fn power(m: &RealSL2, k: u32) -> RealSL2 {
    (1..k).fold(*m, |acc, _| acc * *m)
}

/// Contribution of the `cover`-fold iterate of an orbit of the given simple
/// reduced monodromy: `+1` good positive hyperbolic, `-1` elliptic or
/// negative hyperbolic, `0` bad.
pub fn sft_contribution(m0: &RealSL2, base: OrbitClass, cover: u32, tol: f64) -> Result<i64> {
    if is_bad_class(base, cover)? {
        return Ok(0);
    }
    let iterate = classify(&power(m0, cover), tol);
    match iterate {
        OrbitClass::PositiveHyperbolic => Ok(1),
        OrbitClass::Elliptic | OrbitClass::NegativeHyperbolic => Ok(-1),
        _ => Err(Error::DegenerateTrace { trace: power(m0, cover).trace() }),
    }
}

/// `#good positive hyperbolic - #(elliptic + negative hyperbolic)` over the
/// entries, each taken with its cover multiplicity. Degenerate entries are
/// reported together by index.
pub fn sft_euler_characteristic(entries: &[(&MonodromyReport, u32)], tol: f64) -> Result<i64> {
    let mut total = 0;
    let mut degenerate = Vec::new();
    for (i, (report, cover)) in entries.iter().enumerate() {
        if report.classification.is_degenerate() {
            degenerate.push(i);
            continue;
        }
        match sft_contribution(&report.m0, report.classification, *cover, tol) {
            Ok(c) => total += c,
            Err(Error::DegenerateTrace { .. }) => degenerate.push(i),
            Err(e) => return Err(e),
        }
    }
    if !degenerate.is_empty() {
        return Err(Error::DegenerateEntries(degenerate));
    }
    Ok(total)
}
