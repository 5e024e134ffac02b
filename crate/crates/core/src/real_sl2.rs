//! Two-dimensional real symplectic algebra.
//!
//! Everything here lives in `SL(2,R)` with the standard real structure
//! `R = diag(1, -1)`. A matrix is in `SL^R` form when `R M R = M^{-1}`, which
//! for unit determinant means the two diagonal entries agree. For such a
//! matrix away from trace `+-2` the off-diagonal entry `b` cannot vanish and
//! its sign is the real Krein sign (the B-sign of a reduced monodromy).

use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default width of the degenerate trace band and of the `SL^R` test.
pub const DEFAULT_TOL: f64 = 1e-9;

/// A 2x2 real matrix `[[a, b], [c, d]]` with `ad - bc = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealSL2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RealSL2 {
    pub const IDENTITY: RealSL2 = RealSL2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    /// Checked constructor: fails unless `|ad - bc - 1| <= tol`.
    pub fn new(a: f64, b: f64, c: f64, d: f64, tol: f64) -> Result<Self> {
        let m = RealSL2 { a, b, c, d };
        let det = m.det();
        if !det.is_finite() || (det - 1.0).abs() > tol {
            return Err(Error::Determinant { det, tol });
        }
        Ok(m)
    }

    /// Builds the matrix without checking the determinant. Callers are
    /// responsible for the invariant.
    pub(crate) fn from_entries(a: f64, b: f64, c: f64, d: f64) -> Self {
        RealSL2 { a, b, c, d }
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    /// Inverse of a unit-determinant matrix.
    pub fn inverse(&self) -> Self {
        RealSL2::from_entries(self.d, -self.b, -self.c, self.a)
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (self.a.abs() + self.b.abs()).max(self.c.abs() + self.d.abs())
    }

    /// Entrywise maximum of `|self - other|`.
    pub fn max_abs_diff(&self, other: &RealSL2) -> f64 {
        (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
            .max((self.d - other.d).abs())
    }

    /// `R M R` with `R = diag(1, -1)`.
    pub fn reflect(&self) -> Self {
        RealSL2::from_entries(self.a, -self.b, -self.c, self.d)
    }

    /// Conjugation by `diag(mu, 1/mu)`: the residual basis freedom of an
    /// `R`-adapted symplectic frame. Sends `b` to `mu^2 b` and `c` to `c / mu^2`.
    pub fn rescale(&self, mu: f64) -> Self {
        RealSL2::from_entries(self.a, mu * mu * self.b, self.c / (mu * mu), self.d)
    }

    /// Relative `SL^R` gap `|a - d| / max(1, |M|_inf)`.
    pub fn slr_gap(&self) -> f64 {
        (self.a - self.d).abs() / self.norm_inf().max(1.0)
    }

    pub fn is_slr(&self, tol: f64) -> bool {
        self.slr_gap() <= tol
    }

    /// Relative residual of `R M R = M^{-1}`.
    pub fn coninv_residual(&self) -> f64 {
        self.reflect().max_abs_diff(&self.inverse()) / self.norm_inf().max(1.0)
    }
}

impl Mul for RealSL2 {
    type Output = RealSL2;

    fn mul(self, rhs: RealSL2) -> RealSL2 {
        RealSL2::from_entries(
            self.a * rhs.a + self.b * rhs.c,
            self.a * rhs.b + self.b * rhs.d,
            self.c * rhs.a + self.d * rhs.c,
            self.c * rhs.b + self.d * rhs.d,
        )
    }
}

impl fmt::Display for RealSL2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

impl Serialize for RealSL2 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RealSL2 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let [[a, b], [c, d]] = <[[f64; 2]; 2]>::deserialize(deserializer)?;
        RealSL2::new(a, b, c, d, 1e-6).map_err(serde::de::Error::custom)
    }
}

/// Trace classification of a reduced monodromy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitClass {
    PositiveHyperbolic,
    NegativeHyperbolic,
    Elliptic,
    DegeneratePlus,
    DegenerateMinus,
}

impl OrbitClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            OrbitClass::PositiveHyperbolic => "positive-hyperbolic",
            OrbitClass::NegativeHyperbolic => "negative-hyperbolic",
            OrbitClass::Elliptic => "elliptic",
            OrbitClass::DegeneratePlus => "degenerate-plus",
            OrbitClass::DegenerateMinus => "degenerate-minus",
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, OrbitClass::DegeneratePlus | OrbitClass::DegenerateMinus)
    }

    /// Elliptic orbits are exactly the linearly stable ones in dimension four.
    pub fn is_stable(&self) -> bool {
        *self == OrbitClass::Elliptic
    }
}

impl fmt::Display for OrbitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for OrbitClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive-hyperbolic" => Ok(OrbitClass::PositiveHyperbolic),
            "negative-hyperbolic" => Ok(OrbitClass::NegativeHyperbolic),
            "elliptic" => Ok(OrbitClass::Elliptic),
            "degenerate-plus" => Ok(OrbitClass::DegeneratePlus),
            "degenerate-minus" => Ok(OrbitClass::DegenerateMinus),
            other => Err(Error::InvalidInput(format!("unknown orbit class {other:?}"))),
        }
    }
}

/// Classify a trace value; `|trace -+ 2| <= tol` maps to the degenerate classes.
pub fn classify_trace(trace: f64, tol: f64) -> OrbitClass {
    if (trace - 2.0).abs() <= tol {
        OrbitClass::DegeneratePlus
    } else if (trace + 2.0).abs() <= tol {
        OrbitClass::DegenerateMinus
    } else if trace > 2.0 {
        OrbitClass::PositiveHyperbolic
    } else if trace < -2.0 {
        OrbitClass::NegativeHyperbolic
    } else {
        OrbitClass::Elliptic
    }
}

pub fn classify(m: &RealSL2, tol: f64) -> OrbitClass {
    classify_trace(m.trace(), tol)
}

/// Sign of the off-diagonal entry `b` of an `SL^R` matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KreinSign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl KreinSign {
    pub fn symbol(&self) -> &'static str {
        match self {
            KreinSign::Plus => "+",
            KreinSign::Minus => "-",
        }
    }
}

impl fmt::Display for KreinSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Real Krein sign with separate tolerances for the `SL^R` test (relative)
/// and for the degenerate trace band (absolute).
pub fn real_krein_sign_with(m: &RealSL2, slr_tol: f64, trace_tol: f64) -> Result<KreinSign> {
    let gap = m.slr_gap();
    if gap > slr_tol {
        return Err(Error::NotSlrForm { gap, tol: slr_tol });
    }
    let trace = m.trace();
    if (trace.abs() - 2.0).abs() <= trace_tol {
        return Err(Error::DegenerateTrace { trace });
    }
    // Away from the band a^2 - bc = 1 with |a| != 1 forces b != 0.
    Ok(if m.b > 0.0 { KreinSign::Plus } else { KreinSign::Minus })
}

pub fn real_krein_sign(m: &RealSL2, tol: f64) -> Result<KreinSign> {
    real_krein_sign_with(m, tol, tol)
}

/// A pair `(A, B)` in `SL(2,R)` with `R A R = B^{-1}`.
///
/// In the orbit picture `A` is the half-period map from the first symmetric
/// point to the second and `B` the one back, so `BA` and `AB` are the reduced
/// monodromies at the two symmetric points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealCouple {
    pub a: RealSL2,
    pub b: RealSL2,
}

impl RealCouple {
    /// The unique partner `B = (R A R)^{-1} = [[d, b], [c, a]]`.
    pub fn from_a(a: RealSL2) -> Self {
        let b = RealSL2::from_entries(a.d, a.b, a.c, a.a);
        RealCouple { a, b }
    }

    /// Checked constructor for a pair measured independently (e.g. from a
    /// numerically integrated orbit).
    pub fn new(a: RealSL2, b: RealSL2, tol: f64) -> Result<Self> {
        let residual = Self::relation_residual(&a, &b);
        if residual > tol {
            return Err(Error::SymmetryViolated { what: "R A R = B^-1".into(), residual, tol });
        }
        Ok(RealCouple { a, b })
    }

    /// Relative residual of `R A R = B^{-1}`.
    pub fn relation_residual(a: &RealSL2, b: &RealSL2) -> f64 {
        a.reflect().max_abs_diff(&b.inverse()) / a.norm_inf().max(b.norm_inf()).max(1.0)
    }

    /// `(AB, BA)`; both have diagonal `ad + bc` in terms of the entries of `A`.
    pub fn products(&self) -> (RealSL2, RealSL2) {
        (self.a * self.b, self.b * self.a)
    }

    /// Returns `(signs_differ, negative_hyperbolic)` for the products. The two
    /// flags always agree; they are exposed separately so callers can check it.
    pub fn signs_differ_iff_negative(&self, tol: f64) -> Result<(bool, bool)> {
        let (ab, ba) = self.products();
        let trace = ab.trace();
        if (trace.abs() - 2.0).abs() <= tol {
            return Err(Error::DegenerateTrace { trace });
        }
        let s_ab = real_krein_sign(&ab, tol)?;
        let s_ba = real_krein_sign(&ba, tol)?;
        Ok((s_ab != s_ba, classify(&ab, tol) == OrbitClass::NegativeHyperbolic))
    }

    /// Symmetric couples have both members conjugated to their inverses by
    /// `R`, i.e. both in `SL^R`; together with the couple relation this
    /// forces `A = B`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.a.coninv_residual() <= tol && self.b.coninv_residual() <= tol
    }
}
