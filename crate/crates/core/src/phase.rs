//! Phase-space primitives for `T*R^2` with coordinates `(q1, q2, p1, p2)`.
//!
//! The symplectic form is `omega = dp ^ dq`, i.e. `omega(u, v) = u_p . v_q - u_q . v_p`,
//! so that `dH = omega(., X_H)` yields the usual Hamilton equations
//! `q' = dH/dp`, `p' = -dH/dq`.

use std::fmt;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Vec4 = Vector4<f64>;
pub type Mat4 = Matrix4<f64>;

/// A point `(q1, q2, p1, p2)` of the four-dimensional phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State4(pub Vec4);

impl State4 {
    pub fn new(q1: f64, q2: f64, p1: f64, p2: f64) -> Self {
        State4(Vec4::new(q1, q2, p1, p2))
    }

    pub fn from_array(x: [f64; 4]) -> Self {
        State4(Vec4::from(x))
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    pub fn q1(&self) -> f64 {
        self.0[0]
    }

    pub fn q2(&self) -> f64 {
        self.0[1]
    }

    pub fn p1(&self) -> f64 {
        self.0[2]
    }

    pub fn p2(&self) -> f64 {
        self.0[3]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.amax()
    }

    /// Maximum coordinate difference.
    pub fn dist_inf(&self, other: &State4) -> f64 {
        (self.0 - other.0).amax()
    }
}

impl fmt::Display for State4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.0[0], self.0[1], self.0[2], self.0[3])
    }
}

impl Serialize for State4 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for State4 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let x = <[f64; 4]>::deserialize(deserializer)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(serde::de::Error::custom("state entries must be finite"));
        }
        Ok(State4::from_array(x))
    }
}

/// Gram matrix of `omega`: `omega(u, v) = u^T Omega v`.
pub fn omega_matrix() -> Mat4 {
    Mat4::new(
        0.0, 0.0, -1.0, 0.0, //
        0.0, 0.0, 0.0, -1.0, //
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0,
    )
}

pub fn omega(u: &Vec4, v: &Vec4) -> f64 {
    u[2] * v[0] + u[3] * v[1] - u[0] * v[2] - u[1] * v[3]
}

/// `X_H = Omega^{-1} grad H = (H_p, -H_q)`.
pub fn hamiltonian_vector(grad: &Vec4) -> Vec4 {
    Vec4::new(grad[2], grad[3], -grad[0], -grad[1])
}

/// `|D^T Omega D - Omega|_inf`: zero for symplectic `D`.
pub fn symplectic_defect(d: &Mat4) -> f64 {
    let om = omega_matrix();
    (d.transpose() * om * d - om).amax()
}

/// `|D^T Omega D + Omega|_inf`: zero for antisymplectic `D`.
pub fn antisymplectic_defect(d: &Mat4) -> f64 {
    let om = omega_matrix();
    (d.transpose() * om * d + om).amax()
}
