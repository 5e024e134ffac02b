//! Symmetric periodic orbits of two-degree-of-freedom Hamiltonian systems.
//!
//! The crate finds symmetric and doubly symmetric periodic orbits by
//! perpendicular shooting, reduces their monodromy to the two-dimensional
//! quotient at the symmetric points, and reads off the real Krein signs
//! (B-signs) of the resulting real couple. Doubly symmetric orbits have equal
//! B-signs and hence are never negative hyperbolic; the library lets you check
//! that numerically on Hill's lunar problem and the Langmuir Hamiltonian.

// `!(x <= tol)` is the NaN-rejecting form of `x > tol`
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flow;
pub mod io;
pub mod levi_civita;
pub mod monodromy;
pub mod phase;
pub mod real_sl2;
pub mod shooting;
pub mod systems;

pub use error::{Error, Result};
pub use phase::{Mat4, State4, Vec4};
pub use real_sl2::{classify, real_krein_sign, KreinSign, OrbitClass, RealCouple, RealSL2};
