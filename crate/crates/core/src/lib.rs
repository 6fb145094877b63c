//! Robust instability analysis for SISO linear systems.
//!
//! The robust instability radius of an unstable plant `g(s)` is the smallest
//! H-infinity norm of a stable perturbation `δ(s)` that internally stabilizes
//! the positive-feedback loop `1 = δ(s) g(s)`. This crate provides
//!
//! * [`poly`]: real polynomial arithmetic, root finding and Hurwitz tests,
//! * [`tf`]: rational transfer functions, L-infinity norms and the parity
//!   interlacing property,
//! * [`rir_fixed`]: bounds and certificates for a fixed plant, including the
//!   exact third-order characterization,
//! * [`rir_param`]: the radius for plant families `g_e(s)` whose equilibrium
//!   moves with the static gain `e = δ(0)` of the perturbation,
//! * [`models`]: the repressilator and FitzHugh–Nagumo case studies with
//!   nonlinear simulation and oscillation detection.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod models;
pub mod poly;
pub mod rir_fixed;
pub mod rir_param;
pub mod tf;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use poly::{RealPolynomial, RootCounts, RootSet, RootTag};
pub use tf::{NormConfig, NormResult, RationalTF};
