//! Numerical toolkit for fractional p-Laplace type nonlocal operators
//!
//! ```text
//! L u(x) = P.V. ∫ |u(x) - u(y)|^{p-2} (u(x) - u(y)) K(x - y) dy
//! ```
//!
//! The crate evaluates `L` pointwise as a principal value, minimizes the
//! discrete Gagliardo energy for Dirichlet problems, and checks the weak,
//! comparison and viscosity notions of (super)solutions against each other.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod cli;
pub mod comparison;
pub mod config;
pub mod error;
pub mod function_space;
pub mod kernels;
pub mod par;
pub mod pv_engine;
pub mod quadrature;
pub mod viscosity;
pub mod weak_solver;

pub use error::{Error, Result};

/// `g(t) = |t|^{p-2} t`, with fast paths for the common integer exponents.
#[inline]
pub fn signed_power(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        t
    } else if p == 3.0 {
        t * t.abs()
    } else if p == 4.0 {
        t * t * t
    } else if t == 0.0 {
        0.0
    } else {
        t.abs().powf(p - 1.0).copysign(t)
    }
}

/// `|t|^p`.
#[inline]
pub fn abs_power(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        t * t
    } else if p == 3.0 {
        t * t * t.abs()
    } else if p == 4.0 {
        let t2 = t * t;
        t2 * t2
    } else {
        t.abs().powf(p)
    }
}

/// `|t|^{p-2}`, the derivative weight of `signed_power` up to `p - 1`.
#[inline]
pub fn weight_power(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else if p == 3.0 {
        t.abs()
    } else if p == 4.0 {
        t * t
    } else {
        t.abs().powf(p - 2.0)
    }
}

/// Exponent where the operator becomes singular on smooth functions with a
/// vanishing gradient: `2 / (2 - s)`.
pub fn critical_exponent(s: f64) -> f64 {
    2.0 / (2.0 - s)
}
