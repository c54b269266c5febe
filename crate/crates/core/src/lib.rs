//! Numerical toolkit for `∂t u = Δu + f(u)` with superlinear `f`.
//!
//! The structure function `F(s) = ∫ₛ^∞ du/f(u)` and the constant
//! `A = lim f′(s)F(s)` organise everything else: quasi-scaling, the
//! Cole–Hopf type transforms, integrability of `F(u₀)^{-r}` in uniformly
//! local spaces, and the resulting existence/nonexistence verdicts.

// negated comparisons are how NaN gets rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod cli;
pub mod evolve;
pub mod fd;
pub mod grid;
pub mod heat;
pub mod nonlinearity;
pub mod numerics;
pub mod singular;
pub mod transforms;

pub use nonlinearity::{Nonlinearity, Side};
