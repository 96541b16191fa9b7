//! Bounded C^n solutions of the second-order iterative functional equation
//! `phi(phi(x)) = h(phi(f(x))) + g(x)`.
//!
//! The equation is solved in its inverted form `phi = h^{-1}∘(phi²-g)∘f^{-1}`
//! by a fiber-contraction iteration that carries the solution together with
//! its first n derivative fields. The crate also measures the hypotheses the
//! underlying theorem needs (lower bounds on |h'|, |f'|, bounds on g and the
//! higher derivatives), solves the admissibility inequalities for the
//! contraction parameters, and verifies the computed solution a posteriori.
//!
//! The numeric kernel ([`expr`], [`jets`], [`funcspace`]) is generic over the
//! scalar type via [`real::Real`]; the solver pipeline runs in f64.

// `!(x > y)` is used on purpose throughout: unlike `x <= y` it also rejects
// NaN, which must always land on the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Convolution-style recurrences read better with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod expr;
pub mod funcspace;
pub mod hypotheses;
pub mod jets;
pub mod operator;
pub mod params;
pub mod real;
pub mod solver;

pub use expr::{parse, ParsedFunction};
pub use funcspace::GridFn;
pub use jets::Jet;
pub use real::Real;

/// Concrete aliases for the common instantiations of the numeric kernel.
pub type Jet32 = Jet<f32>;
pub type Jet64 = Jet<f64>;
pub type GridFn32 = GridFn<f32>;
pub type GridFn64 = GridFn<f64>;
