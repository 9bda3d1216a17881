//! Scalar expressions on a chart: grammar, parsing, exact symbolic
//! differentiation, compiled evaluation and a finite-difference oracle.

mod expr;
mod jet;
mod parse;
pub mod random;
mod tape;

pub use expr::{Display, Expr, Func, Node};
pub use jet::{eval_jet2, fd_oracle, CompiledJet, Jet2};
pub use parse::{parse_expr, parse_with, UserFn};
pub use tape::Tape;

/// Exact symbolic partial derivative `∂e/∂x_i`.
pub fn diff(e: &Expr, i: usize) -> Expr {
    e.diff(i)
}
