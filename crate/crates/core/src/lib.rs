//! Generators of approximate vanishing ideals.
//!
//! Given samples `X` in `[0, 1]^n`, [`oavi::oavi_fit`] builds a set `G` of
//! polynomials with leading coefficient 1 and mean squared value at most
//! `psi` over `X`, together with the order ideal `O` of monomials that do
//! not vanish. Each coefficient problem is a convex quadratic over an l1
//! ball, solved by one of the [`solvers`]. [`pipeline`] turns one model per
//! class into features for a linear classifier.

pub mod data;
pub mod error;
pub mod linalg;
pub mod oavi;
pub mod par;
pub mod pipeline;
pub mod solvers;
pub mod terms;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use oavi::{oavi_fit, GeneratorModel, Mode, OaviConfig, Polynomial, SolverKind};
pub use terms::{Term, TermList};
