//! Analytical mechanics on a Riemannian configuration manifold: symbolic
//! scalar expressions, metric geometry, free and constrained second-order
//! fields, time constraints, moving frames and a fixed-step integrator.

pub mod constraints;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod frames;
pub mod geometry;
pub mod integrate;
pub mod sampling;
pub mod timeconstraint;

pub use error::{Error, Result};
pub use expr::{Expr, ExprError};
