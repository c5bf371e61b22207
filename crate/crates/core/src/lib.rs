//! Numerical toolkit for the Marcinkiewicz integral and its dyadic, mollified
//! and sparse approximants on uniform planar grids, together with Muckenhoupt
//! weight constants and the experiment harness that checks the associated
//! norm inequalities at desk scale.

// Negated comparisons such as `!(p > 1.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cubes;
pub mod domination;
pub mod dyadic;
pub mod error;
pub mod experiments;
pub mod field;
pub mod fourier;
pub mod kernels;
pub mod maximal;
pub mod numeric;
pub mod operators;
pub mod parallel;
pub mod regression;
pub mod scenes;
pub mod spectral;
pub mod sphere;
pub mod weights;

pub use error::{MzError, Result};
pub use field::{GridSpec, QuadratureSpec, SampledField};
