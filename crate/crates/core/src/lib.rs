//! Beta regression with varying dispersion fitted by Fisher scoring, the
//! PRESS statistics and prediction coefficients built on its working
//! regression, and Monte Carlo designs for studying them.

pub mod error;
mod linalg;
pub mod measures;
pub mod model;
pub mod moments;
pub mod residuals;
pub mod scoring;
pub mod simulation;
pub mod special;

pub use error::{Error, Result};
pub use model::{FittedModel, LinkFunction, ModelSpec};
pub use scoring::{fit, FitOptions};
