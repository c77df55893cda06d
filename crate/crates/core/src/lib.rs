//! Analysis toolkit for the discrete Kolmogorov predator-prey map with
//! Ricker prey growth.

pub mod center_manifold;
pub mod error;
pub mod fixed_points;
pub mod model;
pub mod nullclines;
pub mod orbit;
pub mod roots;

pub use error::{Error, Result};
pub use model::{absorbing_box, iterate, jacobian, step, AbsorbingBox, Coefficients, ModelParams, Orbit, State};
