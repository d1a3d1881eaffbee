pub mod error;
pub mod isotropize;
pub mod kspike1d;
pub mod learner;
pub mod linalg;
pub mod lower_bounds;
pub mod model;
pub mod sampling;
pub mod spectral;
pub mod synthetic;

pub use error::{Error, Result};
