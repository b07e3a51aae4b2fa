pub mod convolution;
pub mod error;
pub mod exterior;
pub mod field;
pub mod fixedpoint;
pub mod geometry;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod ode;
pub mod truncated;
pub mod verify;
pub mod volume;

pub use error::{Error, Result};
