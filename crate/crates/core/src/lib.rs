pub mod classifier;
pub mod datagen;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod io;
pub mod kernel;
pub mod knn;
pub mod neighbors;
pub mod sample;
pub mod solver;
mod summation;
pub mod validation;

pub use error::{Error, Result};
