pub mod error;
pub mod harness;
pub mod inverse;
pub mod learning;
pub mod models;
pub mod rng;
pub mod sbm;
pub mod theory;

pub use error::{Error, Result};
