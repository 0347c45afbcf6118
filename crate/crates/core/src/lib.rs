pub mod data;
pub mod dist;
pub mod error;
pub mod forecast;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod sampler;
pub mod simulate;

pub use error::{Error, Result};
