pub mod attention;
pub mod autodiff;
pub mod cli;
pub mod config;
pub mod data;
pub mod encoders;
pub mod error;
pub mod metrics;
pub mod model;

pub use error::{GcaError, Result};
