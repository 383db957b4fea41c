//! Regression toolkit and benchmark harness for tabular house-price data.

pub mod bench;
pub mod boost;
pub mod cart;
pub mod data;
pub mod error;
pub mod forest;
pub mod linreg;
pub mod matrix;
pub mod metrics;
pub mod mlp;
pub mod model;
pub mod rng;
pub mod select;
pub mod svr;

pub use error::{Error, Result};
pub use matrix::Matrix;
