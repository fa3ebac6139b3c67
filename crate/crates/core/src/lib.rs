pub mod bucket;
pub mod calibration;
pub mod chain;
pub mod density;
pub mod error;
pub mod models;
pub mod mred;
pub mod prior;
pub mod quadrature;
pub mod special;
pub mod varswap;

pub use error::{Error, Result};
