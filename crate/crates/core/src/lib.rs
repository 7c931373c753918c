pub mod acceptance;
pub mod calculus;
pub mod construct;
pub mod error;
pub mod partition;
pub mod schauder;
pub mod timechange;
pub mod variation;

pub use error::{Error, Result};
