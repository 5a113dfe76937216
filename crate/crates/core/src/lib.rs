pub mod analysis;
pub mod config;
pub mod dsfd;
pub mod error;
pub mod experiment;
pub mod fd;
pub mod field;
pub mod hd;
pub mod lindblad;
pub mod liouville;
pub mod numeric;
pub mod pipeline;
pub mod spectrum;
pub mod system;
pub mod units;

pub use error::{Error, Result};
