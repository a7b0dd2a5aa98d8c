pub mod cli;
pub mod dynsys;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod net;
pub mod problems;
pub mod reduction;
pub mod uq;

pub use error::{Error, Result};
