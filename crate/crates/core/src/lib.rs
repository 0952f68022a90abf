pub mod beeloop;
pub mod car;
pub mod cli;
mod error;
pub mod mcr;
pub mod netcore;
pub mod seed;
pub mod stream;

pub use error::{Error, Result};
