//! File formats, batch runs and the command line around `ztm-core`.

pub mod cache;
pub mod cli;
pub mod error;
pub mod inspect;
pub mod io;
pub mod runner;

pub use error::{Error, Result};
