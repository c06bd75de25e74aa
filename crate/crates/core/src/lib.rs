pub mod cli;
pub mod config;
pub mod dde;
pub mod error;
pub mod model;
pub mod normal_form;
pub mod stability;

pub use error::{Error, Result};
