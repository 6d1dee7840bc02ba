pub mod basis;
pub mod cache;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod output;
pub mod overlap;
pub mod quadrature;
pub mod runner;
pub mod talbot;
pub mod thermal;
pub mod work;

pub use error::{Error, Result};
