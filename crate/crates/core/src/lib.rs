pub mod asymptotics;
pub mod cauchy;
pub mod complexgrid;
pub mod dynamics;
pub mod error;
pub mod farfield;
pub mod fit;
pub mod lab;
pub mod quad;
pub mod reduce;
pub mod scenarios;

pub use error::{Error, Result};
