pub mod archive;
pub mod config;
pub mod control;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod kernel;
pub mod linalg;
pub mod quadrature;
pub mod scene;
pub mod specfun;

pub use error::{Error, Result};
pub use geometry::{Disk, Point};
