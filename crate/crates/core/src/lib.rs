pub mod analysis;
pub mod benchmarks;
pub mod config;
pub mod elasticity;
pub mod error;
pub mod friction;
pub mod hex;
pub mod interface;
pub mod io;
pub mod mesh;
pub mod mortar;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod stabilization;

pub use error::{Error, Result};
