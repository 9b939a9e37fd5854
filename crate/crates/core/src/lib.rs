pub mod arith;
pub mod charsum;
pub mod cli;
pub mod congcount;
pub mod criterion;
pub mod cyclo;
pub mod dirichlet;
pub mod error;
pub mod fpoly;
pub mod intmat;
pub mod intpoly;
pub mod resring;
pub mod ser;
pub mod sieve;

pub use error::{Error, Result};
pub use intmat::{IntMatrix, SnfResult};
pub use intpoly::{CoprimeBasisDecomposition, IntPoly};
