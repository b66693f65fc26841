//! Young functions, Orlicz modulars and norms, Leray–Lions condition checks,
//! and a sub/supersolution solver for quasilinear Dirichlet problems.

pub mod error;
pub mod expr;
pub mod grid;
pub mod mesh;
pub mod operators;
pub mod orlicz;
pub mod quad;
pub mod roots;
pub mod solver;
pub mod young;

pub use error::{Error, Result};
