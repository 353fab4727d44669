//! Decentralized multi-robot autonomy: group choice through nonlinear
//! opinion dynamics, individual decisions through weighted multi-objective
//! optimization on a discrete heading/speed grid, and an explore / exploit /
//! migrate bloom-sampling scenario to exercise both.

pub mod error;
pub mod geom;
pub mod harness;
pub mod ivp;
pub mod net;
pub mod opinion;
pub mod scenario;

pub use error::{Error, Result};
