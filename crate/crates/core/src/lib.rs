//! Numerical workbench for the dissipative semiclassical Schrödinger operator
//! H = −h²Δ + V₁ − iν(h)V₂ in one dimension.

pub mod acceptance;
pub mod besov;
pub mod dilation;
pub mod egorov;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod potential;
pub mod quantize;
pub mod resolvent;
pub mod scenario;

pub use error::{Error, Result};
pub use flow::{FlowParams, PhasePoint, Trajectory};
pub use linalg::C64;
pub use potential::{DampingShape, Potential, PotentialShape};
