//! Gate set tomography with parametrized over-rotation and depolarization
//! errors, estimated either by transformer models or by direct fitting.

pub mod autodiff;
pub mod bench;
pub mod circuit;
pub mod config;
pub mod experiment;
pub mod models;
pub mod params;
pub mod ptm;
pub mod training;

pub use circuit::{Circuit, GateLabel};
pub use params::{ErrorParams, GateError, GateKind};
