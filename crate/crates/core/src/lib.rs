//! Quantum measurement statistics: a generic F-tensor engine for microsystem /
//! instrument couplings, the finite Coleman–Hepp spin-chain instrument in
//! closed form, and brute-force oracles that cross-check both.
//!
//! Everything is generic over the real scalar via [`Real`]; the `*64` aliases
//! below fix it to `f64`, which is what the CLI and the tests use.

// `!(x <= tol)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod error;
pub mod framework;
pub mod linalg;
pub mod numerics;
pub mod oracle;
pub mod sampling;
pub mod scalar;

pub use error::{Error, Result};
pub use framework::{
    ClassificationReport, FTensor, FrameworkConfig, InstrumentModel, MicroState, MicroSystem,
    Verdict,
};
pub use linalg::{ComplexOperator, DensityOperator, ProjectorOperator};
pub use scalar::{Complex, Real};

pub type ComplexOperator64 = linalg::ComplexOperator<f64>;
pub type DensityOperator64 = linalg::DensityOperator<f64>;
pub type ProjectorOperator64 = linalg::ProjectorOperator<f64>;
pub type MicroState64 = framework::MicroState<f64>;
pub type MicroSystem64 = framework::MicroSystem<f64>;
pub type InstrumentModel64 = framework::InstrumentModel<f64>;
pub type FTensor64 = framework::FTensor<f64>;
pub type FrameworkConfig64 = framework::FrameworkConfig<f64>;
pub type ClassificationReport64 = framework::ClassificationReport<f64>;
pub type ChainParams64 = chain::ChainParams<f64>;
pub type ChainReport64 = chain::ChainReport<f64>;
pub type ChainThresholds64 = chain::ChainThresholds<f64>;
pub type PotentialSpec64 = chain::PotentialSpec<f64>;
pub type PacketSpec64 = chain::PacketSpec<f64>;
pub type SiteState64 = chain::SiteState<f64>;
pub type GridConfig64 = oracle::GridConfig<f64>;
pub type TimeSeriesRecord64 = oracle::TimeSeriesRecord<f64>;

pub type ComplexOperator32 = linalg::ComplexOperator<f32>;
pub type ChainParams32 = chain::ChainParams<f32>;
