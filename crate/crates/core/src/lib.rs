//! Low-rank transceiver design for data shuffling in wireless distributed computing.
//!
//! The interference-alignment conditions of a shuffling round are an affine system
//! over a precoder/decoder product matrix; a rank-`r` feasible point yields a
//! symmetric DoF of `d / r`. [`system::AffineSystem`] builds the system from a
//! [`instance::ProblemInstance`], [`solvers`] looks for low-rank feasible points, and
//! [`transceiver`] turns a solution back into precoders and decoders.

pub mod error;
pub mod instance;
pub mod linalg;
pub mod solvers;
pub mod sweep;
pub mod system;
pub mod transceiver;

pub use error::{Error, Result};
pub use instance::{ChannelMode, ChannelSet, IndexSets, ProblemInstance};
pub use linalg::{ComplexMatrix, ComplexVector, C64};
pub use solvers::{Dof, SolverKind, SolverResult, Status};
pub use sweep::{ScenarioConfig, SweepRecord};
pub use system::{AffineSystem, MatrixLayout};
pub use transceiver::{IaReport, TransceiverSet};
