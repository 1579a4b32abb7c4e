//! Simulation and purity analysis of a coherently controlled two-qubit system
//! in which only qubit A is driven and coupled to an environment.
//!
//! States are handled in the coherence-vector representation `(1/2, vA, vAB, vB)`,
//! where the master equation becomes an affine, control-bilinear ODE on ℝ¹⁶.

pub mod coherence;
pub mod dynamics;
pub mod generator;
pub mod io;
pub mod purity_analysis;
pub mod quantum;
pub mod sampling;

pub use coherence::{BlochVector, LambdaBasis};
pub use generator::{Generator16, GeneratorBlocks, TwoQubitModel};
pub use quantum::{DensityMatrix, PauliIndex};
pub use dynamics::{ControlLaw, Simulator, Trajectory};
pub use purity_analysis::{CouplingCase, CouplingKind, FactorizedState, WVector};
