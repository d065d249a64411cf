//! Feedback synthesis and closed-loop simulation for rapid stabilization of
//! the linearized bilinear Schrodinger equation on (0,1), via an explicit
//! Fredholm-type transformation onto an exponentially decaying target system.
//!
//! The crate is organized as a pipeline:
//!
//! * [`spectral`] - Dirichlet eigenbasis, weighted norms, quadrature.
//! * [`moment`] - moment coefficients of the control shape and their checks.
//! * [`basis`] - the explicit candidate Riesz basis and its diagnostics.
//! * [`stabilizer`] - feedback gains, the transformation, and its checks.
//! * [`sim`] - norm-exact time stepping of the closed-loop and target systems.
//! * [`finite_dim`] - the matrix analogue of the construction (pole shifting).
//! * [`saint_venant`] - an analytically solvable hyperbolic benchmark.

pub use nalgebra;

pub mod basis;
pub mod error;
pub mod finite_dim;
pub mod linalg;
pub mod moment;
pub mod saint_venant;
pub mod sim;
pub mod spectral;
pub mod stabilizer;

pub use basis::{BasisFamily, KernelTensor, TailReport};
pub use error::{Error, Result};
pub use finite_dim::{LtiSystem, PoleShiftReport};
pub use moment::{DipolarMoment, HypothesisReport, ModeTable, ShiftMode};
pub use saint_venant::RiemannGrid;
pub use sim::{SimulationTrace, TransformedTrace};
pub use spectral::{EigenPair, Polynomial, Quadrature, SpectralState};
pub use stabilizer::{FeedbackGains, Synthesis, TransformOperator};
