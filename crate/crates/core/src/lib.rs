//! Reach sets of single-input controllable LTI systems with bounded input.
//!
//! The pipeline maps the system to controllable canonical form, builds the time-varying
//! input range that the constant bounds induce on the Brunovsky (chain-of-integrators)
//! input, and then evaluates the integrator reach set through its switching-time
//! parameterization: boundary points, the support function, membership tests and volume.
//! [`sim`] holds independent ODE oracles used to validate all of it.

pub mod boundary;
pub mod companion;
pub mod envelope;
pub mod error;
pub mod fixtures;
pub mod format;
pub mod linalg;
pub mod lti_model;
pub mod sim;
pub mod volume;

pub mod cli;
pub mod config;
pub mod report;

pub use boundary::{BoundarySample, Coords, ReachSet, WeylPoint};
pub use companion::Kernel;
pub use envelope::{EnvelopeAnchor, InputEnvelope};
pub use error::{ReachError, Result};
pub use lti_model::{CanonicalForm, LtiProblem, NumericalSettings};
pub use volume::VolumeResult;
