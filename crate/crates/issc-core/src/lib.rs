//! Integrated sensing and semantic communication (ISSC) core library.
//!
//! A base station with a uniform linear array serves downlink users with
//! semantically compressed streams while sensing point targets that may
//! eavesdrop. This crate provides the physical model (channels, beampattern),
//! the semantic-layer metrics (BLEU-constrained extraction ratio, rates,
//! power ledger), the secrecy metrics, a sensing-only reference beampattern
//! design, a self-contained interior-point solver for the convex subproblems,
//! the alternating design optimizer, and a MUSIC-based sensing check.
//!
//! All numeric code is generic over the [`scalar::Scalar`] type; the `*F64`
//! aliases below fix `f64`, which is what the CLI uses.

pub mod array_channel;
pub mod csvio;
pub mod error;
pub mod linalg;
pub mod music;
pub mod optimizer;
pub mod scalar;
pub mod secrecy;
pub mod seeding;
pub mod semantic;
pub mod sensing;
pub mod conic;

pub use error::{Infeasibility, IsscError, Result};

pub type ScenarioF64 = array_channel::Scenario<f64>;
pub type BeamformerSetF64 = array_channel::BeamformerSet<f64>;
pub type SemanticProfileF64 = semantic::SemanticProfile<f64>;
pub type RateReportF64 = secrecy::RateReport<f64>;
pub type ConicProblemF64 = conic::ConicProblem<f64>;
pub type ConicSolutionF64 = conic::ConicSolution<f64>;
pub type OptimizerStateF64 = optimizer::OptimizerState<f64>;
pub type MusicResultF64 = music::MusicResult<f64>;
