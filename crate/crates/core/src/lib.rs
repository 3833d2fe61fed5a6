//! Reverse-time multilevel sequential Monte Carlo for Markov-chain
//! trajectories conditioned to hit a rare target set.
//!
//! The engine in [`smc`] is generic over a [`smc::ReverseModel`] and over the
//! scalar type. Three models are bundled: a fluid-source ATM queue
//! ([`models::atm`]), a discretised hyperbolic diffusion kept inside a
//! narrowing corridor ([`models::hyperbolic`]) and an SIS epidemic on a grid
//! ([`models::sis`]). [`splitting`] holds an adaptive multilevel splitting
//! baseline for comparison.

pub mod error;
pub mod events;
pub mod models;
pub mod numerics;
pub mod scalar;
pub mod smc;
pub mod splitting;

pub use error::{Error, ProposalError, Result};
pub use scalar::Real;

/// Double-precision instantiations.
pub type AtmParams64 = models::atm::AtmParams<f64>;
pub type AtmModel64 = models::atm::AtmModel<f64>;
pub type StripParams64 = models::hyperbolic::StripParams<f64>;
pub type HyperbolicModel64 = models::hyperbolic::HyperbolicModel<f64>;
pub type SisParams64 = models::sis::SisParams<f64>;
pub type SisModel64 = models::sis::SisModel<f64>;
pub type EstimateSummary64 = smc::EstimateSummary<f64>;

/// Single-precision instantiations.
pub type AtmParams32 = models::atm::AtmParams<f32>;
pub type AtmModel32 = models::atm::AtmModel<f32>;
pub type StripParams32 = models::hyperbolic::StripParams<f32>;
pub type HyperbolicModel32 = models::hyperbolic::HyperbolicModel<f32>;
pub type SisParams32 = models::sis::SisParams<f32>;
pub type SisModel32 = models::sis::SisModel<f32>;
pub type EstimateSummary32 = smc::EstimateSummary<f32>;
