//! Reference models for the reverse-time engine.

pub mod atm;
pub mod hyperbolic;
pub mod sis;
