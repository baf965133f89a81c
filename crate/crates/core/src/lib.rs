//! Numerical laboratory for nonlinear Schrödinger equations with general
//! homogeneous (possibly non-gauge-invariant) nonlinearities: coefficient
//! calculus, periodic pseudospectral operators, harmonic-oscillator resolvent
//! machinery, split-step time integration, a resolvent-based fixed-point map,
//! and small-data scattering diagnostics at desk scale.

pub mod error;
pub mod evolution;
pub mod grid;
pub mod hermite;
pub mod nonlinearity;
pub mod opnorm;
pub mod picard;
pub mod report;
pub mod oscillator;
pub mod resample;
pub mod scattering;
pub mod spectral;

pub use error::{LabError, Result};
