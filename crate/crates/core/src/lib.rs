//! Continuous-time reservoir computing for multifunctional attractor
//! reconstruction: train one reservoir to reproduce two coexisting limit cycles
//! and study the resulting closed-loop dynamics.

pub mod analysis;
pub mod basins;
pub mod continuation;
pub mod dynamics;
pub mod error;
pub mod floquet;
pub mod harness;
pub mod linalg;
pub mod netgen;
pub mod neuron;
pub mod rng;
pub mod symmetry;
pub mod taskgen;
pub mod training;

pub use error::{Error, Result};
