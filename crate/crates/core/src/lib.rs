//! Stochastic income dynamics: a Langevin agent simulator, the matching
//! Fokker–Planck steady state and evolver, estimation from banded survey
//! rounds and poverty indices.
//!
//! The numerical core (`special`, `quadrature`, `distlib`, `fpsolve`) is
//! generic over [`Scalar`] (`f32` or `f64`); the data-facing modules work in
//! `f64`.

pub mod distlib;
pub mod error;
pub mod estimate;
pub mod fpsolve;
pub mod labour;
pub mod poverty;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod special;
pub mod stats;
pub mod survey;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub type Ipdf = distlib::SteadyStateIpdf<f64>;
pub type Ipdf32 = distlib::SteadyStateIpdf<f32>;
pub type Grid = fpsolve::LogGrid<f64>;
pub type Density = fpsolve::GridDensity<f64>;
pub type Density32 = fpsolve::GridDensity<f32>;
pub type Mode = fpsolve::EigenMode<f64>;
