//! Closed extremals of magnetic action functionals on low-dimensional
//! Riemannian charts.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the bottom fix the scalar to `f64`.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod exprdsl;
pub mod functionals;
pub mod geometry;
pub mod linalg;
pub mod loopspace;
pub mod report;
pub mod scalar;
pub mod solvers;
pub mod suites;
pub mod systems;

pub use error::{Error, Result};
pub use scalar::Real;

pub type MagneticSystem = geometry::MagneticSystem<f64>;
pub type DiscreteLoop = loopspace::DiscreteLoop<f64>;
pub type TangentField = loopspace::TangentField<f64>;
pub type FunctionalParams = functionals::FunctionalParams<f64>;
pub type CriticalPoint = solvers::CriticalPoint<f64>;
pub type ContinuationRun = solvers::ContinuationRun<f64>;
pub type SweepoutFamily = solvers::SweepoutFamily<f64>;
