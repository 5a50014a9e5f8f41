//! Discrete-time equivalent-control sliding-mode control for sampled LTI
//! plants.
//!
//! The plant `ẋ = A x + B (u + ξ(t))`, `σ = C x` is sampled with a
//! zero-order hold. Each step combines a linear equivalent-control law
//! ([`EqLaw`]) with a discontinuous input ([`UsLaw`]); the implicit variant
//! solves a box-constrained affine variational inequality ([`avi`]).
//!
//! ```
//! use smclab::{run, Benchmark2D, EqLaw, UsLaw};
//!
//! let cfg = Benchmark2D::new()
//!     .scenario(0.1, 10.0)
//!     .with_laws(EqLaw::Exact, UsLaw::ImplicitAvi);
//! let trace = run(&cfg).unwrap();
//! assert!(trace.reaching_step.is_some());
//! ```

pub mod avi;
pub mod controllers;
pub mod discretize;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod linops;
pub mod metrics;
pub mod quadrature;
pub mod sim;

pub use avi::{solve_box_avi, AviSolution, BoxAvi};
pub use controllers::{EqController, EqLaw, GainMatrix, UsLaw};
pub use discretize::{sample, Perturbation, PerturbationKind, Plant, SampledPlant};
pub use error::{Error, Result};
pub use exec::Executor;
pub use experiments::{Benchmark2D, SaturationSweepOptions, SweepResult};
pub use linops::Mat;
pub use sim::{run, RunStatus, ScenarioConfig, Trace};
