//! Solve Poisson, heat-diffusion, and Burgers equations by reverse diffusion
//! sampling with physics-guided inference.
//!
//! A denoising diffusion model is trained on solution fields with no physics
//! in the loop; at sampling time the reverse chain is steered by descent on
//! the PDE residual, stabilized by Gaussian smoothing, and kept admissible by
//! hard boundary projection. A physics-only annealed Langevin mode runs the
//! same machinery without any learned prior, which recovers a classical
//! stochastic relaxation solver.
//!
//! Transient equations (heat, Burgers) are recast as stationary 2D fields
//! with time as the second grid axis, so a single sampler covers all three
//! problem families.
//!
//! Entry points, bottom up:
//! * [`grid`] — fields, stencils, smoothing, boundary projection, norms;
//! * [`problem`] — governing equations, residuals, residual energies;
//! * [`solve`] — finite-difference reference solvers (ground truth);
//! * [`data`] — dataset synthesis, normalization, on-disk formats;
//! * [`nn`] + [`diffusion`] — the denoiser, noise schedule, training loop;
//! * [`sampler`] — guided / unguided / physics-only reverse dynamics;
//! * [`eval`] — error reports, robustness trials, smoothing ablation;
//! * [`plot`] — PNG heatmaps and cross-section profiles.
//!
//! The `examples/` directory has one runnable program per capability; the
//! `pdediff` binary wraps the same calls as batch subcommands.

pub mod data;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod grid;
pub mod nn;
pub mod plot;
pub mod problem;
pub mod rng;
pub mod sampler;
pub mod solve;

pub use error::{Error, ErrorCategory, Result};
pub use grid::{BoundarySpec, Edge, EdgeCondition, Field, GridSpec, SmoothingKernel};
pub use problem::{Equation, PdeProblem, SourceSpec};
