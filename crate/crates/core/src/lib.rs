//! Lie-algebra-parameterized Gaussian policy optimization.
//!
//! The crate is organized bottom-up:
//!
//! - [`algebra`]: matrix Lie algebras, orthonormal bases, closed-form projectors.
//! - [`expmap`]: matrix exponential, its Fréchet derivative and adjoint, the
//!   SO(3) logarithm and the smoothness-constant formulas.
//! - [`envs`]: Lie group MDPs (SO(3)^J tracking, SE(3) pose control, the
//!   diagonal witness bandit) and perturbation wrappers.
//! - [`policy`]: Gaussian policies on the algebra and the ambient baseline.
//! - [`estimation`]: REINFORCE gradients, Fisher estimates and alignment
//!   diagnostics.
//! - [`optim`]: the projected policy-gradient loop, natural-gradient
//!   baselines and step-size schedules.
//! - [`experiments`]: measurement harnesses producing tabular results.

pub mod algebra;
pub mod envs;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod expmap;
pub mod optim;
pub mod policy;
pub mod rng;

pub use error::{Error, Result};
