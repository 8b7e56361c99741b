//! Risk functionals on finite discrete distributions.
//!
//! The crate is organized around a small set of objects:
//!
//! * [`DiscreteDistribution`], a finitely supported law, sorted atoms with
//!   positive weights summing to one. All continuous laws enter through
//!   quadrature grids or samples.
//! * [`DistortionFunction`], an increasing `h` on `[0,1]` with `h(0)=0`,
//!   `h(1)=1`. Concave `h` induce coherent risk measures through the Choquet
//!   integral; `risk::choquet` evaluates them exactly by step integration.
//! * [`RiskMeasure`], distortion measures plus the non-distortion examples
//!   needed for counterexamples (entropic, scenario suprema, a submodular
//!   capacity, finite Kusuoka suprema).
//!
//! On top of these sit four analysis layers: `folding` (ratios
//! `ρ(|X|)/(ρ(X)∨ρ(−X))` and their closed-form bound), `ui`
//! (uniform-integrability diagnostics through the `(1−p)·ES_p` tail envelope
//! and an explicit slowly-growing distortion construction), `convergence`
//! (1-Wasserstein distance, LLN and ES-convergence experiments), and `invest`
//! (utility maximization over quantile vectors under a risk and a price
//! constraint).
//!
//! Everything is deterministic: randomized routines take a single `u64` seed
//! and derive per-purpose streams via [`seeding::stream`].

// Validation guards are written as `!(x > lo && x < hi)` on purpose: the
// negated form is true for NaN, the un-negated rewrite would accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod dist;
pub mod distortion;
pub mod error;
pub mod family;
pub mod folding;
pub mod invest;
pub mod risk;
pub mod seeding;
pub mod ui;
pub mod xreal;

pub use dist::{DiscreteDistribution, QuantileFunction};
pub use distortion::{DistortionFunction, DistortionSpec};
pub use error::Error;
pub use family::DistributionFamily;
pub use risk::{Position, RiskMeasure};
pub use xreal::XReal;
