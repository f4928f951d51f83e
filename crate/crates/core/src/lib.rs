//! Left-tail asymptotics of renewal measures of two-sided random walks.
//!
//! For a walk `S_n = X_1 + … + X_n` with positive drift and an exponentially
//! light left tail, `H((-∞, -x))` decays like `e^{-κx}` where `κ` solves
//! `E e^{-κX} = 1` (or sits at the finiteness abscissa of the transform).
//! Tilting each step by `ρ^{-1} e^{-κX}` and reflecting turns the left-tail
//! problem into a window problem for a new renewal measure `H_Q`:
//!
//! ```text
//! H((-∞, -x)) = ∫_(x,∞) e^{-κt} H_Q(dt)
//! ```
//!
//! The crate is organised as
//!
//! * [`dist`]: step laws, transforms, sampling, calibration;
//! * [`tilt`]: the `(κ, ρ)` solver and the tilted step law;
//! * [`oracle`]: exact lattice renewal tables by convolution;
//! * [`mc`]: naive and importance-sampled Monte Carlo;
//! * [`asym`]: the limit constants for each regime;
//! * [`cli`]: config parsing, commands and CSV reports.

pub mod asym;
pub mod cli;
pub mod dist;
pub mod error;
pub mod ext;
pub mod numerics;
pub mod mc;
pub mod oracle;
pub mod par;
pub mod tilt;

pub use dist::StepDistribution;
pub use error::{Error, Result};
pub use ext::ExtReal;
