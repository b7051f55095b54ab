//! Heavy-traffic numerics for a two-station tandem queue with reused
//! service times and regularly varying service requirements.
//!
//! The crate is organised bottom-up:
//!
//! * [`heavytail`] service laws and the Laplace transform of the Pareto law,
//! * [`boxma`] the busy-period maximum law `m` and the steady state of `R_n`,
//! * [`kappa`] the limit function `κ(y)` and the limit CDF `Φ(t, x)`,
//! * [`tandemsim`] the discrete-event simulator,
//! * [`chain`] the embedded max-recursion chain under a heavy-traffic schedule,
//! * [`limits`] semigroup, generator and Kolmogorov-Smirnov machinery.

pub mod boxma;
pub mod chain;
pub mod error;
pub mod heavytail;
pub mod kappa;
pub mod limits;
pub mod quad;
pub mod rng;
pub mod roots;
pub mod tandemsim;
pub mod tolerances;

pub use error::{Error, Result};
