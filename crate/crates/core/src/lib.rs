//! Exact laboratory for information bottleneck objectives on finite worlds.
//!
//! The crate builds the chain `x_F <- phi -> x_P -> t` as one dense joint
//! table, evaluates and optimizes the bottleneck objectives over encoders
//! `p(t | x_P)`, checks the variational upper bound and its tempered-Bayes
//! factorization, verifies the mutual-information generalization bound on
//! trained models, and reproduces the quantization picture of `I(X; f(X))`.

pub mod bounds;
pub mod engine;
pub mod error;
pub mod info;
pub mod io;
pub mod numeric;
pub mod pathologies;
pub mod sampling;
pub mod table;
pub mod trained;
pub mod world;

pub use error::{Error, Result};
pub use info::{InfoValue, Units};
pub use table::{Alphabet, Kernel, ProbTable};
pub use world::{FullJoint, GenerativeWorld, InfoReport, PastFuture};
