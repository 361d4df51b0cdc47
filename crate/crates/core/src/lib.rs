//! Adversarially robust streaming and sampling.
//!
//! The crate is organised around a two-player game between an adversary that
//! builds a stream and an algorithm that answers queries about it:
//!
//! - [`stream`]: update model, frequency vectors, query functions, flip numbers.
//! - [`sketches`]: static estimators (AMS second moment, KMV distinct elements).
//! - [`robustify`]: sketch switching over independent static copies.
//! - [`samplers`]: Bernoulli / uniform / reservoir samplers, set systems and
//!   the epsilon-approximation error, sample-size calculators.
//! - [`adversary`]: the game harness and concrete attacks.
//! - [`learnability`]: VC and Littlestone dimension, online discrepancy.

pub mod adversary;
pub mod learnability;
pub mod robustify;
pub mod samplers;
pub mod seed;
pub mod sketches;
pub mod stream;

pub(crate) mod numeric;
