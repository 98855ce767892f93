//! Template models for legged locomotion: a spring-loaded inverted pendulum
//! runner, an inverted-pendulum biped walker and a two-pendulum quadruped
//! crawler, together with the hybrid integrator that drives them and a few
//! gait-analysis tools.

// Negated comparisons treat NaN as failing the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod crawl;
pub mod error;
pub mod integrator;
pub mod slip;
pub mod walk;

pub use error::{Error, Result};
