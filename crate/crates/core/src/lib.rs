//! Long-range dependence diagnostics for investor-segregated trading flows.
//!
//! The crate turns raw daily BUY/SELL records into a calendar-aligned flow
//! panel ([`flows`]), measures persistence with detrended fluctuation
//! analysis ([`dfa`], [`rolling`]), benchmarks it against surrogate nulls
//! ([`surrogate`]), characterizes heavy tails ([`tails`]) and relates rolling
//! persistence to realized volatility ([`stats`]). [`synth`] provides exact
//! generators used as ground truth, and [`pipeline`] strings the stages
//! together with file-based artifacts.

pub mod dfa;
pub mod error;
pub mod flows;
mod numeric;
pub mod pipeline;
pub mod rolling;
pub mod stats;
pub mod surrogate;
pub mod synth;
pub mod tails;

pub use error::{Error, Result};
