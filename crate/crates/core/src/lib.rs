//! Short-term wind power forecasting engine.
//!
//! The crate couples a family of hand-rolled LSTM cells (a generic cell plus a
//! modified cell with tanh-bounded state, a ReLU output head, and optional
//! CIFG / peephole / input-compression variants) with the data pipeline that
//! fuses 5-minute power series and hourly weather-forecast blocks, a
//! block-truncated training loop with cross-block state carryover, evaluation
//! metrics including the naive ratio, and a genetic hyperparameter search.
//!
//! Everything is deterministic under a fixed seed: the only randomness source
//! is [`linalg::Rng`], a seeded generator owned by the caller.

pub mod cells;
pub mod data;
pub mod error;
pub mod hyperopt;
pub mod linalg;
pub mod metrics;
pub mod trainer;

pub use error::{Error, Result};
