//! Forward-in-time option price forecasting by Tikhonov-regularized solution of
//! the Black-Scholes equation, plus a trading backtester and a neural trade filter.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod error;
pub mod grid;
pub mod io;
pub mod ml;
pub mod operator;
pub mod pipeline;
pub mod solver;
pub mod sparse;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{BoundaryMode, DataBlock, GridSpec, MarketDay};
pub use pipeline::{forecast_one, run_batch, BatchReport, Forecast, PipelineConfig};
pub use solver::SolverConfig;
