//! Hierarchical and temporal forecast reconciliation for count series.
//!
//! The crate covers the whole pipeline: hierarchy and summing matrix
//! construction, ingestion and train/test splits, base forecasts (mean,
//! naive, seasonal naive, ETS, ARIMA), bottom-up / top-down / MinT
//! reconciliation, temporal hierarchies, MASE scoring, series features with
//! PCA, and a runner that produces the full accuracy grid.

pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod forecasters;
pub mod hierarchy;
pub mod optim;
pub mod reconcile;
pub mod runner;
pub mod stats;
pub mod temporal;

pub use error::{Error, Result};
