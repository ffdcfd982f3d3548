// SPDX-License-Identifier: Apache-2.0

//! Degradation metrics, cross-device statistics, payload scores and report
//! export.

pub mod degradation;
pub mod report;
pub mod score;
pub mod stats;

use std::path::PathBuf;

use thiserror::Error;

pub use degradation::{degradation_step, total_degradation, DegradationReport, MefPoint, MefSeries};
pub use report::{export_report, CampaignCell, Report, SCHEMA_VERSION, SWEEP_HEADER};
pub use score::{score_payloads, PayloadFeatures, PayloadScore};
pub use stats::{cross_device_stats, Spread};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("invalid MEF series: {0}")]
    InvalidSeries(String),
    #[error("degradation step {index} outside 1..{len}")]
    StepOutOfDomain { index: usize, len: usize },
    #[error("missing payload features: {0}")]
    MissingFeatures(String),
    #[error("report serialization: {0}")]
    Serialize(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}
