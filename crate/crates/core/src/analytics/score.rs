// SPDX-License-Identifier: Apache-2.0

//! Star scores (0 to 3 in half steps) comparing payloads.
//!
//! MEF and execution time are ranked per flash configuration, lower is
//! better: `stars = 3 - 0.5 · rank`, where rank counts the payloads that are
//! strictly better by more than [`TIE_TOLERANCE`]. The per-configuration
//! stars are averaged and rounded down to a half star. The error-transition
//! column gives 3 stars for a transition region in both configurations, 1.5
//! for one and 0 for none.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::device::FlashBuffering;
use crate::payloads::PayloadKind;

/// Relative difference below which two features share a rank.
pub const TIE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayloadFeatures {
    pub payload: PayloadKind,
    pub config: FlashBuffering,
    pub mef_hz: f64,
    pub exec_time_s: f64,
    pub has_transition: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayloadScore {
    pub payload: PayloadKind,
    pub mef_score: f64,
    pub execution_time_score: f64,
    pub error_transition_score: f64,
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs())
}

/// Stars for each value, lower value = more stars.
pub fn rank_stars(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let rank = values.iter().filter(|&&o| o < v && !tied(o, v)).count();
            (3.0 - 0.5 * rank as f64).max(0.0)
        })
        .collect()
}

pub fn floor_half(stars: f64) -> f64 {
    (stars * 2.0 + 1e-9).floor() / 2.0
}

/// Scores every payload that has features for both configurations.
pub fn score_payloads(features: &[PayloadFeatures]) -> Result<Vec<PayloadScore>, AnalyticsError> {
    let mut by_payload: BTreeMap<PayloadKind, BTreeMap<FlashBuffering, PayloadFeatures>> = BTreeMap::new();
    for f in features {
        if !(f.mef_hz > 0.0 && f.exec_time_s > 0.0) {
            return Err(AnalyticsError::MissingFeatures(format!(
                "{} {} has non-positive features",
                f.payload, f.config
            )));
        }
        by_payload.entry(f.payload).or_default().insert(f.config, *f);
    }
    if by_payload.is_empty() {
        return Err(AnalyticsError::Empty("payload features"));
    }
    for (payload, configs) in &by_payload {
        for c in FlashBuffering::BOTH {
            if !configs.contains_key(&c) {
                return Err(AnalyticsError::MissingFeatures(format!("{payload} has no {c} features")));
            }
        }
    }
    let payloads: Vec<PayloadKind> = by_payload.keys().copied().collect();
    let mut mef_sum = vec![0.0; payloads.len()];
    let mut time_sum = vec![0.0; payloads.len()];
    for c in FlashBuffering::BOTH {
        let row: Vec<&PayloadFeatures> = payloads.iter().map(|p| &by_payload[p][&c]).collect();
        let mef = rank_stars(&row.iter().map(|f| f.mef_hz).collect::<Vec<_>>());
        let time = rank_stars(&row.iter().map(|f| f.exec_time_s).collect::<Vec<_>>());
        for i in 0..payloads.len() {
            mef_sum[i] += mef[i];
            time_sum[i] += time[i];
        }
    }
    let n = FlashBuffering::BOTH.len() as f64;
    Ok(payloads
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let with_transition = by_payload[p].values().filter(|f| f.has_transition).count();
            PayloadScore {
                payload: *p,
                mef_score: floor_half(mef_sum[i] / n),
                execution_time_score: floor_half(time_sum[i] / n),
                error_transition_score: match with_transition {
                    0 => 0.0,
                    1 => 1.5,
                    _ => 3.0,
                },
            }
        })
        .collect())
}
