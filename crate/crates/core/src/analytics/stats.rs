// SPDX-License-Identifier: Apache-2.0

//! Order statistics with linear interpolation between order statistics
//! (Hyndman-Fan type 7).

use super::AnalyticsError;

/// Quantile `p` of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Spread {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Spread {
    pub fn iqr(&self) -> (f64, f64) {
        (self.q1, self.q3)
    }
}

/// Median and quartiles across devices.
pub fn cross_device_stats(values: &[f64]) -> Result<Spread, AnalyticsError> {
    if values.is_empty() {
        return Err(AnalyticsError::Empty("cross-device statistics"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(AnalyticsError::NonFinite(*v));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Spread {
        median: quantile_sorted(&sorted, 0.5),
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
    })
}
