// SPDX-License-Identifier: Apache-2.0

//! MEF degradation relative to the first temperature of a series.

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::device::FlashBuffering;
use crate::payloads::PayloadKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MefPoint {
    pub temperature_c: f64,
    pub mef_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MefSeries {
    pub device_id: String,
    pub payload: PayloadKind,
    pub config: FlashBuffering,
    pub points: Vec<MefPoint>,
}

impl MefSeries {
    pub fn new(
        device_id: impl Into<String>,
        payload: PayloadKind,
        config: FlashBuffering,
        points: Vec<MefPoint>,
    ) -> Result<Self, AnalyticsError> {
        let s = Self {
            device_id: device_id.into(),
            payload,
            config,
            points,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if self.points.is_empty() {
            return Err(AnalyticsError::Empty("MEF series"));
        }
        for w in self.points.windows(2) {
            if !(w[0].temperature_c < w[1].temperature_c) {
                return Err(AnalyticsError::InvalidSeries(format!(
                    "temperatures not strictly increasing at {} °C",
                    w[1].temperature_c
                )));
            }
        }
        if let Some(p) = self.points.iter().find(|p| !(p.mef_hz > 0.0 && p.mef_hz.is_finite())) {
            return Err(AnalyticsError::InvalidSeries(format!(
                "MEF {} Hz at {} °C is not positive",
                p.mef_hz, p.temperature_c
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mefs(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.mef_hz)
    }
}

/// `(MEF[i-1] - MEF[i]) / MEF[0] · 100`
pub fn degradation_step(series: &MefSeries, i: usize) -> Result<f64, AnalyticsError> {
    if i == 0 || i >= series.len() {
        return Err(AnalyticsError::StepOutOfDomain { index: i, len: series.len() });
    }
    let p = &series.points;
    Ok((p[i - 1].mef_hz - p[i].mef_hz) / p[0].mef_hz * 100.0)
}

/// `(MEF[0] - MEF[last]) / MEF[0] · 100`
pub fn total_degradation(series: &MefSeries) -> Result<f64, AnalyticsError> {
    if series.len() < 2 {
        return Err(AnalyticsError::InvalidSeries(
            "total degradation needs at least two temperatures".into(),
        ));
    }
    let first = series.points[0].mef_hz;
    let last = series.points[series.len() - 1].mef_hz;
    Ok((first - last) / first * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationReport {
    pub steps: Vec<f64>,
    pub total: f64,
    /// Step indices where the MEF went up.
    pub anomalies: Vec<usize>,
}

impl DegradationReport {
    pub fn of(series: &MefSeries) -> Result<Self, AnalyticsError> {
        let steps = (1..series.len())
            .map(|i| degradation_step(series, i))
            .collect::<Result<Vec<_>, _>>()?;
        let anomalies = steps
            .iter()
            .enumerate()
            .filter(|(_, d)| **d < 0.0)
            .map(|(k, _)| k + 1)
            .collect();
        Ok(Self {
            total: total_degradation(series)?,
            steps,
            anomalies,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(mefs: &[f64]) -> MefSeries {
        let points = mefs
            .iter()
            .enumerate()
            .map(|(i, m)| MefPoint {
                temperature_c: 20.0 + 10.0 * i as f64,
                mef_hz: *m,
            })
            .collect();
        MefSeries::new("d0", PayloadKind::Matrix, FlashBuffering::Buffered, points).unwrap()
    }

    #[test]
    fn two_percent_step() {
        let s = series(&[100e6, 98e6]);
        assert!((degradation_step(&s, 1).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(degradation_step(&s, 1).unwrap(), total_degradation(&s).unwrap());
    }

    #[test]
    fn step_zero_is_domain_error() {
        let s = series(&[100e6, 98e6]);
        assert!(matches!(degradation_step(&s, 0), Err(AnalyticsError::StepOutOfDomain { .. })));
        assert!(degradation_step(&s, 2).is_err());
    }

    #[test]
    fn constant_series() {
        let s = series(&[50e6; 7]);
        let r = DegradationReport::of(&s).unwrap();
        assert!(r.steps.iter().all(|d| *d == 0.0));
        assert_eq!(r.total, 0.0);
        assert!(r.anomalies.is_empty());
    }

    #[test]
    fn reported_totals() {
        let s = series(&[100e6, 95e6, 90e6, 86.21e6]);
        assert!((total_degradation(&s).unwrap() - 13.79).abs() < 1e-9);
        let s = series(&[100e6, 88.2e6]);
        assert!((total_degradation(&s).unwrap() - 11.8).abs() < 1e-9);
    }

    #[test]
    fn increase_flagged() {
        let r = DegradationReport::of(&series(&[100e6, 98e6, 99e6, 97e6])).unwrap();
        assert_eq!(r.anomalies, vec![2]);
        assert!(r.steps[1] < 0.0);
    }

    #[test]
    fn invalid_series_rejected() {
        let bad = vec![
            MefPoint { temperature_c: 30.0, mef_hz: 1.0 },
            MefPoint { temperature_c: 30.0, mef_hz: 1.0 },
        ];
        assert!(MefSeries::new("d", PayloadKind::Matrix, FlashBuffering::Buffered, bad).is_err());
        let bad = vec![MefPoint { temperature_c: 30.0, mef_hz: 0.0 }];
        assert!(MefSeries::new("d", PayloadKind::Matrix, FlashBuffering::Buffered, bad).is_err());
        assert!(total_degradation(&series(&[1.0])).is_err());
    }
}
