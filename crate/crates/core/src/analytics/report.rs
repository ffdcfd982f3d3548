// SPDX-License-Identifier: Apache-2.0

//! Campaign report: JSON summary, sweep-profile CSV and score table.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::degradation::{DegradationReport, MefPoint, MefSeries};
use super::score::{score_payloads, PayloadFeatures, PayloadScore};
use super::stats::{cross_device_stats, Spread};
use super::AnalyticsError;
use crate::controller::FrequencyResult;
use crate::device::FlashBuffering;
use crate::payloads::PayloadKind;

pub const SCHEMA_VERSION: u32 = 1;

pub const SUMMARY_FILE: &str = "summary.json";
pub const SWEEP_FILE: &str = "sweep_profiles.csv";
pub const SCORES_FILE: &str = "scores.csv";

pub const SWEEP_HEADER: &str = "frequency_hz,temperature_c,device_id,payload,config,error_fraction,hang_fraction";
pub const SCORES_HEADER: &str = "payload,mef_score,execution_time_score,error_transition_score";

/// Result of one device × temperature × payload × configuration cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignCell {
    pub device_id: String,
    pub temperature_c: f64,
    pub payload: PayloadKind,
    pub config: FlashBuffering,
    pub mef_hz: f64,
    pub mof_hz: Option<f64>,
    pub range_exhausted: bool,
    pub probes: usize,
    pub executions: u64,
    pub virtual_time_s: f64,
    /// Single-run time at the timing model's reference clock.
    pub reference_exec_time_s: f64,
    pub sweep: Vec<FrequencyResult>,
    /// Any compute error seen in the search trace or the sweep.
    pub transition_observed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub device_id: String,
    pub payload: PayloadKind,
    pub config: FlashBuffering,
    pub points: Vec<MefPoint>,
    pub mof_hz: Vec<Option<f64>>,
    pub degradation: DegradationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub payload: PayloadKind,
    pub config: FlashBuffering,
    pub total_degradation: Spread,
    /// Per-step degradation pooled over devices and steps.
    pub step_degradation: Spread,
    pub mef_by_temperature: Vec<(f64, Spread)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub master_seed: u64,
    pub device_ids: Vec<String>,
    pub temperatures_c: Vec<f64>,
    pub series: Vec<SeriesSummary>,
    pub aggregates: Vec<AggregateSummary>,
    pub features: Vec<PayloadFeatures>,
    pub scores: Vec<PayloadScore>,
    pub median_step_degradation: f64,
    pub total_test_executions: u64,
    pub virtual_time_s: f64,
}

type Key = (String, PayloadKind, FlashBuffering);

impl Report {
    /// Builds the report. Cells may arrive in any order; everything is
    /// sorted by device, payload, configuration and temperature.
    pub fn build(master_seed: u64, cells: &[CampaignCell]) -> Result<Self, AnalyticsError> {
        if cells.is_empty() {
            return Err(AnalyticsError::Empty("campaign"));
        }
        let mut grouped: BTreeMap<Key, Vec<&CampaignCell>> = BTreeMap::new();
        for c in cells {
            grouped
                .entry((c.device_id.clone(), c.payload, c.config))
                .or_default()
                .push(c);
        }
        let mut temperatures: Vec<f64> = cells.iter().map(|c| c.temperature_c).collect();
        temperatures.sort_by(f64::total_cmp);
        temperatures.dedup();

        let mut series = Vec::with_capacity(grouped.len());
        for ((device_id, payload, config), mut group) in grouped {
            group.sort_by(|a, b| a.temperature_c.total_cmp(&b.temperature_c));
            let points = group
                .iter()
                .map(|c| MefPoint {
                    temperature_c: c.temperature_c,
                    mef_hz: c.mef_hz,
                })
                .collect();
            let s = MefSeries::new(device_id, payload, config, points)?;
            let degradation = DegradationReport::of(&s)?;
            series.push(SeriesSummary {
                device_id: s.device_id,
                payload,
                config,
                points: s.points,
                mof_hz: group.iter().map(|c| c.mof_hz).collect(),
                degradation,
            });
        }

        let mut by_kind: BTreeMap<(PayloadKind, FlashBuffering), Vec<&SeriesSummary>> = BTreeMap::new();
        for s in &series {
            by_kind.entry((s.payload, s.config)).or_default().push(s);
        }
        let mut aggregates = Vec::new();
        let mut all_steps = Vec::new();
        for ((payload, config), group) in &by_kind {
            let totals: Vec<f64> = group.iter().map(|s| s.degradation.total).collect();
            let steps: Vec<f64> = group.iter().flat_map(|s| s.degradation.steps.iter().copied()).collect();
            all_steps.extend_from_slice(&steps);
            let mef_by_temperature = temperatures
                .iter()
                .filter_map(|t| {
                    let mefs: Vec<f64> = group
                        .iter()
                        .filter_map(|s| s.points.iter().find(|p| p.temperature_c == *t).map(|p| p.mef_hz))
                        .collect();
                    cross_device_stats(&mefs).ok().map(|spread| (*t, spread))
                })
                .collect();
            aggregates.push(AggregateSummary {
                payload: *payload,
                config: *config,
                total_degradation: cross_device_stats(&totals)?,
                step_degradation: cross_device_stats(&steps)?,
                mef_by_temperature,
            });
        }

        let features = features_of(cells, &temperatures)?;
        let scores = score_payloads(&features)?;

        let mut device_ids: Vec<String> = cells.iter().map(|c| c.device_id.clone()).collect();
        device_ids.sort();
        device_ids.dedup();

        Ok(Self {
            schema_version: SCHEMA_VERSION,
            master_seed,
            device_ids,
            temperatures_c: temperatures,
            series,
            aggregates,
            features,
            scores,
            median_step_degradation: cross_device_stats(&all_steps)?.median,
            total_test_executions: cells.iter().map(|c| c.executions).sum(),
            virtual_time_s: cells.iter().map(|c| c.virtual_time_s).sum(),
        })
    }

    pub fn aggregate(&self, payload: PayloadKind, config: FlashBuffering) -> Option<&AggregateSummary> {
        self.aggregates.iter().find(|a| a.payload == payload && a.config == config)
    }

    pub fn series_for(&self, payload: PayloadKind, config: FlashBuffering) -> impl Iterator<Item = &SeriesSummary> {
        self.series.iter().filter(move |s| s.payload == payload && s.config == config)
    }

    pub fn to_json(&self) -> Result<String, AnalyticsError> {
        serde_json::to_string_pretty(self).map_err(|e| AnalyticsError::Serialize(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, AnalyticsError> {
        let report: Self = serde_json::from_str(text).map_err(|e| AnalyticsError::Serialize(e.to_string()))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(AnalyticsError::Serialize(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        Ok(report)
    }
}

/// Features at the first temperature: median MEF across devices, reference
/// execution time, and whether any device showed a compute error.
fn features_of(cells: &[CampaignCell], temperatures: &[f64]) -> Result<Vec<PayloadFeatures>, AnalyticsError> {
    let t0 = temperatures[0];
    let mut groups: BTreeMap<(PayloadKind, FlashBuffering), Vec<&CampaignCell>> = BTreeMap::new();
    for c in cells {
        groups.entry((c.payload, c.config)).or_default().push(c);
    }
    groups
        .into_iter()
        .map(|((payload, config), group)| {
            let mefs: Vec<f64> = group.iter().filter(|c| c.temperature_c == t0).map(|c| c.mef_hz).collect();
            let times: Vec<f64> = group.iter().map(|c| c.reference_exec_time_s).collect();
            Ok(PayloadFeatures {
                payload,
                config,
                mef_hz: cross_device_stats(&mefs)?.median,
                exec_time_s: cross_device_stats(&times)?.median,
                has_transition: group.iter().any(|c| c.transition_observed),
            })
        })
        .collect()
}

pub fn sweep_csv(cells: &[CampaignCell]) -> String {
    let mut sorted: Vec<&CampaignCell> = cells.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.device_id, a.temperature_c.to_bits(), a.payload, a.config).cmp(&(
            &b.device_id,
            b.temperature_c.to_bits(),
            b.payload,
            b.config,
        ))
    });
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for c in sorted {
        for r in &c.sweep {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.frequency,
                c.temperature_c,
                c.device_id,
                c.payload,
                c.config,
                r.error_fraction(),
                r.hang_fraction()
            ));
        }
    }
    out
}

pub fn scores_csv(scores: &[PayloadScore]) -> String {
    let mut out = String::from(SCORES_HEADER);
    out.push('\n');
    for s in scores {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.payload, s.mef_score, s.execution_time_score, s.error_transition_score
        ));
    }
    out
}

/// Writes the three report files into `dir`. Files are staged under
/// temporary names and only renamed once all of them are written.
pub fn export_report(dir: &Path, report: &Report, cells: &[CampaignCell]) -> Result<Vec<PathBuf>, AnalyticsError> {
    if cells.is_empty() || report.series.is_empty() {
        return Err(AnalyticsError::Empty("campaign"));
    }
    let io = |path: &Path, e: std::io::Error| AnalyticsError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let contents = [
        (SUMMARY_FILE, report.to_json()?),
        (SWEEP_FILE, sweep_csv(cells)),
        (SCORES_FILE, scores_csv(&report.scores)),
    ];
    let mut staged = Vec::new();
    for (name, text) in &contents {
        let tmp = dir.join(format!(".{name}.partial"));
        let result = fs::File::create(&tmp).and_then(|mut f| {
            f.write_all(text.as_bytes())?;
            f.sync_all()
        });
        if let Err(e) = result {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            let _ = fs::remove_file(&tmp);
            return Err(io(&tmp, e));
        }
        staged.push((tmp, dir.join(name)));
    }
    let mut written = Vec::new();
    for (tmp, target) in staged {
        fs::rename(&tmp, &target).map_err(|e| io(&target, e))?;
        written.push(target);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(device: &str, t: f64, payload: PayloadKind, config: FlashBuffering, mef: f64) -> CampaignCell {
        CampaignCell {
            device_id: device.into(),
            temperature_c: t,
            payload,
            config,
            mef_hz: mef,
            mof_hz: None,
            range_exhausted: false,
            probes: 17,
            executions: 10,
            virtual_time_s: 0.5,
            reference_exec_time_s: 1e-4,
            sweep: vec![FrequencyResult {
                frequency: mef,
                passes: 3,
                compute_errors: 1,
                hangs: 0,
                virtual_time_s: 0.1,
            }],
            transition_observed: false,
        }
    }

    fn cells() -> Vec<CampaignCell> {
        let mut v = Vec::new();
        for d in ["dev-1", "dev-0"] {
            for t in [30.0, 20.0] {
                for p in [PayloadKind::Matrix, PayloadKind::CpuTest] {
                    for c in FlashBuffering::BOTH {
                        v.push(cell(d, t, p, c, if t == 20.0 { 100e6 } else { 98e6 }));
                    }
                }
            }
        }
        v
    }

    #[test]
    fn header_is_pinned() {
        assert!(sweep_csv(&[]).starts_with(
            "frequency_hz,temperature_c,device_id,payload,config,error_fraction,hang_fraction\n"
        ));
    }

    #[test]
    fn build_sorts_and_aggregates() {
        let r = Report::build(1, &cells()).unwrap();
        assert_eq!(r.schema_version, SCHEMA_VERSION);
        assert_eq!(r.series.len(), 8);
        assert_eq!(r.series[0].device_id, "dev-0");
        assert_eq!(r.temperatures_c, vec![20.0, 30.0]);
        assert!((r.median_step_degradation - 2.0).abs() < 1e-12);
        assert_eq!(r.total_test_executions, 160);
        assert_eq!(r.scores.len(), 2);
    }

    #[test]
    fn json_round_trip() {
        let r = Report::build(9, &cells()).unwrap();
        assert_eq!(Report::from_json(&r.to_json().unwrap()).unwrap(), r);
    }

    #[test]
    fn empty_campaign_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        assert!(Report::build(1, &[]).is_err());
        let r = Report::build(1, &cells()).unwrap();
        assert!(export_report(dir.path(), &r, &[]).is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn export_writes_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let cs = cells();
        let r = Report::build(1, &cs).unwrap();
        let files = export_report(dir.path(), &r, &cs).unwrap();
        assert_eq!(files.len(), 3);
        let csv = fs::read_to_string(dir.path().join(SWEEP_FILE)).unwrap();
        assert_eq!(csv.lines().count(), 1 + cs.len());
        assert!(csv.lines().nth(1).unwrap().ends_with(",0.25,0"));
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 3);
    }
}
