// SPDX-License-Identifier: Apache-2.0

//! Test controller: batches of payload runs at a test clock, MEF bisection
//! and frequency sweeps.
//!
//! Frequencies live on the grid `f_min + k·step`, with the last point clamped
//! to `f_max`. Bisection works on grid indices so that its answer is exactly
//! comparable with an exhaustive sweep over the same grid.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{DeviceConfig, SimulatedDevice};
use crate::payloads::{execute, ErrorTransitionModel, Payload, Status, TimingModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("device fails `{payload}` at the minimum frequency {f_min} Hz")]
    DeviceBelowMinimum { payload: String, f_min: f64 },
    #[error("sweep range [{from}, {to}] Hz with step {step} Hz is empty or inverted")]
    InvalidSweep { from: f64, to: f64, step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub f_min: f64,
    pub f_max: f64,
    /// Bisection resolution, Hz.
    pub step: f64,
    pub runs_per_frequency: u32,
    /// Simulated seconds charged per hang.
    pub watchdog_timeout: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            f_min: 1e6,
            f_max: 200e6,
            step: 10e3,
            runs_per_frequency: 500,
            watchdog_timeout: 0.05,
        }
    }
}

/// Grid spacing is treated as exact below this relative slack.
const GRID_SLACK: f64 = 1e-9;

impl SearchConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |m: String| Err(ControllerError::InvalidConfig(m));
        if !(self.f_min > 0.0 && self.f_min.is_finite()) {
            return bad(format!("f_min must be positive, got {}", self.f_min));
        }
        if !(self.f_min < self.f_max && self.f_max.is_finite()) {
            return bad(format!("f_min ({}) must be below f_max ({})", self.f_min, self.f_max));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad(format!("step must be positive, got {}", self.step));
        }
        if self.runs_per_frequency == 0 {
            return bad("runs_per_frequency must be at least 1".into());
        }
        if !(self.watchdog_timeout >= 0.0 && self.watchdog_timeout.is_finite()) {
            return bad(format!("watchdog_timeout must be non-negative, got {}", self.watchdog_timeout));
        }
        Ok(())
    }

    /// Index of the last grid point (`f_max`).
    pub fn last_index(&self) -> u64 {
        grid_last_index(self.f_min, self.f_max, self.step)
    }

    pub fn frequency_at(&self, index: u64) -> f64 {
        grid_point(self.f_min, self.f_max, self.step, index)
    }

    /// Frequencies the bisection may probe at most.
    pub fn probe_budget(&self) -> u32 {
        let n = self.last_index();
        2 + u64::BITS - (n.max(1) - 1).leading_zeros()
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..=self.last_index()).map(|k| self.frequency_at(k)).collect()
    }
}

fn grid_last_index(from: f64, to: f64, step: f64) -> u64 {
    ((to - from) / step - GRID_SLACK).ceil().max(1.0) as u64
}

fn grid_point(from: f64, to: f64, step: f64, index: u64) -> f64 {
    (from + index as f64 * step).min(to)
}

/// Outcome counts of one batch at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyResult {
    pub frequency: f64,
    pub passes: u32,
    pub compute_errors: u32,
    pub hangs: u32,
    /// Execution time plus watchdog charges of this batch.
    pub virtual_time_s: f64,
}

impl FrequencyResult {
    pub fn runs(&self) -> u32 {
        self.passes + self.compute_errors + self.hangs
    }

    pub fn is_error_free(&self) -> bool {
        self.compute_errors == 0 && self.hangs == 0
    }

    pub fn all_failed(&self) -> bool {
        self.passes == 0
    }

    pub fn error_fraction(&self) -> f64 {
        f64::from(self.compute_errors + self.hangs) / f64::from(self.runs().max(1))
    }

    pub fn hang_fraction(&self) -> f64 {
        f64::from(self.hangs) / f64::from(self.runs().max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub mef: f64,
    pub mof: Option<f64>,
    /// `f_max` itself was error-free.
    pub range_exhausted: bool,
    /// Probes in the order they were made.
    pub trace: Vec<FrequencyResult>,
    pub total_test_executions: u64,
}

impl SearchOutcome {
    pub fn virtual_time_s(&self) -> f64 {
        self.trace.iter().map(|r| r.virtual_time_s).sum()
    }
}

/// Lowest probed frequency where no run passed.
pub fn detect_mof(trace: &[FrequencyResult]) -> Option<f64> {
    trace
        .iter()
        .filter(|r| r.runs() > 0 && r.all_failed())
        .map(|r| r.frequency)
        .min_by(f64::total_cmp)
}

/// One JSON-lines record per probed frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub device_id: String,
    pub payload: String,
    pub config: String,
    pub temperature: f64,
    pub frequency_hz: f64,
    pub passes: u32,
    pub compute_errors: u32,
    pub hangs: u32,
    pub virtual_time_s: f64,
}

impl TraceRecord {
    pub fn new(device: &SimulatedDevice, payload: &Payload, config: &DeviceConfig, r: &FrequencyResult) -> Self {
        Self {
            device_id: device.device_id().to_owned(),
            payload: payload.kind.to_string(),
            config: config.flash_buffering.to_string(),
            temperature: device.temperature_c(),
            frequency_hz: r.frequency,
            passes: r.passes,
            compute_errors: r.compute_errors,
            hangs: r.hangs,
            virtual_time_s: r.virtual_time_s,
        }
    }
}

/// Drives one device through batches of payload runs.
#[derive(Debug, Clone)]
pub struct Controller {
    pub search: SearchConfig,
    pub transition: ErrorTransitionModel,
    pub timing: TimingModel,
    virtual_time_s: f64,
    executions: u64,
}

impl Controller {
    pub fn new(
        search: SearchConfig,
        transition: ErrorTransitionModel,
        timing: TimingModel,
    ) -> Result<Self, ControllerError> {
        search.validate()?;
        Ok(Self {
            search,
            transition,
            timing,
            virtual_time_s: 0.0,
            executions: 0,
        })
    }

    /// Total simulated seconds spent by this controller so far.
    pub fn virtual_time_s(&self) -> f64 {
        self.virtual_time_s
    }

    pub fn executions(&self) -> u64 {
        self.executions
    }

    /// `runs` executions at `frequency`. Hangs are charged the watchdog
    /// timeout and followed by a power cycle.
    pub fn run_at_frequency<R: Rng + ?Sized>(
        &mut self,
        device: &mut SimulatedDevice,
        payload: &Payload,
        config: &DeviceConfig,
        frequency: f64,
        runs: u32,
        rng: &mut R,
    ) -> FrequencyResult {
        let mut result = FrequencyResult {
            frequency,
            passes: 0,
            compute_errors: 0,
            hangs: 0,
            virtual_time_s: 0.0,
        };
        if device.is_hung() {
            device.power_cycle();
        }
        let run_time = self.timing.execution_time(payload, frequency, config);
        for _ in 0..runs {
            let outcome = execute(payload, device, config, frequency, &self.transition, rng);
            match outcome.status {
                Status::Pass => {
                    result.passes += 1;
                    result.virtual_time_s += run_time;
                }
                Status::ComputeError => {
                    result.compute_errors += 1;
                    result.virtual_time_s += run_time;
                }
                Status::Hang => {
                    result.hangs += 1;
                    result.virtual_time_s += self.search.watchdog_timeout;
                    device.power_cycle();
                }
            }
        }
        self.virtual_time_s += result.virtual_time_s;
        self.executions += u64::from(runs);
        result
    }

    fn probe<R: Rng + ?Sized>(
        &mut self,
        device: &mut SimulatedDevice,
        payload: &Payload,
        config: &DeviceConfig,
        index: u64,
        trace: &mut Vec<FrequencyResult>,
        rng: &mut R,
    ) -> bool {
        let f = self.search.frequency_at(index);
        let r = self.run_at_frequency(device, payload, config, f, self.search.runs_per_frequency, rng);
        trace.push(r);
        r.is_error_free()
    }

    /// Bisection for the highest error-free grid frequency.
    pub fn find_mef<R: Rng + ?Sized>(
        &mut self,
        device: &mut SimulatedDevice,
        payload: &Payload,
        config: &DeviceConfig,
        rng: &mut R,
    ) -> Result<SearchOutcome, ControllerError> {
        let start = self.executions;
        let mut trace = Vec::new();
        let mut lo = 0;
        let mut hi = self.search.last_index();
        if !self.probe(device, payload, config, lo, &mut trace, rng) {
            return Err(ControllerError::DeviceBelowMinimum {
                payload: payload.kind.to_string(),
                f_min: self.search.f_min,
            });
        }
        let range_exhausted = self.probe(device, payload, config, hi, &mut trace, rng);
        if range_exhausted {
            lo = hi;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.probe(device, payload, config, mid, &mut trace, rng) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(SearchOutcome {
            mef: self.search.frequency_at(lo),
            mof: detect_mof(&trace),
            range_exhausted,
            trace,
            total_test_executions: self.executions - start,
        })
    }

    /// Batches at every point of `[from, to]` spaced by `step`, `to` included.
    #[allow(clippy::too_many_arguments)]
    pub fn sweep<R: Rng + ?Sized>(
        &mut self,
        device: &mut SimulatedDevice,
        payload: &Payload,
        config: &DeviceConfig,
        from: f64,
        to: f64,
        step: f64,
        rng: &mut R,
    ) -> Result<Vec<FrequencyResult>, ControllerError> {
        if !(from < to && step > 0.0 && from.is_finite() && to.is_finite()) {
            return Err(ControllerError::InvalidSweep { from, to, step });
        }
        let runs = self.search.runs_per_frequency;
        Ok((0..=grid_last_index(from, to, step))
            .map(|k| {
                let f = grid_point(from, to, step, k);
                self.run_at_frequency(device, payload, config, f, runs, rng)
            })
            .collect())
    }

    /// Exhaustive sweep over the search grid; highest error-free point below
    /// the first failing one. This is the reference the bisection is held to.
    pub fn sweep_oracle_mef<R: Rng + ?Sized>(
        &mut self,
        device: &mut SimulatedDevice,
        payload: &Payload,
        config: &DeviceConfig,
        rng: &mut R,
    ) -> Option<f64> {
        let runs = self.search.runs_per_frequency;
        let mut best = None;
        for k in 0..=self.search.last_index() {
            let f = self.search.frequency_at(k);
            if !self.run_at_frequency(device, payload, config, f, runs, rng).is_error_free() {
                break;
            }
            best = Some(f);
        }
        best
    }
}
