// SPDX-License-Identifier: Apache-2.0

//! Campaign configuration file.
//!
//! TOML with flat sections and no nesting below them. Every key is optional;
//! absent keys take the shipped defaults. Unknown sections or keys are
//! errors, and all problems in a file are reported together.
//!
//! ```toml
//! [campaign]
//! device_count = 8
//! temperatures = [20, 30, 40, 50, 60, 70, 80]
//! payloads = ["matrix", "flash_read", "ram_rw", "ram_march_c", "cpu_test"]
//! configs = ["buffered", "unbuffered"]
//! master_seed = 2024
//! output_dir = "agemon-out"
//! ci_mode = false
//! ci_runs_per_frequency = 50
//! sweep = true
//! sweep_low_fraction = 0.9
//! sweep_high_fraction = 1.15
//! sweep_step = 500000.0
//!
//! [search]
//! f_min = 1e6
//! f_max = 200e6
//! step = 10e3
//! runs_per_frequency = 500
//! watchdog_timeout = 0.05
//!
//! [physics]      # mu_ph0, reference_temperature, theta, alpha,
//!                # oxide_capacitance, channel_width, channel_length,
//!                # supply_voltage, threshold_voltage
//! [device]       # guard_band_frequency, sram_bytes, flash_bytes,
//!                # max_wait_states, process_variation
//! [path_flash]   # gate_chain_length, load_capacitance, surface_mobility
//! [path_sram]    # (same keys; surface_mobility = 0 disables the term)
//! [path_alu]
//! [path_pipeline]
//! [transition]   # onset_fraction, shape = "smoothstep" | "linear"
//! [timing]       # reference_frequency, buffered_scaling, time_matrix,
//!                # time_flash_read, time_ram_rw, time_ram_march_c, time_cpu_test
//! [ageing]       # threshold_shift, mobility_factor: one entry per temperature
//! ```

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::controller::SearchConfig;
use crate::device::{CriticalPath, DeviceDescription, FlashBuffering, Subsystem};
use crate::payloads::image::SRAM_MIN_BYTES;
use crate::payloads::{image::FLASH_MIN_BYTES, ErrorTransitionModel, PayloadKind, TimingModel};
use crate::physics::{AgeingState, GateLoad, MobilityModel, ScatteringTerm, TransistorParams};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub enabled: bool,
    pub low_fraction: f64,
    pub high_fraction: f64,
    pub step: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            low_fraction: 0.9,
            high_fraction: 1.15,
            step: 0.5e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathCalibration {
    pub subsystem: Subsystem,
    pub gate_chain_length: u32,
    pub load_capacitance: f64,
    /// Constant surface-scattering mobility, m²/(V·s); `None` leaves the
    /// path phonon-limited.
    pub surface_mobility: Option<f64>,
}

impl PathCalibration {
    fn section(&self) -> String {
        format!("path_{}", self.subsystem.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceCalibration {
    pub guard_band_frequency: f64,
    pub sram_bytes: usize,
    pub flash_bytes: usize,
    pub max_wait_states: u32,
    pub process_variation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeingSchedule {
    pub threshold_shift: Vec<f64>,
    pub mobility_factor: Vec<f64>,
}

impl AgeingSchedule {
    pub fn at(&self, index: usize) -> AgeingState {
        AgeingState {
            threshold_voltage_shift: self.threshold_shift[index],
            mobility_degradation_factor: self.mobility_factor[index],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub device_count: u32,
    pub temperatures: Vec<f64>,
    pub payloads: Vec<PayloadKind>,
    pub configs: Vec<FlashBuffering>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub ci_mode: bool,
    pub ci_runs_per_frequency: u32,
    pub sweep: SweepConfig,
    pub search: SearchConfig,
    pub mobility: MobilityModel,
    pub transistor: TransistorParams,
    pub device: DeviceCalibration,
    pub paths: Vec<PathCalibration>,
    pub transition: ErrorTransitionModel,
    pub timing: TimingModel,
    /// Base execution time per payload, same order as `PayloadKind::ALL`.
    pub base_times: [f64; 5],
    pub ageing: Option<AgeingSchedule>,
}

pub const DEFAULT_MASTER_SEED: u64 = 2024;

impl Default for CampaignConfig {
    fn default() -> Self {
        let path = |subsystem, gate_chain_length, surface_mobility| PathCalibration {
            subsystem,
            gate_chain_length,
            load_capacitance: 5e-15,
            surface_mobility: Some(surface_mobility),
        };
        Self {
            device_count: 8,
            temperatures: (2..=8).map(|t| f64::from(t) * 10.0).collect(),
            payloads: PayloadKind::ALL.to_vec(),
            configs: FlashBuffering::BOTH.to_vec(),
            master_seed: DEFAULT_MASTER_SEED,
            output_dir: PathBuf::from("agemon-out"),
            ci_mode: false,
            ci_runs_per_frequency: 50,
            sweep: SweepConfig::default(),
            search: SearchConfig::default(),
            mobility: MobilityModel::default(),
            transistor: TransistorParams::default(),
            device: DeviceCalibration {
                guard_band_frequency: 72e6,
                sram_bytes: 20 * 1024,
                flash_bytes: 128 * 1024,
                max_wait_states: 2,
                process_variation: 0.05,
            },
            paths: vec![
                path(Subsystem::Flash, 198, 0.0406),
                path(Subsystem::Sram, 115, 0.0276),
                path(Subsystem::Alu, 64, 0.0138),
                path(Subsystem::Pipeline, 114, 0.0207),
            ],
            transition: ErrorTransitionModel::default(),
            timing: TimingModel::default(),
            base_times: [420e-6, 600e-6, 1500e-6, 180e-6, 6e-6],
            ageing: None,
        }
    }
}

impl CampaignConfig {
    /// Search settings after applying CI mode.
    pub fn effective_search(&self) -> SearchConfig {
        let mut s = self.search;
        if self.ci_mode {
            s.runs_per_frequency = self.ci_runs_per_frequency;
        }
        s
    }

    pub fn base_time(&self, kind: PayloadKind) -> f64 {
        let i = PayloadKind::ALL.iter().position(|k| *k == kind).expect("payload in ALL");
        self.base_times[i]
    }

    pub fn device_description(&self) -> DeviceDescription {
        DeviceDescription {
            paths: self
                .paths
                .iter()
                .map(|p| CriticalPath {
                    id: p.subsystem.as_str().to_owned(),
                    subsystem: p.subsystem,
                    gate_chain_length: p.gate_chain_length,
                    gate_load: GateLoad {
                        load_capacitance: p.load_capacitance,
                    },
                    transistor: self.transistor,
                    scattering: p
                        .surface_mobility
                        .map(|m| vec![ScatteringTerm::constant("surface", m)])
                        .unwrap_or_default(),
                })
                .collect(),
            mobility_model: self.mobility.clone(),
            sram_bytes: self.device.sram_bytes,
            guard_band_frequency: self.device.guard_band_frequency,
            max_wait_states: self.device.max_wait_states,
            process_variation: self.device.process_variation,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigErrors> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| {
            ConfigErrors(vec![ConfigError {
                key: "<file>".into(),
                message: e.to_string().trim().to_owned(),
            }])
        })?;
        let mut r = Reader::default();
        let mut c = CampaignConfig::default();
        r.read(&table, &mut c);
        if r.errors.is_empty() {
            c.check(&mut r.errors);
        }
        if r.errors.is_empty() {
            Ok(c)
        } else {
            Err(ConfigErrors(r.errors))
        }
    }

    /// Semantic checks on an assembled configuration.
    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut errors = Vec::new();
        self.check(&mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errors))
        }
    }

    fn check(&self, errors: &mut Vec<ConfigError>) {
        let mut err = |key: &str, message: String| {
            errors.push(ConfigError {
                key: key.into(),
                message,
            })
        };
        if self.device_count == 0 {
            err("campaign.device_count", "must be at least 1".into());
        }
        if self.temperatures.is_empty() {
            err("campaign.temperatures", "must list at least one temperature".into());
        }
        if self.temperatures.windows(2).any(|w| !(w[0] < w[1])) {
            err("campaign.temperatures", "must be strictly increasing".into());
        }
        if self.payloads.is_empty() {
            err("campaign.payloads", "must select at least one payload".into());
        }
        if self.configs.is_empty() {
            err("campaign.configs", "must select at least one configuration".into());
        }
        if self.ci_runs_per_frequency == 0 {
            err("campaign.ci_runs_per_frequency", "must be at least 1".into());
        }
        let s = &self.sweep;
        if !(s.low_fraction > 0.0 && s.low_fraction < s.high_fraction) {
            err(
                "campaign.sweep_low_fraction",
                format!(
                    "must be positive and below campaign.sweep_high_fraction ({} vs {})",
                    s.low_fraction, s.high_fraction
                ),
            );
        }
        if !(s.step > 0.0) {
            err("campaign.sweep_step", "must be positive".into());
        }
        let q = &self.search;
        if !(q.f_min > 0.0) {
            err("search.f_min", "must be positive".into());
        }
        if !(q.f_min < q.f_max) {
            err(
                "search.f_min",
                format!("search.f_min ({}) must be below search.f_max ({})", q.f_min, q.f_max),
            );
        }
        if !(q.step > 0.0) {
            err("search.step", "must be positive".into());
        }
        if q.runs_per_frequency == 0 {
            err("search.runs_per_frequency", "must be at least 1".into());
        }
        if !(q.watchdog_timeout >= 0.0) {
            err("search.watchdog_timeout", "must be non-negative".into());
        }
        if self.device.flash_bytes < FLASH_MIN_BYTES {
            err(
                "device.flash_bytes",
                format!("must be at least {FLASH_MIN_BYTES} bytes for the test image"),
            );
        }
        if self.device.sram_bytes < SRAM_MIN_BYTES {
            err(
                "device.sram_bytes",
                format!("must be at least {SRAM_MIN_BYTES} bytes for the test regions"),
            );
        }
        if !(self.transition.onset_fraction >= 1.0) {
            err("transition.onset_fraction", "must be at least 1".into());
        }
        if !(self.timing.reference_frequency > 0.0) {
            err("timing.reference_frequency", "must be positive".into());
        }
        if !(self.timing.buffered_scaling > 0.0) {
            err("timing.buffered_scaling", "must be positive".into());
        }
        for (kind, t) in PayloadKind::ALL.iter().zip(self.base_times) {
            if !(t > 0.0) {
                err(&format!("timing.time_{kind}"), "must be positive".into());
            }
        }
        if let Some(a) = &self.ageing {
            for (key, list) in [("ageing.threshold_shift", &a.threshold_shift), ("ageing.mobility_factor", &a.mobility_factor)] {
                if list.len() != self.temperatures.len() {
                    err(
                        key,
                        format!("needs one entry per temperature ({}), got {}", self.temperatures.len(), list.len()),
                    );
                }
            }
            for i in 0..a.threshold_shift.len().min(a.mobility_factor.len()) {
                if let Err(e) = a.at(i).validate() {
                    err("ageing", format!("entry {i}: {e}"));
                }
            }
        }
        for p in &self.paths {
            if p.gate_chain_length == 0 {
                err(&format!("{}.gate_chain_length", p.section()), "must be at least 1".into());
            }
        }
        let (lo, hi) = crate::device::TEMPERATURE_RANGE_C;
        if let Some(t) = self.temperatures.iter().find(|t| !(lo..=hi).contains(*t)) {
            err("campaign.temperatures", format!("{t} °C outside [{lo}, {hi}] °C"));
        }
        if errors.is_empty() {
            if let Err(e) = self.device_description().validate() {
                errors.push(ConfigError {
                    key: "device".into(),
                    message: e.to_string(),
                });
            }
        }
    }

    /// Fully resolved configuration as TOML; parses back to `self`.
    pub fn to_toml(&self) -> String {
        let mut root = Table::new();
        let f = Value::Float;
        let int = |v: u64| Value::Integer(v as i64);
        let floats = |v: &[f64]| Value::Array(v.iter().copied().map(Value::Float).collect());
        let strings = |v: Vec<String>| Value::Array(v.into_iter().map(Value::String).collect());

        let mut t = Table::new();
        t.insert("device_count".into(), int(self.device_count.into()));
        t.insert("temperatures".into(), floats(&self.temperatures));
        t.insert("payloads".into(), strings(self.payloads.iter().map(|p| p.to_string()).collect()));
        t.insert("configs".into(), strings(self.configs.iter().map(|c| c.to_string()).collect()));
        t.insert("master_seed".into(), int(self.master_seed));
        t.insert("output_dir".into(), Value::String(self.output_dir.display().to_string()));
        t.insert("ci_mode".into(), Value::Boolean(self.ci_mode));
        t.insert("ci_runs_per_frequency".into(), int(self.ci_runs_per_frequency.into()));
        t.insert("sweep".into(), Value::Boolean(self.sweep.enabled));
        t.insert("sweep_low_fraction".into(), f(self.sweep.low_fraction));
        t.insert("sweep_high_fraction".into(), f(self.sweep.high_fraction));
        t.insert("sweep_step".into(), f(self.sweep.step));
        root.insert("campaign".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("f_min".into(), f(self.search.f_min));
        t.insert("f_max".into(), f(self.search.f_max));
        t.insert("step".into(), f(self.search.step));
        t.insert("runs_per_frequency".into(), int(self.search.runs_per_frequency.into()));
        t.insert("watchdog_timeout".into(), f(self.search.watchdog_timeout));
        root.insert("search".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("mu_ph0".into(), f(self.mobility.mu_ph0));
        t.insert("reference_temperature".into(), f(self.mobility.reference_temperature));
        t.insert("theta".into(), f(self.mobility.theta));
        t.insert("alpha".into(), f(self.mobility.alpha));
        t.insert("oxide_capacitance".into(), f(self.transistor.oxide_capacitance));
        t.insert("channel_width".into(), f(self.transistor.channel_width));
        t.insert("channel_length".into(), f(self.transistor.channel_length));
        t.insert("supply_voltage".into(), f(self.transistor.supply_voltage));
        t.insert("threshold_voltage".into(), f(self.transistor.threshold_voltage_fresh));
        root.insert("physics".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("guard_band_frequency".into(), f(self.device.guard_band_frequency));
        t.insert("sram_bytes".into(), int(self.device.sram_bytes as u64));
        t.insert("flash_bytes".into(), int(self.device.flash_bytes as u64));
        t.insert("max_wait_states".into(), int(self.device.max_wait_states.into()));
        t.insert("process_variation".into(), f(self.device.process_variation));
        root.insert("device".into(), Value::Table(t));

        for p in &self.paths {
            let mut t = Table::new();
            t.insert("gate_chain_length".into(), int(p.gate_chain_length.into()));
            t.insert("load_capacitance".into(), f(p.load_capacitance));
            t.insert("surface_mobility".into(), f(p.surface_mobility.unwrap_or(0.0)));
            root.insert(p.section(), Value::Table(t));
        }

        let mut t = Table::new();
        t.insert("onset_fraction".into(), f(self.transition.onset_fraction));
        t.insert("shape".into(), Value::String(self.transition.shape.as_str().into()));
        root.insert("transition".into(), Value::Table(t));

        let mut t = Table::new();
        t.insert("reference_frequency".into(), f(self.timing.reference_frequency));
        t.insert("buffered_scaling".into(), f(self.timing.buffered_scaling));
        for (kind, time) in PayloadKind::ALL.iter().zip(self.base_times) {
            t.insert(format!("time_{kind}"), f(time));
        }
        root.insert("timing".into(), Value::Table(t));

        if let Some(a) = &self.ageing {
            let mut t = Table::new();
            t.insert("threshold_shift".into(), floats(&a.threshold_shift));
            t.insert("mobility_factor".into(), floats(&a.mobility_factor));
            root.insert("ageing".into(), Value::Table(t));
        }
        toml::to_string(&root).expect("table serializes")
    }
}

#[derive(Default)]
struct Reader {
    errors: Vec<ConfigError>,
}

const SECTIONS: [&str; 11] = [
    "campaign",
    "search",
    "physics",
    "device",
    "path_flash",
    "path_sram",
    "path_alu",
    "path_pipeline",
    "transition",
    "timing",
    "ageing",
];

impl Reader {
    fn err(&mut self, key: String, message: impl Into<String>) {
        self.errors.push(ConfigError {
            key,
            message: message.into(),
        });
    }

    fn read(&mut self, root: &Table, c: &mut CampaignConfig) {
        for (name, value) in root {
            if !SECTIONS.contains(&name.as_str()) {
                self.err(name.clone(), "unknown section");
            } else if !value.is_table() {
                self.err(name.clone(), "must be a section");
            }
        }
        let empty = Table::new();
        let sec = |name: &str| root.get(name).and_then(Value::as_table).unwrap_or(&empty);

        let mut s = Section::new(self, "campaign", sec("campaign"));
        s.uint("device_count", &mut c.device_count);
        s.float_list("temperatures", &mut c.temperatures);
        s.parsed_list("payloads", &mut c.payloads);
        s.parsed_list("configs", &mut c.configs);
        s.uint64("master_seed", &mut c.master_seed);
        let mut out = c.output_dir.display().to_string();
        s.string("output_dir", &mut out);
        c.output_dir = PathBuf::from(out);
        s.boolean("ci_mode", &mut c.ci_mode);
        s.uint("ci_runs_per_frequency", &mut c.ci_runs_per_frequency);
        s.boolean("sweep", &mut c.sweep.enabled);
        s.float("sweep_low_fraction", &mut c.sweep.low_fraction);
        s.float("sweep_high_fraction", &mut c.sweep.high_fraction);
        s.float("sweep_step", &mut c.sweep.step);
        s.finish();

        let mut s = Section::new(self, "search", sec("search"));
        s.float("f_min", &mut c.search.f_min);
        s.float("f_max", &mut c.search.f_max);
        s.float("step", &mut c.search.step);
        s.uint("runs_per_frequency", &mut c.search.runs_per_frequency);
        s.float("watchdog_timeout", &mut c.search.watchdog_timeout);
        s.finish();

        let mut s = Section::new(self, "physics", sec("physics"));
        s.float("mu_ph0", &mut c.mobility.mu_ph0);
        s.float("reference_temperature", &mut c.mobility.reference_temperature);
        s.float("theta", &mut c.mobility.theta);
        s.float("alpha", &mut c.mobility.alpha);
        s.float("oxide_capacitance", &mut c.transistor.oxide_capacitance);
        s.float("channel_width", &mut c.transistor.channel_width);
        s.float("channel_length", &mut c.transistor.channel_length);
        s.float("supply_voltage", &mut c.transistor.supply_voltage);
        s.float("threshold_voltage", &mut c.transistor.threshold_voltage_fresh);
        s.finish();

        let mut s = Section::new(self, "device", sec("device"));
        s.float("guard_band_frequency", &mut c.device.guard_band_frequency);
        s.usize("sram_bytes", &mut c.device.sram_bytes);
        s.usize("flash_bytes", &mut c.device.flash_bytes);
        s.uint("max_wait_states", &mut c.device.max_wait_states);
        s.float("process_variation", &mut c.device.process_variation);
        s.finish();

        for p in c.paths.iter_mut() {
            let name = p.section();
            let mut s = Section::new(self, &name, sec(&name));
            s.uint("gate_chain_length", &mut p.gate_chain_length);
            s.float("load_capacitance", &mut p.load_capacitance);
            let mut m = p.surface_mobility.unwrap_or(0.0);
            s.float("surface_mobility", &mut m);
            p.surface_mobility = (m != 0.0).then_some(m);
            s.finish();
        }

        let mut s = Section::new(self, "transition", sec("transition"));
        s.float("onset_fraction", &mut c.transition.onset_fraction);
        s.parsed("shape", &mut c.transition.shape);
        s.finish();

        let mut s = Section::new(self, "timing", sec("timing"));
        s.float("reference_frequency", &mut c.timing.reference_frequency);
        s.float("buffered_scaling", &mut c.timing.buffered_scaling);
        for (kind, time) in PayloadKind::ALL.iter().zip(c.base_times.iter_mut()) {
            s.float(&format!("time_{kind}"), time);
        }
        s.finish();

        if let Some(t) = root.get("ageing").and_then(Value::as_table) {
            let mut a = AgeingSchedule {
                threshold_shift: vec![0.0; c.temperatures.len()],
                mobility_factor: vec![1.0; c.temperatures.len()],
            };
            let mut s = Section::new(self, "ageing", t);
            s.float_list("threshold_shift", &mut a.threshold_shift);
            s.float_list("mobility_factor", &mut a.mobility_factor);
            s.finish();
            c.ageing = Some(a);
        }
    }
}

struct Section<'r, 't> {
    reader: &'r mut Reader,
    name: String,
    table: &'t Table,
    seen: Vec<String>,
}

impl<'r, 't> Section<'r, 't> {
    fn new(reader: &'r mut Reader, name: &str, table: &'t Table) -> Self {
        Self {
            reader,
            name: name.to_owned(),
            table,
            seen: Vec::new(),
        }
    }

    fn get(&mut self, key: &str) -> Option<&'t Value> {
        self.seen.push(key.to_owned());
        self.table.get(key)
    }

    fn err(&mut self, key: &str, message: impl Into<String>) {
        let full = format!("{}.{key}", self.name);
        self.reader.err(full, message);
    }

    fn number(&mut self, key: &str) -> Option<f64> {
        match self.get(key)? {
            Value::Float(v) if v.is_finite() => Some(*v),
            Value::Integer(v) => Some(*v as f64),
            other => {
                self.err(key, format!("expected a finite number, found {other}"));
                None
            }
        }
    }

    fn float(&mut self, key: &str, slot: &mut f64) {
        if let Some(v) = self.number(key) {
            *slot = v;
        }
    }

    fn integer(&mut self, key: &str, max: u64) -> Option<u64> {
        match self.get(key)? {
            Value::Integer(v) if *v >= 0 && (*v as u64) <= max => Some(*v as u64),
            other => {
                self.err(key, format!("expected an integer in [0, {max}], found {other}"));
                None
            }
        }
    }

    fn uint(&mut self, key: &str, slot: &mut u32) {
        if let Some(v) = self.integer(key, u32::MAX.into()) {
            *slot = v as u32;
        }
    }

    fn uint64(&mut self, key: &str, slot: &mut u64) {
        if let Some(v) = self.integer(key, i64::MAX as u64) {
            *slot = v;
        }
    }

    fn usize(&mut self, key: &str, slot: &mut usize) {
        if let Some(v) = self.integer(key, u32::MAX.into()) {
            *slot = v as usize;
        }
    }

    fn boolean(&mut self, key: &str, slot: &mut bool) {
        match self.get(key) {
            None => {}
            Some(Value::Boolean(b)) => *slot = *b,
            Some(other) => self.err(key, format!("expected true or false, found {other}")),
        }
    }

    fn string(&mut self, key: &str, slot: &mut String) {
        match self.get(key) {
            None => {}
            Some(Value::String(s)) => *slot = s.clone(),
            Some(other) => self.err(key, format!("expected a string, found {other}")),
        }
    }

    fn parsed<T: std::str::FromStr<Err = String>>(&mut self, key: &str, slot: &mut T) {
        let mut raw = String::new();
        if self.table.contains_key(key) {
            self.string(key, &mut raw);
            match raw.parse() {
                Ok(v) => *slot = v,
                Err(e) => self.err(key, e),
            }
        } else {
            self.seen.push(key.to_owned());
        }
    }

    fn float_list(&mut self, key: &str, slot: &mut Vec<f64>) {
        let Some(value) = self.get(key) else { return };
        let Some(items) = value.as_array() else {
            self.err(key, format!("expected a list of numbers, found {value}"));
            return;
        };
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::Float(v) if v.is_finite() => out.push(*v),
                Value::Integer(v) => out.push(*v as f64),
                other => {
                    self.err(key, format!("expected numbers, found {other}"));
                    return;
                }
            }
        }
        *slot = out;
    }

    fn parsed_list<T: std::str::FromStr<Err = String>>(&mut self, key: &str, slot: &mut Vec<T>) {
        let Some(value) = self.get(key) else { return };
        let Some(items) = value.as_array() else {
            self.err(key, format!("expected a list of strings, found {value}"));
            return;
        };
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for item in items {
            match item.as_str().map(str::parse) {
                Some(Ok(v)) => out.push(v),
                Some(Err(e)) => {
                    self.err(key, e);
                    ok = false;
                }
                None => {
                    self.err(key, format!("expected strings, found {item}"));
                    ok = false;
                }
            }
        }
        if ok {
            *slot = out;
        }
    }

    fn finish(self) {
        for key in self.table.keys() {
            if !self.seen.iter().any(|k| k == key) {
                self.reader.err(format!("{}.{key}", self.name), "unknown key");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(CampaignConfig::from_toml("").unwrap(), CampaignConfig::default());
    }

    #[test]
    fn defaults_are_valid() {
        let c = CampaignConfig::default();
        c.validate().unwrap();
        assert_eq!(c.temperatures, vec![20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0]);
        assert_eq!(c.search, SearchConfig::default());
        assert_eq!(c.device_count, 8);
    }

    #[test]
    fn echo_round_trips() {
        let mut c = CampaignConfig {
            ci_mode: true,
            master_seed: 99,
            ..CampaignConfig::default()
        };
        c.paths[2].surface_mobility = None;
        c.ageing = Some(AgeingSchedule {
            threshold_shift: vec![0.0, 0.001, 0.002, 0.003, 0.004, 0.005, 0.006],
            mobility_factor: vec![1.0, 0.999, 0.998, 0.997, 0.996, 0.995, 0.994],
        });
        let text = c.to_toml();
        assert_eq!(CampaignConfig::from_toml(&text).unwrap(), c);
        assert_eq!(CampaignConfig::default().to_toml(), CampaignConfig::from_toml(&CampaignConfig::default().to_toml()).unwrap().to_toml());
    }

    #[test]
    fn f_min_above_f_max_names_both() {
        let e = CampaignConfig::from_toml("[search]\nf_min = 300e6\n").unwrap_err();
        let text = e.to_string();
        assert!(text.contains("search.f_min") && text.contains("search.f_max"), "{text}");
    }

    #[test]
    fn temperatures_out_of_order() {
        let e = CampaignConfig::from_toml("[campaign]\ntemperatures = [20, 40, 30]\n").unwrap_err();
        assert_eq!(e.0[0].key, "campaign.temperatures");
    }

    #[test]
    fn all_unknown_keys_reported() {
        let e = CampaignConfig::from_toml("[search]\nfmin = 1\n[campaign]\ndevices = 3\n[bogus]\nx = 1\n").unwrap_err();
        let keys: Vec<&str> = e.0.iter().map(|e| e.key.as_str()).collect();
        assert!(keys.contains(&"search.fmin"));
        assert!(keys.contains(&"campaign.devices"));
        assert!(keys.contains(&"bogus"));
    }

    #[test]
    fn type_errors_collected() {
        let e = CampaignConfig::from_toml(
            "[campaign]\ndevice_count = \"eight\"\npayloads = [\"nope\"]\n[transition]\nshape = \"cubic\"\n",
        )
        .unwrap_err();
        assert_eq!(e.0.len(), 3);
    }

    #[test]
    fn ci_mode_reduces_runs() {
        let c = CampaignConfig::from_toml("[campaign]\nci_mode = true\n").unwrap();
        assert_eq!(c.effective_search().runs_per_frequency, 50);
        assert_eq!(CampaignConfig::default().effective_search().runs_per_frequency, 500);
    }

    #[test]
    fn ageing_length_checked() {
        let e = CampaignConfig::from_toml("[ageing]\nthreshold_shift = [0.0, 0.01]\n").unwrap_err();
        assert_eq!(e.0[0].key, "ageing.threshold_shift");
    }

    #[test]
    fn guard_band_checked() {
        let e = CampaignConfig::from_toml("[device]\nguard_band_frequency = 150e6\n").unwrap_err();
        assert_eq!(e.0[0].key, "device");
    }
}
