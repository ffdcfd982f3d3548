// SPDX-License-Identifier: Apache-2.0

//! Campaign runner: device fleet × temperature ladder × payloads × flash
//! configurations.
//!
//! Every cell is an independent work unit with its own device copy and RNG
//! stream, so cells run in parallel and results do not depend on scheduling.
//!
//! Seeds: device `i` gets the `(i+1)`-th output of a splitmix64 generator
//! seeded with `master_seed`. Adding devices never changes the seeds of
//! existing ones. Cell streams mix the device seed with the
//! temperature, payload and configuration indices the same way.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::analytics::report::{export_report, CampaignCell, Report};
use crate::analytics::AnalyticsError;
use crate::config::{CampaignConfig, ConfigErrors};
use crate::controller::{Controller, ControllerError, FrequencyResult, TraceRecord};
use crate::device::{DeviceError, SimulatedDevice};
use crate::payloads::image::FlashImage;
use crate::payloads::{Payload, PayloadError, PayloadKind};

pub const CONFIG_ECHO_FILE: &str = "resolved_config.toml";
pub const FLASH_IMAGE_FILE: &str = "flash_image.bin";
pub const TRACE_FILE: &str = "trace.jsonl";

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn device_seed(master_seed: u64, index: u32) -> u64 {
    splitmix64(master_seed.wrapping_add(u64::from(index).wrapping_mul(GAMMA)))
}

pub fn cell_seed(device_seed: u64, temperature_index: usize, payload_index: usize, config_index: usize) -> u64 {
    [temperature_index, payload_index, config_index]
        .iter()
        .fold(device_seed, |s, i| splitmix64(s ^ splitmix64(*i as u64)))
}

pub fn device_id(index: u32) -> String {
    format!("dev-{index:02}")
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Payload(#[from] PayloadError),
    #[error("{cell}: {source}")]
    Search { cell: String, source: ControllerError },
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("device index {index} outside fleet of {count}")]
    NoSuchDevice { index: u32, count: u32 },
}

impl CampaignError {
    pub fn is_config(&self) -> bool {
        matches!(self, CampaignError::Config(_))
    }
}

/// Everything a campaign produced, before export.
#[derive(Debug, Clone)]
pub struct CampaignOutput {
    pub cells: Vec<CampaignCell>,
    pub report: Report,
    pub trace: Vec<TraceRecord>,
    pub flash_image: FlashImage,
}

struct CellResult {
    cell: CampaignCell,
    trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone, Copy)]
struct CellSpec {
    device: usize,
    temperature: usize,
    payload: usize,
    config: usize,
}

struct Fleet {
    image: FlashImage,
    devices: Vec<SimulatedDevice>,
    seeds: Vec<u64>,
}

fn build_fleet(config: &CampaignConfig, indices: &[u32]) -> Result<Fleet, CampaignError> {
    config.validate()?;
    let image = FlashImage::generate(config.master_seed, config.device.flash_bytes)?;
    let description = config.device_description();
    let seeds: Vec<u64> = indices.iter().map(|i| device_seed(config.master_seed, *i)).collect();
    let devices = indices
        .iter()
        .zip(&seeds)
        .map(|(i, s)| SimulatedDevice::new(device_id(*i), &description, image.bytes.clone(), *s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Fleet { image, devices, seeds })
}

/// The `[0.9·MEF, 1.15·MEF]` window clipped to the search range.
pub fn sweep_window(config: &CampaignConfig, mef: f64) -> Option<(f64, f64)> {
    let s = config.effective_search();
    let from = (config.sweep.low_fraction * mef).max(s.f_min);
    let to = (config.sweep.high_fraction * mef).min(s.f_max);
    (from < to).then_some((from, to))
}

fn run_cell(
    config: &CampaignConfig,
    fleet: &Fleet,
    spec: CellSpec,
    force_sweep: bool,
) -> Result<CellResult, CampaignError> {
    let temperature = config.temperatures[spec.temperature];
    let kind = config.payloads[spec.payload];
    let buffering = config.configs[spec.config];
    let mut device = fleet.devices[spec.device].clone();
    device.set_temperature(temperature)?;
    if let Some(schedule) = &config.ageing {
        device.set_ageing(schedule.at(spec.temperature))?;
    }
    let payload = Payload {
        base_execution_time: config.base_time(kind),
        ..Payload::standard(kind)
    };
    let device_config = device.config(buffering);
    let search = config.effective_search();
    let mut controller = Controller::new(search, config.transition, config.timing).map_err(|source| {
        CampaignError::Search {
            cell: String::from("search"),
            source,
        }
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(
        fleet.seeds[spec.device],
        spec.temperature,
        spec.payload,
        spec.config,
    ));
    let id = device.device_id().to_owned();
    let label = || format!("{id} at {temperature} °C, {kind}, {buffering}");
    let outcome = controller
        .find_mef(&mut device, &payload, &device_config, &mut rng)
        .map_err(|source| CampaignError::Search { cell: label(), source })?;
    let trace = outcome
        .trace
        .iter()
        .map(|r| TraceRecord::new(&device, &payload, &device_config, r))
        .collect();

    let mut sweep: Vec<FrequencyResult> = Vec::new();
    if config.sweep.enabled || force_sweep {
        if let Some((from, to)) = sweep_window(config, outcome.mef) {
            sweep = controller
                .sweep(&mut device, &payload, &device_config, from, to, config.sweep.step, &mut rng)
                .map_err(|source| CampaignError::Search { cell: label(), source })?;
        }
    }
    let transition_observed = outcome.trace.iter().chain(&sweep).any(|r| r.compute_errors > 0);
    let cell = CampaignCell {
        device_id: device.device_id().to_owned(),
        temperature_c: temperature,
        payload: kind,
        config: buffering,
        mef_hz: outcome.mef,
        mof_hz: outcome.mof,
        range_exhausted: outcome.range_exhausted,
        probes: outcome.trace.len(),
        executions: controller.executions(),
        virtual_time_s: controller.virtual_time_s(),
        reference_exec_time_s: config
            .timing
            .execution_time(&payload, config.timing.reference_frequency, &device_config),
        sweep,
        transition_observed,
    };
    Ok(CellResult { cell, trace })
}

fn run_cells(config: &CampaignConfig, fleet: &Fleet, force_sweep: bool) -> Result<Vec<CellResult>, CampaignError> {
    let mut specs = Vec::new();
    for device in 0..fleet.devices.len() {
        for temperature in 0..config.temperatures.len() {
            for payload in 0..config.payloads.len() {
                for c in 0..config.configs.len() {
                    specs.push(CellSpec {
                        device,
                        temperature,
                        payload,
                        config: c,
                    });
                }
            }
        }
    }
    specs
        .into_par_iter()
        .map(|spec| run_cell(config, fleet, spec, force_sweep))
        .collect()
}

/// Runs the full campaign in memory.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignOutput, CampaignError> {
    let indices: Vec<u32> = (0..config.device_count).collect();
    let fleet = build_fleet(config, &indices)?;
    let results = run_cells(config, &fleet, false)?;
    let mut cells = Vec::with_capacity(results.len());
    let mut trace = Vec::new();
    for r in results {
        cells.push(r.cell);
        trace.extend(r.trace);
    }
    let report = Report::build(config.master_seed, &cells)?;
    Ok(CampaignOutput {
        cells,
        report,
        trace,
        flash_image: fleet.image,
    })
}

/// Sweep profiles of one device and payload over every temperature and
/// configuration, regardless of the campaign's sweep switch.
pub fn sweep_profile(
    config: &CampaignConfig,
    device_index: u32,
    payload: PayloadKind,
) -> Result<Vec<CampaignCell>, CampaignError> {
    if device_index >= config.device_count {
        return Err(CampaignError::NoSuchDevice {
            index: device_index,
            count: config.device_count,
        });
    }
    let mut config = config.clone();
    if !config.payloads.contains(&payload) {
        config.payloads.push(payload);
    }
    let fleet = build_fleet(&config, &[device_index])?;
    let payload_index = config.payloads.iter().position(|p| *p == payload).expect("present");
    let mut cells = Vec::new();
    for temperature in 0..config.temperatures.len() {
        for c in 0..config.configs.len() {
            let spec = CellSpec {
                device: 0,
                temperature,
                payload: payload_index,
                config: c,
            };
            cells.push(run_cell(&config, &fleet, spec, true)?.cell);
        }
    }
    Ok(cells)
}

fn io_error(path: &Path, e: std::io::Error) -> CampaignError {
    CampaignError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes report files, the resolved configuration, the flash image and
/// the search trace into `dir`.
pub fn write_outputs(dir: &Path, config: &CampaignConfig, output: &CampaignOutput) -> Result<Vec<PathBuf>, CampaignError> {
    let mut written = export_report(dir, &output.report, &output.cells)?;
    let echo = dir.join(CONFIG_ECHO_FILE);
    fs::write(&echo, config.to_toml()).map_err(|e| io_error(&echo, e))?;
    written.push(echo);
    let image = dir.join(FLASH_IMAGE_FILE);
    fs::write(&image, &output.flash_image.bytes[..]).map_err(|e| io_error(&image, e))?;
    written.push(image);
    let trace_path = dir.join(TRACE_FILE);
    let mut file = std::io::BufWriter::new(fs::File::create(&trace_path).map_err(|e| io_error(&trace_path, e))?);
    for record in &output.trace {
        let line = serde_json::to_string(record).expect("trace record serializes");
        writeln!(file, "{line}").map_err(|e| io_error(&trace_path, e))?;
    }
    file.flush().map_err(|e| io_error(&trace_path, e))?;
    written.push(trace_path);
    Ok(written)
}
