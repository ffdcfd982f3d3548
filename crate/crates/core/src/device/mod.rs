// SPDX-License-Identifier: Apache-2.0

//! Simulated microcontroller: named critical paths whose delays follow the
//! transistor model, plus SRAM/flash with injectable faults.
//!
//! Timing and memory faults are independent error sources. Path delays only
//! depend on temperature, ageing and process variation; memory content only
//! on reads, writes and injected faults.

pub mod memory;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::{
    self, celsius_to_kelvin, AgeingState, GateLoad, MobilityModel, PhysicsError, ScatteringTerm,
    TransistorParams,
};

pub use memory::{BitCell, CouplingTrigger, Edge, Flash, MemoryFault, Sram, SramRegion, WordMemory};

/// Supported die temperature range, °C.
pub const TEMPERATURE_RANGE_C: (f64, f64) = (-40.0, 125.0);

/// Process-variation factors must stay within `1 ± MAX_VARIATION`.
pub const MAX_VARIATION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeviceError {
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("temperature {0} °C outside supported range [-40, 125] °C")]
    TemperatureOutOfRange(f64),
    #[error("fault at address {address} bit {bit} outside memory of {size} bytes")]
    FaultOutOfBounds { address: usize, bit: u8, size: usize },
    #[error("invalid fault: {0}")]
    InvalidFault(String),
    #[error("region [{base}, {base}+{len}) outside memory of {size} bytes")]
    RegionOutOfBounds { base: usize, len: usize, size: usize },
    #[error("no critical path belongs to the activated subsystems {0}")]
    NoActivatedPath(SubsystemSet),
    #[error("invalid device description: {0}")]
    InvalidDescription(String),
    #[error(
        "guard band {guard_band_hz} Hz is not below the fresh 20 °C limit {path_fmax_hz} Hz of path `{path}`"
    )]
    GuardBandNotConservative {
        path: String,
        guard_band_hz: f64,
        path_fmax_hz: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsystem {
    Flash,
    Sram,
    Alu,
    Pipeline,
}

impl Subsystem {
    pub const ALL: [Subsystem; 4] = [
        Subsystem::Flash,
        Subsystem::Sram,
        Subsystem::Alu,
        Subsystem::Pipeline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Subsystem::Flash => "flash",
            Subsystem::Sram => "sram",
            Subsystem::Alu => "alu",
            Subsystem::Pipeline => "pipeline",
        }
    }

    fn bit(self) -> u8 {
        1 << self as u8
    }
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Small copyable set of subsystems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "Vec<Subsystem>", into = "Vec<Subsystem>")]
pub struct SubsystemSet(u8);

impl SubsystemSet {
    pub const EMPTY: Self = Self(0);

    pub fn of(items: &[Subsystem]) -> Self {
        items.iter().copied().collect()
    }

    pub fn all() -> Self {
        Self::of(&Subsystem::ALL)
    }

    pub fn contains(self, s: Subsystem) -> bool {
        self.0 & s.bit() != 0
    }

    pub fn insert(&mut self, s: Subsystem) {
        self.0 |= s.bit();
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Subsystem> {
        Subsystem::ALL.into_iter().filter(move |s| self.contains(*s))
    }
}

impl FromIterator<Subsystem> for SubsystemSet {
    fn from_iter<I: IntoIterator<Item = Subsystem>>(iter: I) -> Self {
        let mut set = Self::EMPTY;
        for s in iter {
            set.insert(s);
        }
        set
    }
}

impl From<Vec<Subsystem>> for SubsystemSet {
    fn from(v: Vec<Subsystem>) -> Self {
        v.into_iter().collect()
    }
}

impl From<SubsystemSet> for Vec<Subsystem> {
    fn from(s: SubsystemSet) -> Self {
        s.iter().collect()
    }
}

impl fmt::Display for SubsystemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.iter().map(Subsystem::as_str).collect();
        write!(f, "{{{}}}", names.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlashBuffering {
    Buffered,
    Unbuffered,
}

impl FlashBuffering {
    pub const BOTH: [FlashBuffering; 2] = [FlashBuffering::Buffered, FlashBuffering::Unbuffered];

    pub fn as_str(self) -> &'static str {
        match self {
            FlashBuffering::Buffered => "buffered",
            FlashBuffering::Unbuffered => "unbuffered",
        }
    }
}

impl fmt::Display for FlashBuffering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlashBuffering {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "buffered" => Ok(FlashBuffering::Buffered),
            "unbuffered" => Ok(FlashBuffering::Unbuffered),
            other => Err(format!("unknown flash configuration `{other}`")),
        }
    }
}

/// Flash interface setup: pre-fetch buffer with maximum wait states, or
/// neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub flash_buffering: FlashBuffering,
    pub wait_states: u32,
}

impl DeviceConfig {
    pub const DEFAULT_MAX_WAIT_STATES: u32 = 2;

    pub fn buffered(max_wait_states: u32) -> Self {
        Self {
            flash_buffering: FlashBuffering::Buffered,
            wait_states: max_wait_states,
        }
    }

    pub fn unbuffered() -> Self {
        Self {
            flash_buffering: FlashBuffering::Unbuffered,
            wait_states: 0,
        }
    }

    pub fn for_buffering(buffering: FlashBuffering, max_wait_states: u32) -> Self {
        match buffering {
            FlashBuffering::Buffered => Self::buffered(max_wait_states),
            FlashBuffering::Unbuffered => Self::unbuffered(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPath {
    pub id: String,
    pub subsystem: Subsystem,
    /// Number of gate delays in series.
    pub gate_chain_length: u32,
    pub gate_load: GateLoad,
    pub transistor: TransistorParams,
    /// Scattering local to this path, combined with the device mobility model.
    #[serde(default)]
    pub scattering: Vec<ScatteringTerm>,
}

impl CriticalPath {
    pub fn validate(&self) -> Result<(), DeviceError> {
        if self.gate_chain_length == 0 {
            return Err(DeviceError::InvalidDescription(format!(
                "path `{}` has zero gate chain length",
                self.id
            )));
        }
        GateLoad::new(self.gate_load.load_capacitance)?;
        self.transistor.validate()?;
        for term in &self.scattering {
            term.validate()?;
        }
        Ok(())
    }

    /// Delay of the chain without process variation or buffering.
    pub fn nominal_delay(
        &self,
        model: &MobilityModel,
        ageing: &AgeingState,
        temperature_c: f64,
    ) -> Result<f64, PhysicsError> {
        let gate = physics::gate_delay(
            model,
            &self.scattering,
            &self.transistor,
            &self.gate_load,
            ageing,
            celsius_to_kelvin(temperature_c),
        )?;
        Ok(f64::from(self.gate_chain_length) * gate)
    }
}

/// Static description a device is built from (what the campaign file carries).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceDescription {
    pub paths: Vec<CriticalPath>,
    pub mobility_model: MobilityModel,
    pub sram_bytes: usize,
    pub guard_band_frequency: f64,
    pub max_wait_states: u32,
    /// Half-width of the uniform per-path delay factor around 1.
    pub process_variation: f64,
}

impl DeviceDescription {
    /// Temperature at which guard-band conservatism is checked.
    pub const GUARD_BAND_CHECK_C: f64 = 20.0;

    pub fn validate(&self) -> Result<(), DeviceError> {
        if self.paths.is_empty() {
            return Err(DeviceError::InvalidDescription("no critical paths".into()));
        }
        self.mobility_model.validate()?;
        for p in &self.paths {
            p.validate()?;
        }
        if !(0.0..=MAX_VARIATION).contains(&self.process_variation) {
            return Err(DeviceError::InvalidDescription(format!(
                "process variation half-width {} outside [0, {MAX_VARIATION}]",
                self.process_variation
            )));
        }
        if !(self.guard_band_frequency > 0.0) {
            return Err(DeviceError::InvalidDescription(
                "guard band frequency must be positive".into(),
            ));
        }
        // Guard band must hold for the slowest die the variation allows.
        let worst = 1.0 + self.process_variation;
        for p in &self.paths {
            let delay = p.nominal_delay(&self.mobility_model, &AgeingState::FRESH, Self::GUARD_BAND_CHECK_C)?;
            let fmax = physics::max_frequency(delay * worst)?;
            if self.guard_band_frequency >= fmax {
                return Err(DeviceError::GuardBandNotConservative {
                    path: p.id.clone(),
                    guard_band_hz: self.guard_band_frequency,
                    path_fmax_hz: fmax,
                });
            }
        }
        Ok(())
    }
}

/// Run-scratch state lost on power cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatileState {
    pub clock_hz: f64,
    pub hung: bool,
    pub registers: [u32; 16],
}

impl VolatileState {
    fn power_on(standby_hz: f64) -> Self {
        Self {
            clock_hz: standby_hz,
            hung: false,
            registers: [0; 16],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDevice {
    device_id: String,
    paths: Vec<CriticalPath>,
    process_variation: Vec<f64>,
    mobility_model: MobilityModel,
    sram: Sram,
    flash: Flash,
    temperature_c: f64,
    ageing: AgeingState,
    guard_band_frequency: f64,
    max_wait_states: u32,
    volatile: VolatileState,
}

impl SimulatedDevice {
    /// Builds a fresh device at 20 °C. Process variation is drawn from `seed`.
    pub fn new(
        device_id: impl Into<String>,
        description: &DeviceDescription,
        flash_image: Arc<[u8]>,
        seed: u64,
    ) -> Result<Self, DeviceError> {
        description.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = description.process_variation;
        let process_variation = description
            .paths
            .iter()
            .map(|_| if w > 0.0 { rng.random_range(1.0 - w..=1.0 + w) } else { 1.0 })
            .collect();
        Self::with_variation(device_id, description, flash_image, process_variation)
    }

    /// Builds a device with explicit per-path variation factors.
    pub fn with_variation(
        device_id: impl Into<String>,
        description: &DeviceDescription,
        flash_image: Arc<[u8]>,
        process_variation: Vec<f64>,
    ) -> Result<Self, DeviceError> {
        if process_variation.len() != description.paths.len() {
            return Err(DeviceError::InvalidDescription(
                "one process variation factor per path required".into(),
            ));
        }
        if let Some(v) = process_variation
            .iter()
            .find(|v| !((1.0 - MAX_VARIATION)..=(1.0 + MAX_VARIATION)).contains(*v))
        {
            return Err(DeviceError::InvalidDescription(format!(
                "process variation factor {v} outside [0.9, 1.1]"
            )));
        }
        let standby = description.guard_band_frequency;
        Ok(Self {
            device_id: device_id.into(),
            paths: description.paths.clone(),
            process_variation,
            mobility_model: description.mobility_model.clone(),
            sram: Sram::new(description.sram_bytes),
            flash: Flash::new(flash_image),
            temperature_c: 20.0,
            ageing: AgeingState::FRESH,
            guard_band_frequency: standby,
            max_wait_states: description.max_wait_states,
            volatile: VolatileState::power_on(standby),
        })
    }

    pub fn device_id(&self) -> &str {
        &self.device_id
    }

    pub fn paths(&self) -> &[CriticalPath] {
        &self.paths
    }

    pub fn process_variation(&self) -> &[f64] {
        &self.process_variation
    }

    pub fn temperature_c(&self) -> f64 {
        self.temperature_c
    }

    pub fn set_temperature(&mut self, celsius: f64) -> Result<(), DeviceError> {
        let (lo, hi) = TEMPERATURE_RANGE_C;
        if !(lo..=hi).contains(&celsius) {
            return Err(DeviceError::TemperatureOutOfRange(celsius));
        }
        self.temperature_c = celsius;
        Ok(())
    }

    pub fn ageing(&self) -> AgeingState {
        self.ageing
    }

    pub fn set_ageing(&mut self, ageing: AgeingState) -> Result<(), DeviceError> {
        ageing.validate()?;
        self.ageing = ageing;
        Ok(())
    }

    pub fn mobility_model(&self) -> &MobilityModel {
        &self.mobility_model
    }

    pub fn guard_band_frequency(&self) -> f64 {
        self.guard_band_frequency
    }

    pub fn max_wait_states(&self) -> u32 {
        self.max_wait_states
    }

    pub fn config(&self, buffering: FlashBuffering) -> DeviceConfig {
        DeviceConfig::for_buffering(buffering, self.max_wait_states)
    }

    pub fn sram(&self) -> &Sram {
        &self.sram
    }

    pub fn sram_mut(&mut self) -> &mut Sram {
        &mut self.sram
    }

    pub fn flash(&self) -> &Flash {
        &self.flash
    }

    pub fn volatile(&self) -> &VolatileState {
        &self.volatile
    }

    pub fn volatile_mut(&mut self) -> &mut VolatileState {
        &mut self.volatile
    }

    pub fn is_hung(&self) -> bool {
        self.volatile.hung
    }

    pub fn set_clock(&mut self, hz: f64) {
        self.volatile.clock_hz = hz;
    }

    pub fn return_to_standby(&mut self) {
        self.volatile.clock_hz = self.guard_band_frequency;
    }

    pub(crate) fn mark_hung(&mut self) {
        self.volatile.hung = true;
    }

    pub fn inject_fault(&mut self, fault: MemoryFault) -> Result<(), DeviceError> {
        self.sram.inject(fault)
    }

    /// Clears volatile state and SRAM; keeps ageing, temperature, flash,
    /// faults and process variation.
    pub fn power_cycle(&mut self) {
        self.sram.power_on();
        self.volatile = VolatileState::power_on(self.guard_band_frequency);
    }

    /// Delay of path `index` under `config` at the current temperature and ageing.
    pub fn effective_path_delay(&self, index: usize, config: &DeviceConfig) -> Result<f64, DeviceError> {
        let (lo, hi) = TEMPERATURE_RANGE_C;
        if !(lo..=hi).contains(&self.temperature_c) {
            return Err(DeviceError::TemperatureOutOfRange(self.temperature_c));
        }
        let path = &self.paths[index];
        let mut delay = path.nominal_delay(&self.mobility_model, &self.ageing, self.temperature_c)?
            * self.process_variation[index];
        if path.subsystem == Subsystem::Flash && config.flash_buffering == FlashBuffering::Buffered {
            delay /= f64::from(1 + config.wait_states);
        }
        Ok(delay)
    }

    /// Highest clock at which path `index` meets its timing window.
    pub fn path_max_frequency(&self, index: usize, config: &DeviceConfig) -> Result<f64, DeviceError> {
        Ok(physics::max_frequency(self.effective_path_delay(index, config)?)?)
    }

    /// Ground-truth MEF: the slowest activated path governs.
    pub fn device_mef_oracle(
        &self,
        activated: SubsystemSet,
        config: &DeviceConfig,
    ) -> Result<f64, DeviceError> {
        self.governing_path(activated, config).map(|(_, f)| f)
    }

    /// Index and limit frequency of the path that bounds `activated`.
    pub fn governing_path(
        &self,
        activated: SubsystemSet,
        config: &DeviceConfig,
    ) -> Result<(usize, f64), DeviceError> {
        let mut best: Option<(usize, f64)> = None;
        for (i, path) in self.paths.iter().enumerate() {
            if !activated.contains(path.subsystem) {
                continue;
            }
            let f = self.path_max_frequency(i, config)?;
            if best.is_none_or(|(_, b)| f < b) {
                best = Some((i, f));
            }
        }
        best.ok_or(DeviceError::NoActivatedPath(activated))
    }

    /// True when the clock period is shorter than the path's full transition
    /// cycle. The boundary itself passes.
    pub fn violates_timing(&self, index: usize, config: &DeviceConfig, clock_hz: f64) -> Result<bool, DeviceError> {
        Ok(clock_hz > self.path_max_frequency(index, config)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::GateLoad;

    pub(crate) fn single_flash_path() -> DeviceDescription {
        DeviceDescription {
            paths: vec![CriticalPath {
                id: "flash".into(),
                subsystem: Subsystem::Flash,
                gate_chain_length: 400,
                gate_load: GateLoad::new(5e-15).unwrap(),
                transistor: TransistorParams::default(),
                scattering: vec![],
            }],
            mobility_model: MobilityModel::default(),
            sram_bytes: 64,
            guard_band_frequency: 1e6,
            max_wait_states: 2,
            process_variation: 0.0,
        }
    }

    fn image() -> Arc<[u8]> {
        Arc::from(vec![0u8; 16])
    }

    #[test]
    fn flash_delay_definition_and_buffering() {
        let d = SimulatedDevice::new("d", &single_flash_path(), image(), 1).unwrap();
        let path = &d.paths()[0];
        let nominal = path
            .nominal_delay(d.mobility_model(), &AgeingState::FRESH, 20.0)
            .unwrap();
        let unbuf = d.effective_path_delay(0, &DeviceConfig::unbuffered()).unwrap();
        assert_eq!(unbuf, nominal);
        let buf = d.effective_path_delay(0, &DeviceConfig::buffered(2)).unwrap();
        assert!((buf - unbuf / 3.0).abs() <= 1e-12 * unbuf);
    }

    #[test]
    fn hotter_is_slower() {
        let mut d = SimulatedDevice::new("d", &single_flash_path(), image(), 1).unwrap();
        let cfg = DeviceConfig::unbuffered();
        let cold = d.effective_path_delay(0, &cfg).unwrap();
        d.set_temperature(80.0).unwrap();
        assert!(d.effective_path_delay(0, &cfg).unwrap() > cold);
    }

    #[test]
    fn temperature_range_enforced() {
        let mut d = SimulatedDevice::new("d", &single_flash_path(), image(), 1).unwrap();
        assert!(d.set_temperature(126.0).is_err());
        assert!(d.set_temperature(-41.0).is_err());
        assert!(d.set_temperature(125.0).is_ok());
    }

    #[test]
    fn timing_window_boundary_is_closed() {
        let d = SimulatedDevice::new("d", &single_flash_path(), image(), 1).unwrap();
        let cfg = DeviceConfig::unbuffered();
        let f = d.path_max_frequency(0, &cfg).unwrap();
        assert!(!d.violates_timing(0, &cfg, f).unwrap());
        assert!(d.violates_timing(0, &cfg, f * (1.0 + 1e-9)).unwrap());
        assert!(!d.violates_timing(0, &cfg, f * 0.99).unwrap());
    }

    #[test]
    fn inoperable_transistor_propagates() {
        let mut d = SimulatedDevice::new("d", &single_flash_path(), image(), 1).unwrap();
        d.set_ageing(AgeingState::new(1.5, 1.0).unwrap()).unwrap();
        assert!(matches!(
            d.effective_path_delay(0, &DeviceConfig::unbuffered()),
            Err(DeviceError::Physics(PhysicsError::TransistorInoperable { .. }))
        ));
    }

    #[test]
    fn power_cycle_preserves_silicon_state() {
        let mut d = SimulatedDevice::new("d", &single_flash_path(), image(), 1).unwrap();
        d.set_ageing(AgeingState::new(0.05, 0.9).unwrap()).unwrap();
        d.set_temperature(60.0).unwrap();
        d.inject_fault(MemoryFault::StuckAt1 {
            cell: BitCell::new(3, 2),
        })
        .unwrap();
        d.sram_mut().write(10, 0xAB);
        d.set_clock(150e6);
        d.mark_hung();
        d.power_cycle();
        let once = d.clone();
        d.power_cycle();
        assert_eq!(d, once);
        assert!(!d.is_hung());
        assert_eq!(d.volatile().clock_hz, d.guard_band_frequency());
        assert_eq!(d.sram().read(10), 0);
        assert_eq!(d.sram().read(3), 1 << 2);
        assert_eq!(d.ageing(), AgeingState::new(0.05, 0.9).unwrap());
        assert_eq!(d.temperature_c(), 60.0);
    }

    #[test]
    fn variation_factors_in_range() {
        let mut desc = single_flash_path();
        desc.process_variation = 0.05;
        for seed in 0..50 {
            let d = SimulatedDevice::new("d", &desc, image(), seed).unwrap();
            assert!(d.process_variation().iter().all(|v| (0.95..=1.05).contains(v)));
        }
        assert!(SimulatedDevice::with_variation("d", &desc, image(), vec![1.2]).is_err());
    }

    #[test]
    fn guard_band_must_be_conservative() {
        let mut desc = single_flash_path();
        desc.guard_band_frequency = 10e9;
        assert!(matches!(
            desc.validate(),
            Err(DeviceError::GuardBandNotConservative { .. })
        ));
    }

    #[test]
    fn mef_oracle_requires_activated_path() {
        let d = SimulatedDevice::new("d", &single_flash_path(), image(), 1).unwrap();
        assert!(matches!(
            d.device_mef_oracle(SubsystemSet::of(&[Subsystem::Alu]), &DeviceConfig::unbuffered()),
            Err(DeviceError::NoActivatedPath(_))
        ));
    }
}
