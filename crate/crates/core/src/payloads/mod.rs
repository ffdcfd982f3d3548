// SPDX-License-Identifier: Apache-2.0

//! Self-test payloads.
//!
//! Each payload has a functional body that runs against the simulated
//! memories and verifies its own result, a set of subsystems whose critical
//! paths it activates, and an execution-time model. [`execute`] combines the
//! body with the device's timing limits: below the MEF only memory faults can
//! make a run fail; above it the run either hangs or, for payloads with an
//! error-transition region, fails verification with a frequency-dependent
//! probability.

pub mod cpu;
pub mod image;
pub mod march;
pub mod matrix;
pub mod md5;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{
    DeviceConfig, DeviceError, FlashBuffering, SimulatedDevice, Subsystem, SubsystemSet, WordMemory,
};
use image::*;
use md5::{to_hex, Digest, Md5};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PayloadError {
    #[error("flash of {size} bytes is smaller than the {required}-byte image layout")]
    FlashTooSmall { size: usize, required: usize },
    #[error("{what} region is empty")]
    EmptyRegion { what: &'static str },
    #[error("{what} region of {len} bytes is below the {min}-byte minimum")]
    RegionTooSmall {
        what: &'static str,
        len: usize,
        min: usize,
    },
    #[error(transparent)]
    Device(#[from] DeviceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    Matrix,
    FlashRead,
    RamRw,
    RamMarchC,
    CpuTest,
}

impl PayloadKind {
    pub const ALL: [PayloadKind; 5] = [
        PayloadKind::Matrix,
        PayloadKind::FlashRead,
        PayloadKind::RamRw,
        PayloadKind::RamMarchC,
        PayloadKind::CpuTest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PayloadKind::Matrix => "matrix",
            PayloadKind::FlashRead => "flash_read",
            PayloadKind::RamRw => "ram_rw",
            PayloadKind::RamMarchC => "ram_march_c",
            PayloadKind::CpuTest => "cpu_test",
        }
    }
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PayloadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PayloadKind::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown payload `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    Flash,
    Sram,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub kind: PayloadKind,
    pub activated_subsystems: SubsystemSet,
    pub executes_from: MemoryKind,
    /// Seconds at the timing model's reference frequency, unbuffered.
    pub base_execution_time: f64,
    pub transition_buffered: bool,
    pub transition_unbuffered: bool,
}

impl Payload {
    /// Standard probe definitions. Base times are overwritten by the
    /// campaign's timing calibration.
    pub fn standard(kind: PayloadKind) -> Self {
        use Subsystem::*;
        let (subsystems, from, time, buffered, unbuffered): (&[Subsystem], _, _, _, _) = match kind {
            PayloadKind::Matrix => (&[Flash, Sram, Alu, Pipeline], MemoryKind::Flash, 420e-6, true, true),
            PayloadKind::FlashRead => (&[Flash, Alu], MemoryKind::Flash, 600e-6, false, true),
            PayloadKind::RamRw => (&[Sram, Flash, Alu], MemoryKind::Flash, 1500e-6, false, true),
            PayloadKind::RamMarchC => (&[Sram, Alu], MemoryKind::Sram, 180e-6, false, false),
            PayloadKind::CpuTest => (&[Alu], MemoryKind::Sram, 6e-6, false, false),
        };
        Self {
            kind,
            activated_subsystems: SubsystemSet::of(subsystems),
            executes_from: from,
            base_execution_time: time,
            transition_buffered: buffered,
            transition_unbuffered: unbuffered,
        }
    }

    pub fn has_transition(&self, buffering: FlashBuffering) -> bool {
        match buffering {
            FlashBuffering::Buffered => self.transition_buffered,
            FlashBuffering::Unbuffered => self.transition_unbuffered,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionShape {
    /// `3x² − 2x³`
    Smoothstep,
    Linear,
}

impl TransitionShape {
    pub fn as_str(self) -> &'static str {
        match self {
            TransitionShape::Smoothstep => "smoothstep",
            TransitionShape::Linear => "linear",
        }
    }
}

impl FromStr for TransitionShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smoothstep" => Ok(TransitionShape::Smoothstep),
            "linear" => Ok(TransitionShape::Linear),
            other => Err(format!("unknown transition shape `{other}`")),
        }
    }
}

/// Failure probability between MEF and MOF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorTransitionModel {
    /// MOF / MEF, >= 1.
    pub onset_fraction: f64,
    pub shape: TransitionShape,
}

impl Default for ErrorTransitionModel {
    fn default() -> Self {
        Self {
            onset_fraction: 1.06,
            shape: TransitionShape::Smoothstep,
        }
    }
}

impl ErrorTransitionModel {
    /// Failure probability at normalized position `x` in `[0, 1]`.
    pub fn shape_at(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self.shape {
            TransitionShape::Smoothstep => x * x * (3.0 - 2.0 * x),
            TransitionShape::Linear => x,
        }
    }

    pub fn mof(&self, mef: f64) -> f64 {
        mef * self.onset_fraction
    }
}

/// Run time as a function of clock and flash configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingModel {
    pub reference_frequency: f64,
    pub buffered_scaling: f64,
}

impl Default for TimingModel {
    fn default() -> Self {
        Self {
            reference_frequency: 72e6,
            buffered_scaling: 1.15,
        }
    }
}

impl TimingModel {
    pub fn execution_time(&self, payload: &Payload, clock_hz: f64, config: &DeviceConfig) -> f64 {
        let scaling = match config.flash_buffering {
            FlashBuffering::Buffered => self.buffered_scaling,
            FlashBuffering::Unbuffered => 1.0,
        };
        payload.base_execution_time * (self.reference_frequency / clock_hz) * scaling
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    ComputeError,
    Hang,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadOutcome {
    pub status: Status,
    pub detail: Option<String>,
}

impl PayloadOutcome {
    fn pass() -> Self {
        Self {
            status: Status::Pass,
            detail: None,
        }
    }

    fn compute_error(detail: String) -> Self {
        Self {
            status: Status::ComputeError,
            detail: Some(detail),
        }
    }

    fn hang(detail: &str) -> Self {
        Self {
            status: Status::Hang,
            detail: Some(detail.to_owned()),
        }
    }
}

/// A timing-induced corruption: which datum and which bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimingGlitch {
    pub position: usize,
    pub bit: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifyFailure {
    March(march::MarchFailure),
    Digest { expected: Digest, found: Digest },
    Determinant { expected: i128, found: Option<i128> },
    Cpu(cpu::CpuFailure),
}

impl fmt::Display for VerifyFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyFailure::March(m) => m.fmt(f),
            VerifyFailure::Digest { expected, found } => write!(
                f,
                "digest mismatch: expected {}, computed {}",
                to_hex(expected),
                to_hex(found)
            ),
            VerifyFailure::Determinant { expected, found } => match found {
                Some(v) => write!(f, "determinant mismatch: expected {expected}, computed {v}"),
                None => write!(f, "determinant overflow (expected {expected})"),
            },
            VerifyFailure::Cpu(c) => c.fmt(f),
        }
    }
}

pub type Verification = Result<(), VerifyFailure>;

/// Memory wrapper that flips one bit of the n-th read.
struct GlitchedReads<'m, M: ?Sized> {
    inner: &'m mut M,
    reads: usize,
    glitch: Option<TimingGlitch>,
}

impl<'m, M: WordMemory + ?Sized> GlitchedReads<'m, M> {
    fn new(inner: &'m mut M, glitch: Option<TimingGlitch>) -> Self {
        Self {
            inner,
            reads: 0,
            glitch,
        }
    }
}

impl<M: WordMemory + ?Sized> WordMemory for GlitchedReads<'_, M> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn read(&mut self, address: usize) -> u8 {
        let mut v = self.inner.read(address);
        if let Some(g) = self.glitch {
            if self.reads == g.position {
                v ^= 1 << (g.bit % 8);
            }
        }
        self.reads += 1;
        v
    }

    fn write(&mut self, address: usize, value: u8) {
        self.inner.write(address, value)
    }
}

/// March C- over `memory`. A glitch corrupts one of the reads.
pub fn march_c<M: WordMemory + ?Sized>(memory: &mut M, glitch: Option<TimingGlitch>) -> Verification {
    let reads_per_run = 5 * memory.len();
    let glitch = glitch.map(|g| TimingGlitch {
        position: g.position % reads_per_run.max(1),
        ..g
    });
    march::march_c(&mut GlitchedReads::new(memory, glitch)).map_err(VerifyFailure::March)
}

pub const RAM_RW_MIN_LEN: usize = 64;

/// Writes the deterministic pattern, reads it back and compares the MD5 of
/// the read stream against `reference`.
pub fn ram_rw<M: WordMemory + ?Sized>(
    memory: &mut M,
    reference: &Digest,
    glitch: Option<TimingGlitch>,
) -> Result<Verification, PayloadError> {
    let len = memory.len();
    if len < RAM_RW_MIN_LEN {
        return Err(PayloadError::RegionTooSmall {
            what: "RAM read/write",
            len,
            min: RAM_RW_MIN_LEN,
        });
    }
    for i in 0..len {
        memory.write(i, ram_pattern_byte(i));
    }
    let glitch = glitch.map(|g| TimingGlitch {
        position: g.position % len,
        ..g
    });
    let mut reader = GlitchedReads::new(memory, glitch);
    let readback: Vec<u8> = (0..len).map(|i| reader.read(i)).collect();
    let mut hasher = Md5::new();
    hasher.update(&readback);
    Ok(check_digest(reference, hasher.finalize()))
}

/// Hashes a flash region and compares against `reference`.
pub fn flash_read(
    region: &[u8],
    reference: &Digest,
    glitch: Option<TimingGlitch>,
) -> Result<Verification, PayloadError> {
    if region.is_empty() {
        return Err(PayloadError::EmptyRegion { what: "flash" });
    }
    let mut hasher = Md5::new();
    match glitch {
        None => hasher.update(region),
        Some(g) => {
            let mut stream = region.to_vec();
            stream[g.position % region.len()] ^= 1 << (g.bit % 8);
            hasher.update(&stream);
        }
    }
    Ok(check_digest(reference, hasher.finalize()))
}

fn check_digest(expected: &Digest, found: Digest) -> Verification {
    if found == *expected {
        Ok(())
    } else {
        Err(VerifyFailure::Digest {
            expected: *expected,
            found,
        })
    }
}

/// Loads A and B from flash into SRAM, multiplies them in SRAM and checks
/// the determinant of the product against the stored reference.
pub fn matrix_test(device: &mut SimulatedDevice, glitch: Option<TimingGlitch>) -> Result<Verification, PayloadError> {
    use matrix::DIM;
    let flash = device.flash().clone();
    if flash.size() < FLASH_MIN_BYTES {
        return Err(PayloadError::FlashTooSmall {
            size: flash.size(),
            required: FLASH_MIN_BYTES,
        });
    }
    let expected = read_i128(flash.image(), DETERMINANT_BASE);
    let mut ram = device.sram_mut().region(MATRIX_SRAM_BASE, MATRIX_SRAM_LEN)?;
    let a_off = 0;
    let b_off = MATRIX_BYTES;
    let c_off = 2 * MATRIX_BYTES;
    for k in 0..MATRIX_BYTES {
        ram.write(a_off + k, flash.read(MATRIX_A_BASE + k));
        ram.write(b_off + k, flash.read(MATRIX_B_BASE + k));
    }
    for i in 0..DIM {
        for j in 0..DIM {
            let mut acc: i32 = 0;
            for k in 0..DIM {
                let a = ram.read(a_off + i * DIM + k) as i8;
                let b = ram.read(b_off + k * DIM + j) as i8;
                acc += i32::from(a) * i32::from(b);
            }
            for (t, byte) in acc.to_le_bytes().into_iter().enumerate() {
                ram.write(c_off + 4 * (i * DIM + j) + t, byte);
            }
        }
    }
    let product: Vec<Vec<i128>> = (0..DIM)
        .map(|i| {
            (0..DIM)
                .map(|j| {
                    let base = c_off + 4 * (i * DIM + j);
                    let bytes = [ram.read(base), ram.read(base + 1), ram.read(base + 2), ram.read(base + 3)];
                    i128::from(i32::from_le_bytes(bytes))
                })
                .collect()
        })
        .collect();
    let mut found = matrix::determinant(&product);
    if let (Some(g), Some(d)) = (glitch, found.as_mut()) {
        *d ^= 1 << (g.bit % 64);
    }
    Ok(if found == Some(expected) {
        Ok(())
    } else {
        Err(VerifyFailure::Determinant { expected, found })
    })
}

/// Runs the ALU battery using the device's register file.
pub fn cpu_test(device: &mut SimulatedDevice, glitch: Option<TimingGlitch>) -> Verification {
    let glitch = glitch.map(|g| (g.position, g.bit));
    cpu::cpu_test(&mut device.volatile_mut().registers, glitch).map_err(VerifyFailure::Cpu)
}

/// Runs the functional body of `kind` on `device`.
pub fn run_body(
    kind: PayloadKind,
    device: &mut SimulatedDevice,
    glitch: Option<TimingGlitch>,
) -> Result<Verification, PayloadError> {
    match kind {
        PayloadKind::Matrix => matrix_test(device, glitch),
        PayloadKind::FlashRead => {
            let flash = device.flash();
            if flash.size() < FLASH_MIN_BYTES {
                return Err(PayloadError::FlashTooSmall {
                    size: flash.size(),
                    required: FLASH_MIN_BYTES,
                });
            }
            let reference = read_digest(flash.image(), PATTERN_DIGEST_BASE);
            let region = flash.slice(PATTERN_BASE, PATTERN_LEN).expect("checked size");
            flash_read(region, &reference, glitch)
        }
        PayloadKind::RamRw => {
            let reference = read_digest(device.flash().image(), RAM_DIGEST_BASE);
            let mut region = device.sram_mut().region(RAM_RW_BASE, RAM_RW_LEN)?;
            ram_rw(&mut region, &reference, glitch)
        }
        PayloadKind::RamMarchC => {
            let mut region = device.sram_mut().region(MARCH_BASE, MARCH_LEN)?;
            Ok(march_c(&mut region, glitch))
        }
        PayloadKind::CpuTest => Ok(cpu_test(device, glitch)),
    }
}

/// One payload run at `clock_hz`.
///
/// The device switches to the test clock, runs the body and returns to
/// standby for verification. A hang leaves the device on the test clock and
/// marked hung until it is power-cycled.
pub fn execute<R: Rng + ?Sized>(
    payload: &Payload,
    device: &mut SimulatedDevice,
    config: &DeviceConfig,
    clock_hz: f64,
    transition: &ErrorTransitionModel,
    rng: &mut R,
) -> PayloadOutcome {
    if device.is_hung() {
        return PayloadOutcome::hang("device unresponsive until power cycle");
    }
    let mef = match device.device_mef_oracle(payload.activated_subsystems, config) {
        Ok(f) => f,
        Err(e) => {
            device.mark_hung();
            return PayloadOutcome::hang(&format!("device cannot operate: {e}"));
        }
    };
    device.set_clock(clock_hz);

    let glitch = if clock_hz <= mef {
        None
    } else if payload.has_transition(config.flash_buffering) {
        let mof = transition.mof(mef);
        if clock_hz > mof {
            device.mark_hung();
            return PayloadOutcome::hang("execution cannot continue past MOF");
        }
        let position = if mof > mef { (clock_hz - mef) / (mof - mef) } else { 1.0 };
        if rng.random::<f64>() < transition.shape_at(position) {
            Some(TimingGlitch {
                position: rng.random_range(0..1 << 20),
                bit: rng.random_range(0..64),
            })
        } else {
            None
        }
    } else {
        device.mark_hung();
        return PayloadOutcome::hang("timing violation without recoverable region");
    };

    let verification = run_body(payload.kind, device, glitch);
    device.return_to_standby();
    match verification {
        Ok(Ok(())) => PayloadOutcome::pass(),
        Ok(Err(failure)) => PayloadOutcome::compute_error(failure.to_string()),
        Err(e) => PayloadOutcome::compute_error(format!("payload misconfigured: {e}")),
    }
}
