// SPDX-License-Identifier: Apache-2.0

//! Transistor-level delay model.
//!
//! Temperature and ageing enter through carrier mobility and threshold
//! voltage; everything downstream is closed-form:
//!
//! ```text
//! mu_ph(T)  = mu_ph0 * (T0 / T)^theta
//! mu_eff(T) = alpha * (1/mu_ph + sum_i 1/mu_i)^-1
//! I_D       = 1/2 * mu * C_ox * (W/L) * (V_DD - V_th)^2
//! t_p       = C_L * V_DD / I_D
//! f_max     = 1 / (2 * t_p)
//! ```
//!
//! All quantities are SI. Temperatures are kelvin here; the configuration
//! layer converts from degrees Celsius.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Offset between the Celsius and Kelvin scales.
pub const ZERO_CELSIUS_K: f64 = 273.15;

/// Range over which scattering terms must stay strictly positive.
pub const SCATTERING_CHECK_RANGE_K: (f64, f64) = (250.0, 400.0);

pub fn celsius_to_kelvin(celsius: f64) -> f64 {
    celsius + ZERO_CELSIUS_K
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhysicsError {
    #[error("temperature must be positive, got {0} K")]
    NonPositiveTemperature(f64),
    #[error("scattering term `{label}` gives non-positive mobility {value} at {temperature} K")]
    NonPositiveScattering {
        label: String,
        value: f64,
        temperature: f64,
    },
    #[error("transistor inoperable: effective threshold {threshold} V >= supply {supply} V")]
    TransistorInoperable { threshold: f64, supply: f64 },
    #[error("drain current must be positive, got {0} A")]
    NonPositiveCurrent(f64),
    #[error("propagation time must be positive, got {0} s")]
    NonPositivePropagation(f64),
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

fn invalid(name: &'static str, reason: impl Into<String>) -> PhysicsError {
    PhysicsError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

fn require_positive(name: &'static str, value: f64) -> Result<(), PhysicsError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

/// Design-fixed transistor geometry and supply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransistorParams {
    /// F/m²
    pub oxide_capacitance: f64,
    /// m
    pub channel_width: f64,
    /// m
    pub channel_length: f64,
    /// V
    pub supply_voltage: f64,
    /// V, before any ageing shift
    pub threshold_voltage_fresh: f64,
}

impl TransistorParams {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        require_positive("oxide_capacitance", self.oxide_capacitance)?;
        require_positive("channel_width", self.channel_width)?;
        require_positive("channel_length", self.channel_length)?;
        require_positive("supply_voltage", self.supply_voltage)?;
        require_positive("threshold_voltage_fresh", self.threshold_voltage_fresh)?;
        if self.supply_voltage <= self.threshold_voltage_fresh {
            return Err(invalid(
                "supply_voltage",
                format!(
                    "{} V does not exceed fresh threshold {} V",
                    self.supply_voltage, self.threshold_voltage_fresh
                ),
            ));
        }
        Ok(())
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.channel_width / self.channel_length
    }

    /// Saturation drain current for the given carrier mobility and ageing state.
    pub fn drain_current(&self, mobility: f64, ageing: &AgeingState) -> Result<f64, PhysicsError> {
        let threshold = self.threshold_voltage_fresh + ageing.threshold_voltage_shift;
        if threshold >= self.supply_voltage {
            return Err(PhysicsError::TransistorInoperable {
                threshold,
                supply: self.supply_voltage,
            });
        }
        let overdrive = self.supply_voltage - threshold;
        let current = 0.5
            * (mobility * ageing.mobility_degradation_factor)
            * self.oxide_capacitance
            * self.aspect_ratio()
            * overdrive
            * overdrive;
        if current > 0.0 && current.is_finite() {
            Ok(current)
        } else {
            Err(PhysicsError::NonPositiveCurrent(current))
        }
    }
}

impl Default for TransistorParams {
    /// Generic 130 nm core transistor.
    fn default() -> Self {
        Self {
            oxide_capacitance: 8.6e-3,
            channel_width: 0.26e-6,
            channel_length: 0.13e-6,
            supply_voltage: 1.8,
            threshold_voltage_fresh: 0.45,
        }
    }
}

/// Temperature law of one non-phonon scattering contribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ScatteringLaw {
    /// `mobility_ref * (T / reference_temperature)^exponent`; exponent 0 is constant.
    PowerLaw {
        mobility_ref: f64,
        reference_temperature: f64,
        exponent: f64,
    },
    /// `mobility_ref + slope * (T - reference_temperature)`
    Linear {
        mobility_ref: f64,
        reference_temperature: f64,
        slope: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringTerm {
    pub label: String,
    #[serde(flatten)]
    pub law: ScatteringLaw,
}

impl ScatteringTerm {
    /// Temperature-independent term, e.g. surface roughness at fixed gate field.
    pub fn constant(label: impl Into<String>, mobility: f64) -> Self {
        Self {
            label: label.into(),
            law: ScatteringLaw::PowerLaw {
                mobility_ref: mobility,
                reference_temperature: 300.0,
                exponent: 0.0,
            },
        }
    }

    pub fn mobility_at(&self, temperature: f64) -> f64 {
        match self.law {
            ScatteringLaw::PowerLaw {
                mobility_ref,
                reference_temperature,
                exponent,
            } => mobility_ref * (temperature / reference_temperature).powf(exponent),
            ScatteringLaw::Linear {
                mobility_ref,
                reference_temperature,
                slope,
            } => mobility_ref + slope * (temperature - reference_temperature),
        }
    }

    fn checked_mobility_at(&self, temperature: f64) -> Result<f64, PhysicsError> {
        let value = self.mobility_at(temperature);
        if value > 0.0 && value.is_finite() {
            Ok(value)
        } else {
            Err(PhysicsError::NonPositiveScattering {
                label: self.label.clone(),
                value,
                temperature,
            })
        }
    }

    /// Both laws are monotone in T, so checking the range ends suffices.
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let (ScatteringLaw::PowerLaw {
            reference_temperature,
            ..
        }
        | ScatteringLaw::Linear {
            reference_temperature,
            ..
        }) = self.law;
        require_positive("scattering reference_temperature", reference_temperature)?;
        let (lo, hi) = SCATTERING_CHECK_RANGE_K;
        self.checked_mobility_at(lo)?;
        self.checked_mobility_at(hi)?;
        Ok(())
    }
}

/// Carrier mobility as a function of temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityModel {
    /// Phonon-limited mobility at `reference_temperature`, m²/(V·s).
    pub mu_ph0: f64,
    /// K
    pub reference_temperature: f64,
    pub theta: f64,
    pub alpha: f64,
    /// Surface-roughness and coulombic contributions; empty means phonon-limited.
    #[serde(default)]
    pub scattering: Vec<ScatteringTerm>,
}

impl Default for MobilityModel {
    fn default() -> Self {
        Self {
            mu_ph0: 0.04,
            reference_temperature: 300.0,
            theta: 1.5,
            alpha: 1.0,
            scattering: Vec::new(),
        }
    }
}

impl MobilityModel {
    pub fn phonon_limited(mu_ph0: f64, reference_temperature: f64, theta: f64) -> Self {
        Self {
            mu_ph0,
            reference_temperature,
            theta,
            alpha: 1.0,
            scattering: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        require_positive("mu_ph0", self.mu_ph0)?;
        require_positive("reference_temperature", self.reference_temperature)?;
        require_positive("theta", self.theta)?;
        require_positive("alpha", self.alpha)?;
        for term in &self.scattering {
            term.validate()?;
        }
        Ok(())
    }

    pub fn phonon_mobility(&self, temperature: f64) -> Result<f64, PhysicsError> {
        if !(temperature > 0.0) {
            return Err(PhysicsError::NonPositiveTemperature(temperature));
        }
        Ok(self.mu_ph0 * (self.reference_temperature / temperature).powf(self.theta))
    }

    pub fn effective_mobility(&self, temperature: f64) -> Result<f64, PhysicsError> {
        self.effective_mobility_with(temperature, &[])
    }

    /// Effective mobility with additional scattering terms local to one
    /// circuit (e.g. the surface-roughness term of a particular path).
    pub fn effective_mobility_with(
        &self,
        temperature: f64,
        extra: &[ScatteringTerm],
    ) -> Result<f64, PhysicsError> {
        let phonon = self.phonon_mobility(temperature)?;
        if self.scattering.is_empty() && extra.is_empty() {
            return Ok(self.alpha * phonon);
        }
        let mut inverse_sum = 1.0 / phonon;
        for term in self.scattering.iter().chain(extra) {
            inverse_sum += 1.0 / term.checked_mobility_at(temperature)?;
        }
        Ok(self.alpha / inverse_sum)
    }
}

/// Phenomenological ageing: threshold shift and mobility loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeingState {
    /// V, >= 0
    pub threshold_voltage_shift: f64,
    /// in (0, 1]
    pub mobility_degradation_factor: f64,
}

impl Default for AgeingState {
    fn default() -> Self {
        Self::FRESH
    }
}

impl AgeingState {
    pub const FRESH: Self = Self {
        threshold_voltage_shift: 0.0,
        mobility_degradation_factor: 1.0,
    };

    pub fn new(threshold_voltage_shift: f64, mobility_degradation_factor: f64) -> Result<Self, PhysicsError> {
        let state = Self {
            threshold_voltage_shift,
            mobility_degradation_factor,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        if !(self.threshold_voltage_shift >= 0.0) || !self.threshold_voltage_shift.is_finite() {
            return Err(invalid(
                "threshold_voltage_shift",
                format!("must be >= 0, got {}", self.threshold_voltage_shift),
            ));
        }
        let f = self.mobility_degradation_factor;
        if !(f > 0.0 && f <= 1.0) {
            return Err(invalid(
                "mobility_degradation_factor",
                format!("must lie in (0, 1], got {f}"),
            ));
        }
        Ok(())
    }

    pub fn is_fresh(&self) -> bool {
        self.threshold_voltage_shift == 0.0 && self.mobility_degradation_factor == 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateLoad {
    /// F
    pub load_capacitance: f64,
}

impl GateLoad {
    pub fn new(load_capacitance: f64) -> Result<Self, PhysicsError> {
        require_positive("load_capacitance", load_capacitance)?;
        Ok(Self { load_capacitance })
    }

    /// Time to charge the load through a transistor sourcing `current`.
    pub fn propagation_time(&self, params: &TransistorParams, current: f64) -> Result<f64, PhysicsError> {
        if !(current > 0.0) {
            return Err(PhysicsError::NonPositiveCurrent(current));
        }
        Ok(self.load_capacitance * params.supply_voltage / current)
    }
}

/// Highest toggle frequency a gate with propagation time `propagation` supports.
pub fn max_frequency(propagation: f64) -> Result<f64, PhysicsError> {
    if !(propagation > 0.0) {
        return Err(PhysicsError::NonPositivePropagation(propagation));
    }
    Ok(1.0 / (2.0 * propagation))
}

/// Full chain temperature -> mobility -> current -> single-gate delay.
pub fn gate_delay(
    model: &MobilityModel,
    local_scattering: &[ScatteringTerm],
    params: &TransistorParams,
    load: &GateLoad,
    ageing: &AgeingState,
    temperature_k: f64,
) -> Result<f64, PhysicsError> {
    let mobility = model.effective_mobility_with(temperature_k, local_scattering)?;
    let current = params.drain_current(mobility, ageing)?;
    load.propagation_time(params, current)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn phonon_identity_at_reference() {
        let m = MobilityModel::phonon_limited(0.04, 300.0, 1.5);
        assert!(rel_eq(m.phonon_mobility(300.0).unwrap(), 0.04, 1e-12));
    }

    #[test]
    fn phonon_halves_with_unit_exponent() {
        let m = MobilityModel::phonon_limited(0.04, 300.0, 1.0);
        assert!(rel_eq(m.phonon_mobility(600.0).unwrap(), 0.02, 1e-12));
    }

    #[test]
    fn phonon_matches_high_precision_value() {
        // 0.04 * (293.15 / 353.15)^1.5 evaluated with 40-digit arithmetic.
        let m = MobilityModel::phonon_limited(0.04, 293.15, 1.5);
        let expected = 0.030_252_134_544_650_143;
        assert!(rel_eq(m.phonon_mobility(353.15).unwrap(), expected, 1e-12));
    }

    #[test]
    fn phonon_rejects_non_positive_temperature() {
        let m = MobilityModel::default();
        assert!(matches!(
            m.phonon_mobility(0.0),
            Err(PhysicsError::NonPositiveTemperature(_))
        ));
        assert!(m.phonon_mobility(-5.0).is_err());
        assert!(m.effective_mobility(f64::NAN).is_err());
    }

    #[test]
    fn effective_reduces_to_phonon() {
        let m = MobilityModel::phonon_limited(0.04, 300.0, 1.5);
        for t in [250.0, 300.0, 353.15, 400.0] {
            assert_eq!(m.effective_mobility(t).unwrap(), m.phonon_mobility(t).unwrap());
        }
    }

    #[test]
    fn effective_two_identical_terms_halve() {
        // Phonon term with theta pinned at T = T0 equals 0.04; one constant 0.04 term.
        let mut m = MobilityModel::phonon_limited(0.04, 300.0, 1.5);
        m.scattering.push(ScatteringTerm::constant("sr", 0.04));
        assert!(rel_eq(m.effective_mobility(300.0).unwrap(), 0.02, 1e-12));
        m.alpha = 2.0;
        assert!(rel_eq(m.effective_mobility(300.0).unwrap(), 0.04, 1e-12));
    }

    #[test]
    fn effective_rejects_non_positive_term() {
        let mut m = MobilityModel::default();
        m.scattering.push(ScatteringTerm {
            label: "cb".into(),
            law: ScatteringLaw::Linear {
                mobility_ref: 0.01,
                reference_temperature: 300.0,
                slope: -1e-3,
            },
        });
        assert!(m.validate().is_err());
        assert!(matches!(
            m.effective_mobility(320.0),
            Err(PhysicsError::NonPositiveScattering { .. })
        ));
    }

    #[test]
    fn drain_current_reference_value() {
        let p = TransistorParams {
            oxide_capacitance: 0.01,
            channel_width: 10.0,
            channel_length: 1.0,
            supply_voltage: 3.3,
            threshold_voltage_fresh: 0.7,
        };
        let fresh = p.drain_current(0.04, &AgeingState::FRESH).unwrap();
        assert!(rel_eq(fresh, 0.01352, 1e-12));
        let slow = p.drain_current(0.04, &AgeingState::new(0.0, 0.5).unwrap()).unwrap();
        assert!(rel_eq(slow, fresh * 0.5, 1e-12));
        // overdrive 2.6 V -> 1.3 V
        let shifted = p.drain_current(0.04, &AgeingState::new(1.3, 1.0).unwrap()).unwrap();
        assert!(rel_eq(shifted, fresh * 0.25, 1e-12));
    }

    #[test]
    fn drain_current_inoperable() {
        let p = TransistorParams::default();
        let aged = AgeingState::new(p.supply_voltage - p.threshold_voltage_fresh, 1.0).unwrap();
        assert!(matches!(
            p.drain_current(0.04, &aged),
            Err(PhysicsError::TransistorInoperable { .. })
        ));
    }

    #[test]
    fn propagation_time_reference() {
        let p = TransistorParams {
            supply_voltage: 3.3,
            ..TransistorParams::default()
        };
        let load = GateLoad::new(1e-14).unwrap();
        let tp = load.propagation_time(&p, 0.01352).unwrap();
        assert!(rel_eq(tp, 1e-14 * 3.3 / 0.01352, 1e-12));
        assert!((tp - 2.441e-12).abs() < 1e-15);
        let half = load.propagation_time(&p, 2.0 * 0.01352).unwrap();
        assert!(rel_eq(half, tp / 2.0, 1e-12));
        assert!(load.propagation_time(&p, 0.0).is_err());
    }

    #[test]
    fn max_frequency_values() {
        assert!(rel_eq(max_frequency(5e-9).unwrap(), 100e6, 1e-12));
        let f = max_frequency(2.441e-12).unwrap();
        assert!((f / 1e9 - 204.83).abs() < 0.01);
        assert!(max_frequency(0.0).is_err());
        assert!(max_frequency(-1.0).is_err());
    }

    #[test]
    fn ageing_invariants() {
        assert!(AgeingState::FRESH.is_fresh());
        assert!(AgeingState::new(-0.1, 1.0).is_err());
        assert!(AgeingState::new(0.0, 0.0).is_err());
        assert!(AgeingState::new(0.0, 1.01).is_err());
        assert!(!AgeingState::new(0.01, 1.0).unwrap().is_fresh());
    }

    #[test]
    fn transistor_validation() {
        assert!(TransistorParams::default().validate().is_ok());
        let bad = TransistorParams {
            supply_voltage: 0.4,
            ..TransistorParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
