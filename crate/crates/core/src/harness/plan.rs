//! Experiment plan: the single TOML document that fully determines a
//! sweep (configuration + seed determine every emitted byte).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modulator::{ModulatorConfig, StimulusSpec};
use crate::thermal::{Environment, LeakageParams};

/// Which per-temperature curves a sweep emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOutput {
    SnrVsT,
    SinadVsT,
    InlVsT,
    SupplyVsT,
}

impl SweepOutput {
    pub fn name(&self) -> &'static str {
        match self {
            SweepOutput::SnrVsT => "snr_vs_t",
            SweepOutput::SinadVsT => "sinad_vs_t",
            SweepOutput::InlVsT => "inl_vs_t",
            SweepOutput::SupplyVsT => "supply_vs_t",
        }
    }
}

/// Request for a single-point spectrum export (one chip, one temperature).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumRequest {
    pub temperature_c: f64,
    pub chip: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentPlan {
    pub modulator: ModulatorConfig,
    pub leakage: LeakageParams,
    pub stimulus: StimulusSpec,
    /// Temperature grid, degC, strictly ascending.
    pub temperatures: Vec<f64>,
    /// Monte-Carlo population size (virtual chips per temperature).
    pub n_chips: u32,
    /// Modulator samples per metric point.
    pub n_samples: usize,
    pub seed: u64,
    /// Relative dummy/active mismatch sigma.
    pub sigma_mismatch: f64,
    /// Clock-boost magnitude, V.
    pub v_boost: f64,
    /// Disable every non-ideality (noise-free reference runs).
    pub ideal: bool,
    pub outputs: Vec<SweepOutput>,
    /// Extra single-point spectrum exports.
    pub spectra: Vec<SpectrumRequest>,
    /// DC points per INL sweep.
    pub inl_points: u32,
    /// Modulator samples per INL DC point.
    pub inl_samples: usize,
    /// Fraction of the +-v_ref/2 input range covered by the INL sweep.
    pub inl_span: f64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            modulator: ModulatorConfig::default(),
            leakage: LeakageParams::default(),
            stimulus: StimulusSpec::default(),
            temperatures: (0..=30).map(|i| -40.0 + 10.0 * i as f64).collect(),
            n_chips: 5,
            n_samples: 1 << 19,
            seed: 1,
            sigma_mismatch: 0.01,
            v_boost: 0.2,
            ideal: false,
            outputs: vec![
                SweepOutput::SnrVsT,
                SweepOutput::SinadVsT,
                SweepOutput::SupplyVsT,
            ],
            spectra: Vec::new(),
            inl_points: 33,
            inl_samples: 1 << 16,
            inl_span: 0.944,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        self.modulator.validate()?;
        self.leakage.validate()?;
        self.stimulus.validate(&self.modulator)?;
        if self.temperatures.is_empty() {
            return Err(Error::Config("temperatures must be non-empty".into()));
        }
        if self.temperatures.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("temperatures must be strictly ascending".into()));
        }
        if self.n_chips < 1 {
            return Err(Error::Config("n_chips must be >= 1".into()));
        }
        if self.outputs.contains(&SweepOutput::InlVsT) {
            if self.inl_points < 4 {
                return Err(Error::Config("inl_points must be >= 4".into()));
            }
            if !(0.0 < self.inl_span && self.inl_span <= 1.0) {
                return Err(Error::Config("inl_span must be in (0, 1]".into()));
            }
        }
        for t in &self.temperatures {
            self.environment(*t, 0).validate()?;
        }
        for s in &self.spectra {
            if !self.temperatures.iter().any(|t| (t - s.temperature_c).abs() < 1e-9) {
                return Err(Error::Config(format!(
                    "spectrum request at {} degC is not on the temperature grid",
                    s.temperature_c
                )));
            }
            if s.chip >= self.n_chips {
                return Err(Error::Config(format!(
                    "spectrum request chip {} >= n_chips {}",
                    s.chip, self.n_chips
                )));
            }
        }
        Ok(())
    }

    pub fn environment(&self, temperature_c: f64, chip: u32) -> Environment {
        Environment {
            temperature_c,
            seed: self.seed,
            sigma_mismatch: self.sigma_mismatch,
            v_boost: self.v_boost,
            n_chips: self.n_chips,
            chip,
        }
    }

    /// Parse a plan from TOML text; unknown keys are rejected with the
    /// offending key named (fail-fast).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let plan: ExperimentPlan =
            toml::from_str(text).map_err(|e| Error::Config(format!("plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Canonical TOML rendering, embedded in every output for provenance.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("plan serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_validates_and_round_trips() {
        let plan = ExperimentPlan::default();
        plan.validate().unwrap();
        assert_eq!(plan.temperatures.first().copied(), Some(-40.0));
        assert_eq!(plan.temperatures.last().copied(), Some(260.0));
        assert_eq!(plan.n_chips, 5);
        let text = plan.to_toml_string();
        let back = ExperimentPlan::from_toml_str(&text).unwrap();
        assert_eq!(back.temperatures, plan.temperatures);
        assert_eq!(back.n_samples, plan.n_samples);
    }

    #[test]
    fn unknown_keys_rejected_with_name() {
        let err = ExperimentPlan::from_toml_str("bogus_key = 3\n").unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
    }

    #[test]
    fn unsorted_temperatures_rejected() {
        let mut plan = ExperimentPlan::default();
        plan.temperatures = vec![25.0, 25.0];
        assert!(plan.validate().is_err());
    }

    #[test]
    fn off_grid_spectrum_request_rejected() {
        let mut plan = ExperimentPlan::default();
        plan.spectra = vec![SpectrumRequest { temperature_c: 33.0, chip: 0 }];
        assert!(plan.validate().is_err());
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let plan = ExperimentPlan::from_toml_str(
            "temperatures = [25.0, 250.0]\nn_chips = 2\n\n[stimulus]\namplitude = 1.0\n",
        )
        .unwrap();
        assert_eq!(plan.n_chips, 2);
        assert_eq!(plan.stimulus.amplitude, 1.0);
        assert_eq!(plan.modulator.osr, 512);
    }
}
