//! Discrete-time simulation engine for the second-order single-bit CIFB
//! delta-sigma modulator, with hooks for droop, noise and distortion
//! injection from the thermal non-ideality models.
//!
//! The fully differential switched-capacitor circuit is reduced to a
//! single-ended-equivalent difference equation:
//!
//! ```text
//! i1' = clip(i1 + a1*(u_eff - v*v_ref) - droop1 + n1)
//! i2' = clip(i2 + a2*(i1' - v*v_ref)  - droop2 + n2)
//! bit = sign(i2' + comparator_offset)        (exact zero -> +1)
//! ```
//!
//! The quantizer decides on `i2` after the current-phase update; the DAC
//! feedback `v` applies on the next step (one-sample loop delay). States
//! saturate at the differential rail (`ModulatorConfig::sat_rail`), which
//! spans twice the supply because the state variable represents the
//! difference of two nodes that each swing within the rails.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::thermal::{Environment, NonidealitySet};

/// Static configuration of the modulator loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModulatorConfig {
    /// Sampling (clock) frequency, Hz.
    pub f_s: f64,
    /// Oversampling ratio; must be a power of two >= 2.
    pub osr: u32,
    /// DAC feedback level, V. The single-bit DAC feeds back `+-v_ref`.
    pub v_ref: f64,
    /// Input common-mode voltage, V (metadata for the differential circuit;
    /// the single-ended-equivalent loop is zero-centered).
    pub v_ic: f64,
    /// Supply voltage, V.
    pub v_dd: f64,
    /// First-stage integrator gain (sampling/integrating capacitor ratio).
    pub a1: f64,
    /// Second-stage integrator gain.
    pub a2: f64,
    /// First-stage sampling capacitance, F.
    pub c1: f64,
    /// Second-stage sampling capacitance, F.
    pub c2: f64,
    /// Integrator saturation rail, V. Defaults to `2 * v_dd`, the full
    /// differential range of an output pair that each swings 0..v_dd.
    pub v_sat: Option<f64>,
}

impl Default for ModulatorConfig {
    fn default() -> Self {
        // Nominal operating point: 150 kHz clock, OSR 512, 1.8 V reference,
        // 0.9 V common mode. Loop gains and absolute capacitances are
        // calibrated defaults; only the 10:1 stage capacitance ratio is a
        // hard design constraint.
        Self {
            f_s: 150e3,
            osr: 512,
            v_ref: 1.8,
            v_ic: 0.9,
            v_dd: 1.8,
            a1: 0.5,
            a2: 0.5,
            c1: 10e-12,
            c2: 1e-12,
            v_sat: None,
        }
    }
}

impl ModulatorConfig {
    /// Saturation rail actually used for clipping.
    pub fn sat_rail(&self) -> f64 {
        self.v_sat.unwrap_or(2.0 * self.v_dd)
    }

    /// In-band edge `f_s / (2 * osr)`, Hz.
    pub fn bandwidth(&self) -> f64 {
        self.f_s / (2.0 * self.osr as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_s > 0.0) {
            return Err(Error::Config(format!("f_s must be > 0, got {}", self.f_s)));
        }
        if self.osr < 2 || !self.osr.is_power_of_two() {
            return Err(Error::Config(format!(
                "osr must be a power of two >= 2, got {}",
                self.osr
            )));
        }
        if !(self.v_ref > 0.0 && self.v_ref <= self.v_dd) {
            return Err(Error::Config(format!(
                "v_ref must satisfy 0 < v_ref <= v_dd, got v_ref={} v_dd={}",
                self.v_ref, self.v_dd
            )));
        }
        if !(0.0..=self.v_dd).contains(&self.v_ic) {
            return Err(Error::Config(format!(
                "v_ic must be within [0, v_dd], got {}",
                self.v_ic
            )));
        }
        if !(self.a1 > 0.0 && self.a2 > 0.0) {
            return Err(Error::Config("loop gains a1, a2 must be > 0".into()));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::Config("capacitances must be > 0".into()));
        }
        if self.sat_rail() <= 0.0 {
            return Err(Error::Config("v_sat must be > 0".into()));
        }
        Ok(())
    }
}

/// Integrator states plus the previous quantizer decision that feeds the DAC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulatorState {
    pub i1: f64,
    pub i2: f64,
    /// Previous quantizer decision in {-1, +1}.
    pub v_prev: i8,
}

impl Default for ModulatorState {
    fn default() -> Self {
        // v_prev starts at +1, consistent with the zero tie-break.
        Self { i1: 0.0, i2: 0.0, v_prev: 1 }
    }
}

impl ModulatorState {
    pub fn is_finite(&self) -> bool {
        self.i1.is_finite() && self.i2.is_finite()
    }
}

/// Ordered single-bit modulator output plus its sampling-rate metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Bitstream {
    /// Samples in {-1, +1}.
    pub bits: Vec<i8>,
    /// Sampling rate, Hz.
    pub f_s: f64,
}

/// On-disk sample encoding for bitstream files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitFormat {
    /// One of `-1` / `1` per line.
    Pm1,
    /// One of `0` / `1` per line.
    ZeroOne,
}

impl Bitstream {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Bitstream as voltages `bit * v_ref`.
    pub fn to_volts(&self, v_ref: f64) -> Vec<f64> {
        self.bits.iter().map(|&b| b as f64 * v_ref).collect()
    }

    pub fn mean(&self) -> f64 {
        if self.bits.is_empty() {
            return 0.0;
        }
        self.bits.iter().map(|&b| b as f64).sum::<f64>() / self.bits.len() as f64
    }

    /// Write the bitstream in the repo's text format: a small `#key=value`
    /// header followed by one sample per line. Extra header lines may carry
    /// provenance (`#config.*`) and are ignored on read.
    pub fn write_to(&self, path: &Path, format: BitFormat, extra_header: &[String]) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "#sdadc-bitstream v1")?;
        writeln!(w, "#f_s_hz={}", self.f_s)?;
        writeln!(w, "#length={}", self.bits.len())?;
        let tag = match format {
            BitFormat::Pm1 => "pm1",
            BitFormat::ZeroOne => "01",
        };
        writeln!(w, "#format={}", tag)?;
        for line in extra_header {
            writeln!(w, "#{}", line)?;
        }
        for &b in &self.bits {
            match format {
                BitFormat::Pm1 => writeln!(w, "{}", b)?,
                BitFormat::ZeroOne => writeln!(w, "{}", (b + 1) / 2)?,
            }
        }
        Ok(())
    }

    /// Read a bitstream file written by [`Bitstream::write_to`].
    pub fn read_from(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut f_s: Option<f64> = None;
        let mut format = BitFormat::Pm1;
        let mut bits = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(h) = t.strip_prefix('#') {
                if let Some(v) = h.strip_prefix("f_s_hz=") {
                    f_s = Some(v.trim().parse().map_err(|_| Error::Parse {
                        line: lineno,
                        msg: format!("bad f_s_hz value '{}'", v),
                    })?);
                } else if let Some(v) = h.strip_prefix("format=") {
                    format = match v.trim() {
                        "pm1" => BitFormat::Pm1,
                        "01" => BitFormat::ZeroOne,
                        other => {
                            return Err(Error::Parse {
                                line: lineno,
                                msg: format!("unknown format tag '{}'", other),
                            })
                        }
                    };
                }
                continue;
            }
            let b: i64 = t.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad sample '{}'", t),
            })?;
            let bit = match (format, b) {
                (BitFormat::Pm1, 1) => 1,
                (BitFormat::Pm1, -1) => -1,
                (BitFormat::ZeroOne, 1) => 1,
                (BitFormat::ZeroOne, 0) => -1,
                _ => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("sample '{}' out of range for format", t),
                    })
                }
            };
            bits.push(bit);
        }
        let f_s = f_s.ok_or_else(|| Error::Config("bitstream file missing f_s_hz header".into()))?;
        Ok(Bitstream { bits, f_s })
    }
}

/// Test stimulus applied at the modulator input.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StimulusSpec {
    pub kind: StimulusKind,
    /// Sine amplitude in volts, specified peak-to-peak of the differential
    /// input (the waveform-generator convention). The in-loop peak is
    /// `amplitude / 2`.
    pub amplitude: f64,
    /// Sine frequency, Hz. Snapped to the nearest coherent bin of the record.
    pub frequency: f64,
    /// DC level, V (differential), used when `kind` is `Dc`.
    pub dc_level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StimulusKind {
    Dc,
    Sine,
}

impl Default for StimulusSpec {
    fn default() -> Self {
        // The AC characterization point: 1.7 V (pp) tone at 25.177 Hz.
        Self {
            kind: StimulusKind::Sine,
            amplitude: 1.7,
            frequency: 25.177,
            dc_level: 0.0,
        }
    }
}

impl StimulusSpec {
    pub fn validate(&self, cfg: &ModulatorConfig) -> Result<()> {
        match self.kind {
            StimulusKind::Sine => {
                if !(self.amplitude.abs() <= cfg.v_ref) {
                    return Err(Error::Config(format!(
                        "stimulus amplitude {} V exceeds v_ref {} V",
                        self.amplitude, cfg.v_ref
                    )));
                }
                if !(self.frequency > 0.0 && self.frequency < cfg.bandwidth()) {
                    return Err(Error::Config(format!(
                        "stimulus frequency {} Hz outside the signal band (0, {} Hz)",
                        self.frequency,
                        cfg.bandwidth()
                    )));
                }
            }
            StimulusKind::Dc => {
                if !(self.dc_level.abs() <= cfg.v_ref) {
                    return Err(Error::Config(format!(
                        "dc level {} V exceeds v_ref {} V",
                        self.dc_level, cfg.v_ref
                    )));
                }
            }
        }
        Ok(())
    }

    /// Sine frequency snapped to the nearest coherent bin of an
    /// `n_samples`-long record, avoiding window leakage.
    pub fn snapped_frequency(&self, f_s: f64, n_samples: usize) -> f64 {
        let bin = (self.frequency * n_samples as f64 / f_s).round().max(1.0);
        bin * f_s / n_samples as f64
    }

    fn sample(&self, n: usize, f_snapped: f64, f_s: f64) -> f64 {
        match self.kind {
            StimulusKind::Dc => self.dc_level,
            StimulusKind::Sine => {
                let peak = self.amplitude / 2.0;
                peak * (2.0 * std::f64::consts::PI * f_snapped * n as f64 / f_s).sin()
            }
        }
    }
}

/// Single-bit quantizer: sign with the documented tie-break (exact zero
/// maps to +1).
#[inline]
pub fn quantize(y: f64) -> i8 {
    if y >= 0.0 {
        1
    } else {
        -1
    }
}

/// One modulator clock period. `n1`, `n2` are the per-step noise samples
/// injected at the integrator states (zero in ideal mode).
#[inline]
pub fn step(
    state: &ModulatorState,
    u: f64,
    cfg: &ModulatorConfig,
    nid: &NonidealitySet,
    n1: f64,
    n2: f64,
) -> Result<(ModulatorState, i8)> {
    if !u.is_finite() || !state.is_finite() {
        return Err(Error::NonFinite(format!(
            "step input u={} state=({}, {})",
            u, state.i1, state.i2
        )));
    }
    let rail = cfg.sat_rail();
    let v = state.v_prev as f64;
    // Signal-dependent switch leakage shows up as a weak odd-order
    // nonlinearity on the sampled input.
    let u_eff = u + nid.input_cubic * u * u * u / (cfg.v_ref * cfg.v_ref);
    let i1 = (state.i1 + cfg.a1 * (u_eff - v * cfg.v_ref) - nid.droop1 + n1).clamp(-rail, rail);
    let i2 = (state.i2 + cfg.a2 * (i1 - v * cfg.v_ref) - nid.droop2 + n2).clamp(-rail, rail);
    let bit = quantize(i2 + nid.comparator_offset);
    Ok((ModulatorState { i1, i2, v_prev: bit }, bit))
}

/// Drive the modulator over a generated stimulus. Deterministic for a fixed
/// `env` (seed, chip, temperature): identical bitstreams across runs and
/// across serial/parallel execution.
pub fn run(
    cfg: &ModulatorConfig,
    env: &Environment,
    stim: &StimulusSpec,
    n_samples: usize,
    nid: &NonidealitySet,
) -> Result<Bitstream> {
    cfg.validate()?;
    stim.validate(cfg)?;
    if n_samples < 2 * cfg.osr as usize {
        return Err(Error::Input(format!(
            "n_samples must be >= 2*osr = {}, got {}",
            2 * cfg.osr,
            n_samples
        )));
    }

    let f_snapped = stim.snapped_frequency(cfg.f_s, n_samples);
    let noisy = nid.sigma_ktc_1 > 0.0 || nid.sigma_ktc_2 > 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(env.seed);
    rng.set_stream(env.noise_stream());
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    // CMFB disturbance: carrier at its configured frequency plus two
    // sidebands at +-f_in, injected input-referred.
    let cmfb = nid.cmfb_tone.as_ref().map(|t| (t.frequency, t.amplitude));
    let f_in = match stim.kind {
        StimulusKind::Sine => f_snapped,
        StimulusKind::Dc => 0.0,
    };

    let mut state = ModulatorState::default();
    let mut bits = Vec::with_capacity(n_samples);
    let w = 2.0 * std::f64::consts::PI / cfg.f_s;
    for n in 0..n_samples {
        let mut u = stim.sample(n, f_snapped, cfg.f_s);
        if let Some((fc, ac)) = cmfb {
            let t = n as f64;
            u += ac * (w * fc * t).sin();
            if f_in > 0.0 {
                u += 0.5 * ac * (w * (fc - f_in) * t).sin();
                u += 0.5 * ac * (w * (fc + f_in) * t).sin();
            }
        }
        let (n1, n2) = if noisy {
            (
                nid.sigma_ktc_1 * normal.sample(&mut rng),
                nid.sigma_ktc_2 * normal.sample(&mut rng),
            )
        } else {
            (0.0, 0.0)
        };
        let (next, bit) = step(&state, u, cfg, nid, n1, n2)?;
        debug_assert!(next.i1.abs() <= cfg.sat_rail() && next.i2.abs() <= cfg.sat_rail());
        state = next;
        bits.push(bit);
    }
    Ok(Bitstream { bits, f_s: cfg.f_s })
}

/// Convenience wrapper: ideal (noise-free, droop-free) run.
pub fn run_ideal(cfg: &ModulatorConfig, stim: &StimulusSpec, n_samples: usize) -> Result<Bitstream> {
    run(
        cfg,
        &Environment::default(),
        stim,
        n_samples,
        &NonidealitySet::ideal(),
    )
}
