//! Cascaded-integrator-comb (CIC) decimation filter, default third order
//! (sinc^3), matching the digital back end that follows the single-bit
//! modulator.
//!
//! The single-bit path runs the integrators in `i64`, which is exact for
//! any realistic record length (the third integral of a +-1 sequence of
//! length N is bounded by N^3, far below 2^63). A generic `f64` path is
//! provided for already-continuous data and for linearity testing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modulator::Bitstream;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecimatorConfig {
    /// Number of cascaded integrator/comb stages (sinc order).
    pub order: u32,
    /// Decimation ratio; must equal the modulator oversampling ratio for
    /// full-rate-to-output conversion.
    pub osr: u32,
    /// Divide by `osr^order` so the DC gain is unity.
    pub normalize: bool,
}

impl Default for DecimatorConfig {
    fn default() -> Self {
        Self { order: 3, osr: 512, normalize: true }
    }
}

impl DecimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 || self.order > 8 {
            return Err(Error::Config(format!(
                "decimator order must be in 1..=8, got {}",
                self.order
            )));
        }
        if self.osr < 2 {
            return Err(Error::Config(format!("osr must be >= 2, got {}", self.osr)));
        }
        Ok(())
    }

    /// DC gain of the unnormalized filter, `osr^order`.
    pub fn dc_gain(&self) -> f64 {
        (self.osr as f64).powi(self.order as i32)
    }
}

/// Decimated output together with its (reduced) sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct DecimatedStream {
    pub samples: Vec<f64>,
    /// Output sampling rate, Hz (`input f_s / osr`).
    pub f_s: f64,
}

/// Decimate a single-bit stream. The first `order` outputs are discarded
/// as filter warm-up, so the result holds `floor(n / osr) - order` samples;
/// the input must be long enough to leave at least one.
pub fn decimate(bs: &Bitstream, cfg: &DecimatorConfig) -> Result<DecimatedStream> {
    cfg.validate()?;
    let r = cfg.osr as usize;
    let order = cfg.order as usize;
    if bs.len() / r <= order {
        return Err(Error::Input(format!(
            "bitstream too short to decimate: {} samples, need > {}",
            bs.len(),
            (order + 1) * r
        )));
    }

    let mut acc = vec![0i64; order];
    let mut coarse: Vec<i64> = Vec::with_capacity(bs.len() / r);
    for (n, &b) in bs.bits.iter().enumerate() {
        let mut s = b as i64;
        for a in acc.iter_mut() {
            *a += s;
            s = *a;
        }
        if n % r == r - 1 {
            coarse.push(s);
        }
    }

    for _ in 0..order {
        let mut prev = 0i64;
        for v in coarse.iter_mut() {
            let cur = *v;
            *v = cur - prev;
            prev = cur;
        }
    }

    let gain = if cfg.normalize { cfg.dc_gain() } else { 1.0 };
    let samples = coarse[order..].iter().map(|&v| v as f64 / gain).collect();
    Ok(DecimatedStream { samples, f_s: bs.f_s / cfg.osr as f64 })
}

/// Same filter over arbitrary `f64` samples (no exact-integer guarantee).
pub fn decimate_samples(x: &[f64], f_s: f64, cfg: &DecimatorConfig) -> Result<DecimatedStream> {
    cfg.validate()?;
    let r = cfg.osr as usize;
    let order = cfg.order as usize;
    if x.len() / r <= order {
        return Err(Error::Input(format!(
            "record too short to decimate: {} samples, need > {}",
            x.len(),
            (order + 1) * r
        )));
    }
    let mut acc = vec![0f64; order];
    let mut coarse: Vec<f64> = Vec::with_capacity(x.len() / r);
    for (n, &xi) in x.iter().enumerate() {
        if !xi.is_finite() {
            return Err(Error::NonFinite(format!("decimator input at sample {n}")));
        }
        let mut s = xi;
        for a in acc.iter_mut() {
            *a += s;
            s = *a;
        }
        if n % r == r - 1 {
            coarse.push(s);
        }
    }
    for _ in 0..order {
        let mut prev = 0f64;
        for v in coarse.iter_mut() {
            let cur = *v;
            *v = cur - prev;
            prev = cur;
        }
    }
    let gain = if cfg.normalize { cfg.dc_gain() } else { 1.0 };
    let samples = coarse[order..].iter().map(|&v| v / gain).collect();
    Ok(DecimatedStream { samples, f_s: f_s / cfg.osr as f64 })
}

/// Magnitude response of the normalized filter at frequency `f` (input
/// rate `f_s`), in dB. Zero at DC, with nulls at multiples of `f_s / osr`.
pub fn gain_db(f: f64, f_s: f64, cfg: &DecimatorConfig) -> f64 {
    let r = cfg.osr as f64;
    let x = std::f64::consts::PI * f / f_s;
    let mag = if x.abs() < 1e-12 {
        1.0
    } else {
        ((r * x).sin() / (r * x.sin())).abs()
    };
    20.0 * cfg.order as f64 * mag.log10()
}

/// Passband droop at the band edge `f_s / (2 * osr)`, in dB (negative).
pub fn band_edge_droop_db(f_s: f64, cfg: &DecimatorConfig) -> f64 {
    gain_db(f_s / (2.0 * cfg.osr as f64), f_s, cfg)
}

/// Analytic sinc^order attenuation at an in-passband frequency, dB
/// (0 at DC, monotone decreasing on the passband).
pub fn passband_droop_db(f: f64, f_s: f64, cfg: &DecimatorConfig) -> Result<f64> {
    cfg.validate()?;
    let edge = f_s / (2.0 * cfg.osr as f64);
    if !(0.0..=edge).contains(&f) {
        return Err(Error::Input(format!(
            "frequency {f} Hz outside the passband [0, {edge} Hz]"
        )));
    }
    Ok(gain_db(f, f_s, cfg))
}

/// Undo the passband droop on a spectrum computed from decimated data:
/// every bin's power is divided by the filter's squared magnitude at that
/// bin's (absolute) frequency. Needed before comparing decimated-domain
/// SINAD/INL amplitudes against raw-bitstream analyses.
pub fn correct_droop(
    spec: &mut crate::spectrum::Spectrum,
    input_f_s: f64,
    cfg: &DecimatorConfig,
) -> Result<()> {
    cfg.validate()?;
    if !(input_f_s > 0.0) {
        return Err(Error::Config(format!("input rate must be > 0, got {input_f_s}")));
    }
    for k in 0..spec.nbins() {
        let g_db = gain_db(spec.freq(k), input_f_s, cfg);
        spec.power[k] /= 10f64.powf(g_db / 10.0);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bs(bits: Vec<i8>) -> Bitstream {
        Bitstream { bits, f_s: 150e3 }
    }

    #[test]
    fn constant_input_yields_unity_dc_gain() {
        let cfg = DecimatorConfig { osr: 8, ..Default::default() };
        let out = decimate(&bs(vec![1; 256]), &cfg).unwrap();
        for &v in &out.samples {
            assert_relative_eq!(v, 1.0);
        }
        assert_relative_eq!(out.f_s, 150e3 / 8.0);
    }

    #[test]
    fn output_length_and_rate() {
        let cfg = DecimatorConfig { osr: 16, order: 3, normalize: true };
        let out = decimate(&bs(vec![-1; 160]), &cfg).unwrap();
        assert_eq!(out.samples.len(), 160 / 16 - 3);
    }

    #[test]
    fn impulse_response_is_triple_boxcar() {
        // An impulse into sinc^3 with R=4 produces the triangular-ish
        // sequence from convolving three length-4 boxcars, sampled every 4.
        let r = 4usize;
        let n = 64;
        let mut x = vec![0.0; n];
        x[0] = 1.0;
        let cfg = DecimatorConfig { osr: r as u32, order: 3, normalize: false };
        let out = decimate_samples(&x, 1.0, &cfg).unwrap();
        // Full convolution h = box*box*box (length 3R-2 = 10), sampled at
        // indices 3, 7, 11 ... of the convolution output (phase r-1), after
        // dropping the warm-up.
        let mut h = vec![0.0; 3 * r - 2];
        for i in 0..r {
            for j in 0..r {
                for k in 0..r {
                    h[i + j + k] += 1.0;
                }
            }
        }
        let mut expected = Vec::new();
        let mut idx = r - 1;
        while expected.len() < out.samples.len() + 3 {
            expected.push(if idx < h.len() { h[idx] } else { 0.0 });
            idx += r;
        }
        for (o, e) in out.samples.iter().zip(expected[3..].iter()) {
            assert_relative_eq!(o, e);
        }
    }

    #[test]
    fn integer_and_float_paths_agree() {
        let bits: Vec<i8> = (0..4096).map(|n| if (n * 7) % 13 < 6 { 1 } else { -1 }).collect();
        let x: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
        let cfg = DecimatorConfig { osr: 32, ..Default::default() };
        let a = decimate(&bs(bits), &cfg).unwrap();
        let b = decimate_samples(&x, 150e3, &cfg).unwrap();
        for (u, v) in a.samples.iter().zip(b.samples.iter()) {
            assert_relative_eq!(u, v, max_relative = 1e-12);
        }
    }

    #[test]
    fn linearity() {
        let cfg = DecimatorConfig { osr: 8, ..Default::default() };
        let x: Vec<f64> = (0..256).map(|n| (n as f64 * 0.1).sin()).collect();
        let y: Vec<f64> = (0..256).map(|n| (n as f64 * 0.37).cos()).collect();
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a + 3.0 * b).collect();
        let dx = decimate_samples(&x, 1.0, &cfg).unwrap();
        let dy = decimate_samples(&y, 1.0, &cfg).unwrap();
        let dz = decimate_samples(&z, 1.0, &cfg).unwrap();
        for ((a, b), c) in dx.samples.iter().zip(&dy.samples).zip(&dz.samples) {
            assert_relative_eq!(2.0 * a + 3.0 * b, c, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn frequency_response_nulls_and_droop() {
        let cfg = DecimatorConfig::default(); // R=512, order 3
        let f_s = 150e3;
        // Exact null at the output rate (alias center).
        assert!(gain_db(f_s / 512.0, f_s, &cfg) < -200.0);
        // Unity at DC.
        assert_relative_eq!(gain_db(0.0, f_s, &cfg), 0.0);
        // Band-edge droop approaches 20*order*log10(2/pi) ~= -11.77 dB for
        // large R (sin(pi f / f_s) ~ pi f / f_s).
        let droop = band_edge_droop_db(f_s, &cfg);
        assert!((droop - 3.0 * 20.0 * (2.0 / std::f64::consts::PI).log10()).abs() < 0.01,
            "droop = {droop}");
        // passband_droop_db agrees and enforces its domain.
        let edge = f_s / (2.0 * 512.0);
        assert_relative_eq!(passband_droop_db(edge, f_s, &cfg).unwrap(), droop);
        assert_relative_eq!(passband_droop_db(0.0, f_s, &cfg).unwrap(), 0.0);
        assert!(passband_droop_db(edge * 1.01, f_s, &cfg).is_err());
        // Monotone decreasing on the passband.
        let mut prev = 0.1;
        for i in 0..=64 {
            let g = passband_droop_db(edge * i as f64 / 64.0, f_s, &cfg).unwrap();
            assert!(g < prev, "droop not monotone at step {i}");
            prev = g;
        }
    }

    #[test]
    fn alternating_input_is_nulled() {
        // A +1/-1 alternation is a tone at f_s/2, an exact sinc^3 null.
        let bits: Vec<i8> = (0..4096).map(|n| if n % 2 == 0 { 1 } else { -1 }).collect();
        let cfg = DecimatorConfig { osr: 64, ..Default::default() };
        let out = decimate(&bs(bits), &cfg).unwrap();
        for &v in &out.samples {
            assert!(v.abs() < 1e-6, "leakage {v}");
        }
    }

    #[test]
    fn droop_correction_flattens_a_corrected_spectrum() {
        use crate::spectrum::{Spectrum, WindowKind};
        let cfg = DecimatorConfig { osr: 64, order: 3, normalize: true };
        let f_s_in = 150e3;
        let f_s_out = f_s_in / 64.0;
        let nbins = 129usize;
        // Synthetic spectrum shaped exactly like the filter response.
        let power: Vec<f64> = (0..nbins)
            .map(|k| {
                let f = k as f64 * f_s_out / 256.0;
                10f64.powf(gain_db(f, f_s_in, &cfg) / 10.0)
            })
            .collect();
        let mut spec = Spectrum {
            power,
            bin_hz: f_s_out / 256.0,
            f_s: f_s_out,
            window: WindowKind::Hann,
            segments: 1,
        };
        correct_droop(&mut spec, f_s_in, &cfg).unwrap();
        for k in 0..nbins {
            assert_relative_eq!(spec.power[k], 1.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn too_short_input_rejected() {
        let cfg = DecimatorConfig::default();
        assert!(decimate(&bs(vec![1; 1024]), &cfg).is_err());
    }
}
