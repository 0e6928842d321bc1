//! Dynamic (SNR/SINAD/THD/SFDR/ENOB/FoM) and static (INL) converter
//! characterization on top of [`crate::spectrum`].
//!
//! Conventions: the in-band region excludes the DC bin and one adjacent
//! bin (offset/flicker guard); signal and harmonic power integrate over
//! the window main lobe (+-3 bins for Hann); harmonics are counted to the
//! 9th; SINAD <= SNR always holds because distortion power is
//! non-negative.

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

/// Highest harmonic order included in THD / excluded from SNR noise.
pub const MAX_HARMONIC: u32 = 9;
/// In-band bins below this index are excluded (DC plus one guard bin).
pub const DC_GUARD_BINS: usize = 2;
/// Minimum prominence of the signal bin above the median in-band floor.
pub const TONE_DETECT_DB: f64 = 6.0;

/// Tone-based dynamic metrics of one spectrum.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DynamicMetrics {
    /// Detected tone frequency, Hz.
    pub f_tone: f64,
    /// Tone power, V^2.
    pub signal_power: f64,
    pub snr_db: f64,
    pub sinad_db: f64,
    /// Harmonic-to-signal ratio, dBc (negative; -inf mapped to a floor).
    pub thd_db: f64,
    pub sfdr_db: f64,
    pub enob_bits: f64,
}

/// Find the strongest in-band bin, requiring it to stand at least
/// [`TONE_DETECT_DB`] above the median in-band floor.
pub fn find_tone(spec: &Spectrum, bw: f64) -> Result<usize> {
    let hi = spec.bin_of(bw);
    if hi <= DC_GUARD_BINS + 2 {
        return Err(Error::Input(format!("band [0, {bw} Hz] holds too few bins")));
    }
    let band = &spec.power[DC_GUARD_BINS..=hi];
    let (rel_max, _) = band
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty band");
    let mut sorted: Vec<f64> = band.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let peak = band[rel_max];
    if !(peak > 0.0) || 10.0 * (peak / median.max(1e-300)).log10() < TONE_DETECT_DB {
        return Err(Error::NoSignalTone);
    }
    Ok(rel_max + DC_GUARD_BINS)
}

fn lobe(spec: &Spectrum, center: usize) -> (usize, usize) {
    let g = spec.window.lobe_half_width();
    (center.saturating_sub(g), center + g)
}

/// Dynamic metrics over the band `[0, bw]`. The tone is auto-detected;
/// pass `f_tone` to pin it to a known frequency instead.
pub fn dynamic_metrics(spec: &Spectrum, bw: f64, f_tone: Option<f64>) -> Result<DynamicMetrics> {
    if !(bw > 0.0 && bw <= spec.f_s / 2.0) {
        return Err(Error::Config(format!(
            "bandwidth {bw} Hz outside (0, f_s/2 = {}]",
            spec.f_s / 2.0
        )));
    }
    let k_sig = match f_tone {
        Some(f) => {
            if !(f > 0.0 && f < bw) {
                return Err(Error::Config(format!("tone {f} Hz outside band (0, {bw})")));
            }
            let k = spec.bin_of(f);
            // Even a pinned tone must be detectable.
            find_tone(spec, bw)?;
            k
        }
        None => find_tone(spec, bw)?,
    };
    let hi = spec.bin_of(bw);
    let (s_lo, s_hi) = lobe(spec, k_sig);
    let signal_power = spec.band_power_bins(s_lo, s_hi.min(hi));
    if !(signal_power > 0.0) {
        return Err(Error::NoSignalTone);
    }

    // Harmonic lobes (2nd..9th) that fall in band and off the signal lobe.
    let g = spec.window.lobe_half_width();
    let mut harmonic_power = 0.0;
    let mut in_harmonic = vec![false; hi + 1];
    for h in 2..=MAX_HARMONIC as usize {
        let k = k_sig * h;
        if k > hi + g {
            break;
        }
        for b in k.saturating_sub(g)..=(k + g).min(hi) {
            if (b < s_lo || b > s_hi) && !in_harmonic[b] {
                in_harmonic[b] = true;
                harmonic_power += spec.power[b];
            }
        }
    }

    // Noise: everything in band except DC guard, signal lobe and harmonics.
    let mut noise_power = 0.0;
    let mut max_spur = 0.0f64;
    let mut spur_center = 0usize;
    for b in DC_GUARD_BINS..=hi {
        let is_sig = b >= s_lo && b <= s_hi;
        if !is_sig && !in_harmonic[b] {
            noise_power += spec.power[b];
        }
        if !is_sig && spec.power[b] > max_spur {
            max_spur = spec.power[b];
            spur_center = b;
        }
    }
    // SFDR uses the largest non-signal lobe (harmonic or not).
    let (p_lo, p_hi) = lobe(spec, spur_center);
    let mut spur_power = 0.0;
    for b in p_lo.max(DC_GUARD_BINS)..=p_hi.min(hi) {
        if b < s_lo || b > s_hi {
            spur_power += spec.power[b];
        }
    }

    let snr_db = 10.0 * (signal_power / noise_power.max(1e-300)).log10();
    let sinad_db =
        10.0 * (signal_power / (noise_power + harmonic_power).max(1e-300)).log10();
    let thd_db = 10.0 * (harmonic_power.max(1e-300) / signal_power).log10();
    let sfdr_db = 10.0 * (signal_power / spur_power.max(1e-300)).log10();
    Ok(DynamicMetrics {
        f_tone: spec.freq(k_sig),
        signal_power,
        snr_db,
        sinad_db,
        thd_db,
        sfdr_db,
        enob_bits: enob(sinad_db),
    })
}

/// Effective number of bits from SINAD: `(sinad - 1.76) / 6.02`.
pub fn enob(sinad_db: f64) -> f64 {
    (sinad_db - 1.76) / 6.02
}

/// Schreier figure of merit: `sinad + 10*log10(bw / power)` in dB,
/// with `bw` in Hz and `power` in watts.
pub fn schreier_fom(sinad_db: f64, bw_hz: f64, power_w: f64) -> Result<f64> {
    if !(bw_hz > 0.0 && power_w > 0.0) {
        return Err(Error::Config(format!(
            "fom requires bw > 0 and power > 0, got bw={bw_hz} power={power_w}"
        )));
    }
    Ok(sinad_db + 10.0 * (bw_hz / power_w).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineFit {
    LeastSquares,
    Endpoint,
}

impl Default for LineFit {
    fn default() -> Self {
        LineFit::LeastSquares
    }
}

/// Static-linearity result from a DC sweep.
#[derive(Debug, Clone)]
pub struct InlReport {
    /// Deviation from the fitted line at each sweep point, V.
    pub curve: Vec<f64>,
    /// max |curve|, V.
    pub inl_worst: f64,
    /// Fitted line gain (output per input volt).
    pub gain: f64,
    /// Fitted line offset, V.
    pub offset: f64,
    /// Set when the transfer is non-monotone far beyond the INL scale;
    /// the numbers are still reported but should not be trusted.
    pub gross_failure: bool,
}

/// INL of a measured DC transfer: `codes` (settled decimated outputs, V)
/// against applied `dc_levels` (V). Needs at least 4 points; 33 or more
/// spanning most of the range is the conventional sweep.
pub fn inl_from_sweep(dc_levels: &[f64], codes: &[f64], fit: LineFit) -> Result<InlReport> {
    if dc_levels.len() != codes.len() {
        return Err(Error::Input(format!(
            "sweep length mismatch: {} levels vs {} codes",
            dc_levels.len(),
            codes.len()
        )));
    }
    let n = dc_levels.len();
    if n < 4 {
        return Err(Error::Input(format!("need at least 4 sweep points, got {n}")));
    }
    if dc_levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Input("dc_levels must be strictly increasing".into()));
    }

    let (gain, offset) = match fit {
        LineFit::Endpoint => {
            let g = (codes[n - 1] - codes[0]) / (dc_levels[n - 1] - dc_levels[0]);
            (g, codes[0] - g * dc_levels[0])
        }
        LineFit::LeastSquares => {
            let nf = n as f64;
            let sx: f64 = dc_levels.iter().sum();
            let sy: f64 = codes.iter().sum();
            let sxx: f64 = dc_levels.iter().map(|x| x * x).sum();
            let sxy: f64 = dc_levels.iter().zip(codes).map(|(x, y)| x * y).sum();
            let g = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
            (g, (sy - g * sx) / nf)
        }
    };

    let curve: Vec<f64> = dc_levels
        .iter()
        .zip(codes)
        .map(|(x, y)| y - (gain * x + offset))
        .collect();
    let inl_worst = curve.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    // Gross failure: codes go backwards by a macroscopic fraction of the
    // sweep span (a broken sweep, not a fine-linearity effect).
    let span = (codes[n - 1] - codes[0]).abs();
    let tol = 0.05 * span;
    let gross_failure = codes.windows(2).any(|w| w[1] - w[0] < -tol);

    Ok(InlReport { curve, inl_worst, gain, offset, gross_failure })
}

/// Full report for one operating point, as serialized by the CLI.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricsReport {
    pub snr_db: f64,
    pub sinad_db: f64,
    pub thd_db: f64,
    pub sfdr_db: f64,
    pub enob_bits: f64,
    pub inl_worst_v: Option<f64>,
    pub fom_schreier_db: Option<f64>,
    pub bw_hz: f64,
    pub power_w: Option<f64>,
}

impl MetricsReport {
    pub fn from_dynamic(d: &DynamicMetrics, bw_hz: f64, power_w: Option<f64>) -> Result<Self> {
        let fom = match power_w {
            Some(p) => Some(schreier_fom(d.sinad_db, bw_hz, p)?),
            None => None,
        };
        Ok(Self {
            snr_db: d.snr_db,
            sinad_db: d.sinad_db,
            thd_db: d.thd_db,
            sfdr_db: d.sfdr_db,
            enob_bits: d.enob_bits,
            inl_worst_v: None,
            fom_schreier_db: fom,
            bw_hz,
            power_w,
        })
    }

    /// `key=value` lines, one metric per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("snr_db={:.3}\n", self.snr_db));
        s.push_str(&format!("sinad_db={:.3}\n", self.sinad_db));
        s.push_str(&format!("thd_db={:.3}\n", self.thd_db));
        s.push_str(&format!("sfdr_db={:.3}\n", self.sfdr_db));
        s.push_str(&format!("enob_bits={:.4}\n", self.enob_bits));
        if let Some(v) = self.inl_worst_v {
            s.push_str(&format!("inl_worst_v={:.6e}\n", v));
        }
        if let Some(f) = self.fom_schreier_db {
            s.push_str(&format!("fom_schreier_db={:.2}\n", f));
        }
        s.push_str(&format!("bw_hz={:.4}\n", self.bw_hz));
        if let Some(p) = self.power_w {
            s.push_str(&format!("power_w={:.4e}\n", p));
        }
        s
    }

    /// Single-row CSV with header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(
            w,
            "snr_db,sinad_db,thd_db,sfdr_db,enob_bits,inl_worst_v,fom_schreier_db,bw_hz,power_w"
        )?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6e}"));
        writeln!(
            w,
            "{:.3},{:.3},{:.3},{:.3},{:.4},{},{},{:.4},{}",
            self.snr_db,
            self.sinad_db,
            self.thd_db,
            self.sfdr_db,
            self.enob_bits,
            opt(self.inl_worst_v),
            self.fom_schreier_db.map_or(String::new(), |x| format!("{x:.2}")),
            self.bw_hz,
            opt(self.power_w)
        )?;
        Ok(())
    }
}
