//! Windowed Welch power spectra for ADC dynamic testing.
//!
//! Bin powers are normalized so that the *sum* of bins across a coherent
//! tone's window lobe equals the tone power `A^2/2` (V^2), and the sum over
//! any band of a noise floor equals the noise power in that band. With the
//! normalization `P_k = |X_k|^2 * 2 / (N * sum(w^2))` both properties hold
//! at once, so band sums need no separate equivalent-noise-bandwidth
//! correction.

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Rectangular,
    Hann,
    Blackman,
}

impl Default for WindowKind {
    fn default() -> Self {
        WindowKind::Hann
    }
}

impl WindowKind {
    /// Window samples, periodic form (suitable for spectral averaging).
    pub fn samples(&self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (0..n)
            .map(|i| {
                let x = 2.0 * std::f64::consts::PI * i as f64 / nf;
                match self {
                    WindowKind::Rectangular => 1.0,
                    WindowKind::Hann => 0.5 - 0.5 * x.cos(),
                    WindowKind::Blackman => 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos(),
                }
            })
            .collect()
    }

    /// Half-width of the main lobe in bins; bins within this distance of a
    /// coherent tone belong to the tone.
    pub fn lobe_half_width(&self) -> usize {
        match self {
            WindowKind::Rectangular => 1,
            WindowKind::Hann => 3,
            WindowKind::Blackman => 4,
        }
    }
}

/// One-sided averaged power spectrum.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Linear bin powers, V^2; index k maps to frequency `k * bin_hz`.
    pub power: Vec<f64>,
    /// Bin spacing, Hz.
    pub bin_hz: f64,
    /// Input sampling rate, Hz.
    pub f_s: f64,
    pub window: WindowKind,
    /// Number of averaged segments.
    pub segments: usize,
}

impl Spectrum {
    pub fn nbins(&self) -> usize {
        self.power.len()
    }

    pub fn freq(&self, k: usize) -> f64 {
        k as f64 * self.bin_hz
    }

    /// Nearest bin index for a frequency.
    pub fn bin_of(&self, f: f64) -> usize {
        ((f / self.bin_hz).round() as usize).min(self.power.len().saturating_sub(1))
    }

    /// Bin power in dB relative to a full-scale sine of rms-squared power
    /// `full_scale_power` (i.e. `v_fs^2 / 2` for peak `v_fs`).
    pub fn dbfs(&self, k: usize, full_scale_power: f64) -> f64 {
        10.0 * (self.power[k] / full_scale_power).max(1e-300).log10()
    }

    /// Sum of bin powers over the inclusive bin range, V^2.
    pub fn band_power_bins(&self, lo: usize, hi: usize) -> f64 {
        let hi = hi.min(self.power.len().saturating_sub(1));
        if lo > hi {
            return 0.0;
        }
        self.power[lo..=hi].iter().sum()
    }

    /// Sum of bin powers over `[f_lo, f_hi]`, V^2.
    pub fn band_power(&self, f_lo: f64, f_hi: f64) -> f64 {
        self.band_power_bins(self.bin_of(f_lo), self.bin_of(f_hi))
    }

    /// Least-squares slope of `10*log10(P)` against `log10(f)` over
    /// `[f_lo, f_hi]`, in dB per decade.
    pub fn fit_slope_db_per_decade(&self, f_lo: f64, f_hi: f64) -> Result<f64> {
        let lo = self.bin_of(f_lo).max(1);
        let hi = self.bin_of(f_hi);
        if hi <= lo + 2 {
            return Err(Error::Input(format!(
                "slope fit needs more than 3 bins in [{f_lo}, {f_hi}] Hz"
            )));
        }
        let pts: Vec<(f64, f64)> = (lo..=hi)
            .filter(|&k| self.power[k] > 0.0)
            .map(|k| (self.freq(k).log10(), 10.0 * self.power[k].log10()))
            .collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() < 1e-12 {
            return Err(Error::Input("degenerate frequency range for slope fit".into()));
        }
        Ok((n * sxy - sx * sy) / denom)
    }

    /// Write the spectrum as CSV: `frequency_hz,power_v2,power_dbfs`.
    pub fn write_csv(&self, path: &Path, full_scale_power: f64, header: &[String]) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for line in header {
            writeln!(w, "# {}", line)?;
        }
        writeln!(w, "frequency_hz,power_v2,power_dbfs")?;
        for k in 0..self.nbins() {
            writeln!(
                w,
                "{:.6},{:.6e},{:.3}",
                self.freq(k),
                self.power[k],
                self.dbfs(k, full_scale_power)
            )?;
        }
        Ok(())
    }
}

/// Welch-averaged one-sided power spectrum. Segments are non-overlapping;
/// `segment_len` of `None` uses the whole record as one segment. The
/// segment length must be even and at least 16.
pub fn psd(
    x: &[f64],
    f_s: f64,
    window: WindowKind,
    segment_len: Option<usize>,
) -> Result<Spectrum> {
    let n = segment_len.unwrap_or(x.len());
    if n < 16 || n % 2 != 0 {
        return Err(Error::Input(format!(
            "segment length must be even and >= 16, got {n}"
        )));
    }
    if x.len() < n {
        return Err(Error::Input(format!(
            "record ({}) shorter than segment length ({n})",
            x.len()
        )));
    }
    if let Some(bad) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("spectrum input at sample {bad}")));
    }

    let w = window.samples(n);
    let wsq: f64 = w.iter().map(|v| v * v).sum();
    let norm = 2.0 / (n as f64 * wsq);

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let nbins = n / 2 + 1;
    let mut avg = vec![0.0f64; nbins];
    let nseg = x.len() / n;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for s in 0..nseg {
        let seg = &x[s * n..(s + 1) * n];
        for i in 0..n {
            buf[i] = Complex64::new(seg[i] * w[i], 0.0);
        }
        fft.process(&mut buf);
        for k in 0..nbins {
            // DC and Nyquist have no mirror partner: halve their doubling.
            let scale = if k == 0 || k == n / 2 { norm / 2.0 } else { norm };
            avg[k] += buf[k].norm_sqr() * scale;
        }
    }
    for v in avg.iter_mut() {
        *v /= nseg as f64;
    }
    Ok(Spectrum {
        power: avg,
        bin_hz: f_s / n as f64,
        f_s,
        window,
        segments: nseg,
    })
}
