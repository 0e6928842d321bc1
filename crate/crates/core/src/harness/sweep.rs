//! Monte-Carlo temperature sweep: (temperature x chip) points run as
//! independent parallel tasks; assembly is order-independent and the
//! result is identical to a serial run because every random draw derives
//! from (seed, chip, temperature) alone. One failed point is recorded and
//! never perturbs any other point.

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::decimator::{decimate, DecimatorConfig};
use crate::error::{Error, Result};
use crate::metrics::{dynamic_metrics, inl_from_sweep, DynamicMetrics, LineFit};
use crate::modulator::{run, Bitstream, StimulusKind, StimulusSpec};
use crate::spectrum::{psd, Spectrum, WindowKind};
use crate::thermal::{build_nonidealities, NonidealitySet};

use super::plan::{ExperimentPlan, SweepOutput};

/// Everything measured at one (temperature, chip) point. Metric fields are
/// `None` when not requested or when the point failed.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub temperature_c: f64,
    pub chip: u32,
    pub snr_db: Option<f64>,
    pub sinad_db: Option<f64>,
    pub enob_bits: Option<f64>,
    pub inl_worst_v: Option<f64>,
    pub supply_current_a: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct Aggregate {
    pub temperature_c: f64,
    pub mean: f64,
    /// mean - 3 sigma (population sigma over chips).
    pub lo_3sigma: f64,
    /// mean + 3 sigma.
    pub hi_3sigma: f64,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Points in grid order: temperature-major, chip-minor.
    pub points: Vec<SweepPoint>,
    pub n_failed: usize,
}

fn point_value(p: &SweepPoint, out: SweepOutput) -> Option<f64> {
    match out {
        SweepOutput::SnrVsT => p.snr_db,
        SweepOutput::SinadVsT => p.sinad_db,
        SweepOutput::InlVsT => p.inl_worst_v,
        SweepOutput::SupplyVsT => p.supply_current_a,
    }
}

impl SweepResult {
    /// Per-temperature mean and +-3 sigma band for one output curve.
    pub fn aggregate(&self, out: SweepOutput) -> Vec<Aggregate> {
        let mut temps: Vec<f64> = Vec::new();
        for p in &self.points {
            if temps.last().map_or(true, |&t| t != p.temperature_c) {
                temps.push(p.temperature_c);
            }
        }
        temps
            .into_iter()
            .filter_map(|t| {
                let vals: Vec<f64> = self
                    .points
                    .iter()
                    .filter(|p| p.temperature_c == t)
                    .filter_map(|p| point_value(p, out))
                    .collect();
                if vals.is_empty() {
                    return None;
                }
                let n = vals.len();
                let mean = vals.iter().sum::<f64>() / n as f64;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                let s = var.sqrt();
                Some(Aggregate {
                    temperature_c: t,
                    mean,
                    lo_3sigma: mean - 3.0 * s,
                    hi_3sigma: mean + 3.0 * s,
                    n,
                })
            })
            .collect()
    }

    /// Emit one `<name>.csv` (temperature_c,chip,value) plus one
    /// `<name>_aggregate.csv` (temperature_c,mean,lo_3sigma,hi_3sigma) per
    /// requested output, and a gnuplot script. The resolved plan is
    /// embedded as comment lines, so (config, seed) determine every byte.
    pub fn write_csvs(&self, dir: &Path, plan: &ExperimentPlan) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let header: Vec<String> = plan
            .to_toml_string()
            .lines()
            .map(|l| format!("# {l}"))
            .collect();
        let mut written = Vec::new();
        for &out in &plan.outputs {
            let path = dir.join(format!("{}.csv", out.name()));
            let mut w = BufWriter::new(File::create(&path)?);
            for l in &header {
                writeln!(w, "{l}")?;
            }
            writeln!(w, "temperature_c,chip,value")?;
            for p in &self.points {
                if let Some(v) = point_value(p, out) {
                    writeln!(w, "{:.3},{},{:.9e}", p.temperature_c, p.chip, v)?;
                }
            }
            drop(w);
            written.push(path);

            let path = dir.join(format!("{}_aggregate.csv", out.name()));
            let mut w = BufWriter::new(File::create(&path)?);
            writeln!(w, "temperature_c,mean,lo_3sigma,hi_3sigma")?;
            for a in self.aggregate(out) {
                writeln!(
                    w,
                    "{:.3},{:.9e},{:.9e},{:.9e}",
                    a.temperature_c, a.mean, a.lo_3sigma, a.hi_3sigma
                )?;
            }
            drop(w);
            written.push(path);
        }
        if !plan.outputs.is_empty() {
            let path = dir.join("plot.gp");
            let mut w = BufWriter::new(File::create(&path)?);
            writeln!(w, "set datafile separator ','")?;
            writeln!(w, "set xlabel 'Temperature [degC]'")?;
            writeln!(w, "set key left bottom")?;
            for &out in &plan.outputs {
                writeln!(w, "set title '{}'", out.name())?;
                writeln!(
                    w,
                    "plot '{0}_aggregate.csv' skip 1 using 1:2 with lines title 'mean', \\",
                    out.name()
                )?;
                writeln!(
                    w,
                    "     '' skip 1 using 1:3 with lines dt 2 title '-3sigma', \\"
                )?;
                writeln!(w, "     '' skip 1 using 1:4 with lines dt 2 title '+3sigma'")?;
                writeln!(w, "pause -1")?;
            }
            drop(w);
            written.push(path);
        }
        Ok(written)
    }
}

fn nonidealities_for(plan: &ExperimentPlan, t: f64, chip: u32) -> Result<NonidealitySet> {
    if plan.ideal {
        Ok(NonidealitySet::ideal())
    } else {
        build_nonidealities(&plan.modulator, &plan.environment(t, chip), &plan.leakage)
    }
}

fn run_bitstream(plan: &ExperimentPlan, t: f64, chip: u32) -> Result<Bitstream> {
    let nid = nonidealities_for(plan, t, chip)?;
    run(
        &plan.modulator,
        &plan.environment(t, chip),
        &plan.stimulus,
        plan.n_samples,
        &nid,
    )
}

fn dynamic_point(plan: &ExperimentPlan, t: f64, chip: u32) -> Result<DynamicMetrics> {
    let bs = run_bitstream(plan, t, chip)?;
    let volts = bs.to_volts(plan.modulator.v_ref);
    let spec = psd(&volts, bs.f_s, WindowKind::Hann, None)?;
    let f_tone = plan
        .stimulus
        .snapped_frequency(plan.modulator.f_s, plan.n_samples);
    dynamic_metrics(&spec, plan.modulator.bandwidth(), Some(f_tone))
}

fn inl_point(plan: &ExperimentPlan, t: f64, chip: u32) -> Result<f64> {
    let nid = nonidealities_for(plan, t, chip)?;
    let env = plan.environment(t, chip);
    let dec_cfg = DecimatorConfig { osr: plan.modulator.osr, ..Default::default() };
    let half = plan.inl_span * plan.modulator.v_ref / 2.0;
    let n = plan.inl_points as usize;
    let mut levels = Vec::with_capacity(n);
    let mut codes = Vec::with_capacity(n);
    for i in 0..n {
        let level = -half + 2.0 * half * i as f64 / (n - 1) as f64;
        let stim = StimulusSpec {
            kind: StimulusKind::Dc,
            dc_level: level,
            ..plan.stimulus
        };
        let bs = run(&plan.modulator, &env, &stim, plan.inl_samples, &nid)?;
        let dec = decimate(&bs, &dec_cfg)?;
        // Skip a few decimated outputs for loop settling.
        let settled = &dec.samples[4.min(dec.samples.len() - 1)..];
        let code = settled.iter().sum::<f64>() / settled.len() as f64 * plan.modulator.v_ref;
        levels.push(level);
        codes.push(code);
    }
    Ok(inl_from_sweep(&levels, &codes, LineFit::LeastSquares)?.inl_worst)
}

fn eval_point(plan: &ExperimentPlan, t: f64, chip: u32) -> SweepPoint {
    let mut p = SweepPoint {
        temperature_c: t,
        chip,
        snr_db: None,
        sinad_db: None,
        enob_bits: None,
        inl_worst_v: None,
        supply_current_a: None,
        error: None,
    };
    let record_err = |e: Error, p: &mut SweepPoint| {
        if p.error.is_none() {
            p.error = Some(e.to_string());
        }
    };
    let want_dyn = plan
        .outputs
        .iter()
        .any(|o| matches!(o, SweepOutput::SnrVsT | SweepOutput::SinadVsT));
    if want_dyn {
        match dynamic_point(plan, t, chip) {
            Ok(d) => {
                p.snr_db = Some(d.snr_db);
                p.sinad_db = Some(d.sinad_db);
                p.enob_bits = Some(d.enob_bits);
            }
            Err(e) => record_err(e, &mut p),
        }
    }
    if plan.outputs.contains(&SweepOutput::InlVsT) {
        match inl_point(plan, t, chip) {
            Ok(v) => p.inl_worst_v = Some(v),
            Err(e) => record_err(e, &mut p),
        }
    }
    if plan.outputs.contains(&SweepOutput::SupplyVsT) {
        match nonidealities_for(plan, t, chip) {
            Ok(nid) => p.supply_current_a = Some(nid.supply_current),
            Err(e) => record_err(e, &mut p),
        }
    }
    p
}

/// Run the whole plan. Deterministic for a fixed plan (including seed);
/// individual point failures are recorded in the corresponding
/// [`SweepPoint`] and do not abort the sweep.
pub fn run_sweep(plan: &ExperimentPlan) -> Result<SweepResult> {
    plan.validate()?;
    let grid: Vec<(f64, u32)> = plan
        .temperatures
        .iter()
        .flat_map(|&t| (0..plan.n_chips).map(move |c| (t, c)))
        .collect();
    let points: Vec<SweepPoint> = grid
        .par_iter()
        .map(|&(t, c)| eval_point(plan, t, c))
        .collect();
    let n_failed = points.iter().filter(|p| p.error.is_some()).count();
    Ok(SweepResult { points, n_failed })
}

/// Spectrum of the simulated bitstream at one grid point (the
/// AC-characterization view: CMFB spur and harmonics included when the
/// corresponding non-idealities are enabled).
pub fn spectrum_at(plan: &ExperimentPlan, temperature_c: f64, chip: u32) -> Result<Spectrum> {
    plan.validate()?;
    if !plan
        .temperatures
        .iter()
        .any(|&t| (t - temperature_c).abs() < 1e-9)
    {
        return Err(Error::Input(format!(
            "temperature {temperature_c} degC is not on the plan grid"
        )));
    }
    if chip >= plan.n_chips {
        return Err(Error::Input(format!(
            "chip {chip} >= n_chips {}",
            plan.n_chips
        )));
    }
    let bs = run_bitstream(plan, temperature_c, chip)?;
    let volts = bs.to_volts(plan.modulator.v_ref);
    psd(&volts, bs.f_s, WindowKind::Hann, None)
}
