//! `sdadc` command-line interface.
//!
//! Subcommands: `simulate` (one run -> bitstream + metrics), `sweep`
//! (Monte-Carlo temperature sweep from a TOML plan), `analyze` (ingest a
//! bitstream/capture and compute metrics), `emcheck` (electromigration
//! margins), `fom` (Schreier figure-of-merit calculator).
//!
//! Exit codes: 0 success, 1 input/configuration error (or a failed check),
//! 2 partial sweep failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sdadc::decimator::{correct_droop, decimate, DecimatorConfig};
use sdadc::harness::{ingest_capture, run_sweep, spectrum_at, ExperimentPlan};
use sdadc::metrics::{dynamic_metrics, schreier_fom, MetricsReport};
use sdadc::modulator::{run as run_modulator, BitFormat, StimulusKind};
use sdadc::spectrum::{psd, WindowKind};
use sdadc::thermal::{em_check, EmRule, MetalLayer, NonidealitySet};
use sdadc::{Error, Result};

#[derive(Parser)]
#[command(name = "sdadc", version, about = "Delta-sigma ADC behavioral simulator and characterization toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the modulator once and write the bitstream (plus metrics).
    Simulate(SimulateArgs),
    /// Run a Monte-Carlo temperature sweep from a TOML plan.
    Sweep(SweepArgs),
    /// Compute metrics from a bitstream or capture file.
    Analyze(AnalyzeArgs),
    /// Check wire current densities against electromigration rules.
    Emcheck(EmcheckArgs),
    /// Schreier figure-of-merit calculator.
    Fom(FomArgs),
}

#[derive(Args)]
struct PlanArg {
    /// TOML experiment plan; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the plan's master seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl PlanArg {
    fn load(&self) -> Result<ExperimentPlan> {
        let mut plan = match &self.config {
            Some(p) => ExperimentPlan::from_toml_file(p)?,
            None => ExperimentPlan::default(),
        };
        if let Some(s) = self.seed {
            plan.seed = s;
        }
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    plan: PlanArg,
    /// Output bitstream path.
    #[arg(long, short)]
    out: PathBuf,
    /// Die temperature, degC.
    #[arg(long, default_value_t = 25.0)]
    temperature: f64,
    /// Virtual chip index.
    #[arg(long, default_value_t = 0)]
    chip: u32,
    /// Record length in modulator samples.
    #[arg(long)]
    samples: Option<usize>,
    /// Disable all non-idealities.
    #[arg(long)]
    ideal: bool,
    /// Override the sine amplitude (peak-to-peak), V.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Override the sine frequency, Hz.
    #[arg(long)]
    frequency: Option<f64>,
    /// Apply a DC input at this level (V) instead of a sine.
    #[arg(long)]
    dc: Option<f64>,
    /// Sample encoding in the output file.
    #[arg(long, value_enum, default_value_t = FormatArg::Pm1)]
    format: FormatArg,
    /// Skip the metrics report (just write the bitstream).
    #[arg(long)]
    no_metrics: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Pm1,
    #[value(name = "01")]
    ZeroOne,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    plan: PlanArg,
    /// Directory for the emitted CSVs and plot script.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Rectangular,
    Hann,
    Blackman,
}

impl From<WindowArg> for WindowKind {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::Rectangular => WindowKind::Rectangular,
            WindowArg::Hann => WindowKind::Hann,
            WindowArg::Blackman => WindowKind::Blackman,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Bitstream or capture file.
    #[arg(long, short)]
    input: PathBuf,
    /// Sample rate, Hz (required if the file has no #f_s_hz= header).
    #[arg(long)]
    rate: Option<f64>,
    /// Oversampling ratio used for the default bandwidth f_s/(2*osr).
    #[arg(long, default_value_t = 512)]
    osr: u32,
    /// Analysis bandwidth, Hz (defaults to f_s/(2*osr)).
    #[arg(long)]
    bw: Option<f64>,
    /// Full-scale reference, V (bitstream levels map to +-v_ref).
    #[arg(long, default_value_t = 1.8)]
    v_ref: f64,
    /// Pin the tone frequency instead of auto-detecting, Hz.
    #[arg(long)]
    tone: Option<f64>,
    #[arg(long, value_enum, default_value_t = WindowArg::Hann)]
    window: WindowArg,
    /// Decimate (sinc^3 by `osr`) before analysis.
    #[arg(long)]
    decimate: bool,
    /// Write the analysis spectrum to this CSV.
    #[arg(long)]
    spectrum_out: Option<PathBuf>,
    /// Power for the Schreier FoM, W.
    #[arg(long)]
    power: Option<f64>,
}

#[derive(Args)]
struct EmcheckArgs {
    /// Wire current, uA (single-wire mode).
    #[arg(long, required_unless_present = "table", requires = "width_um")]
    current_ua: Option<f64>,
    /// Wire width, um (single-wire mode).
    #[arg(long)]
    width_um: Option<f64>,
    /// Metal layer of the wire.
    #[arg(long, value_enum, default_value_t = LayerArg::Internal)]
    layer: LayerArg,
    /// CSV wire table: name,layer,current_ua,width_um.
    #[arg(long, conflicts_with_all = ["current_ua", "width_um"])]
    table: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayerArg {
    Internal,
    Top,
}

impl From<LayerArg> for EmRule {
    fn from(l: LayerArg) -> Self {
        match l {
            LayerArg::Internal => EmRule::internal(),
            LayerArg::Top => EmRule::top(),
        }
    }
}

#[derive(Args)]
struct FomArgs {
    /// SINAD, dB.
    #[arg(long)]
    sinad: f64,
    /// Signal bandwidth, Hz.
    #[arg(long)]
    bw: f64,
    /// Power consumption, W.
    #[arg(long)]
    power: f64,
}

fn cmd_simulate(a: &SimulateArgs) -> Result<ExitCode> {
    let mut plan = a.plan.load()?;
    if let Some(n) = a.samples {
        plan.n_samples = n;
    }
    if let Some(v) = a.amplitude {
        plan.stimulus.amplitude = v;
    }
    if let Some(f) = a.frequency {
        plan.stimulus.frequency = f;
    }
    if let Some(level) = a.dc {
        plan.stimulus.kind = StimulusKind::Dc;
        plan.stimulus.dc_level = level;
    }
    plan.ideal = plan.ideal || a.ideal;
    plan.validate()?;

    let env = plan.environment(a.temperature, a.chip);
    let nid = if plan.ideal {
        NonidealitySet::ideal()
    } else {
        sdadc::thermal::build_nonidealities(&plan.modulator, &env, &plan.leakage)?
    };
    let bs = run_modulator(&plan.modulator, &env, &plan.stimulus, plan.n_samples, &nid)?;

    // Resolved configuration and seed travel with the data.
    let mut header: Vec<String> = vec![
        format!("temperature_c={}", a.temperature),
        format!("chip={}", a.chip),
        format!("ideal={}", plan.ideal),
    ];
    header.extend(plan.to_toml_string().lines().map(|l| format!("config.{l}")));
    let fmt = match a.format {
        FormatArg::Pm1 => BitFormat::Pm1,
        FormatArg::ZeroOne => BitFormat::ZeroOne,
    };
    bs.write_to(&a.out, fmt, &header)?;
    eprintln!("wrote {} samples to {}", bs.len(), a.out.display());

    if !a.no_metrics && plan.stimulus.kind == StimulusKind::Sine {
        let volts = bs.to_volts(plan.modulator.v_ref);
        let spec = psd(&volts, bs.f_s, WindowKind::Hann, None)?;
        let f_tone = plan.stimulus.snapped_frequency(plan.modulator.f_s, plan.n_samples);
        let d = dynamic_metrics(&spec, plan.modulator.bandwidth(), Some(f_tone))?;
        let report = MetricsReport::from_dynamic(&d, plan.modulator.bandwidth(), None)?;
        print!("{}", report.to_text());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(a: &SweepArgs) -> Result<ExitCode> {
    let plan = a.plan.load()?;
    let result = run_sweep(&plan)?;
    result.write_csvs(&a.out_dir, &plan)?;
    for req in &plan.spectra {
        let spec = spectrum_at(&plan, req.temperature_c, req.chip)?;
        let name = format!("spectrum_t{}_chip{}.csv", req.temperature_c, req.chip);
        let fs_power = plan.modulator.v_ref * plan.modulator.v_ref / 2.0;
        let header: Vec<String> =
            plan.to_toml_string().lines().map(|l| l.to_string()).collect();
        spec.write_csv(&a.out_dir.join(name), fs_power, &header)?;
    }
    for p in result.points.iter().filter(|p| p.error.is_some()) {
        eprintln!(
            "point failed: T={} degC chip={}: {}",
            p.temperature_c,
            p.chip,
            p.error.as_deref().unwrap_or("")
        );
    }
    println!(
        "sweep complete: {} points, {} failed, outputs in {}",
        result.points.len(),
        result.n_failed,
        a.out_dir.display()
    );
    if result.n_failed > 0 {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<ExitCode> {
    let bs = ingest_capture(&a.input, a.rate)?;
    let volts = bs.to_volts(a.v_ref);
    let bw = a.bw.unwrap_or(bs.f_s / (2.0 * a.osr as f64));
    let (samples, rate) = if a.decimate {
        let cfg = DecimatorConfig { osr: a.osr, ..Default::default() };
        let d = decimate(&bs, &cfg)?;
        (d.samples.iter().map(|v| v * a.v_ref).collect(), d.f_s)
    } else {
        (volts, bs.f_s)
    };
    // Largest power-of-two segment: keeps a tone that was coherent in the
    // original (power-of-two) record coherent after decimation, where the
    // warm-up drop leaves an odd length.
    if samples.len() < 16 {
        return Err(Error::Input(format!(
            "record too short to analyze: {} samples",
            samples.len()
        )));
    }
    let n_fft = 1usize << samples.len().ilog2();
    let mut spec = psd(&samples, rate, a.window.into(), Some(n_fft))?;
    if a.decimate {
        // Undo the sinc^3 passband droop so amplitudes match a raw-domain
        // analysis.
        let cfg = DecimatorConfig { osr: a.osr, ..Default::default() };
        correct_droop(&mut spec, bs.f_s, &cfg)?;
    }
    if let Some(out) = &a.spectrum_out {
        let fs_power = a.v_ref * a.v_ref / 2.0;
        spec.write_csv(
            out,
            fs_power,
            &[format!("source={}", a.input.display()), format!("f_s_hz={rate}")],
        )?;
    }
    let d = dynamic_metrics(&spec, bw, a.tone)?;
    let report = MetricsReport::from_dynamic(&d, bw, a.power)?;
    print!("{}", report.to_text());
    println!("f_tone_hz={:.4}", d.f_tone);
    Ok(ExitCode::SUCCESS)
}

fn cmd_emcheck(a: &EmcheckArgs) -> Result<ExitCode> {
    let mut wires: Vec<(String, EmRule, f64, f64)> = Vec::new();
    if let Some(table) = &a.table {
        let text = std::fs::read_to_string(table)?;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') || (lineno == 1 && t.starts_with("name")) {
                continue;
            }
            let f: Vec<&str> = t.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected name,layer,current_ua,width_um; found {} fields", f.len()),
                });
            }
            let rule = match f[1] {
                "internal" => EmRule::internal(),
                "top" => EmRule::top(),
                other => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("unknown layer '{other}' (expected internal|top)"),
                    })
                }
            };
            let cur: f64 = f[2].parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad current '{}'", f[2]),
            })?;
            let wid: f64 = f[3].parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad width '{}'", f[3]),
            })?;
            wires.push((f[0].to_string(), rule, cur, wid));
        }
        if wires.is_empty() {
            return Err(Error::Input("wire table contains no wires".into()));
        }
    } else {
        let cur = a.current_ua.expect("enforced by clap");
        let wid = a.width_um.expect("enforced by clap");
        wires.push(("wire".into(), a.layer.into(), cur, wid));
    }

    let mut all_pass = true;
    println!("name,layer,density_ua_per_um,margin,pass");
    for (name, rule, cur_ua, wid) in &wires {
        let check = em_check(cur_ua * 1e-6, *wid, rule)?;
        let layer = match rule.layer {
            MetalLayer::Internal => "internal",
            MetalLayer::Top => "top",
        };
        println!(
            "{},{},{:.4},{:.4},{}",
            name, layer, check.density, check.margin,
            if check.pass { "PASS" } else { "FAIL" }
        );
        all_pass &= check.pass;
    }
    if all_pass {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn cmd_fom(a: &FomArgs) -> Result<ExitCode> {
    let fom = schreier_fom(a.sinad, a.bw, a.power)?;
    println!("fom_schreier_db={fom:.2}");
    println!("enob_bits={:.4}", sdadc::metrics::enob(a.sinad));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.cmd {
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Analyze(a) => cmd_analyze(a),
        Cmd::Emcheck(a) => cmd_emcheck(a),
        Cmd::Fom(a) => cmd_fom(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
