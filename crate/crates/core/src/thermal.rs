//! Temperature-dependent non-ideality physics: junction leakage,
//! dummy-transistor compensation residuals, subthreshold channel leakage
//! with clock boosting, kT/C noise, the CMFB disturbance tone, a supply
//! current estimate and the electromigration sizing check.
//!
//! All functions are pure in (environment, parameters); per-chip random
//! draws derive from `seed + chip index` so parallel and serial execution
//! agree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modulator::ModulatorConfig;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;

pub fn celsius_to_kelvin(t_c: f64) -> f64 {
    t_c + 273.15
}

/// Simulation environment for one (chip, temperature) point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Environment {
    /// Die temperature, degC.
    pub temperature_c: f64,
    /// Master seed; together with `chip` and `temperature_c` it fully
    /// determines every random draw.
    pub seed: u64,
    /// Relative dummy/active mismatch sigma for the Monte-Carlo draws.
    pub sigma_mismatch: f64,
    /// Clock-boost magnitude applied to the off-state switch gate drive, V.
    pub v_boost: f64,
    /// Monte-Carlo population size.
    pub n_chips: u32,
    /// Index of the virtual chip this environment describes.
    pub chip: u32,
}

impl Default for Environment {
    fn default() -> Self {
        Self {
            temperature_c: 25.0,
            seed: 1,
            sigma_mismatch: 0.01,
            v_boost: 0.2,
            n_chips: 5,
            chip: 0,
        }
    }
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        if !(-55.0..=350.0).contains(&self.temperature_c) {
            return Err(Error::Config(format!(
                "temperature {} degC outside [-55, 350]",
                self.temperature_c
            )));
        }
        if self.sigma_mismatch < 0.0 {
            return Err(Error::Config("sigma_mismatch must be >= 0".into()));
        }
        if !(0.0..=0.3).contains(&self.v_boost) {
            // 300 mV is the gate-rating ceiling for the boosted drive.
            return Err(Error::Config(format!(
                "v_boost {} V outside [0, 0.3]",
                self.v_boost
            )));
        }
        Ok(())
    }

    /// ChaCha stream id for the static per-chip parameter draws.
    pub fn chip_stream(&self) -> u64 {
        (1u64 << 61) | self.chip as u64
    }

    /// ChaCha stream id for the per-run noise samples; distinct per
    /// (chip, temperature) so sweep points are independent.
    pub fn noise_stream(&self) -> u64 {
        let t_key = (self.temperature_c * 1000.0).round() as i64 as u32;
        (1u64 << 62) | ((self.chip as u64) << 32) | t_key as u64
    }
}

/// Leakage, noise and distortion model parameters. Absolute magnitudes are
/// calibrated defaults (the silicon values are not public); the temperature
/// laws are the modeled physics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeakageParams {
    /// Junction leakage at the reference temperature, A.
    pub i_ref: f64,
    /// Reference temperature, degC.
    pub t_ref: f64,
    /// Temperature increment that doubles the junction leakage, K.
    pub t_double: f64,
    /// Channel leakage prefactor, A.
    pub i0_ch: f64,
    /// Subthreshold ideality factor (1..2).
    pub n_sub: f64,
    /// Threshold voltage at `t_ref`, V.
    pub v_th0: f64,
    /// Linear threshold tempco, V/K (threshold drops by `tc_vth` per kelvin).
    pub tc_vth: f64,
    /// Excess factor on the first-stage sampled noise over bare sqrt(kT/C1),
    /// covering amplifier and setup noise. Calibrated against the measured
    /// SNR level.
    pub noise_factor: f64,
    /// Input cubic distortion coefficient at `t_ref` (dimensionless).
    /// Calibrated against the measured SINAD level.
    pub distortion_cubic_ref: f64,
    /// Temperature increment that doubles the cubic coefficient, K.
    pub t_double_distortion: f64,
    /// Comparator offset sigma across chips, V.
    pub sigma_comparator_offset: f64,
    /// CMFB disturbance amplitude injected input-referred, V.
    pub cmfb_amplitude: f64,
    /// Static bias current on the 1.8 V line, A.
    pub i_static: f64,
    /// Optional phenomenological collapse: above this temperature the dummy
    /// compensation is disabled (mismatch delta forced to 1), emulating the
    /// measured performance collapse just past the rated maximum. Off by
    /// default.
    pub collapse_above_c: Option<f64>,
}

impl Default for LeakageParams {
    fn default() -> Self {
        Self {
            i_ref: 10e-12,
            t_ref: 25.0,
            t_double: 12.0,
            i0_ch: 1e-6,
            n_sub: 1.4,
            v_th0: 0.45,
            tc_vth: 1e-3,
            noise_factor: 10.7,
            distortion_cubic_ref: 9.76e-4,
            t_double_distortion: 125.0,
            sigma_comparator_offset: 2e-3,
            cmfb_amplitude: 5e-4,
            i_static: 24.4e-6,
            collapse_above_c: None,
        }
    }
}

impl LeakageParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.i_ref > 0.0 && self.t_double > 0.0 && self.i0_ch > 0.0) {
            return Err(Error::Config("leakage magnitudes must be positive".into()));
        }
        if !(1.0..=2.0).contains(&self.n_sub) {
            return Err(Error::Config(format!(
                "n_sub must be within [1, 2], got {}",
                self.n_sub
            )));
        }
        if !(self.v_th0 > 0.0 && self.tc_vth > 0.0) {
            return Err(Error::Config("threshold parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Evaluated non-idealities for one (chip, temperature) point.
/// `droop*` and `sigma_ktc_*` are state-referred per-step values (the
/// capacitor-ratio scaling is already applied where it belongs).
#[derive(Debug, Clone, PartialEq)]
pub struct NonidealitySet {
    /// First-stage integrator voltage droop per hold phase, V (signed).
    pub droop1: f64,
    /// Second-stage droop per hold phase, V (signed).
    pub droop2: f64,
    /// First-stage per-step noise sigma at the state, V rms.
    pub sigma_ktc_1: f64,
    /// Second-stage per-step noise sigma at the state, V rms.
    pub sigma_ktc_2: f64,
    /// Comparator offset, V.
    pub comparator_offset: f64,
    /// Input cubic distortion coefficient (dimensionless).
    pub input_cubic: f64,
    /// CMFB disturbance tone, if enabled.
    pub cmfb_tone: Option<CmfbTone>,
    /// Estimated supply current, A.
    pub supply_current: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmfbTone {
    pub frequency: f64,
    pub amplitude: f64,
}

impl NonidealitySet {
    /// All-zero non-idealities: the modulator behaves as the bare
    /// difference equations.
    pub fn ideal() -> Self {
        Self {
            droop1: 0.0,
            droop2: 0.0,
            sigma_ktc_1: 0.0,
            sigma_ktc_2: 0.0,
            comparator_offset: 0.0,
            input_cubic: 0.0,
            cmfb_tone: None,
            supply_current: 0.0,
        }
    }

    pub fn is_ideal(&self) -> bool {
        *self == Self::ideal()
    }
}

/// Junction (p-n reverse) leakage: doubles every `t_double` kelvin.
pub fn junction_leakage(t_c: f64, p: &LeakageParams) -> f64 {
    p.i_ref * ((t_c - p.t_ref) / p.t_double).exp2()
}

/// Residual after dummy-transistor cancellation; `delta` is the per-chip
/// relative dummy/active mismatch (signed).
pub fn compensated_leakage(i_leak: f64, delta: f64) -> f64 {
    i_leak * delta
}

/// Residual at the input-pair common node when the compensation current is
/// collected by a single dummy and mirrored with a ratio of four;
/// `delta_mirror` is the per-chip mirror gain error.
pub fn input_pair_residual(i_leak: f64, delta_mirror: f64) -> f64 {
    4.0 * i_leak * delta_mirror
}

/// Subthreshold swing S = n * (k T / q) * ln 10, V/decade.
pub fn subthreshold_swing(t_c: f64, n_sub: f64) -> f64 {
    let t_k = celsius_to_kelvin(t_c);
    n_sub * BOLTZMANN * t_k / ELEMENTARY_CHARGE * std::f64::consts::LN_10
}

/// Threshold voltage with its linear tempco.
pub fn threshold_voltage(t_c: f64, p: &LeakageParams) -> f64 {
    p.v_th0 - p.tc_vth * (t_c - p.t_ref)
}

/// Off-state channel leakage, exponential in the overdrive:
/// `I = i0_ch * 10^((v_gs_off - v_th(T)) / S(T))`.
pub fn channel_leakage(v_gs_off: f64, t_c: f64, p: &LeakageParams) -> f64 {
    let s = subthreshold_swing(t_c, p.n_sub);
    p.i0_ch * 10f64.powf((v_gs_off - threshold_voltage(t_c, p)) / s)
}

/// Channel-leakage reduction factor achieved by shifting the off-state gate
/// drive by `-v_boost`: exactly `10^(v_boost / S(T))`.
pub fn boost_reduction_factor(v_boost: f64, t_c: f64, n_sub: f64) -> f64 {
    10f64.powf(v_boost / subthreshold_swing(t_c, n_sub))
}

/// kT/C sampled-noise sigma, V rms.
pub fn ktc_sigma(t_c: f64, c: f64) -> f64 {
    (BOLTZMANN * celsius_to_kelvin(t_c) / c).sqrt()
}

/// Electromigration rule for one metal layer.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmRule {
    pub layer: MetalLayer,
    /// Current-density threshold, uA/um.
    pub threshold: f64,
    /// Required margin factor below the threshold.
    pub margin_required: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetalLayer {
    Internal,
    Top,
}

impl Default for EmRule {
    fn default() -> Self {
        EmRule::internal()
    }
}

impl EmRule {
    pub fn internal() -> Self {
        Self { layer: MetalLayer::Internal, threshold: 45.0, margin_required: 10.0 }
    }

    pub fn top() -> Self {
        Self { layer: MetalLayer::Top, threshold: 75.0, margin_required: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmCheck {
    /// Current density, uA/um.
    pub density: f64,
    /// threshold / density; infinite for zero current.
    pub margin: f64,
    pub pass: bool,
}

/// Check a wire's current density against an electromigration rule.
/// `current` in A, `width_um` in um.
pub fn em_check(current: f64, width_um: f64, rule: &EmRule) -> Result<EmCheck> {
    if !(width_um > 0.0) {
        return Err(Error::Config(format!("wire width must be > 0, got {width_um}")));
    }
    let density = current.abs() * 1e6 / width_um; // uA/um
    let margin = if density == 0.0 { f64::INFINITY } else { rule.threshold / density };
    Ok(EmCheck { density, margin, pass: margin >= rule.margin_required })
}

/// Per-chip static mismatch draws (process variation, drawn once per
/// virtual chip from the seeded generator).
#[derive(Debug, Clone, Copy)]
pub struct ChipDraws {
    pub delta_junction_1: f64,
    pub delta_junction_2: f64,
    pub delta_mirror: f64,
    pub comparator_offset_z: f64,
}

pub fn chip_draws(env: &Environment) -> ChipDraws {
    let mut rng = ChaCha8Rng::seed_from_u64(env.seed);
    rng.set_stream(env.chip_stream());
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    ChipDraws {
        delta_junction_1: env.sigma_mismatch * normal.sample(&mut rng),
        delta_junction_2: env.sigma_mismatch * normal.sample(&mut rng),
        delta_mirror: env.sigma_mismatch * normal.sample(&mut rng),
        comparator_offset_z: normal.sample(&mut rng),
    }
}

/// Compose the physical models into the per-step non-idealities for one
/// (chip, temperature) point. Deterministic given `env.seed`.
pub fn build_nonidealities(
    cfg: &ModulatorConfig,
    env: &Environment,
    p: &LeakageParams,
) -> Result<NonidealitySet> {
    env.validate()?;
    p.validate()?;
    let t = env.temperature_c;
    let draws = chip_draws(env);

    let collapsed = p.collapse_above_c.map_or(false, |tc| t > tc);
    let (d1, d2, dm) = if collapsed {
        // Compensation lost: the full junction leakage hits the nodes.
        (1.0, 1.0, 0.25)
    } else {
        (draws.delta_junction_1, draws.delta_junction_2, draws.delta_mirror)
    };

    let i_j = junction_leakage(t, p);
    let i_ch = channel_leakage(-env.v_boost, t, p);
    let residual1 = compensated_leakage(i_j, d1) + input_pair_residual(i_j, dm) + i_ch;
    let residual2 = compensated_leakage(i_j, d2) + i_ch;

    // Droop per hold phase: dV = I * T_hold / C with T_hold = 1/(2 f_s).
    let t_hold = 1.0 / (2.0 * cfg.f_s);
    let droop1 = residual1 * t_hold / cfg.c1;
    let droop2 = residual2 * t_hold / cfg.c2;
    if droop1.abs() >= cfg.v_ref || droop2.abs() >= cfg.v_ref {
        return Err(Error::Config(format!(
            "leakage droop exceeds v_ref (droop1={droop1:.3e} V, droop2={droop2:.3e} V)"
        )));
    }

    // Sampled noise, state-referred: the input-referred sigma scales by the
    // sampling/integrating capacitor ratio (the loop gain).
    let sigma_ktc_1 = cfg.a1 * p.noise_factor * ktc_sigma(t, cfg.c1);
    let sigma_ktc_2 = cfg.a2 * ktc_sigma(t, cfg.c2);

    let input_cubic =
        p.distortion_cubic_ref * ((t - p.t_ref) / p.t_double_distortion).exp2();

    let supply_current =
        p.i_static + residual1.abs() + residual2.abs();

    Ok(NonidealitySet {
        droop1,
        droop2,
        sigma_ktc_1,
        sigma_ktc_2,
        comparator_offset: p.sigma_comparator_offset * draws.comparator_offset_z,
        input_cubic,
        cmfb_tone: Some(CmfbTone {
            frequency: cfg.f_s / 512.0,
            amplitude: p.cmfb_amplitude,
        }),
        supply_current,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p() -> LeakageParams {
        LeakageParams::default()
    }

    #[test]
    fn junction_leakage_reference_and_doubling() {
        let p = p();
        assert_relative_eq!(junction_leakage(p.t_ref, &p), p.i_ref);
        assert_relative_eq!(junction_leakage(p.t_ref + p.t_double, &p), 2.0 * p.i_ref);
    }

    #[test]
    fn junction_leakage_spans_four_decades_over_temperature() {
        let p = p();
        let decades = (junction_leakage(250.0, &p) / junction_leakage(25.0, &p)).log10();
        assert!(decades >= 4.0, "got {decades} decades");
    }

    #[test]
    fn compensation_examples() {
        assert_eq!(compensated_leakage(1e-9, 0.0), 0.0);
        assert_relative_eq!(compensated_leakage(1e-9, 0.01), 10e-12);
        assert_eq!(input_pair_residual(1e-9, 0.0), 0.0);
        assert_relative_eq!(input_pair_residual(1e-9, 0.02), 80e-12);
    }

    #[test]
    fn mirror_residual_grows_four_times_faster() {
        let i = 3.3e-9;
        let d = 1e-3;
        assert_relative_eq!(input_pair_residual(i, d) / compensated_leakage(i, d), 4.0);
    }

    #[test]
    fn subthreshold_swing_known_values() {
        assert_relative_eq!(subthreshold_swing(26.85, 1.0), 59.5e-3, max_relative = 1e-3);
        assert_relative_eq!(subthreshold_swing(26.85, 1.4), 83.4e-3, max_relative = 1e-3);
        assert_relative_eq!(subthreshold_swing(250.0, 1.4), 145.3e-3, max_relative = 1e-3);
    }

    #[test]
    fn boost_factor_identity_and_magnitude() {
        let p = p();
        let t = 250.0;
        let f = channel_leakage(0.0, t, &p) / channel_leakage(-0.2, t, &p);
        assert_relative_eq!(f, boost_reduction_factor(0.2, t, p.n_sub), max_relative = 1e-12);
        assert!(f > 20.0, "200 mV boost factor = {f}");
        // Halving the boost takes the square root of the factor.
        let h = boost_reduction_factor(0.1, t, p.n_sub);
        assert_relative_eq!(h * h, f, max_relative = 1e-9);
        // No boost, no change.
        assert_relative_eq!(boost_reduction_factor(0.0, t, p.n_sub), 1.0);
    }

    #[test]
    fn ktc_sigma_known_values() {
        assert_relative_eq!(ktc_sigma(26.85, 1e-12), 64.4e-6, max_relative = 1e-3);
        assert_relative_eq!(ktc_sigma(250.0, 1e-12), 85.0e-6, max_relative = 1e-3);
        // Quadrupling C halves the sigma.
        assert_relative_eq!(ktc_sigma(25.0, 4e-12), ktc_sigma(25.0, 1e-12) / 2.0);
    }

    #[test]
    fn em_check_examples() {
        // 1 uA on 0.8 um top metal: density 1.25, margin 60, pass.
        let c = em_check(1e-6, 0.8, &EmRule::top()).unwrap();
        assert_relative_eq!(c.density, 1.25);
        assert_relative_eq!(c.margin, 60.0);
        assert!(c.pass);
        // 4 uA on 0.8 um internal metal: margin 9, fail.
        let c = em_check(4e-6, 0.8, &EmRule::internal()).unwrap();
        assert_relative_eq!(c.margin, 9.0);
        assert!(!c.pass);
        // Zero current: infinite margin, pass.
        let c = em_check(0.0, 0.8, &EmRule::internal()).unwrap();
        assert!(c.margin.is_infinite() && c.pass);
        // Bad width is a configuration error.
        assert!(em_check(1e-6, 0.0, &EmRule::top()).is_err());
    }

    #[test]
    fn droop_formula_instantiation() {
        let cfg = ModulatorConfig::default();
        let env = Environment { temperature_c: 250.0, ..Default::default() };
        let p = p();
        let nid = build_nonidealities(&cfg, &env, &p).unwrap();
        let draws = chip_draws(&env);
        let i_res = compensated_leakage(junction_leakage(250.0, &p), draws.delta_junction_1)
            + input_pair_residual(junction_leakage(250.0, &p), draws.delta_mirror)
            + channel_leakage(-env.v_boost, 250.0, &p);
        assert_relative_eq!(nid.droop1, i_res * (1.0 / (2.0 * 150e3)) / 10e-12);
    }

    #[test]
    fn cold_droop_negligible_against_hot_droop() {
        let cfg = ModulatorConfig::default();
        let p = p();
        let cold = build_nonidealities(
            &cfg,
            &Environment { temperature_c: -40.0, ..Default::default() },
            &p,
        )
        .unwrap();
        let hot = build_nonidealities(
            &cfg,
            &Environment { temperature_c: 250.0, ..Default::default() },
            &p,
        )
        .unwrap();
        assert!(cold.droop1.abs() < 0.01 * hot.droop1.abs());
    }

    #[test]
    fn supply_current_is_static_bias_at_room_temperature() {
        let cfg = ModulatorConfig::default();
        let p = p();
        let nid = build_nonidealities(
            &cfg,
            &Environment { temperature_c: 25.0, ..Default::default() },
            &p,
        )
        .unwrap();
        assert_relative_eq!(nid.supply_current, p.i_static, max_relative = 1e-3);
    }

    #[test]
    fn environment_validation() {
        let mut env = Environment::default();
        env.temperature_c = 400.0;
        assert!(env.validate().is_err());
        let mut env = Environment::default();
        env.v_boost = 0.5;
        assert!(env.validate().is_err());
    }

    #[test]
    fn chip_draws_deterministic_and_distinct_per_chip() {
        let e0 = Environment { chip: 0, ..Default::default() };
        let e1 = Environment { chip: 1, ..Default::default() };
        let a = chip_draws(&e0);
        let b = chip_draws(&e0);
        assert_eq!(a.delta_junction_1, b.delta_junction_1);
        assert_ne!(chip_draws(&e1).delta_junction_1, a.delta_junction_1);
    }

    #[test]
    fn collapse_switch_disables_compensation() {
        let cfg = ModulatorConfig::default();
        let mut p = p();
        // Scale leakages down so the collapsed droop stays within range and
        // the junction term (the one that collapses) dominates the channel
        // term.
        p.i_ref = 1e-15;
        p.i0_ch = 1e-18;
        p.collapse_above_c = Some(255.0);
        let below = build_nonidealities(
            &cfg,
            &Environment { temperature_c: 250.0, ..Default::default() },
            &p,
        )
        .unwrap();
        let above = build_nonidealities(
            &cfg,
            &Environment { temperature_c: 260.0, ..Default::default() },
            &p,
        )
        .unwrap();
        assert!(above.droop1.abs() > 10.0 * below.droop1.abs());
    }

    #[test]
    fn unbiased_cancellation_over_population() {
        // mean(residual)/i_leak -> 0 as the population grows.
        let i_leak = 1e-9;
        let n = 4000;
        let mut acc = 0.0;
        for chip in 0..n {
            let env = Environment { chip, ..Default::default() };
            acc += compensated_leakage(i_leak, chip_draws(&env).delta_junction_1);
        }
        let rel_bias = (acc / n as f64) / i_leak;
        assert!(rel_bias.abs() < 3.0 * 0.01 / (n as f64).sqrt() * 3.0, "bias {rel_bias}");
    }
}
