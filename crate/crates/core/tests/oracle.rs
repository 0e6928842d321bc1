//! Oracle and property tests: the simulation engine against an
//! independently written brute-force reference, plus randomized invariants
//! of the physics models, the decimator and the metrics pipeline.

mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use sdadc::decimator::{correct_droop, decimate, decimate_samples, DecimatorConfig};
use sdadc::metrics::{dynamic_metrics, enob, schreier_fom};
use sdadc::modulator::{
    run, run_ideal, ModulatorConfig, StimulusKind, StimulusSpec,
};
use sdadc::spectrum::{psd, WindowKind};
use sdadc::thermal::{
    boost_reduction_factor, build_nonidealities, channel_leakage, compensated_leakage,
    junction_leakage, Environment, LeakageParams,
};

/// Bit-exact equivalence against the brute-force reference over 10^4 steps
/// for 10 random configurations (gains, stimulus, rail).
#[test]
fn modulator_bit_exact_vs_reference_over_random_configs() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20240817);
    for trial in 0..10 {
        let a1: f64 = rng.gen_range(0.3..0.7);
        let a2: f64 = rng.gen_range(0.3..0.7);
        let cfg = ModulatorConfig { a1, a2, ..Default::default() };
        let n = 10_000;
        let stim = if trial % 2 == 0 {
            StimulusSpec {
                kind: StimulusKind::Sine,
                amplitude: rng.gen_range(0.2..1.7),
                frequency: rng.gen_range(5.0..140.0),
                dc_level: 0.0,
            }
        } else {
            StimulusSpec {
                kind: StimulusKind::Dc,
                dc_level: rng.gen_range(-0.9..0.9),
                ..Default::default()
            }
        };
        // Rebuild the exact input samples the engine will see.
        let f = stim.snapped_frequency(cfg.f_s, n);
        let input: Vec<f64> = (0..n)
            .map(|i| match stim.kind {
                StimulusKind::Dc => stim.dc_level,
                StimulusKind::Sine => {
                    (stim.amplitude / 2.0)
                        * (2.0 * std::f64::consts::PI * f * i as f64 / cfg.f_s).sin()
                }
            })
            .collect();
        let expect = common::reference_modulator(&input, a1, a2, cfg.v_ref, cfg.sat_rail());
        let got = run_ideal(&cfg, &stim, n).unwrap();
        assert_eq!(got.bits, expect, "trial {trial}: a1={a1} a2={a2}");
    }
}

#[test]
fn decimator_impulse_matches_closed_form_boxcars() {
    for r in [4usize, 8, 16] {
        for order in [1u32, 2, 3] {
            let h = common::boxcar_convolution(r, order as usize);
            let n = r * (order as usize + 8);
            let mut x = vec![0.0; n];
            x[0] = 1.0;
            let cfg = DecimatorConfig { osr: r as u32, order, normalize: false };
            let out = decimate_samples(&x, 1.0, &cfg).unwrap();
            // Output m (after the order-long warm-up drop) samples the
            // convolution at index (m + order)*r + r - 1.
            for (m, &v) in out.samples.iter().enumerate() {
                let idx = (m + order as usize) * r + r - 1;
                let e = if idx < h.len() { h[idx] } else { 0.0 };
                assert!((v - e).abs() < 1e-12, "r={r} order={order} m={m}: {v} vs {e}");
            }
        }
    }
}

/// Decimating first must not change SINAD materially: the tone and all
/// in-band distortion sit far below the sinc^3 nulls.
#[test]
fn decimated_and_raw_sinad_agree_within_half_db() {
    let cfg = ModulatorConfig::default();
    let env = Environment { temperature_c: 25.0, ..Default::default() };
    let nid = build_nonidealities(&cfg, &env, &LeakageParams::default()).unwrap();
    let n = 1 << 19;
    let bs = run(&cfg, &env, &StimulusSpec::default(), n, &nid).unwrap();
    let f_tone = StimulusSpec::default().snapped_frequency(cfg.f_s, n);

    let raw = psd(&bs.to_volts(cfg.v_ref), bs.f_s, WindowKind::Hann, None).unwrap();
    let m_raw = dynamic_metrics(&raw, cfg.bandwidth(), Some(f_tone)).unwrap();

    let dec = decimate(&bs, &DecimatorConfig { osr: cfg.osr, ..Default::default() }).unwrap();
    let volts: Vec<f64> = dec.samples.iter().map(|v| v * cfg.v_ref).collect();
    // Largest power-of-two segment keeps the tone coherent after the
    // decimator's warm-up drop leaves an odd-length record.
    let m = 1usize << volts.len().ilog2();
    let mut spec = psd(&volts, dec.f_s, WindowKind::Hann, Some(m)).unwrap();
    correct_droop(&mut spec, cfg.f_s, &DecimatorConfig { osr: cfg.osr, ..Default::default() })
        .unwrap();
    let m_dec = dynamic_metrics(&spec, cfg.bandwidth(), Some(f_tone)).unwrap();

    assert!(
        (m_raw.sinad_db - m_dec.sinad_db).abs() < 0.5,
        "raw {} vs decimated {}",
        m_raw.sinad_db,
        m_dec.sinad_db
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn junction_leakage_monotone_in_temperature(
        t1 in -40.0f64..250.0,
        dt in 0.1f64..100.0,
    ) {
        let p = LeakageParams::default();
        prop_assert!(junction_leakage(t1 + dt, &p) > junction_leakage(t1, &p));
    }

    #[test]
    fn boost_identity_holds_everywhere(
        t in -40.0f64..260.0,
        v_boost in 0.01f64..0.3,
    ) {
        let p = LeakageParams::default();
        let ratio = channel_leakage(0.0, t, &p) / channel_leakage(-v_boost, t, &p);
        let factor = boost_reduction_factor(v_boost, t, p.n_sub);
        prop_assert!((ratio / factor - 1.0).abs() < 1e-9);
        prop_assert!(factor > 1.0);
    }

    #[test]
    fn compensation_never_amplifies(
        i_leak in 1e-13f64..1e-6,
        delta in -0.99f64..0.99,
    ) {
        prop_assert!(compensated_leakage(i_leak, delta).abs() <= i_leak);
    }

    #[test]
    fn decimator_is_linear(
        seed in 0u64..1000,
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
    ) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..512).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..512).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
        let cfg = DecimatorConfig { osr: 16, ..Default::default() };
        let dx = decimate_samples(&x, 1.0, &cfg).unwrap();
        let dy = decimate_samples(&y, 1.0, &cfg).unwrap();
        let dz = decimate_samples(&z, 1.0, &cfg).unwrap();
        for ((a, b), c) in dx.samples.iter().zip(&dy.samples).zip(&dz.samples) {
            prop_assert!((alpha * a + beta * b - c).abs() < 1e-9);
        }
    }

    #[test]
    fn ideal_loop_tracks_dc_inputs(dc in -0.9f64..0.9) {
        let cfg = ModulatorConfig::default();
        let stim = StimulusSpec { kind: StimulusKind::Dc, dc_level: dc, ..Default::default() };
        let bs = run_ideal(&cfg, &stim, 1 << 14).unwrap();
        let v = bs.mean() * cfg.v_ref;
        prop_assert!((v - dc).abs() < 0.02, "tracked {v} for dc {dc}");
    }

    #[test]
    fn enob_and_fom_are_affine(s in 0.0f64..120.0, ds in 0.1f64..12.04) {
        prop_assert!((enob(s + ds) - enob(s) - ds / 6.02).abs() < 1e-9);
        let f1 = schreier_fom(s, 100.0, 1e-3).unwrap();
        let f2 = schreier_fom(s, 200.0, 1e-3).unwrap();
        prop_assert!((f2 - f1 - 10.0 * 2.0f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn noise_floor_rises_with_frequency_above_band(seed in 0u64..20) {
        // Second-order shaping: power integrated over a high octave beats
        // the band-edge octave by a wide margin for any stimulus phase.
        let cfg = ModulatorConfig::default();
        let stim = StimulusSpec {
            frequency: 20.0 + seed as f64,
            ..Default::default()
        };
        let bs = run_ideal(&cfg, &stim, 1 << 16).unwrap();
        let spec = psd(&bs.to_volts(cfg.v_ref), bs.f_s, WindowKind::Hann, None).unwrap();
        let bw = cfg.bandwidth();
        let low = spec.band_power(2.0 * bw, 4.0 * bw);
        let high = spec.band_power(16.0 * bw, 32.0 * bw);
        prop_assert!(high > 30.0 * low, "high {high} low {low}");
    }
}
