use std::f64::consts::PI;

use proptest::prelude::*;

use rdob_core::analysis::{hysteresis_loop, shoelace};
use rdob_core::models::{piezo_plant, BoucWenParams, HysteresisModel, NoiseSource};
use rdob_core::numlin::log_grid;

const DT: f64 = 1e-4;

fn drive(freq_hz: f64, amplitude: f64, periods: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = HysteresisModel::new(BoucWenParams::default()).unwrap();
    let n = (periods as f64 / freq_hz / DT).round() as usize;
    let mut us = Vec::with_capacity(n);
    let mut ds = Vec::with_capacity(n);
    let mut prev = 0.0;
    for k in 0..n {
        let u = amplitude * (2.0 * PI * freq_hz * k as f64 * DT).sin();
        ds.push(m.step(u, u - prev, DT));
        us.push(u);
        prev = u;
    }
    (us, ds)
}

#[test]
fn rest_input_gives_no_disturbance() {
    let mut m = HysteresisModel::new(BoucWenParams::default()).unwrap();
    assert!((0..100_000).all(|_| m.step(0.0, 0.0, DT) == 0.0));
}

#[test]
fn sinusoid_traces_a_loop_with_area() {
    let (u, d) = drive(10.0, 5.0, 6);
    let l = hysteresis_loop(&u, &d).unwrap();
    assert!(l.area > 0.0);
    // trapezoid loop integral of d du over the last full cycle
    let mut pts = l.points.clone();
    pts.push(pts[0]);
    let trap: f64 = pts
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum();
    assert!((trap.abs() - shoelace(&l.points)).abs() <= 1e-9 * trap.abs());
    assert!(trap.abs() > 1e-3);
}

#[test]
fn loop_depends_on_drive_rate() {
    let (u10, d10) = drive(10.0, 5.0, 6);
    let (u50, d50) = drive(50.0, 5.0, 30);
    let a10 = hysteresis_loop(&u10, &d10).unwrap().area;
    let a50 = hysteresis_loop(&u50, &d50).unwrap().area;
    assert!((a10 - a50).abs() > 0.05 * a10.max(a50), "areas {a10} {a50}");
}

#[test]
fn loop_is_asymmetric() {
    let (_, d) = drive(10.0, 5.0, 6);
    let tail = &d[d.len() / 2..];
    let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!((hi + lo).abs() > 1e-3 * (hi - lo), "max {hi} min {lo}");
}

#[test]
fn reset_returns_to_rest() {
    let mut m = HysteresisModel::new(BoucWenParams::default()).unwrap();
    m.step(2.0, 2.0, DT);
    assert!(m.state() != 0.0);
    m.reset();
    assert_eq!(m.state(), 0.0);
}

#[test]
fn unbounded_parameters_rejected() {
    for p in [
        BoucWenParams {
            beta: 0.0,
            ..Default::default()
        },
        BoucWenParams {
            beta: 0.001,
            gamma_neg: -0.002,
            ..Default::default()
        },
        BoucWenParams {
            tau: 0.0,
            ..Default::default()
        },
        BoucWenParams {
            a: f64::NAN,
            ..Default::default()
        },
    ] {
        assert!(HysteresisModel::new(p).is_err());
    }
}

#[test]
fn silent_noise_source() {
    let mut n = NoiseSource::new(11, 0.0, None).unwrap();
    assert!((0..1000).all(|_| n.sample() == 0.0));
}

#[test]
fn noise_mean_is_near_zero() {
    let sigma = 0.3;
    let mut n = NoiseSource::new(5, sigma, None).unwrap();
    let count = 1_000_000;
    let mean = (0..count).map(|_| n.sample()).sum::<f64>() / count as f64;
    assert!(mean.abs() <= 4.0 * sigma / 1e3, "mean {mean}");
}

#[test]
fn shaped_noise_keeps_its_variance() {
    let sigma = 2.0;
    let mut n = NoiseSource::new(9, sigma, Some((2.0 * PI * 500.0, 1e-4))).unwrap();
    let xs: Vec<f64> = (0..400_000).map(|_| n.sample()).collect();
    let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    assert!((var.sqrt() / sigma - 1.0).abs() < 0.03, "std {}", var.sqrt());
    let lag1 = xs.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (xs.len() - 1) as f64 / var;
    assert!(lag1 > 0.5, "lag-one correlation {lag1}");
}

#[test]
fn same_seed_same_noise() {
    let mut a = NoiseSource::new(42, 1.0, None).unwrap();
    let mut b = NoiseSource::new(42, 1.0, None).unwrap();
    let mut c = NoiseSource::new(43, 1.0, None).unwrap();
    let xa: Vec<f64> = (0..1000).map(|_| a.sample()).collect();
    let xb: Vec<f64> = (0..1000).map(|_| b.sample()).collect();
    let xc: Vec<f64> = (0..1000).map(|_| c.sample()).collect();
    assert_eq!(xa, xb);
    assert_ne!(xa, xc);
}

#[test]
fn invalid_noise_settings_rejected() {
    assert!(NoiseSource::new(1, -1.0, None).is_err());
    assert!(NoiseSource::new(1, 1.0, Some((0.0, 1e-4))).is_err());
}

#[test]
fn piezo_plant_dc_gain() {
    let want = 5.8e4 * 1.934e7 / (1.421e7 * 3.948e7);
    assert!((piezo_plant().dc_gain().unwrap() / want - 1.0).abs() < 1e-14);
}

#[test]
fn piezo_plant_resonances() {
    let p = piezo_plant();
    let g = log_grid(1e3, 1e4, 2000).unwrap();
    let mags: Vec<f64> = g.iter().map(|w| p.eval(*w).unwrap().norm()).collect();
    let peaks: Vec<f64> = (1..g.len() - 1)
        .filter(|&i| mags[i] > mags[i - 1] && mags[i] > mags[i + 1])
        .map(|i| g[i])
        .collect();
    assert!(
        peaks.iter().any(|w| (w / 1.421e7f64.sqrt() - 1.0).abs() < 0.06),
        "{peaks:?}"
    );
    assert!(
        peaks.iter().any(|w| (w / 3.948e7f64.sqrt() - 1.0).abs() < 0.06),
        "{peaks:?}"
    );
}

#[test]
fn piezo_plant_is_stable() {
    let p = piezo_plant();
    assert!(p.poles().unwrap().iter().all(|z| z.re < 0.0));
    assert!(p.is_stable().unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn hysteresis_output_is_bounded(seed in any::<u64>(), amp in 0.1f64..200.0) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = HysteresisModel::new(BoucWenParams::default()).unwrap();
        let bound = m.bound() * BoucWenParams::default().gain.abs();
        let mut prev = 0.0;
        for _ in 0..1_000_000 {
            let u = rng.gen_range(-amp..=amp);
            let d = m.step(u, u - prev, DT);
            prop_assert!(d.abs() <= bound);
            prev = u;
        }
    }

    #[test]
    fn hysteresis_replay_is_exact(inputs in prop::collection::vec(-50.0f64..50.0, 1..400)) {
        let run = || {
            let mut m = HysteresisModel::new(BoucWenParams::default()).unwrap();
            let mut prev = 0.0;
            inputs.iter().map(|u| {
                let d = m.step(*u, u - prev, DT);
                prev = *u;
                d
            }).collect::<Vec<f64>>()
        };
        prop_assert_eq!(run(), run());
    }
}
