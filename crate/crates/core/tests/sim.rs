mod common;

use common::{clegg_output, rms, rms_diff};
use rdob_core::arch::{preset, Architecture, DesignPreset};
use rdob_core::models::{BoucWenParams, HysteresisModel, NoiseSource};
use rdob_core::numlin::Mat;
use rdob_core::reset::ResetElement;
use rdob_core::sim::{
    run_scenario, run_scenario_spec, simulate, simulate_model, simulate_open_loop, LoopModel, Reference, ScenarioSpec,
    SimConfig, SimMode,
};
use rdob_core::stab::AugmentedLoop;
use rdob_core::Error;

fn config(p: &DesignPreset, arch: Architecture, duration: f64) -> SimConfig {
    let mode = if p.sample_time.is_some() {
        SimMode::Discrete
    } else {
        SimMode::Continuous
    };
    let spec = ScenarioSpec {
        mode,
        ..ScenarioSpec::tracking(p.clone(), 1)
    };
    SimConfig {
        dt: spec.resolve_dt().unwrap(),
        duration,
        mode,
        reference: Reference {
            amplitude: 1.0,
            frequency_hz: 30.0,
        },
        architecture: arch,
    }
}

#[test]
fn zero_input_stays_at_rest() {
    for name in ["example-sec2", "piezo-sec5-rdob2"] {
        let p = preset(name).unwrap();
        for arch in Architecture::ALL {
            let mut cfg = config(&p, arch, 0.05);
            cfg.reference.amplitude = 0.0;
            let tr = simulate(&cfg, &p, None, None).unwrap();
            assert!(tr.y.iter().all(|v| *v == 0.0), "{name} {arch}");
            assert!(tr.resets.is_empty());
        }
    }
}

#[test]
fn clegg_integrator_matches_closed_form() {
    let lp = AugmentedLoop::from_element(&ResetElement::clegg()).unwrap();
    for w in [1.0, 40.0] {
        let spp = 1000;
        let tr = simulate_open_loop(&lp, w, 1.0, 5, spp).unwrap();
        let exact: Vec<f64> = tr.t.iter().map(|t| clegg_output(w, *t)).collect();
        let err = rms_diff(&tr.y, &exact) / rms(&exact);
        assert!(err <= 0.005, "at {w}: {err}");
    }
}

#[test]
fn identity_reset_reproduces_linear_loop() {
    for name in ["example-sec2", "piezo-sec5-rdob1"] {
        let p = preset(name).unwrap();
        for arch in [Architecture::Rdob1, Architecture::Rdob2] {
            let cfg = config(&p, arch, 0.1);
            let model = LoopModel::from_preset(&p, arch, cfg.mode, cfg.dt).unwrap();
            let n = model.reset_block().unwrap().reset.nrows();
            let frozen = model.with_reset_matrix(Mat::identity(n, n)).unwrap();
            let lin = model.linearized().unwrap();
            let mut h1 = HysteresisModel::new(BoucWenParams::default()).unwrap();
            let mut h2 = HysteresisModel::new(BoucWenParams::default()).unwrap();
            let a = simulate_model(&frozen, &cfg, Some(&mut h1), None).unwrap();
            let b = simulate_model(&lin, &cfg, Some(&mut h2), None).unwrap();
            let err = rms_diff(&a.y, &b.y) / rms(&b.y);
            assert!(err <= 1e-9, "{name} {arch}: {err}");
        }
    }
}

#[test]
fn halving_the_step_changes_little() {
    let p = preset("example-sec2").unwrap();
    for arch in Architecture::ALL {
        let cfg = config(&p, arch, 0.1);
        let fine = SimConfig {
            dt: cfg.dt / 2.0,
            ..cfg.clone()
        };
        let a = simulate(&cfg, &p, None, None).unwrap();
        let b = simulate(&fine, &p, None, None).unwrap();
        let coarse_of_fine: Vec<f64> = b.y.iter().step_by(2).copied().collect();
        let err = rms_diff(&a.y, &coarse_of_fine[..a.y.len()]) / rms(&a.y);
        assert!(err < 0.01, "{arch}: {err}");
    }
}

#[test]
fn reset_instants_increase() {
    let p = preset("piezo-sec5-rdob1").unwrap();
    let cfg = config(&p, Architecture::Rdob1, 0.3);
    let mut noise = NoiseSource::new(4, 1e-3, None).unwrap();
    let tr = simulate(&cfg, &p, None, Some(&mut noise)).unwrap();
    assert!(!tr.resets.is_empty());
    assert!(tr.resets.windows(2).all(|w| w[1] > w[0]));
    assert!(tr.resets.iter().all(|t| *t >= 0.0 && *t < 0.3));
}

#[test]
fn tracking_scenario_shares_inputs_and_stays_bounded() {
    let mut spec = ScenarioSpec::tracking(preset("piezo-sec5-rdob1").unwrap(), 7);
    spec.duration = 0.3;
    let runs = run_scenario_spec(&spec).unwrap();
    assert_eq!(runs.len(), 4);
    for r in &runs[1..] {
        assert_eq!(r.trace.r, runs[0].trace.r);
        assert_eq!(r.trace.n, runs[0].trace.n);
        assert_eq!(r.trace.t, runs[0].trace.t);
    }
    for r in &runs {
        assert!(
            r.trace.y.iter().all(|v| v.is_finite() && v.abs() < 10.0),
            "{}",
            r.architecture
        );
        let e = &r.trace;
        assert!(e.e.iter().zip(&e.r).zip(&e.y).all(|((e, r), y)| *e == r - y));
    }
}

#[test]
fn unknown_scenario_is_an_error() {
    assert!(matches!(run_scenario("nope"), Err(Error::Unknown(_))));
}

#[test]
fn runaway_loop_reports_divergence() {
    let mut p = preset("piezo-sec5-linear").unwrap();
    p.linear.controller = p.linear.controller.scale(1e3);
    let cfg = config(&p, Architecture::NoDob, 1.0);
    match simulate(&cfg, &p, None, None) {
        Err(Error::Diverged { time, trace }) => {
            assert!(time > 0.0 && time <= 1.0);
            assert!(!trace.is_empty());
        }
        other => panic!("{:?}", other.map(|t| t.len())),
    }
}

#[test]
fn invalid_settings_rejected() {
    let p = preset("example-sec2").unwrap();
    let base = config(&p, Architecture::Linear, 0.01);
    for cfg in [
        SimConfig {
            dt: 0.0,
            ..base.clone()
        },
        SimConfig {
            duration: -1.0,
            ..base.clone()
        },
        SimConfig {
            reference: Reference {
                amplitude: f64::NAN,
                frequency_hz: 1.0,
            },
            ..base.clone()
        },
        SimConfig {
            dt: 1.0,
            ..base.clone()
        },
    ] {
        assert!(simulate(&cfg, &p, None, None).is_err());
    }
    let discrete = LoopModel::from_preset(
        &preset("piezo-sec5-linear").unwrap(),
        Architecture::Linear,
        SimMode::Discrete,
        1e-4,
    )
    .unwrap();
    assert!(matches!(
        simulate_model(
            &discrete,
            &SimConfig {
                dt: 1e-4,
                ..base.clone()
            },
            None,
            None
        ),
        Err(Error::DomainMismatch(_))
    ));
    let cfg = SimConfig {
        dt: 2e-4,
        mode: SimMode::Discrete,
        ..base
    };
    assert!(matches!(
        simulate_model(&discrete, &cfg, None, None),
        Err(Error::Config(_))
    ));
}
