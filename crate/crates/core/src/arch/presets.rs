//! Named design bundles.
//!
//! `example-sec2` is the second-order plant with a series PID, observer
//! filter at the closed-loop bandwidth, and both reset configurations.
//! The three `piezo-sec5-*` presets share the identified piezo stage, its
//! H∞ controller and the discrete observer filters; they differ only in
//! the architecture selected by default.

use super::{pid_series, properize_inverse, Architecture, LinearDob, Rdob1, Rdob2};
use crate::error::{Error, Result};
use crate::models::piezo_plant;
use crate::numlin::{Polynomial, TransferFunction};
use crate::reset::{CgLpParams, ResetElement};

use std::f64::consts::PI;

pub const PRESET_NAMES: [&str; 4] = [
    "example-sec2",
    "piezo-sec5-linear",
    "piezo-sec5-rdob1",
    "piezo-sec5-rdob2",
];

/// All models for one worked design.
#[derive(Clone, Debug)]
pub struct DesignPreset {
    pub name: &'static str,
    pub description: &'static str,
    pub default_arch: Architecture,
    pub linear: LinearDob,
    pub rdob1: Rdob1,
    pub rdob2: Rdob2,
    /// Sample time of the discrete blocks, if any.
    pub sample_time: Option<f64>,
    /// Padding-pole frequency used for the inverse nominal model.
    pub omega_aug: f64,
    /// Default analysis range in rad/s.
    pub omega_range: (f64, f64),
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<DesignPreset> {
    match name {
        "example-sec2" => example(),
        "piezo-sec5-linear" => piezo("piezo-sec5-linear", Architecture::Linear),
        "piezo-sec5-rdob1" => piezo("piezo-sec5-rdob1", Architecture::Rdob1),
        "piezo-sec5-rdob2" => piezo("piezo-sec5-rdob2", Architecture::Rdob2),
        _ => Err(Error::Unknown(name.to_string())),
    }
}

/// Second-order low-pass `1/((s/w)^2 + 2 s/w + 1)`.
fn critically_damped(w: f64) -> Result<TransferFunction> {
    TransferFunction::continuous(&[1.0], &[1.0 / (w * w), 2.0 / w, 1.0])
}

fn first_order(w: f64) -> Result<TransferFunction> {
    TransferFunction::continuous(&[1.0], &[1.0 / w, 1.0])
}

pub(crate) const EXAMPLE_OMEGA_P: f64 = 1e3;
pub(crate) const EXAMPLE_OMEGA_Q: f64 = 1e4;
pub(crate) const EXAMPLE_PID: [f64; 5] = [33.6, 1e3, 3333.0, 3e4, 1e5];

fn example() -> Result<DesignPreset> {
    let [k, wi, w1, w2, wf] = EXAMPLE_PID;
    let pn = critically_damped(EXAMPLE_OMEGA_P)?;
    let omega_aug = 20.0 * wf;
    let inverse = properize_inverse(&pn, omega_aug)?;
    let q = critically_damped(EXAMPLE_OMEGA_Q)?;
    let c = pid_series(k, wi, w1, w2, wf)?;
    let linear = LinearDob::new(pn.clone(), pn.clone(), inverse, q.clone(), c)?;

    let q1 = first_order(EXAMPLE_OMEGA_Q)?;
    let cglp1 = ResetElement::cglp(CgLpParams::new(EXAMPLE_OMEGA_Q, 1.0, CgLpParams::DEFAULT_ALPHA, wf)?)?;
    let rdob1 = Rdob1::new(linear.clone(), q1, cglp1)?;

    // The PID roll-off doubles as the trigger filter in front of the CgLp.
    let qco = first_order(wf)?;
    let c_rest = TransferFunction::continuous(&[k / wi, k], &[1.0 / wi, 0.0])?
        .series(&TransferFunction::continuous(&[1.0 / w1, 1.0], &[1.0 / w2, 1.0])?)?;
    let cglp2 = ResetElement::cglp(CgLpParams::new(EXAMPLE_OMEGA_P, 1.0, CgLpParams::DEFAULT_ALPHA, wf)?)?;
    let rdob2 = Rdob2::new(linear.with_controller(c_rest), qco, cglp2)?;

    Ok(DesignPreset {
        name: "example-sec2",
        description: "second-order plant, series PID at 1e4 rad/s, Q at the bandwidth",
        default_arch: Architecture::Linear,
        linear,
        rdob1,
        rdob2,
        sample_time: None,
        omega_aug,
        omega_range: (1e1, 1e6),
    })
}

pub(crate) const PIEZO_TS: f64 = 1e-4;

fn lin(c: f64) -> Polynomial {
    Polynomial::new(vec![1.0, c])
}

fn quad(b: f64, c: f64) -> Polynomial {
    Polynomial::new(vec![1.0, b, c])
}

/// Controller denominator without its roll-off pair.
fn piezo_c_den_rest() -> Polynomial {
    
    &(&lin(0.904) * &lin(-0.9979)) * &(&lin(-0.9982) * &lin(0.02331))
}

fn piezo_c_num() -> Polynomial {
    let p = &(&lin(-0.9725) * &lin(0.06267)) * &(&quad(-1.844, 0.9391) * &quad(-1.523, 0.8819));
    p.scale(777.9)
}

fn piezo_c_rolloff() -> Polynomial {
    quad(-1.555, 0.789)
}

pub fn piezo_controller() -> Result<TransferFunction> {
    TransferFunction::new(piezo_c_num(), &piezo_c_den_rest() * &piezo_c_rolloff(), discrete())
}

pub fn piezo_q() -> Result<TransferFunction> {
    let num = (&lin(3.104) * &lin(0.221)).scale(2.31e-3);
    let den = &lin(-0.5762) * &quad(-1.789, 0.8165);
    TransferFunction::new(num, den, discrete())
}

pub fn piezo_q1() -> Result<TransferFunction> {
    TransferFunction::discrete(&[0.5302, -0.9712, 0.4531], &[1.0, -1.881, 0.8931], PIEZO_TS)
}

fn discrete() -> crate::numlin::Domain {
    crate::numlin::Domain::Discrete { sample_time: PIEZO_TS }
}

pub(crate) const PIEZO_OMEGA_F: f64 = 2.0 * PI * 5000.0;

fn piezo(name: &'static str, default_arch: Architecture) -> Result<DesignPreset> {
    let p = piezo_plant();
    let omega_aug = 20.0 * PIEZO_OMEGA_F;
    let inverse = properize_inverse(&p, omega_aug)?;
    let q = piezo_q()?;
    let c = piezo_controller()?;
    let linear = LinearDob::new(p.clone(), p, inverse, q, c)?;

    let cglp1 = ResetElement::cglp(CgLpParams::new(
        2.0 * PI * 100.0,
        0.7,
        CgLpParams::DEFAULT_ALPHA,
        PIEZO_OMEGA_F,
    )?)?;
    let rdob1 = Rdob1::new(linear.clone(), piezo_q1()?, cglp1)?;

    // The controller's own roll-off pair, normalised to unity DC gain, is
    // the trigger filter; the rest of the controller follows the CgLp.
    let roll = piezo_c_rolloff();
    let k = roll.eval_real(1.0);
    let z2 = Polynomial::new(vec![1.0, 0.0, 0.0]);
    let qco = TransferFunction::new(z2.scale(k), roll, discrete())?;
    let c_rest = TransferFunction::new(piezo_c_num().scale(1.0 / k), &piezo_c_den_rest() * &z2, discrete())?;
    let cglp2 = ResetElement::cglp(CgLpParams::new(
        2.0 * PI * 700.0,
        0.7,
        CgLpParams::DEFAULT_ALPHA,
        PIEZO_OMEGA_F,
    )?)?;
    let rdob2 = Rdob2::new(linear.with_controller(c_rest), qco, cglp2)?;

    Ok(DesignPreset {
        name,
        description: match default_arch {
            Architecture::Linear => "piezo stage, H-infinity controller, linear observer",
            Architecture::Rdob1 => "piezo stage, CgLp inside the observer filter",
            _ => "piezo stage, CgLp in front of the controller",
        },
        default_arch,
        linear,
        rdob1,
        rdob2,
        sample_time: Some(PIEZO_TS),
        omega_aug,
        omega_range: (1.0, 1e5),
    })
}
