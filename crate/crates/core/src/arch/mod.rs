//! Disturbance-observer loop architectures and their frequency-domain
//! algebra.
//!
//! Three structures share one plant/nominal-model/inverse/controller core:
//!
//! * [`LinearDob`]: the usual Q-filter observer inside a feedback loop.
//! * [`Rdob1`]: the observer filter becomes `Q1 · CgLp · Q2`, so the reset
//!   element adds phase lead to the estimate.
//! * [`Rdob2`]: a linear observer, with `Q_co · CgLp` placed in front of the
//!   feedback controller.
//!
//! Reset configurations are analysed quasi-linearly: the CgLp element is
//! replaced by its describing function at each frequency.

mod presets;

pub use presets::{piezo_controller, piezo_q, piezo_q1, preset, DesignPreset, PRESET_NAMES};

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numlin::{Domain, FrequencyResponse, Polynomial, StateSpace, TransferFunction};
use crate::reset::{CgLpParams, ResetElement};

/// Loop structure selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    NoDob,
    Linear,
    Rdob1,
    Rdob2,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::NoDob,
        Architecture::Linear,
        Architecture::Rdob1,
        Architecture::Rdob2,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Architecture::NoDob => "no-dob",
            Architecture::Linear => "linear",
            Architecture::Rdob1 => "rdob1",
            Architecture::Rdob2 => "rdob2",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Unknown(s.to_string()))
    }
}

/// Feedback loop with a linear disturbance observer.
#[derive(Clone, Debug)]
pub struct LinearDob {
    pub plant: TransferFunction,
    pub nominal: TransferFunction,
    /// Proper realization of the nominal-model inverse.
    pub inverse: StateSpace,
    pub q: TransferFunction,
    pub controller: TransferFunction,
}

impl LinearDob {
    pub fn new(
        plant: TransferFunction,
        nominal: TransferFunction,
        inverse: StateSpace,
        q: TransferFunction,
        controller: TransferFunction,
    ) -> Result<Self> {
        if q.domain() == nominal.domain() && q.relative_degree() < nominal.relative_degree() {
            return Err(Error::InvalidParameter(format!(
                "Q has relative degree {} but the nominal model has {}; Q·P_n^-1 would be improper",
                q.relative_degree(),
                nominal.relative_degree()
            )));
        }
        Ok(LinearDob {
            plant,
            nominal,
            inverse,
            q,
            controller,
        })
    }

    pub fn with_q(&self, q: TransferFunction) -> Result<Self> {
        LinearDob::new(
            self.plant.clone(),
            self.nominal.clone(),
            self.inverse.clone(),
            q,
            self.controller.clone(),
        )
    }

    pub fn with_controller(&self, controller: TransferFunction) -> Self {
        LinearDob {
            controller,
            ..self.clone()
        }
    }
}

/// Observer filter split around a CgLp element: `Q_eff = Q1 · CgLp · Q2`.
#[derive(Clone, Debug)]
pub struct Rdob1 {
    pub dob: LinearDob,
    pub q1: TransferFunction,
    pub cglp: ResetElement,
    pub q2: TransferFunction,
}

impl Rdob1 {
    /// Builds the split from the observer's designed Q and the chosen Q1.
    pub fn new(dob: LinearDob, q1: TransferFunction, cglp: ResetElement) -> Result<Self> {
        let q2 = split_q(&dob.q, &q1)?;
        Ok(Rdob1 { dob, q1, cglp, q2 })
    }

    /// Quasi-linear observer filter at `omega`.
    pub fn q_eff(&self, omega: f64) -> Result<Complex64> {
        Ok(self.q1.eval(omega)? * self.cglp.describing_function(omega)? * self.q2.eval(omega)?)
    }
}

/// Linear observer with `Q_co · CgLp` in front of the controller.
///
/// `dob.controller` holds the remaining controller `C`, so the loop runs
/// `Q_co · CgLp · C`. The linear loop it derives from uses `Q_co · C`.
#[derive(Clone, Debug)]
pub struct Rdob2 {
    pub dob: LinearDob,
    pub qco: TransferFunction,
    pub cglp: ResetElement,
}

impl Rdob2 {
    pub fn new(dob: LinearDob, qco: TransferFunction, cglp: ResetElement) -> Result<Self> {
        if !qco.is_proper() || qco.relative_degree() < 1 && qco.domain() == Domain::Continuous {
            return Err(Error::InvalidParameter(
                "Q_co must be a strictly proper low-pass".into(),
            ));
        }
        Ok(Rdob2 { dob, qco, cglp })
    }

    /// Quasi-linear effective controller at `omega`.
    pub fn controller_eff(&self, omega: f64) -> Result<Complex64> {
        Ok(self.qco.eval(omega)? * self.cglp.describing_function(omega)? * self.dob.controller.eval(omega)?)
    }

    /// The linear observer loop obtained by removing the CgLp element.
    pub fn linear_equivalent(&self) -> Result<LinearDob> {
        Ok(self.dob.with_controller(self.qco.series(&self.dob.controller)?))
    }
}

/// Either reset configuration.
#[derive(Clone, Debug)]
pub enum Rdob {
    One(Rdob1),
    Two(Rdob2),
}

fn inner_from_q(p: Complex64, pn: Complex64, q: Complex64) -> (Complex64, Complex64) {
    let den = q * (p - pn) + pn;
    (pn * (1.0 - q) / den, q * p / den)
}

fn outer_from_c(pn: Complex64, c: Complex64) -> (Complex64, Complex64) {
    let l = pn * c;
    (1.0 / (1.0 + l), l / (1.0 + l))
}

fn pair(
    grid: &[f64],
    f: impl Fn(f64) -> Result<(Complex64, Complex64)>,
) -> Result<(FrequencyResponse, FrequencyResponse)> {
    let mut a = Vec::with_capacity(grid.len());
    let mut b = Vec::with_capacity(grid.len());
    for w in grid {
        let (x, y) = f(*w)?;
        a.push(x);
        b.push(y);
    }
    Ok((
        FrequencyResponse::new(grid.to_vec(), a)?,
        FrequencyResponse::new(grid.to_vec(), b)?,
    ))
}

/// Inner-loop sensitivity `S` and complementary sensitivity `T` of the
/// observer loop. With `P = P_n` these are `1 - Q` and `Q`.
pub fn inner_sensitivities(d: &LinearDob, grid: &[f64]) -> Result<(FrequencyResponse, FrequencyResponse)> {
    pair(grid, |w| {
        Ok(inner_from_q(d.plant.eval(w)?, d.nominal.eval(w)?, d.q.eval(w)?))
    })
}

/// Sensitivities of the feedback loop without observer:
/// `S_c = 1/(1 + P_n C)`, `T_c = P_n C/(1 + P_n C)`.
pub fn outer_sensitivities(d: &LinearDob, grid: &[f64]) -> Result<(FrequencyResponse, FrequencyResponse)> {
    pair(grid, |w| Ok(outer_from_c(d.nominal.eval(w)?, d.controller.eval(w)?)))
}

/// Closed-loop transfers from reference, input disturbance and measurement
/// noise to the output, for a plant matching its nominal model.
#[derive(Clone, Debug)]
pub struct ClosedLoopMaps {
    pub h_ry: FrequencyResponse,
    pub h_dy: FrequencyResponse,
    pub h_ny: FrequencyResponse,
}

pub fn closed_loop_maps(d: &LinearDob, grid: &[f64]) -> Result<ClosedLoopMaps> {
    let mut ry = Vec::new();
    let mut dy = Vec::new();
    let mut ny = Vec::new();
    for &w in grid {
        let pn = d.nominal.eval(w)?;
        let p = d.plant.eval(w)?;
        let q = d.q.eval(w)?;
        let (sc, tc) = outer_from_c(pn, d.controller.eval(w)?);
        ry.push(tc);
        dy.push(p * sc * (1.0 - q));
        ny.push(tc + q * sc);
    }
    Ok(ClosedLoopMaps {
        h_ry: FrequencyResponse::new(grid.to_vec(), ry)?,
        h_dy: FrequencyResponse::new(grid.to_vec(), dy)?,
        h_ny: FrequencyResponse::new(grid.to_vec(), ny)?,
    })
}

/// Overall sensitivity `S · S_c` of the linear observer loop.
pub fn overall_sensitivity_linear(d: &LinearDob, grid: &[f64]) -> Result<FrequencyResponse> {
    let (s, _) = inner_sensitivities(d, grid)?;
    let (sc, _) = outer_sensitivities(d, grid)?;
    s.zip_with(&sc, |a, b| a * b)
}

/// Quasi-linear overall sensitivity `S · S_c` of a reset configuration.
pub fn overall_sensitivity_rdob(cfg: &Rdob, grid: &[f64]) -> Result<FrequencyResponse> {
    FrequencyResponse::from_fn(grid, |w| match cfg {
        Rdob::One(r) => {
            let d = &r.dob;
            let pn = d.nominal.eval(w)?;
            let (s, _) = inner_from_q(d.plant.eval(w)?, pn, r.q_eff(w)?);
            let (sc, _) = outer_from_c(pn, d.controller.eval(w)?);
            Ok(s * sc)
        }
        Rdob::Two(r) => {
            let d = &r.dob;
            let pn = d.nominal.eval(w)?;
            let (s, _) = inner_from_q(d.plant.eval(w)?, pn, d.q.eval(w)?);
            let (sc, _) = outer_from_c(pn, r.controller_eff(w)?);
            Ok(s * sc)
        }
    })
}

/// Inner and outer sensitivity of any architecture, reset elements taken
/// quasi-linearly. Without an observer the inner sensitivity is 1.
pub fn sensitivities(
    preset: &DesignPreset,
    arch: Architecture,
    grid: &[f64],
) -> Result<(FrequencyResponse, FrequencyResponse)> {
    match arch {
        Architecture::NoDob => {
            let (sc, _) = outer_sensitivities(&preset.linear, grid)?;
            Ok((sc.map(|_| Complex64::new(1.0, 0.0)), sc))
        }
        Architecture::Linear => {
            let (s, _) = inner_sensitivities(&preset.linear, grid)?;
            let (sc, _) = outer_sensitivities(&preset.linear, grid)?;
            Ok((s, sc))
        }
        Architecture::Rdob1 => {
            let r = &preset.rdob1;
            pair(grid, |w| {
                let pn = r.dob.nominal.eval(w)?;
                let (s, _) = inner_from_q(r.dob.plant.eval(w)?, pn, r.q_eff(w)?);
                let (sc, _) = outer_from_c(pn, r.dob.controller.eval(w)?);
                Ok((s, sc))
            })
        }
        Architecture::Rdob2 => {
            let r = &preset.rdob2;
            pair(grid, |w| {
                let pn = r.dob.nominal.eval(w)?;
                let (s, _) = inner_from_q(r.dob.plant.eval(w)?, pn, r.dob.q.eval(w)?);
                let (sc, _) = outer_from_c(pn, r.controller_eff(w)?);
                Ok((s, sc))
            })
        }
    }
}

/// Plant as seen from the observer's command input, using the realized
/// inverse: `P / (1 - Q + Q · P · P̂n⁻¹)`. With the exact inverse this is
/// the usual `P Pn / (Q (P - Pn) + Pn)`.
pub fn compensated_plant(d: &LinearDob, q: Complex64, omega: f64) -> Result<Complex64> {
    let p = d.plant.eval(omega)?;
    let inv = d.inverse.eval(omega)?;
    Ok(p / (1.0 - q + q * p * inv))
}

impl Rdob {
    /// Open-loop response with the reset element replaced by its base
    /// linear system. Configuration one: command input to plant output.
    /// Configuration two: trigger-filter input to plant output.
    pub fn frozen_loop_gain(&self, omega: f64) -> Result<Complex64> {
        match self {
            Rdob::One(r) => {
                let q = r.q1.eval(omega)? * r.cglp.base_response(omega)? * r.q2.eval(omega)?;
                compensated_plant(&r.dob, q, omega)
            }
            Rdob::Two(r) => {
                let c = r.qco.eval(omega)? * r.cglp.base_response(omega)? * r.dob.controller.eval(omega)?;
                Ok(c * compensated_plant(&r.dob, r.dob.q.eval(omega)?, omega)?)
            }
        }
    }
}

/// Inverse of a continuous nominal model made biproper by padding with
/// repeated real poles at `omega_aug`.
pub fn properized_inverse_tf(pn: &TransferFunction, omega_aug: f64) -> Result<TransferFunction> {
    if pn.domain() != Domain::Continuous {
        return Err(Error::DomainMismatch(
            "properize_inverse needs a continuous model".into(),
        ));
    }
    if !(omega_aug > 0.0 && omega_aug.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "omega_aug must be positive, got {omega_aug}"
        )));
    }
    if let Some(z) = pn.unstable_zero()? {
        return Err(Error::NonMinimumPhase { re: z.re, im: z.im });
    }
    let r = pn.relative_degree();
    if r < 0 {
        return Err(Error::Improper {
            num: pn.num().degree(),
            den: pn.den().degree(),
        });
    }
    let pad = Polynomial::new(vec![1.0 / omega_aug, 1.0]).pow(r as usize);
    TransferFunction::new(pn.den().clone(), pn.num() * &pad, Domain::Continuous).map(|tf| tf.normalized())
}

/// Proper state-space inverse of `pn`; see [`properized_inverse_tf`].
pub fn properize_inverse(pn: &TransferFunction, omega_aug: f64) -> Result<StateSpace> {
    Ok(properized_inverse_tf(pn, omega_aug)?.to_state_space()?.balanced())
}

/// `Q2 = Q / Q1`, so that `Q1 · Q2 = Q`.
pub fn split_q(q: &TransferFunction, q1: &TransferFunction) -> Result<TransferFunction> {
    q.domain().check_same(&q1.domain(), "split_q")?;
    if q1.num().is_zero() {
        return Err(Error::InvalidParameter("Q1 is identically zero".into()));
    }
    let q2 = TransferFunction::new(q.num() * q1.den(), q.den() * q1.num(), q.domain())?;
    if !q2.is_proper() {
        return Err(Error::Improper {
            num: q2.num().degree(),
            den: q2.den().degree(),
        });
    }
    Ok(cancel_common_roots(&q2).normalized())
}

/// Removes numerator/denominator root pairs that coincide to within a
/// relative tolerance (e.g. Q1 = Q leaves Q2 = 1).
fn cancel_common_roots(tf: &TransferFunction) -> TransferFunction {
    let (Ok(mut zs), Ok(mut ps)) = (tf.zeros(), tf.poles()) else {
        return tf.clone();
    };
    let mut changed = false;
    let mut i = 0;
    while i < zs.len() {
        let z = zs[i];
        let tol = 1e-7 * z.norm().max(1e-300) + 1e-12;
        if let Some(j) = ps.iter().position(|p| (p - z).norm() <= tol) {
            ps.remove(j);
            zs.remove(i);
            changed = true;
        } else {
            i += 1;
        }
    }
    if !changed {
        return tf.clone();
    }
    let num = Polynomial::from_roots(&zs);
    let den = Polynomial::from_roots(&ps);
    let gain = tf.num().leading() / tf.den().leading();
    TransferFunction::new(num.scale(gain), den, tf.domain()).unwrap_or_else(|_| tf.clone())
}

/// Series PID with lead and roll-off:
/// `K (s/ωi + 1)/(s/ωi) · (s/ω1 + 1)/(s/ω2 + 1) · 1/(s/ωf + 1)`.
///
/// The integral term is normalised by `ωi`, so `K` is the mid-band gain.
pub fn pid_series(k: f64, wi: f64, w1: f64, w2: f64, wf: f64) -> Result<TransferFunction> {
    if !(k.is_finite() && k != 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gain must be finite and nonzero, got {k}"
        )));
    }
    if !(0.0 < wi && wi < w1 && w1 < w2 && w2 < wf && wf.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "corner frequencies must satisfy 0 < wi < w1 < w2 < wf, got {wi}, {w1}, {w2}, {wf}"
        )));
    }
    let integ = TransferFunction::continuous(&[k / wi, k], &[1.0 / wi, 0.0])?;
    let lead = TransferFunction::continuous(&[1.0 / w1, 1.0], &[1.0 / w2, 1.0])?;
    let lpf = TransferFunction::continuous(&[1.0], &[1.0 / wf, 1.0])?;
    integ.series(&lead)?.series(&lpf)
}

/// First crossing of `|l(jω)| = 1` on `[lo, hi]`, by bisection in log ω.
pub fn crossover(l: &TransferFunction, lo: f64, hi: f64) -> Result<f64> {
    let f = |w: f64| -> Result<f64> { Ok(l.eval(w)?.norm().ln()) };
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let (fa, fb) = (f(lo)?, f(hi)?);
    if fa.signum() == fb.signum() {
        return Err(Error::InvalidParameter(format!("no gain crossover in [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m.exp())?.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// The ω_r that makes `Q · DF_CgLp` phase-neutral at `omega_q`, other CgLp
/// parameters taken from `template`. Searched over `[omega_q/100, omega_q]`.
pub fn omega_r_for_zero_phase(q: &TransferFunction, template: CgLpParams, omega_q: f64) -> Result<f64> {
    let phase = |wr: f64| -> Result<f64> {
        let p = CgLpParams {
            omega_r: wr,
            ..template
        };
        let el = ResetElement::cglp(p)?;
        Ok((q.eval(omega_q)? * el.describing_function(omega_q)?).arg())
    };
    let (mut a, mut b) = ((omega_q / 100.0).ln(), omega_q.ln());
    let (pa, pb) = (phase(a.exp())?, phase(b.exp())?);
    if pa.signum() == pb.signum() {
        return Err(Error::InvalidParameter(format!(
            "CgLp cannot zero the phase at {omega_q} rad/s within [omega_q/100, omega_q]"
        )));
    }
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if phase(m.exp())?.signum() == pa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((0.5 * (a + b)).exp())
}
