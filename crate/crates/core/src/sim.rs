//! Hybrid closed-loop simulation.
//!
//! Every architecture is assembled into one linear network over the block
//! states. Between samples the network evolves linearly (RK4 in continuous
//! mode, one difference-equation step in discrete mode). When the input of
//! the reset element changes sign, or lands exactly on zero, its states are
//! mapped through `A_ρ` before the outputs of that sample are formed.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::arch::{Architecture, DesignPreset};
use crate::error::{Error, Result};
use crate::models::{BoucWenParams, HysteresisModel, NoiseSource};
use crate::numlin::{linalg, Domain, Interconnection, Mat, Network, StateSpace, TransferFunction};
use crate::reset::ResetElement;
use crate::stab::AugmentedLoop;

/// State norm beyond which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    /// All blocks continuous, fixed-step RK4.
    Continuous,
    /// All blocks discrete at the step size; plant held by a ZOH.
    Discrete,
}

/// Sinusoidal reference `amplitude · sin(2π f t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub amplitude: f64,
    pub frequency_hz: f64,
}

impl Reference {
    pub fn at(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * PI * self.frequency_hz * t).sin()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub mode: SimMode,
    pub reference: Reference,
    pub architecture: Architecture,
}

impl SimConfig {
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !self.reference.amplitude.is_finite() || !self.reference.frequency_hz.is_finite() {
            return Err(Error::InvalidParameter("reference must be finite".into()));
        }
        Ok(())
    }
}

/// Uniformly sampled signals of one run. `e = r - y`, `u` is the feedback
/// controller output, `resets` lists the reset instants.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimTrace {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub e: Vec<f64>,
    pub u: Vec<f64>,
    pub d: Vec<f64>,
    pub n: Vec<f64>,
    pub y: Vec<f64>,
    pub resets: Vec<f64>,
}

impl SimTrace {
    fn with_capacity(n: usize) -> Self {
        SimTrace {
            t: Vec::with_capacity(n),
            r: Vec::with_capacity(n),
            e: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            d: Vec::with_capacity(n),
            n: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
            resets: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Sample rate in Hz.
    pub fn sample_rate(&self) -> f64 {
        if self.t.len() < 2 {
            return f64::NAN;
        }
        1.0 / (self.t[1] - self.t[0])
    }
}

/// Reset element realized in the simulation domain.
#[derive(Clone, Debug)]
pub struct ResetBlock {
    pub sys: StateSpace,
    pub reset: Mat,
}

/// Inverse nominal model, optionally with the one-sample delay that keeps
/// the discrete inverse causal. With `delayed` set, the plant-input path
/// into the observer is delayed by one sample to match.
#[derive(Clone, Debug)]
pub struct Observer {
    pub inverse: StateSpace,
    pub delayed: bool,
}

/// Realized loop, ready to be assembled.
#[derive(Clone, Debug)]
pub enum LoopModel {
    NoDob {
        plant: StateSpace,
        controller: StateSpace,
    },
    Linear {
        plant: StateSpace,
        observer: Observer,
        q: StateSpace,
        controller: StateSpace,
    },
    Rdob1 {
        plant: StateSpace,
        observer: Observer,
        q1: StateSpace,
        cglp: ResetBlock,
        q2: StateSpace,
        controller: StateSpace,
    },
    Rdob2 {
        plant: StateSpace,
        observer: Observer,
        q: StateSpace,
        qco: StateSpace,
        cglp: ResetBlock,
        controller: StateSpace,
    },
}

struct Assembled {
    net: Network,
    plant: usize,
    command: usize,
    controller: usize,
    reset: Option<usize>,
}

impl LoopModel {
    /// Realizes a preset's architecture for the given mode and step.
    pub fn from_preset(preset: &DesignPreset, arch: Architecture, mode: SimMode, dt: f64) -> Result<LoopModel> {
        let conv = Converter::new(preset, mode, dt)?;
        let lin = &preset.linear;
        let plant = conv.plant(&lin.plant)?;
        Ok(match arch {
            Architecture::NoDob => LoopModel::NoDob {
                plant,
                controller: conv.tf(&lin.controller)?,
            },
            Architecture::Linear => LoopModel::Linear {
                plant,
                observer: conv.observer(&lin.nominal, &lin.inverse)?,
                q: conv.tf(&lin.q)?,
                controller: conv.tf(&lin.controller)?,
            },
            Architecture::Rdob1 => {
                let r = &preset.rdob1;
                LoopModel::Rdob1 {
                    plant,
                    observer: conv.observer(&r.dob.nominal, &r.dob.inverse)?,
                    q1: conv.tf(&r.q1)?,
                    cglp: conv.reset(&r.cglp)?,
                    q2: conv.tf(&r.q2)?,
                    controller: conv.tf(&r.dob.controller)?,
                }
            }
            Architecture::Rdob2 => {
                let r = &preset.rdob2;
                LoopModel::Rdob2 {
                    plant,
                    observer: conv.observer(&r.dob.nominal, &r.dob.inverse)?,
                    q: conv.tf(&r.dob.q)?,
                    qco: conv.tf(&r.qco)?,
                    cglp: conv.reset(&r.cglp)?,
                    controller: conv.tf(&r.dob.controller)?,
                }
            }
        })
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            LoopModel::NoDob { .. } => Architecture::NoDob,
            LoopModel::Linear { .. } => Architecture::Linear,
            LoopModel::Rdob1 { .. } => Architecture::Rdob1,
            LoopModel::Rdob2 { .. } => Architecture::Rdob2,
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            LoopModel::NoDob { plant, .. }
            | LoopModel::Linear { plant, .. }
            | LoopModel::Rdob1 { plant, .. }
            | LoopModel::Rdob2 { plant, .. } => plant.domain,
        }
    }

    pub fn reset_block(&self) -> Option<&ResetBlock> {
        match self {
            LoopModel::Rdob1 { cglp, .. } | LoopModel::Rdob2 { cglp, .. } => Some(cglp),
            _ => None,
        }
    }

    /// Same loop with the reset map of the reset element replaced.
    pub fn with_reset_matrix(&self, reset: Mat) -> Result<LoopModel> {
        let mut m = self.clone();
        match &mut m {
            LoopModel::Rdob1 { cglp, .. } | LoopModel::Rdob2 { cglp, .. } => {
                if reset.shape() != cglp.reset.shape() {
                    return Err(Error::Dimension("reset matrix size".into()));
                }
                cglp.reset = reset;
            }
            _ => return Err(Error::InvalidParameter("loop has no reset element".into())),
        }
        Ok(m)
    }

    /// Linear loop obtained by treating the reset element as its base
    /// linear system, realized as a series connection of the same blocks.
    pub fn linearized(&self) -> Result<LoopModel> {
        Ok(match self.clone() {
            LoopModel::Rdob1 {
                plant,
                observer,
                q1,
                cglp,
                q2,
                controller,
            } => LoopModel::Linear {
                plant,
                observer,
                q: q1.series(&cglp.sys)?.series(&q2)?,
                controller,
            },
            LoopModel::Rdob2 {
                plant,
                observer,
                q,
                qco,
                cglp,
                controller,
            } => LoopModel::Linear {
                plant,
                observer,
                q,
                controller: qco.series(&cglp.sys)?.series(&controller)?,
            },
            other => other,
        })
    }

    fn assemble(&self) -> Result<Assembled> {
        let domain = self.domain();
        let mut ic = Interconnection::new(domain);
        let r = ic.add_input("r");
        let d = ic.add_input("d");
        let n = ic.add_input("n");
        let unit = StateSpace::static_gain(1.0, domain);

        let plant_sys = match self {
            LoopModel::NoDob { plant, .. }
            | LoopModel::Linear { plant, .. }
            | LoopModel::Rdob1 { plant, .. }
            | LoopModel::Rdob2 { plant, .. } => plant,
        };
        let p = ic.add_block("P", plant_sys.clone())?;
        let v = ic.add_block("V", unit)?;
        ic.connect(v, p, 1.0).feed(d, p, 1.0);

        // Observer core shared by the three observer loops: returns the
        // block whose output is subtracted from the command and the block
        // that receives `P_n^-1 y_m - v`.
        let observer_into = |ic: &mut Interconnection, obs: &Observer, sink| -> Result<()> {
            let pi = ic.add_block("Pn_inv", obs.inverse.clone())?;
            ic.connect(p, pi, 1.0).feed(n, pi, 1.0).connect(pi, sink, 1.0);
            if obs.delayed {
                let ts = match domain {
                    Domain::Discrete { sample_time } => sample_time,
                    Domain::Continuous => {
                        return Err(Error::DomainMismatch("delayed inverse in continuous time".into()))
                    }
                };
                let del = ic.add_block("delay", StateSpace::unit_delay(ts)?)?;
                ic.connect(v, del, 1.0).connect(del, sink, -1.0);
            } else {
                ic.connect(v, sink, -1.0);
            }
            Ok(())
        };

        let (controller, reset) = match self {
            LoopModel::NoDob { controller, .. } => {
                let c = ic.add_block("C", controller.clone())?;
                ic.feed(r, c, 1.0)
                    .connect(p, c, -1.0)
                    .feed(n, c, -1.0)
                    .connect(c, v, 1.0);
                (c, None)
            }
            LoopModel::Linear {
                observer,
                q,
                controller,
                ..
            } => {
                let c = ic.add_block("C", controller.clone())?;
                let bq = ic.add_block("Q", q.clone())?;
                ic.feed(r, c, 1.0).connect(p, c, -1.0).feed(n, c, -1.0);
                ic.connect(c, v, 1.0).connect(bq, v, -1.0);
                observer_into(&mut ic, observer, bq)?;
                (c, None)
            }
            LoopModel::Rdob1 {
                observer,
                q1,
                cglp,
                q2,
                controller,
                ..
            } => {
                let c = ic.add_block("C", controller.clone())?;
                let b1 = ic.add_block("Q1", q1.clone())?;
                let cg = ic.add_reset_block("CgLp", cglp.sys.clone(), cglp.reset.clone())?;
                let b2 = ic.add_block("Q2", q2.clone())?;
                ic.feed(r, c, 1.0).connect(p, c, -1.0).feed(n, c, -1.0);
                ic.connect(c, v, 1.0).connect(b2, v, -1.0);
                ic.connect(b1, cg, 1.0).connect(cg, b2, 1.0);
                observer_into(&mut ic, observer, b1)?;
                (c, Some(cg))
            }
            LoopModel::Rdob2 {
                observer,
                q,
                qco,
                cglp,
                controller,
                ..
            } => {
                let bco = ic.add_block("Q_co", qco.clone())?;
                let cg = ic.add_reset_block("CgLp", cglp.sys.clone(), cglp.reset.clone())?;
                let c = ic.add_block("C", controller.clone())?;
                let bq = ic.add_block("Q", q.clone())?;
                ic.feed(r, bco, 1.0).connect(p, bco, -1.0).feed(n, bco, -1.0);
                ic.connect(bco, cg, 1.0).connect(cg, c, 1.0);
                ic.connect(c, v, 1.0).connect(bq, v, -1.0);
                observer_into(&mut ic, observer, bq)?;
                (c, Some(cg))
            }
        };
        Ok(Assembled {
            net: ic.build()?,
            plant: p.0,
            command: v.0,
            controller: controller.0,
            reset: reset.map(|b| b.0),
        })
    }

    /// Largest RK4 step that keeps the linear part inside the stability
    /// region with margin, and resolves the reset element's fastest pole.
    pub fn suggested_dt(&self) -> Result<f64> {
        let net = self.assemble()?.net;
        let rho = linalg::spectral_radius(&linalg::balance(&net.a).0)?;
        let mut dt = if rho > 0.0 { 1.0 / rho } else { 1e-3 };
        if let Some(cg) = self.reset_block() {
            let wf = linalg::spectral_radius(&cg.sys.a)?;
            if wf > 0.0 {
                dt = dt.min(2.0 * PI / (50.0 * wf));
            }
        }
        Ok(dt)
    }
}

/// Maps preset transfer functions into the simulation domain.
struct Converter {
    mode: SimMode,
    dt: f64,
}

impl Converter {
    fn new(preset: &DesignPreset, mode: SimMode, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if mode == SimMode::Discrete {
            if let Some(ts) = preset.sample_time {
                if ((dt - ts) / ts).abs() > 1e-12 {
                    return Err(Error::Config(format!(
                        "discrete mode needs dt equal to the preset sample time {ts}, got {dt}"
                    )));
                }
            }
        }
        Ok(Converter { mode, dt })
    }

    fn tf(&self, g: &TransferFunction) -> Result<StateSpace> {
        match (self.mode, g.domain()) {
            (SimMode::Continuous, Domain::Continuous) => Ok(g.to_state_space()?.balanced()),
            (SimMode::Continuous, Domain::Discrete { .. }) => {
                Ok(g.tustin_to_continuous()?.to_state_space()?.balanced())
            }
            (SimMode::Discrete, Domain::Continuous) => g.to_state_space()?.balanced().discretize_tustin(self.dt),
            (SimMode::Discrete, Domain::Discrete { .. }) => g.to_state_space(),
        }
    }

    fn plant(&self, g: &TransferFunction) -> Result<StateSpace> {
        let ct = if g.domain().is_discrete() {
            return Err(Error::DomainMismatch("plant must be continuous-time".into()));
        } else {
            g.to_state_space()?.balanced()
        };
        match self.mode {
            SimMode::Continuous => Ok(ct),
            SimMode::Discrete => ct.discretize_zoh(self.dt),
        }
    }

    fn observer(&self, nominal: &TransferFunction, inverse: &StateSpace) -> Result<Observer> {
        match self.mode {
            SimMode::Continuous => Ok(Observer {
                inverse: inverse.clone(),
                delayed: false,
            }),
            SimMode::Discrete => Ok(Observer {
                inverse: delayed_zoh_inverse(nominal, self.dt)?,
                delayed: true,
            }),
        }
    }

    fn reset(&self, el: &ResetElement) -> Result<ResetBlock> {
        let sys = match self.mode {
            SimMode::Continuous => el.base.clone(),
            SimMode::Discrete => el.base.discretize_tustin(self.dt)?,
        };
        Ok(ResetBlock {
            sys,
            reset: el.reset_matrix.clone(),
        })
    }
}

/// `1 / (z · P_n,zoh(z))`, the causal inverse of the ZOH-sampled nominal
/// model advanced by one sample.
pub fn delayed_zoh_inverse(nominal: &TransferFunction, ts: f64) -> Result<StateSpace> {
    let pd = nominal.to_state_space()?.balanced().discretize_zoh(ts)?;
    if pd.d[(0, 0)] != 0.0 {
        return Err(Error::InvalidParameter("nominal model must be strictly proper".into()));
    }
    // z · C (zI - A)^-1 B = C A (zI - A)^-1 B + C B
    let ca = &pd.c * &pd.a;
    let cb = (&pd.c * &pd.b)[(0, 0)];
    if cb.abs() < 1e-300 {
        return Err(Error::Singular(
            "sampled nominal model has relative degree above one".into(),
        ));
    }
    let a = &pd.a - &pd.b * &ca / cb;
    let inv = StateSpace::new(a, &pd.b / cb, -&ca / cb, Mat::from_element(1, 1, 1.0 / cb), pd.domain)?;
    for z in linalg::eigenvalues(&inv.a)? {
        if z.norm() >= 1.0 {
            return Err(Error::NonMinimumPhase { re: z.re, im: z.im });
        }
    }
    Ok(inv)
}

/// Runs one architecture of a preset.
pub fn simulate(
    cfg: &SimConfig,
    preset: &DesignPreset,
    hysteresis: Option<&mut HysteresisModel>,
    noise: Option<&mut NoiseSource>,
) -> Result<SimTrace> {
    cfg.validate()?;
    let model = LoopModel::from_preset(preset, cfg.architecture, cfg.mode, cfg.dt)?;
    simulate_model(&model, cfg, hysteresis, noise)
}

fn rk4_step(
    a: &Mat,
    b: &Mat,
    x: &DVector<f64>,
    w0: &DVector<f64>,
    wh: &DVector<f64>,
    w1: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let k1 = a * x + b * w0;
    let k2 = a * (x + &k1 * (h / 2.0)) + b * wh;
    let k3 = a * (x + &k2 * (h / 2.0)) + b * wh;
    let k4 = a * (x + &k3 * h) + b * w1;
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn apply_reset(x: &mut DVector<f64>, net: &Network, block: usize) {
    let info = &net.blocks[block];
    if let Some(m) = &info.reset {
        let seg = m * x.rows(info.offset, info.order);
        x.rows_mut(info.offset, info.order).copy_from(&seg);
    }
}

/// Runs an already realized loop. The model domain must match `cfg.mode`.
pub fn simulate_model(
    model: &LoopModel,
    cfg: &SimConfig,
    mut hysteresis: Option<&mut HysteresisModel>,
    mut noise: Option<&mut NoiseSource>,
) -> Result<SimTrace> {
    cfg.validate()?;
    match (cfg.mode, model.domain()) {
        (SimMode::Continuous, Domain::Continuous) => {}
        (SimMode::Discrete, Domain::Discrete { sample_time }) => {
            if ((sample_time - cfg.dt) / cfg.dt).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "model sample time {sample_time} differs from dt {}",
                    cfg.dt
                )));
            }
        }
        _ => {
            return Err(Error::DomainMismatch(
                "model domain does not match the simulation mode".into(),
            ))
        }
    }
    let asm = model.assemble()?;
    let net = &asm.net;
    if cfg.mode == SimMode::Continuous {
        let rho = linalg::spectral_radius(&linalg::balance(&net.a).0)?;
        if rho * cfg.dt > 2.5 {
            return Err(Error::InvalidParameter(format!(
                "dt = {} is outside the RK4 stability region for this loop; use dt <= {:e}",
                cfg.dt,
                2.5 / rho
            )));
        }
    }

    let steps = cfg.steps();
    let dt = cfg.dt;
    let mut trace = SimTrace::with_capacity(steps);
    let mut x = DVector::zeros(net.order());
    let mut w = DVector::zeros(3);
    let mut prev_trigger = 0.0;
    let mut prev_v = 0.0;

    for k in 0..steps {
        let t = k as f64 * dt;
        let r = cfg.reference.at(t);
        let nk = noise.as_deref_mut().map_or(0.0, |s| s.sample());
        w[0] = r;
        w[1] = 0.0;
        w[2] = nk;
        let mut u = net.block_inputs(&x, &w);
        if let Some(cg) = asm.reset {
            let mut trig = u[cg];
            if k > 0 && (trig * prev_trigger < 0.0 || (trig == 0.0 && prev_trigger != 0.0)) {
                apply_reset(&mut x, net, cg);
                trace.resets.push(t);
                u = net.block_inputs(&x, &w);
                trig = u[cg];
            }
            prev_trigger = trig;
        }
        let y = net.block_outputs(&x, &u);
        let v = y[asm.command];
        let d = hysteresis.as_deref_mut().map_or(0.0, |h| h.step(v, v - prev_v, dt));
        prev_v = v;
        w[1] = d;

        let yp = y[asm.plant];
        trace.t.push(t);
        trace.r.push(r);
        trace.e.push(r - yp);
        trace.u.push(y[asm.controller]);
        trace.d.push(d);
        trace.n.push(nk);
        trace.y.push(yp);

        x = match cfg.mode {
            SimMode::Discrete => &net.a * &x + &net.b * &w,
            SimMode::Continuous => {
                let mut wh = w.clone();
                wh[0] = cfg.reference.at(t + dt / 2.0);
                let mut w1 = w.clone();
                w1[0] = cfg.reference.at(t + dt);
                rk4_step(&net.a, &net.b, &x, &w, &wh, &w1, dt)
            }
        };
        let norm = x.norm();
        if !norm.is_finite() || norm > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                time: t + dt,
                trace: Box::new(trace),
            });
        }
    }
    Ok(trace)
}

/// Response of an open reset loop to `α sin(ωt)`, with resets at the input
/// zero crossings `t = kπ/ω`.
#[derive(Clone, Debug)]
pub struct OpenLoopTrace {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

/// RK4 simulation of `x' = A x + B1 α sin(ωt)`, `y = C x`, sampled
/// `samples_per_period` times per period (must be even so every zero
/// crossing lands on a sample). Each sample interval is split into enough
/// sub-steps to keep RK4 accurate on the loop's fastest mode.
pub fn simulate_open_loop(
    lp: &AugmentedLoop,
    omega: f64,
    alpha: f64,
    periods: usize,
    samples_per_period: usize,
) -> Result<OpenLoopTrace> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
    }
    if samples_per_period < 2 || !samples_per_period.is_multiple_of(2) {
        return Err(Error::InvalidParameter("samples per period must be even".into()));
    }
    let n = samples_per_period;
    let h = 2.0 * PI / omega / n as f64;
    let rho = linalg::spectral_radius(&linalg::balance(&lp.a).0)?;
    let sub = ((h * rho / 0.25).ceil() as usize).max(1);
    let hs = h / sub as f64;
    let input = |t: f64| alpha * (omega * t).sin();
    let total = periods * n;
    let mut out = OpenLoopTrace {
        t: Vec::with_capacity(total),
        u: Vec::with_capacity(total),
        y: Vec::with_capacity(total),
        states: Vec::with_capacity(total),
    };
    let mut x = DVector::zeros(lp.order());
    let b = lp.b1.column(0).into_owned();
    for k in 0..total {
        let t = k as f64 * h;
        // exact zeros at half periods
        let u = if k % (n / 2) == 0 { 0.0 } else { input(t) };
        if k > 0 && u == 0.0 {
            x = &lp.reset * &x;
        }
        out.t.push(t);
        out.u.push(u);
        out.y.push((&lp.c * &x)[(0, 0)]);
        out.states.push(x.clone());
        for j in 0..sub {
            let ts = t + j as f64 * hs;
            let (u0, uh, u1) = (input(ts), input(ts + hs / 2.0), input(ts + hs));
            let k1 = &lp.a * &x + &b * u0;
            let k2 = &lp.a * (&x + &k1 * (hs / 2.0)) + &b * uh;
            let k3 = &lp.a * (&x + &k2 * (hs / 2.0)) + &b * uh;
            let k4 = &lp.a * (&x + &k3 * hs) + &b * u1;
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (hs / 6.0);
        }
        if !x.norm().is_finite() || x.norm() > DIVERGENCE_LIMIT {
            return Err(Error::NoConvergence);
        }
    }
    Ok(out)
}

/// Settings of the tracking scenario shared by all architectures.
#[derive(Clone, Debug)]
pub struct ScenarioSpec {
    pub preset: DesignPreset,
    pub architectures: Vec<Architecture>,
    pub mode: SimMode,
    /// Step size; `None` picks the preset sample time in discrete mode and
    /// the smallest suggested step over all architectures otherwise.
    pub dt: Option<f64>,
    pub duration: f64,
    pub reference: Reference,
    pub hysteresis: Option<BoucWenParams>,
    pub noise_sigma: f64,
    pub noise_seed: u64,
    /// Optional low-pass corner of the noise in rad/s.
    pub noise_corner: Option<f64>,
}

impl ScenarioSpec {
    /// 30 Hz unit-amplitude tracking for 2 s with default hysteresis and
    /// 1e-3 measurement noise.
    pub fn tracking(preset: DesignPreset, seed: u64) -> Self {
        let mode = if preset.sample_time.is_some() {
            SimMode::Discrete
        } else {
            SimMode::Continuous
        };
        ScenarioSpec {
            preset,
            architectures: Architecture::ALL.to_vec(),
            mode,
            dt: None,
            duration: 2.0,
            reference: Reference {
                amplitude: 1.0,
                frequency_hz: 30.0,
            },
            hysteresis: Some(BoucWenParams::default()),
            noise_sigma: 1e-3,
            noise_seed: seed,
            noise_corner: None,
        }
    }

    pub fn resolve_dt(&self) -> Result<f64> {
        if let Some(dt) = self.dt {
            return Ok(dt);
        }
        match (self.mode, self.preset.sample_time) {
            (SimMode::Discrete, Some(ts)) => Ok(ts),
            (SimMode::Discrete, None) => Err(Error::Config(
                "discrete mode on a continuous preset needs an explicit dt".into(),
            )),
            (SimMode::Continuous, _) => {
                let mut dt = f64::INFINITY;
                for a in &self.architectures {
                    let m = LoopModel::from_preset(&self.preset, *a, SimMode::Continuous, 1e-6)?;
                    dt = dt.min(m.suggested_dt()?);
                }
                // land on a whole number of steps per reference period
                let period = 1.0 / self.reference.frequency_hz;
                if period.is_finite() && period > 0.0 {
                    dt = period / (period / dt).ceil();
                }
                Ok(dt)
            }
        }
    }
}

/// One architecture's run inside a scenario.
#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub architecture: Architecture,
    pub trace: SimTrace,
}

/// Runs every architecture of the spec with identical reference, noise
/// sequence and hysteresis parameters.
pub fn run_scenario_spec(spec: &ScenarioSpec) -> Result<Vec<ScenarioRun>> {
    let dt = spec.resolve_dt()?;
    let mut runs = Vec::with_capacity(spec.architectures.len());
    for arch in &spec.architectures {
        let cfg = SimConfig {
            dt,
            duration: spec.duration,
            mode: spec.mode,
            reference: spec.reference,
            architecture: *arch,
        };
        let mut hyst = spec.hysteresis.clone().map(HysteresisModel::new).transpose()?;
        let shaping = spec.noise_corner.map(|wc| (wc, dt));
        let mut noise = NoiseSource::new(spec.noise_seed, spec.noise_sigma, shaping)?;
        let trace = simulate(&cfg, &spec.preset, hyst.as_mut(), Some(&mut noise))?;
        runs.push(ScenarioRun {
            architecture: *arch,
            trace,
        });
    }
    Ok(runs)
}

/// The default 30 Hz tracking scenario on a named preset, seed 1.
pub fn run_scenario(name: &str) -> Result<Vec<ScenarioRun>> {
    let preset = crate::arch::preset(name)?;
    run_scenario_spec(&ScenarioSpec::tracking(preset, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::preset;

    #[test]
    fn unforced_loop_stays_at_rest() {
        let p = preset("piezo-sec5-rdob1").unwrap();
        let cfg = SimConfig {
            dt: 1e-4,
            duration: 0.05,
            mode: SimMode::Discrete,
            reference: Reference {
                amplitude: 0.0,
                frequency_hz: 30.0,
            },
            architecture: Architecture::Rdob1,
        };
        let tr = simulate(&cfg, &p, None, None).unwrap();
        assert!(tr.y.iter().all(|y| *y == 0.0));
        assert_eq!(tr.len(), 500);
    }

    #[test]
    fn wrong_discrete_step_rejected() {
        let p = preset("piezo-sec5-linear").unwrap();
        assert!(LoopModel::from_preset(&p, Architecture::Linear, SimMode::Discrete, 2e-4).is_err());
    }

    #[test]
    fn delayed_inverse_cancels_sampled_model() {
        let pn = TransferFunction::continuous(&[1.0], &[1e-6, 2e-3, 1.0]).unwrap();
        let ts = 1e-4;
        let pd = pn.to_state_space().unwrap().discretize_zoh(ts).unwrap();
        let inv = delayed_zoh_inverse(&pn, ts).unwrap();
        for w in [10.0, 1e3, 2e4] {
            let z = Domain::discrete(ts).unwrap().point(w);
            let prod = pd.eval(w).unwrap() * inv.eval(w).unwrap() * z;
            assert!((prod - 1.0).norm() < 1e-9);
        }
    }
}
