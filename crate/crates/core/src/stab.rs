//! Stability of reset loops under sinusoidal input.
//!
//! With input `α sin(ωt)` driving the loop and the reset element
//! triggered at every input zero crossing, the state right after each
//! reset follows a linear recursion with transition matrix
//! `M = Ā_ρ e^{Aπ/ω}`. The loop settles to a unique periodic solution
//! when the spectral radius of `M` is below one.

use nalgebra::DVector;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::arch::{Architecture, DesignPreset};
use crate::error::{Error, Result};
use crate::numlin::interconnect::BlockInfo;
use crate::numlin::{linalg, Domain, Interconnection, Mat, StateSpace, TransferFunction};
use crate::reset::ResetElement;

/// Open-loop model of a reset configuration:
/// `x' = A x + B1 u + B2 n`, `y = C x`, reset map `Ā_ρ`.
#[derive(Clone, Debug)]
pub struct AugmentedLoop {
    pub a: Mat,
    pub b1: Mat,
    pub b2: Mat,
    pub c: Mat,
    pub reset: Mat,
    pub layout: Vec<BlockInfo>,
    /// Whether the base linear loop is obtained by closing `u = -y`.
    pub closes_on_output: bool,
}

impl AugmentedLoop {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Indices of states that are set to zero at a reset.
    pub fn reset_states(&self) -> Vec<usize> {
        (0..self.order()).filter(|&i| self.reset[(i, i)] == 0.0).collect()
    }

    /// State matrix of the base linear system (resets removed).
    pub fn base_closed_loop(&self) -> Mat {
        if self.closes_on_output {
            &self.a - &self.b1 * &self.c
        } else {
            self.a.clone()
        }
    }

    /// Largest pole real part of the base linear system; errors when it
    /// is not negative.
    pub fn check_base_stability(&self) -> Result<f64> {
        let m = linalg::eigenvalues(&self.base_closed_loop())?
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        if m < 0.0 {
            Ok(m)
        } else {
            Err(Error::BaseUnstable(m))
        }
    }

    /// A single reset element driven directly by the input.
    pub fn from_element(el: &ResetElement) -> Result<Self> {
        if el.base.d.iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidParameter("element must be strictly proper".into()));
        }
        let n = el.order();
        Ok(AugmentedLoop {
            a: el.base.a.clone(),
            b1: el.base.b.clone(),
            b2: Mat::zeros(n, 1),
            c: el.base.c.clone(),
            reset: el.reset_matrix.clone(),
            layout: vec![BlockInfo {
                name: "element".into(),
                offset: 0,
                order: n,
                reset: Some(el.reset_matrix.clone()),
            }],
            closes_on_output: false,
        })
    }

    /// The same loop with a different reset map.
    pub fn with_reset(&self, reset: Mat) -> Result<Self> {
        if reset.nrows() != self.order() || reset.ncols() != self.order() {
            return Err(Error::Dimension("reset map size".into()));
        }
        Ok(AugmentedLoop { reset, ..self.clone() })
    }

    /// Frozen-reset response from `u` to `y`.
    pub fn frozen_response(&self, omega: f64) -> Result<num_complex::Complex64> {
        StateSpace::new(
            self.a.clone(),
            self.b1.clone(),
            self.c.clone(),
            Mat::zeros(1, 1),
            Domain::Continuous,
        )?
        .eval(omega)
    }
}

fn check_continuous(name: &str, s: &StateSpace) -> Result<()> {
    if s.domain != Domain::Continuous {
        return Err(Error::DomainMismatch(format!(
            "{name} must be continuous-time for the stability analysis"
        )));
    }
    if s.inputs() != 1 || s.outputs() != 1 {
        return Err(Error::Dimension(format!("{name} must be SISO")));
    }
    Ok(())
}

fn finish(ic: &Interconnection, out: usize, closes_on_output: bool) -> Result<AugmentedLoop> {
    let net = ic.build()?;
    let (c, d) = net.output_map(out);
    if d.iter().any(|v| *v != 0.0) {
        return Err(Error::InvalidParameter(
            "plant output must not depend directly on the loop inputs".into(),
        ));
    }
    Ok(AugmentedLoop {
        a: net.a.clone(),
        b1: net.b.columns(0, 1).into_owned(),
        b2: net.b.columns(1, 1).into_owned(),
        c,
        reset: net.reset_map(),
        layout: net.blocks.clone(),
        closes_on_output,
    })
}

/// Reset observer filter: input `u` at the plant, noise `n` at the
/// measurement. State order: plant, inverse, Q1, CgLp, Q2.
pub fn augment_rdob1(
    plant: &StateSpace,
    pninv: &StateSpace,
    q1: &StateSpace,
    cglp: &ResetElement,
    q2: &StateSpace,
) -> Result<AugmentedLoop> {
    for (n, s) in [
        ("plant", plant),
        ("inverse", pninv),
        ("Q1", q1),
        ("CgLp", &cglp.base),
        ("Q2", q2),
    ] {
        check_continuous(n, s)?;
    }
    let mut ic = Interconnection::new(Domain::Continuous);
    let u = ic.add_input("u");
    let n = ic.add_input("n");
    let p = ic.add_block("P", plant.clone())?;
    let pi = ic.add_block("Pn_inv", pninv.clone())?;
    let b1 = ic.add_block("Q1", q1.clone())?;
    let cg = ic.add_reset_block("CgLp", cglp.base.clone(), cglp.reset_matrix.clone())?;
    let b2 = ic.add_block("Q2", q2.clone())?;
    ic.feed(u, p, 1.0)
        .connect(b2, p, -1.0)
        .connect(p, pi, 1.0)
        .feed(n, pi, 1.0)
        .connect(pi, b1, 1.0)
        .connect(b2, b1, 1.0)
        .feed(u, b1, -1.0)
        .connect(b1, cg, 1.0)
        .connect(cg, b2, 1.0);
    finish(&ic, p.0, false)
}

/// Reset element ahead of the controller, outer loop opened at the
/// trigger filter input. State order: plant, inverse, Q, Q_co, CgLp, C.
pub fn augment_rdob2(
    plant: &StateSpace,
    pninv: &StateSpace,
    q: &StateSpace,
    qco: &StateSpace,
    cglp: &ResetElement,
    c: &StateSpace,
) -> Result<AugmentedLoop> {
    for (nm, s) in [
        ("plant", plant),
        ("inverse", pninv),
        ("Q", q),
        ("Q_co", qco),
        ("CgLp", &cglp.base),
        ("C", c),
    ] {
        check_continuous(nm, s)?;
    }
    let mut ic = Interconnection::new(Domain::Continuous);
    let r = ic.add_input("r");
    let n = ic.add_input("n");
    let p = ic.add_block("P", plant.clone())?;
    let pi = ic.add_block("Pn_inv", pninv.clone())?;
    let bq = ic.add_block("Q", q.clone())?;
    let bco = ic.add_block("Q_co", qco.clone())?;
    let cg = ic.add_reset_block("CgLp", cglp.base.clone(), cglp.reset_matrix.clone())?;
    let bc = ic.add_block("C", c.clone())?;
    ic.connect(bc, p, 1.0)
        .connect(bq, p, -1.0)
        .connect(p, pi, 1.0)
        .feed(n, pi, 1.0)
        .connect(pi, bq, 1.0)
        .connect(bc, bq, -1.0)
        .connect(bq, bq, 1.0)
        .feed(r, bco, 1.0)
        .connect(bco, cg, 1.0)
        .connect(cg, bc, 1.0);
    finish(&ic, p.0, true)
}

/// Continuous realization for the stability analysis: discrete blocks are
/// mapped back through the bilinear transform.
pub fn continuous_realization(tf: &TransferFunction) -> Result<StateSpace> {
    let ct = if tf.domain().is_discrete() {
        tf.tustin_to_continuous()?
    } else {
        tf.clone()
    };
    Ok(ct.to_state_space()?.balanced())
}

/// Augmented loop of a preset's reset configuration.
pub fn augment_preset(preset: &DesignPreset, arch: Architecture) -> Result<AugmentedLoop> {
    match arch {
        Architecture::Rdob1 => {
            let r = &preset.rdob1;
            augment_rdob1(
                &continuous_realization(&r.dob.plant)?,
                &r.dob.inverse,
                &continuous_realization(&r.q1)?,
                &r.cglp,
                &continuous_realization(&r.q2)?,
            )
        }
        Architecture::Rdob2 => {
            let r = &preset.rdob2;
            augment_rdob2(
                &continuous_realization(&r.dob.plant)?,
                &r.dob.inverse,
                &continuous_realization(&r.dob.q)?,
                &continuous_realization(&r.qco)?,
                &r.cglp,
                &continuous_realization(&r.dob.controller)?,
            )
        }
        other => Err(Error::InvalidParameter(format!(
            "{other} has no reset element to analyse"
        ))),
    }
}

/// Per-frequency spectral radius of `Ā_ρ e^{Aπ/ω}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub omega: Vec<f64>,
    pub max_abs_eig: Vec<f64>,
}

impl SweepResult {
    /// Stable on the grid iff every value is below one.
    pub fn is_stable(&self) -> bool {
        self.max_abs_eig.iter().all(|v| *v < 1.0)
    }

    pub fn max(&self) -> (f64, f64) {
        self.omega
            .iter()
            .zip(&self.max_abs_eig)
            .fold(
                (f64::NAN, f64::NEG_INFINITY),
                |acc, (w, v)| {
                    if *v > acc.1 {
                        (*w, *v)
                    } else {
                        acc
                    }
                },
            )
    }
}

fn sweep_point(a_bal: &Mat, reset: &Mat, omega: f64) -> Result<f64> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
    }
    let e = linalg::expm(&(a_bal * (PI / omega))).map_err(|_| Error::ExpmOverflow(omega))?;
    linalg::spectral_radius(&(reset * e))
}

/// Thread count requested through `RDOB_THREADS`, if any.
pub fn thread_limit() -> Option<usize> {
    std::env::var("RDOB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
}

/// Evaluates `max |λ(Ā_ρ e^{Aπ/ω})|` on every grid frequency.
///
/// `A` is balanced once up front. Balancing is a diagonal similarity and
/// `Ā_ρ` is diagonal, so the spectrum is unchanged while the exponential
/// stays in range for stiff loops.
pub fn stability_sweep(lp: &AugmentedLoop, omegas: &[f64]) -> Result<SweepResult> {
    let reset_is_diagonal = (0..lp.order()).all(|i| (0..lp.order()).all(|j| i == j || lp.reset[(i, j)] == 0.0));
    let (a_bal, reset) = if reset_is_diagonal {
        (linalg::balance(&lp.a).0, lp.reset.clone())
    } else {
        (lp.a.clone(), lp.reset.clone())
    };
    let run = || -> Result<Vec<f64>> { omegas.par_iter().map(|w| sweep_point(&a_bal, &reset, *w)).collect() };
    let values = match thread_limit() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(SweepResult {
        omega: omegas.to_vec(),
        max_abs_eig: values,
    })
}

/// Base-linear check followed by the sweep.
pub fn verify_stability(lp: &AugmentedLoop, omegas: &[f64]) -> Result<SweepResult> {
    lp.check_base_stability()?;
    stability_sweep(lp, omegas)
}

/// `ψ(t) = ∫₀ᵗ e^{-As} B sin(ωs) ds` in closed form:
/// `(A² + ω²I)^{-1} [ωI - e^{-At}(A sin ωt + ωI cos ωt)] B`.
pub fn psi(a: &Mat, b: &Mat, omega: f64, t: f64) -> Result<DVector<f64>> {
    let n = a.nrows();
    let id = Mat::identity(n, n);
    if t == 0.0 {
        return Ok(DVector::zeros(n));
    }
    let e = linalg::expm_balanced(&(a * (-t))).map_err(|_| Error::ExpmOverflow(omega))?;
    let (s, c) = (omega * t).sin_cos();
    let inner = &id * omega - e * (a * s + &id * (omega * c));
    let sol = linalg::solve(&(a * a + &id * (omega * omega)), &(inner * b))?;
    Ok(sol.column(0).into_owned())
}

/// Exact transition over `t` of the state augmented with a unit
/// sinusoid: `[x; sin ωt; cos ωt]`.
fn sinusoid_transition(a: &Mat, b: &Mat, omega: f64, t: f64) -> Result<Mat> {
    let n = a.nrows();
    let mut big = Mat::zeros(n + 2, n + 2);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    big.view_mut((0, n), (n, 1)).copy_from(b);
    big[(n, n + 1)] = omega;
    big[(n + 1, n)] = -omega;
    linalg::expm_balanced(&(big * t)).map_err(|_| Error::ExpmOverflow(omega))
}

/// `e^{At} ψ(t)`: response at `t` to `sin(ωs)` from rest. Computed from the
/// augmented exponential, which stays bounded for stable `A`.
pub fn forced_response(a: &Mat, b: &Mat, omega: f64, t: f64) -> Result<DVector<f64>> {
    let n = a.nrows();
    let phi = sinusoid_transition(a, b, omega, t)?;
    Ok(phi.view((0, n + 1), (n, 1)).column(0).into_owned())
}

/// Steady periodic response to `α sin(ωt)` with resets at every input zero
/// crossing.
#[derive(Clone, Debug)]
pub struct PeriodicSolution {
    pub omega: f64,
    pub alpha: f64,
    /// State just after the reset at `t = 0`.
    pub eta: DVector<f64>,
    /// State just after the reset at `t = π/ω`.
    pub zeta: DVector<f64>,
    /// Sample times over one period, `[0, 2π/ω)`.
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub output: Vec<f64>,
}

/// Post-reset state recursion iterated `iterations` times from rest.
/// Returns the final `(η_k, ζ_k)`.
pub fn iterate_recursion(
    lp: &AugmentedLoop,
    omega: f64,
    alpha: f64,
    iterations: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let (m, p) = recursion_terms(lp, omega, alpha)?;
    let mut eta = DVector::zeros(lp.order());
    let mut zeta = DVector::zeros(lp.order());
    for _ in 0..iterations {
        zeta = &m * &eta + &p;
        eta = &m * &zeta - &p;
    }
    Ok((eta, zeta))
}

/// `M = Ā_ρ e^{Aπ/ω}` and `p = Ā_ρ e^{Aπ/ω} αψ(π/ω)`.
fn recursion_terms(lp: &AugmentedLoop, omega: f64, alpha: f64) -> Result<(Mat, DVector<f64>)> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
    }
    let half = PI / omega;
    let e = linalg::expm_balanced(&(&lp.a * half)).map_err(|_| Error::ExpmOverflow(omega))?;
    let m = &lp.reset * e;
    let p = &lp.reset * forced_response(&lp.a, &lp.b1, omega, half)? * alpha;
    Ok((m, p))
}

/// Closed-form periodic solution plus one period of samples.
pub fn periodic_solution(
    lp: &AugmentedLoop,
    omega: f64,
    alpha: f64,
    samples_per_period: usize,
) -> Result<PeriodicSolution> {
    let (m, p) = recursion_terms(lp, omega, alpha)?;
    let radius = linalg::spectral_radius(&m)?;
    if radius >= 1.0 {
        return Err(Error::Divergent { omega, radius });
    }
    let n = lp.order();
    let eta = -linalg::solve(&(Mat::identity(n, n) + &m), &Mat::from_column_slice(n, 1, p.as_slice()))?
        .column(0)
        .into_owned();
    let zeta = &m * &eta + &p;

    let half_n = (samples_per_period / 2).max(1);
    let h = PI / omega / half_n as f64;
    let phi = sinusoid_transition(&lp.a, &lp.b1, omega, h)?;
    let mut times = Vec::with_capacity(2 * half_n);
    let mut states = Vec::with_capacity(2 * half_n);
    for (k, start, sign) in [(0, &eta, 1.0), (1, &zeta, -1.0)] {
        let mut z = DVector::zeros(n + 2);
        z.rows_mut(0, n).copy_from(start);
        z[n + 1] = sign * alpha;
        for i in 0..half_n {
            times.push((k * half_n + i) as f64 * h);
            states.push(z.rows(0, n).into_owned());
            z = &phi * z;
        }
    }
    let output = states.iter().map(|x| (&lp.c * x)[(0, 0)]).collect();
    Ok(PeriodicSolution {
        omega,
        alpha,
        eta,
        zeta,
        times,
        states,
        output,
    })
}
