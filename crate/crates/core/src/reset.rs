//! Reset elements and their sinusoidal-input describing functions.
//!
//! A reset element is a linear system whose states jump `x ← A_ρ x` each
//! time its input crosses zero. Driven by `sin(ωt)` the jumps happen every
//! half period, which makes the steady-state response periodic and gives a
//! closed-form first-harmonic gain.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numlin::{linalg, Domain, FrequencyResponse, Mat, StateSpace, TransferFunction};

/// Which constructor produced an element, kept so the rational model of
/// the base system can be recovered.
#[derive(Clone, Debug, PartialEq)]
pub enum ElementKind {
    Clegg,
    Fore { omega_r: f64 },
    Sore { omega_r: f64, zeta_r: f64 },
    CgLp(CgLpParams),
    Custom,
}

/// Linear base system plus reset map.
#[derive(Clone, Debug, PartialEq)]
pub struct ResetElement {
    pub base: StateSpace,
    pub reset_matrix: Mat,
    pub kind: ElementKind,
}

/// Parameters of a constant-gain lead-phase element: a second-order reset
/// low-pass at `omega_r` followed by a linear lead from `alpha * omega_r`
/// up to `omega_f`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgLpParams {
    pub omega_r: f64,
    pub zeta_r: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub omega_f: f64,
}

fn default_alpha() -> f64 {
    CgLpParams::DEFAULT_ALPHA
}

impl CgLpParams {
    /// Corner offset that compensates the corner shift of a reset
    /// second-order low-pass.
    pub const DEFAULT_ALPHA: f64 = 1.25;

    pub fn new(omega_r: f64, zeta_r: f64, alpha: f64, omega_f: f64) -> Result<Self> {
        let p = CgLpParams {
            omega_r,
            zeta_r,
            alpha,
            omega_f,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn omega_r_alpha(&self) -> f64 {
        self.alpha * self.omega_r
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.omega_r, self.zeta_r, self.alpha, self.omega_f]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite || self.omega_r <= 0.0 || self.zeta_r <= 0.0 || self.alpha <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "CgLp needs positive finite omega_r, zeta_r, alpha; got {self:?}"
            )));
        }
        if self.omega_f <= self.omega_r_alpha() {
            return Err(Error::InvalidParameter(format!(
                "CgLp lead must terminate above its start: omega_f = {} <= alpha*omega_r = {}",
                self.omega_f,
                self.omega_r_alpha()
            )));
        }
        Ok(())
    }

    /// Rational model of the base (non-resetting) element `R(s) L(s)`.
    pub fn base_transfer_function(&self) -> Result<TransferFunction> {
        let (wr, z, wra, wf) = (self.omega_r, self.zeta_r, self.omega_r_alpha(), self.omega_f);
        let r = TransferFunction::continuous(&[1.0], &[1.0 / (wr * wr), 2.0 * z / wr, 1.0])?;
        let l = TransferFunction::continuous(
            &[1.0 / (wra * wra), 2.0 * z / wra, 1.0],
            &[1.0 / (wf * wf), 2.0 / wf, 1.0],
        )?;
        r.series(&l)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn mat(r: usize, c: usize, v: &[f64]) -> Mat {
    DMatrix::from_row_slice(r, c, v)
}

impl ResetElement {
    pub fn new(base: StateSpace, reset_matrix: Mat) -> Result<Self> {
        if base.domain != Domain::Continuous {
            return Err(Error::DomainMismatch("reset elements are continuous-time".into()));
        }
        if base.inputs() != 1 || base.outputs() != 1 {
            return Err(Error::Dimension("reset element must be SISO".into()));
        }
        let n = base.order();
        if reset_matrix.nrows() != n || reset_matrix.ncols() != n {
            return Err(Error::Dimension(format!(
                "reset matrix is {}x{}, base has {n} states",
                reset_matrix.nrows(),
                reset_matrix.ncols()
            )));
        }
        Ok(ResetElement {
            base,
            reset_matrix,
            kind: ElementKind::Custom,
        })
    }

    /// Reset integrator: `x' = e`, `x ← 0` at zero crossings.
    pub fn clegg() -> Self {
        ResetElement {
            base: StateSpace {
                a: mat(1, 1, &[0.0]),
                b: mat(1, 1, &[1.0]),
                c: mat(1, 1, &[1.0]),
                d: mat(1, 1, &[0.0]),
                domain: Domain::Continuous,
            },
            reset_matrix: mat(1, 1, &[0.0]),
            kind: ElementKind::Clegg,
        }
    }

    /// First-order reset low-pass with unity DC gain.
    pub fn fore(omega_r: f64) -> Result<Self> {
        positive("omega_r", omega_r)?;
        Ok(ResetElement {
            base: StateSpace {
                a: mat(1, 1, &[-omega_r]),
                b: mat(1, 1, &[omega_r]),
                c: mat(1, 1, &[1.0]),
                d: mat(1, 1, &[0.0]),
                domain: Domain::Continuous,
            },
            reset_matrix: mat(1, 1, &[0.0]),
            kind: ElementKind::Fore { omega_r },
        })
    }

    /// Second-order reset low-pass, both states reset to zero.
    pub fn sore(omega_r: f64, zeta_r: f64) -> Result<Self> {
        positive("omega_r", omega_r)?;
        positive("zeta_r", zeta_r)?;
        let w2 = omega_r * omega_r;
        Ok(ResetElement {
            base: StateSpace {
                a: mat(2, 2, &[0.0, 1.0, -w2, -2.0 * zeta_r * omega_r]),
                b: mat(2, 1, &[0.0, w2]),
                c: mat(1, 2, &[1.0, 0.0]),
                d: mat(1, 1, &[0.0]),
                domain: Domain::Continuous,
            },
            reset_matrix: Mat::zeros(2, 2),
            kind: ElementKind::Sore { omega_r, zeta_r },
        })
    }

    /// Constant-gain lead-phase element; only the two low-pass states reset.
    pub fn cglp(p: CgLpParams) -> Result<Self> {
        p.validate()?;
        let (wr, z, wra, wf) = (p.omega_r, p.zeta_r, p.omega_r_alpha(), p.omega_f);
        let (wr2, wf2, wra2) = (wr * wr, wf * wf, wra * wra);
        #[rustfmt::skip]
        let a = mat(4, 4, &[
            0.0, 1.0, 0.0, 0.0,
            -wr2, -2.0 * z * wr, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            1.0, 0.0, -wf2, -2.0 * wf,
        ]);
        let c = mat(
            1,
            4,
            &[
                wf2 / wra2,
                0.0,
                wf2 - wf2 * wf2 / wra2,
                2.0 * wf2 * z / wra - 2.0 * wf2 * wf / wra2,
            ],
        );
        let mut reset = Mat::zeros(4, 4);
        reset[(2, 2)] = 1.0;
        reset[(3, 3)] = 1.0;
        Ok(ResetElement {
            base: StateSpace {
                a,
                b: mat(4, 1, &[0.0, wr2, 0.0, 0.0]),
                c,
                d: mat(1, 1, &[0.0]),
                domain: Domain::Continuous,
            },
            reset_matrix: reset,
            kind: ElementKind::CgLp(p),
        })
    }

    pub fn order(&self) -> usize {
        self.base.order()
    }

    /// Same base, different reset map.
    pub fn with_reset_matrix(&self, reset_matrix: Mat) -> Result<Self> {
        let mut el = ResetElement::new(self.base.clone(), reset_matrix)?;
        el.kind = self.kind.clone();
        Ok(el)
    }

    /// The element with resets disabled (`A_ρ = I`).
    pub fn without_reset(&self) -> Self {
        let n = self.order();
        ResetElement {
            base: self.base.clone(),
            reset_matrix: Mat::identity(n, n),
            kind: self.kind.clone(),
        }
    }

    /// True when the reset map is the identity, i.e. the element is linear.
    pub fn is_linear(&self) -> bool {
        let n = self.order();
        self.reset_matrix == Mat::identity(n, n)
    }

    /// Rational model of the base system for the named constructors.
    pub fn base_transfer_function(&self) -> Result<TransferFunction> {
        match &self.kind {
            ElementKind::Clegg => TransferFunction::continuous(&[1.0], &[1.0, 0.0]),
            ElementKind::Fore { omega_r } => TransferFunction::continuous(&[1.0], &[1.0 / omega_r, 1.0]),
            ElementKind::Sore { omega_r, zeta_r } => {
                TransferFunction::continuous(&[1.0], &[1.0 / (omega_r * omega_r), 2.0 * zeta_r / omega_r, 1.0])
            }
            ElementKind::CgLp(p) => p.base_transfer_function(),
            ElementKind::Custom => Err(Error::InvalidParameter(
                "no rational model recorded for a custom element".into(),
            )),
        }
    }

    /// Linear response of the base system, ignoring resets.
    pub fn base_response(&self, omega: f64) -> Result<Complex64> {
        self.base.eval(omega)
    }

    /// `Θ_ρ(ω)`, the reset correction term of the describing function.
    pub fn theta(&self, omega: f64) -> Result<Mat> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        let n = self.order();
        let id = Mat::identity(n, n);
        let a_w = &self.base.a / omega;
        let e = linalg::expm(&(&a_w * PI)).map_err(|_| Error::ExpmOverflow(omega))?;
        let undefined = |reason: &str| Error::DfUndefined {
            omega,
            reason: reason.to_string(),
        };
        let inner = &id + &self.reset_matrix * &e;
        let left = linalg::solve(&inner, &(&id - &self.reset_matrix))
            .map_err(|_| undefined("I + A_rho exp(pi A / omega) is singular"))?;
        let right =
            linalg::inverse(&(&a_w * &a_w + &id)).map_err(|_| undefined("base system has a pole at +-j omega"))?;
        Ok((&id + &e) * left * right * (2.0 / PI))
    }

    /// First-harmonic gain for a sinusoidal input at `omega` rad/s.
    pub fn describing_function(&self, omega: f64) -> Result<Complex64> {
        let theta = self.theta(omega)?;
        let n = self.order();
        let to_c = |m: &Mat| m.map(|v| Complex64::new(v, 0.0));
        let jw = Complex64::new(0.0, omega);
        let lhs = DMatrix::<Complex64>::identity(n, n) * jw - to_c(&self.base.a);
        let rhs = (DMatrix::<Complex64>::identity(n, n) + to_c(&theta) * Complex64::new(0.0, 1.0)) * to_c(&self.base.b);
        let x = lhs.lu().solve(&rhs).ok_or_else(|| Error::DfUndefined {
            omega,
            reason: "base system has a pole at j omega".into(),
        })?;
        Ok((to_c(&self.base.c) * x)[(0, 0)] + self.base.d[(0, 0)])
    }

    pub fn df_response(&self, omega: &[f64]) -> Result<FrequencyResponse> {
        FrequencyResponse::from_fn(omega, |w| self.describing_function(w))
    }

    pub fn base_frequency_response(&self, omega: &[f64]) -> Result<FrequencyResponse> {
        FrequencyResponse::from_fn(omega, |w| self.base_response(w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clegg_phase_is_flat() {
        let c = ResetElement::clegg();
        for w in [0.01, 1.0, 300.0] {
            let df = c.describing_function(w).unwrap();
            let ph = df.arg().to_degrees();
            assert!((ph + 38.146).abs() < 1e-2, "phase {ph}");
            assert!((df.norm() * w - (1.0 + (4.0 / PI).powi(2)).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_reset_is_linear() {
        let p = CgLpParams::new(10.0, 1.0, 1.25, 1000.0).unwrap();
        for el in [
            ResetElement::clegg(),
            ResetElement::fore(3.0).unwrap(),
            ResetElement::sore(5.0, 0.7).unwrap(),
            ResetElement::cglp(p).unwrap(),
        ] {
            let lin = el.without_reset();
            for w in [0.3, 4.0, 50.0] {
                let a = lin.describing_function(w).unwrap();
                let b = el.base_response(w).unwrap();
                assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
            }
        }
    }

    #[test]
    fn sore_base_at_corner() {
        let s = ResetElement::sore(7.0, 1.0).unwrap();
        let v = s.base_response(7.0).unwrap();
        assert!((v - Complex64::new(0.0, -0.5)).norm() < 1e-14);
    }

    #[test]
    fn cglp_rejects_inverted_corners() {
        assert!(CgLpParams::new(10.0, 1.0, 1.25, 12.0).is_err());
        assert!(CgLpParams::new(-1.0, 1.0, 1.25, 100.0).is_err());
        assert!(ResetElement::sore(1.0, 0.0).is_err());
    }

    #[test]
    fn wrong_reset_dimensions_rejected() {
        let c = ResetElement::clegg();
        assert!(c.with_reset_matrix(Mat::zeros(2, 2)).is_err());
    }

    #[test]
    fn df_undefined_on_imaginary_pole() {
        // Undamped oscillator at 2 rad/s, no reset of the second state.
        let base = StateSpace::new(
            mat(2, 2, &[0.0, 1.0, -4.0, 0.0]),
            mat(2, 1, &[0.0, 4.0]),
            mat(1, 2, &[1.0, 0.0]),
            mat(1, 1, &[0.0]),
            Domain::Continuous,
        )
        .unwrap();
        let el = ResetElement::new(base, Mat::zeros(2, 2)).unwrap();
        assert!(matches!(el.describing_function(2.0), Err(Error::DfUndefined { .. })));
    }
}
