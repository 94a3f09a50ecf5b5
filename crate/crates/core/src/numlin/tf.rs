use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::poly::Polynomial;
use super::ss::StateSpace;
use crate::error::{Error, Result};

/// Time domain of a linear system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Continuous,
    Discrete { sample_time: f64 },
}

impl Domain {
    pub fn discrete(sample_time: f64) -> Result<Domain> {
        if !(sample_time > 0.0 && sample_time.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample time must be positive, got {sample_time}"
            )));
        }
        Ok(Domain::Discrete { sample_time })
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Domain::Discrete { .. })
    }

    /// The complex variable (s or z) at angular frequency `omega`.
    pub fn point(&self, omega: f64) -> Complex64 {
        match self {
            Domain::Continuous => Complex64::new(0.0, omega),
            Domain::Discrete { sample_time } => Complex64::from_polar(1.0, omega * sample_time),
        }
    }

    pub(crate) fn check_same(&self, other: &Domain, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DomainMismatch(format!("{what}: {self:?} vs {other:?}")))
        }
    }
}

/// Rational SISO transfer function `num/den` in s or z.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferFunction {
    num: Polynomial,
    den: Polynomial,
    domain: Domain,
}

impl TransferFunction {
    pub fn new(num: Polynomial, den: Polynomial, domain: Domain) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidParameter("zero denominator".into()));
        }
        if num.coeffs().iter().chain(den.coeffs()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        if let Domain::Discrete { sample_time } = domain {
            Domain::discrete(sample_time)?;
        }
        Ok(TransferFunction { num, den, domain })
    }

    /// Continuous-time `num(s)/den(s)`, coefficients highest power first.
    pub fn continuous(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::new(
            Polynomial::new(num.to_vec()),
            Polynomial::new(den.to_vec()),
            Domain::Continuous,
        )
    }

    /// Discrete-time `num(z)/den(z)` at the given sample time.
    pub fn discrete(num: &[f64], den: &[f64], sample_time: f64) -> Result<Self> {
        Self::new(
            Polynomial::new(num.to_vec()),
            Polynomial::new(den.to_vec()),
            Domain::discrete(sample_time)?,
        )
    }

    pub fn gain(k: f64, domain: Domain) -> Self {
        TransferFunction {
            num: Polynomial::constant(k),
            den: Polynomial::one(),
            domain,
        }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// deg(den) - deg(num); negative for improper systems.
    pub fn relative_degree(&self) -> isize {
        if self.num.is_zero() {
            return self.den.degree() as isize;
        }
        self.den.degree() as isize - self.num.degree() as isize
    }

    pub fn is_proper(&self) -> bool {
        self.relative_degree() >= 0
    }

    /// Value at an arbitrary point of the complex plane.
    pub fn eval_at(&self, x: Complex64) -> Result<Complex64> {
        let d = self.den.eval(x);
        let scale: f64 = self
            .den
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| c.abs() * x.norm().powi((self.den.degree() - i) as i32))
            .sum();
        if d.norm() <= 1e-14 * scale {
            return Err(Error::Pole(x.im));
        }
        Ok(self.num.eval(x) / d)
    }

    /// Frequency response at angular frequency `omega` (s = jω or z = e^{jωT}).
    pub fn eval(&self, omega: f64) -> Result<Complex64> {
        self.eval_at(self.domain.point(omega)).map_err(|_| Error::Pole(omega))
    }

    pub fn dc_gain(&self) -> Result<f64> {
        let x = match self.domain {
            Domain::Continuous => 0.0,
            Domain::Discrete { .. } => 1.0,
        };
        Ok(self.eval_at(Complex64::new(x, 0.0))?.re)
    }

    pub fn scale(&self, k: f64) -> Self {
        TransferFunction {
            num: self.num.scale(k),
            den: self.den.clone(),
            domain: self.domain,
        }
    }

    pub fn series(&self, other: &TransferFunction) -> Result<Self> {
        self.domain.check_same(&other.domain, "series")?;
        Self::new(&self.num * &other.num, &self.den * &other.den, self.domain)
    }

    pub fn parallel(&self, other: &TransferFunction) -> Result<Self> {
        self.domain.check_same(&other.domain, "parallel")?;
        Self::new(
            &(&self.num * &other.den) + &(&other.num * &self.den),
            &self.den * &other.den,
            self.domain,
        )
    }

    /// Negative feedback `G/(1 + G H)` with `self` = G in the forward path.
    pub fn feedback(&self, h: &TransferFunction) -> Result<Self> {
        self.domain.check_same(&h.domain, "feedback")?;
        Self::new(
            &self.num * &h.den,
            &(&self.den * &h.den) + &(&self.num * &h.num),
            self.domain,
        )
    }

    /// `1 - self`
    pub fn one_minus(&self) -> Self {
        TransferFunction {
            num: &self.den - &self.num,
            den: self.den.clone(),
            domain: self.domain,
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        if self.num.is_zero() {
            return Err(Error::InvalidParameter("inverse of the zero system".into()));
        }
        Self::new(self.den.clone(), self.num.clone(), self.domain)
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        self.den.roots()
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        if self.num.is_zero() {
            return Ok(Vec::new());
        }
        self.num.roots()
    }

    fn root_is_stable(&self, r: &Complex64) -> bool {
        match self.domain {
            Domain::Continuous => r.re < 0.0,
            Domain::Discrete { .. } => r.norm() < 1.0,
        }
    }

    pub fn is_stable(&self) -> Result<bool> {
        Ok(self.poles()?.iter().all(|p| self.root_is_stable(p)))
    }

    /// First zero outside the stable region, if any.
    pub fn unstable_zero(&self) -> Result<Option<Complex64>> {
        Ok(self.zeros()?.into_iter().find(|z| !self.root_is_stable(z)))
    }

    /// Scale so the denominator is monic.
    pub fn normalized(&self) -> Self {
        let l = self.den.leading();
        TransferFunction {
            num: self.num.scale(1.0 / l),
            den: self.den.scale(1.0 / l),
            domain: self.domain,
        }
    }

    /// Controllable canonical realization. Errors for improper systems.
    pub fn to_state_space(&self) -> Result<StateSpace> {
        if !self.is_proper() {
            return Err(Error::Improper {
                num: self.num.degree(),
                den: self.den.degree(),
            });
        }
        let tf = self.normalized();
        let n = tf.den.degree();
        let den: Vec<f64> = (0..=n).map(|k| tf.den.coeff(n - k)).collect();
        let num: Vec<f64> = (0..=n).map(|k| tf.num.coeff(n - k)).collect();
        let d = num[0];
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, 1);
        let mut c = DMatrix::zeros(1, n);
        if n > 0 {
            for j in 0..n {
                a[(0, j)] = -den[j + 1];
                c[(0, j)] = num[j + 1] - d * den[j + 1];
            }
            for i in 1..n {
                a[(i, i - 1)] = 1.0;
            }
            b[(0, 0)] = 1.0;
        }
        StateSpace::new(a, b, c, DMatrix::from_element(1, 1, d), self.domain)
    }

    /// Bilinear (Tustin) map z = (1 + sT/2)/(1 - sT/2) to continuous time.
    pub fn tustin_to_continuous(&self) -> Result<Self> {
        let Domain::Discrete { sample_time: t } = self.domain else {
            return Err(Error::DomainMismatch(
                "tustin_to_continuous on a continuous system".into(),
            ));
        };
        let n = self.num.degree().max(self.den.degree());
        let plus = Polynomial::new(vec![t / 2.0, 1.0]);
        let minus = Polynomial::new(vec![-t / 2.0, 1.0]);
        let sub = |p: &Polynomial| {
            (0..=n).fold(Polynomial::constant(0.0), |acc, k| {
                let term = &plus.pow(k) * &minus.pow(n - k);
                &acc + &term.scale(p.coeff(k))
            })
        };
        Self::new(sub(&self.num), sub(&self.den), Domain::Continuous).map(|tf| tf.normalized())
    }

    /// Bilinear (Tustin) map s = (2/T)(z - 1)/(z + 1) to discrete time.
    pub fn tustin_to_discrete(&self, sample_time: f64) -> Result<Self> {
        if self.domain.is_discrete() {
            return Err(Error::DomainMismatch("tustin_to_discrete on a discrete system".into()));
        }
        let domain = Domain::discrete(sample_time)?;
        let n = self.num.degree().max(self.den.degree());
        let k = 2.0 / sample_time;
        let zm = Polynomial::new(vec![1.0, -1.0]);
        let zp = Polynomial::new(vec![1.0, 1.0]);
        let sub = |p: &Polynomial| {
            (0..=n).fold(Polynomial::constant(0.0), |acc, i| {
                let term = &zm.pow(i) * &zp.pow(n - i);
                &acc + &term.scale(p.coeff(i) * k.powi(i as i32))
            })
        };
        Self::new(sub(&self.num), sub(&self.den), domain).map(|tf| tf.normalized())
    }
}

impl fmt::Display for TransferFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let var = if self.domain.is_discrete() { "z" } else { "s" };
        let num = self.num.to_string().replace('x', var);
        let den = self.den.to_string().replace('x', var);
        write!(f, "({num}) / ({den})")
    }
}
