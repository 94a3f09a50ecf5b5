use nalgebra::DMatrix;
use num_complex::Complex64;

use super::freq::FrequencyResponse;
use super::linalg::{self, Mat};
use super::tf::Domain;
use crate::error::{Error, Result};

/// State-space model `x' = Ax + Bu, y = Cx + Du` (or the difference
/// equation in discrete time).
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
    pub domain: Domain,
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat, domain: Domain) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "A {}x{}, B {}x{}, C {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(StateSpace { a, b, c, d, domain })
    }

    /// Memoryless gain `y = k u`.
    pub fn static_gain(k: f64, domain: Domain) -> Self {
        StateSpace {
            a: Mat::zeros(0, 0),
            b: Mat::zeros(0, 1),
            c: Mat::zeros(1, 0),
            d: Mat::from_element(1, 1, k),
            domain,
        }
    }

    /// One-sample delay `z^-1`.
    pub fn unit_delay(sample_time: f64) -> Result<Self> {
        Self::new(
            Mat::zeros(1, 1),
            Mat::from_element(1, 1, 1.0),
            Mat::from_element(1, 1, 1.0),
            Mat::zeros(1, 1),
            Domain::discrete(sample_time)?,
        )
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    fn require_siso(&self) -> Result<()> {
        if self.inputs() != 1 || self.outputs() != 1 {
            return Err(Error::Dimension(format!(
                "expected SISO, got {} inputs, {} outputs",
                self.inputs(),
                self.outputs()
            )));
        }
        Ok(())
    }

    /// `C (xI - A)^-1 B + D` at a point of the complex plane.
    pub fn eval_at(&self, x: Complex64) -> Result<DMatrix<Complex64>> {
        let n = self.order();
        let cd = |m: &Mat| m.map(|v| Complex64::new(v, 0.0));
        if n == 0 {
            return Ok(cd(&self.d));
        }
        let m = DMatrix::<Complex64>::identity(n, n) * x - cd(&self.a);
        let sol = m
            .lu()
            .solve(&cd(&self.b))
            .filter(|s| s.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
            .ok_or(Error::Pole(x.im))?;
        Ok(cd(&self.c) * sol + cd(&self.d))
    }

    /// SISO frequency response at angular frequency `omega`.
    pub fn eval(&self, omega: f64) -> Result<Complex64> {
        self.require_siso()?;
        Ok(self.eval_at(self.domain.point(omega)).map_err(|_| Error::Pole(omega))?[(0, 0)])
    }

    pub fn frequency_response(&self, omega: &[f64]) -> Result<FrequencyResponse> {
        let values = omega.iter().map(|w| self.eval(*w)).collect::<Result<Vec<_>>>()?;
        FrequencyResponse::new(omega.to_vec(), values)
    }

    /// `next ∘ self`: the output of `self` drives `next`.
    pub fn series(&self, next: &StateSpace) -> Result<StateSpace> {
        self.domain.check_same(&next.domain, "series")?;
        if self.outputs() != next.inputs() {
            return Err(Error::Dimension("series: output/input count".into()));
        }
        let (n1, n2) = (self.order(), next.order());
        let mut a = Mat::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&next.a);
        a.view_mut((n1, 0), (n2, n1)).copy_from(&(&next.b * &self.c));
        let mut b = Mat::zeros(n1 + n2, self.inputs());
        b.view_mut((0, 0), (n1, self.inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.inputs())).copy_from(&(&next.b * &self.d));
        let mut c = Mat::zeros(next.outputs(), n1 + n2);
        c.view_mut((0, 0), (next.outputs(), n1)).copy_from(&(&next.d * &self.c));
        c.view_mut((0, n1), (next.outputs(), n2)).copy_from(&next.c);
        let d = &next.d * &self.d;
        StateSpace::new(a, b, c, d, self.domain)
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        linalg::eigenvalues(&self.a)
    }

    pub fn is_stable(&self) -> Result<bool> {
        let p = self.poles()?;
        Ok(match self.domain {
            Domain::Continuous => p.iter().all(|z| z.re < 0.0),
            Domain::Discrete { .. } => p.iter().all(|z| z.norm() < 1.0),
        })
    }

    /// Diagonal similarity that evens out row and column norms of A.
    pub fn balanced(&self) -> StateSpace {
        let (a, d) = linalg::balance(&self.a);
        let mut b = self.b.clone();
        let mut c = self.c.clone();
        for i in 0..self.order() {
            b.row_mut(i).scale_mut(1.0 / d[i]);
            c.column_mut(i).scale_mut(d[i]);
        }
        StateSpace {
            a,
            b,
            c,
            d: self.d.clone(),
            domain: self.domain,
        }
    }

    /// Zero-order-hold discretization.
    pub fn discretize_zoh(&self, sample_time: f64) -> Result<StateSpace> {
        if self.domain.is_discrete() {
            return Err(Error::DomainMismatch("zoh of a discrete system".into()));
        }
        let domain = Domain::discrete(sample_time)?;
        let (n, m) = (self.order(), self.inputs());
        let mut big = Mat::zeros(n + m, n + m);
        big.view_mut((0, 0), (n, n)).copy_from(&self.a);
        big.view_mut((0, n), (n, m)).copy_from(&self.b);
        let e = linalg::expm(&(big * sample_time))?;
        StateSpace::new(
            e.view((0, 0), (n, n)).into_owned(),
            e.view((0, n), (n, m)).into_owned(),
            self.c.clone(),
            self.d.clone(),
            domain,
        )
    }

    /// Bilinear (Tustin) discretization.
    pub fn discretize_tustin(&self, sample_time: f64) -> Result<StateSpace> {
        if self.domain.is_discrete() {
            return Err(Error::DomainMismatch("tustin of a discrete system".into()));
        }
        let domain = Domain::discrete(sample_time)?;
        let n = self.order();
        let id = Mat::identity(n, n);
        let half = &self.a * (sample_time / 2.0);
        let m = linalg::inverse(&(&id - &half))?;
        let a = &m * (&id + &half);
        let b = &m * &self.b * sample_time;
        let c = &self.c * &m;
        let d = &self.d + &c * &self.b * (sample_time / 2.0);
        StateSpace::new(a, b, c, d, domain)
    }
}

#[cfg(test)]
mod tests {
    use crate::numlin::TransferFunction;

    #[test]
    fn realization_matches_transfer_function() {
        let g = TransferFunction::continuous(&[3.0, 1.0, 2.0], &[2.0, 1.0, 5.0, 1.0]).unwrap();
        let ss = g.to_state_space().unwrap();
        for w in [0.01, 0.7, 3.0, 100.0] {
            assert!((ss.eval(w).unwrap() - g.eval(w).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn biproper_realization_has_feedthrough() {
        let g = TransferFunction::continuous(&[2.0, 1.0], &[1.0, 4.0]).unwrap();
        let ss = g.to_state_space().unwrap();
        assert_eq!(ss.d[(0, 0)], 2.0);
        assert!((ss.eval(1.5).unwrap() - g.eval(1.5).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn series_matches_product() {
        let g1 = TransferFunction::continuous(&[1.0], &[1.0, 2.0]).unwrap();
        let g2 = TransferFunction::continuous(&[1.0, 3.0], &[1.0, 1.0, 9.0]).unwrap();
        let s = g1
            .to_state_space()
            .unwrap()
            .series(&g2.to_state_space().unwrap())
            .unwrap();
        let p = g1.series(&g2).unwrap();
        for w in [0.2, 3.0, 40.0] {
            assert!((s.eval(w).unwrap() - p.eval(w).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn zoh_of_integrator() {
        let g = TransferFunction::continuous(&[1.0], &[1.0, 0.0]).unwrap();
        let d = g.to_state_space().unwrap().discretize_zoh(0.1).unwrap();
        assert!((d.a[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((d.b[(0, 0)] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn tustin_state_space_matches_polynomial_map() {
        let g = TransferFunction::continuous(&[5.0, 2.0], &[1.0, 3.0, 7.0]).unwrap();
        let a = g.to_state_space().unwrap().discretize_tustin(1e-2).unwrap();
        let b = g.tustin_to_discrete(1e-2).unwrap();
        for w in [0.3, 10.0, 200.0] {
            assert!((a.eval(w).unwrap() - b.eval(w).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn balancing_keeps_response() {
        let g = TransferFunction::continuous(&[1e8], &[1.0, 2e3, 1e8]).unwrap();
        let ss = g.to_state_space().unwrap();
        let bal = ss.balanced();
        for w in [10.0, 1e4, 1e6] {
            let x = ss.eval(w).unwrap();
            assert!((bal.eval(w).unwrap() - x).norm() < 1e-10 * x.norm());
        }
    }
}
