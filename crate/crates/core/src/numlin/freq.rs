use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex response sampled on a frequency grid (rad/s).
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyResponse {
    pub omega: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl FrequencyResponse {
    pub fn new(omega: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if omega.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} frequencies, {} values",
                omega.len(),
                values.len()
            )));
        }
        Ok(FrequencyResponse { omega, values })
    }

    /// Evaluate `f` at every grid point.
    pub fn from_fn<F>(omega: &[f64], f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<Complex64>,
    {
        let values = omega.iter().map(|w| f(*w)).collect::<Result<Vec<_>>>()?;
        Self::new(omega.to_vec(), values)
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn magnitude_db(&self) -> Vec<f64> {
        self.values.iter().map(|v| 20.0 * v.norm().log10()).collect()
    }

    /// Principal-value phase in degrees.
    pub fn phase_deg(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.arg().to_degrees()).collect()
    }

    /// Pointwise combination of two responses on the same grid.
    pub fn zip_with<F>(&self, other: &FrequencyResponse, f: F) -> Result<FrequencyResponse>
    where
        F: Fn(Complex64, Complex64) -> Complex64,
    {
        if self.omega != other.omega {
            return Err(Error::Dimension("responses on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Ok(FrequencyResponse {
            omega: self.omega.clone(),
            values,
        })
    }

    pub fn map<F>(&self, f: F) -> FrequencyResponse
    where
        F: Fn(Complex64) -> Complex64,
    {
        FrequencyResponse {
            omega: self.omega.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }
}

/// Logarithmically spaced grid from `min` to `max` inclusive with
/// `per_decade` points per decade.
pub fn log_grid(min: f64, max: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max > min && min.is_finite() && max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "grid bounds must satisfy 0 < min < max, got [{min}, {max}]"
        )));
    }
    if per_decade == 0 {
        return Err(Error::InvalidParameter(
            "grid needs at least one point per decade".into(),
        ));
    }
    let decades = (max / min).log10();
    let n = (decades * per_decade as f64).round().max(1.0) as usize;
    let (l0, l1) = (min.log10(), max.log10());
    Ok((0..=n)
        .map(|i| {
            if i == n {
                max
            } else {
                10f64.powf(l0 + (l1 - l0) * i as f64 / n as f64)
            }
        })
        .collect())
}
