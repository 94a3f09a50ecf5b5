//! Disturbance and noise generators, and the identified piezo plant.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::{Domain, Polynomial, TransferFunction};

/// Bouc-Wen parameters. `gamma_pos`/`gamma_neg` apply for non-negative and
/// negative input respectively, which makes the loop asymmetric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoucWenParams {
    pub a: f64,
    pub beta: f64,
    pub gamma_pos: f64,
    pub gamma_neg: f64,
    /// Relaxation time constant in seconds; makes the loop rate dependent.
    pub tau: f64,
    /// Output scale: `d = gain * h`.
    pub gain: f64,
}

impl Default for BoucWenParams {
    fn default() -> Self {
        BoucWenParams {
            a: 0.2,
            beta: 0.0025,
            gamma_pos: 0.0012,
            gamma_neg: 0.0004,
            tau: 0.05,
            gain: -1.0,
        }
    }
}

impl BoucWenParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.beta, self.gamma_pos, self.gamma_neg, self.tau, self.gain];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("hysteresis parameters must be finite".into()));
        }
        if self.a < 0.0 {
            return Err(Error::InvalidParameter("hysteresis: a must be non-negative".into()));
        }
        if self.beta + self.gamma_pos.min(self.gamma_neg) <= 0.0 || self.beta <= 0.0 {
            return Err(Error::InvalidParameter(
                "hysteresis: need beta > 0 and beta + gamma > 0 for a bounded loop".into(),
            ));
        }
        if self.tau <= 0.0 {
            return Err(Error::InvalidParameter("hysteresis: tau must be positive".into()));
        }
        Ok(())
    }

    /// Bound on `|h|`.
    pub fn state_bound(&self) -> f64 {
        self.a / (self.beta + self.gamma_pos.min(self.gamma_neg))
    }
}

/// Stepped Bouc-Wen hysteresis with internal state `h`.
#[derive(Clone, Debug)]
pub struct HysteresisModel {
    params: BoucWenParams,
    h: f64,
    bound: f64,
}

impl HysteresisModel {
    pub fn new(params: BoucWenParams) -> Result<Self> {
        params.validate()?;
        let bound = params.state_bound();
        Ok(HysteresisModel { params, h: 0.0, bound })
    }

    pub fn params(&self) -> &BoucWenParams {
        &self.params
    }

    pub fn state(&self) -> f64 {
        self.h
    }

    pub fn reset(&mut self) {
        self.h = 0.0;
    }

    /// Declared bound on `|d|`.
    pub fn bound(&self) -> f64 {
        self.params.gain.abs() * self.bound
    }

    /// Advances by one sample of length `dt` given the current input `u`
    /// and its increment `du`; returns the disturbance `gain * h`.
    pub fn step(&mut self, u: f64, du: f64, dt: f64) -> f64 {
        let p = &self.params;
        let g = if u >= 0.0 { p.gamma_pos } else { p.gamma_neg };
        let m = ((du.abs() * p.a / (0.01 * self.bound)).ceil() as usize).clamp(1, 10_000);
        let (dd, ds) = (du / m as f64, dt / m as f64);
        let mut h = self.h;
        for _ in 0..m {
            h += p.a * dd - p.beta * dd.abs() * h - g * dd * h.abs() - h * ds / p.tau;
        }
        if !h.is_finite() {
            h = 0.0;
        }
        self.h = h.clamp(-self.bound, self.bound);
        p.gain * self.h
    }
}

/// Seeded Gaussian measurement noise, optionally low-pass shaped with a
/// first-order filter normalised to keep the requested standard deviation.
#[derive(Clone, Debug)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
    dist: Option<Normal<f64>>,
    pole: Option<f64>,
    state: f64,
}

impl NoiseSource {
    /// `shaping` is `(corner rad/s, sample time s)`.
    pub fn new(seed: u64, sigma: f64, shaping: Option<(f64, f64)>) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be >= 0, got {sigma}"
            )));
        }
        let pole = match shaping {
            Some((wc, ts)) if wc > 0.0 && ts > 0.0 => Some((-wc * ts).exp()),
            Some(_) => {
                return Err(Error::InvalidParameter(
                    "noise shaping needs positive corner and sample time".into(),
                ))
            }
            None => None,
        };
        let dist = if sigma > 0.0 {
            Some(Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?)
        } else {
            None
        };
        Ok(NoiseSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            dist,
            pole,
            state: 0.0,
        })
    }

    pub fn sample(&mut self) -> f64 {
        let Some(dist) = &self.dist else {
            return 0.0;
        };
        let w = dist.sample(&mut self.rng);
        match self.pole {
            None => w,
            Some(a) => {
                self.state = a * self.state + (1.0 - a * a).sqrt() * w;
                self.state
            }
        }
    }
}

/// Identified piezo stage model, input in volts, output in micrometres.
pub fn piezo_plant() -> TransferFunction {
    let num = Polynomial::new(vec![1.0, 439.8, 1.934e7]).scale(5.8e4);
    let den = &Polynomial::new(vec![1.0, 754.0, 1.421e7]) * &Polynomial::new(vec![1.0, 638.3, 3.948e7]);
    TransferFunction::new(num, den, Domain::Continuous).expect("piezo plant coefficients are finite")
}
