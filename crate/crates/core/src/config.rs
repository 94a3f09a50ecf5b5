//! JSON scenario files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arch::{self, Architecture, Rdob1, Rdob2};
use crate::error::{Error, Result};
use crate::models::BoucWenParams;
use crate::reset::{CgLpParams, ResetElement};
use crate::sim::{Reference, ScenarioSpec, SimMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Low-pass corner in rad/s.
    #[serde(default)]
    pub corner: Option<f64>,
}

fn default_seed() -> u64 {
    1
}

fn default_sigma() -> f64 {
    1e-3
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            seed: default_seed(),
            sigma: default_sigma(),
            corner: None,
        }
    }
}

fn default_hysteresis() -> Option<BoucWenParams> {
    Some(BoucWenParams::default())
}

fn default_duration() -> f64 {
    2.0
}

fn default_reference() -> Reference {
    Reference {
        amplitude: 1.0,
        frequency_hz: 30.0,
    }
}

fn default_discard() -> f64 {
    0.2
}

/// Declarative description of a `sim` run. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub preset: String,
    /// Architectures to run; all four when omitted.
    #[serde(default)]
    pub architectures: Option<Vec<Architecture>>,
    #[serde(default)]
    pub cglp_rdob1: Option<CgLpParams>,
    #[serde(default)]
    pub cglp_rdob2: Option<CgLpParams>,
    /// `null` disables the disturbance.
    #[serde(default = "default_hysteresis")]
    pub hysteresis: Option<BoucWenParams>,
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Defaults to discrete for sampled presets, continuous otherwise.
    #[serde(default)]
    pub mode: Option<SimMode>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_reference")]
    pub reference: Reference,
    /// Initial transient excluded from spectra and loops, in seconds.
    #[serde(default = "default_discard")]
    pub discard: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!(
                "duration: must be positive, got {}",
                self.duration
            )));
        }
        if !(self.discard >= 0.0 && self.discard < self.duration) {
            return Err(Error::Config(format!(
                "discard: must lie in [0, duration), got {}",
                self.discard
            )));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config(format!("dt: must be positive, got {dt}")));
            }
        }
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise.sigma: must be >= 0, got {}",
                self.noise.sigma
            )));
        }
        if let Some(h) = &self.hysteresis {
            h.validate().map_err(|e| Error::Config(format!("hysteresis: {e}")))?;
        }
        for (key, p) in [("cglp_rdob1", &self.cglp_rdob1), ("cglp_rdob2", &self.cglp_rdob2)] {
            if let Some(p) = p {
                p.validate().map_err(|e| Error::Config(format!("{key}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Resolves the preset and overrides into a runnable spec.
    pub fn to_spec(&self) -> Result<ScenarioSpec> {
        let mut preset = arch::preset(&self.preset)
            .map_err(|_| Error::Config(format!("preset: unknown preset `{}`", self.preset)))?;
        if let Some(p) = self.cglp_rdob1 {
            let r = &preset.rdob1;
            preset.rdob1 = Rdob1::new(r.dob.clone(), r.q1.clone(), ResetElement::cglp(p)?)?;
        }
        if let Some(p) = self.cglp_rdob2 {
            let r = &preset.rdob2;
            preset.rdob2 = Rdob2::new(r.dob.clone(), r.qco.clone(), ResetElement::cglp(p)?)?;
        }
        let mut spec = ScenarioSpec::tracking(preset, self.noise.seed);
        if let Some(a) = &self.architectures {
            if a.is_empty() {
                return Err(Error::Config("architectures: list is empty".into()));
            }
            spec.architectures = a.clone();
        }
        if let Some(m) = self.mode {
            spec.mode = m;
        }
        spec.dt = self.dt;
        spec.duration = self.duration;
        spec.reference = self.reference;
        spec.hysteresis = self.hysteresis.clone();
        spec.noise_sigma = self.noise.sigma;
        spec.noise_corner = self.noise.corner;
        Ok(spec)
    }
}
