//! JSON experiment configuration.
//!
//! One format, strict keys, decimal literals; a validated config maps onto a
//! [`MixtureSpec`] plus an [`InitialProfile`] and the run parameters.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MixtureError, Result};
use crate::grid::InitialProfile;
use crate::harness;
use crate::mixture::{MixtureSpec, PressureLaw};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mixture: MixtureConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    pub laws: Vec<PressureLaw>,
    #[serde(rename = "refDensities")]
    pub ref_densities: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "M")]
    pub m: usize,
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            m: harness::STANDARD_M,
            length: harness::STANDARD_LENGTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T_end")]
    pub t_end: f64,
    pub cfl: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_end: harness::STANDARD_T_END,
            cfl: harness::STANDARD_CFL,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProfileKind {
    #[serde(rename = "sine-mixture")]
    SineMixture,
    #[serde(rename = "gaussian-bump")]
    GaussianBump,
    #[serde(rename = "uniform")]
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: ProfileKind,
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub phases: Vec<f64>,
    #[serde(default)]
    pub velocity_amplitude: f64,
    #[serde(default)]
    pub centers: Vec<f64>,
    #[serde(default = "default_width")]
    pub width: f64,
}

fn default_width() -> f64 {
    0.1
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            kind: ProfileKind::Uniform,
            amplitudes: Vec::new(),
            phases: Vec::new(),
            velocity_amplitude: 0.0,
            centers: Vec::new(),
            width: default_width(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub eps_list: Vec<f64>,
    #[serde(default = "default_order_band")]
    pub order_band: [f64; 2],
}

fn default_order_band() -> [f64; 2] {
    [harness::ORDER_BAND.0, harness::ORDER_BAND.1]
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            eps_list: harness::STANDARD_EPS.to_vec(),
            order_band: default_order_band(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "out".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            MixtureError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| MixtureError::Config(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        self.spec()?;
        let profile = self.profile()?;
        profile.validate(&self.spec()?)?;
        if self.grid.m < crate::grid::MIN_CELLS {
            return Err(MixtureError::Config(format!(
                "grid.M must be at least {}, got {}",
                crate::grid::MIN_CELLS,
                self.grid.m
            )));
        }
        if !(self.grid.length > 0.0) {
            return Err(MixtureError::Config("grid.length must be positive".into()));
        }
        if !(self.time.t_end > 0.0) {
            return Err(MixtureError::Config("time.T_end must be positive".into()));
        }
        if !(self.time.cfl > 0.0 && self.time.cfl <= 1.0) {
            return Err(MixtureError::Config(format!(
                "time.cfl must lie in (0, 1], got {}",
                self.time.cfl
            )));
        }
        for &t in &self.time.snapshot_times {
            if !(0.0..=self.time.t_end).contains(&t) {
                return Err(MixtureError::Config(format!(
                    "snapshot time {t} outside [0, {}]",
                    self.time.t_end
                )));
            }
        }
        if self.sweep.eps_list.len() < 3 {
            return Err(MixtureError::Config(
                "sweep.eps_list needs at least 3 values".into(),
            ));
        }
        if self.sweep.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(MixtureError::Config(
                "sweep.eps_list must be strictly decreasing".into(),
            ));
        }
        if !(self.sweep.order_band[0] < self.sweep.order_band[1]) {
            return Err(MixtureError::Config(
                "sweep.order_band must be an increasing pair".into(),
            ));
        }
        Ok(())
    }

    /// Builds the validated mixture.
    pub fn spec(&self) -> Result<MixtureSpec> {
        let n = self.mixture.laws.len();
        if self.mixture.sigma.len() != n
            || self.mixture.sigma.iter().any(|row| row.len() != n)
        {
            return Err(MixtureError::Config(format!(
                "mixture.sigma must be a {n}x{n} matrix"
            )));
        }
        let sigma = DMatrix::from_fn(n, n, |i, j| self.mixture.sigma[i][j]);
        MixtureSpec::new(
            self.mixture.laws.clone(),
            self.mixture.ref_densities.clone(),
            sigma,
            self.mixture.epsilon,
            self.mixture.d,
        )
    }

    /// Builds the initial profile.
    pub fn profile(&self) -> Result<InitialProfile> {
        let n = self.mixture.laws.len();
        Ok(match self.initial.kind {
            ProfileKind::SineMixture => InitialProfile::SineMixture {
                amplitudes: self.initial.amplitudes.clone(),
                phases: if self.initial.phases.is_empty() {
                    vec![0.0; n]
                } else {
                    self.initial.phases.clone()
                },
                velocity_amplitude: self.initial.velocity_amplitude,
            },
            ProfileKind::GaussianBump => InitialProfile::GaussianBump {
                amplitudes: self.initial.amplitudes.clone(),
                centers: if self.initial.centers.is_empty() {
                    vec![0.5 * self.grid.length; n]
                } else {
                    self.initial.centers.clone()
                },
                width: self.initial.width,
            },
            ProfileKind::Uniform => InitialProfile::Uniform,
        })
    }

    /// The standard benchmark experiment, spelled out.
    pub fn standard() -> Self {
        let spec = harness::standard_mixture();
        let n = spec.n_species();
        Self {
            mixture: MixtureConfig {
                laws: spec.laws().to_vec(),
                ref_densities: spec.ref_densities().to_vec(),
                sigma: (0..n)
                    .map(|i| (0..n).map(|j| spec.sigma()[(i, j)]).collect())
                    .collect(),
                epsilon: spec.epsilon(),
                d: spec.dim(),
            },
            grid: GridConfig::default(),
            time: TimeConfig::default(),
            initial: match harness::standard_profile() {
                InitialProfile::SineMixture {
                    amplitudes,
                    phases,
                    velocity_amplitude,
                } => InitialConfig {
                    kind: ProfileKind::SineMixture,
                    amplitudes,
                    phases,
                    velocity_amplitude,
                    centers: Vec::new(),
                    width: default_width(),
                },
                _ => unreachable!("standard profile is a sine mixture"),
            },
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
        }
    }
}
