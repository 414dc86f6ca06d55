//! TOML run configuration with embedded defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ModelParams, TestFunctionParams};
use crate::wave::{make_initial_data, InitialData, Profile, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub model: ModelSection,
    pub test_function: TestFunctionSection,
    pub solver: SolverSection,
    pub data: DataSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub n: usize,
    pub mu: f64,
    pub nu_sq: f64,
    pub p: f64,
    /// Radius of the data support.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestFunctionSection {
    pub d: f64,
    /// Omitted means `eta_1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub dx: f64,
    pub cfl: f64,
    pub t_max: f64,
    pub blowup_threshold: f64,
    pub outer_margin: f64,
    pub nonlinearity: bool,
    pub snapshot_interval: f64,
    pub snapshot_stride: usize,
    /// Grid levels used by `verify` and `sweep` (each halves `dx`).
    pub refinements: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub profile: Profile,
    pub epsilon: f64,
    pub amplitude_f: f64,
    pub amplitude_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("blowuplab-out"),
            model: ModelSection::default(),
            test_function: TestFunctionSection::default(),
            solver: SolverSection::default(),
            data: DataSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { n: 1, mu: 0.5, nu_sq: 0.25, p: 2.0, radius: 1.0 }
    }
}

impl Default for TestFunctionSection {
    fn default() -> Self {
        Self { d: 1.0, eta: None }
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::for_radius(1.0);
        Self {
            dx: s.dx,
            cfl: s.cfl,
            t_max: s.t_max,
            blowup_threshold: s.blowup_threshold,
            outer_margin: s.outer_margin,
            nonlinearity: s.nonlinearity,
            snapshot_interval: 1.0,
            snapshot_stride: 10,
            refinements: 3,
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        Self { profile: Profile::Bump, epsilon: 0.1, amplitude_f: 1.0, amplitude_g: 1.0 }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { epsilons: vec![0.05, 0.1, 0.2, 0.4] }
    }
}

/// A configuration checked against the hypotheses, ready to run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: ModelParams,
    pub params: TestFunctionParams,
    pub solver: SolverConfig,
    pub data: InitialData,
    pub epsilons: Vec<f64>,
    pub refinements: u32,
    pub output_dir: PathBuf,
    /// Hypotheses that are violated but do not prevent a run.
    pub warnings: Vec<String>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The default configuration as commented TOML.
    pub fn defaults_text() -> String {
        let body = Self::default().to_toml().expect("defaults serialize");
        format!(
            "# blowuplab defaults. Omitted keys take these values.\n\
             # [test_function] eta may be set explicitly; when absent it is eta_1.\n\n{body}"
        )
    }

    /// Validates every section. With `for_sweep`, `theta > 0` is required.
    pub fn resolve(&self, for_sweep: bool) -> Result<Resolved> {
        let as_config = |e: Error| match e {
            Error::Domain(m) => Error::Config(m),
            other => other,
        };
        let m = &self.model;
        let model = ModelParams::new(m.n, m.mu, m.nu_sq, m.p, m.radius).map_err(as_config)?;
        let tf = &self.test_function;
        let params = TestFunctionParams::new(&model, tf.d, tf.eta).map_err(as_config)?;
        if for_sweep {
            params.require_positive_theta(&model)?;
        }
        let mut warnings = Vec::new();
        if !model.is_subcritical() {
            warnings.push(format!(
                "p = {} is not below the critical exponent for n + mu = {}: blow-up is not guaranteed",
                model.p,
                model.n as f64 + model.mu
            ));
        }
        if !params.eta_at_least_eta_1() {
            warnings.push(format!(
                "eta = {} is below eta_1 = {}: dependent checks are vacuous",
                params.eta, params.thresholds.eta_1
            ));
        }
        let s = &self.solver;
        let solver = SolverConfig {
            dx: s.dx,
            cfl: s.cfl,
            t_max: s.t_max,
            blowup_threshold: s.blowup_threshold,
            outer_margin: s.outer_margin,
            nonlinearity: s.nonlinearity,
            snapshot_interval: s.snapshot_interval,
            snapshot_stride: s.snapshot_stride,
            steps_per_unit: None,
        };
        solver.validate()?;
        if s.refinements == 0 || s.refinements > 6 {
            return Err(Error::Config(format!("refinements = {} must lie in 1..=6", s.refinements)));
        }
        let d = &self.data;
        let data = if d.epsilon == 0.0 {
            InitialData { profile: d.profile, epsilon: 0.0, ..InitialData::zero(&model) }
        } else {
            let mut data = make_initial_data(&model, d.epsilon, d.amplitude_f, d.amplitude_g).map_err(as_config)?;
            data.profile = d.profile;
            data
        };
        if for_sweep {
            if self.sweep.epsilons.is_empty() {
                return Err(Error::Config("sweep.epsilons is empty".into()));
            }
            if let Some(e) = self.sweep.epsilons.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
                return Err(Error::Config(format!("sweep epsilon {e} must be positive")));
            }
        }
        Ok(Resolved {
            model,
            params,
            solver,
            data,
            epsilons: self.sweep.epsilons.clone(),
            refinements: s.refinements,
            output_dir: self.output_dir.clone(),
            warnings,
        })
    }
}
