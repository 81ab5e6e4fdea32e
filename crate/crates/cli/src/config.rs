//! TOML run configuration. Unknown keys are rejected everywhere.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spde_taylor::harness::{ExperimentSpec, Mode, REFERENCE_SUBSTEPS};
use spde_taylor::model::{Nonlinearity, SpectralModel};
use spde_taylor::sampler::TimeIntegralMode;
use spde_taylor::schemes::{mode_covers, SchemeId};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSection,
    pub schemes: Vec<String>,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<SlopeCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<IdentitySection>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// `heat1d`, `trace3d` or `sode`.
    pub preset: String,
    /// Modes for `heat1d`, modes per axis for `trace3d`, dimension for `sode`.
    pub modes: usize,
    #[serde(default = "default_nonlinearity")]
    pub nonlinearity: String,
    /// Overrides the preset's `b_j`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_weights: Option<Vec<f64>>,
    /// Initial coefficients; zero if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
}

fn default_nonlinearity() -> String {
    "zero".into()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// `none`, `diagonal` or `full`; defaults to what the schemes need.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_integrals: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default = "one")]
    pub horizon: f64,
    pub steps: usize,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// `local` or `global`.
    pub mode: String,
    pub ladder: Vec<usize>,
    pub paths: usize,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "default_reference_substeps")]
    pub reference_substeps: usize,
}

fn default_reference_substeps() -> usize {
    REFERENCE_SUBSTEPS
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_dir() }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

/// A slope check evaluated by `converge --assert`. Either a range
/// (`min`/`max`) or a gap over another scheme (`exceeds`, `by`).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SlopeCheck {
    pub scheme: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exceeds: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub by: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IdentitySection {
    /// Derivation path of the wood, empty for `w0`.
    #[serde(default)]
    pub path: String,
    /// Node to expand.
    pub at: String,
    #[serde(default = "default_identity_h")]
    pub h: f64,
    #[serde(default = "default_identity_substeps")]
    pub substeps: usize,
}

impl Default for IdentitySection {
    fn default() -> Self {
        IdentitySection {
            path: String::new(),
            at: "(2,1)".into(),
            h: default_identity_h(),
            substeps: default_identity_substeps(),
        }
    }
}

fn default_identity_h() -> f64 {
    0.1
}

fn default_identity_substeps() -> usize {
    2048
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Canonical TOML of the effective configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn build_model(&self) -> Result<SpectralModel, CliError> {
        let m = &self.model;
        let nl = Nonlinearity::parse(&m.nonlinearity).map_err(|e| CliError::Config(e.to_string()))?;
        let weights = m.noise_weights.clone();
        let sode_weights = (m.preset == "sode").then(|| weights.clone()).flatten();
        let mut model = SpectralModel::from_preset(&m.preset, m.modes, nl, sode_weights)
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(w) = weights {
            if w.len() != model.dim() {
                return Err(CliError::Config(format!(
                    "noise_weights has {} entries, model has {} modes",
                    w.len(),
                    model.dim()
                )));
            }
            model.bs = w;
        }
        Ok(model)
    }

    pub fn initial(&self, model: &SpectralModel) -> Result<Vec<f64>, CliError> {
        match &self.model.initial {
            None => Ok(vec![0.0; model.dim()]),
            Some(v) if v.len() == model.dim() => Ok(v.clone()),
            Some(v) => Err(CliError::Config(format!(
                "initial has {} entries, model has {} modes",
                v.len(),
                model.dim()
            ))),
        }
    }

    pub fn schemes(&self) -> Result<Vec<SchemeId>, CliError> {
        if self.schemes.is_empty() {
            return Err(CliError::Config("no schemes listed".into()));
        }
        self.schemes
            .iter()
            .map(|s| s.parse::<SchemeId>().map_err(|e| CliError::Config(e.to_string())))
            .collect()
    }

    /// Configured time-integral mode, checked against every scheme.
    pub fn time_integrals(&self, model: &SpectralModel, schemes: &[SchemeId]) -> Result<TimeIntegralMode, CliError> {
        let need = schemes
            .iter()
            .map(|s| s.required_time_integrals(model))
            .fold(TimeIntegralMode::None, |a, b| if mode_covers(a, b) { a } else { b });
        let Some(name) = &self.noise.time_integrals else {
            return Ok(need);
        };
        let have = TimeIntegralMode::parse(name)
            .ok_or_else(|| CliError::Config(format!("unknown time_integrals `{name}`")))?;
        for &s in schemes {
            let n = s.required_time_integrals(model);
            if !mode_covers(have, n) {
                return Err(CliError::Config(format!(
                    "{s} needs {n:?} time integrals but noise.time_integrals = \"{name}\""
                )));
            }
        }
        Ok(have)
    }

    pub fn experiment_spec(&self) -> Result<ExperimentSpec, CliError> {
        let e = self
            .experiment
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [experiment] section".into()))?;
        let model = self.build_model()?;
        let schemes = self.schemes()?;
        let mode = match e.mode.as_str() {
            "local" => Mode::Local,
            "global" => Mode::Global,
            other => return Err(CliError::Config(format!("unknown mode `{other}`"))),
        };
        let ti = self.time_integrals(&model, &schemes)?;
        let u0 = self.initial(&model)?;
        let mut spec = ExperimentSpec::new(model, schemes, e.ladder.clone(), mode);
        spec.paths = e.paths;
        spec.seed = self.seed;
        spec.horizon = e.horizon;
        spec.u0 = u0;
        spec.time_integrals = ti;
        spec.reference_substeps = e.reference_substeps;
        spec.config_hash = self.hash();
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [model]
        preset = "heat1d"
        modes = 4
        schemes = ["exp_euler"]
    "#;

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "schemes = [\"exp_euler\"]\ncolour = 1\n[model]\npreset = \"heat1d\"\nmodes = 4\n";
        assert!(toml::from_str::<Config>(text).is_err());
        let text = "schemes = [\"exp_euler\"]\n[model]\npreset = \"heat1d\"\nmodes = 4\nalpha = 1\n";
        assert!(toml::from_str::<Config>(text).is_err());
    }

    #[test]
    fn minimal_config_defaults() {
        // `schemes` inside [model] is a model key, so it must be rejected
        assert!(toml::from_str::<Config>(MINIMAL).is_err());
        let text = "schemes = [\"exp_euler\"]\n[model]\npreset = \"heat1d\"\nmodes = 4\n";
        let c: Config = toml::from_str(text).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.model.nonlinearity, "zero");
        assert_eq!(c.output.dir, PathBuf::from("out"));
        let m = c.build_model().unwrap();
        assert_eq!(m.dim(), 4);
        assert_eq!(c.initial(&m).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn canonical_text_round_trips() {
        let text = "seed = 5\nschemes = [\"taylor_w3\"]\n[model]\npreset = \"trace3d\"\nmodes = 2\nnonlinearity = \"linear_mult:alpha=0.5\"\n";
        let c: Config = toml::from_str(text).unwrap();
        let again: Config = toml::from_str(&c.canonical()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(), c.hash());
    }

    #[test]
    fn time_integral_mismatch_is_reported() {
        let text = "schemes = [\"taylor_w3\"]\n[model]\npreset = \"heat1d\"\nmodes = 4\n[noise]\ntime_integrals = \"none\"\n";
        let c: Config = toml::from_str(text).unwrap();
        let m = c.build_model().unwrap();
        let err = c.time_integrals(&m, &c.schemes().unwrap()).unwrap_err();
        assert!(err.to_string().contains("taylor_w3"), "{err}");
    }
}
