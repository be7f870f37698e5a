//! Experiment configuration: a TOML file with `[operator]`, `[data]`, `[run]`
//! and `[audits]` sections. See the README for the full key list.

use std::fs;
use std::path::{Path, PathBuf};

use kirchhoff_core::grid::probe_time;
use kirchhoff_core::spectral::{InitialData, MuNuProfile, SpectralOperator};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operator: OperatorSection,
    pub data: DataSection,
    pub run: RunSection,
    #[serde(default)]
    pub audits: AuditSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    /// Eigenvalues of `A`, ascending.
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub u0: Vec<f64>,
    /// Zero when omitted.
    #[serde(default)]
    pub u1: Option<Vec<f64>>,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub epsilons: Vec<f64>,
    #[serde(default = "defaults::horizon")]
    pub horizon: f64,
    #[serde(default = "defaults::samples_per_decade")]
    pub samples_per_decade: usize,
    #[serde(default = "defaults::rel_tol_parabolic")]
    pub rel_tol_parabolic: f64,
    #[serde(default = "defaults::rel_tol_hyperbolic")]
    pub rel_tol_hyperbolic: f64,
    #[serde(default = "defaults::tol_energy")]
    pub tol_energy: f64,
    #[serde(default)]
    pub regime: RegimeExpectation,
    #[serde(default = "defaults::eps_max")]
    pub eps_max: f64,
    #[serde(default = "defaults::blowup_horizon")]
    pub blowup_horizon: f64,
    #[serde(default = "defaults::stability_factor")]
    pub stability_factor: f64,
    #[serde(default = "defaults::lower_floor")]
    pub lower_floor: f64,
    #[serde(default = "defaults::slope_tolerance")]
    pub slope_tolerance: f64,
    /// Not echoed into reports, so artifacts do not depend on where they are written.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    /// Empty means every audit that applies to the data.
    #[serde(default)]
    pub list: Vec<AuditKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditKind {
    Decay,
    Growth,
    DecayError,
    Optimality,
    Improved,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeExpectation {
    Deteriorated,
    Improved,
    #[default]
    Auto,
}

mod defaults {
    pub fn gamma() -> f64 {
        1.0
    }
    pub fn horizon() -> f64 {
        1e4
    }
    pub fn samples_per_decade() -> usize {
        20
    }
    pub fn rel_tol_parabolic() -> f64 {
        1e-11
    }
    pub fn rel_tol_hyperbolic() -> f64 {
        1e-10
    }
    pub fn tol_energy() -> f64 {
        1e-9
    }
    pub fn eps_max() -> f64 {
        0.5
    }
    pub fn blowup_horizon() -> f64 {
        1e3
    }
    pub fn stability_factor() -> f64 {
        3.0
    }
    pub fn lower_floor() -> f64 {
        1e-8
    }
    pub fn slope_tolerance() -> f64 {
        0.15
    }
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub horizon: Option<f64>,
    pub ladder: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_owned(), source })?;
        Self::from_toml(&text)
    }

    pub fn apply(mut self, o: &Overrides) -> Self {
        if let Some(h) = o.horizon {
            self.run.horizon = h;
        }
        if let Some(l) = &o.ladder {
            self.run.epsilons = l.clone();
        }
        if let Some(out) = &o.out {
            self.run.output_dir = Some(out.clone());
        }
        self
    }

    pub fn validate(self) -> Result<Experiment> {
        let run = &self.run;
        let bad = |msg: String| Err(CliError::Config(msg));
        if run.epsilons.is_empty() {
            return bad("run.epsilons must not be empty".into());
        }
        if let Some(e) = run.epsilons.iter().find(|e| !(**e > 0.0 && **e < run.eps_max)) {
            return bad(format!("epsilon {e} outside (0, {})", run.eps_max));
        }
        if !(run.horizon > 0.0 && run.horizon.is_finite()) {
            return bad(format!("horizon {} must be positive and finite", run.horizon));
        }
        if let Some(e) = run.epsilons.iter().find(|e| **e / 10.0 >= run.horizon) {
            return bad(format!("horizon {} does not reach past the layer of epsilon {e}", run.horizon));
        }
        if run.samples_per_decade == 0 {
            return bad("samples_per_decade must be positive".into());
        }
        for (name, v) in [
            ("rel_tol_parabolic", run.rel_tol_parabolic),
            ("rel_tol_hyperbolic", run.rel_tol_hyperbolic),
            ("tol_energy", run.tol_energy),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} = {v} must lie in (0, 1)"));
            }
        }
        if run.stability_factor.is_nan() || run.stability_factor < 1.0 {
            return bad(format!("stability_factor {} must be at least 1", run.stability_factor));
        }

        let config_err = |e: kirchhoff_core::error::Error| CliError::Config(e.to_string());
        let op = SpectralOperator::new(self.operator.eigenvalues.clone()).map_err(config_err)?;
        let u1 = self.data.u1.clone().unwrap_or_else(|| vec![0.0; self.data.u0.len()]);
        let data =
            InitialData::new(&op, self.data.u0.clone().into(), u1.into(), self.data.gamma).map_err(config_err)?;
        let profile = op.classify(&data).map_err(config_err)?;

        let deteriorated = profile.regime.is_deteriorated();
        match run.regime {
            RegimeExpectation::Deteriorated if !deteriorated => {
                return bad(format!("regime declared deteriorated, data is {}", profile.regime.as_str()));
            }
            RegimeExpectation::Improved if deteriorated => {
                return bad("regime declared improved, data is deteriorated".into());
            }
            _ => {}
        }

        let kernel = op.kernel_modes().iter().any(|&k| data.u0.0[k] != 0.0 || data.u1.0[k] != 0.0);
        let probe_fits = profile.delta.is_some_and(|d| run.epsilons.iter().all(|e| probe_time(*e, d) <= run.horizon));
        let audits = if self.audits.list.is_empty() {
            let mut a = vec![AuditKind::Decay];
            if !kernel {
                a.push(AuditKind::Growth);
            }
            if profile.delta.is_some() {
                a.push(AuditKind::DecayError);
                if probe_fits {
                    a.push(AuditKind::Optimality);
                }
            }
            if profile.delta_improved.is_some() {
                a.push(AuditKind::Improved);
            }
            a
        } else {
            let mut a = self.audits.list.clone();
            a.sort();
            a.dedup();
            for kind in &a {
                match kind {
                    AuditKind::Growth if kernel => {
                        return bad("growth audit needs data without kernel components".into());
                    }
                    AuditKind::DecayError | AuditKind::Optimality if profile.delta.is_none() => {
                        return bad(format!("{kind:?} audit needs ν ≤ μ, data is {}", profile.regime.as_str()));
                    }
                    AuditKind::Optimality if !probe_fits => {
                        return bad("optimality audit needs every probe time ε^(-δ) within the horizon".into());
                    }
                    AuditKind::Improved if profile.delta_improved.is_none() => {
                        return bad("improved audit needs data in an improved regime".into());
                    }
                    _ => {}
                }
            }
            a
        };
        Ok(Experiment { config: self, op, data, profile, audits })
    }
}

/// A validated configuration together with the objects it describes.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub op: SpectralOperator,
    pub data: InitialData,
    pub profile: MuNuProfile,
    pub audits: Vec<AuditKind>,
}

impl Experiment {
    pub fn has(&self, kind: AuditKind) -> bool {
        self.audits.contains(&kind)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.config.run.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}
