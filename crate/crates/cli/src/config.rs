//! Experiment configuration (TOML).
//!
//! Matrices are written as arrays of rows. Everything numeric round-trips
//! exactly through [`ExperimentConfig::to_toml`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use shsa_core::bounds::BoundParams;
use shsa_core::jlss::{build_reduced_model, JlssModel, Reduction, X0Distribution};
use shsa_core::metrics::{DistanceKind, DistanceSpec, PointMetric};
use shsa_core::pipeline::ScenarioSource;
use shsa_core::scenario::{design_param_count, AccuracyKind, MomentData, RemovalRule, RemovalSettings};
use shsa_core::{DMatrix, DVector};

use crate::error::{CliError, CliResult};

pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub system: SystemSpec,
    pub simulation: SimulationSpec,
    pub x0: X0Spec,
    #[serde(default)]
    pub metric: MetricSpec,
    pub models: Vec<ModelSpec>,
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub removal: RemovalSpec,
    #[serde(default)]
    pub accuracy: AccuracySpec,
    pub seeds: SeedSpec,
    #[serde(default)]
    pub validation: ValidationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub drift: Matrix,
    pub diffusion: Matrix,
    pub reset: Matrix,
    pub output: Matrix,
    pub jump_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub horizon: f64,
    /// Defaults to `horizon / 1000`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum X0Spec {
    /// Zero mean and identity covariance unless given.
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        covariance: Option<Matrix>,
    },
    Point {
        value: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[default]
    Sup,
    Hausdorff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    #[default]
    Euclidean,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    #[serde(default)]
    pub kind: MetricKind,
    #[serde(default)]
    pub point: PointKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReductionSpec {
    Truncate { order: usize },
    NoDiffusion,
    NoJump,
    Explicit { drift: Matrix, diffusion: Matrix, reset: Matrix, output: Matrix },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub reduction: ReductionSpec,
    /// Fixed initialization map; defaults to the one implied by the reduction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_map: Option<Matrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub eps: f64,
    pub beta: f64,
    pub alphas: Vec<f64>,
    /// Overrides the number of decision variables derived from the
    /// parametrization; must not be smaller than it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    /// Overrides the scenario count from the bound (reduced-scale runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleSpec {
    #[default]
    Greedy,
    Random,
    Block,
}

impl From<RuleSpec> for RemovalRule {
    fn from(r: RuleSpec) -> Self {
        match r {
            RuleSpec::Greedy => RemovalRule::Greedy,
            RuleSpec::Random => RemovalRule::Random,
            RuleSpec::Block => RemovalRule::Block,
        }
    }
}

impl RuleSpec {
    pub fn name(self) -> &'static str {
        match self {
            RuleSpec::Greedy => "greedy",
            RuleSpec::Random => "random",
            RuleSpec::Block => "block",
        }
    }
}

fn default_tol_active() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemovalSpec {
    #[serde(default)]
    pub rule: RuleSpec,
    #[serde(default = "default_tol_active")]
    pub tol_active: f64,
}

impl Default for RemovalSpec {
    fn default() -> Self {
        RemovalSpec { rule: RuleSpec::Greedy, tol_active: default_tol_active() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyKindSpec {
    Scalar,
    #[default]
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracySpec {
    #[serde(default)]
    pub kind: AccuracyKindSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    pub root: u64,
}

fn default_validation_scenarios() -> usize {
    10_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSpec {
    /// Fresh scenarios for the violation estimate; 0 disables it.
    #[serde(default = "default_validation_scenarios")]
    pub scenarios: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<HistogramSpec>,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        ValidationSpec { scenarios: default_validation_scenarios(), histogram: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramSpec {
    pub n_x0: usize,
    pub n_w: usize,
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    /// `[alpha1, alpha2]` for the two-step procedure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_step: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

pub fn matrix(rows: &Matrix, what: &str) -> CliResult<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(CliError::Config(format!("{what}: matrix is empty")));
    }
    if let Some(bad) = rows.iter().position(|row| row.len() != c) {
        return Err(CliError::Config(format!("{what}: row {bad} has {} entries, expected {c}", rows[bad].len())));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Matrix {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn core_err(what: &str) -> impl FnOnce(shsa_core::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{what}: {e}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Format(e.to_string()))
    }

    /// Checks every invariant that does not need a simulation.
    pub fn validate(&self) -> CliResult<()> {
        let b = &self.bounds;
        if b.alphas.is_empty() {
            return Err(CliError::Config("bounds.alphas must not be empty".into()));
        }
        for &alpha in &b.alphas {
            BoundParams::new(b.eps, b.beta, alpha, 1).map_err(core_err("bounds"))?;
        }
        if !(self.simulation.horizon > 0.0) {
            return Err(CliError::Config("simulation.horizon must be positive".into()));
        }
        if let Some(dt) = self.simulation.max_step {
            if !(dt > 0.0) {
                return Err(CliError::Config("simulation.max_step must be positive".into()));
            }
        }
        if !(0.0..1.0).contains(&self.removal.tol_active) {
            return Err(CliError::Config("removal.tol_active must lie in [0, 1)".into()));
        }
        if self.models.is_empty() {
            return Err(CliError::Config("at least one model is required".into()));
        }
        let system = self.system()?;
        let x0 = self.x0_distribution()?;
        if x0.dim() != system.state_dim() {
            return Err(CliError::Config(format!(
                "x0 has dimension {}, the system state {}",
                x0.dim(),
                system.state_dim()
            )));
        }
        for (i, m) in self.models.iter().enumerate() {
            if self.models[..i].iter().any(|o| o.name == m.name) {
                return Err(CliError::Config(format!("duplicate model name {:?}", m.name)));
            }
            self.model(m)?;
        }
        if self.metric.point == PointKind::Hybrid {
            return Err(CliError::Config(
                "metric.point = \"hybrid\" needs mode labels, which jump linear systems do not produce".into(),
            ));
        }
        if let (Some(r), Some(derived)) = (b.r, self.derived_r(&self.models[0], false).ok()) {
            if r < derived {
                return Err(CliError::Config(format!(
                    "bounds.r = {r} is smaller than the {derived} decision variables of the parametrization"
                )));
            }
        }
        if let Some(DesignSpec { two_step: Some([a1, a2]) }) = self.design {
            if !(a1 <= a2 && a2 < b.eps && a1 >= 0.0) {
                return Err(CliError::Config(format!(
                    "design.two_step needs 0 <= alpha1 <= alpha2 < eps, got [{a1}, {a2}] with eps = {}",
                    b.eps
                )));
            }
        }
        Ok(())
    }

    pub fn system(&self) -> CliResult<JlssModel> {
        let s = &self.system;
        JlssModel::new(
            matrix(&s.drift, "system.drift")?,
            matrix(&s.diffusion, "system.diffusion")?,
            matrix(&s.reset, "system.reset")?,
            matrix(&s.output, "system.output")?,
            s.jump_rate,
        )
        .map_err(core_err("system"))
    }

    pub fn model(&self, spec: &ModelSpec) -> CliResult<JlssModel> {
        let system = self.system()?;
        let what = format!("model {}", spec.name);
        let m = match &spec.reduction {
            ReductionSpec::Truncate { order } => build_reduced_model(&system, Reduction::Truncate(*order)),
            ReductionSpec::NoDiffusion => build_reduced_model(&system, Reduction::NoDiffusion),
            ReductionSpec::NoJump => build_reduced_model(&system, Reduction::NoJump),
            ReductionSpec::Explicit { drift, diffusion, reset, output } => {
                let n = matrix(drift, &what)?.nrows();
                JlssModel::new(
                    matrix(drift, &what)?,
                    matrix(diffusion, &what)?,
                    matrix(reset, &what)?,
                    matrix(output, &what)?,
                    system.jump_rate,
                )
                .and_then(|m| m.with_init_map(DMatrix::from_fn(n, system.state_dim(), |i, j| (i == j) as u8 as f64)))
            }
        }
        .map_err(core_err(&what))?;
        let m = match &spec.init_map {
            Some(l) => m.with_init_map(matrix(l, &what)?).map_err(core_err(&what))?,
            None => m,
        };
        if m.output_dim() != system.output_dim() {
            return Err(CliError::Config(format!("{what}: output dimension differs from the system")));
        }
        Ok(m)
    }

    pub fn model_named(&self, name: &str) -> CliResult<(usize, JlssModel)> {
        let i = self
            .models
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| CliError::Config(format!("no model named {name:?}")))?;
        Ok((i, self.model(&self.models[i])?))
    }

    pub fn x0_distribution(&self) -> CliResult<X0Distribution> {
        match &self.x0 {
            X0Spec::Point { value } => Ok(X0Distribution::point(DVector::from_vec(value.clone()))),
            X0Spec::Gaussian { mean, covariance } => {
                let n = self.system.drift.len();
                let mean = DVector::from_vec(mean.clone().unwrap_or_else(|| vec![0.0; n]));
                let cov = match covariance {
                    Some(c) => matrix(c, "x0.covariance")?,
                    None => DMatrix::identity(mean.len(), mean.len()),
                };
                X0Distribution::gaussian(mean, cov).map_err(core_err("x0"))
            }
        }
    }

    pub fn max_step(&self) -> f64 {
        self.simulation.max_step.unwrap_or(self.simulation.horizon * 1e-3)
    }

    pub fn source(&self) -> CliResult<ScenarioSource> {
        Ok(ScenarioSource {
            x0: self.x0_distribution()?,
            horizon: self.simulation.horizon,
            jump_rate: self.system.jump_rate,
            max_step: self.max_step(),
        })
    }

    pub fn distance_spec(&self) -> DistanceSpec {
        DistanceSpec {
            kind: match self.metric.kind {
                MetricKind::Sup => DistanceKind::Sup,
                MetricKind::Hausdorff => DistanceKind::DirectionalHausdorff,
            },
            point_metric: match self.metric.point {
                PointKind::Euclidean => PointMetric::Euclidean,
                PointKind::Hybrid => PointMetric::HybridEuclidean,
            },
        }
    }

    pub fn accuracy_kind(&self) -> CliResult<AccuracyKind> {
        Ok(match self.accuracy.kind {
            AccuracyKindSpec::Scalar => AccuracyKind::Scalar,
            AccuracyKindSpec::Quadratic => {
                AccuracyKind::Quadratic(MomentData::from_distribution(&self.x0_distribution()?))
            }
        })
    }

    /// Decision-variable count of the assessment (`design = false`) or the
    /// joint design problem for one model.
    pub fn derived_r(&self, spec: &ModelSpec, design: bool) -> CliResult<usize> {
        let kind = self.accuracy_kind()?;
        if design {
            let m = self.model(spec)?;
            Ok(design_param_count(m.state_dim(), m.source_dim(), &kind))
        } else {
            Ok(kind.param_count())
        }
    }

    /// `r` used in the sample-size bound: the override when present.
    pub fn r(&self, spec: &ModelSpec, design: bool) -> CliResult<usize> {
        let derived = self.derived_r(spec, design)?;
        match self.bounds.r {
            Some(r) if r < derived => Err(CliError::Config(format!(
                "bounds.r = {r} is smaller than the {derived} decision variables of model {}",
                spec.name
            ))),
            Some(r) => Ok(r),
            None => Ok(derived),
        }
    }

    pub fn removal_settings(&self) -> RemovalSettings {
        let mut s = RemovalSettings::new(self.removal.rule.into(), self.seeds.root);
        s.tol_active = self.removal.tol_active;
        s
    }
}
