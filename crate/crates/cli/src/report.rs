//! Machine-readable outputs: the JSON experiment report, the CSV summary and
//! persisted solutions.
//!
//! Reports carry no wall-clock data, so identical inputs give byte-identical
//! JSON. Timings go to the `seconds` column of the CSV.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use shsa_core::scenario::{AccuracyModel, RemovalRule, ScenarioSolution};
use shsa_core::validate::{DeviationHistogram, Histogram, ViolationReport};

use crate::config::{matrix, to_rows, ExperimentConfig, Matrix};
use crate::error::{CliError, CliResult};

/// Bumped whenever a field of the JSON documents or a CSV column changes.
pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 8] = ["model", "alpha", "N", "J", "eps_hat", "ci_lo", "ci_hi", "seconds"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AccuracyDoc {
    Scalar { value: f64 },
    Quadratic { thetas: Vec<Matrix> },
}

impl From<&AccuracyModel> for AccuracyDoc {
    fn from(a: &AccuracyModel) -> Self {
        match a {
            AccuracyModel::Scalar(h) => AccuracyDoc::Scalar { value: *h },
            AccuracyModel::QuadraticPerMode(t) => AccuracyDoc::Quadratic { thetas: t.iter().map(to_rows).collect() },
        }
    }
}

impl AccuracyDoc {
    pub fn to_model(&self) -> CliResult<AccuracyModel> {
        let m = match self {
            AccuracyDoc::Scalar { value } => AccuracyModel::Scalar(*value),
            AccuracyDoc::Quadratic { thetas } => {
                AccuracyModel::QuadraticPerMode(thetas.iter().map(|t| matrix(t, "theta")).collect::<CliResult<_>>()?)
            }
        };
        m.validate().map_err(|e| CliError::Format(format!("stored accuracy: {e}")))?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionBody {
    pub accuracy: AccuracyDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_map: Option<Matrix>,
    pub removed: Vec<usize>,
    pub objective: f64,
    pub objective_history: Vec<f64>,
    pub alpha: f64,
    pub n: usize,
    pub rule: String,
    pub seed: u64,
    pub training_violation: f64,
}

fn rule_name(r: RemovalRule) -> &'static str {
    match r {
        RemovalRule::Greedy => "greedy",
        RemovalRule::Random => "random",
        RemovalRule::Block => "block",
    }
}

impl From<&ScenarioSolution> for SolutionBody {
    fn from(s: &ScenarioSolution) -> Self {
        SolutionBody {
            accuracy: (&s.accuracy).into(),
            init_map: s.init_map.as_ref().map(to_rows),
            removed: s.removed.clone(),
            objective: s.objective,
            objective_history: s.objective_history.clone(),
            alpha: s.meta.alpha,
            n: s.meta.n,
            rule: rule_name(s.meta.rule).into(),
            seed: s.meta.seed,
            training_violation: s.training_violation(),
        }
    }
}

/// A solution with everything needed to validate it later: the config that
/// produced it and the name of the model it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub schema_version: u32,
    pub model: String,
    pub config: ExperimentConfig,
    pub solution: SolutionBody,
}

impl SolutionDoc {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let doc: SolutionDoc =
            serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(CliError::Format(format!(
                "{}: schema version {} is not supported (expected {SCHEMA_VERSION})",
                path.display(),
                doc.schema_version
            )));
        }
        doc.config.validate()?;
        Ok(doc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationDoc {
    pub eps_hat: f64,
    pub m: usize,
    pub violations: usize,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub confidence: f64,
}

impl From<ViolationReport> for ViolationDoc {
    fn from(r: ViolationReport) -> Self {
        ViolationDoc {
            eps_hat: r.eps_hat,
            m: r.m,
            violations: r.violations,
            ci_lo: r.ci_lo,
            ci_hi: r.ci_hi,
            confidence: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramDoc {
    pub centers: Vec<f64>,
    pub counts: Vec<usize>,
    pub width: f64,
}

impl From<&Histogram> for HistogramDoc {
    fn from(h: &Histogram) -> Self {
        HistogramDoc { centers: h.centers.clone(), counts: h.counts.clone(), width: h.width }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationDoc {
    pub raw: HistogramDoc,
    pub scaled: HistogramDoc,
}

impl From<&DeviationHistogram> for DeviationDoc {
    fn from(h: &DeviationHistogram) -> Self {
        DeviationDoc { raw: (&h.raw).into(), scaled: (&h.scaled).into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Scenario,
    Design,
    TwoStep,
    Bisim,
}

/// One row of the experiment: a model at one violation level (or the
/// bi-simulation baseline).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: String,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    /// Expected accuracy `E[h(x0)]`.
    pub j: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ViolationDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<DeviationDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<SolutionBody>,
    /// Certificate matrix of the bi-simulation function.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Matrix>,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub root: u64,
    pub validation_root: u64,
    pub second_step_root: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub command: String,
    pub config: ExperimentConfig,
    pub seeds: Seeds,
    /// Integration step actually used.
    pub max_step: f64,
    pub cells: Vec<Cell>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> CliResult<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Format(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> CliResult<()> {
        let fmt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| CliError::Format(e.to_string());
        out.write_record(CSV_HEADER).map_err(err)?;
        for c in &self.cells {
            let v = c.validation.as_ref();
            out.write_record([
                c.model.clone(),
                fmt(c.alpha),
                c.n.map_or_else(String::new, |n| n.to_string()),
                c.j.to_string(),
                fmt(v.map(|v| v.eps_hat)),
                fmt(v.map(|v| v.ci_lo)),
                fmt(v.map(|v| v.ci_hi)),
                format!("{:.3}", c.seconds),
            ])
            .map_err(err)?;
        }
        out.flush().map_err(|e| CliError::Io(e.to_string()))
    }
}

pub fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}
