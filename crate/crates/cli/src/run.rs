//! Experiment workflows behind the subcommands.

use std::time::Instant;

use shsa_core::bisim::solve_bisim_sdp;
use shsa_core::bounds::{min_n_chernoff, min_n_implicit, min_n_vc, BoundParams};
use shsa_core::jlss::{simulate, JlssModel};
use shsa_core::metrics::DistanceSpec;
use shsa_core::pipeline::{
    assess, paired_distances, second_step_size, two_step_design, DesignData, PairedSample, ScenarioSource,
};
use shsa_core::scenario::{design_init_map, AccuracyKind, ScenarioSolution};
use shsa_core::seed::{scenario_seed, validation_root, SECOND_STEP_TAG};
use shsa_core::validate::{deviation_histogram, estimate_violation, AccuracyFn};

use crate::config::{to_rows, ExperimentConfig, ModelSpec};
use crate::error::{CliError, CliResult, Stage};
use crate::exec::Rayon;
use crate::report::{Cell, ExperimentReport, Method, Seeds, SolutionBody, SolutionDoc, SCHEMA_VERSION};

/// The three sample sizes for one parameter tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSizes {
    pub implicit: usize,
    pub chernoff: usize,
    pub vc: usize,
}

pub fn sample_sizes(eps: f64, beta: f64, alpha: f64, r: usize) -> CliResult<SampleSizes> {
    let p = BoundParams::new(eps, beta, alpha, r).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(SampleSizes {
        implicit: min_n_implicit(&p).stage("bounds")?,
        chernoff: min_n_chernoff(&p).stage("bounds")?,
        vc: min_n_vc(&p).stage("bounds")?,
    })
}

/// Solution documents keyed by file stem.
pub type Solutions = Vec<(String, SolutionDoc)>;

/// Output of a run: the report plus the solutions worth persisting.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub solutions: Solutions,
}

/// Resolved pieces of a config shared by every workflow.
#[derive(Debug)]
pub struct Runner<'a> {
    pub cfg: &'a ExperimentConfig,
    system: JlssModel,
    source: ScenarioSource,
    spec: DistanceSpec,
    kind: AccuracyKind,
    exec: Rayon,
}

impl<'a> Runner<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> CliResult<Self> {
        cfg.validate()?;
        Ok(Runner {
            system: cfg.system()?,
            source: cfg.source()?,
            spec: cfg.distance_spec(),
            kind: cfg.accuracy_kind()?,
            cfg,
            exec: Rayon,
        })
    }

    fn root(&self) -> u64 {
        self.cfg.seeds.root
    }

    fn report(&self, command: &str, cells: Vec<Cell>) -> ExperimentReport {
        ExperimentReport {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            config: self.cfg.clone(),
            seeds: Seeds {
                root: self.root(),
                validation_root: validation_root(self.root()),
                second_step_root: self.root() ^ SECOND_STEP_TAG,
            },
            max_step: self.cfg.max_step(),
            cells,
        }
    }

    fn selected(&self, names: &[String]) -> CliResult<Vec<&'a ModelSpec>> {
        if names.is_empty() {
            return Ok(self.cfg.models.iter().collect());
        }
        names.iter().map(|n| self.cfg.model_named(n).map(|(i, _)| &self.cfg.models[i])).collect()
    }

    /// Scenario count: the configured override or the implicit bound.
    fn scenario_count(&self, alpha: f64, r: usize) -> CliResult<usize> {
        match self.cfg.bounds.n {
            Some(n) => Ok(n),
            None => sample_sizes(self.cfg.bounds.eps, self.cfg.bounds.beta, alpha, r).map(|s| s.implicit),
        }
    }

    fn validation<A: AccuracyFn>(&self, acc: &A, model: &JlssModel, cell: &mut Cell) -> CliResult<()> {
        let v = &self.cfg.validation;
        if v.scenarios > 0 {
            let rep = estimate_violation(
                acc,
                &self.system,
                model,
                &self.source,
                self.spec,
                v.scenarios,
                self.root(),
                &self.exec,
            )
            .stage("validate")?;
            cell.validation = Some(rep.into());
        }
        if let Some(h) = v.histogram {
            let hist = deviation_histogram(
                acc,
                &self.system,
                model,
                &self.source,
                self.spec,
                h.n_x0,
                h.n_w,
                self.root(),
                h.bins,
                &self.exec,
            )
            .stage("histogram")?;
            cell.histogram = Some((&hist).into());
        }
        Ok(())
    }

    fn solution_doc(&self, model: &str, sol: &ScenarioSolution) -> SolutionDoc {
        SolutionDoc {
            schema_version: SCHEMA_VERSION,
            model: model.into(),
            config: self.cfg.clone(),
            solution: sol.into(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn scenario_cell(
        &self,
        spec: &ModelSpec,
        method: Method,
        model: &JlssModel,
        sol: ScenarioSolution,
        r: usize,
        started: Instant,
        out: &mut Solutions,
    ) -> CliResult<Cell> {
        let sol = sol.with_bound_params(self.cfg.bounds.eps, self.cfg.bounds.beta);
        let validated = match &sol.init_map {
            Some(l) => model.clone().with_init_map(l.clone()).stage("validate")?,
            None => model.clone(),
        };
        let mut cell = Cell {
            model: spec.name.clone(),
            method,
            alpha: Some(sol.meta.alpha),
            n: Some(sol.meta.n),
            r: Some(r),
            j: sol.objective,
            validation: None,
            histogram: None,
            solution: Some(SolutionBody::from(&sol)),
            certificate: None,
            seconds: 0.0,
        };
        self.validation(&sol.accuracy, &validated, &mut cell)?;
        cell.seconds = started.elapsed().as_secs_f64();
        let tag = match method {
            Method::Scenario => "assess",
            Method::Design => "design",
            Method::TwoStep => "two_step",
            Method::Bisim => "bisim",
        };
        out.push((format!("{}_{tag}_alpha{}", spec.name, sol.meta.alpha), self.solution_doc(&spec.name, &sol)));
        Ok(cell)
    }

    /// Steps 1–4 for every selected model and every configured `α`. One
    /// batch of scenarios (the largest `N`) is simulated per model; smaller
    /// `N` use its prefix.
    pub fn assess(&self, models: &[String]) -> CliResult<RunOutput> {
        let (cells, solutions) = self.assess_cells(models)?;
        Ok(RunOutput { report: self.report("assess", cells), solutions })
    }

    fn assess_cells(&self, models: &[String]) -> CliResult<(Vec<Cell>, Solutions)> {
        let mut cells = Vec::new();
        let mut solutions = Vec::new();
        let settings = self.cfg.removal_settings();
        for spec in self.selected(models)? {
            let model = self.cfg.model(spec)?;
            let r = self.cfg.r(spec, false)?;
            let ns: Vec<usize> =
                self.cfg.bounds.alphas.iter().map(|&a| self.scenario_count(a, r)).collect::<CliResult<_>>()?;
            let n_max = ns.iter().copied().max().unwrap_or(0);
            let started = Instant::now();
            let samples: Vec<PairedSample> =
                paired_distances(&self.system, &model, &self.source, self.spec, n_max, self.root(), &self.exec)
                    .stage("simulate")?;
            let sim_seconds = started.elapsed().as_secs_f64();
            for (&alpha, &n) in self.cfg.bounds.alphas.iter().zip(&ns) {
                let t = Instant::now();
                let sol = assess(&samples[..n], alpha, &self.kind, &settings, &self.exec).stage("assess")?;
                let mut cell = self.scenario_cell(spec, Method::Scenario, &model, sol, r, t, &mut solutions)?;
                cell.seconds += sim_seconds * n as f64 / n_max as f64;
                cells.push(cell);
            }
        }
        Ok((cells, solutions))
    }

    /// Steps 1–5: joint design of the initialization map, or the two-step
    /// variant when `two_step = Some((α1, α2))`.
    pub fn design(&self, models: &[String], two_step: Option<(f64, f64)>) -> CliResult<RunOutput> {
        let mut cells = Vec::new();
        let mut solutions = Vec::new();
        let settings = self.cfg.removal_settings();
        let two_step = two_step.or(self.cfg.design.and_then(|d| d.two_step).map(|[a, b]| (a, b)));
        for spec in self.selected(models)? {
            let model = self.cfg.model(spec)?;
            let r = self.cfg.r(spec, true)?;
            match two_step {
                Some((a1, a2)) => {
                    let b = &self.cfg.bounds;
                    if !(0.0 <= a1 && a1 <= a2 && a2 < b.eps) {
                        return Err(CliError::Config(format!(
                            "two-step levels need 0 <= alpha1 <= alpha2 < eps, got {a1}, {a2} with eps = {}",
                            b.eps
                        )));
                    }
                    let n1 = self.scenario_count(a1, r)?;
                    let n2 = match b.n {
                        Some(n) => n,
                        None => second_step_size(b.eps, b.beta, a2, &self.kind).stage("bounds")?,
                    };
                    let t = Instant::now();
                    let out = two_step_design(
                        &self.system,
                        &model,
                        &self.source,
                        self.spec,
                        (n1, a1),
                        (n2, a2),
                        &self.kind,
                        &settings,
                        self.root(),
                        &self.exec,
                    )
                    .stage("two-step design")?;
                    let design_cell =
                        self.scenario_cell(spec, Method::Design, &model, out.design, r, t, &mut solutions)?;
                    cells.push(design_cell);
                    let t = Instant::now();
                    let r2 = self.cfg.r(spec, false)?;
                    cells.push(self.scenario_cell(
                        spec,
                        Method::TwoStep,
                        &model,
                        out.assessment,
                        r2,
                        t,
                        &mut solutions,
                    )?);
                }
                None => {
                    let ns: Vec<usize> =
                        self.cfg.bounds.alphas.iter().map(|&a| self.scenario_count(a, r)).collect::<CliResult<_>>()?;
                    let n_max = ns.iter().copied().max().unwrap_or(0);
                    let data = DesignData::generate(&self.system, &model, &self.source, n_max, self.root(), &self.exec)
                        .stage("simulate")?;
                    let all = data.samples();
                    for (&alpha, &n) in self.cfg.bounds.alphas.iter().zip(&ns) {
                        let t = Instant::now();
                        let sol = design_init_map(&all[..n], &model.output, alpha, &self.kind, &settings, &self.exec)
                            .stage("design")?;
                        cells.push(self.scenario_cell(spec, Method::Design, &model, sol, r, t, &mut solutions)?);
                    }
                }
            }
        }
        Ok(RunOutput { report: self.report("design", cells), solutions })
    }

    /// Bi-simulation baseline for every selected model, with the model's own
    /// initialization map.
    pub fn bisim(&self, models: &[String]) -> CliResult<RunOutput> {
        Ok(RunOutput { report: self.report("bisim", self.bisim_cells(models)?), solutions: Vec::new() })
    }

    fn bisim_cells(&self, models: &[String]) -> CliResult<Vec<Cell>> {
        let second = self.source.x0.second_moment();
        let mut cells = Vec::new();
        for spec in self.selected(models)? {
            let model = self.cfg.model(spec)?;
            let t = Instant::now();
            let cert = solve_bisim_sdp(&self.system, &model, &model.init_map, &second, self.cfg.bounds.eps)
                .stage("bisimulation")?;
            let mut cell = Cell {
                model: spec.name.clone(),
                method: Method::Bisim,
                alpha: None,
                n: None,
                r: None,
                j: cert.objective,
                validation: None,
                histogram: None,
                solution: None,
                certificate: Some(to_rows(&cert.q)),
                seconds: 0.0,
            };
            self.validation(&cert, &model, &mut cell)?;
            cell.seconds = t.elapsed().as_secs_f64();
            cells.push(cell);
        }
        Ok(cells)
    }

    /// All scenario cells followed by the bi-simulation baseline.
    pub fn table1(&self) -> CliResult<RunOutput> {
        let (mut cells, solutions) = self.assess_cells(&[])?;
        cells.extend(self.bisim_cells(&[])?);
        Ok(RunOutput { report: self.report("table1", cells), solutions })
    }

    /// Paired output trajectories as CSV rows
    /// `scenario,t,source,y0,...` for scenarios `0..count`.
    pub fn simulate(&self, model_name: &str, count: usize) -> CliResult<String> {
        let (_, model) = self.cfg.model_named(model_name)?;
        let p = self.system.output_dim();
        let mut out = csv::Writer::from_writer(Vec::new());
        let fmt = |e: csv::Error| CliError::Format(e.to_string());
        let mut header = vec!["scenario".to_string(), "t".into(), "source".into()];
        header.extend((0..p).map(|j| format!("y{j}")));
        out.write_record(&header).map_err(fmt)?;
        for i in 0..count {
            let sc = self.source.scenario(scenario_seed(self.root(), i as u64)).stage("simulate")?;
            for (label, m) in [("system", &self.system), ("model", &model)] {
                let tr = simulate(m, &sc).stage("simulate")?;
                for (k, t) in tr.grid.iter().enumerate() {
                    let mut row = vec![i.to_string(), t.to_string(), label.to_string()];
                    row.extend(tr.values.column(k).iter().map(|v| v.to_string()));
                    out.write_record(&row).map_err(fmt)?;
                }
            }
        }
        String::from_utf8(out.into_inner().map_err(|e| CliError::Format(e.to_string()))?)
            .map_err(|e| CliError::Format(e.to_string()))
    }
}

/// Re-validates a stored solution on fresh scenarios from `seed`.
pub fn validate_solution(doc: &SolutionDoc, seed: u64, scenarios: Option<usize>) -> CliResult<ExperimentReport> {
    let mut cfg = doc.config.clone();
    cfg.seeds.root = seed;
    if let Some(m) = scenarios {
        cfg.validation.scenarios = m;
    }
    if cfg.validation.scenarios == 0 && cfg.validation.histogram.is_none() {
        return Err(CliError::Config(
            "nothing to validate: validation.scenarios is 0 and no histogram is configured".into(),
        ));
    }
    let runner = Runner::new(&cfg)?;
    let (_, model) = cfg.model_named(&doc.model)?;
    let model = match &doc.solution.init_map {
        Some(l) => model.with_init_map(crate::config::matrix(l, "init_map")?).stage("validate")?,
        None => model,
    };
    let acc = doc.solution.accuracy.to_model()?;
    let t = Instant::now();
    let mut cell = Cell {
        model: doc.model.clone(),
        method: if doc.solution.init_map.is_some() { Method::Design } else { Method::Scenario },
        alpha: Some(doc.solution.alpha),
        n: Some(doc.solution.n),
        r: None,
        j: doc.solution.objective,
        validation: None,
        histogram: None,
        solution: Some(doc.solution.clone()),
        certificate: None,
        seconds: 0.0,
    };
    runner.validation(&acc, &model, &mut cell)?;
    cell.seconds = t.elapsed().as_secs_f64();
    Ok(runner.report("validate", vec![cell]))
}
