//! Scenario generation and paired simulation feeding the scenario programs.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::bounds::{min_n_implicit, BoundParams};
use crate::jlss::{
    sample_scenario, simulate, simulate_basis, BasisTrajectories, JlssModel, Scenario, Trajectory, X0Distribution,
};
use crate::metrics::{squared_distance, DistanceSpec};
use crate::scenario::{
    assess_quadratic, assess_scalar, design_init_map, AccuracyKind, DesignSample, InitialState, RemovalSettings,
    ScenarioSolution,
};
use crate::seed::{scenario_seed, SECOND_STEP_TAG};
use crate::{Error, Executor, Result};

/// Distribution of scenarios: initial state law, horizon, jump rate and the
/// maximum integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSource {
    pub x0: X0Distribution,
    pub horizon: f64,
    pub jump_rate: f64,
    pub max_step: f64,
}

impl ScenarioSource {
    pub fn scenario(&self, seed: u64) -> Result<Scenario> {
        sample_scenario(&self.x0, self.horizon, self.jump_rate, self.max_step, seed)
    }
}

/// Initial state and squared output distance of one paired run.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub state: InitialState,
    pub distance_sq: f64,
}

/// Simulates system and model under common random numbers for scenarios
/// `0..n` of the root seed.
pub fn paired_distances<E: Executor>(
    system: &JlssModel,
    model: &JlssModel,
    source: &ScenarioSource,
    spec: DistanceSpec,
    n: usize,
    root: u64,
    exec: &E,
) -> Result<Vec<PairedSample>> {
    exec.map(n, |i| {
        let sc = source.scenario(scenario_seed(root, i as u64))?;
        let d2 = squared_distance(spec, &simulate(system, &sc)?, &simulate(model, &sc)?)?;
        Ok(PairedSample { state: InitialState::continuous(sc.x0), distance_sq: d2 })
    })
    .into_iter()
    .collect()
}

/// Distances (not squared) of a batch, the input of the scalar assessment.
pub fn distances(samples: &[PairedSample]) -> Vec<f64> {
    samples.iter().map(|s| libm::sqrt(s.distance_sq)).collect()
}

/// Assessment of a fixed model: scalar accuracy by order statistics, or
/// quadratic accuracy through constraint removal.
pub fn assess<E: Executor>(
    samples: &[PairedSample],
    alpha: f64,
    kind: &AccuracyKind,
    settings: &RemovalSettings,
    exec: &E,
) -> Result<ScenarioSolution> {
    let d = distances(samples);
    match kind {
        AccuracyKind::Scalar => {
            let mut sol = assess_scalar(&d, alpha)?;
            sol.meta.rule = settings.rule;
            sol.meta.seed = settings.seed;
            Ok(sol)
        }
        AccuracyKind::Quadratic(moments) => {
            let states: Vec<InitialState> = samples.iter().map(|s| s.state.clone()).collect();
            assess_quadratic(&states, &d, alpha, moments, settings, exec)
        }
    }
}

/// System outputs and model basis trajectories of a design batch.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignData {
    pub states: Vec<InitialState>,
    pub outputs: Vec<Trajectory>,
    pub bases: Vec<BasisTrajectories>,
}

impl DesignData {
    pub fn generate<E: Executor>(
        system: &JlssModel,
        model: &JlssModel,
        source: &ScenarioSource,
        n: usize,
        root: u64,
        exec: &E,
    ) -> Result<Self> {
        let rows: Result<Vec<_>> = exec
            .map(n, |i| {
                let sc = source.scenario(scenario_seed(root, i as u64))?;
                let ys = simulate(system, &sc)?;
                let basis = simulate_basis(model, &sc)?;
                Ok((InitialState::continuous(sc.x0), ys, basis))
            })
            .into_iter()
            .collect();
        let mut data = DesignData { states: Vec::new(), outputs: Vec::new(), bases: Vec::new() };
        for (s, y, b) in rows? {
            data.states.push(s);
            data.outputs.push(y);
            data.bases.push(b);
        }
        Ok(data)
    }

    pub fn samples(&self) -> Vec<DesignSample<'_>> {
        (0..self.states.len())
            .map(|i| DesignSample { state: &self.states[i], system_output: &self.outputs[i], basis: &self.bases[i] })
            .collect()
    }
}

/// Result of the two-step procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepOutcome {
    /// Joint design of `(L, θ)` at the first violation level.
    pub design: ScenarioSolution,
    /// Accuracy-only assessment with `L` fixed, carrying `L`.
    pub assessment: ScenarioSolution,
    /// Scenario count of the second step.
    pub n2: usize,
}

/// Number of scenarios for the accuracy-only second step.
pub fn second_step_size(eps: f64, beta: f64, alpha2: f64, kind: &AccuracyKind) -> Result<usize> {
    min_n_implicit(&BoundParams::new(eps, beta, alpha2, kind.param_count())?)
}

/// Designs `L` at `alpha1` on `n1` scenarios, then fixes it and reassesses
/// the accuracy at `alpha2` on `n2` fresh scenarios from a separate seed
/// domain.
#[allow(clippy::too_many_arguments)]
pub fn two_step_design<E: Executor>(
    system: &JlssModel,
    model: &JlssModel,
    source: &ScenarioSource,
    spec: DistanceSpec,
    (n1, alpha1): (usize, f64),
    (n2, alpha2): (usize, f64),
    kind: &AccuracyKind,
    settings: &RemovalSettings,
    root: u64,
    exec: &E,
) -> Result<TwoStepOutcome> {
    if alpha1 > alpha2 {
        return Err(Error::param("the first step must use the smaller violation level"));
    }
    let data = DesignData::generate(system, model, source, n1, root, exec)?;
    let design = design_init_map(&data.samples(), &model.output, alpha1, kind, settings, exec)?;
    drop(data);
    let l: DMatrix<f64> = design.init_map.clone().expect("design returns an init map");
    let fixed = model.clone().with_init_map(l.clone())?;
    let samples = paired_distances(system, &fixed, source, spec, n2, root ^ SECOND_STEP_TAG, exec)?;
    let mut assessment = assess(&samples, alpha2, kind, settings, exec)?;
    assessment.init_map = Some(l);
    Ok(TwoStepOutcome { design, assessment, n2 })
}
