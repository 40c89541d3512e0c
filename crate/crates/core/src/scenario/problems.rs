use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::accuracy::{augment, AccuracyModel, MomentData};
use super::removal::{remove_constraints, RemovalOutcome, RemovalRule, RemovalSettings};
use crate::bounds::removal_count;
use crate::convex::{ConstraintLhs, ConvexProgram, LinearForm, ScalarConstraint, SquaredResiduals, VarId};
use crate::jlss::{BasisTrajectories, Trajectory};
use crate::{Error, Executor, Result};

/// Initial state of one scenario: continuous part and discrete mode.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub continuous: DVector<f64>,
    pub mode: usize,
}

impl InitialState {
    pub fn continuous(x0: DVector<f64>) -> Self {
        InitialState { continuous: x0, mode: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionMeta {
    pub alpha: f64,
    pub n: usize,
    pub rule: RemovalRule,
    pub seed: u64,
    pub eps: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSolution {
    pub accuracy: AccuracyModel,
    /// Optimized `ñ x n` initialization map, for design problems.
    pub init_map: Option<DMatrix<f64>>,
    /// Indices of the violated training scenarios, ascending.
    pub removed: Vec<usize>,
    /// `E[h(x0)]`.
    pub objective: f64,
    pub objective_history: Vec<f64>,
    pub meta: SolutionMeta,
}

impl ScenarioSolution {
    pub fn training_violation(&self) -> f64 {
        self.removed.len() as f64 / self.meta.n as f64
    }

    pub fn with_bound_params(mut self, eps: f64, beta: f64) -> Self {
        self.meta.eps = Some(eps);
        self.meta.beta = Some(beta);
        self
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::param(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    Ok(())
}

/// Scalar accuracy by order statistics: `h*` is the `(⌊αN⌋+1)`-th largest
/// squared distance and the `⌊αN⌋` largest are removed (lowest index first
/// among equal distances).
pub fn assess_scalar(distances: &[f64], alpha: f64) -> Result<ScenarioSolution> {
    check_alpha(alpha)?;
    if distances.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(d) = distances.iter().find(|d| !(**d >= 0.0)) {
        return Err(Error::param(format!("distances must be nonnegative, got {d}")));
    }
    let n = distances.len();
    let k = removal_count(alpha, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| distances[b].partial_cmp(&distances[a]).unwrap().then(a.cmp(&b)));
    let h = distances[order[k]] * distances[order[k]];
    let mut removed = order[..k].to_vec();
    removed.sort_unstable();
    let full = distances[order[0]] * distances[order[0]];
    Ok(ScenarioSolution {
        accuracy: AccuracyModel::Scalar(h),
        init_map: None,
        removed,
        objective: h,
        objective_history: vec![full, h],
        meta: SolutionMeta { alpha, n, rule: RemovalRule::Greedy, seed: 0, eps: None, beta: None },
    })
}

/// `min h` subject to `d_i² <= h`, the program behind [`assess_scalar`].
pub fn scalar_program(distances: &[f64]) -> ConvexProgram {
    let mut p = ConvexProgram::new();
    let h = p.add_vector(1);
    let hi = p.vec_entry(h, 0);
    p.objective = LinearForm::var(hi);
    for (i, d) in distances.iter().enumerate() {
        p.add_scalar(ScalarConstraint { id: i, lhs: ConstraintLhs::Constant(d * d), rhs: LinearForm::var(hi) });
    }
    p
}

fn accuracy_vars(p: &mut ConvexProgram, moments: &MomentData) -> Result<Vec<VarId>> {
    let dim = moments.state_dim() + 1;
    let mut vars = Vec::with_capacity(moments.modes());
    for k in 0..moments.modes() {
        let theta = p.add_symmetric(dim, true);
        let f = p.trace_product(theta, moments.moment(k)?);
        let pk = moments.probability(k)?;
        for (i, c) in f.terms {
            p.objective.add(i, pk * c);
        }
        vars.push(theta);
    }
    Ok(vars)
}

fn check_state(state: &InitialState, moments: &MomentData) -> Result<()> {
    if state.mode >= moments.modes() {
        return Err(Error::UnknownMode(state.mode));
    }
    if state.continuous.len() != moments.state_dim() {
        return Err(Error::dim(format!(
            "initial state has length {}, moments describe {}",
            state.continuous.len(),
            moments.state_dim()
        )));
    }
    Ok(())
}

/// `min Σ_k P(k) tr(Θ_k M_k)` subject to `Θ_k ⪰ 0` and
/// `d_i² <= [x0; 1]' Θ_{k(i)} [x0; 1]`.
pub fn quadratic_program(
    states: &[InitialState],
    distances: &[f64],
    moments: &MomentData,
) -> Result<(ConvexProgram, Vec<VarId>)> {
    if states.len() != distances.len() {
        return Err(Error::dim("one distance per initial state is required"));
    }
    let mut p = ConvexProgram::new();
    let vars = accuracy_vars(&mut p, moments)?;
    for (i, (s, d)) in states.iter().zip(distances).enumerate() {
        check_state(s, moments)?;
        if !d.is_finite() || *d < 0.0 {
            return Err(Error::param(format!("distance {i} is {d}; quadratic accuracy needs finite distances")));
        }
        let rhs = p.quad_form(vars[s.mode], augment(s.continuous.as_slice()).as_slice());
        p.add_scalar(ScalarConstraint { id: i, lhs: ConstraintLhs::Constant(d * d), rhs });
    }
    Ok((p, vars))
}

fn thetas(p: &ConvexProgram, x: &[f64], vars: &[VarId]) -> AccuracyModel {
    AccuracyModel::QuadraticPerMode(vars.iter().map(|v| p.symmetric_value(x, *v)).collect())
}

fn meta(alpha: f64, n: usize, settings: &RemovalSettings) -> SolutionMeta {
    SolutionMeta { alpha, n, rule: settings.rule, seed: settings.seed, eps: None, beta: None }
}

/// Quadratic per-mode accuracy assessment through Algorithm 1.
pub fn assess_quadratic<E: Executor>(
    states: &[InitialState],
    distances: &[f64],
    alpha: f64,
    moments: &MomentData,
    settings: &RemovalSettings,
    exec: &E,
) -> Result<ScenarioSolution> {
    check_alpha(alpha)?;
    if states.is_empty() {
        return Err(Error::Empty);
    }
    let (p, vars) = quadratic_program(states, distances, moments)?;
    let out = remove_constraints(&p, removal_count(alpha, states.len()), settings, exec)?;
    Ok(ScenarioSolution {
        accuracy: thetas(&p, &out.solution.x, &vars),
        init_map: None,
        objective: out.solution.objective,
        removed: out.removed,
        objective_history: out.objective_history,
        meta: meta(alpha, states.len(), settings),
    })
}

/// Training data of one design scenario.
#[derive(Debug, Clone, Copy)]
pub struct DesignSample<'a> {
    pub state: &'a InitialState,
    pub system_output: &'a Trajectory,
    pub basis: &'a BasisTrajectories,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AccuracyKind {
    Scalar,
    Quadratic(MomentData),
}

impl AccuracyKind {
    /// Number of accuracy parameters for states of dimension `n`.
    pub fn param_count(&self) -> usize {
        match self {
            AccuracyKind::Scalar => 1,
            AccuracyKind::Quadratic(m) => m.modes() * (m.state_dim() + 1) * (m.state_dim() + 2) / 2,
        }
    }
}

/// Number of decision variables of a design problem: all entries of `L` plus
/// the accuracy parameters.
pub fn design_param_count(model_dim: usize, state_dim: usize, kind: &AccuracyKind) -> usize {
    model_dim * state_dim + kind.param_count()
}

/// Joint program over `(L, θ)`: for every scenario `i` and grid point `t`,
/// `‖yS_t − C̃ Ξ_t L x0‖² <= h_θ(x0)`. `L` is stored row-major in the first
/// vector variable.
pub fn design_program(
    samples: &[DesignSample],
    model_output: &DMatrix<f64>,
    kind: &AccuracyKind,
) -> Result<(ConvexProgram, VarId, Vec<VarId>)> {
    let first = samples.first().ok_or(Error::Empty)?;
    let n = first.state.continuous.len();
    let (p_out, m) = (model_output.nrows(), model_output.ncols());
    let mut p = ConvexProgram::new();
    let l = p.add_vector(m * n);
    let (h, vars) = match kind {
        AccuracyKind::Scalar => {
            let h = p.add_vector(1);
            p.objective = LinearForm::var(p.vec_entry(h, 0));
            (Some(h), Vec::new())
        }
        AccuracyKind::Quadratic(moments) => (None, accuracy_vars(&mut p, moments)?),
    };
    for (i, s) in samples.iter().enumerate() {
        let x0 = s.state.continuous.as_slice();
        if x0.len() != n {
            return Err(Error::dim(format!("scenario {i} has initial state of length {}", x0.len())));
        }
        if s.system_output.grid != s.basis.grid {
            return Err(Error::GridMismatch(format!("scenario {i}: system and basis grids differ")));
        }
        if s.system_output.output_dim() != p_out {
            return Err(Error::dim(format!("scenario {i}: output dimension differs from the model")));
        }
        let map: Vec<LinearForm> = (0..m)
            .map(|a| {
                let mut f = LinearForm::default();
                for (b, &xb) in x0.iter().enumerate() {
                    f.add(p.vec_entry(l, a * n + b), xb);
                }
                f
            })
            .collect();
        let pieces = s.basis.xi.len();
        let mut targets = Vec::with_capacity(pieces * p_out);
        let mut gains = Vec::with_capacity(pieces * p_out * m);
        for (k, xi) in s.basis.xi.iter().enumerate() {
            if xi.nrows() != m || xi.ncols() != m {
                return Err(Error::dim(format!("scenario {i}: basis matrices are not {m}x{m}")));
            }
            targets.extend(s.system_output.values.column(k).iter());
            let g = model_output * xi;
            for r in 0..p_out {
                gains.extend(g.row(r).iter());
            }
        }
        let rhs = match (h, kind) {
            (Some(h), _) => LinearForm::var(p.vec_entry(h, 0)),
            (None, AccuracyKind::Quadratic(moments)) => {
                check_state(s.state, moments)?;
                p.quad_form(vars[s.state.mode], augment(x0).as_slice())
            }
            (None, AccuracyKind::Scalar) => unreachable!(),
        };
        let lhs = SquaredResiduals::new(map, p_out, targets, gains)?;
        p.add_scalar(ScalarConstraint { id: i, lhs: ConstraintLhs::SquaredResiduals(lhs), rhs });
    }
    let acc = match h {
        Some(h) => vec![h],
        None => vars,
    };
    Ok((p, l, acc))
}

/// Optimizes the initialization map jointly with the accuracy function.
pub fn design_init_map<E: Executor>(
    samples: &[DesignSample],
    model_output: &DMatrix<f64>,
    alpha: f64,
    kind: &AccuracyKind,
    settings: &RemovalSettings,
    exec: &E,
) -> Result<ScenarioSolution> {
    check_alpha(alpha)?;
    let (p, l, acc) = design_program(samples, model_output, kind)?;
    let out: RemovalOutcome = remove_constraints(&p, removal_count(alpha, samples.len()), settings, exec)?;
    let x = &out.solution.x;
    let n = samples[0].state.continuous.len();
    let lv = p.vector_value(x, l);
    let init_map = DMatrix::from_row_slice(model_output.ncols(), n, &lv);
    let accuracy = match kind {
        AccuracyKind::Scalar => AccuracyModel::Scalar(p.vector_value(x, acc[0])[0].max(0.0)),
        AccuracyKind::Quadratic(_) => thetas(&p, x, &acc),
    };
    Ok(ScenarioSolution {
        accuracy,
        init_map: Some(init_map),
        objective: out.solution.objective,
        removed: out.removed,
        objective_history: out.objective_history,
        meta: meta(alpha, samples.len(), settings),
    })
}
