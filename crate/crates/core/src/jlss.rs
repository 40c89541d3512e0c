//! Jump linear stochastic systems (JLSS) and their simulation.
//!
//! Between the jump times of a Poisson process the state follows
//! `dx = A x dt + F x dB` with a scalar Brownian motion `B`; at a jump time
//! the state is reset to `(I + R) x(τ⁻)`. The output is `y = C x`.
//!
//! System and models are always driven by the same [`Scenario`], i.e. the
//! same initial condition, Brownian increments and jump times.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::linalg::psd_factor;
use crate::{Error, Result};

/// A JLSS together with the linear map from the reference system's initial
/// state to its own initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct JlssModel {
    pub drift: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
    pub reset: DMatrix<f64>,
    pub output: DMatrix<f64>,
    pub jump_rate: f64,
    /// `ñ x n` map `L` with `x_model(0) = L x0`.
    pub init_map: DMatrix<f64>,
}

impl JlssModel {
    /// A reference system: the initialization map is the identity.
    pub fn new(
        drift: DMatrix<f64>,
        diffusion: DMatrix<f64>,
        reset: DMatrix<f64>,
        output: DMatrix<f64>,
        jump_rate: f64,
    ) -> Result<Self> {
        let n = drift.nrows();
        let model = JlssModel { drift, diffusion, reset, output, jump_rate, init_map: DMatrix::identity(n, n) };
        model.validate()?;
        Ok(model)
    }

    pub fn with_init_map(mut self, init_map: DMatrix<f64>) -> Result<Self> {
        self.init_map = init_map;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.drift.nrows();
        if !self.drift.is_square() {
            return Err(Error::dim("drift matrix must be square"));
        }
        if self.diffusion.shape() != (n, n) || self.reset.shape() != (n, n) {
            return Err(Error::dim(format!(
                "drift is {n}x{n} but diffusion is {:?} and reset is {:?}",
                self.diffusion.shape(),
                self.reset.shape()
            )));
        }
        if self.output.ncols() != n {
            return Err(Error::dim(format!(
                "output matrix has {} columns, state dimension is {n}",
                self.output.ncols()
            )));
        }
        if self.init_map.nrows() != n {
            return Err(Error::dim(format!("init map has {} rows, state dimension is {n}", self.init_map.nrows())));
        }
        if !(self.jump_rate >= 0.0 && self.jump_rate.is_finite()) {
            return Err(Error::param(format!("jump rate must be >= 0, got {}", self.jump_rate)));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.output.nrows()
    }

    /// Dimension of the reference system state this model is initialized from.
    pub fn source_dim(&self) -> usize {
        self.init_map.ncols()
    }
}

/// How a reduced model is derived from a system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// Keep the first `k` state variables.
    Truncate(usize),
    /// Drop the Brownian term (`F̃ = 0`).
    NoDiffusion,
    /// Drop the state resets (`R̃ = 0`).
    NoJump,
}

pub fn build_reduced_model(system: &JlssModel, kind: Reduction) -> Result<JlssModel> {
    system.validate()?;
    let n = system.state_dim();
    let mut model = system.clone();
    match kind {
        Reduction::Truncate(k) => {
            if k == 0 || k > n {
                return Err(Error::param(format!("truncation order {k} outside 1..={n}")));
            }
            let p = system.output_dim();
            model.drift = system.drift.view((0, 0), (k, k)).into_owned();
            model.diffusion = system.diffusion.view((0, 0), (k, k)).into_owned();
            model.reset = system.reset.view((0, 0), (k, k)).into_owned();
            model.output = system.output.view((0, 0), (p, k)).into_owned();
            let selector = DMatrix::from_fn(k, n, |i, j| if i == j { 1.0 } else { 0.0 });
            model.init_map = selector * &system.init_map;
        }
        Reduction::NoDiffusion => model.diffusion.fill(0.0),
        Reduction::NoJump => model.reset.fill(0.0),
    }
    Ok(model)
}

/// Distribution of the reference system's initial state.
#[derive(Debug, Clone, PartialEq)]
pub enum X0Distribution {
    Gaussian {
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
        /// `S` with `S S' = covariance`.
        factor: DMatrix<f64>,
    },
    Point(DVector<f64>),
}

impl X0Distribution {
    pub fn gaussian(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.shape() != (mean.len(), mean.len()) {
            return Err(Error::dim(format!("covariance is {:?}, mean has length {}", covariance.shape(), mean.len())));
        }
        let factor = psd_factor(&covariance)?;
        Ok(X0Distribution::Gaussian { mean, covariance, factor })
    }

    pub fn standard(dim: usize) -> Self {
        X0Distribution::Gaussian {
            mean: DVector::zeros(dim),
            covariance: DMatrix::identity(dim, dim),
            factor: DMatrix::identity(dim, dim),
        }
    }

    pub fn point(x0: DVector<f64>) -> Self {
        X0Distribution::Point(x0)
    }

    pub fn dim(&self) -> usize {
        match self {
            X0Distribution::Gaussian { mean, .. } => mean.len(),
            X0Distribution::Point(x) => x.len(),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, X0Distribution::Point(_))
    }

    pub fn mean(&self) -> DVector<f64> {
        match self {
            X0Distribution::Gaussian { mean, .. } => mean.clone(),
            X0Distribution::Point(x) => x.clone(),
        }
    }

    /// `E[x0 x0']` in closed form.
    pub fn second_moment(&self) -> DMatrix<f64> {
        match self {
            X0Distribution::Gaussian { mean, covariance, .. } => covariance + mean * mean.transpose(),
            X0Distribution::Point(x) => x * x.transpose(),
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match self {
            X0Distribution::Gaussian { mean, factor, .. } => {
                let z = DVector::from_fn(mean.len(), |_, _| StandardNormal.sample(rng));
                mean + factor * z
            }
            X0Distribution::Point(x) => x.clone(),
        }
    }
}

/// One realization of the initial state and of the stochastic input on a
/// jump-refined time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub x0: DVector<f64>,
    /// `0 = t_0 < t_1 < ... < t_K = T`.
    pub grid: Vec<f64>,
    /// `brownian_increments[k]` is `B(t_{k+1}) - B(t_k)`.
    pub brownian_increments: Vec<f64>,
    pub jump_times: Vec<f64>,
    pub seed: u64,
    /// Grid index of every jump time.
    jump_steps: Vec<usize>,
}

impl Scenario {
    /// Assembles a scenario from explicit parts, checking its invariants.
    pub fn new(
        x0: DVector<f64>,
        grid: Vec<f64>,
        brownian_increments: Vec<f64>,
        jump_times: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        if grid.len() < 2 || grid[0] != 0.0 {
            return Err(Error::GridMismatch("grid must start at 0 and have at least two points".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::GridMismatch("grid must be strictly increasing".into()));
        }
        if brownian_increments.len() != grid.len() - 1 {
            return Err(Error::dim(format!(
                "{} Brownian increments for {} grid steps",
                brownian_increments.len(),
                grid.len() - 1
            )));
        }
        let horizon = grid[grid.len() - 1];
        if jump_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("jump times must be strictly increasing"));
        }
        let mut jump_steps = Vec::with_capacity(jump_times.len());
        for &tau in &jump_times {
            if !(tau > 0.0 && tau <= horizon) {
                return Err(Error::param(format!("jump time {tau} outside (0, {horizon}]")));
            }
            match grid.binary_search_by(|t| t.total_cmp(&tau)) {
                Ok(k) => jump_steps.push(k),
                Err(_) => return Err(Error::GridMismatch(format!("jump time {tau} is not a grid point"))),
            }
        }
        Ok(Scenario { x0, grid, brownian_increments, jump_times, seed, jump_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn jump_steps(&self) -> &[usize] {
        &self.jump_steps
    }

    /// Same stochastic input, different initial state.
    pub fn with_x0(&self, x0: DVector<f64>) -> Scenario {
        Scenario { x0, ..self.clone() }
    }
}

/// Uniform grid with step at most `max_step`, refined to contain every jump.
fn refined_grid(horizon: f64, max_step: f64, jumps: &[f64]) -> Vec<f64> {
    let raw = horizon / max_step;
    let mut steps = libm::ceil(raw) as usize;
    // 10.0 / 0.001 must give 10_000 steps, not 10_001
    if steps > 1 && (raw - (steps - 1) as f64) < 1e-9 * raw {
        steps -= 1;
    }
    let steps = steps.max(1);
    let mut grid = Vec::with_capacity(steps + 1 + jumps.len());
    let mut next_jump = 0;
    for k in 0..=steps {
        let t = if k == steps { horizon } else { horizon * k as f64 / steps as f64 };
        while next_jump < jumps.len() && jumps[next_jump] < t {
            grid.push(jumps[next_jump]);
            next_jump += 1;
        }
        if next_jump < jumps.len() && jumps[next_jump] == t {
            next_jump += 1;
        }
        grid.push(t);
    }
    grid
}

/// Draws a scenario. The same arguments always give the identical scenario.
pub fn sample_scenario(
    x0_dist: &X0Distribution,
    horizon: f64,
    jump_rate: f64,
    max_step: f64,
    seed: u64,
) -> Result<Scenario> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::param(format!("horizon must be positive, got {horizon}")));
    }
    if !(max_step > 0.0 && max_step.is_finite()) {
        return Err(Error::param(format!("max step must be positive, got {max_step}")));
    }
    if !(jump_rate >= 0.0 && jump_rate.is_finite()) {
        return Err(Error::param(format!("jump rate must be >= 0, got {jump_rate}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = x0_dist.sample(&mut rng);

    let mut jump_times = Vec::new();
    if jump_rate > 0.0 {
        let mut t = 0.0;
        loop {
            let gap: f64 = Exp1.sample(&mut rng);
            t += gap / jump_rate;
            if t > horizon {
                break;
            }
            if t > 0.0 {
                jump_times.push(t);
            }
        }
    }

    let grid = refined_grid(horizon, max_step, &jump_times);
    let brownian_increments = grid
        .windows(2)
        .map(|w| {
            let z: f64 = StandardNormal.sample(&mut rng);
            libm::sqrt(w[1] - w[0]) * z
        })
        .collect();
    Scenario::new(x0, grid, brownian_increments, jump_times, seed)
}

/// Output path on a time grid, with optional discrete mode labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    /// `p x len(grid)`; column `k` is the output at `grid[k]`.
    pub values: DMatrix<f64>,
    pub mode: Option<Vec<u32>>,
}

impl Trajectory {
    pub fn new(grid: Vec<f64>, values: DMatrix<f64>, mode: Option<Vec<u32>>) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(Error::dim(format!("{} values for {} grid points", values.ncols(), grid.len())));
        }
        if let Some(m) = &mode {
            if m.len() != grid.len() {
                return Err(Error::dim(format!("{} modes for {} grid points", m.len(), grid.len())));
            }
        }
        Ok(Trajectory { grid, values, mode })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn output_dim(&self) -> usize {
        self.values.nrows()
    }
}

/// State-transition samples `Ξ_t` of a model along one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisTrajectories {
    pub grid: Vec<f64>,
    /// Column `i` of `xi[k]` is the state at `grid[k]` started from `e_i`.
    pub xi: Vec<DMatrix<f64>>,
}

fn check_scenario(model: &JlssModel, scenario: &Scenario) -> Result<()> {
    model.validate()?;
    if scenario.x0.len() != model.source_dim() {
        return Err(Error::dim(format!(
            "scenario x0 has length {}, init map expects {}",
            scenario.x0.len(),
            model.source_dim()
        )));
    }
    Ok(())
}

/// Euler–Maruyama integration of the state, calling `visit(k, x)` at every
/// grid point (after the reset when `grid[k]` is a jump time).
pub(crate) fn integrate_state<V: FnMut(usize, &DVector<f64>)>(
    model: &JlssModel,
    x_init: DVector<f64>,
    scenario: &Scenario,
    mut visit: V,
) {
    let n = model.state_dim();
    let mut x = x_init;
    let mut ax = DVector::zeros(n);
    let mut fx = DVector::zeros(n);
    let mut jumps = scenario.jump_steps.iter().peekable();
    visit(0, &x);
    for k in 1..scenario.grid.len() {
        let dt = scenario.grid[k] - scenario.grid[k - 1];
        let db = scenario.brownian_increments[k - 1];
        ax.gemv(1.0, &model.drift, &x, 0.0);
        fx.gemv(1.0, &model.diffusion, &x, 0.0);
        x.axpy(dt, &ax, 1.0);
        x.axpy(db, &fx, 1.0);
        if jumps.peek() == Some(&&k) {
            jumps.next();
            ax.gemv(1.0, &model.reset, &x, 0.0);
            x += &ax;
        }
        visit(k, &x);
    }
}

pub fn simulate(model: &JlssModel, scenario: &Scenario) -> Result<Trajectory> {
    check_scenario(model, scenario)?;
    let p = model.output_dim();
    let mut values = DMatrix::zeros(p, scenario.grid.len());
    let x_init = &model.init_map * &scenario.x0;
    integrate_state(model, x_init, scenario, |k, x| {
        values.column_mut(k).gemv(1.0, &model.output, x, 0.0);
    });
    Ok(Trajectory { grid: scenario.grid.clone(), values, mode: None })
}

/// Simulates the model from every canonical unit vector under the scenario's
/// input, so that `C̃ Ξ_t L x0` is the output for any initialization map `L`.
pub fn simulate_basis(model: &JlssModel, scenario: &Scenario) -> Result<BasisTrajectories> {
    model.validate()?;
    let n = model.state_dim();
    let mut x = DMatrix::<f64>::identity(n, n);
    let mut ax = DMatrix::zeros(n, n);
    let mut fx = DMatrix::zeros(n, n);
    let mut xi = Vec::with_capacity(scenario.grid.len());
    xi.push(x.clone());
    let mut jumps = scenario.jump_steps.iter().peekable();
    for k in 1..scenario.grid.len() {
        let dt = scenario.grid[k] - scenario.grid[k - 1];
        let db = scenario.brownian_increments[k - 1];
        ax.gemm(1.0, &model.drift, &x, 0.0);
        fx.gemm(1.0, &model.diffusion, &x, 0.0);
        x += &ax * dt;
        x += &fx * db;
        if jumps.peek() == Some(&&k) {
            jumps.next();
            ax.gemm(1.0, &model.reset, &x, 0.0);
            x += &ax;
        }
        xi.push(x.clone());
    }
    Ok(BasisTrajectories { grid: scenario.grid.clone(), xi })
}
