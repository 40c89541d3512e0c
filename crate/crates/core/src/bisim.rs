//! Quadratic stochastic bi-simulation functions for a pair of JLSS.
//!
//! A PSD matrix `Q` certifies `π(x, x̃) = [x; x̃]' Q [x; x̃]` when
//! `Q ⪰ 𝐂'𝐂` and `Q(𝐀 + ν𝐑) + (𝐀 + ν𝐑)'Q + 𝐅'Q𝐅 + ν𝐑'Q𝐑 ⪯ 0` for the stacked
//! system. The best certificate for a given initialization minimizes
//! `E[π(x0, L x0)]`, and `π(x0, L x0)/ε` is then an accuracy function at
//! violation level `ε`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::convex::{solve, ConvexProgram, MatrixAffine, Status, Tolerances};
use crate::jlss::JlssModel;
use crate::linalg::{is_symmetric, max_eigenvalue, min_eigenvalue};
use crate::{Error, Result};

/// Matrices of the stacked system `[x; x̃]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrices {
    pub drift: DMatrix<f64>,
    /// `[C, −C̃]`.
    pub output: DMatrix<f64>,
    pub reset: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
    pub jump_rate: f64,
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    out
}

pub fn build_block_matrices(system: &JlssModel, model: &JlssModel) -> Result<BlockMatrices> {
    system.validate()?;
    model.validate()?;
    if system.output_dim() != model.output_dim() {
        return Err(Error::dim(format!("system has {} outputs, model {}", system.output_dim(), model.output_dim())));
    }
    if system.jump_rate != model.jump_rate {
        return Err(Error::param("system and model must share the jump rate"));
    }
    let (n, m, p) = (system.state_dim(), model.state_dim(), system.output_dim());
    let mut output = DMatrix::zeros(p, n + m);
    output.view_mut((0, 0), (p, n)).copy_from(&system.output);
    output.view_mut((0, n), (p, m)).copy_from(&(-&model.output));
    Ok(BlockMatrices {
        drift: block_diag(&system.drift, &model.drift),
        output,
        reset: block_diag(&system.reset, &model.reset),
        diffusion: block_diag(&system.diffusion, &model.diffusion),
        jump_rate: system.jump_rate,
    })
}

impl BlockMatrices {
    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    /// `Q(𝐀 + ν𝐑) + (𝐀 + ν𝐑)'Q + 𝐅'Q𝐅 + ν𝐑'Q𝐑`.
    pub fn lyapunov(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let a = &self.drift + &self.reset * self.jump_rate;
        let qa = q * &a;
        &qa + qa.transpose()
            + self.diffusion.transpose() * q * &self.diffusion
            + self.reset.transpose() * q * &self.reset * self.jump_rate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisimCertificate {
    pub q: DMatrix<f64>,
    pub init_map: DMatrix<f64>,
    pub eps: f64,
    /// Optimal `E[π(x0, L x0)] / ε`.
    pub objective: f64,
    /// Minimum eigenvalue of `Q − 𝐂'𝐂`.
    pub output_residual: f64,
    /// Maximum eigenvalue of the Lyapunov expression.
    pub lyapunov_residual: f64,
}

/// `E[[x0; L x0][x0; L x0]']` from `E[x0 x0']`.
pub fn stacked_second_moment(init_map: &DMatrix<f64>, second_moment: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = (init_map.nrows(), init_map.ncols());
    let el = second_moment * init_map.transpose();
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(second_moment);
    out.view_mut((0, n), (n, m)).copy_from(&el);
    out.view_mut((n, 0), (m, n)).copy_from(&el.transpose());
    out.view_mut((n, n), (m, m)).copy_from(&(init_map * &el));
    out
}

/// Minimizes `tr(Q Σ̄)/ε` over certificates `Q`.
pub fn solve_bisim_sdp(
    system: &JlssModel,
    model: &JlssModel,
    init_map: &DMatrix<f64>,
    second_moment: &DMatrix<f64>,
    eps: f64,
) -> Result<BisimCertificate> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param(format!("eps must lie in (0, 1), got {eps}")));
    }
    let blocks = build_block_matrices(system, model)?;
    let (n, m) = (system.state_dim(), model.state_dim());
    if init_map.shape() != (m, n) {
        return Err(Error::dim(format!("init map must be {m}x{n}")));
    }
    if second_moment.shape() != (n, n) || !is_symmetric(second_moment) {
        return Err(Error::dim(format!("E[x0 x0'] must be a symmetric {n}x{n} matrix")));
    }
    let sigma = stacked_second_moment(init_map, second_moment) / eps;
    let d = blocks.dim();

    let mut p = ConvexProgram::new();
    let q = p.add_symmetric(d, true);
    p.objective = p.trace_product(q, &sigma);
    let mut output_terms = Vec::new();
    let mut lyap_terms = Vec::new();
    for i in 0..d {
        for j in i..d {
            let e = p.elementary(q, i, j);
            let idx = p.sym_entry(q, i, j);
            lyap_terms.push((idx, -blocks.lyapunov(&e)));
            output_terms.push((idx, e));
        }
    }
    let ctc = blocks.output.transpose() * &blocks.output;
    p.add_psd(MatrixAffine { constant: -ctc.clone(), terms: output_terms });
    p.add_psd(MatrixAffine { constant: DMatrix::zeros(d, d), terms: lyap_terms });

    let sol = solve(&p, &Tolerances::default())?;
    if sol.status != Status::Optimal {
        return Err(Error::MaxIterations);
    }
    let qv = p.symmetric_value(&sol.x, q);
    Ok(BisimCertificate {
        output_residual: min_eigenvalue(&(&qv - &ctc)),
        lyapunov_residual: max_eigenvalue(&blocks.lyapunov(&qv)),
        q: qv,
        init_map: init_map.clone(),
        eps,
        objective: sol.objective,
    })
}

/// `π(x0, L x0)/ε`.
pub fn bisim_accuracy(cert: &BisimCertificate, x0: &[f64]) -> Result<f64> {
    let n = cert.init_map.ncols();
    if x0.len() != n {
        return Err(Error::dim(format!("x0 has length {}, expected {n}", x0.len())));
    }
    let x = DVector::from_column_slice(x0);
    let lx = &cert.init_map * &x;
    let z = DVector::from_iterator(n + lx.len(), x.iter().chain(lx.iter()).copied());
    Ok(z.dot(&(&cert.q * &z)) / cert.eps)
}
