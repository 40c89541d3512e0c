use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::linalg::{norm, sym_index, sym_len};
use crate::{Error, Result};

/// Handle to a declared variable block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Symmetric `dim x dim` matrix, optionally constrained to be PSD.
    Symmetric {
        dim: usize,
        psd: bool,
    },
    Vector {
        len: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct VarBlock {
    pub(crate) kind: VarKind,
    pub(crate) offset: usize,
}

impl VarBlock {
    fn len(&self) -> usize {
        match self.kind {
            VarKind::Symmetric { dim, .. } => sym_len(dim),
            VarKind::Vector { len } => len,
        }
    }
}

/// Sparse affine form `Σ coef · u[index] + constant` over the flat variable
/// vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearForm {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinearForm {
    pub fn constant(c: f64) -> Self {
        LinearForm { terms: Vec::new(), constant: c }
    }

    pub fn var(index: usize) -> Self {
        LinearForm { terms: vec![(index, 1.0)], constant: 0.0 }
    }

    pub fn add(&mut self, index: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((index, coef));
        }
    }

    pub fn plus(mut self, other: &LinearForm) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(i, c)| acc + c * u[i])
    }

    /// Adds the coefficients into a dense gradient vector.
    pub(crate) fn scatter(&self, out: &mut [f64], scale: f64) {
        for &(i, c) in &self.terms {
            out[i] += scale * c;
        }
    }

    fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.0).max()
    }
}

/// Affine symmetric matrix expression `constant + Σ u[i] · M_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixAffine {
    pub constant: DMatrix<f64>,
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl MatrixAffine {
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn eval(&self, u: &[f64]) -> DMatrix<f64> {
        let mut x = self.constant.clone();
        for (i, m) in &self.terms {
            if u[*i] != 0.0 {
                x += m * u[*i];
            }
        }
        x
    }
}

/// Pieces `‖target_j − G_j w(u)‖²` sharing one affine map `w(u)` (one
/// [`LinearForm`] per component of `w`). The constraint holds when every piece
/// is below the right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredResiduals {
    pub map: Vec<LinearForm>,
    pub out_dim: usize,
    /// `pieces x out_dim`, row-major.
    pub targets: Vec<f64>,
    /// `pieces x out_dim x map.len()`, each gain row-major.
    pub gains: Vec<f64>,
    pub(crate) max_gain_norm: f64,
}

impl SquaredResiduals {
    pub fn new(map: Vec<LinearForm>, out_dim: usize, targets: Vec<f64>, gains: Vec<f64>) -> Result<Self> {
        let k = map.len();
        if out_dim == 0 || !targets.len().is_multiple_of(out_dim) {
            return Err(Error::dim(format!("{} targets for output dimension {out_dim}", targets.len())));
        }
        let pieces = targets.len() / out_dim;
        if gains.len() != pieces * out_dim * k {
            return Err(Error::dim(format!("{} gain entries for {pieces} pieces of size {out_dim}x{k}", gains.len())));
        }
        let max_gain_norm = gains.chunks(out_dim * k.max(1)).map(norm).fold(0.0, f64::max);
        Ok(SquaredResiduals { map, out_dim, targets, gains, max_gain_norm })
    }

    pub fn pieces(&self) -> usize {
        self.targets.len() / self.out_dim
    }

    pub fn map_dim(&self) -> usize {
        self.map.len()
    }

    pub(crate) fn target(&self, j: usize) -> &[f64] {
        &self.targets[j * self.out_dim..(j + 1) * self.out_dim]
    }

    pub(crate) fn gain(&self, j: usize) -> &[f64] {
        let s = self.out_dim * self.map.len();
        &self.gains[j * s..(j + 1) * s]
    }

    pub(crate) fn eval_map(&self, u: &[f64], w: &mut [f64]) {
        for (wi, f) in w.iter_mut().zip(&self.map) {
            *wi = f.eval(u);
        }
    }

    /// Residual `target_j − G_j w` written into `res`; returns its squared norm.
    pub(crate) fn residual(&self, j: usize, w: &[f64], res: &mut [f64]) -> f64 {
        let k = self.map.len();
        let t = self.target(j);
        let g = self.gain(j);
        let mut acc = 0.0;
        for r in 0..self.out_dim {
            let row = &g[r * k..(r + 1) * k];
            let v = t[r] - row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            res[r] = v;
            acc += v * v;
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintLhs {
    Constant(f64),
    SquaredResiduals(SquaredResiduals),
}

impl ConstraintLhs {
    pub fn pieces(&self) -> usize {
        match self {
            ConstraintLhs::Constant(_) => 1,
            ConstraintLhs::SquaredResiduals(s) => s.pieces(),
        }
    }
}

/// `lhs(u) <= rhs(u)` with a convex `lhs` and affine `rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarConstraint {
    pub id: usize,
    pub lhs: ConstraintLhs,
    pub rhs: LinearForm,
}

/// Linear objective, PSD constraints and convex scalar constraints over a
/// flat vector of variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvexProgram {
    pub(crate) blocks: Vec<VarBlock>,
    pub(crate) n: usize,
    pub objective: LinearForm,
    pub psd: Vec<MatrixAffine>,
    pub scalar: Vec<ScalarConstraint>,
}

impl ConvexProgram {
    pub fn new() -> Self {
        Self::default()
    }

    fn push_block(&mut self, kind: VarKind) -> VarId {
        let block = VarBlock { kind, offset: self.n };
        self.n += block.len();
        self.blocks.push(block);
        VarId(self.blocks.len() - 1)
    }

    /// Declares a symmetric matrix variable; `psd` adds the constraint `X ⪰ 0`.
    pub fn add_symmetric(&mut self, dim: usize, psd: bool) -> VarId {
        let id = self.push_block(VarKind::Symmetric { dim, psd });
        if psd {
            let terms = (0..dim)
                .flat_map(|i| (i..dim).map(move |j| (i, j)))
                .map(|(i, j)| (self.sym_entry(id, i, j), elementary(dim, i, j)))
                .collect();
            self.psd.push(MatrixAffine { constant: DMatrix::zeros(dim, dim), terms });
        }
        id
    }

    pub fn add_vector(&mut self, len: usize) -> VarId {
        self.push_block(VarKind::Vector { len })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn var_kind(&self, var: VarId) -> VarKind {
        self.blocks[var.0].kind
    }

    pub fn sym_entry(&self, var: VarId, i: usize, j: usize) -> usize {
        match self.blocks[var.0].kind {
            VarKind::Symmetric { dim, .. } => {
                assert!(i < dim && j < dim, "entry ({i}, {j}) outside {dim}x{dim}");
                self.blocks[var.0].offset + sym_index(dim, i, j)
            }
            VarKind::Vector { .. } => panic!("sym_entry on a vector variable"),
        }
    }

    pub fn vec_entry(&self, var: VarId, k: usize) -> usize {
        match self.blocks[var.0].kind {
            VarKind::Vector { len } => {
                assert!(k < len, "entry {k} outside vector of length {len}");
                self.blocks[var.0].offset + k
            }
            VarKind::Symmetric { .. } => panic!("vec_entry on a matrix variable"),
        }
    }

    /// `z' X z` as a linear form in the entries of the symmetric variable `X`.
    pub fn quad_form(&self, var: VarId, z: &[f64]) -> LinearForm {
        let mut f = LinearForm::default();
        for i in 0..z.len() {
            for j in i..z.len() {
                let c = if i == j { z[i] * z[i] } else { 2.0 * z[i] * z[j] };
                f.add(self.sym_entry(var, i, j), c);
            }
        }
        f
    }

    /// `tr(X M)` for a symmetric variable `X`.
    pub fn trace_product(&self, var: VarId, m: &DMatrix<f64>) -> LinearForm {
        let mut f = LinearForm::default();
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                let c = if i == j { m[(i, i)] } else { m[(i, j)] + m[(j, i)] };
                f.add(self.sym_entry(var, i, j), c);
            }
        }
        f
    }

    /// Symmetric unit matrix of entry `(i, j)` of a matrix variable.
    pub fn elementary(&self, var: VarId, i: usize, j: usize) -> DMatrix<f64> {
        match self.blocks[var.0].kind {
            VarKind::Symmetric { dim, .. } => elementary(dim, i, j),
            VarKind::Vector { .. } => panic!("elementary on a vector variable"),
        }
    }

    pub fn add_psd(&mut self, m: MatrixAffine) -> usize {
        self.psd.push(m);
        self.psd.len() - 1
    }

    pub fn add_scalar(&mut self, c: ScalarConstraint) -> usize {
        self.scalar.push(c);
        self.scalar.len() - 1
    }

    pub fn symmetric_value(&self, x: &[f64], var: VarId) -> DMatrix<f64> {
        match self.blocks[var.0].kind {
            VarKind::Symmetric { dim, .. } => DMatrix::from_fn(dim, dim, |i, j| x[self.sym_entry(var, i, j)]),
            VarKind::Vector { .. } => panic!("symmetric_value on a vector variable"),
        }
    }

    pub fn vector_value(&self, x: &[f64], var: VarId) -> Vec<f64> {
        let b = self.blocks[var.0];
        x[b.offset..b.offset + b.len()].to_vec()
    }

    pub fn validate(&self) -> Result<()> {
        let check = |f: &LinearForm, what: &str| match f.max_index() {
            Some(i) if i >= self.n => Err(Error::dim(format!("{what} references variable {i} of {}", self.n))),
            _ => Ok(()),
        };
        check(&self.objective, "objective")?;
        for m in &self.psd {
            if !m.constant.is_square() {
                return Err(Error::dim("PSD constraint matrix must be square"));
            }
            for (i, t) in &m.terms {
                if *i >= self.n {
                    return Err(Error::dim(format!("PSD constraint references variable {i}")));
                }
                if t.shape() != m.constant.shape() {
                    return Err(Error::dim("PSD constraint term shape mismatch"));
                }
                if !crate::linalg::is_symmetric(t) {
                    return Err(Error::NotSymmetric);
                }
            }
            if !crate::linalg::is_symmetric(&m.constant) {
                return Err(Error::NotSymmetric);
            }
        }
        for c in &self.scalar {
            check(&c.rhs, "constraint rhs")?;
            if let ConstraintLhs::SquaredResiduals(s) = &c.lhs {
                for f in &s.map {
                    check(f, "constraint map")?;
                }
            }
        }
        Ok(())
    }
}

fn elementary(dim: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    m[(i, j)] = 1.0;
    m[(j, i)] = 1.0;
    m
}
