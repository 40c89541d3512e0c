//! Primal log-barrier interior-point method with an outer active-set loop.
//!
//! Scalar constraints may consist of many pieces (one per grid point of a
//! trajectory). Only a working set of pieces enters the barrier; after each
//! barrier solve every constraint is scanned and the worst violated pieces are
//! added until none is violated. The scan of `SquaredResiduals` constraints is
//! accelerated by a cached Lipschitz bound, so constraints far from active are
//! not re-evaluated piece by piece.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::program::{ConstraintLhs, ConvexProgram, ScalarConstraint, SquaredResiduals};
use crate::linalg::{dot, min_eigenvalue, norm, solve_spd};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative violation accepted on scalar constraints.
    pub feas: f64,
    /// Relative suboptimality accepted when polishing a vertex.
    pub opt: f64,
    /// Relative duality gap at which the barrier loop stops.
    pub gap: f64,
    pub max_newton: usize,
    pub max_outer: usize,
    pub max_rounds: usize,
    /// Number of constraints seeding the working set (0 picks `4n + 50`).
    pub working_set: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { feas: 1e-8, opt: 1e-6, gap: 1e-9, max_newton: 100, max_outer: 60, max_rounds: 200, working_set: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    /// A limit was hit; the point is feasible for the working set only.
    MaxIterations,
}

/// One piece of one scalar constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Atom {
    pub(crate) con: usize,
    pub(crate) piece: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ScreenEntry {
    w: Vec<f64>,
    root: f64,
    worst: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// `rhs − lhs` for every scalar constraint. Exact for constraints within
    /// the screening margin of being active, a lower bound otherwise.
    pub slack: Vec<f64>,
    /// Magnitude used to make tolerances relative, per scalar constraint.
    pub scale: Vec<f64>,
    pub psd_min_eig: Vec<f64>,
    pub status: Status,
    pub newton_steps: usize,
    pub rounds: usize,
    pub(crate) working: Vec<Atom>,
    pub(crate) screen: Vec<Option<ScreenEntry>>,
}

impl Solution {
    pub fn is_violated(&self, i: usize, tol: f64) -> bool {
        self.slack[i] < -tol * self.scale[i]
    }

    pub fn is_active(&self, i: usize, tol: f64) -> bool {
        self.slack[i] <= tol * self.scale[i]
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions<'a> {
    /// Constraints marked `true` are ignored.
    pub excluded: Option<&'a [bool]>,
    /// A previous solution of the same program used as a starting point.
    pub warm: Option<&'a Solution>,
}

/// Relative slack above which a screened constraint is not evaluated exactly.
const SCREEN_MARGIN: f64 = 1e-4;
const MU: f64 = 20.0;
const DIVERGENCE: f64 = 1e13;

pub fn solve(p: &ConvexProgram, tol: &Tolerances) -> Result<Solution> {
    solve_with(p, tol, &SolveOptions::default())
}

pub fn solve_with(p: &ConvexProgram, tol: &Tolerances, opts: &SolveOptions) -> Result<Solution> {
    p.validate()?;
    let m = p.scalar.len();
    if let Some(ex) = opts.excluded {
        if ex.len() != m {
            return Err(Error::dim("exclusion mask length differs from the constraint count"));
        }
    }
    let included = |i: usize| opts.excluded.is_none_or(|e| !e[i]);
    let n = p.num_vars();
    let mut screen: Vec<Option<ScreenEntry>> = match opts.warm {
        Some(w) if w.screen.len() == m => w.screen.clone(),
        _ => vec![None; m],
    };
    let mut x = match opts.warm {
        Some(w) if w.x.len() == n => w.x.clone(),
        _ => vec![0.0; n],
    };

    let cap = if tol.working_set == 0 { 4 * n + 50 } else { tol.working_set };
    let status = scan(p, &x, &mut screen, &included);
    let mut order: Vec<usize> = (0..m).filter(|&i| included(i)).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (status[a].slack / status[a].scale, status[b].slack / status[b].scale);
        sa.partial_cmp(&sb).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    order.truncate(cap);
    let mut working: Vec<Atom> = order.iter().map(|&i| Atom { con: i, piece: status[i].worst }).collect();
    if let Some(w) = opts.warm {
        let chosen: Vec<bool> = {
            let mut c = vec![false; m];
            for &i in &order {
                c[i] = true;
            }
            c
        };
        working.extend(w.working.iter().filter(|a| a.con < m && chosen[a.con]));
    }
    working.sort();
    working.dedup();

    let mut newton_steps = 0;
    let mut rounds = 0;
    let mut converged = false;
    while rounds < tol.max_rounds {
        rounds += 1;
        let barrier = Barrier::new(p, &working);
        x = barrier.minimize(x, tol, &mut newton_steps)?;

        let status = scan(p, &x, &mut screen, &included);
        let mut violated: Vec<(f64, Atom)> = (0..m)
            .filter(|&i| included(i) && status[i].slack < -tol.feas * status[i].scale)
            .map(|i| (status[i].slack / status[i].scale, Atom { con: i, piece: status[i].worst }))
            .filter(|(_, a)| working.binary_search(a).is_err())
            .collect();
        if violated.is_empty() {
            converged = true;
            break;
        }
        violated.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
        violated.truncate(cap.max(2 * n));
        working.extend(violated.into_iter().map(|v| v.1));
        working.sort();
        working.dedup();
    }

    if converged {
        if let Some(u) = polish(p, &x, tol, &included) {
            x = u;
        }
    }
    let status = scan(p, &x, &mut screen, &|_| true);
    Ok(Solution {
        objective: p.objective.eval(&x),
        slack: status.iter().map(|s| s.slack).collect(),
        scale: status.iter().map(|s| s.scale).collect(),
        psd_min_eig: p.psd.iter().map(|c| min_eigenvalue(&c.eval(&x))).collect(),
        status: if converged { Status::Optimal } else { Status::MaxIterations },
        newton_steps,
        rounds,
        working,
        screen,
        x,
    })
}

#[derive(Debug, Clone, Copy)]
struct ConStatus {
    slack: f64,
    scale: f64,
    worst: usize,
}

fn scan(
    p: &ConvexProgram,
    u: &[f64],
    screen: &mut [Option<ScreenEntry>],
    included: &dyn Fn(usize) -> bool,
) -> Vec<ConStatus> {
    p.scalar
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if !included(i) {
                return ConStatus { slack: f64::INFINITY, scale: 1.0, worst: 0 };
            }
            let rhs = c.rhs.eval(u);
            match &c.lhs {
                ConstraintLhs::Constant(v) => {
                    ConStatus { slack: rhs - v, scale: 1f64.max(rhs.abs()).max(v.abs()), worst: 0 }
                }
                ConstraintLhs::SquaredResiduals(s) => {
                    let mut w = vec![0.0; s.map_dim()];
                    s.eval_map(u, &mut w);
                    if let Some(e) = &screen[i] {
                        let delta = libm::sqrt(e.w.iter().zip(&w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
                        let bound = e.root + s.max_gain_norm * delta;
                        let slack = rhs - bound * bound;
                        let scale = 1f64.max(rhs.abs());
                        if slack > SCREEN_MARGIN * scale {
                            return ConStatus { slack, scale, worst: e.worst };
                        }
                    }
                    let (lhs, worst) = max_piece(s, &w);
                    screen[i] = Some(ScreenEntry { w, root: libm::sqrt(lhs), worst });
                    ConStatus { slack: rhs - lhs, scale: 1f64.max(rhs.abs()).max(lhs), worst }
                }
            }
        })
        .collect()
}

fn max_piece(s: &SquaredResiduals, w: &[f64]) -> (f64, usize) {
    let mut res = vec![0.0; s.out_dim];
    let mut best = (f64::NEG_INFINITY, 0);
    for j in 0..s.pieces() {
        let v = s.residual(j, w, &mut res);
        if v > best.0 {
            best = (v, j);
        }
    }
    best
}

/// Atoms of one constraint with its dense derivative data.
struct Group<'a> {
    con: &'a ScalarConstraint,
    pieces: Vec<usize>,
    a: Vec<f64>,
    jac: Option<DMatrix<f64>>,
    /// `G_j J` per piece.
    bj: Vec<DMatrix<f64>>,
}

struct Barrier<'a> {
    p: &'a ConvexProgram,
    n: usize,
    groups: Vec<Group<'a>>,
    atoms: usize,
}

struct Point {
    slacks: Vec<f64>,
    logdets: Vec<f64>,
}

enum Exit {
    Converged,
    Stopped,
    Stuck,
    Limit,
}

impl<'a> Barrier<'a> {
    fn new(p: &'a ConvexProgram, working: &[Atom]) -> Self {
        let n = p.num_vars();
        let mut groups: Vec<Group<'a>> = Vec::new();
        for atom in working {
            if groups.last().is_none_or(|g| !core::ptr::eq(g.con, &p.scalar[atom.con])) {
                let con = &p.scalar[atom.con];
                let mut a = vec![0.0; n];
                con.rhs.scatter(&mut a, 1.0);
                let jac = match &con.lhs {
                    ConstraintLhs::Constant(_) => None,
                    ConstraintLhs::SquaredResiduals(s) => {
                        let mut j = DMatrix::zeros(s.map_dim(), n);
                        for (r, f) in s.map.iter().enumerate() {
                            for &(i, c) in &f.terms {
                                j[(r, i)] += c;
                            }
                        }
                        Some(j)
                    }
                };
                groups.push(Group { con, pieces: Vec::new(), a, jac, bj: Vec::new() });
            }
            let g = groups.last_mut().unwrap();
            g.pieces.push(atom.piece);
            if let (ConstraintLhs::SquaredResiduals(s), Some(j)) = (&g.con.lhs, &g.jac) {
                let gain = DMatrix::from_row_slice(s.out_dim, s.map_dim(), s.gain(atom.piece));
                g.bj.push(gain * j);
            }
        }
        let atoms = working.len();
        Barrier { p, n, groups, atoms }
    }

    fn barrier_size(&self) -> f64 {
        (self.atoms + self.p.psd.iter().map(|c| c.dim()).sum::<usize>()) as f64
    }

    /// Slacks and log-determinants at `z`; `None` outside the interior.
    fn point(&self, z: &[f64], phase_one: bool) -> Option<Point> {
        let u = &z[..self.n];
        let sigma = if phase_one { z[self.n] } else { 0.0 };
        let mut slacks = Vec::with_capacity(self.atoms);
        for g in &self.groups {
            let rhs = g.con.rhs.eval(u) + sigma;
            match &g.con.lhs {
                ConstraintLhs::Constant(v) => {
                    for _ in &g.pieces {
                        slacks.push(rhs - v);
                    }
                }
                ConstraintLhs::SquaredResiduals(s) => {
                    let mut w = vec![0.0; s.map_dim()];
                    s.eval_map(u, &mut w);
                    let mut res = vec![0.0; s.out_dim];
                    for &j in &g.pieces {
                        slacks.push(rhs - s.residual(j, &w, &mut res));
                    }
                }
            }
        }
        if slacks.iter().any(|s| !(*s > 0.0)) {
            return None;
        }
        let mut logdets = Vec::with_capacity(self.p.psd.len());
        for c in &self.p.psd {
            let mut x = c.eval(u);
            if phase_one {
                for i in 0..x.nrows() {
                    x[(i, i)] += sigma;
                }
            }
            let ch = x.cholesky()?;
            let l = ch.l_dirty();
            let mut ld = 0.0;
            for i in 0..l.nrows() {
                ld += 2.0 * libm::log(l[(i, i)]);
            }
            if !ld.is_finite() {
                return None;
            }
            logdets.push(ld);
        }
        Some(Point { slacks, logdets })
    }

    /// Gradient and Hessian of `t c'z − Σ log s − Σ log det X` at `z`.
    fn derivatives(&self, z: &[f64], t: f64, c: &[f64], pt: &Point, phase_one: bool) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n;
        let nv = z.len();
        let u = &z[..n];
        let mut grad = DVector::from_iterator(nv, c.iter().map(|v| t * v));
        let mut hess = DMatrix::zeros(nv, nv);
        let mut k = 0;
        let mut gs = DVector::zeros(nv);
        for g in &self.groups {
            match &g.con.lhs {
                ConstraintLhs::Constant(_) => {
                    for _ in &g.pieces {
                        let s = pt.slacks[k];
                        k += 1;
                        gs.as_mut_slice()[..n].copy_from_slice(&g.a);
                        if phase_one {
                            gs[n] = 1.0;
                        }
                        grad.axpy(-1.0 / s, &gs, 1.0);
                        hess.ger(1.0 / (s * s), &gs, &gs, 1.0);
                    }
                }
                ConstraintLhs::SquaredResiduals(sr) => {
                    let mut w = vec![0.0; sr.map_dim()];
                    sr.eval_map(u, &mut w);
                    let mut res = vec![0.0; sr.out_dim];
                    for (idx, &j) in g.pieces.iter().enumerate() {
                        let s = pt.slacks[k];
                        k += 1;
                        sr.residual(j, &w, &mut res);
                        let b = &g.bj[idx];
                        let r = DVector::from_column_slice(&res);
                        let btr = b.tr_mul(&r);
                        for i in 0..n {
                            gs[i] = g.a[i] + 2.0 * btr[i];
                        }
                        if phase_one {
                            gs[n] = 1.0;
                        }
                        grad.axpy(-1.0 / s, &gs, 1.0);
                        hess.ger(1.0 / (s * s), &gs, &gs, 1.0);
                        let mut top = hess.view_mut((0, 0), (n, n));
                        top.gemm_tr(2.0 / s, b, b, 1.0);
                    }
                }
            }
        }
        for c in &self.p.psd {
            let mut x = c.eval(u);
            if phase_one {
                for i in 0..x.nrows() {
                    x[(i, i)] += z[n];
                }
            }
            let inv = match x.cholesky() {
                Some(ch) => ch.inverse(),
                None => continue,
            };
            let mut idx: Vec<usize> = Vec::with_capacity(c.terms.len() + 1);
            let mut ws: Vec<DMatrix<f64>> = Vec::with_capacity(c.terms.len() + 1);
            for (i, m) in &c.terms {
                idx.push(*i);
                ws.push(&inv * m);
            }
            if phase_one {
                idx.push(n);
                ws.push(inv.clone());
            }
            let wts: Vec<DMatrix<f64>> = ws.iter().map(|w| w.transpose()).collect();
            for a in 0..ws.len() {
                grad[idx[a]] -= ws[a].trace();
                for b in a..ws.len() {
                    let v = ws[a].dot(&wts[b]);
                    hess[(idx[a], idx[b])] += v;
                    if a != b {
                        hess[(idx[b], idx[a])] += v;
                    }
                }
            }
        }
        (grad, hess)
    }

    /// Barrier value change from `old` to `new` for a step `dz · step`.
    fn delta(&self, t: f64, c: &[f64], dz: &DVector<f64>, step: f64, old: &Point, new: &Point) -> f64 {
        let lin = t * step * dot(c, dz.as_slice());
        let logs: f64 = old.slacks.iter().zip(&new.slacks).map(|(a, b)| libm::log(b / a)).sum::<f64>()
            + old.logdets.iter().zip(&new.logdets).map(|(a, b)| b - a).sum::<f64>();
        lin - logs
    }

    fn center(
        &self,
        z: &mut Vec<f64>,
        t: f64,
        c: &[f64],
        phase_one: bool,
        tol: &Tolerances,
        steps: &mut usize,
    ) -> Result<Exit> {
        let mut pt = match self.point(z, phase_one) {
            Some(p) => p,
            None => return Ok(Exit::Stuck),
        };
        for _ in 0..tol.max_newton {
            let (grad, hess) = self.derivatives(z, t, c, &pt, phase_one);
            let dz = match solve_spd(&hess, &(-&grad)) {
                Some(d) => d,
                None => return Ok(Exit::Stuck),
            };
            let slope = grad.dot(&dz);
            if -slope / 2.0 <= 1e-10 {
                return Ok(Exit::Converged);
            }
            let mut step = 1.0;
            if phase_one && dz[self.n] < 0.0 {
                // land at a comfortably negative σ instead of following a
                // possibly unbounded phase-one direction
                let cross = 1.1 * z[self.n] / -dz[self.n];
                if cross < step {
                    let mut s = cross;
                    for _ in 0..60 {
                        let cand: Vec<f64> = z.iter().zip(dz.iter()).map(|(a, b)| a + s * b).collect();
                        if cand[self.n] < 0.0 && self.point(&cand, true).is_some() {
                            *z = cand;
                            *steps += 1;
                            return Ok(Exit::Stopped);
                        }
                        s *= 0.5;
                    }
                }
            }
            let mut accepted = None;
            while step > 1e-14 {
                let cand: Vec<f64> = z.iter().zip(dz.iter()).map(|(a, b)| a + step * b).collect();
                if let Some(np) = self.point(&cand, phase_one) {
                    if self.delta(t, c, &dz, step, &pt, &np) <= 0.25 * step * slope {
                        accepted = Some((cand, np));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((cand, np)) = accepted else {
                return Ok(if -slope < 1e-6 { Exit::Converged } else { Exit::Stuck });
            };
            *z = cand;
            pt = np;
            *steps += 1;
            if phase_one && z[self.n] < 0.0 {
                return Ok(Exit::Stopped);
            }
            if norm(z) > DIVERGENCE {
                return Err(Error::Unbounded);
            }
        }
        Ok(Exit::Limit)
    }

    fn initial_violation(&self, u: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for g in &self.groups {
            let rhs = g.con.rhs.eval(u);
            match &g.con.lhs {
                ConstraintLhs::Constant(v) => worst = worst.max(v - rhs),
                ConstraintLhs::SquaredResiduals(s) => {
                    let mut w = vec![0.0; s.map_dim()];
                    s.eval_map(u, &mut w);
                    let mut res = vec![0.0; s.out_dim];
                    for &j in &g.pieces {
                        worst = worst.max(s.residual(j, &w, &mut res) - rhs);
                    }
                }
            }
        }
        for c in &self.p.psd {
            worst = worst.max(-min_eigenvalue(&c.eval(u)));
        }
        worst
    }

    /// Phase one (when needed) followed by the barrier path.
    fn minimize(&self, u: Vec<f64>, tol: &Tolerances, steps: &mut usize) -> Result<Vec<f64>> {
        let n = self.n;
        let m_total = self.barrier_size();
        let mut cost = vec![0.0; n];
        self.p.objective.scatter(&mut cost, 1.0);
        if m_total == 0.0 {
            return if cost.iter().all(|v| *v == 0.0) { Ok(u) } else { Err(Error::Unbounded) };
        }

        let mut u = u;
        if self.point(&u, false).is_none() {
            let viol = self.initial_violation(&u);
            let mut z = u.clone();
            z.push(viol + 0.1 * viol.max(1.0));
            let mut c1 = vec![0.0; n + 1];
            c1[n] = 1.0;
            let mut t = m_total / z[n].max(1.0);
            let mut found = false;
            for _ in 0..tol.max_outer {
                match self.center(&mut z, t, &c1, true, tol, steps)? {
                    Exit::Stopped => {
                        found = true;
                        break;
                    }
                    Exit::Stuck | Exit::Limit | Exit::Converged => {}
                }
                if z[n] < 0.0 {
                    found = true;
                    break;
                }
                if z[n] - m_total / t > 0.0 || m_total / t < 1e-12 {
                    return Err(Error::Infeasible(z[n]));
                }
                t *= MU;
            }
            if !found {
                return Err(Error::MaxIterations);
            }
            z.truncate(n);
            u = z;
        }

        let obj = |u: &[f64]| dot(&cost, u);
        let mut t = m_total / obj(&u).abs().max(1.0);
        let mut z = u;
        for _ in 0..tol.max_outer {
            self.center(&mut z, t, &cost, false, tol, steps)?;
            let o = obj(&z) + self.p.objective.constant;
            if m_total / t <= tol.gap * o.abs().max(1.0) {
                break;
            }
            t *= MU;
        }
        Ok(z)
    }
}

/// Moves an LP solution onto the vertex (or face) defined by its active
/// constraints, so that order statistics come out exact.
fn polish(p: &ConvexProgram, x: &[f64], tol: &Tolerances, included: &dyn Fn(usize) -> bool) -> Option<Vec<f64>> {
    if !p.psd.is_empty() {
        return None;
    }
    let n = p.num_vars();
    let mut rows: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    for (i, c) in p.scalar.iter().enumerate() {
        if !included(i) {
            continue;
        }
        let ConstraintLhs::Constant(v) = c.lhs else {
            return None;
        };
        let rhs = c.rhs.eval(x);
        let scale = 1f64.max(rhs.abs()).max(v.abs());
        let slack = rhs - v;
        if slack <= 1e-4 * scale {
            let mut a = vec![0.0; n];
            c.rhs.scatter(&mut a, 1.0);
            rows.push((slack / scale, a, v - c.rhs.constant));
        }
    }
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));

    // greedy selection of linearly independent active rows
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut picked: Vec<(Vec<f64>, f64)> = Vec::new();
    for (_, a, b) in rows {
        let mut r = a.clone();
        for q in &basis {
            let c = dot(&r, q);
            for (ri, qi) in r.iter_mut().zip(q) {
                *ri -= c * qi;
            }
        }
        let nr = norm(&r);
        if nr > 1e-9 * norm(&a).max(1e-300) {
            basis.push(r.iter().map(|v| v / nr).collect());
            picked.push((a, b));
            if picked.len() == n {
                break;
            }
        }
    }
    if picked.is_empty() {
        return None;
    }
    let k = picked.len();
    let amat = DMatrix::from_fn(k, n, |i, j| picked[i].0[j]);
    let bvec = DVector::from_iterator(k, picked.iter().map(|r| r.1));
    let xv = DVector::from_column_slice(x);
    let u = if k == n {
        amat.clone().lu().solve(&bvec)?
    } else {
        let resid = &amat * &xv - &bvec;
        let gram = &amat * amat.transpose();
        let y = gram.lu().solve(&resid)?;
        &xv - amat.transpose() * y
    };
    let u: Vec<f64> = u.iter().copied().collect();
    if u.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let before = p.objective.eval(x);
    if p.objective.eval(&u) > before + tol.opt * before.abs().max(1.0) {
        return None;
    }
    for (i, c) in p.scalar.iter().enumerate() {
        if !included(i) {
            continue;
        }
        if let ConstraintLhs::Constant(v) = c.lhs {
            let rhs = c.rhs.eval(&u);
            if rhs - v < -tol.feas * 1f64.max(rhs.abs()).max(v.abs()) {
                return None;
            }
        }
    }
    Some(u)
}
