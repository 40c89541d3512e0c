//! Out-of-sample checks of an accuracy function.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::binomial::{ln_cdf, ln_sf};
use crate::bisim::{bisim_accuracy, BisimCertificate};
use crate::jlss::{simulate, JlssModel};
use crate::metrics::{squared_distance, DistanceSpec};
use crate::pipeline::ScenarioSource;
use crate::scenario::AccuracyModel;
use crate::seed::{scenario_seed, validation_root};
use crate::{Error, Executor, Result};

/// Anything that maps an initial state to an accuracy level.
pub trait AccuracyFn: Sync {
    fn accuracy(&self, x0: &[f64]) -> Result<f64>;
}

impl AccuracyFn for AccuracyModel {
    fn accuracy(&self, x0: &[f64]) -> Result<f64> {
        self.evaluate(x0, 0)
    }
}

impl AccuracyFn for BisimCertificate {
    fn accuracy(&self, x0: &[f64]) -> Result<f64> {
        bisim_accuracy(self, x0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolationReport {
    pub eps_hat: f64,
    pub m: usize,
    pub violations: usize,
    /// Two-sided 99% Clopper–Pearson interval.
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Exact binomial confidence interval for `k` successes out of `m`.
pub fn clopper_pearson(k: usize, m: usize, confidence: f64) -> Result<(f64, f64)> {
    if m == 0 || k > m {
        return Err(Error::param(format!("need 0 <= k <= m and m >= 1, got k = {k}, m = {m}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::param(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let half = libm::log((1.0 - confidence) / 2.0);
    let (k64, m64) = (k as u64, m as u64);
    // lower: P(X >= k | p) = half, increasing in p
    let lo = if k == 0 { 0.0 } else { bisect(|p| ln_sf(k64, m64, p) >= half) };
    // upper: P(X <= k | p) = half, decreasing in p
    let hi = if k == m { 1.0 } else { bisect(|p| ln_cdf(k64, m64, p) < half) };
    Ok((lo, hi))
}

/// Smallest `p` in `[0, 1]` where a monotone predicate turns true.
fn bisect(pred: impl Fn(f64) -> bool) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Fraction of `m` fresh scenarios whose squared distance exceeds the
/// accuracy. Scenarios come from the validation seed domain of `root`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_violation<A: AccuracyFn, E: Executor>(
    accuracy: &A,
    system: &JlssModel,
    model: &JlssModel,
    source: &ScenarioSource,
    spec: DistanceSpec,
    m: usize,
    root: u64,
    exec: &E,
) -> Result<ViolationReport> {
    if m == 0 {
        return Err(Error::param("need at least one validation scenario"));
    }
    let vroot = validation_root(root);
    let flags = exec.map(m, |i| -> Result<bool> {
        let sc = source.scenario(scenario_seed(vroot, i as u64))?;
        let ys = simulate(system, &sc)?;
        let ym = simulate(model, &sc)?;
        let d2 = squared_distance(spec, &ys, &ym)?;
        Ok(d2 > accuracy.accuracy(sc.x0.as_slice())?)
    });
    let mut violations = 0;
    for f in flags {
        violations += f? as usize;
    }
    let (ci_lo, ci_hi) = clopper_pearson(violations, m, 0.99)?;
    Ok(ViolationReport { eps_hat: violations as f64 / m as f64, m, violations, ci_lo, ci_hi })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub counts: Vec<usize>,
    pub width: f64,
}

impl Histogram {
    /// Equal-width bins over `[0, max]`.
    pub fn from_values(values: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::param("need at least one bin"));
        }
        let max = values.iter().copied().fold(0.0, f64::max);
        let width = if max > 0.0 { max / bins as f64 } else { 1.0 };
        let mut counts = vec![0; bins];
        for &v in values {
            let b = libm::floor(v.max(0.0) / width) as usize;
            counts[b.min(bins - 1)] += 1;
        }
        let centers = (0..bins).map(|b| (b as f64 + 0.5) * width).collect();
        Ok(Histogram { centers, counts, width })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationHistogram {
    /// `max_w [h(x0) − D²]⁺` per initial state.
    pub values: Vec<f64>,
    /// The same, divided by `D²` at the maximizing realization.
    pub normalized: Vec<f64>,
    pub raw: Histogram,
    pub scaled: Histogram,
}

/// Slack of the accuracy function over `n_x0` initial states, each tested
/// against `n_w` input realizations.
#[allow(clippy::too_many_arguments)]
pub fn deviation_histogram<A: AccuracyFn, E: Executor>(
    accuracy: &A,
    system: &JlssModel,
    model: &JlssModel,
    source: &ScenarioSource,
    spec: DistanceSpec,
    n_x0: usize,
    n_w: usize,
    root: u64,
    bins: usize,
    exec: &E,
) -> Result<DeviationHistogram> {
    if n_x0 == 0 || n_w == 0 {
        return Err(Error::param("need at least one initial state and one realization"));
    }
    let vroot = validation_root(root);
    let rows = exec.map(n_x0, |i| -> Result<(f64, f64)> {
        let x_root = scenario_seed(vroot, i as u64);
        let x0: DVector<f64> = source.scenario(x_root)?.x0;
        let h = accuracy.accuracy(x0.as_slice())?;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for j in 0..n_w {
            let sc = source.scenario(scenario_seed(x_root, j as u64))?.with_x0(x0.clone());
            let d2 = squared_distance(spec, &simulate(system, &sc)?, &simulate(model, &sc)?)?;
            if h - d2 > best.0 {
                best = (h - d2, d2);
            }
        }
        let value = best.0.max(0.0);
        let normalized = if best.1 > 0.0 { value / best.1 } else { 0.0 };
        Ok((value, normalized))
    });
    let mut values = Vec::with_capacity(n_x0);
    let mut normalized = Vec::with_capacity(n_x0);
    for r in rows {
        let (v, n) = r?;
        values.push(v);
        normalized.push(n);
    }
    Ok(DeviationHistogram {
        raw: Histogram::from_values(&values, bins)?,
        scaled: Histogram::from_values(&normalized, bins)?,
        values,
        normalized,
    })
}

/// `P{∃t: yS_t ∈ U} <= min(1, P{∃t: yM_t ∈ Ū} + ε)`, with `Ū` the set `U`
/// enlarged by `√h(x0)`.
pub fn safety_bound(model_reach_prob: f64, eps: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&model_reach_prob) || !(0.0..=1.0).contains(&eps) {
        return Err(Error::param(format!("probabilities must lie in [0, 1], got {model_reach_prob} and {eps}")));
    }
    Ok((model_reach_prob + eps).min(1.0))
}
