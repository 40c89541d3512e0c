//! Sample sizes for the scenario approach with constraint removal.
//!
//! Three bounds are provided:
//!
//! - [`min_n_implicit`]: the smallest `N` with
//!   `C(k+r-1, k) · P(Bin(N, ε) <= k+r-1) <= β`, `k = ⌊αN⌋`;
//! - [`min_n_chernoff`]: an explicit sufficient condition obtained from a
//!   Chernoff bound on the binomial tail (always at least the implicit `N`);
//! - [`min_n_vc`]: the non-convex bound in terms of a VC dimension.
//!
//! Everything is evaluated in log space, so `N` in the millions is fine.

use alloc::format;

use crate::binomial::{ln_cdf, ln_choose};
use crate::{Error, Result};

/// Violation level `eps`, confidence `beta`, empirical violation `alpha` and
/// the number of decision variables `r` (the VC dimension for [`min_n_vc`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub eps: f64,
    pub beta: f64,
    pub alpha: f64,
    pub r: usize,
}

impl BoundParams {
    pub fn new(eps: f64, beta: f64, alpha: f64, r: usize) -> Result<Self> {
        let p = BoundParams { eps, beta, alpha, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::param(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::param(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.alpha >= 0.0 && self.alpha < self.eps) {
            return Err(Error::param(format!(
                "alpha must satisfy 0 <= alpha < eps, got alpha = {} with eps = {}",
                self.alpha, self.eps
            )));
        }
        if self.r == 0 {
            return Err(Error::param("r must be at least 1"));
        }
        Ok(())
    }
}

/// `⌊αN⌋`, the number of constraints removed out of `n`.
pub fn removal_count(alpha: f64, n: usize) -> usize {
    libm::floor(alpha * n as f64) as usize
}

/// Natural log of the left-hand side of the implicit condition at `n`.
pub fn implicit_log_lhs(p: &BoundParams, n: usize) -> f64 {
    let k = removal_count(p.alpha, n) as u64;
    let top = k + p.r as u64 - 1;
    ln_choose(top as f64, k as f64) + ln_cdf(top, n as u64, p.eps)
}

pub fn implicit_holds(p: &BoundParams, n: usize) -> bool {
    n > 0 && implicit_log_lhs(p, n) <= libm::log(p.beta)
}

/// First `N` with `⌊αN⌋ >= k`.
fn period_start(alpha: f64, k: usize) -> usize {
    if k == 0 {
        return 1;
    }
    let mut n = libm::ceil(k as f64 / alpha) as usize;
    while n > 1 && removal_count(alpha, n - 1) >= k {
        n -= 1;
    }
    while removal_count(alpha, n) < k {
        n += 1;
    }
    n
}

/// Smallest `N` in `[lo, hi]` where a predicate that is monotone on that range
/// holds, assuming it holds at `hi`.
fn bisect_first(mut lo: usize, mut hi: usize, holds: impl Fn(usize) -> bool) -> usize {
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    hi
}

/// Smallest `N` for which the implicit condition holds.
///
/// Inside one floor period (all `N` sharing `⌊αN⌋ = k`) the condition is
/// monotone in `N`, so the search runs over periods using the condition at the
/// last `N` of each period, then bisects inside the first period that passes.
pub fn min_n_implicit(p: &BoundParams) -> Result<usize> {
    p.validate()?;
    let holds = |n: usize| implicit_holds(p, n);

    if p.alpha == 0.0 {
        let mut hi = 1;
        while !holds(hi) {
            hi *= 2;
        }
        return Ok(bisect_first(hi / 2 + 1, hi, holds).max(1));
    }

    let period_end = |k: usize| period_start(p.alpha, k + 1) - 1;
    let envelope = |k: usize| holds(period_end(k));

    let mut hi = 1;
    while !envelope(hi) {
        hi *= 2;
    }
    let mut k = if hi == 1 {
        if envelope(0) {
            0
        } else {
            1
        }
    } else {
        bisect_first(hi / 2 + 1, hi, envelope)
    };
    // guard against a non-monotone envelope just below the crossing
    let floor_k = k.saturating_sub(64);
    for cand in (floor_k..k).rev() {
        if envelope(cand) {
            k = cand;
        }
    }
    let start = period_start(p.alpha, k).max(1);
    Ok(bisect_first(start, period_end(k), holds))
}

/// Smallest integer `N` satisfying the Chernoff-based explicit bound.
pub fn min_n_chernoff(p: &BoundParams) -> Result<usize> {
    p.validate()?;
    let (eps, alpha) = (p.eps, p.alpha);
    let gap2 = (eps - alpha) * (eps - alpha);
    let lead = (2.0 + alpha) * eps / gap2;
    let rm1 = (p.r - 1) as f64;
    let log_term = if p.r > 1 { rm1 * libm::log(2.0 * eps * (2.0 + alpha) * rm1 / gap2) } else { 0.0 };
    let bound = lead * (log_term + libm::log(1.0 / p.beta)) + rm1 / 2.0;
    Ok((libm::ceil(bound) as usize).max(1))
}

/// Smallest integer `N` satisfying the VC-dimension bound; `p.r` is `d_VC`.
pub fn min_n_vc(p: &BoundParams) -> Result<usize> {
    p.validate()?;
    let gap2 = (p.eps - p.alpha) * (p.eps - p.alpha);
    let d = p.r as f64;
    let bound = 5.0 * p.eps / gap2 * (d * libm::log(40.0 * p.eps / gap2) + libm::log(4.0 / p.beta));
    Ok((libm::ceil(bound) as usize).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_sample_sizes() {
        let p = BoundParams::new(0.25, 1e-10, 0.10, 28).unwrap();
        assert_eq!(min_n_implicit(&p).unwrap(), 1697);
        let p = BoundParams::new(0.25, 1e-10, 0.22, 28).unwrap();
        assert_eq!(min_n_implicit(&p).unwrap(), 91786);
    }

    #[test]
    fn degenerate_case_is_closed_form() {
        for &(eps, beta) in &[(0.25, 1e-10), (0.1, 1e-3), (0.05, 0.01)] {
            let p = BoundParams::new(eps, beta, 0.0, 1).unwrap();
            let expected = libm::ceil(libm::log(beta) / libm::log(1.0 - eps)) as usize;
            assert_eq!(min_n_implicit(&p).unwrap(), expected);
        }
    }

    #[test]
    fn regression_constants() {
        // direct evaluation of the two explicit formulas
        let p = BoundParams::new(0.25, 1e-10, 0.10, 28).unwrap();
        assert_eq!(min_n_chernoff(&p).unwrap(), 5049);
        assert_eq!(min_n_vc(&p).unwrap(), 10841);
    }

    #[test]
    fn invalid_parameters() {
        assert!(BoundParams::new(0.25, 1e-10, 0.25, 28).is_err());
        assert!(BoundParams::new(1.0, 1e-10, 0.1, 28).is_err());
        assert!(BoundParams::new(0.25, 0.0, 0.1, 28).is_err());
        assert!(BoundParams::new(0.25, 1e-3, 0.1, 0).is_err());
        assert!(BoundParams::new(0.25, 1e-3, -0.1, 3).is_err());
    }

    #[test]
    fn predicate_flips_at_returned_n() {
        for &(eps, beta, alpha, r) in &[(0.25, 1e-10, 0.1, 28), (0.1, 1e-6, 0.05, 5), (0.3, 1e-3, 0.0, 10)] {
            let p = BoundParams::new(eps, beta, alpha, r).unwrap();
            let n = min_n_implicit(&p).unwrap();
            assert!(implicit_holds(&p, n));
            assert!(!implicit_holds(&p, n - 1));
        }
    }

    #[test]
    fn vc_blows_up_as_alpha_approaches_eps() {
        let mut prev = 0;
        for i in 0..10 {
            let alpha = 0.25 * i as f64 / 10.0;
            let n = min_n_vc(&BoundParams::new(0.25, 1e-6, alpha, 4).unwrap()).unwrap();
            assert!(n > prev);
            prev = n;
        }
        let far = min_n_vc(&BoundParams::new(0.25, 1e-6, 0.0, 4).unwrap()).unwrap();
        let near = min_n_vc(&BoundParams::new(0.25, 1e-6, 0.25 - 1e-4, 4).unwrap()).unwrap();
        assert!(near as f64 > 1e6 * far as f64);
    }
}
