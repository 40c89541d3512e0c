//! Log-space binomial probabilities.

pub(crate) fn ln_choose(n: f64, k: f64) -> f64 {
    libm::lgamma(n + 1.0) - libm::lgamma(k + 1.0) - libm::lgamma(n - k + 1.0)
}

fn ln_pmf(i: u64, n: u64, p: f64) -> f64 {
    let (i_f, n_f) = (i as f64, n as f64);
    ln_choose(n_f, i_f) + i_f * libm::log(p) + (n_f - i_f) * libm::log1p(-p)
}

/// `ln Σ_{i∈range} pmf(i)`, summing outwards from `start` (the largest term)
/// with the ratio `pmf(i±1)/pmf(i)`.
fn ln_tail(start: u64, lower: bool, n: u64, p: f64) -> f64 {
    let head = ln_pmf(start, n, p);
    let q = 1.0 - p;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut i = start;
    loop {
        if lower {
            if i == 0 {
                break;
            }
            term *= i as f64 * q / ((n - i + 1) as f64 * p);
            i -= 1;
        } else {
            if i == n {
                break;
            }
            term *= (n - i) as f64 * p / ((i + 1) as f64 * q);
            i += 1;
        }
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    head + libm::log(sum)
}

/// `ln P(X <= k)` for `X ~ Binomial(n, p)`.
pub(crate) fn ln_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let mode = (n as f64 + 1.0) * p;
    if (k as f64) < mode {
        ln_tail(k, true, n, p)
    } else {
        // 1 - P(X >= k+1), the upper tail being the small side
        let upper = libm::exp(ln_tail(k + 1, false, n, p));
        libm::log1p(-upper.min(1.0))
    }
}

/// `ln P(X >= k)`.
pub(crate) fn ln_sf(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 || p >= 1.0 {
        return 0.0;
    }
    if k > n || p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let mode = (n as f64 + 1.0) * p;
    if (k as f64) > mode {
        ln_tail(k, false, n, p)
    } else {
        let lower = libm::exp(ln_tail(k - 1, true, n, p));
        libm::log1p(-lower.min(1.0))
    }
}
