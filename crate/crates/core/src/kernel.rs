//! Order-statistic category probabilities and the PAVA projection.
//!
//! With integer shape parameters the regularized incomplete beta function is
//! a binomial upper tail:
//!
//! ```text
//! B_x(h, m) = sum_{t=h}^{H} C(H, t) x^t (1 - x)^(H - t),    H = h + m - 1
//! ```
//!
//! i.e. the probability that at least `h` of `H` independent units fall at or
//! below `x`. No quadrature is involved.

use crate::error::{invalid, Result};

/// `C(n, k)` in floating point. Exact for every `n` used here (set sizes are small).
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0_f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Tail sum without argument checks; `1 <= h <= set_size`, `x` in `[0, 1]`.
#[inline]
pub(crate) fn binomial_tail(x: f64, h: usize, set_size: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let y = 1.0 - x;
    (h..=set_size)
        .map(|t| binomial(set_size, t) * x.powi(t as i32) * y.powi((set_size - t) as i32))
        .sum()
}

/// Regularized incomplete beta `B_x(h, m)` for positive integer `h`, `m`.
pub fn regularized_incomplete_beta(x: f64, h: usize, m: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return invalid(format!("incomplete beta argument {x} outside [0, 1]"));
    }
    if h == 0 || m == 0 {
        return invalid("incomplete beta parameters must be positive integers");
    }
    Ok(binomial_tail(x, h, h + m - 1))
}

/// Density of the `h`-th order statistic of `set_size` uniforms at `x`,
/// i.e. `d/dx B_x(h, H-h+1)`.
#[inline]
pub(crate) fn order_stat_density(x: f64, h: usize, set_size: usize) -> f64 {
    let scale = set_size as f64 * binomial(set_size - 1, h - 1);
    scale * x.powi((h - 1) as i32) * (1.0 - x).powi((set_size - h) as i32)
}

/// Derivative of [`order_stat_density`] in `x`.
#[inline]
pub(crate) fn order_stat_density_slope(x: f64, h: usize, set_size: usize) -> f64 {
    let scale = set_size as f64 * binomial(set_size - 1, h - 1);
    let a = (h - 1) as i32;
    let b = (set_size - h) as i32;
    let y = 1.0 - x;
    let left = if a > 0 { a as f64 * x.powi(a - 1) * y.powi(b) } else { 0.0 };
    let right = if b > 0 { b as f64 * x.powi(a) * y.powi(b - 1) } else { 0.0 };
    scale * (left - right)
}

/// Category law of the `h`-th order statistic in a set of `set_size` draws.
///
/// `cumulative` is `c_1..c_Q` with `c_Q = 1`; `c_0 = 0` is implied. Returns
/// `p_(h)q = B_{c_q}(h, H-h+1) - B_{c_{q-1}}(h, H-h+1)` for `q = 1..Q`.
pub fn order_stat_category_pmf(h: usize, set_size: usize, cumulative: &[f64]) -> Result<Vec<f64>> {
    if h == 0 || h > set_size {
        return invalid(format!("rank {h} outside 1..={set_size}"));
    }
    let Some(&last) = cumulative.last() else {
        return invalid("cumulative vector is empty");
    };
    if last != 1.0 {
        return invalid(format!("final cumulative probability is {last}, expected 1"));
    }
    let mut prev = 0.0;
    for &c in cumulative {
        if !(c > prev && c <= 1.0) {
            return invalid("cumulative probabilities must be strictly increasing in (0, 1]");
        }
        prev = c;
    }
    let mut out = Vec::with_capacity(cumulative.len());
    let mut lower = 0.0;
    for &c in cumulative {
        let upper = binomial_tail(c, h, set_size);
        out.push(upper - lower);
        lower = upper;
    }
    Ok(out)
}

/// Weighted least-squares projection onto non-increasing sequences.
///
/// Pool-adjacent-violators: blocks are merged while a later block mean
/// exceeds its predecessor; each pooled block takes its weighted mean.
pub fn pava_non_increasing(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if values.len() != weights.len() {
        return invalid(format!("{} values but {} weights", values.len(), weights.len()));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return invalid(format!("PAVA weights must be strictly positive, got {w}"));
    }
    Ok(pava_unchecked(values, weights))
}

pub(crate) fn pava_unchecked(values: &[f64], weights: &[f64]) -> Vec<f64> {
    struct Block {
        weighted_sum: f64,
        weight: f64,
        /// Kept exact for blocks that were never pooled.
        mean: f64,
        len: usize,
    }

    let mut blocks: Vec<Block> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push(Block { weighted_sum: v * w, weight: w, mean: v, len: 1 });
        while blocks.len() > 1 && blocks[blocks.len() - 1].mean > blocks[blocks.len() - 2].mean {
            let last = blocks.pop().unwrap();
            let prev = blocks.last_mut().unwrap();
            prev.weighted_sum += last.weighted_sum;
            prev.weight += last.weight;
            prev.mean = prev.weighted_sum / prev.weight;
            prev.len += last.len;
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for b in &blocks {
        out.extend(std::iter::repeat_n(b.mean, b.len));
    }
    out
}
