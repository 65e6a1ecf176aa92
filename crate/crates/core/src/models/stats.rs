//! Descriptive statistics used as summaries.

use crate::error::{AbcError, Result};

pub fn mean(data: &[f64]) -> f64 {
    data.iter().sum::<f64>() / data.len() as f64
}

/// Variance with the `1/n` divisor.
pub fn variance(data: &[f64]) -> f64 {
    let m = mean(data);
    data.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / data.len() as f64
}

/// Position-`h` linear interpolation on already sorted data, `h = (n-1)α + 1`.
pub fn quantile_sorted(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * alpha;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Sample quantile by linear interpolation of order statistics.
pub fn sample_quantile(data: &[f64], alpha: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(AbcError::contract("sample quantile of empty data"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AbcError::contract(format!("quantile probability {alpha} not in (0,1)")));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, alpha))
}

/// Lag-1 autocorrelation `Σ(y_t-ȳ)(y_{t-1}-ȳ) / Σ(y_t-ȳ)²`.
pub fn lag1_autocorrelation(data: &[f64]) -> Result<f64> {
    if data.len() < 2 {
        return Err(AbcError::contract("autocorrelation needs at least two points"));
    }
    let m = mean(data);
    let denom: f64 = data.iter().map(|y| (y - m) * (y - m)).sum();
    if denom <= 0.0 {
        return Err(AbcError::domain("autocorrelation of a constant series"));
    }
    let num: f64 = data
        .windows(2)
        .map(|w| (w[1] - m) * (w[0] - m))
        .sum();
    Ok(num / denom)
}
