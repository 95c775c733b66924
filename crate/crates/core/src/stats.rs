//! Descriptive statistics shared by the metric modules.
//!
//! Every function rejects degenerate input (too short, zero variance,
//! non-finite values) with a [`StatsError`] instead of returning NaN.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("zero variance: statistic undefined for constant input")]
    ZeroVariance,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("least-squares system is singular")]
    Singular,
}

pub type Result<T> = std::result::Result<T, StatsError>;

fn constant(xs: &[f64]) -> bool {
    xs.iter().all(|&x| x == xs[0])
}

fn check(xs: &[f64], needed: usize) -> Result<()> {
    if xs.len() < needed {
        return Err(StatsError::TooShort {
            needed,
            got: xs.len(),
        });
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

pub fn mean(xs: &[f64]) -> Result<f64> {
    check(xs, 1)?;
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample variance (n - 1 denominator).
pub fn sample_variance(xs: &[f64]) -> Result<f64> {
    check(xs, 2)?;
    let m = mean(xs)?;
    Ok(xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64)
}

pub fn sample_std(xs: &[f64]) -> Result<f64> {
    sample_variance(xs).map(f64::sqrt)
}

/// Pearson correlation, clamped to [-1, 1].
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    check(xs, 2)?;
    check(ys, 2)?;
    if constant(xs) || constant(ys) {
        return Err(StatsError::ZeroVariance);
    }
    let mx = mean(xs)?;
    let my = mean(ys)?;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of the pairs `(x[t], x[t + lag])`.
pub fn autocorrelation(xs: &[f64], lag: usize) -> Result<f64> {
    check(xs, lag + 3)?;
    let n = xs.len() - lag;
    pearson(&xs[..n], &xs[lag..])
}

pub fn acf(xs: &[f64], lags: &[usize]) -> Result<Vec<f64>> {
    lags.iter().map(|&l| autocorrelation(xs, l)).collect()
}

/// Population moments of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Sample standard deviation (n - 1).
    pub std: f64,
    pub skewness: f64,
    /// Raw (Pearson) kurtosis; 3 for a normal distribution.
    pub kurtosis: f64,
    pub count: usize,
}

pub fn moments(xs: &[f64]) -> Result<Moments> {
    check(xs, 4)?;
    let n = xs.len() as f64;
    let m = mean(xs)?;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    if m2 == 0.0 || constant(xs) {
        return Err(StatsError::ZeroVariance);
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    Ok(Moments {
        mean: m,
        std: (m2 * n / (n - 1.0)).sqrt(),
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
        count: xs.len(),
    })
}

/// Simple linear regression `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
}

pub fn ols(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    check(xs, 2)?;
    check(ys, 2)?;
    let mx = mean(xs)?;
    let my = mean(ys)?;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 || constant(xs) {
        return Err(StatsError::ZeroVariance);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_norm = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(LinearFit {
        intercept,
        slope,
        residual_norm,
    })
}

/// Least-squares polynomial; returns coefficients lowest order first.
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    check(xs, degree + 1)?;
    check(ys, degree + 1)?;
    let a = DMatrix::from_fn(xs.len(), degree + 1, |i, j| xs[i].powi(j as i32));
    let b = DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.max();
    if svd.singular_values.min() <= max_sv * 1e-12 {
        return Err(StatsError::Singular);
    }
    let coef = svd
        .solve(&b, max_sv * 1e-14)
        .map_err(|_| StatsError::Singular)?;
    Ok(coef.iter().copied().collect())
}

/// Linear-interpolated quantile of unsorted data, `q` in [0, 1].
pub fn quantile(xs: &[f64], q: f64) -> Result<f64> {
    check(xs, 1)?;
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

pub fn median(xs: &[f64]) -> Result<f64> {
    quantile(xs, 0.5)
}

/// Histogram with fixed-width bins starting at `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub start: f64,
    pub width: f64,
    pub counts: Vec<u64>,
}

pub fn histogram(xs: &[f64], start: f64, stop: f64, width: f64) -> Histogram {
    let nbins = ((stop - start) / width).ceil().max(1.0) as usize;
    let mut counts = vec![0u64; nbins];
    for &x in xs.iter().filter(|x| x.is_finite()) {
        let i = (((x - start) / width).floor().max(0.0) as usize).min(nbins - 1);
        counts[i] += 1;
    }
    Histogram {
        start,
        width,
        counts,
    }
}
