//! Maximum-likelihood fits and Kolmogorov-Smirnov goodness of fit for the
//! gamma, lognormal, Weibull, exponential and power-law families.
//!
//! Gamma and Weibull shapes are found by bisection on the profile-likelihood
//! score in log-shape space over `[1e-4, 1e4]` (at most 200 iterations).
//! Power-law tails use the continuous estimator
//! `alpha = 1 + n / sum(ln(x_i / x_min))` with `x_min` either given or chosen
//! by minimizing the KS distance of the tail fit.
//!
//! Integer-valued quantities (sizes, counts) are fitted with the continuous
//! likelihood.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma, LogNormal, Weibull};
use statrs::function::gamma::{digamma, ln_gamma};
use thiserror::Error;

pub const MIN_SAMPLES: usize = 30;
/// Below this many samples `choose_xmin` falls back to the sample minimum.
pub const MIN_XMIN_SCAN: usize = 100;
const SHAPE_LO: f64 = 1e-4;
const SHAPE_HI: f64 = 1e4;
const MAX_ITER: usize = 200;
const SCORE_TOL: f64 = 1e-10;
const MAX_XMIN_CANDIDATES: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("insufficient data: {got} positive samples, need {needed}")]
    InsufficientData { got: usize, needed: usize },
    #[error("degenerate sample: all values equal")]
    Degenerate,
    #[error("non-finite sample value")]
    NonFinite,
    #[error("{0} shape did not converge inside [1e-4, 1e4]")]
    NoConvergence(Family),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Family {
    Gamma,
    Lognormal,
    Weibull,
    Exponential,
    Powerlaw,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Gamma => "gamma",
            Family::Lognormal => "lognormal",
            Family::Weibull => "weibull",
            Family::Exponential => "exponential",
            Family::Powerlaw => "powerlaw",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "UPPERCASE")]
pub enum FitParams {
    Gamma { shape: f64, scale: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Weibull { shape: f64, scale: f64 },
    Exponential { rate: f64 },
    /// Density proportional to `x^-exponent` for `x >= xmin`.
    Powerlaw { exponent: f64, xmin: f64 },
}

impl FitParams {
    pub fn family(&self) -> Family {
        match self {
            FitParams::Gamma { .. } => Family::Gamma,
            FitParams::Lognormal { .. } => Family::Lognormal,
            FitParams::Weibull { .. } => Family::Weibull,
            FitParams::Exponential { .. } => Family::Exponential,
            FitParams::Powerlaw { .. } => Family::Powerlaw,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            FitParams::Gamma { shape, scale } => Gamma::new(shape, 1.0 / scale)
                .map(|d| d.cdf(x))
                .unwrap_or(f64::NAN),
            FitParams::Lognormal { mu, sigma } => LogNormal::new(mu, sigma)
                .map(|d| d.cdf(x))
                .unwrap_or(f64::NAN),
            FitParams::Weibull { shape, scale } => Weibull::new(shape, scale)
                .map(|d| d.cdf(x))
                .unwrap_or(f64::NAN),
            FitParams::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            FitParams::Powerlaw { exponent, xmin } => {
                if x <= xmin {
                    0.0
                } else {
                    1.0 - (x / xmin).powf(1.0 - exponent)
                }
            }
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            FitParams::Gamma { shape, scale } => {
                (shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
            }
            FitParams::Lognormal { mu, sigma } => {
                let z = (x.ln() - mu) / sigma;
                -x.ln() - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z
            }
            FitParams::Weibull { shape, scale } => {
                let y = x / scale;
                shape.ln() - scale.ln() + (shape - 1.0) * y.ln() - y.powf(shape)
            }
            FitParams::Exponential { rate } => rate.ln() - rate * x,
            FitParams::Powerlaw { exponent, xmin } => {
                if x < xmin {
                    f64::NEG_INFINITY
                } else {
                    (exponent - 1.0).ln() - xmin.ln() - exponent * (x / xmin).ln()
                }
            }
        }
    }

    /// The parameter a report leads with: shape, exponent, rate or sigma.
    pub fn headline(&self) -> (&'static str, f64) {
        match *self {
            FitParams::Gamma { shape, .. } | FitParams::Weibull { shape, .. } => ("shape", shape),
            FitParams::Lognormal { sigma, .. } => ("sigma", sigma),
            FitParams::Exponential { rate } => ("rate", rate),
            FitParams::Powerlaw { exponent, .. } => ("exponent", exponent),
        }
    }

    /// Named parameter list, in a fixed order.
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        match *self {
            FitParams::Gamma { shape, scale } | FitParams::Weibull { shape, scale } => {
                vec![("shape", shape), ("scale", scale)]
            }
            FitParams::Lognormal { mu, sigma } => vec![("mu", mu), ("sigma", sigma)],
            FitParams::Exponential { rate } => vec![("rate", rate)],
            FitParams::Powerlaw { exponent, xmin } => vec![("exponent", exponent), ("xmin", xmin)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFit {
    pub params: FitParams,
    /// Samples entering the fit (for power laws, the tail only).
    pub sample_count: usize,
    /// Non-positive samples dropped before fitting.
    pub dropped: usize,
    pub ks: f64,
    pub log_likelihood: f64,
}

impl DistributionFit {
    pub fn family(&self) -> Family {
        self.params.family()
    }
}

/// Drops non-positive values, returning the kept values and the drop count.
fn positive(samples: &[f64]) -> Result<(Vec<f64>, usize), FitError> {
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let kept: Vec<f64> = samples.iter().copied().filter(|&x| x > 0.0).collect();
    let dropped = samples.len() - kept.len();
    Ok((kept, dropped))
}

fn require(xs: &[f64]) -> Result<(), FitError> {
    if xs.len() < MIN_SAMPLES {
        return Err(FitError::InsufficientData {
            got: xs.len(),
            needed: MIN_SAMPLES,
        });
    }
    let first = xs[0];
    if xs.iter().all(|&x| x == first) {
        return Err(FitError::Degenerate);
    }
    Ok(())
}

/// Finds the root of a monotone `score` over log-shape in `[SHAPE_LO, SHAPE_HI]`.
/// `increasing` gives the direction of `score` in the shape.
fn solve_shape(family: Family, increasing: bool, score: impl Fn(f64) -> f64) -> Result<f64, FitError> {
    let sign = if increasing { 1.0 } else { -1.0 };
    let f = |k: f64| sign * score(k);
    let (mut lo, mut hi) = (SHAPE_LO.ln(), SHAPE_HI.ln());
    if f(lo.exp()) > 0.0 || f(hi.exp()) < 0.0 {
        return Err(FitError::NoConvergence(family));
    }
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let v = f(mid.exp());
        if v.abs() < SCORE_TOL * 1e-2 || hi - lo < 1e-15 {
            return Ok(mid.exp());
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = (0.5 * (lo + hi)).exp();
    if score(k).abs() < SCORE_TOL {
        Ok(k)
    } else {
        Err(FitError::NoConvergence(family))
    }
}

fn fit_gamma(xs: &[f64]) -> Result<FitParams, FitError> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let mean_ln = xs.iter().map(|x| x.ln()).sum::<f64>() / n;
    let s = mean.ln() - mean_ln;
    if s <= 0.0 {
        return Err(FitError::Degenerate);
    }
    // ln k - digamma(k) is decreasing in k.
    let shape = solve_shape(Family::Gamma, false, |k| k.ln() - digamma(k) - s)?;
    Ok(FitParams::Gamma {
        shape,
        scale: mean / shape,
    })
}

fn fit_weibull(xs: &[f64]) -> Result<FitParams, FitError> {
    let n = xs.len() as f64;
    // Work with data normalized by its geometric mean so that x^k stays finite.
    let ln_g = xs.iter().map(|x| x.ln()).sum::<f64>() / n;
    let ln_y: Vec<f64> = xs.iter().map(|x| x.ln() - ln_g).collect();
    let weighted = |k: f64| {
        let m = ln_y.iter().fold(f64::MIN, |a, &l| a.max(k * l));
        let (mut s0, mut s1) = (0.0, 0.0);
        for &l in &ln_y {
            let w = (k * l - m).exp();
            s0 += w;
            s1 += w * l;
        }
        (m, s0, s1)
    };
    // Profile score: sum(y^k ln y)/sum(y^k) - 1/k - mean(ln y), increasing in k.
    let shape = solve_shape(Family::Weibull, true, |k| {
        let (_, s0, s1) = weighted(k);
        s1 / s0 - 1.0 / k
    })?;
    let (m, s0, _) = weighted(shape);
    let ln_scale = ln_g + (m + s0.ln() - n.ln()) / shape;
    Ok(FitParams::Weibull {
        shape,
        scale: ln_scale.exp(),
    })
}

fn fit_lognormal(xs: &[f64]) -> FitParams {
    let n = xs.len() as f64;
    let mu = xs.iter().map(|x| x.ln()).sum::<f64>() / n;
    let var = xs.iter().map(|x| (x.ln() - mu).powi(2)).sum::<f64>() / n;
    FitParams::Lognormal {
        mu,
        sigma: var.sqrt(),
    }
}

fn fit_exponential(xs: &[f64]) -> FitParams {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    FitParams::Exponential { rate: 1.0 / mean }
}

fn power_law_exponent(tail: &[f64], xmin: f64) -> Option<f64> {
    let s: f64 = tail.iter().map(|x| (x / xmin).ln()).sum();
    (s > 0.0).then(|| 1.0 + tail.len() as f64 / s)
}

fn finish(params: FitParams, xs: &[f64], dropped: usize) -> DistributionFit {
    DistributionFit {
        params,
        sample_count: xs.len(),
        dropped,
        ks: ks_statistic(xs, &params),
        log_likelihood: xs.iter().map(|&x| params.ln_pdf(x)).sum(),
    }
}

/// Fits `family` by maximum likelihood. Non-positive samples are dropped
/// and counted. Power laws take `x_min` as the sample minimum; see
/// [`fit_power_law`] and [`choose_xmin`] for tail fits.
pub fn fit(samples: &[f64], family: Family) -> Result<DistributionFit, FitError> {
    let (xs, dropped) = positive(samples)?;
    require(&xs)?;
    let params = match family {
        Family::Gamma => fit_gamma(&xs)?,
        Family::Weibull => fit_weibull(&xs)?,
        Family::Lognormal => fit_lognormal(&xs),
        Family::Exponential => fit_exponential(&xs),
        Family::Powerlaw => {
            let xmin = xs.iter().copied().fold(f64::INFINITY, f64::min);
            return fit_power_law(samples, xmin);
        }
    };
    Ok(finish(params, &xs, dropped))
}

/// Power-law fit of the tail `x >= xmin`.
pub fn fit_power_law(samples: &[f64], xmin: f64) -> Result<DistributionFit, FitError> {
    let (xs, dropped) = positive(samples)?;
    if !(xmin > 0.0 && xmin.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let tail: Vec<f64> = xs.into_iter().filter(|&x| x >= xmin).collect();
    require(&tail)?;
    let exponent = power_law_exponent(&tail, xmin).ok_or(FitError::Degenerate)?;
    Ok(finish(FitParams::Powerlaw { exponent, xmin }, &tail, dropped))
}

/// Sup-norm distance between the empirical CDF of `samples` and `params`.
pub fn ks_statistic(samples: &[f64], params: &FitParams) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    ks_sorted(&xs, |x| params.cdf(x))
}

fn ks_sorted(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d.clamp(0.0, 1.0)
}

/// Asymptotic p-value of a one-sample KS statistic `d` on `n` samples for a
/// fully specified null (Kolmogorov distribution with Stephens' correction).
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let x = d * (sn + 0.12 + 0.11 / sn);
    if x < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XminChoice {
    pub xmin: f64,
    /// KS distance of the tail fit at the chosen cutoff.
    pub ks: f64,
    pub tail_count: usize,
    /// Set when the sample was too small to scan and the minimum was used.
    pub fallback: bool,
}

/// Chooses the power-law lower cutoff minimizing the KS distance of the
/// tail fit over candidate sample values. Samples smaller than
/// [`MIN_XMIN_SCAN`] fall back to the sample minimum.
pub fn choose_xmin(samples: &[f64]) -> Result<XminChoice, FitError> {
    let (mut xs, _) = positive(samples)?;
    if xs.is_empty() {
        return Err(FitError::InsufficientData {
            got: 0,
            needed: MIN_SAMPLES,
        });
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n < MIN_XMIN_SCAN {
        return Ok(XminChoice {
            xmin: xs[0],
            ks: f64::NAN,
            tail_count: n,
            fallback: true,
        });
    }
    // Suffix sums of ln x for O(1) exponent estimates per candidate.
    let mut suffix_ln = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix_ln[i] = suffix_ln[i + 1] + xs[i].ln();
    }
    let mut starts: Vec<usize> = (0..n)
        .filter(|&i| (i == 0 || xs[i] != xs[i - 1]) && n - i >= MIN_SAMPLES)
        .collect();
    if starts.len() > MAX_XMIN_CANDIDATES {
        let stride = starts.len() as f64 / MAX_XMIN_CANDIDATES as f64;
        starts = (0..MAX_XMIN_CANDIDATES)
            .map(|j| starts[(j as f64 * stride) as usize])
            .collect();
    }
    let mut best: Option<XminChoice> = None;
    for i in starts {
        let xmin = xs[i];
        let m = n - i;
        let s = suffix_ln[i] - m as f64 * xmin.ln();
        if s <= 0.0 {
            continue;
        }
        let exponent = 1.0 + m as f64 / s;
        let d = ks_sorted(&xs[i..], |x| 1.0 - (x / xmin).powf(1.0 - exponent));
        if best.is_none_or(|b| d < b.ks) {
            best = Some(XminChoice {
                xmin,
                ks: d,
                tail_count: m,
                fallback: false,
            });
        }
    }
    best.ok_or(FitError::Degenerate)
}

/// [`choose_xmin`] followed by [`fit_power_law`].
pub fn fit_power_law_tail(samples: &[f64]) -> Result<(DistributionFit, XminChoice), FitError> {
    let choice = choose_xmin(samples)?;
    Ok((fit_power_law(samples, choice.xmin)?, choice))
}
