//! Stylized facts of return distributions.

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::series::{log_returns, IntervalAggregates, SampledSeries};
use crate::stats::{self, LinearFit, Moments};
use crate::types::Nanos;

/// Reference band for the long-memory exponent of absolute returns.
pub const LONG_RANGE_BAND: [f64; 2] = [0.2, 0.4];
/// Minimum returns per scale before moments are considered reliable.
pub const MIN_SCALE_RETURNS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AcfTransform {
    Raw,
    Squared,
    Absolute,
}

impl AcfTransform {
    fn apply(self, x: f64) -> f64 {
        match self {
            AcfTransform::Raw => x,
            AcfTransform::Squared => x * x,
            AcfTransform::Absolute => x.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfCurve {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub transform: AcfTransform,
}

pub fn autocorrelation(xs: &[f64], lag: usize) -> Result<f64, MetricError> {
    Ok(stats::autocorrelation(xs, lag)?)
}

pub fn acf_curve(returns: &[f64], lags: &[usize], transform: AcfTransform) -> Result<AcfCurve, MetricError> {
    let xs: Vec<f64> = returns.iter().map(|&r| transform.apply(r)).collect();
    Ok(AcfCurve {
        lags: lags.to_vec(),
        values: stats::acf(&xs, lags)?,
        transform,
    })
}

/// Lag-1 autocorrelation inside consecutive windows of `window` returns.
/// Windows whose correlation is undefined (constant, too short) are skipped
/// and counted.
pub fn windowed_autocorrelation(returns: &[Option<f64>], window: usize, lag: usize) -> (Vec<f64>, usize) {
    let mut out = Vec::new();
    let mut skipped = 0;
    for chunk in returns.chunks_exact(window.max(1)) {
        let xs: Vec<f64> = chunk.iter().flatten().copied().collect();
        match stats::autocorrelation(&xs, lag) {
            Ok(c) => out.push(c),
            Err(_) => skipped += 1,
        }
    }
    (out, skipped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleMoments {
    pub scale: Nanos,
    pub moments: Moments,
    /// Fewer than [`MIN_SCALE_RETURNS`] returns entered the estimate.
    pub below_minimum: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsByScale {
    pub scales: Vec<ScaleMoments>,
}

impl MomentsByScale {
    /// Every scale shows non-zero volatility.
    pub fn intermittent(&self) -> bool {
        self.scales.iter().all(|s| s.moments.std > 0.0)
    }
}

/// Volatility, skewness and raw kurtosis of returns at multiples of the base
/// grid step. Coarser grids are subsamples of the base grid, so coarse
/// returns are exact sums of fine ones.
pub fn moments_by_scale(mids: &SampledSeries, factors: &[usize]) -> Result<MomentsByScale, MetricError> {
    let mut scales = Vec::with_capacity(factors.len());
    for &k in factors {
        if k == 0 {
            return Err(MetricError::Invalid("scale factor must be positive".into()));
        }
        let coarse = SampledSeries {
            start: mids.start,
            stop: mids.stop,
            step: mids.step * k as Nanos,
            values: mids.values.iter().step_by(k).copied().collect(),
        };
        let r = log_returns(&coarse)?.defined();
        let moments = stats::moments(&r)?;
        scales.push(ScaleMoments {
            scale: coarse.step,
            below_minimum: r.len() < MIN_SCALE_RETURNS,
            moments,
        });
    }
    Ok(MomentsByScale { scales })
}

pub fn volatility_clustering(returns: &[f64], lags: &[usize]) -> Result<AcfCurve, MetricError> {
    acf_curve(returns, lags, AcfTransform::Squared)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRangeDependence {
    pub beta: f64,
    pub fit: LinearFit,
    pub curve: AcfCurve,
}

/// Fits `f(tau) ~ tau^-beta` by least squares in log-log space.
pub fn power_law_decay(lags: &[usize], values: &[f64]) -> Result<(f64, LinearFit), MetricError> {
    if values.iter().any(|&v| v <= 0.0) || lags.contains(&0) {
        return Err(MetricError::NotApplicable(
            "autocorrelation not positive at every lag".into(),
        ));
    }
    let x: Vec<f64> = lags.iter().map(|&l| (l as f64).ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let fit = stats::ols(&x, &y)?;
    Ok((-fit.slope, fit))
}

/// Power-law decay exponent of the absolute-return autocorrelation.
pub fn long_range_dependence(returns: &[f64], lags: &[usize]) -> Result<LongRangeDependence, MetricError> {
    let curve = acf_curve(returns, lags, AcfTransform::Absolute)?;
    let (beta, fit) = power_law_decay(&curve.lags, &curve.values)?;
    Ok(LongRangeDependence { beta, fit, curve })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeVolatility {
    pub alpha: f64,
    pub beta: f64,
    pub corr: f64,
    pub intervals: usize,
}

pub const MIN_INTERVALS: usize = 30;

/// Regression of per-interval volume on per-interval volatility.
pub fn volume_volatility_relation(agg: &IntervalAggregates) -> Result<VolumeVolatility, MetricError> {
    let (vol, volume): (Vec<f64>, Vec<f64>) = agg
        .intervals
        .iter()
        .filter_map(|iv| iv.volatility.map(|s| (s, iv.volume as f64)))
        .unzip();
    volume_volatility_pairs(&vol, &volume)
}

pub fn volume_volatility_pairs(volatility: &[f64], volume: &[f64]) -> Result<VolumeVolatility, MetricError> {
    if volatility.len() < MIN_INTERVALS {
        return Err(MetricError::InsufficientData(format!(
            "{} intervals with defined volatility, need {MIN_INTERVALS}",
            volatility.len()
        )));
    }
    let fit = stats::ols(volatility, volume)?;
    Ok(VolumeVolatility {
        alpha: fit.intercept,
        beta: fit.slope,
        corr: stats::pearson(volatility, volume)?,
        intervals: volatility.len(),
    })
}

/// Correlation of per-interval return and per-interval volatility.
pub fn returns_volatility_correlation(agg: &IntervalAggregates) -> Result<f64, MetricError> {
    let (r, v): (Vec<f64>, Vec<f64>) = agg
        .intervals
        .iter()
        .filter_map(|iv| iv.ret.zip(iv.volatility))
        .unzip();
    Ok(stats::pearson(&r, &v)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Asymmetry {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub mean: f64,
}

/// `A(tau) = corr(coarse[t], fine[t + tau]) - corr(fine[t], coarse[t + tau])`.
pub fn asymmetry_curve(coarse: &[f64], fine: &[f64], lags: &[usize]) -> Result<Asymmetry, MetricError> {
    if coarse.len() != fine.len() {
        return Err(stats::StatsError::LengthMismatch(coarse.len(), fine.len()).into());
    }
    let n = coarse.len();
    let values = lags
        .iter()
        .map(|&l| {
            if l + 3 > n {
                return Err(MetricError::InsufficientData(format!("lag {l} on {n} blocks")));
            }
            let forward = stats::pearson(&coarse[..n - l], &fine[l..])?;
            let backward = stats::pearson(&fine[..n - l], &coarse[l..])?;
            Ok(forward - backward)
        })
        .collect::<Result<Vec<_>, MetricError>>()?;
    let mean = stats::mean(&values)?;
    Ok(Asymmetry {
        lags: lags.to_vec(),
        values,
        mean,
    })
}

/// Coarse versus fine volatility over blocks of `coarse` returns: coarse
/// volatility is the absolute block return, fine volatility the sum of
/// absolute returns over sub-blocks of `fine` returns. Lags count blocks.
pub fn volatility_flow_asymmetry(
    returns: &[f64],
    coarse: usize,
    fine: usize,
    lags: &[usize],
) -> Result<Asymmetry, MetricError> {
    if coarse == 0 || fine == 0 || !coarse.is_multiple_of(fine) {
        return Err(MetricError::Invalid("coarse scale must be a positive multiple of the fine scale".into()));
    }
    let (c, f): (Vec<f64>, Vec<f64>) = returns
        .chunks_exact(coarse)
        .map(|block| {
            let c = block.iter().sum::<f64>().abs();
            let f: f64 = block.chunks_exact(fine).map(|s| s.iter().sum::<f64>().abs()).sum();
            (c, f)
        })
        .unzip();
    asymmetry_curve(&c, &f, lags)
}

/// Bin width for histograms of per-window correlations.
pub const CORR_BIN_WIDTH: f64 = 0.05;

pub fn correlation_histogram(values: &[f64]) -> stats::Histogram {
    stats::histogram(values, -1.0, 1.0, CORR_BIN_WIDTH)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, StudentT};

    fn normal(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    fn mids_from_returns(rs: &[f64]) -> SampledSeries {
        let mut m = 10_000.0f64;
        let mut values = vec![Some(m)];
        for r in rs {
            m *= r.exp();
            values.push(Some(m));
        }
        SampledSeries {
            start: 0,
            stop: values.len() as Nanos,
            step: 1,
            values,
        }
    }

    #[test]
    fn iid_noise_has_small_lag_one_acf() {
        let xs = normal(100_000, 1);
        assert!(autocorrelation(&xs, 1).unwrap().abs() < 0.01);
        let sq = volatility_clustering(&xs, &[1, 5, 10]).unwrap();
        assert!(sq.values.iter().all(|v| v.abs() < 0.02), "{sq:?}");
    }

    #[test]
    fn gaussian_and_student_kurtosis() {
        let g = normal(100_000, 2);
        let m = moments_by_scale(&mids_from_returns(&g.iter().map(|x| x * 1e-3).collect::<Vec<_>>()), &[1]).unwrap();
        assert!((m.scales[0].moments.kurtosis - 3.0).abs() < 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = StudentT::new(3.0).unwrap();
        let ts: Vec<f64> = (0..100_000).map(|_| t.sample(&mut rng) * 1e-3).collect();
        let m = moments_by_scale(&mids_from_returns(&ts), &[1, 10]).unwrap();
        assert!(m.scales[0].moments.kurtosis > 5.0);
        assert!(m.intermittent());
        assert_eq!(m.scales[1].scale, 10);
    }

    #[test]
    fn regime_switching_volatility_clusters() {
        let base = normal(20_000, 4);
        let xs: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(i, x)| if (i / 100) % 2 == 0 { x * 0.2 } else { x * 3.0 })
            .collect();
        let c = volatility_clustering(&xs, &[1, 50]).unwrap();
        assert!(c.values[0] > c.values[1] && c.values[1] > 0.0, "{c:?}");
        assert!(volatility_clustering(&[0.5; 100], &[1]).is_err());
    }

    #[test]
    fn exact_power_law_decay() {
        let lags: Vec<usize> = (1..=20).collect();
        let values: Vec<f64> = lags.iter().map(|&l| (l as f64).powf(-0.3)).collect();
        let (beta, fit) = power_law_decay(&lags, &values).unwrap();
        assert!((beta - 0.3).abs() < 1e-6);
        assert!(fit.residual_norm < 1e-9);
    }

    #[test]
    fn iid_returns_are_not_long_range() {
        let xs = normal(2_000, 5);
        let lags: Vec<usize> = (1..=50).collect();
        assert!(matches!(
            long_range_dependence(&xs, &lags),
            Err(MetricError::NotApplicable(_))
        ));
    }

    #[test]
    fn exact_volume_volatility_line() {
        let vol: Vec<f64> = (0..40).map(|i| 0.001 * (i as f64 + 1.0)).collect();
        let volume: Vec<f64> = vol.iter().map(|s| 2.0 + 5.0 * s).collect();
        let r = volume_volatility_pairs(&vol, &volume).unwrap();
        assert!((r.alpha - 2.0).abs() < 1e-9 && (r.beta - 5.0).abs() < 1e-9);
        assert!((r.corr - 1.0).abs() < 1e-12);
        assert!(volume_volatility_pairs(&[0.1; 40], &volume).is_err());
        assert!(volume_volatility_pairs(&vol[..10], &volume[..10]).is_err());
    }

    #[test]
    fn shuffled_pairing_is_uncorrelated() {
        use rand::seq::SliceRandom;
        let vol: Vec<f64> = normal(1_000, 6).iter().map(|x| x.abs()).collect();
        let mut volume: Vec<f64> = vol.iter().map(|s| 2.0 + 5.0 * s).collect();
        volume.shuffle(&mut ChaCha8Rng::seed_from_u64(7));
        assert!(volume_volatility_pairs(&vol, &volume).unwrap().corr.abs() < 0.1);
    }

    #[test]
    fn asymmetry_detects_lead() {
        let lead: Vec<f64> = normal(5_000, 8).iter().map(|x| x.abs()).collect();
        let noise = normal(5_000, 9);
        // Fine volatility follows coarse volatility three blocks later.
        let fine: Vec<f64> = (0..5_000)
            .map(|t| if t >= 3 { lead[t - 3] } else { 0.0 } + 0.1 * noise[t].abs())
            .collect();
        let a = asymmetry_curve(&lead, &fine, &[0, 1, 3]).unwrap();
        assert_eq!(a.values[0], 0.0);
        assert!(a.values[2] > 0.5, "{a:?}");
        assert!(a.values[1].abs() < 0.1);

        let iid = normal(50_000, 10);
        let a = volatility_flow_asymmetry(&iid, 10, 1, &[1, 2, 3]).unwrap();
        assert!(a.values.iter().all(|v| v.abs() < 0.05), "{a:?}");
    }

    #[test]
    fn windowed_acf_skips_flat_windows() {
        let mut r: Vec<Option<f64>> = (0..60).map(|i| Some(if i % 2 == 0 { 1.0 } else { -1.0 })).collect();
        r.extend(std::iter::repeat_n(Some(0.0), 30));
        let (vals, skipped) = windowed_autocorrelation(&r, 30, 1);
        assert_eq!(skipped, 1);
        assert_eq!(vals.len(), 2);
        assert!(vals.iter().all(|v| (v + 1.0).abs() < 1e-12));
        let h = correlation_histogram(&vals);
        assert_eq!(h.counts.len(), 40);
        assert_eq!(h.counts[0], 2);
    }

    #[test]
    fn anti_monotone_returns_volatility() {
        use crate::series::Interval;
        let intervals = (0..10)
            .map(|i| Interval {
                ret: Some(i as f64),
                volatility: Some(10.0 - i as f64),
                ..Default::default()
            })
            .collect();
        let agg = IntervalAggregates {
            tau: 1,
            step: 1,
            intervals,
        };
        assert!(returns_volatility_correlation(&agg).unwrap() < 0.0);
    }
}
