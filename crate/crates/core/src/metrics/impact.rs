//! Market impact against volume participation, and cross-asset correlation.

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::series::IntervalAggregates;
use crate::stats;

pub const DEFAULT_BINS: usize = 10;
pub const DEFAULT_TAIL_QUANTILE: f64 = 0.99;
pub const MIN_FIT_BINS: usize = 3;

/// One interval's volume imbalance and mid move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticipationPoint {
    pub buy_volume: u64,
    pub sell_volume: u64,
    /// Mid at interval end minus mid at interval start, cents.
    pub mid_move: f64,
}

impl ParticipationPoint {
    /// `|V_buy - V_sell| / (V_buy + V_sell)`.
    pub fn participation(&self) -> f64 {
        self.buy_volume.abs_diff(self.sell_volume) as f64 / (self.buy_volume + self.sell_volume) as f64
    }

    /// Mid move signed by the direction of net flow.
    pub fn oriented_move(&self) -> f64 {
        match self.buy_volume.cmp(&self.sell_volume) {
            std::cmp::Ordering::Greater => self.mid_move,
            std::cmp::Ordering::Less => -self.mid_move,
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    /// 1-based bin: `P = i / n` falls in bin `i`; `P = 0` in bin 1.
    /// Computed in integers so boundaries are exact.
    pub fn bin(&self, n: usize) -> usize {
        let d = self.buy_volume.abs_diff(self.sell_volume) as u128;
        let total = (self.buy_volume + self.sell_volume) as u128;
        let i = (n as u128 * d).div_ceil(total) as usize;
        i.clamp(1, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipationSeries {
    pub points: Vec<ParticipationPoint>,
    pub skipped_zero_volume: usize,
    pub skipped_missing_mid: usize,
}

pub fn participation_series(agg: &IntervalAggregates) -> ParticipationSeries {
    let mut out = ParticipationSeries {
        points: Vec::new(),
        skipped_zero_volume: 0,
        skipped_missing_mid: 0,
    };
    for iv in &agg.intervals {
        if iv.buy_volume + iv.sell_volume == 0 {
            out.skipped_zero_volume += 1;
            continue;
        }
        let Some(mid_move) = iv.mid_move else {
            out.skipped_missing_mid += 1;
            continue;
        };
        out.points.push(ParticipationPoint {
            buy_volume: iv.buy_volume,
            sell_volume: iv.sell_volume,
            mid_move,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactBin {
    pub index: usize,
    pub members: usize,
    /// Average oriented mid move, cents.
    pub mean_move: Option<f64>,
    pub mean_participation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactCurve {
    pub bins: Vec<ImpactBin>,
    pub warnings: Vec<String>,
}

pub fn impact_curve(points: &[ParticipationPoint], n: usize) -> Result<ImpactCurve, MetricError> {
    if n < 2 {
        return Err(MetricError::Invalid("need at least 2 impact bins".into()));
    }
    let mut sums = vec![(0usize, 0.0f64, 0.0f64); n];
    for p in points {
        let s = &mut sums[p.bin(n) - 1];
        s.0 += 1;
        s.1 += p.oriented_move();
        s.2 += p.participation();
    }
    let bins: Vec<ImpactBin> = sums
        .into_iter()
        .enumerate()
        .map(|(i, (m, mv, pp))| ImpactBin {
            index: i + 1,
            members: m,
            mean_move: (m > 0).then(|| mv / m as f64),
            mean_participation: (m > 0).then(|| pp / m as f64),
        })
        .collect();
    let mut warnings = Vec::new();
    let nonempty = bins.iter().filter(|b| b.members > 0).count();
    if nonempty <= 1 && !points.is_empty() {
        warnings.push("all intervals fall in one participation bin".into());
    }
    if nonempty < n {
        warnings.push(format!("{} empty bins", n - nonempty));
    }
    Ok(ImpactCurve { bins, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactFit {
    pub alpha: f64,
    pub beta: f64,
    pub residual_norm: f64,
    pub bins_used: usize,
    /// Non-empty bins dropped for a non-positive mean move or participation.
    pub bins_excluded: usize,
}

/// `M_i ~ alpha * P_i^beta` by least squares in log-log space.
pub fn fit_impact(bins: &[ImpactBin]) -> Result<ImpactFit, MetricError> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut excluded = 0;
    for b in bins.iter().filter(|b| b.members > 0) {
        match (b.mean_participation, b.mean_move) {
            (Some(p), Some(m)) if p > 0.0 && m > 0.0 => {
                x.push(p.ln());
                y.push(m.ln());
            }
            _ => excluded += 1,
        }
    }
    if x.len() < MIN_FIT_BINS {
        return Err(MetricError::InsufficientData(format!(
            "{} usable impact bins, need {MIN_FIT_BINS}",
            x.len()
        )));
    }
    let fit = stats::ols(&x, &y)?;
    Ok(ImpactFit {
        alpha: fit.intercept.exp(),
        beta: fit.slope,
        residual_norm: fit.residual_norm,
        bins_used: x.len(),
        bins_excluded: excluded,
    })
}

/// Fraction of adjacent non-empty bin pairs whose mean move does not decrease.
pub fn monotone_fraction(bins: &[ImpactBin]) -> Option<f64> {
    let moves: Vec<f64> = bins.iter().filter_map(|b| b.mean_move).collect();
    if moves.len() < 2 {
        return None;
    }
    let up = moves.windows(2).filter(|w| w[1] >= w[0]).count();
    Some(up as f64 / (moves.len() - 1) as f64)
}

/// Pairwise Pearson correlation with an exact unit diagonal.
pub fn correlation_matrix(series: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, MetricError> {
    let n = series.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        stats::sample_variance(&series[i])?;
        m[i][i] = 1.0;
        for j in i + 1..n {
            let c = stats::pearson(&series[i], &series[j])?;
            m[i][j] = c;
            m[j][i] = c;
        }
    }
    Ok(m)
}

/// Correlation of the indicators `|r| > Q_q(|r|)` of two aligned series.
pub fn tail_correlation(a: &[f64], b: &[f64], q: f64) -> Result<f64, MetricError> {
    let exceed = |xs: &[f64]| -> Result<Vec<f64>, MetricError> {
        let abs: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
        let threshold = stats::quantile(&abs, q)?;
        Ok(abs.iter().map(|&x| if x > threshold { 1.0 } else { 0.0 }).collect())
    };
    Ok(stats::pearson(&exceed(a)?, &exceed(b)?)?)
}
