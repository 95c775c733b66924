//! Time series derived from an event trace: sampled mids, log returns and
//! per-interval aggregates.
//!
//! Sampling is last-observation-carried-forward on a regular grid
//! `start + k * step` for `k < floor((stop - start) / step)`. Volatility is
//! the plain sample standard deviation of log returns (not annualized).

use thiserror::Error;

use crate::ingest::{EventTrace, EventType};
use crate::replay::QuoteTimeline;
use crate::stats;
use crate::types::{Nanos, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("empty window or zero step")]
    EmptyGrid,
    #[error("non-positive mid price at sample {0}")]
    NonPositive(usize),
    #[error("interval length must be at least 10 return steps")]
    IntervalTooShort,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledSeries {
    pub start: Nanos,
    pub stop: Nanos,
    pub step: Nanos,
    /// `None` where no value had been observed yet.
    pub values: Vec<Option<f64>>,
}

impl SampledSeries {
    pub fn time(&self, k: usize) -> Nanos {
        self.start + k as Nanos * self.step
    }

    pub fn defined(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

fn grid_len(start: Nanos, stop: Nanos, step: Nanos) -> Result<usize, SeriesError> {
    if step == 0 || stop <= start {
        return Err(SeriesError::EmptyGrid);
    }
    Ok(((stop - start) / step) as usize)
}

/// Samples any quote-derived quantity on the grid.
pub fn sample_with(
    timeline: &QuoteTimeline,
    start: Nanos,
    stop: Nanos,
    step: Nanos,
    f: impl Fn(&crate::lob::Quotes) -> Option<f64>,
) -> Result<SampledSeries, SeriesError> {
    let n = grid_len(start, stop, step)?;
    let values = (0..n)
        .map(|k| timeline.at(start + k as Nanos * step).and_then(|q| f(&q)))
        .collect();
    Ok(SampledSeries {
        start,
        stop,
        step,
        values,
    })
}

pub fn sample_mid_timeline(
    timeline: &QuoteTimeline,
    start: Nanos,
    stop: Nanos,
    step: Nanos,
) -> Result<SampledSeries, SeriesError> {
    sample_with(timeline, start, stop, step, |q| q.mid().map(|m| m.cents()))
}

/// Mid-price in cents sampled on the grid.
pub fn sample_mid(trace: &EventTrace, start: Nanos, stop: Nanos, step: Nanos) -> Result<SampledSeries, SeriesError> {
    let (timeline, _) = QuoteTimeline::from_trace(trace);
    sample_mid_timeline(&timeline, start, stop, step)
}

/// Log returns aligned with the grid: `values[k]` spans `t_k .. t_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub start: Nanos,
    pub step: Nanos,
    pub values: Vec<Option<f64>>,
}

impl ReturnSeries {
    pub fn defined(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }
}

pub fn log_returns(series: &SampledSeries) -> Result<ReturnSeries, SeriesError> {
    let logs = series
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| match *v {
            Some(m) if m > 0.0 => Ok(Some(m.ln())),
            Some(_) => Err(SeriesError::NonPositive(k)),
            None => Ok(None),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let values = logs
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        })
        .collect();
    Ok(ReturnSeries {
        start: series.start,
        step: series.step,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Interval {
    pub start: Nanos,
    pub end: Nanos,
    /// Total executed size.
    pub volume: u64,
    /// Executed size where the aggressor bought.
    pub buy_volume: u64,
    pub sell_volume: u64,
    pub trades: usize,
    /// Sample standard deviation of the step returns inside the interval.
    pub volatility: Option<f64>,
    /// Log return from interval start to end.
    pub ret: Option<f64>,
    /// Mid move in cents, end minus start.
    pub mid_move: Option<f64>,
    pub mean_spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalAggregates {
    pub tau: Nanos,
    pub step: Nanos,
    pub intervals: Vec<Interval>,
}

/// Non-overlapping intervals of length `tau` with volumes and step-`step`
/// return volatility.
pub fn interval_aggregates(
    trace: &EventTrace,
    start: Nanos,
    stop: Nanos,
    tau: Nanos,
    step: Nanos,
) -> Result<IntervalAggregates, SeriesError> {
    let (timeline, _) = QuoteTimeline::from_trace(trace);
    interval_aggregates_with(trace, &timeline, start, stop, tau, step)
}

pub fn interval_aggregates_with(
    trace: &EventTrace,
    timeline: &QuoteTimeline,
    start: Nanos,
    stop: Nanos,
    tau: Nanos,
    step: Nanos,
) -> Result<IntervalAggregates, SeriesError> {
    if step == 0 || tau < 10 * step {
        return Err(SeriesError::IntervalTooShort);
    }
    let n = grid_len(start, stop, tau)?;
    let mids = sample_mid_timeline(timeline, start, stop, step)?;
    let returns = log_returns(&mids)?;
    let spreads = sample_with(timeline, start, stop, step, |q| q.spread().map(|s| s as f64))?;
    let mid_at = |t: Nanos| timeline.at(t).and_then(|q| q.mid()).map(|m| m.cents());

    let mut intervals: Vec<Interval> = (0..n)
        .map(|j| {
            let s = start + j as Nanos * tau;
            let e = s + tau;
            let in_interval = |k: usize| {
                let t = returns.start + k as Nanos * step;
                t >= s && t + step <= e
            };
            let rets: Vec<f64> = returns
                .values
                .iter()
                .enumerate()
                .filter(|(k, _)| in_interval(*k))
                .filter_map(|(_, r)| *r)
                .collect();
            let sp: Vec<f64> = spreads
                .values
                .iter()
                .enumerate()
                .filter(|(k, _)| {
                    let t = spreads.start + *k as Nanos * step;
                    t >= s && t < e
                })
                .filter_map(|(_, v)| *v)
                .collect();
            let (m0, m1) = (mid_at(s), mid_at(e));
            Interval {
                start: s,
                end: e,
                volatility: stats::sample_std(&rets).ok(),
                ret: match (m0, m1) {
                    (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some(b.ln() - a.ln()),
                    _ => None,
                },
                mid_move: m0.zip(m1).map(|(a, b)| b - a),
                mean_spread: stats::mean(&sp).ok(),
                ..Default::default()
            }
        })
        .collect();

    let window_end = start + n as Nanos * tau;
    for ev in &trace.events {
        if ev.event_type != EventType::Execute || ev.timestamp_ns < start || ev.timestamp_ns >= window_end {
            continue;
        }
        let iv = &mut intervals[((ev.timestamp_ns - start) / tau) as usize];
        iv.volume += ev.size;
        iv.trades += 1;
        // The row carries the resting side; the aggressor is opposite.
        match ev.side {
            Some(Side::Sell) => iv.buy_volume += ev.size,
            Some(Side::Buy) => iv.sell_volume += ev.size,
            None => {}
        }
    }
    Ok(IntervalAggregates {
        tau,
        step,
        intervals,
    })
}
