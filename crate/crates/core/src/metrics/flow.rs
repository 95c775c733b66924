//! Order-flow, volume and intraday stylized facts.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::distfit::{self, DistributionFit, Family, FitError, XminChoice};
use crate::ingest::{EventTrace, EventType};
use crate::replay::{QuoteTimeline, Replay};
use crate::series::{sample_with, IntervalAggregates};
use crate::stats;
use crate::types::{Nanos, OrderId, Side};

pub const LIMIT_SIZE_REFERENCE: [f64; 2] = [2.0, 2.0];
pub const MARKET_SIZE_REFERENCE: [f64; 2] = [2.3, 2.7];
pub const RELATIVE_PRICE_REFERENCE: [f64; 2] = [1.6, 1.6];
pub const LIFETIME_REFERENCE: [f64; 2] = [1.3, 1.6];
/// Stand-in for zero interarrival gaps, in nanoseconds.
pub const ZERO_GAP_NS: f64 = 0.5;
pub const MIN_WINDOWS: usize = 30;

fn fit_or_err(samples: &[f64], family: Family) -> Result<DistributionFit, FitError> {
    distfit::fit(samples, family)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderCounts {
    pub window: Nanos,
    pub counts: Vec<f64>,
    pub gamma: Result<DistributionFit, FitError>,
    pub lognormal: Result<DistributionFit, FitError>,
    pub exponential: Result<DistributionFit, FitError>,
}

/// New limit orders per non-overlapping window in `[start, stop)`.
pub fn order_count_distribution(
    trace: &EventTrace,
    start: Nanos,
    stop: Nanos,
    window: Nanos,
) -> Result<OrderCounts, MetricError> {
    if trace.count(EventType::SubmitLimit) == 0 {
        return Err(MetricError::InsufficientData("no limit orders in trace".into()));
    }
    if window == 0 || stop <= start {
        return Err(MetricError::Invalid("empty counting window".into()));
    }
    let n = ((stop - start) / window).max(1) as usize;
    let mut counts = vec![0.0; n];
    for ev in &trace.events {
        if ev.event_type == EventType::SubmitLimit && ev.timestamp_ns >= start {
            let k = ((ev.timestamp_ns - start) / window) as usize;
            if k < n {
                counts[k] += 1.0;
            }
        }
    }
    let fits = |family| {
        if n < MIN_WINDOWS {
            Err(FitError::InsufficientData {
                got: n,
                needed: MIN_WINDOWS,
            })
        } else {
            fit_or_err(&counts, family)
        }
    };
    Ok(OrderCounts {
        window,
        gamma: fits(Family::Gamma),
        lognormal: fits(Family::Lognormal),
        exponential: fits(Family::Exponential),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interarrivals {
    /// Raw gaps between successive new orders.
    pub gaps_ns: Vec<Nanos>,
    pub zero_gaps: usize,
    pub exponential: Result<DistributionFit, FitError>,
    pub lognormal: Result<DistributionFit, FitError>,
    pub weibull: Result<DistributionFit, FitError>,
}

impl Interarrivals {
    /// Gaps as fitted: zeros replaced by [`ZERO_GAP_NS`].
    pub fn fitted_samples(&self) -> Vec<f64> {
        adjusted_gaps(&self.gaps_ns)
    }

    /// Weibull shape below one: mass piled up near zero.
    pub fn weibull_shape_below_one(&self) -> Option<bool> {
        self.weibull.as_ref().ok().map(|f| f.params.headline().1 < 1.0)
    }
}

fn adjusted_gaps(gaps: &[Nanos]) -> Vec<f64> {
    gaps.iter()
        .map(|&g| if g == 0 { ZERO_GAP_NS } else { g as f64 })
        .collect()
}

/// Gaps between successive new-order submissions (limit and market).
pub fn interarrival_distribution(trace: &EventTrace) -> Result<Interarrivals, MetricError> {
    let times: Vec<Nanos> = trace
        .events
        .iter()
        .filter(|e| e.event_type.is_submit())
        .map(|e| e.timestamp_ns)
        .collect();
    if times.len() < 2 {
        return Err(MetricError::InsufficientData(format!("{} submissions", times.len())));
    }
    let gaps_ns: Vec<Nanos> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let samples = adjusted_gaps(&gaps_ns);
    Ok(Interarrivals {
        zero_gaps: gaps_ns.iter().filter(|&&g| g == 0).count(),
        exponential: fit_or_err(&samples, Family::Exponential),
        lognormal: fit_or_err(&samples, Family::Lognormal),
        weibull: fit_or_err(&samples, Family::Weibull),
        gaps_ns,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum OrderKind {
    Limit,
    Market,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub samples: Vec<f64>,
    pub fit: DistributionFit,
    pub xmin: XminChoice,
    pub reference: [f64; 2],
}

fn tail_fit(samples: Vec<f64>, reference: [f64; 2]) -> Result<TailFit, MetricError> {
    let (fit, xmin) = distfit::fit_power_law_tail(&samples)?;
    Ok(TailFit {
        samples,
        fit,
        xmin,
        reference,
    })
}

/// The `k` most frequent values with their counts, most frequent first
/// (ties by value). Shows clustering on round sizes.
pub fn modal_values(samples: &[f64], k: usize) -> Vec<(f64, usize)> {
    let mut counts: std::collections::BTreeMap<u64, usize> = std::collections::BTreeMap::new();
    for x in samples {
        *counts.entry(x.to_bits()).or_default() += 1;
    }
    let mut modes: Vec<(f64, usize)> = counts.into_iter().map(|(b, c)| (f64::from_bits(b), c)).collect();
    modes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.total_cmp(&b.0)));
    modes.truncate(k);
    modes
}

/// Power-law tail of submitted order sizes.
pub fn order_size_distribution(trace: &EventTrace, kind: OrderKind) -> Result<TailFit, MetricError> {
    let (event_type, reference) = match kind {
        OrderKind::Limit => (EventType::SubmitLimit, LIMIT_SIZE_REFERENCE),
        OrderKind::Market => (EventType::SubmitMarket, MARKET_SIZE_REFERENCE),
    };
    let sizes: Vec<f64> = trace
        .events
        .iter()
        .filter(|e| e.event_type == event_type)
        .map(|e| e.size as f64)
        .collect();
    tail_fit(sizes, reference)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativePrices {
    /// Signed distance behind the same-side quote: `b - p` for buys,
    /// `p - a` for sells. Negative values improve on the quote.
    pub deltas: Vec<f64>,
    /// Submissions with no same-side quote to measure against.
    pub skipped: usize,
    pub tail: Result<TailFit, MetricError>,
}

/// Relative limit prices against the quote prevailing at submission.
pub fn relative_price_distribution(trace: &EventTrace) -> RelativePrices {
    let mut replay = Replay::new();
    let mut deltas = Vec::new();
    let mut skipped = 0;
    for ev in &trace.events {
        if ev.event_type == EventType::SubmitLimit {
            let q = replay.quotes();
            let delta = match ev.side {
                Some(Side::Buy) => q.bid.map(|(b, _)| b - ev.price_cents),
                Some(Side::Sell) => q.ask.map(|(a, _)| ev.price_cents - a),
                None => None,
            };
            match delta {
                Some(d) => deltas.push(d as f64),
                None => skipped += 1,
            }
        }
        replay.apply(ev);
    }
    let positive: Vec<f64> = deltas.iter().copied().filter(|&d| d > 0.0).collect();
    let tail = if positive.is_empty() {
        Err(MetricError::NotApplicable("no order placed behind the quote".into()))
    } else {
        tail_fit(positive, RELATIVE_PRICE_REFERENCE)
    };
    RelativePrices { deltas, skipped, tail }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LifetimeKind {
    Cancelled,
    FirstFill,
    Completion,
}

impl LifetimeKind {
    pub const ALL: [LifetimeKind; 3] = [LifetimeKind::Cancelled, LifetimeKind::FirstFill, LifetimeKind::Completion];

    pub fn id(self) -> &'static str {
        match self {
            LifetimeKind::Cancelled => "cancelled",
            LifetimeKind::FirstFill => "first_fill",
            LifetimeKind::Completion => "completion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifetimeSample {
    pub order_id: OrderId,
    pub lifetime_ns: Nanos,
    pub kind: LifetimeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lifetimes {
    pub samples: Vec<LifetimeSample>,
    pub limit_orders: usize,
    pub open_at_close: usize,
}

impl Lifetimes {
    pub fn of_kind(&self, kind: LifetimeKind) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| s.kind == kind)
            .map(|s| s.lifetime_ns as f64)
            .collect()
    }

    pub fn count(&self, kind: LifetimeKind) -> usize {
        self.samples.iter().filter(|s| s.kind == kind).count()
    }

    /// Power-law tail of one lifetime kind; zero lifetimes are dropped.
    pub fn fit(&self, kind: LifetimeKind) -> Result<TailFit, MetricError> {
        tail_fit(self.of_kind(kind), LIFETIME_REFERENCE)
    }
}

struct Live {
    submitted: Nanos,
    remaining: u64,
    first_fill: bool,
}

/// Cancellation, first-fill and completion times of every limit order.
///
/// Executions against an aggressor are attributed to the most recent
/// submission (the trace lists them right after it), at lifetime zero.
pub fn lifetime_distributions(trace: &EventTrace) -> Lifetimes {
    let mut live: HashMap<OrderId, Live> = HashMap::new();
    let mut samples = Vec::new();
    let mut limit_orders = 0;
    let mut aggressor: Option<OrderId> = None;
    let fill = |live: &mut HashMap<OrderId, Live>, samples: &mut Vec<LifetimeSample>, id: OrderId, size: u64, t: Nanos| {
        let Some(o) = live.get_mut(&id) else { return };
        let lifetime_ns = t.saturating_sub(o.submitted);
        if !o.first_fill {
            o.first_fill = true;
            samples.push(LifetimeSample {
                order_id: id,
                lifetime_ns,
                kind: LifetimeKind::FirstFill,
            });
        }
        o.remaining = o.remaining.saturating_sub(size);
        if o.remaining == 0 {
            live.remove(&id);
            samples.push(LifetimeSample {
                order_id: id,
                lifetime_ns,
                kind: LifetimeKind::Completion,
            });
        }
    };
    for ev in &trace.events {
        match ev.event_type {
            EventType::SubmitLimit => {
                limit_orders += 1;
                live.insert(
                    ev.order_id,
                    Live {
                        submitted: ev.timestamp_ns,
                        remaining: ev.size,
                        first_fill: false,
                    },
                );
                aggressor = Some(ev.order_id);
            }
            EventType::SubmitMarket => aggressor = Some(ev.order_id),
            EventType::Execute => {
                fill(&mut live, &mut samples, ev.order_id, ev.size, ev.timestamp_ns);
                if let Some(a) = aggressor {
                    fill(&mut live, &mut samples, a, ev.size, ev.timestamp_ns);
                }
            }
            EventType::Cancel => {
                aggressor = None;
                if let Some(o) = live.get_mut(&ev.order_id) {
                    o.remaining = o.remaining.saturating_sub(ev.size);
                    if o.remaining == 0 {
                        let o = live.remove(&ev.order_id).expect("present");
                        samples.push(LifetimeSample {
                            order_id: ev.order_id,
                            lifetime_ns: ev.timestamp_ns.saturating_sub(o.submitted),
                            kind: LifetimeKind::Cancelled,
                        });
                    }
                }
            }
            EventType::SessionOpen | EventType::SessionClose => aggressor = None,
        }
    }
    Lifetimes {
        samples,
        limit_orders,
        open_at_close: live.len(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestVolumes {
    pub bid: Vec<f64>,
    pub ask: Vec<f64>,
    /// Grid points where the side was empty or not yet quoted.
    pub bid_excluded: usize,
    pub ask_excluded: usize,
    pub bid_fit: Result<DistributionFit, FitError>,
    pub ask_fit: Result<DistributionFit, FitError>,
}

/// Gamma fits of best bid and ask volumes sampled on a regular grid.
pub fn best_volume_distribution(
    timeline: &QuoteTimeline,
    start: Nanos,
    stop: Nanos,
    step: Nanos,
) -> Result<BestVolumes, MetricError> {
    let bid = sample_with(timeline, start, stop, step, |q| q.bid.map(|(_, v)| v as f64))?;
    let ask = sample_with(timeline, start, stop, step, |q| q.ask.map(|(_, v)| v as f64))?;
    let (bid_excluded, ask_excluded) = (bid.missing(), ask.missing());
    let (bid, ask) = (bid.defined(), ask.defined());
    Ok(BestVolumes {
        bid_fit: fit_or_err(&bid, Family::Gamma),
        ask_fit: fit_or_err(&ask, Family::Gamma),
        bid,
        ask,
        bid_excluded,
        ask_excluded,
    })
}

/// Autocorrelation of the signs (+1 buy, -1 sell) of successive new orders.
pub fn order_flow_autocorrelation(trace: &EventTrace, max_lag: usize) -> Result<super::returns::AcfCurve, MetricError> {
    let signs: Vec<f64> = trace
        .events
        .iter()
        .filter(|e| e.event_type.is_submit())
        .filter_map(|e| e.side.map(|s| s.sign() as f64))
        .collect();
    let lags: Vec<usize> = (1..=max_lag).collect();
    Ok(super::returns::AcfCurve {
        values: stats::acf(&signs, &lags)?,
        lags,
        transform: super::returns::AcfTransform::Raw,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntradayProfile {
    pub bin_starts: Vec<Nanos>,
    /// Bin centres as a fraction of the session, in (0, 1).
    pub centers: Vec<f64>,
    pub volumes: Vec<f64>,
    pub degree: usize,
    /// Lowest order first.
    pub coefficients: Vec<f64>,
    /// Leading coefficient of the quadratic fit.
    pub quadratic_leading: f64,
    pub u_shape: bool,
}

/// Quadratic U-shape test on `(x, y)`: positive curvature with the vertex
/// inside the session.
pub fn u_shape_verdict(quadratic: &[f64]) -> bool {
    let (b, a) = (quadratic[1], quadratic[2]);
    if a <= 0.0 {
        return false;
    }
    let vertex = -b / (2.0 * a);
    vertex > 0.0 && vertex < 1.0
}

pub fn fit_profile(centers: &[f64], volumes: &[f64], degree: usize) -> Result<(Vec<f64>, Vec<f64>, bool), MetricError> {
    let coefficients = stats::polyfit(centers, volumes, degree)?;
    let quadratic = if degree == 2 {
        coefficients.clone()
    } else {
        stats::polyfit(centers, volumes, 2)?
    };
    let u = u_shape_verdict(&quadratic);
    Ok((coefficients, quadratic, u))
}

/// Traded volume in `bins` equal slices of the session with a polynomial
/// fit against the fractional bin centre.
pub fn intraday_profile(
    trace: &EventTrace,
    start: Nanos,
    stop: Nanos,
    bins: usize,
    degree: usize,
) -> Result<IntradayProfile, MetricError> {
    if bins == 0 || stop <= start {
        return Err(MetricError::Invalid("empty intraday grid".into()));
    }
    let len = stop - start;
    let bin_starts: Vec<Nanos> = (0..bins).map(|i| start + (len as u128 * i as u128 / bins as u128) as Nanos).collect();
    let mut volumes = vec![0.0; bins];
    for ev in &trace.events {
        if ev.event_type == EventType::Execute && ev.timestamp_ns >= start && ev.timestamp_ns < stop {
            let i = bin_starts.partition_point(|&s| s <= ev.timestamp_ns) - 1;
            volumes[i] += ev.size as f64;
        }
    }
    let centers: Vec<f64> = (0..bins).map(|i| (i as f64 + 0.5) / bins as f64).collect();
    let (coefficients, quadratic, u_shape) = fit_profile(&centers, &volumes, degree)?;
    Ok(IntradayProfile {
        bin_starts,
        centers,
        volumes,
        degree,
        coefficients,
        quadratic_leading: quadratic[2],
        u_shape,
    })
}

/// Correlation of per-interval volume and mean spread.
pub fn volume_spread_correlation(agg: &IntervalAggregates) -> Result<f64, MetricError> {
    let (v, s): (Vec<f64>, Vec<f64>) = agg
        .intervals
        .iter()
        .filter_map(|iv| iv.mean_spread.map(|s| (iv.volume as f64, s)))
        .unzip();
    Ok(stats::pearson(&v, &s)?)
}
