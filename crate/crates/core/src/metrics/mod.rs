//! Stylized-fact metrics and the keyed report they populate.
//!
//! [`analyze`] runs the whole catalog over one trace (plus optional extra
//! traces for the cross-asset metrics) and returns a [`MetricReport`] keyed
//! by metric id. Ids whose inputs are missing are present but marked
//! unavailable rather than approximated.
//!
//! Units: returns are log returns, prices and spreads cents, volumes shares,
//! durations nanoseconds. Kurtosis is raw (3 for a normal distribution).

pub mod flow;
pub mod impact;
pub mod returns;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distfit::{DistributionFit, FitError};
use crate::ingest::{EventTrace, QuoteSnapshot};
use crate::replay::QuoteTimeline;
use crate::series::{self, SeriesError};
use crate::stats::{self, StatsError};
use crate::types::{duration_label, Nanos, NANOS_PER_MIN, NANOS_PER_SEC};

use returns::AcfTransform;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("unknown metric id `{0}`")]
    UnknownMetric(String),
}

/// Sample sets larger than this are stored as evenly spaced order statistics.
pub const MAX_STORED_SAMPLES: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitSummary {
    pub params: BTreeMap<String, f64>,
    /// Kolmogorov-Smirnov distance for distribution fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<f64>,
    pub sample_count: usize,
}

impl From<&DistributionFit> for FitSummary {
    fn from(f: &DistributionFit) -> Self {
        FitSummary {
            params: f.params.named().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            ks: Some(f.ks),
            sample_count: f.sample_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// Plot-ready `[x, y]` points.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curve: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fits: BTreeMap<String, FitSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Raw samples for distribution comparisons.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<f64>,
    pub sample_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<[f64; 2]>,
    /// Boolean outcome where the metric has one (e.g. U-shape present).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unavailable: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MetricEntry {
    pub fn value(value: f64, sample_count: usize) -> Self {
        MetricEntry {
            value: Some(value),
            sample_count,
            ..Default::default()
        }
    }

    pub fn unavailable(reason: impl Into<String>) -> Self {
        MetricEntry {
            unavailable: Some(reason.into()),
            ..Default::default()
        }
    }

    pub fn note(text: impl Into<String>) -> Self {
        MetricEntry {
            note: Some(text.into()),
            ..Default::default()
        }
    }

    pub fn is_available(&self) -> bool {
        self.unavailable.is_none()
    }

    fn warn(mut self, w: impl Into<String>) -> Self {
        self.warnings.push(w.into());
        self
    }

    fn with_samples(mut self, xs: &[f64]) -> Self {
        self.samples = thin(xs);
        if self.samples.len() < xs.len() {
            self.warnings
                .push(format!("samples stored as {} order statistics", self.samples.len()));
        }
        self
    }

    fn with_curve(mut self, xs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        self.curve = xs.into_iter().map(|(x, y)| [x, y]).collect();
        self
    }

    fn with_fit(mut self, name: &str, fit: &Result<DistributionFit, FitError>) -> Self {
        match fit {
            Ok(f) => {
                self.fits.insert(name.to_string(), f.into());
            }
            Err(e) => self.warnings.push(format!("{name} fit: {e}")),
        }
        self
    }
}

/// Evenly spaced order statistics once a sample set exceeds the cap.
fn thin(xs: &[f64]) -> Vec<f64> {
    if xs.len() <= MAX_STORED_SAMPLES {
        return xs.to_vec();
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    (0..MAX_STORED_SAMPLES)
        .map(|k| v[k * (n - 1) / (MAX_STORED_SAMPLES - 1)])
        .collect()
}

/// Metric results keyed by id; serialized as a flat JSON object.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricReport {
    pub entries: BTreeMap<String, MetricEntry>,
}

impl MetricReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: &str) -> Option<&MetricEntry> {
        self.entries.get(id)
    }

    /// Value of an available metric.
    pub fn value(&self, id: &str) -> Option<f64> {
        self.get(id).and_then(|e| e.value)
    }

    /// Inserts an entry; non-finite numbers mark it unavailable.
    pub fn insert(&mut self, id: impl Into<String>, mut entry: MetricEntry) {
        let finite = entry.value.is_none_or(f64::is_finite)
            && entry.curve.iter().flatten().all(|x| x.is_finite())
            && entry.samples.iter().all(|x| x.is_finite());
        if !finite {
            entry = MetricEntry::unavailable("non-finite result");
        }
        self.entries.insert(id.into(), entry);
    }

    fn insert_result(&mut self, id: impl Into<String>, r: Result<MetricEntry, MetricError>) {
        match r {
            Ok(e) => self.insert(id, e),
            Err(e) => self.insert(id, MetricEntry::unavailable(e.to_string())),
        }
    }

    /// Keeps `ids` (plus every `meta.*` entry); unknown ids are an error.
    pub fn select(&self, ids: &[String]) -> Result<MetricReport, MetricError> {
        let mut out = MetricReport::new();
        for id in ids {
            let e = self.get(id).ok_or_else(|| MetricError::UnknownMetric(id.clone()))?;
            out.entries.insert(id.clone(), e.clone());
        }
        for (k, v) in &self.entries {
            if k.starts_with("meta.") {
                out.entries.insert(k.clone(), v.clone());
            }
        }
        Ok(out)
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>, serde_json::Error> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Base return scale.
    pub dt: Nanos,
    /// Interval length for volume/volatility aggregates and impact.
    pub tau: Nanos,
    /// Impact participation bins.
    pub bins: usize,
    /// Coarse scale for the aggregational-normality comparison.
    pub coarse: Nanos,
    /// Window for per-window lag-1 return autocorrelation.
    pub autocorr_window: Nanos,
    /// Window for order counts.
    pub count_window: Nanos,
    /// Grid for best-volume snapshots.
    pub snapshot_step: Nanos,
    pub max_lag: usize,
    pub order_sign_lags: usize,
    pub intraday_bins: usize,
    pub intraday_degree: usize,
    pub tail_quantile: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            dt: NANOS_PER_MIN,
            tau: 5 * NANOS_PER_MIN,
            bins: impact::DEFAULT_BINS,
            coarse: 10 * NANOS_PER_MIN,
            autocorr_window: 30 * NANOS_PER_MIN,
            count_window: 5 * NANOS_PER_MIN,
            snapshot_step: NANOS_PER_SEC,
            max_lag: 20,
            order_sign_lags: 20,
            intraday_bins: 14,
            intraday_degree: 2,
            tail_quantile: impact::DEFAULT_TAIL_QUANTILE,
        }
    }
}

impl AnalysisOptions {
    pub fn validate(&self) -> Result<(), MetricError> {
        let bad = |m: &str| Err(MetricError::Invalid(m.into()));
        if self.dt == 0 {
            return bad("dt must be positive");
        }
        if !self.coarse.is_multiple_of(self.dt) || self.coarse < self.dt {
            return bad("coarse scale must be a multiple of dt");
        }
        if !self.autocorr_window.is_multiple_of(self.dt) || self.autocorr_window < self.dt {
            return bad("autocorrelation window must be a multiple of dt");
        }
        if self.tau < 10 {
            return bad("tau must be at least 10 ns");
        }
        if self.bins < 2 || self.intraday_bins < self.intraday_degree + 1 {
            return bad("too few bins");
        }
        if self.count_window == 0 || self.snapshot_step == 0 || self.max_lag == 0 {
            return bad("windows and lags must be positive");
        }
        if !(0.0..1.0).contains(&self.tail_quantile) {
            return bad("tail quantile must be in [0, 1)");
        }
        Ok(())
    }

    /// Return step for within-interval volatility: `dt`, or `tau / 10` when
    /// `dt` leaves fewer than ten returns per interval.
    pub fn volatility_step(&self) -> Nanos {
        if self.tau >= 10 * self.dt {
            self.dt
        } else {
            self.tau / 10
        }
    }

    /// Every metric id [`analyze`] emits, in report order.
    pub fn metric_ids(&self) -> Vec<String> {
        let (f, c, w) = (duration_label(self.dt), duration_label(self.coarse), duration_label(self.autocorr_window));
        let mut ids = Vec::new();
        for scale in [&f, &c] {
            for m in ["kurtosis", "skewness", "volatility"] {
                ids.push(format!("returns.{m}.{scale}"));
            }
        }
        ids.extend(
            [
                "returns.intermittency".to_string(),
                format!("returns.autocorr.lag1.{w}"),
                "returns.acf.raw".into(),
                "returns.acf.squared".into(),
                "returns.acf.absolute".into(),
                "returns.long_range.beta".into(),
                "returns.volume_volatility".into(),
                "returns.returns_volatility.corr".into(),
                "returns.volatility_asymmetry".into(),
                "flow.order_count".into(),
                "flow.interarrival".into(),
                "flow.interarrival.weibull.shape".into(),
                "flow.order_size.limit".into(),
                "flow.order_size.market".into(),
                "flow.relative_price".into(),
                "flow.lifetime.cancelled".into(),
                "flow.lifetime.first_fill".into(),
                "flow.lifetime.completion".into(),
                "flow.best_volume.bid".into(),
                "flow.best_volume.ask".into(),
                "flow.order_sign.acf".into(),
                "flow.intraday".into(),
                "flow.volume_spread.corr".into(),
                "impact.curve".into(),
                "impact.alpha".into(),
                "impact.beta".into(),
                "cross.corr".into(),
                "cross.tail_corr".into(),
            ],
        );
        ids
    }
}

/// Input to [`analyze`]: order-level traces, or best-quote snapshots only.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    Events(&'a [EventTrace]),
    Quotes(&'a [QuoteSnapshot]),
}

fn acf_entry(curve: &returns::AcfCurve, n: usize) -> MetricEntry {
    MetricEntry::value(curve.values[0], n).with_curve(
        curve
            .lags
            .iter()
            .zip(&curve.values)
            .map(|(&l, &v)| (l as f64, v)),
    )
}

fn tail_entry(t: &flow::TailFit) -> MetricEntry {
    let mut e = MetricEntry::value(t.fit.params.headline().1, t.fit.sample_count)
        .with_samples(&t.samples)
        .with_fit("powerlaw", &Ok(t.fit.clone()));
    e.reference = Some(t.reference);
    if t.xmin.fallback {
        e = e.warn("too few samples to scan xmin; used the sample minimum");
    }
    if t.fit.dropped > 0 {
        e = e.warn(format!("{} non-positive samples dropped", t.fit.dropped));
    }
    e
}

fn unavailable_without_events(report: &mut MetricReport, ids: &[String]) {
    for id in ids {
        report
            .entries
            .entry(id.clone())
            .or_insert_with(|| MetricEntry::unavailable("requires order-level events"));
    }
}

/// Computes the full metric catalog.
///
/// Single-trace metrics use the first trace; `cross.*` metrics need at
/// least two traces and align their `dt` returns on the common grid.
pub fn analyze(source: Source<'_>, opts: &AnalysisOptions) -> Result<MetricReport, MetricError> {
    opts.validate()?;
    let (timeline, trace, traces) = match source {
        Source::Events(traces) => {
            let first = traces
                .first()
                .ok_or_else(|| MetricError::InsufficientData("no traces".into()))?;
            (QuoteTimeline::from_trace(first).0, Some(first), traces)
        }
        Source::Quotes(snaps) => (QuoteTimeline::from_snapshots(snaps), None, &[][..]),
    };
    let (start, stop) = match trace {
        Some(t) => t.session_bounds(),
        None => timeline.times.first().copied().zip(timeline.times.last().copied()),
    }
    .filter(|(a, b)| b > a)
    .ok_or_else(|| MetricError::InsufficientData("empty or instantaneous session".into()))?;

    let mut report = MetricReport::new();
    report.insert(
        "meta.options",
        MetricEntry::note(serde_json::to_string(opts).expect("options serialize")),
    );
    returns_metrics(&mut report, &timeline, trace, start, stop, opts)?;
    flow_metrics(&mut report, &timeline, trace, start, stop, opts)?;
    impact_metrics(&mut report, trace, &timeline, start, stop, opts);
    cross_metrics(&mut report, traces, start, stop, opts);
    unavailable_without_events(&mut report, &opts.metric_ids());
    Ok(report)
}

fn returns_metrics(
    report: &mut MetricReport,
    timeline: &QuoteTimeline,
    trace: Option<&EventTrace>,
    start: Nanos,
    stop: Nanos,
    opts: &AnalysisOptions,
) -> Result<(), MetricError> {
    let mids = series::sample_mid_timeline(timeline, start, stop, opts.dt)?;
    let rets = series::log_returns(&mids)?;
    let r = rets.defined();
    let factor = (opts.coarse / opts.dt) as usize;
    let labels = [duration_label(opts.dt), duration_label(opts.coarse)];

    match returns::moments_by_scale(&mids, &[1, factor]) {
        Ok(mbs) => {
            for (s, label) in mbs.scales.iter().zip(&labels) {
                let m = &s.moments;
                for (name, v) in [("kurtosis", m.kurtosis), ("skewness", m.skewness), ("volatility", m.std)] {
                    let mut e = MetricEntry::value(v, m.count);
                    if s.below_minimum {
                        e = e.warn(format!(
                            "{} returns, fewer than {}",
                            m.count,
                            returns::MIN_SCALE_RETURNS
                        ));
                    }
                    report.insert(format!("returns.{name}.{label}"), e);
                }
            }
            let mut e = MetricEntry::value(
                mbs.scales.iter().map(|s| s.moments.std).fold(f64::INFINITY, f64::min),
                r.len(),
            )
            .with_curve(mbs.scales.iter().map(|s| (s.scale as f64, s.moments.std)));
            e.verdict = Some(mbs.intermittent());
            report.insert("returns.intermittency", e.warn("interpretation: volatility positive at every scale"));
        }
        Err(err) => {
            for label in &labels {
                for name in ["kurtosis", "skewness", "volatility"] {
                    report.insert(format!("returns.{name}.{label}"), MetricEntry::unavailable(err.to_string()));
                }
            }
            report.insert("returns.intermittency", MetricEntry::unavailable(err.to_string()));
        }
    }

    let window = (opts.autocorr_window / opts.dt) as usize;
    let (per_window, skipped) = returns::windowed_autocorrelation(&rets.values, window, 1);
    let id = format!("returns.autocorr.lag1.{}", duration_label(opts.autocorr_window));
    if per_window.is_empty() {
        report.insert(id, MetricEntry::unavailable("no window with a defined autocorrelation"));
    } else {
        let h = returns::correlation_histogram(&per_window);
        let mut e = MetricEntry::value(stats::median(&per_window)?, per_window.len())
            .with_samples(&per_window)
            .with_curve(h.counts.iter().enumerate().map(|(i, &c)| (h.start + i as f64 * h.width, c as f64)));
        if skipped > 0 {
            e = e.warn(format!("{skipped} windows without a defined autocorrelation"));
        }
        report.insert(id, e);
    }

    let lags: Vec<usize> = (1..=opts.max_lag).collect();
    for (name, t) in [("raw", AcfTransform::Raw), ("squared", AcfTransform::Squared), ("absolute", AcfTransform::Absolute)] {
        report.insert_result(
            format!("returns.acf.{name}"),
            returns::acf_curve(&r, &lags, t).map(|c| acf_entry(&c, r.len())),
        );
    }
    report.insert_result(
        "returns.long_range.beta",
        returns::long_range_dependence(&r, &lags).map(|l| {
            let mut e = MetricEntry::value(l.beta, r.len()).with_curve(
                l.curve.lags.iter().zip(&l.curve.values).map(|(&x, &y)| (x as f64, y)),
            );
            e.reference = Some(returns::LONG_RANGE_BAND);
            e.fits.insert(
                "loglog".into(),
                FitSummary {
                    params: [
                        ("intercept".into(), l.fit.intercept),
                        ("slope".into(), l.fit.slope),
                        ("residual_norm".into(), l.fit.residual_norm),
                    ]
                    .into(),
                    ks: None,
                    sample_count: lags.len(),
                },
            );
            e
        }),
    );
    let blocks = r.len() / factor.max(1);
    let asym_lags: Vec<usize> = (1..=5.min(blocks.saturating_sub(3))).collect();
    report.insert_result(
        "returns.volatility_asymmetry",
        if asym_lags.is_empty() {
            Err(MetricError::InsufficientData(format!("{blocks} coarse blocks")))
        } else {
            // Contiguous defined returns only: missing returns would shift blocks.
            let first_defined = rets.values.iter().position(Option::is_some).unwrap_or(0);
            let tail: Vec<f64> = rets.values[first_defined..].iter().map_while(|v| *v).collect();
            returns::volatility_flow_asymmetry(&tail, factor, 1, &asym_lags).map(|a| {
                MetricEntry::value(a.mean, tail.len())
                    .with_curve(a.lags.iter().zip(&a.values).map(|(&l, &v)| (l as f64, v)))
            })
        },
    );

    let Some(trace) = trace else { return Ok(()) };
    let agg = series::interval_aggregates_with(trace, timeline, start, stop, opts.tau, opts.volatility_step())?;
    report.insert_result(
        "returns.volume_volatility",
        returns::volume_volatility_relation(&agg).map(|v| {
            let mut e = MetricEntry::value(v.corr, v.intervals);
            e.fits.insert(
                "ols".into(),
                FitSummary {
                    params: [("alpha".into(), v.alpha), ("beta".into(), v.beta)].into(),
                    ks: None,
                    sample_count: v.intervals,
                },
            );
            e
        }),
    );
    report.insert_result(
        "returns.returns_volatility.corr",
        returns::returns_volatility_correlation(&agg).map(|c| MetricEntry::value(c, agg.intervals.len())),
    );
    Ok(())
}

fn flow_metrics(
    report: &mut MetricReport,
    timeline: &QuoteTimeline,
    trace: Option<&EventTrace>,
    start: Nanos,
    stop: Nanos,
    opts: &AnalysisOptions,
) -> Result<(), MetricError> {
    match flow::best_volume_distribution(timeline, start, stop, opts.snapshot_step) {
        Ok(bv) => {
            for (side, xs, excluded, fit) in [
                ("bid", &bv.bid, bv.bid_excluded, &bv.bid_fit),
                ("ask", &bv.ask, bv.ask_excluded, &bv.ask_fit),
            ] {
                let id = format!("flow.best_volume.{side}");
                let e = match fit {
                    Ok(f) => {
                        let shape = f.params.headline().1;
                        let mut e = MetricEntry::value(shape, xs.len()).with_samples(xs).with_fit("gamma", fit);
                        e.verdict = Some(shape <= 1.0);
                        if excluded > 0 {
                            e = e.warn(format!("{excluded} snapshots with an empty side excluded"));
                        }
                        e
                    }
                    Err(err) => MetricEntry::unavailable(err.to_string()),
                };
                report.insert(id, e);
            }
        }
        Err(err) => {
            report.insert("flow.best_volume.bid", MetricEntry::unavailable(err.to_string()));
            report.insert("flow.best_volume.ask", MetricEntry::unavailable(err.to_string()));
        }
    }

    let Some(trace) = trace else { return Ok(()) };

    report.insert_result(
        "flow.order_count",
        flow::order_count_distribution(trace, start, stop, opts.count_window).map(|c| {
            let mean = stats::mean(&c.counts).unwrap_or(0.0);
            MetricEntry::value(mean, c.counts.len())
                .with_samples(&c.counts)
                .with_fit("gamma", &c.gamma)
                .with_fit("lognormal", &c.lognormal)
                .with_fit("exponential", &c.exponential)
        }),
    );

    match flow::interarrival_distribution(trace) {
        Ok(ia) => {
            let samples = ia.fitted_samples();
            let mut e = MetricEntry::value(stats::mean(&samples)?, samples.len())
                .with_samples(&samples)
                .with_fit("exponential", &ia.exponential)
                .with_fit("lognormal", &ia.lognormal)
                .with_fit("weibull", &ia.weibull);
            if ia.zero_gaps > 0 {
                e = e.warn(format!("{} zero gaps replaced by {} ns", ia.zero_gaps, flow::ZERO_GAP_NS));
            }
            report.insert("flow.interarrival", e);
            let shape = match &ia.weibull {
                Ok(f) => {
                    let s = f.params.headline().1;
                    let mut e = MetricEntry::value(s, f.sample_count).with_fit("weibull", &ia.weibull);
                    e.verdict = ia.weibull_shape_below_one();
                    if s < 1.0 {
                        e = e.warn("weibull shape below 1: interarrivals dominated by values near zero");
                    }
                    e
                }
                Err(err) => MetricEntry::unavailable(err.to_string()),
            };
            report.insert("flow.interarrival.weibull.shape", shape);
        }
        Err(err) => {
            report.insert("flow.interarrival", MetricEntry::unavailable(err.to_string()));
            report.insert("flow.interarrival.weibull.shape", MetricEntry::unavailable(err.to_string()));
        }
    }

    for (kind, name) in [(flow::OrderKind::Limit, "limit"), (flow::OrderKind::Market, "market")] {
        report.insert_result(
            format!("flow.order_size.{name}"),
            flow::order_size_distribution(trace, kind).map(|t| {
                let modes = flow::modal_values(&t.samples, 10);
                tail_entry(&t).with_curve(modes.into_iter().map(|(size, n)| (size, n as f64)))
            }),
        );
    }

    let rp = flow::relative_price_distribution(trace);
    let entry = rp.tail.as_ref().map(|t| {
        let mut e = tail_entry(t);
        let h = stats::histogram(&rp.deltas, -100.0, 101.0, 1.0);
        e.curve = h
            .counts
            .iter()
            .enumerate()
            .map(|(i, &c)| [h.start + i as f64, c as f64])
            .collect();
        e = e.warn(format!("{} signed offsets; curve clips to [-100, 100] cents", rp.deltas.len()));
        if rp.skipped > 0 {
            e = e.warn(format!("{} submissions without a same-side quote", rp.skipped));
        }
        e
    });
    report.insert_result("flow.relative_price", entry.map_err(|e| e.clone()));

    let lt = flow::lifetime_distributions(trace);
    for kind in flow::LifetimeKind::ALL {
        let r = lt.fit(kind).map(|t| {
            tail_entry(&t).warn(format!(
                "{} limit orders, {} open at close",
                lt.limit_orders, lt.open_at_close
            ))
        });
        report.insert_result(format!("flow.lifetime.{}", kind.id()), r);
    }

    report.insert_result(
        "flow.order_sign.acf",
        flow::order_flow_autocorrelation(trace, opts.order_sign_lags).map(|c| {
            acf_entry(&c, trace.events.iter().filter(|e| e.event_type.is_submit()).count())
                .warn("order-sign autocorrelation over event lags")
        }),
    );

    report.insert_result(
        "flow.intraday",
        flow::intraday_profile(trace, start, stop, opts.intraday_bins, opts.intraday_degree).map(|p| {
            let mut e = MetricEntry::value(p.quadratic_leading, p.volumes.len())
                .with_curve(p.centers.iter().copied().zip(p.volumes.iter().copied()));
            e.fits.insert(
                format!("poly{}", p.degree),
                FitSummary {
                    params: p
                        .coefficients
                        .iter()
                        .enumerate()
                        .map(|(i, &c)| (format!("c{i}"), c))
                        .collect(),
                    ks: None,
                    sample_count: p.volumes.len(),
                },
            );
            e.verdict = Some(p.u_shape);
            e
        }),
    );

    let agg = series::interval_aggregates_with(trace, timeline, start, stop, opts.tau, opts.volatility_step())?;
    report.insert_result(
        "flow.volume_spread.corr",
        flow::volume_spread_correlation(&agg).map(|c| MetricEntry::value(c, agg.intervals.len())),
    );
    Ok(())
}

fn impact_metrics(
    report: &mut MetricReport,
    trace: Option<&EventTrace>,
    timeline: &QuoteTimeline,
    start: Nanos,
    stop: Nanos,
    opts: &AnalysisOptions,
) {
    let Some(trace) = trace else { return };
    let agg = match series::interval_aggregates_with(trace, timeline, start, stop, opts.tau, opts.volatility_step()) {
        Ok(a) => a,
        Err(e) => {
            for id in ["impact.curve", "impact.alpha", "impact.beta"] {
                report.insert(id, MetricEntry::unavailable(e.to_string()));
            }
            return;
        }
    };
    let ps = impact::participation_series(&agg);
    let curve = match impact::impact_curve(&ps.points, opts.bins) {
        Ok(c) => c,
        Err(e) => {
            for id in ["impact.curve", "impact.alpha", "impact.beta"] {
                report.insert(id, MetricEntry::unavailable(e.to_string()));
            }
            return;
        }
    };
    let mut e = MetricEntry {
        value: impact::monotone_fraction(&curve.bins),
        sample_count: ps.points.len(),
        curve: curve
            .bins
            .iter()
            .filter_map(|b| b.mean_participation.zip(b.mean_move).map(|(p, m)| [p, m]))
            .collect(),
        warnings: curve.warnings.clone(),
        ..Default::default()
    };
    if ps.skipped_zero_volume + ps.skipped_missing_mid > 0 {
        e = e.warn(format!(
            "{} zero-volume and {} unquoted intervals excluded",
            ps.skipped_zero_volume, ps.skipped_missing_mid
        ));
    }
    e = e.warn("value: fraction of adjacent bins with non-decreasing mean move; moves oriented by net flow");
    report.insert("impact.curve", e);
    match impact::fit_impact(&curve.bins) {
        Ok(fit) => {
            let mut params = MetricEntry::value(fit.alpha, fit.bins_used);
            let mut beta = MetricEntry::value(fit.beta, fit.bins_used);
            for e in [&mut params, &mut beta] {
                if fit.bins_excluded > 0 {
                    e.warnings
                        .push(format!("{} bins with non-positive mean move excluded", fit.bins_excluded));
                }
                e.warnings.push(format!("log-log residual norm {:.6}", fit.residual_norm));
            }
            report.insert("impact.alpha", params);
            report.insert("impact.beta", beta);
        }
        Err(err) => {
            report.insert("impact.alpha", MetricEntry::unavailable(err.to_string()));
            report.insert("impact.beta", MetricEntry::unavailable(err.to_string()));
        }
    }
}

fn cross_metrics(report: &mut MetricReport, traces: &[EventTrace], start: Nanos, stop: Nanos, opts: &AnalysisOptions) {
    if traces.len() < 2 {
        for id in ["cross.corr", "cross.tail_corr"] {
            report.insert(id, MetricEntry::unavailable("requires at least two event traces"));
        }
        return;
    }
    let series: Result<Vec<Vec<Option<f64>>>, MetricError> = traces
        .iter()
        .map(|t| {
            let mids = series::sample_mid(t, start, stop, opts.dt)?;
            Ok(series::log_returns(&mids)?.values)
        })
        .collect();
    let aligned = series.map(|all| {
        let len = all.iter().map(Vec::len).min().unwrap_or(0);
        let keep: Vec<usize> = (0..len).filter(|&k| all.iter().all(|s| s[k].is_some())).collect();
        all.iter()
            .map(|s| keep.iter().map(|&k| s[k].expect("filtered")).collect::<Vec<f64>>())
            .collect::<Vec<_>>()
    });
    let n = traces.len();
    let matrix_entry = |m: Vec<Vec<f64>>, samples: usize| {
        let off: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| m[i][j]).collect();
        MetricEntry {
            value: stats::mean(&off).ok(),
            matrix: Some(m),
            sample_count: samples,
            ..Default::default()
        }
        .warn("value: mean off-diagonal entry")
    };
    let corr = aligned
        .clone()
        .and_then(|s| Ok(matrix_entry(impact::correlation_matrix(&s)?, s[0].len())));
    report.insert_result("cross.corr", corr);
    let tail = aligned.and_then(|s| {
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = 1.0;
            for j in i + 1..n {
                let c = impact::tail_correlation(&s[i], &s[j], opts.tail_quantile)?;
                m[i][j] = c;
                m[j][i] = c;
            }
        }
        Ok(matrix_entry(m, s[0].len()))
    });
    report.insert_result("cross.tail_corr", tail);
}
