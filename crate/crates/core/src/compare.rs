//! Side-by-side comparison of two metric reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metrics::{MetricEntry, MetricReport};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricDiff {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_diff: Option<f64>,
    /// `|candidate - baseline| / |baseline|`; absent for a zero baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_diff: Option<f64>,
    /// Two-sample KS distance when both sides carry samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub common: BTreeMap<String, MetricDiff>,
    pub missing_in_baseline: Vec<String>,
    pub missing_in_candidate: Vec<String>,
}

impl ComparisonReport {
    pub fn to_json_bytes(&self) -> Result<Vec<u8>, serde_json::Error> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Some(d)
}

fn diff(b: &MetricEntry, c: &MetricEntry) -> MetricDiff {
    let abs_diff = b.value.zip(c.value).map(|(x, y)| (y - x).abs());
    MetricDiff {
        baseline: b.value,
        candidate: c.value,
        abs_diff,
        rel_diff: b
            .value
            .filter(|x| *x != 0.0)
            .zip(abs_diff)
            .map(|(x, d)| d / x.abs()),
        ks_distance: ks_two_sample(&b.samples, &c.samples),
    }
}

/// Compares every metric id present in both reports; `meta.*` entries are
/// ignored.
pub fn compare(baseline: &MetricReport, candidate: &MetricReport) -> ComparisonReport {
    let ids = |r: &MetricReport| -> Vec<String> {
        r.entries.keys().filter(|k| !k.starts_with("meta.")).cloned().collect()
    };
    let mut out = ComparisonReport::default();
    for id in ids(baseline) {
        match candidate.get(&id) {
            Some(c) => {
                out.common.insert(id.clone(), diff(&baseline.entries[&id], c));
            }
            None => out.missing_in_candidate.push(id),
        }
    }
    out.missing_in_baseline = ids(candidate)
        .into_iter()
        .filter(|id| baseline.get(id).is_none())
        .collect();
    out
}
