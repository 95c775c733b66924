//! Primitive domain types shared by the book, the kernel and the metrics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Price in integer cents. The tick size is one cent.
pub type Price = i64;
/// Size in shares.
pub type Qty = u64;
pub type OrderId = u64;
/// Agent identifier. Historical data uses `-1`.
pub type AgentId = i64;
/// Nanoseconds since session open.
pub type Nanos = u64;

pub const NANOS_PER_SEC: Nanos = 1_000_000_000;
pub const NANOS_PER_MIN: Nanos = 60 * NANOS_PER_SEC;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    /// +1 for buys, -1 for sells.
    pub fn sign(self) -> i64 {
        match self {
            Side::Buy => 1,
            Side::Sell => -1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Buy => "BUY",
            Side::Sell => "SELL",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "BUY" => Ok(Side::Buy),
            "SELL" => Ok(Side::Sell),
            other => Err(format!("unknown side `{other}`")),
        }
    }
}

/// Mid-price carried exactly as a count of half-cents, i.e. `bid + ask`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfCents(pub i64);

impl HalfCents {
    pub fn from_quotes(bid: Price, ask: Price) -> Self {
        HalfCents(bid + ask)
    }

    pub fn cents(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl fmt::Display for HalfCents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}.5", self.0.div_euclid(2))
        }
    }
}

/// Parses durations such as `60s`, `5m`, `1h`, `250ms`, `1500ns`.
/// A bare integer is taken as nanoseconds.
pub fn parse_duration(s: &str) -> Result<Nanos, String> {
    let s = s.trim();
    let split = s
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let value: f64 = num.parse().map_err(|_| format!("bad duration `{s}`"))?;
    let scale = match unit {
        "" | "ns" => 1.0,
        "us" => 1e3,
        "ms" => 1e6,
        "s" => 1e9,
        "m" | "min" => 60e9,
        "h" => 3600e9,
        _ => return Err(format!("bad duration unit in `{s}`")),
    };
    let ns = value * scale;
    if !(ns.is_finite() && ns >= 0.0) {
        return Err(format!("bad duration `{s}`"));
    }
    Ok(ns.round() as Nanos)
}

/// Short label for a duration, used in metric ids (`1m`, `10m`, `30s`).
pub fn duration_label(ns: Nanos) -> String {
    const UNITS: [(Nanos, &str); 5] = [
        (3600 * NANOS_PER_SEC, "h"),
        (NANOS_PER_MIN, "m"),
        (NANOS_PER_SEC, "s"),
        (1_000_000, "ms"),
        (1_000, "us"),
    ];
    for (size, unit) in UNITS {
        if ns >= size && ns.is_multiple_of(size) {
            return format!("{}{}", ns / size, unit);
        }
    }
    format!("{ns}ns")
}

/// Parses a wall-clock time of day `HH:MM[:SS]` into nanoseconds since midnight.
pub fn parse_clock(s: &str) -> Result<Nanos, String> {
    let parts: Vec<&str> = s.trim().split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(format!("bad time of day `{s}`"));
    }
    let mut secs = 0u64;
    for (i, p) in parts.iter().enumerate() {
        let v: u64 = p.parse().map_err(|_| format!("bad time of day `{s}`"))?;
        let limit = if i == 0 { 24 } else { 60 };
        if v >= limit {
            return Err(format!("bad time of day `{s}`"));
        }
        secs += v * [3600, 60, 1][i];
    }
    Ok(secs * NANOS_PER_SEC)
}
