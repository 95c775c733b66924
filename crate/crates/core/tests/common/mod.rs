//! Helpers shared by the integration test targets.
#![allow(dead_code)]

pub mod naive_book;

use lobsim::lob::{LimitOrderBook, Order};
use lobsim::types::{Nanos, OrderId, Price, Qty, Side};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use naive_book::{NaiveBook, NaiveFill};

#[derive(Debug, Clone)]
pub enum Op {
    Limit { side: Side, price: Price, size: Qty },
    Market { side: Side, size: Qty },
    /// Cancels the `pick`-th id issued so far (modulo), live or not.
    Cancel { pick: usize },
    /// Cancels an id that was never issued.
    CancelUnknown,
}

/// Distinct ids that are not monotone in submission order, so that
/// same-timestamp ties have to be broken by id rather than by arrival.
pub fn scrambled_id(i: usize) -> OrderId {
    ((i * 37) % 1009 + 1) as OrderId
}

pub fn random_stream(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<(Nanos, Op)> {
    let n = rng.random_range(1..=max_len);
    let mut ts: Nanos = 0;
    (0..n)
        .map(|_| {
            ts += rng.random_range(0..=1);
            let side = if rng.random_bool(0.5) { Side::Buy } else { Side::Sell };
            let op = match rng.random_range(0..10) {
                0..=5 => Op::Limit {
                    side,
                    price: rng.random_range(95..=105),
                    size: rng.random_range(1..=20),
                },
                6 => Op::Market {
                    side,
                    size: rng.random_range(1..=40),
                },
                7 | 8 => Op::Cancel {
                    pick: rng.random_range(0..usize::MAX),
                },
                _ => Op::CancelUnknown,
            };
            (ts, op)
        })
        .collect()
}

pub fn seeded_stream(seed: u64, max_len: usize) -> Vec<(Nanos, Op)> {
    random_stream(&mut ChaCha8Rng::seed_from_u64(seed), max_len)
}

/// Size accounting for one stream.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct Ledger {
    pub submitted: Qty,
    pub filled: Qty,
    pub canceled: Qty,
    pub discarded: Qty,
    pub resting: Qty,
}

impl Ledger {
    pub fn balanced(&self) -> bool {
        // Each fill removes its size from both the maker and the taker.
        self.submitted == 2 * self.filled + self.canceled + self.discarded + self.resting
    }
}

/// Runs `ops` through the production book and the naive reference,
/// returning an error on the first disagreement.
pub fn check_against_oracle(ops: &[(Nanos, Op)]) -> Result<Ledger, String> {
    let mut book = LimitOrderBook::new();
    let mut naive = NaiveBook::default();
    let mut ledger = Ledger::default();
    let mut issued: Vec<OrderId> = Vec::new();
    for (i, (ts, op)) in ops.iter().enumerate() {
        let id = scrambled_id(i);
        let (got, want): (Vec<NaiveFill>, Vec<NaiveFill>) = match *op {
            Op::Limit { side, price, size } => {
                ledger.submitted += size;
                issued.push(id);
                let fills = book
                    .submit_limit(Order::limit(id, 1, side, price, size, *ts))
                    .map_err(|e| format!("op {i}: {e}"))?;
                let got = fills.iter().map(|f| (f.maker_order_id, f.taker_order_id, f.price, f.size)).collect();
                (got, naive.submit_limit(id, side, price, size, *ts))
            }
            Op::Market { side, size } => {
                ledger.submitted += size;
                let out = book.submit_market(side, size, *ts, id, 1).map_err(|e| format!("op {i}: {e}"))?;
                let (want, left) = naive.submit_market(id, side, size);
                if out.unfilled != left {
                    return Err(format!("op {i}: discarded {} vs naive {left}", out.unfilled));
                }
                ledger.discarded += left;
                let got = out.fills.iter().map(|f| (f.maker_order_id, f.taker_order_id, f.price, f.size)).collect();
                (got, want)
            }
            Op::Cancel { pick } => {
                if issued.is_empty() {
                    continue;
                }
                let target = issued[pick % issued.len()];
                let (a, b) = (book.cancel(target), naive.cancel(target));
                if a != b {
                    return Err(format!("op {i}: cancel {target} returned {a:?} vs naive {b:?}"));
                }
                ledger.canceled += a.unwrap_or(0);
                continue;
            }
            Op::CancelUnknown => {
                if book.cancel(1_000_000).is_some() {
                    return Err(format!("op {i}: unknown cancel succeeded"));
                }
                continue;
            }
        };
        if got != want {
            return Err(format!("op {i}: fills {got:?} vs naive {want:?}"));
        }
        ledger.filled += got.iter().map(|f| f.3).sum::<Qty>();
        if book.best_bid().map(|b| b.0) != naive.best(Side::Buy) || book.best_ask().map(|a| a.0) != naive.best(Side::Sell) {
            return Err(format!("op {i}: quotes diverged"));
        }
        book.check_invariants().map_err(|e| format!("op {i}: {e}"))?;
    }
    ledger.resting = book.resting_size();
    if ledger.resting != naive.resting_size() {
        return Err("resting size diverged".into());
    }
    Ok(ledger)
}

/// `sparse_zi_100` shortened to the first hour of the session.
pub fn sparse_first_hour() -> lobsim::SimConfig {
    let mut cfg = lobsim::SimConfig::preset("sparse_zi_100").unwrap();
    cfg.session.close = "10:30".into();
    cfg
}

/// Per-agent gaps, in seconds, between consecutive limit submissions of
/// the agents in `agents`, ordered by agent then time.
pub fn submission_gaps(trace: &lobsim::EventTrace, agents: std::ops::RangeInclusive<i64>) -> Vec<f64> {
    use std::collections::BTreeMap;
    let mut times: BTreeMap<i64, Vec<Nanos>> = BTreeMap::new();
    for ev in &trace.events {
        if ev.event_type == lobsim::EventType::SubmitLimit && agents.contains(&ev.agent_id) {
            times.entry(ev.agent_id).or_default().push(ev.timestamp_ns);
        }
    }
    times
        .values()
        .flat_map(|ts| ts.windows(2).map(|w| (w[1] - w[0]) as f64 / 1e9).collect::<Vec<_>>())
        .collect()
}
