//! Heuristic-belief-learning agent.
//!
//! The agent requests the last `memory` limit submissions from the exchange
//! and estimates, for each candidate price, how likely an order there is to
//! trade:
//!
//! ```text
//! buy at p:  (TB(<=p) + A(<=p)) / (TB(<=p) + A(<=p) + UB(>=p))
//! sell at p: (TA(>=p) + B(>=p)) / (TA(>=p) + B(>=p) + UA(<=p))
//! ```
//!
//! where `TB`/`UB` count transacted/untransacted bids, `A` counts all asks,
//! and symmetrically for sells. `0/0` is taken as 0. The agent then places
//! the price that maximizes belief times surplus against its valuation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::zi::{observe, poisson_gap_ns, zi_decide, zi_order, ZiParams};
use super::{fault, uniform_size, LimitIntent, OrderIds};
use crate::kernel::{agent_rng, Agent, AgentError, Context, Message, Payload, StreamRecord};
use crate::lob::Quotes;
use crate::types::{AgentId, OrderId, Price, Side};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HblParams {
    /// Number of most recent limit submissions to learn from.
    pub memory: usize,
    #[serde(flatten)]
    pub zi: ZiParams,
}

impl HblParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.memory < 1 {
            return Err("memory must be at least 1".into());
        }
        self.zi.validate()
    }
}

/// Estimated probability that a `side` order at `price` transacts.
pub fn hbl_belief(history: &[StreamRecord], price: Price, side: Side) -> f64 {
    let (mut favourable, mut rejected) = (0u64, 0u64);
    for r in history {
        match side {
            Side::Buy => match r.side {
                Side::Buy if r.transacted && r.price <= price => favourable += 1,
                Side::Buy if !r.transacted && r.price >= price => rejected += 1,
                Side::Sell if r.price <= price => favourable += 1,
                _ => {}
            },
            Side::Sell => match r.side {
                Side::Sell if r.transacted && r.price >= price => favourable += 1,
                Side::Sell if !r.transacted && r.price <= price => rejected += 1,
                Side::Buy if r.price >= price => favourable += 1,
                _ => {}
            },
        }
    }
    let total = favourable + rejected;
    if total == 0 {
        0.0
    } else {
        favourable as f64 / total as f64
    }
}

/// Candidate price with the highest expected surplus, if any is positive.
pub fn best_price(
    history: &[StreamRecord],
    quotes: &Quotes,
    side: Side,
    valuation: Price,
) -> Option<(Price, f64)> {
    let mut candidates: Vec<Price> = history.iter().map(|r| r.price).collect();
    candidates.extend(quotes.bid.map(|b| b.0));
    candidates.extend(quotes.ask.map(|a| a.0));
    candidates.sort_unstable();
    candidates.dedup();
    let mut best: Option<(Price, f64)> = None;
    for p in candidates.into_iter().filter(|&p| p > 0) {
        let surplus = match side {
            Side::Buy => valuation - p,
            Side::Sell => p - valuation,
        };
        let value = hbl_belief(history, p, side) * surplus as f64;
        if value > 0.0 && best.is_none_or(|(_, v)| value > v) {
            best = Some((p, value));
        }
    }
    best
}

/// Chooses the order for one wakeup. Falls back to zero-intelligence
/// behaviour when the window is empty or no price has positive expected surplus.
pub fn hbl_decide(
    valuation: Price,
    history: &[StreamRecord],
    quotes: &Quotes,
    params: &HblParams,
    rng: &mut ChaCha8Rng,
) -> LimitIntent {
    if history.is_empty() {
        return zi_decide(valuation, &params.zi, rng);
    }
    let side = if rng.random_bool(0.5) { Side::Buy } else { Side::Sell };
    match best_price(history, quotes, side, valuation) {
        Some((price, _)) => LimitIntent {
            side,
            price,
            size: uniform_size(rng, params.zi.size_min, params.zi.size_max),
        },
        None => zi_order(side, valuation, &params.zi, rng),
    }
}

pub struct HblAgent {
    params: HblParams,
    rng: ChaCha8Rng,
    ids: OrderIds,
    resting: Option<OrderId>,
    valuation: Option<Price>,
    history: Vec<StreamRecord>,
}

impl HblAgent {
    pub fn new(agent_id: AgentId, params: HblParams, seed: u64) -> Self {
        HblAgent {
            params,
            rng: agent_rng(seed, agent_id),
            ids: OrderIds::new(agent_id),
            resting: None,
            valuation: None,
            history: Vec::new(),
        }
    }
}

impl Agent for HblAgent {
    fn kind(&self) -> &'static str {
        "hbl"
    }

    fn start(&mut self, ctx: &mut Context<'_>) -> Result<(), AgentError> {
        let first = ctx.now() + poisson_gap_ns(self.params.zi.arrival_rate, &mut self.rng);
        ctx.schedule_wakeup(first).map_err(fault)
    }

    fn receive(&mut self, ctx: &mut Context<'_>, msg: &Message) -> Result<(), AgentError> {
        match &msg.payload {
            Payload::WakeUp => {
                let obs = observe(ctx.fundamental(), self.params.zi.observation_variance, &mut self.rng);
                self.valuation = Some(obs);
                ctx.send_to_exchange(Payload::OrderStreamQuery {
                    len: self.params.memory,
                });
                ctx.send_to_exchange(Payload::DepthQuery { levels: 1 });
                let next = ctx.now() + poisson_gap_ns(self.params.zi.arrival_rate, &mut self.rng);
                ctx.schedule_wakeup(next).map_err(fault)
            }
            Payload::OrderStreamReply { records } => {
                self.history = records.clone();
                Ok(())
            }
            Payload::DepthReply { depth, .. } => {
                let Some(valuation) = self.valuation.take() else {
                    return Ok(());
                };
                let quotes = Quotes {
                    bid: depth.bids.first().copied(),
                    ask: depth.asks.first().copied(),
                };
                let intent = hbl_decide(valuation, &self.history, &quotes, &self.params, &mut self.rng);
                if let Some(old) = self.resting.take() {
                    ctx.send_to_exchange(Payload::Cancel { order_id: old });
                }
                let order_id = self.ids.next_id();
                ctx.send_to_exchange(Payload::LimitOrder {
                    order_id,
                    side: intent.side,
                    price: intent.price,
                    size: intent.size,
                });
                self.resting = Some(order_id);
                Ok(())
            }
            &Payload::FillNotice {
                order_id,
                remaining: 0,
                ..
            } if self.resting == Some(order_id) => {
                self.resting = None;
                Ok(())
            }
            _ => Ok(()),
        }
    }
}
