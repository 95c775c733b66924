//! Market maker quoting a ladder on both sides every wake interval.

use std::collections::BTreeSet;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fault, uniform_size, LimitIntent, OrderIds};
use crate::kernel::{agent_rng, Agent, AgentError, Context, Message, Payload};
use crate::lob::Quotes;
use crate::types::{AgentId, Nanos, OrderId, Qty, Side, NANOS_PER_SEC};

fn default_wake_interval() -> Nanos {
    10 * NANOS_PER_SEC
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmParams {
    #[serde(default = "default_wake_interval")]
    pub wake_interval_ns: Nanos,
    /// Number of price levels quoted on each side.
    pub levels: usize,
    /// Bounds on the total size quoted per side.
    pub size_min: Qty,
    pub size_max: Qty,
}

impl MmParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.levels < 1 {
            return Err("levels must be at least 1".into());
        }
        if self.size_min < self.levels as Qty || self.size_min > self.size_max {
            return Err("need levels <= size_min <= size_max".into());
        }
        if self.wake_interval_ns == 0 {
            return Err("wake_interval_ns must be positive".into());
        }
        Ok(())
    }
}

/// Splits `total` over `levels` as evenly as possible, extra shares going
/// to the innermost levels first.
pub fn split_size(total: Qty, levels: usize) -> Vec<Qty> {
    let n = levels as Qty;
    let (base, extra) = (total / n, total % n);
    (0..n).map(|i| base + Qty::from(i < extra)).collect()
}

/// Ladder of `2 * levels` orders anchored at the inside quotes, or nothing
/// when the book is one-sided.
pub fn mm_decide(quotes: &Quotes, params: &MmParams, rng: &mut ChaCha8Rng) -> Vec<LimitIntent> {
    let (Some((bid, _)), Some((ask, _))) = (quotes.bid, quotes.ask) else {
        return Vec::new();
    };
    let bid_sizes = split_size(uniform_size(rng, params.size_min, params.size_max), params.levels);
    let ask_sizes = split_size(uniform_size(rng, params.size_min, params.size_max), params.levels);
    let mut out = Vec::with_capacity(2 * params.levels);
    for (k, size) in bid_sizes.into_iter().enumerate() {
        let price = bid - k as i64;
        if price > 0 && size > 0 {
            out.push(LimitIntent {
                side: Side::Buy,
                price,
                size,
            });
        }
    }
    for (k, size) in ask_sizes.into_iter().enumerate() {
        if size > 0 {
            out.push(LimitIntent {
                side: Side::Sell,
                price: ask + k as i64,
                size,
            });
        }
    }
    out
}

pub struct MarketMakerAgent {
    params: MmParams,
    rng: ChaCha8Rng,
    ids: OrderIds,
    resting: BTreeSet<OrderId>,
}

impl MarketMakerAgent {
    pub fn new(agent_id: AgentId, params: MmParams, seed: u64) -> Self {
        MarketMakerAgent {
            params,
            rng: agent_rng(seed, agent_id),
            ids: OrderIds::new(agent_id),
            resting: BTreeSet::new(),
        }
    }

    /// Orders this agent believes are live.
    pub fn resting(&self) -> &BTreeSet<OrderId> {
        &self.resting
    }
}

impl Agent for MarketMakerAgent {
    fn kind(&self) -> &'static str {
        "market_maker"
    }

    fn start(&mut self, ctx: &mut Context<'_>) -> Result<(), AgentError> {
        ctx.schedule_wakeup(ctx.now() + self.params.wake_interval_ns)
            .map_err(fault)
    }

    fn receive(&mut self, ctx: &mut Context<'_>, msg: &Message) -> Result<(), AgentError> {
        match &msg.payload {
            Payload::WakeUp => {
                ctx.send_to_exchange(Payload::DepthQuery { levels: 1 });
                ctx.schedule_wakeup(ctx.now() + self.params.wake_interval_ns)
                    .map_err(fault)
            }
            Payload::DepthReply { depth, .. } => {
                let quotes = Quotes {
                    bid: depth.bids.first().copied(),
                    ask: depth.asks.first().copied(),
                };
                let ladder = mm_decide(&quotes, &self.params, &mut self.rng);
                if ladder.is_empty() {
                    return Ok(());
                }
                for old in std::mem::take(&mut self.resting) {
                    ctx.send_to_exchange(Payload::Cancel { order_id: old });
                }
                for intent in ladder {
                    let order_id = self.ids.next_id();
                    ctx.send_to_exchange(Payload::LimitOrder {
                        order_id,
                        side: intent.side,
                        price: intent.price,
                        size: intent.size,
                    });
                    self.resting.insert(order_id);
                }
                Ok(())
            }
            &Payload::FillNotice {
                order_id,
                remaining: 0,
                ..
            } => {
                self.resting.remove(&order_id);
                Ok(())
            }
            _ => Ok(()),
        }
    }
}
