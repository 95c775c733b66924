//! Momentum agent comparing short and long moving averages of the mid.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fault, uniform_size, OrderIds};
use crate::kernel::{agent_rng, Agent, AgentError, Context, Message, Payload};
use crate::types::{AgentId, Nanos, OrderId, Qty, Side, NANOS_PER_SEC};

fn default_short() -> usize {
    20
}
fn default_long() -> usize {
    50
}
fn default_wake() -> Nanos {
    NANOS_PER_SEC
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentumParams {
    #[serde(default = "default_short")]
    pub short_window: usize,
    #[serde(default = "default_long")]
    pub long_window: usize,
    pub size_min: Qty,
    pub size_max: Qty,
    #[serde(default = "default_wake")]
    pub wake_interval_ns: Nanos,
    /// Submit a limit at the opposite quote instead of a market order.
    #[serde(default = "default_true")]
    pub marketable_limit: bool,
}

impl MomentumParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.short_window == 0 || self.short_window >= self.long_window {
            return Err("need 0 < short_window < long_window".into());
        }
        if self.size_min < 1 || self.size_min > self.size_max {
            return Err("need 1 <= size_min <= size_max".into());
        }
        if self.wake_interval_ns == 0 {
            return Err("wake_interval_ns must be positive".into());
        }
        Ok(())
    }
}

fn tail_mean(xs: &[f64], n: usize) -> f64 {
    let tail = &xs[xs.len() - n..];
    tail.iter().sum::<f64>() / n as f64
}

/// BUY when the short mean exceeds the long mean, SELL otherwise; `None`
/// until `long` observations exist.
pub fn momentum_decide(mids: &[f64], short: usize, long: usize) -> Option<Side> {
    if mids.len() < long {
        return None;
    }
    if tail_mean(mids, short) > tail_mean(mids, long) {
        Some(Side::Buy)
    } else {
        Some(Side::Sell)
    }
}

pub struct MomentumAgent {
    params: MomentumParams,
    rng: ChaCha8Rng,
    ids: OrderIds,
    mids: VecDeque<f64>,
    resting: Option<OrderId>,
}

impl MomentumAgent {
    pub fn new(agent_id: AgentId, params: MomentumParams, seed: u64) -> Self {
        MomentumAgent {
            mids: VecDeque::with_capacity(params.long_window + 1),
            params,
            rng: agent_rng(seed, agent_id),
            ids: OrderIds::new(agent_id),
            resting: None,
        }
    }
}

impl Agent for MomentumAgent {
    fn kind(&self) -> &'static str {
        "momentum"
    }

    fn start(&mut self, ctx: &mut Context<'_>) -> Result<(), AgentError> {
        // Random phase so that a population of these does not fire in lockstep.
        let phase = self.rng.random_range(0..self.params.wake_interval_ns);
        ctx.schedule_wakeup(ctx.now() + 1 + phase).map_err(fault)
    }

    fn receive(&mut self, ctx: &mut Context<'_>, msg: &Message) -> Result<(), AgentError> {
        match &msg.payload {
            Payload::WakeUp => {
                ctx.send_to_exchange(Payload::DepthQuery { levels: 1 });
                ctx.schedule_wakeup(ctx.now() + self.params.wake_interval_ns)
                    .map_err(fault)
            }
            Payload::DepthReply { depth, .. } => {
                let (Some(&(bid, _)), Some(&(ask, _))) = (depth.bids.first(), depth.asks.first()) else {
                    return Ok(());
                };
                self.mids.push_back((bid + ask) as f64 / 2.0);
                if self.mids.len() > self.params.long_window {
                    self.mids.pop_front();
                }
                let mids = self.mids.make_contiguous();
                let Some(side) = momentum_decide(mids, self.params.short_window, self.params.long_window) else {
                    return Ok(());
                };
                if let Some(old) = self.resting.take() {
                    ctx.send_to_exchange(Payload::Cancel { order_id: old });
                }
                let order_id = self.ids.next_id();
                let size = uniform_size(&mut self.rng, self.params.size_min, self.params.size_max);
                if self.params.marketable_limit {
                    let price = if side == Side::Buy { ask } else { bid };
                    ctx.send_to_exchange(Payload::LimitOrder {
                        order_id,
                        side,
                        price,
                        size,
                    });
                    self.resting = Some(order_id);
                } else {
                    ctx.send_to_exchange(Payload::MarketOrder { order_id, side, size });
                }
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
