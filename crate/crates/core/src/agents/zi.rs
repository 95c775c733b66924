//! Zero-intelligence agent.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{fault, uniform_size, LimitIntent, OrderIds};
use crate::kernel::{agent_rng, Agent, AgentError, Context, Message, Payload};
use crate::types::{AgentId, Nanos, OrderId, Price, Qty, Side, NANOS_PER_SEC};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZiParams {
    /// Expected arrivals per second.
    pub arrival_rate: f64,
    /// Variance of the fundamental observation noise, cents squared.
    pub observation_variance: f64,
    pub surplus_min: Price,
    pub surplus_max: Price,
    pub size_min: Qty,
    pub size_max: Qty,
}

impl ZiParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.arrival_rate > 0.0 && self.arrival_rate.is_finite()) {
            return Err("arrival_rate must be positive".into());
        }
        if self.observation_variance < 0.0 {
            return Err("observation_variance must be non-negative".into());
        }
        if self.surplus_min < 0 || self.surplus_min > self.surplus_max {
            return Err("need 0 <= surplus_min <= surplus_max".into());
        }
        if self.size_min < 1 || self.size_min > self.size_max {
            return Err("need 1 <= size_min <= size_max".into());
        }
        Ok(())
    }
}

/// Exponential inter-arrival gap in nanoseconds.
pub fn poisson_gap_ns(rate_per_sec: f64, rng: &mut ChaCha8Rng) -> Nanos {
    let exp = Exp::new(rate_per_sec).expect("rate validated positive");
    let secs: f64 = exp.sample(rng);
    (secs * NANOS_PER_SEC as f64).round() as Nanos
}

/// Noisy observation of the fundamental, rounded to cents.
pub fn observe(fundamental: Price, variance: f64, rng: &mut ChaCha8Rng) -> Price {
    if variance <= 0.0 {
        return fundamental;
    }
    let z: f64 = StandardNormal.sample(rng);
    (fundamental as f64 + z * variance.sqrt()).round() as Price
}

/// Limit order `surplus` cents on the favourable side of `valuation`.
pub fn zi_order(side: Side, valuation: Price, params: &ZiParams, rng: &mut ChaCha8Rng) -> LimitIntent {
    let surplus = if params.surplus_min >= params.surplus_max {
        params.surplus_min
    } else {
        rng.random_range(params.surplus_min..=params.surplus_max)
    };
    let price = match side {
        Side::Buy => valuation - surplus,
        Side::Sell => valuation + surplus,
    };
    LimitIntent {
        side,
        price: price.max(1),
        size: uniform_size(rng, params.size_min, params.size_max),
    }
}

/// Fair-coin side, uniform surplus and size. Ignores the book entirely.
pub fn zi_decide(observation: Price, params: &ZiParams, rng: &mut ChaCha8Rng) -> LimitIntent {
    let side = if rng.random_bool(0.5) { Side::Buy } else { Side::Sell };
    zi_order(side, observation, params, rng)
}

pub struct ZiAgent {
    params: ZiParams,
    rng: ChaCha8Rng,
    ids: OrderIds,
    resting: Option<OrderId>,
}

impl ZiAgent {
    pub fn new(agent_id: AgentId, params: ZiParams, seed: u64) -> Self {
        ZiAgent {
            params,
            rng: agent_rng(seed, agent_id),
            ids: OrderIds::new(agent_id),
            resting: None,
        }
    }
}

impl Agent for ZiAgent {
    fn kind(&self) -> &'static str {
        "zi"
    }

    fn start(&mut self, ctx: &mut Context<'_>) -> Result<(), AgentError> {
        let first = ctx.now() + poisson_gap_ns(self.params.arrival_rate, &mut self.rng);
        ctx.schedule_wakeup(first).map_err(fault)
    }

    fn receive(&mut self, ctx: &mut Context<'_>, msg: &Message) -> Result<(), AgentError> {
        match msg.payload {
            Payload::WakeUp => {
                let obs = observe(ctx.fundamental(), self.params.observation_variance, &mut self.rng);
                let intent = zi_decide(obs, &self.params, &mut self.rng);
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
                let next = ctx.now() + poisson_gap_ns(self.params.arrival_rate, &mut self.rng);
                ctx.schedule_wakeup(next).map_err(fault)
            }
            Payload::FillNotice {
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

#[cfg(test)]
mod tests {
    use super::*;

    fn params(rmin: Price, rmax: Price) -> ZiParams {
        ZiParams {
            arrival_rate: 1.0,
            observation_variance: 0.0,
            surplus_min: rmin,
            surplus_max: rmax,
            size_min: 1,
            size_max: 10,
        }
    }

    #[test]
    fn buy_and_sell_prices() {
        let mut rng = agent_rng(1, 1);
        let p = params(10, 10);
        assert_eq!(zi_order(Side::Buy, 10_000, &p, &mut rng).price, 9_990);
        assert_eq!(zi_order(Side::Sell, 10_000, &p, &mut rng).price, 10_010);
    }

    #[test]
    fn zero_surplus_quotes_the_observation() {
        let mut rng = agent_rng(1, 1);
        let p = params(0, 0);
        for _ in 0..50 {
            assert_eq!(zi_decide(10_000, &p, &mut rng).price, 10_000);
        }
    }

    #[test]
    fn price_clamped_to_one_cent() {
        let mut rng = agent_rng(1, 1);
        assert_eq!(zi_order(Side::Buy, 5, &params(10, 10), &mut rng).price, 1);
    }

    #[test]
    fn sizes_and_sides_cover_their_ranges() {
        let mut rng = agent_rng(9, 2);
        let p = params(0, 5);
        let draws: Vec<_> = (0..2_000).map(|_| zi_decide(10_000, &p, &mut rng)).collect();
        assert!(draws.iter().all(|d| (1..=10).contains(&d.size)));
        assert!(draws.iter().any(|d| d.size == 1) && draws.iter().any(|d| d.size == 10));
        let buys = draws.iter().filter(|d| d.side == Side::Buy).count();
        assert!((900..1_100).contains(&buys));
    }

    #[test]
    fn parameter_validation() {
        assert!(params(0, 5).validate().is_ok());
        assert!(params(6, 5).validate().is_err());
        let mut p = params(0, 5);
        p.arrival_rate = 0.0;
        assert!(p.validate().is_err());
        p.arrival_rate = 1.0;
        p.size_min = 0;
        assert!(p.validate().is_err());
    }
}
