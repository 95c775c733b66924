//! Background trading agents and the fundamental process that drives them.
//!
//! - [`zi::ZiAgent`]: zero-intelligence trader arriving as a Poisson process
//!   and quoting around a noisy fundamental observation.
//! - [`hbl::HblAgent`]: heuristic-belief-learning trader that picks the limit
//!   price maximizing expected surplus under a frequency-based transaction
//!   probability estimated from recent order flow.
//! - [`market_maker::MarketMakerAgent`]: periodic two-sided ladder.
//! - [`momentum::MomentumAgent`]: compares short and long mid-price means.

pub mod fundamental;
pub mod hbl;
pub mod market_maker;
pub mod momentum;
pub mod zi;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::kernel::AgentError;
use crate::types::{AgentId, OrderId, Price, Qty, Side};

pub use fundamental::FundamentalProcess;
pub use hbl::{hbl_belief, HblAgent, HblParams};
pub use market_maker::{mm_decide, MarketMakerAgent, MmParams};
pub use momentum::{momentum_decide, MomentumAgent, MomentumParams};
pub use zi::{zi_decide, ZiAgent, ZiParams};

/// A limit order an agent wants to place.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LimitIntent {
    pub side: Side,
    pub price: Price,
    pub size: Qty,
}

/// Per-agent order id allocator: the agent id occupies the high 32 bits, so
/// ids are unique across agents without coordination.
#[derive(Debug, Clone)]
pub struct OrderIds {
    agent_id: AgentId,
    next: u64,
}

impl OrderIds {
    pub fn new(agent_id: AgentId) -> Self {
        OrderIds { agent_id, next: 0 }
    }

    pub fn next_id(&mut self) -> OrderId {
        self.next += 1;
        ((self.agent_id as u64) << 32) | self.next
    }
}

/// Agent that owns an order id is recoverable from the id alone.
pub fn owner_of(order_id: OrderId) -> AgentId {
    (order_id >> 32) as AgentId
}

pub(crate) fn uniform_size(rng: &mut ChaCha8Rng, min: Qty, max: Qty) -> Qty {
    if min >= max {
        min
    } else {
        rng.random_range(min..=max)
    }
}

pub(crate) fn fault(e: impl std::fmt::Display) -> AgentError {
    AgentError(e.to_string())
}
