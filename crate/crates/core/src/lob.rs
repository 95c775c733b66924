//! Limit order book with price-then-FIFO matching.
//!
//! Bids and asks are kept as ordered maps from price to a [`PriceLevel`],
//! each holding a FIFO queue of resting orders. Incoming orders cross the
//! opposite side from the best price outward and always trade at the
//! resting (maker) order's price. Empty levels are removed eagerly, so the
//! best quote on each side is simply the first/last key of its map.
//!
//! Besides the matching operations the book exposes two replay primitives,
//! [`LimitOrderBook::rest`] and [`LimitOrderBook::reduce`], which apply an
//! already-matched event stream literally instead of re-running the match.

use std::collections::{BTreeMap, HashMap, VecDeque};

use thiserror::Error;

use crate::types::{AgentId, HalfCents, Nanos, OrderId, Price, Qty, Side};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Order {
    pub order_id: OrderId,
    pub agent_id: AgentId,
    pub side: Side,
    /// `None` for market orders.
    pub price: Option<Price>,
    pub size: Qty,
    pub timestamp: Nanos,
}

impl Order {
    pub fn limit(
        order_id: OrderId,
        agent_id: AgentId,
        side: Side,
        price: Price,
        size: Qty,
        timestamp: Nanos,
    ) -> Self {
        Order {
            order_id,
            agent_id,
            side,
            price: Some(price),
            size,
            timestamp,
        }
    }

    fn arrival_key(&self) -> (Nanos, OrderId) {
        (self.timestamp, self.order_id)
    }
}

/// One execution between a resting order and an incoming order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fill {
    pub maker_order_id: OrderId,
    pub taker_order_id: OrderId,
    pub maker_agent_id: AgentId,
    pub taker_agent_id: AgentId,
    /// Side of the resting order; the aggressor is on the opposite side.
    pub maker_side: Side,
    pub price: Price,
    pub size: Qty,
    pub timestamp: Nanos,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MarketOutcome {
    pub fills: Vec<Fill>,
    /// Size that could not be matched and was discarded.
    pub unfilled: Qty,
    /// Set when the opposite side ran out before the order was filled.
    pub liquidity_exhausted: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BookError {
    #[error("order {0} is already resting")]
    DuplicateOrderId(OrderId),
    #[error("order size must be positive")]
    InvalidSize,
    #[error("limit price must be positive, got {0}")]
    InvalidPrice(Price),
    #[error("limit order {0} has no price")]
    MissingPrice(OrderId),
    #[error("resting order {0} would cross the book")]
    WouldCross(OrderId),
    #[error("order {0} is not resting")]
    UnknownOrder(OrderId),
    #[error("execution of {requested} exceeds remaining {remaining} on order {order_id}")]
    Overfill {
        order_id: OrderId,
        requested: Qty,
        remaining: Qty,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceLevel {
    pub price: Price,
    queue: VecDeque<Order>,
    total: Qty,
}

impl PriceLevel {
    fn new(price: Price) -> Self {
        PriceLevel {
            price,
            queue: VecDeque::new(),
            total: 0,
        }
    }

    pub fn orders(&self) -> impl Iterator<Item = &Order> {
        self.queue.iter()
    }

    pub fn total(&self) -> Qty {
        self.total
    }

    fn push(&mut self, order: Order) {
        self.total += order.size;
        // Arrival order is (timestamp, order_id); the common case appends.
        let key = order.arrival_key();
        let pos = self
            .queue
            .iter()
            .rposition(|o| o.arrival_key() < key)
            .map_or(0, |p| p + 1);
        self.queue.insert(pos, order);
    }

    fn remove(&mut self, order_id: OrderId) -> Option<Order> {
        let pos = self.queue.iter().position(|o| o.order_id == order_id)?;
        let order = self.queue.remove(pos)?;
        self.total -= order.size;
        Some(order)
    }
}

/// Best bid and ask with the sizes resting there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Quotes {
    pub bid: Option<(Price, Qty)>,
    pub ask: Option<(Price, Qty)>,
}

impl Quotes {
    pub fn mid(&self) -> Option<HalfCents> {
        Some(HalfCents::from_quotes(self.bid?.0, self.ask?.0))
    }

    pub fn spread(&self) -> Option<Price> {
        Some(self.ask?.0 - self.bid?.0)
    }

    pub fn is_two_sided(&self) -> bool {
        self.bid.is_some() && self.ask.is_some()
    }
}

/// Aggregated ladder, best level first on each side.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Depth {
    pub bids: Vec<(Price, Qty)>,
    pub asks: Vec<(Price, Qty)>,
}

#[derive(Debug, Clone, Default)]
pub struct LimitOrderBook {
    bids: BTreeMap<Price, PriceLevel>,
    asks: BTreeMap<Price, PriceLevel>,
    index: HashMap<OrderId, (Side, Price)>,
}

impl LimitOrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Matches a limit order against the opposite side and rests any residual.
    pub fn submit_limit(&mut self, order: Order) -> Result<Vec<Fill>, BookError> {
        let price = order.price.ok_or(BookError::MissingPrice(order.order_id))?;
        if order.size == 0 {
            return Err(BookError::InvalidSize);
        }
        if price <= 0 {
            return Err(BookError::InvalidPrice(price));
        }
        if self.index.contains_key(&order.order_id) {
            return Err(BookError::DuplicateOrderId(order.order_id));
        }
        let mut residual = order;
        let fills = self.match_incoming(&mut residual, Some(price));
        if residual.size > 0 {
            self.insert(residual);
        }
        Ok(fills)
    }

    /// Matches a market order; any unmatched remainder is discarded.
    pub fn submit_market(
        &mut self,
        side: Side,
        size: Qty,
        timestamp: Nanos,
        order_id: OrderId,
        agent_id: AgentId,
    ) -> Result<MarketOutcome, BookError> {
        if size == 0 {
            return Err(BookError::InvalidSize);
        }
        let mut order = Order {
            order_id,
            agent_id,
            side,
            price: None,
            size,
            timestamp,
        };
        let fills = self.match_incoming(&mut order, None);
        Ok(MarketOutcome {
            fills,
            unfilled: order.size,
            liquidity_exhausted: order.size > 0,
        })
    }

    /// Removes a resting order and returns its remaining size, or `None`
    /// when the order is unknown or already gone.
    pub fn cancel(&mut self, order_id: OrderId) -> Option<Qty> {
        self.remove(order_id).map(|o| o.size)
    }

    /// Removes a resting order, returning it.
    pub fn remove(&mut self, order_id: OrderId) -> Option<Order> {
        let (side, price) = self.index.remove(&order_id)?;
        let levels = self.side_mut(side);
        let level = levels.get_mut(&price).expect("indexed level exists");
        let order = level.remove(order_id).expect("indexed order exists");
        if level.queue.is_empty() {
            levels.remove(&price);
        }
        Some(order)
    }

    /// Rests an order without matching. Fails if it would cross the book.
    pub fn rest(&mut self, order: Order) -> Result<(), BookError> {
        let price = order.price.ok_or(BookError::MissingPrice(order.order_id))?;
        if order.size == 0 {
            return Err(BookError::InvalidSize);
        }
        if self.index.contains_key(&order.order_id) {
            return Err(BookError::DuplicateOrderId(order.order_id));
        }
        let crosses = match order.side {
            Side::Buy => self.best_ask().is_some_and(|(a, _)| price >= a),
            Side::Sell => self.best_bid().is_some_and(|(b, _)| price <= b),
        };
        if crosses {
            return Err(BookError::WouldCross(order.order_id));
        }
        self.insert(order);
        Ok(())
    }

    /// Takes `size` shares off a resting order as an externally reported
    /// execution. Returns the size left on the order.
    pub fn reduce(&mut self, order_id: OrderId, size: Qty) -> Result<Qty, BookError> {
        let &(side, price) = self
            .index
            .get(&order_id)
            .ok_or(BookError::UnknownOrder(order_id))?;
        let levels = self.side_mut(side);
        let level = levels.get_mut(&price).expect("indexed level exists");
        let order = level
            .queue
            .iter_mut()
            .find(|o| o.order_id == order_id)
            .expect("indexed order exists");
        if size > order.size {
            return Err(BookError::Overfill {
                order_id,
                requested: size,
                remaining: order.size,
            });
        }
        order.size -= size;
        level.total -= size;
        let left = order.size;
        if left == 0 {
            self.remove(order_id);
        }
        Ok(left)
    }

    pub fn best_bid(&self) -> Option<(Price, Qty)> {
        self.bids.values().next_back().map(|l| (l.price, l.total))
    }

    pub fn best_ask(&self) -> Option<(Price, Qty)> {
        self.asks.values().next().map(|l| (l.price, l.total))
    }

    pub fn quotes(&self) -> Quotes {
        Quotes {
            bid: self.best_bid(),
            ask: self.best_ask(),
        }
    }

    pub fn mid(&self) -> Option<HalfCents> {
        self.quotes().mid()
    }

    pub fn depth(&self, n_levels: usize) -> Depth {
        let n = n_levels.max(1);
        Depth {
            bids: self
                .bids
                .values()
                .rev()
                .take(n)
                .map(|l| (l.price, l.total))
                .collect(),
            asks: self
                .asks
                .values()
                .take(n)
                .map(|l| (l.price, l.total))
                .collect(),
        }
    }

    pub fn order(&self, order_id: OrderId) -> Option<&Order> {
        let &(side, price) = self.index.get(&order_id)?;
        self.side(side)
            .get(&price)?
            .queue
            .iter()
            .find(|o| o.order_id == order_id)
    }

    pub fn contains(&self, order_id: OrderId) -> bool {
        self.index.contains_key(&order_id)
    }

    /// Levels best-first.
    pub fn levels(&self, side: Side) -> Box<dyn Iterator<Item = &PriceLevel> + '_> {
        match side {
            Side::Buy => Box::new(self.bids.values().rev()),
            Side::Sell => Box::new(self.asks.values()),
        }
    }

    pub fn resting_orders(&self) -> usize {
        self.index.len()
    }

    pub fn resting_size(&self) -> Qty {
        self.bids.values().chain(self.asks.values()).map(|l| l.total).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Structural check used by tests: uncrossed, no empty levels, consistent index.
    pub fn check_invariants(&self) -> Result<(), String> {
        if let (Some((b, _)), Some((a, _))) = (self.best_bid(), self.best_ask()) {
            if b >= a {
                return Err(format!("crossed book: bid {b} >= ask {a}"));
            }
        }
        let mut count = 0;
        for (side, levels) in [(Side::Buy, &self.bids), (Side::Sell, &self.asks)] {
            for (&price, level) in levels {
                if level.queue.is_empty() {
                    return Err(format!("empty level at {price}"));
                }
                let total: Qty = level.queue.iter().map(|o| o.size).sum();
                if total != level.total {
                    return Err(format!("level {price} total mismatch"));
                }
                for w in level.queue.iter().collect::<Vec<_>>().windows(2) {
                    if w[0].arrival_key() >= w[1].arrival_key() {
                        return Err(format!("level {price} out of arrival order"));
                    }
                }
                for o in &level.queue {
                    count += 1;
                    if o.side != side || o.price != Some(price) || o.size == 0 {
                        return Err(format!("order {} misfiled", o.order_id));
                    }
                    if self.index.get(&o.order_id) != Some(&(side, price)) {
                        return Err(format!("order {} not indexed", o.order_id));
                    }
                }
            }
        }
        if count != self.index.len() {
            return Err("index size mismatch".into());
        }
        Ok(())
    }

    fn side(&self, side: Side) -> &BTreeMap<Price, PriceLevel> {
        match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        }
    }

    fn side_mut(&mut self, side: Side) -> &mut BTreeMap<Price, PriceLevel> {
        match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        }
    }

    fn insert(&mut self, order: Order) {
        let price = order.price.expect("resting orders carry a price");
        self.index.insert(order.order_id, (order.side, price));
        self.side_mut(order.side)
            .entry(price)
            .or_insert_with(|| PriceLevel::new(price))
            .push(order);
    }

    /// Crosses `taker` against the opposite side while prices are acceptable.
    fn match_incoming(&mut self, taker: &mut Order, limit: Option<Price>) -> Vec<Fill> {
        let mut fills = Vec::new();
        let maker_side = taker.side.opposite();
        while taker.size > 0 {
            let best = match maker_side {
                Side::Sell => self.asks.first_entry(),
                Side::Buy => self.bids.last_entry(),
            };
            let Some(mut entry) = best else { break };
            let price = *entry.key();
            let acceptable = match (taker.side, limit) {
                (_, None) => true,
                (Side::Buy, Some(l)) => price <= l,
                (Side::Sell, Some(l)) => price >= l,
            };
            if !acceptable {
                break;
            }
            let level = entry.get_mut();
            while taker.size > 0 {
                let Some(maker) = level.queue.front_mut() else { break };
                let qty = maker.size.min(taker.size);
                fills.push(Fill {
                    maker_order_id: maker.order_id,
                    taker_order_id: taker.order_id,
                    maker_agent_id: maker.agent_id,
                    taker_agent_id: taker.agent_id,
                    maker_side,
                    price,
                    size: qty,
                    timestamp: taker.timestamp,
                });
                maker.size -= qty;
                taker.size -= qty;
                level.total -= qty;
                if maker.size == 0 {
                    let done = level.queue.pop_front().expect("front exists");
                    self.index.remove(&done.order_id);
                }
            }
            if level.queue.is_empty() {
                entry.remove();
            }
        }
        fills
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lim(id: OrderId, side: Side, price: Price, size: Qty, ts: Nanos) -> Order {
        Order::limit(id, 1, side, price, size, ts)
    }

    #[test]
    fn price_improvement_executes_at_resting_price() {
        let mut book = LimitOrderBook::new();
        book.submit_limit(lim(1, Side::Sell, 10001, 100, 0)).unwrap();
        let fills = book.submit_limit(lim(2, Side::Buy, 10002, 50, 1)).unwrap();
        assert_eq!(fills.len(), 1);
        assert_eq!((fills[0].price, fills[0].size), (10001, 50));
        assert!(!book.contains(2));
        assert_eq!(book.best_ask(), Some((10001, 50)));
    }

    #[test]
    fn fifo_within_level() {
        let mut book = LimitOrderBook::new();
        book.submit_limit(lim(1, Side::Sell, 10001, 10, 1)).unwrap();
        book.submit_limit(lim(2, Side::Sell, 10001, 20, 2)).unwrap();
        let fills = book.submit_limit(lim(3, Side::Buy, 10001, 15, 3)).unwrap();
        let got: Vec<_> = fills.iter().map(|f| (f.maker_order_id, f.size)).collect();
        assert_eq!(got, vec![(1, 10), (2, 5)]);
        assert_eq!(book.order(2).unwrap().size, 15);
    }

    #[test]
    fn same_timestamp_ties_break_by_order_id() {
        let mut book = LimitOrderBook::new();
        book.submit_limit(lim(9, Side::Sell, 10001, 10, 5)).unwrap();
        book.submit_limit(lim(4, Side::Sell, 10001, 10, 5)).unwrap();
        let fills = book.submit_limit(lim(20, Side::Buy, 10001, 10, 6)).unwrap();
        assert_eq!(fills[0].maker_order_id, 4);
        book.check_invariants().unwrap();
    }

    #[test]
    fn resting_order_sets_best_bid() {
        let mut book = LimitOrderBook::new();
        assert!(book.submit_limit(lim(1, Side::Buy, 10000, 100, 0)).unwrap().is_empty());
        assert_eq!(book.best_bid(), Some((10000, 100)));
        assert_eq!(book.best_ask(), None);
        assert_eq!(book.mid(), None);
    }

    #[test]
    fn limit_validation() {
        let mut book = LimitOrderBook::new();
        book.submit_limit(lim(1, Side::Buy, 10000, 100, 0)).unwrap();
        assert_eq!(
            book.submit_limit(lim(1, Side::Buy, 9999, 5, 1)),
            Err(BookError::DuplicateOrderId(1))
        );
        assert_eq!(book.submit_limit(lim(2, Side::Buy, 9999, 0, 1)), Err(BookError::InvalidSize));
        assert_eq!(book.submit_limit(lim(3, Side::Buy, 0, 5, 1)), Err(BookError::InvalidPrice(0)));
    }

    #[test]
    fn market_orders_walk_the_book() {
        let mut book = LimitOrderBook::new();
        book.submit_limit(lim(1, Side::Sell, 10001, 100, 0)).unwrap();
        let out = book.submit_market(Side::Buy, 50, 1, 2, 7).unwrap();
        assert_eq!(out.fills.len(), 1);
        assert_eq!((out.fills[0].price, out.fills[0].size), (10001, 50));
        assert!(!out.liquidity_exhausted);

        let mut book = LimitOrderBook::new();
        book.submit_limit(lim(1, Side::Sell, 10001, 30, 0)).unwrap();
        book.submit_limit(lim(2, Side::Sell, 10002, 30, 0)).unwrap();
        let out = book.submit_market(Side::Buy, 50, 1, 3, 7).unwrap();
        let got: Vec<_> = out.fills.iter().map(|f| (f.price, f.size)).collect();
        assert_eq!(got, vec![(10001, 30), (10002, 20)]);
    }

    #[test]
    fn market_order_on_empty_side() {
        let mut book = LimitOrderBook::new();
        book.submit_limit(lim(1, Side::Buy, 10000, 30, 0)).unwrap();
        let out = book.submit_market(Side::Buy, 10, 1, 2, 7).unwrap();
        assert!(out.fills.is_empty());
        assert!(out.liquidity_exhausted);
        assert_eq!(out.unfilled, 10);
        assert!(!book.contains(2));
        assert_eq!(book.submit_market(Side::Buy, 0, 1, 3, 7), Err(BookError::InvalidSize));
    }

    #[test]
    fn cancel_semantics() {
        let mut book = LimitOrderBook::new();
        book.submit_limit(lim(1, Side::Buy, 10000, 100, 0)).unwrap();
        assert_eq!(book.cancel(1), Some(100));
        assert!(book.best_bid().is_none());
        assert!(book.is_empty());

        book.submit_limit(lim(2, Side::Buy, 10000, 100, 1)).unwrap();
        book.submit_limit(lim(3, Side::Sell, 10000, 40, 2)).unwrap();
        assert_eq!(book.cancel(2), Some(60));
        assert_eq!(book.cancel(2), None);
        assert_eq!(book.cancel(12345), None);
    }

    #[test]
    fn cancel_keeps_fifo_of_remaining() {
        let mut book = LimitOrderBook::new();
        for id in 1..=4 {
            book.submit_limit(lim(id, Side::Sell, 10001, 10, id)).unwrap();
        }
        book.cancel(2);
        let fills = book.submit_limit(lim(10, Side::Buy, 10001, 30, 10)).unwrap();
        let makers: Vec<_> = fills.iter().map(|f| f.maker_order_id).collect();
        assert_eq!(makers, vec![1, 3, 4]);
    }

    #[test]
    fn quotes_and_mid() {
        let mut book = LimitOrderBook::new();
        book.submit_limit(lim(1, Side::Buy, 10000, 100, 0)).unwrap();
        book.submit_limit(lim(2, Side::Sell, 10002, 50, 0)).unwrap();
        let q = book.quotes();
        assert_eq!(q.bid, Some((10000, 100)));
        assert_eq!(q.ask, Some((10002, 50)));
        assert_eq!(book.mid().unwrap().cents(), 10001.0);
        book.submit_limit(lim(3, Side::Sell, 10001, 5, 0)).unwrap();
        assert_eq!(book.mid().unwrap().cents(), 10000.5);
    }

    #[test]
    fn depth_aggregates_levels() {
        let mut book = LimitOrderBook::new();
        book.submit_limit(lim(1, Side::Sell, 10001, 30, 0)).unwrap();
        book.submit_limit(lim(2, Side::Sell, 10001, 20, 0)).unwrap();
        book.submit_limit(lim(3, Side::Sell, 10002, 10, 0)).unwrap();
        let d = book.depth(2);
        assert_eq!(d.asks, vec![(10001, 50), (10002, 10)]);
        assert!(d.bids.is_empty());
        assert_eq!(book.depth(10).asks.len(), 2);
    }

    #[test]
    fn replay_primitives() {
        let mut book = LimitOrderBook::new();
        book.rest(lim(1, Side::Sell, 10001, 30, 0)).unwrap();
        assert_eq!(book.rest(lim(2, Side::Buy, 10001, 5, 0)), Err(BookError::WouldCross(2)));
        assert_eq!(book.reduce(1, 10).unwrap(), 20);
        assert!(matches!(book.reduce(1, 25), Err(BookError::Overfill { .. })));
        assert_eq!(book.reduce(1, 20).unwrap(), 0);
        assert!(book.is_empty());
        assert_eq!(book.reduce(1, 1), Err(BookError::UnknownOrder(1)));
    }
}
