//! Deliberately simple reference book: a flat list of resting orders,
//! scanned in full for every match. Slow, but easy to check by eye.

use lobsim::types::{Nanos, OrderId, Price, Qty, Side};

#[derive(Debug, Clone)]
pub struct Resting {
    pub order_id: OrderId,
    pub side: Side,
    pub price: Price,
    pub size: Qty,
    pub timestamp: Nanos,
}

/// (maker, taker, price, size)
pub type NaiveFill = (OrderId, OrderId, Price, Qty);

#[derive(Debug, Default)]
pub struct NaiveBook {
    pub resting: Vec<Resting>,
}

impl NaiveBook {
    /// Index of the resting order the next share of an incoming `side`
    /// order should trade against, honouring an optional limit.
    fn best_counterparty(&self, side: Side, limit: Option<Price>) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, o) in self.resting.iter().enumerate() {
            if o.side == side {
                continue;
            }
            let ok = match (side, limit) {
                (_, None) => true,
                (Side::Buy, Some(l)) => o.price <= l,
                (Side::Sell, Some(l)) => o.price >= l,
            };
            if !ok {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(j) => {
                    let b = &self.resting[j];
                    let better_price = match side {
                        Side::Buy => o.price < b.price,
                        Side::Sell => o.price > b.price,
                    };
                    let earlier = o.price == b.price && (o.timestamp, o.order_id) < (b.timestamp, b.order_id);
                    if better_price || earlier {
                        Some(i)
                    } else {
                        Some(j)
                    }
                }
            };
        }
        best
    }

    fn cross(&mut self, taker: OrderId, side: Side, mut size: Qty, limit: Option<Price>) -> (Vec<NaiveFill>, Qty) {
        let mut fills = Vec::new();
        while size > 0 {
            let Some(i) = self.best_counterparty(side, limit) else { break };
            let maker = &mut self.resting[i];
            let q = maker.size.min(size);
            fills.push((maker.order_id, taker, maker.price, q));
            maker.size -= q;
            size -= q;
            if maker.size == 0 {
                self.resting.remove(i);
            }
        }
        (fills, size)
    }

    pub fn submit_limit(&mut self, order_id: OrderId, side: Side, price: Price, size: Qty, ts: Nanos) -> Vec<NaiveFill> {
        let (fills, left) = self.cross(order_id, side, size, Some(price));
        if left > 0 {
            self.resting.push(Resting {
                order_id,
                side,
                price,
                size: left,
                timestamp: ts,
            });
        }
        fills
    }

    /// Returns the fills and the discarded remainder.
    pub fn submit_market(&mut self, order_id: OrderId, side: Side, size: Qty) -> (Vec<NaiveFill>, Qty) {
        self.cross(order_id, side, size, None)
    }

    pub fn cancel(&mut self, order_id: OrderId) -> Option<Qty> {
        let i = self.resting.iter().position(|o| o.order_id == order_id)?;
        Some(self.resting.remove(i).size)
    }

    pub fn best(&self, side: Side) -> Option<Price> {
        let prices = self.resting.iter().filter(|o| o.side == side).map(|o| o.price);
        match side {
            Side::Buy => prices.max(),
            Side::Sell => prices.min(),
        }
    }

    pub fn resting_size(&self) -> Qty {
        self.resting.iter().map(|o| o.size).sum()
    }
}
