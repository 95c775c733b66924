//! Literal replay of an event trace through the order book.
//!
//! Executions are applied as reported (`EXECUTE` rows reduce the referenced
//! resting order) rather than re-matched, so ingested data reconstructs the
//! book it describes. A submission is held as the pending aggressor until
//! the next non-execution event; whatever the following executions did not
//! consume then rests (limit) or is discarded (market).

use crate::ingest::{EventTrace, EventType, OrderEvent};
use crate::lob::{BookError, LimitOrderBook, Order, Quotes};
use crate::types::{Nanos, Qty};

#[derive(Debug, Clone)]
struct Pending {
    order: Order,
    is_limit: bool,
}

#[derive(Debug, Default)]
pub struct Replay {
    book: LimitOrderBook,
    pending: Option<Pending>,
    /// Events that did not apply cleanly (unknown ids, crossing rests).
    pub inconsistencies: usize,
}

impl Replay {
    pub fn new() -> Self {
        Self::default()
    }

    /// Book state with any pending aggressor settled.
    pub fn book(&mut self) -> &LimitOrderBook {
        self.settle();
        &self.book
    }

    pub fn quotes(&mut self) -> Quotes {
        self.book().quotes()
    }

    /// Size of the pending aggressor not yet matched, if any.
    pub fn pending_remaining(&self) -> Option<Qty> {
        self.pending.as_ref().map(|p| p.order.size)
    }

    pub fn apply(&mut self, ev: &OrderEvent) {
        if ev.event_type != EventType::Execute {
            self.settle();
        }
        match ev.event_type {
            EventType::SubmitLimit | EventType::SubmitMarket => {
                let Some(side) = ev.side else {
                    self.inconsistencies += 1;
                    return;
                };
                let is_limit = ev.event_type == EventType::SubmitLimit;
                self.pending = Some(Pending {
                    order: Order {
                        order_id: ev.order_id,
                        agent_id: ev.agent_id,
                        side,
                        price: is_limit.then_some(ev.price_cents),
                        size: ev.size,
                        timestamp: ev.timestamp_ns,
                    },
                    is_limit,
                });
            }
            EventType::Execute => {
                if self.book.reduce(ev.order_id, ev.size).is_err() {
                    self.inconsistencies += 1;
                }
                if let Some(p) = self.pending.as_mut() {
                    p.order.size = p.order.size.saturating_sub(ev.size);
                }
            }
            EventType::Cancel => {
                if self.book.cancel(ev.order_id).is_none() {
                    self.inconsistencies += 1;
                }
            }
            EventType::SessionOpen | EventType::SessionClose => {}
        }
    }

    /// Rests or discards the pending aggressor.
    pub fn settle(&mut self) {
        let Some(p) = self.pending.take() else { return };
        if !p.is_limit || p.order.size == 0 {
            return;
        }
        match self.book.rest(p.order.clone()) {
            Ok(()) => {}
            Err(BookError::WouldCross(_)) => {
                // The trace under-reported executions; let the engine match.
                self.inconsistencies += 1;
                let _ = self.book.submit_limit(p.order);
            }
            Err(_) => self.inconsistencies += 1,
        }
    }
}

/// Settled quotes after each distinct event timestamp.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuoteTimeline {
    pub times: Vec<Nanos>,
    pub quotes: Vec<Quotes>,
}

impl QuoteTimeline {
    pub fn from_trace(trace: &EventTrace) -> (Self, usize) {
        let mut replay = Replay::new();
        let mut tl = QuoteTimeline::default();
        let events = &trace.events;
        for (i, ev) in events.iter().enumerate() {
            replay.apply(ev);
            let last_at_time = events
                .get(i + 1)
                .is_none_or(|next| next.timestamp_ns != ev.timestamp_ns);
            if last_at_time {
                tl.push(ev.timestamp_ns, replay.quotes());
            }
        }
        (tl, replay.inconsistencies)
    }

    pub fn from_snapshots(snaps: &[crate::ingest::QuoteSnapshot]) -> Self {
        let mut tl = QuoteTimeline::default();
        for s in snaps {
            tl.push(
                s.timestamp_ns,
                Quotes {
                    bid: Some((s.bid, s.bid_size)),
                    ask: Some((s.ask, s.ask_size)),
                },
            );
        }
        tl
    }

    fn push(&mut self, t: Nanos, q: Quotes) {
        if self.times.last() == Some(&t) {
            *self.quotes.last_mut().expect("non-empty") = q;
        } else {
            self.times.push(t);
            self.quotes.push(q);
        }
    }

    /// Last quotes at or before `t`.
    pub fn at(&self, t: Nanos) -> Option<Quotes> {
        let idx = self.times.partition_point(|&x| x <= t);
        idx.checked_sub(1).map(|i| self.quotes[i])
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Side;

    #[test]
    fn replay_matches_reported_executions() {
        let trace = EventTrace::new(vec![
            OrderEvent::submit_limit(1, 1, 1, Side::Sell, 101, 10),
            OrderEvent::submit_limit(2, 2, 1, Side::Sell, 102, 10),
            OrderEvent::submit_limit(3, 3, 2, Side::Buy, 102, 15),
            OrderEvent::execute(3, 1, 1, Side::Sell, 101, 10),
            OrderEvent::execute(3, 2, 1, Side::Sell, 102, 5),
            OrderEvent::submit_limit(4, 4, 2, Side::Buy, 100, 7),
        ]);
        let mut r = Replay::new();
        for ev in &trace.events {
            r.apply(ev);
        }
        let q = r.quotes();
        assert_eq!(q.ask, Some((102, 5)));
        assert_eq!(q.bid, Some((100, 7)));
        assert_eq!(r.inconsistencies, 0);
    }

    #[test]
    fn partially_filled_aggressor_rests() {
        let mut r = Replay::new();
        r.apply(&OrderEvent::submit_limit(1, 1, 1, Side::Sell, 101, 10));
        r.apply(&OrderEvent::submit_limit(2, 2, 2, Side::Buy, 101, 25));
        r.apply(&OrderEvent::execute(2, 1, 1, Side::Sell, 101, 10));
        assert_eq!(r.pending_remaining(), Some(15));
        let q = r.quotes();
        assert_eq!(q.bid, Some((101, 15)));
        assert_eq!(q.ask, None);
    }

    #[test]
    fn timeline_lookup() {
        let trace = EventTrace::new(vec![
            OrderEvent::submit_limit(10, 1, 1, Side::Sell, 101, 10),
            OrderEvent::submit_limit(20, 2, 1, Side::Buy, 99, 10),
        ]);
        let (tl, bad) = QuoteTimeline::from_trace(&trace);
        assert_eq!(bad, 0);
        assert_eq!(tl.at(5), None);
        assert!(!tl.at(15).unwrap().is_two_sided());
        assert_eq!(tl.at(25).unwrap().mid().unwrap().cents(), 100.0);
    }
}
