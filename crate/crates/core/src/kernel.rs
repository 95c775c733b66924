//! Deterministic discrete-event kernel.
//!
//! Time is integer nanoseconds since session open. Every interaction goes
//! through [`Message`]s held in a priority queue keyed by
//! `(deliver_at, sequence)`, so equal delivery times resolve in send order
//! and a run is a pure function of its configuration and seed.
//!
//! Agents receive a [`Context`] while handling a message. The context lets
//! them read the clock, observe the exogenous fundamental, send messages
//! and schedule wakeups; it deliberately exposes nothing about the book,
//! which lives inside the [`Exchange`] and is only reachable by messages.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agents::fundamental::FundamentalProcess;
use crate::ingest::{EventTrace, EventType, OrderEvent};
use crate::lob::{Depth, Fill, LimitOrderBook, Order};
use crate::types::{AgentId, Nanos, OrderId, Price, Qty, Side};

pub type SimTime = Nanos;

/// The exchange is always agent 0; trading agents are numbered from 1.
pub const EXCHANGE_ID: AgentId = 0;

/// Record of one limit submission as reported to belief-learning agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamRecord {
    pub side: Side,
    pub price: Price,
    /// True once any part of the order has traded.
    pub transacted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    LimitOrder {
        order_id: OrderId,
        side: Side,
        price: Price,
        size: Qty,
    },
    MarketOrder {
        order_id: OrderId,
        side: Side,
        size: Qty,
    },
    Cancel {
        order_id: OrderId,
    },
    DepthQuery {
        levels: usize,
    },
    DepthReply {
        depth: Depth,
        last_trade: Option<Price>,
    },
    FillNotice {
        order_id: OrderId,
        price: Price,
        size: Qty,
        /// Size still live on the order after this fill.
        remaining: Qty,
    },
    WakeUp,
    LastTradeQuery,
    LastTradeReply {
        price: Option<Price>,
    },
    OrderStreamQuery {
        len: usize,
    },
    OrderStreamReply {
        records: Vec<StreamRecord>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender: AgentId,
    pub recipient: AgentId,
    pub sent_at: SimTime,
    pub deliver_at: SimTime,
    pub payload: Payload,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("causality violation: agent {agent_id} scheduled t={at} at now={now}")]
    Causality {
        agent_id: AgentId,
        at: SimTime,
        now: SimTime,
    },
    #[error("agent {agent_id} failed at t={time}: {message}")]
    AgentFault {
        agent_id: AgentId,
        time: SimTime,
        message: String,
    },
    #[error("message addressed to unknown agent {0}")]
    UnknownRecipient(AgentId),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Error raised by an agent handler; the kernel wraps it with agent id and time.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct AgentError(pub String);

/// Fixed per-pair latency plus a per-sender computation delay.
#[derive(Debug, Clone, Default)]
pub struct LatencyModel {
    pub default_ns: Nanos,
    pub overrides: HashMap<(AgentId, AgentId), Nanos>,
    pub computation_delay_ns: Nanos,
}

impl LatencyModel {
    pub fn fixed(latency_ns: Nanos) -> Self {
        LatencyModel {
            default_ns: latency_ns,
            ..Default::default()
        }
    }

    pub fn latency(&self, from: AgentId, to: AgentId) -> Nanos {
        self.overrides
            .get(&(from, to))
            .copied()
            .unwrap_or(self.default_ns)
    }
}

enum Outgoing {
    Send { to: AgentId, payload: Payload },
    Wakeup { at: SimTime },
}

pub struct Context<'a> {
    now: SimTime,
    agent_id: AgentId,
    close: SimTime,
    fundamental: &'a mut FundamentalProcess,
    outbox: &'a mut Vec<Outgoing>,
}

impl Context<'_> {
    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn id(&self) -> AgentId {
        self.agent_id
    }

    pub fn session_close(&self) -> SimTime {
        self.close
    }

    /// True value of the fundamental at the current time, in cents.
    pub fn fundamental(&mut self) -> Price {
        self.fundamental.value_at(self.now)
    }

    pub fn send(&mut self, to: AgentId, payload: Payload) {
        self.outbox.push(Outgoing::Send { to, payload });
    }

    pub fn send_to_exchange(&mut self, payload: Payload) {
        self.send(EXCHANGE_ID, payload);
    }

    pub fn schedule_wakeup(&mut self, at: SimTime) -> Result<(), KernelError> {
        if at < self.now {
            return Err(KernelError::Causality {
                agent_id: self.agent_id,
                at,
                now: self.now,
            });
        }
        self.outbox.push(Outgoing::Wakeup { at });
        Ok(())
    }
}

pub trait Agent {
    fn kind(&self) -> &'static str;

    /// Called once at session open.
    fn start(&mut self, ctx: &mut Context<'_>) -> Result<(), AgentError>;

    fn receive(&mut self, ctx: &mut Context<'_>, msg: &Message) -> Result<(), AgentError>;
}

/// Per-agent random stream: one ChaCha key per run, one stream per agent.
pub fn agent_rng(seed: u64, agent_id: AgentId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(agent_id as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct QueueKey {
    deliver_at: SimTime,
    seq: u64,
}

/// Priority queue with a stable total order on `(deliver_at, seq)`.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<(QueueKey, usize)>>,
    slots: Vec<Option<Message>>,
    free: Vec<usize>,
    next_seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, msg: Message) {
        let key = QueueKey {
            deliver_at: msg.deliver_at,
            seq: self.next_seq,
        };
        self.next_seq += 1;
        let slot = match self.free.pop() {
            Some(i) => {
                self.slots[i] = Some(msg);
                i
            }
            None => {
                self.slots.push(Some(msg));
                self.slots.len() - 1
            }
        };
        self.heap.push(Reverse((key, slot)));
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse((k, _))| k.deliver_at)
    }

    pub fn pop(&mut self) -> Option<Message> {
        let Reverse((_, slot)) = self.heap.pop()?;
        self.free.push(slot);
        self.slots[slot].take()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Exchange agent: owns the book and writes the event trace.
#[derive(Debug, Default)]
pub struct Exchange {
    book: LimitOrderBook,
    trace: Vec<OrderEvent>,
    owners: HashMap<OrderId, AgentId>,
    stream: Vec<StreamRecord>,
    stream_index: HashMap<OrderId, usize>,
    last_trade: Option<Price>,
}

impl Exchange {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn book(&self) -> &LimitOrderBook {
        &self.book
    }

    fn handle(&mut self, now: SimTime, msg: &Message, replies: &mut Vec<(AgentId, Payload)>) {
        let from = msg.sender;
        match &msg.payload {
            &Payload::LimitOrder {
                order_id,
                side,
                price,
                size,
            } => {
                let order = Order::limit(order_id, from, side, price, size, now);
                if self.book.contains(order_id) || size == 0 || price <= 0 {
                    log::warn!("exchange rejected limit order {order_id} from agent {from}");
                    return;
                }
                self.trace
                    .push(OrderEvent::submit_limit(now, order_id, from, side, price, size));
                self.owners.insert(order_id, from);
                self.stream_index.insert(order_id, self.stream.len());
                self.stream.push(StreamRecord {
                    side,
                    price,
                    transacted: false,
                });
                let fills = self.book.submit_limit(order).expect("validated above");
                self.record_fills(now, size, &fills, replies);
            }
            &Payload::MarketOrder {
                order_id,
                side,
                size,
            } => {
                if size == 0 || self.book.contains(order_id) {
                    log::warn!("exchange rejected market order {order_id} from agent {from}");
                    return;
                }
                self.trace
                    .push(OrderEvent::submit_market(now, order_id, from, side, size));
                self.owners.insert(order_id, from);
                let outcome = self
                    .book
                    .submit_market(side, size, now, order_id, from)
                    .expect("validated above");
                self.record_fills(now, size, &outcome.fills, replies);
            }
            &Payload::Cancel { order_id } => {
                // Cancels for orders that already traded away are silently dropped.
                if self.owners.get(&order_id) != Some(&from) {
                    return;
                }
                if let Some(order) = self.book.remove(order_id) {
                    self.trace.push(OrderEvent::cancel(
                        now,
                        order_id,
                        from,
                        order.side,
                        order.price.unwrap_or(0),
                        order.size,
                    ));
                }
            }
            &Payload::DepthQuery { levels } => replies.push((
                from,
                Payload::DepthReply {
                    depth: self.book.depth(levels),
                    last_trade: self.last_trade,
                },
            )),
            Payload::LastTradeQuery => replies.push((
                from,
                Payload::LastTradeReply {
                    price: self.last_trade,
                },
            )),
            &Payload::OrderStreamQuery { len } => {
                let start = self.stream.len().saturating_sub(len);
                replies.push((
                    from,
                    Payload::OrderStreamReply {
                        records: self.stream[start..].to_vec(),
                    },
                ));
            }
            _ => log::debug!("exchange ignored {:?} from {from}", msg.payload),
        }
    }

    fn record_fills(
        &mut self,
        now: SimTime,
        taker_size: Qty,
        fills: &[Fill],
        replies: &mut Vec<(AgentId, Payload)>,
    ) {
        let mut taker_left = taker_size;
        for f in fills {
            self.trace.push(OrderEvent::execute(
                now,
                f.maker_order_id,
                f.maker_agent_id,
                f.maker_side,
                f.price,
                f.size,
            ));
            self.last_trade = Some(f.price);
            for id in [f.maker_order_id, f.taker_order_id] {
                if let Some(&i) = self.stream_index.get(&id) {
                    self.stream[i].transacted = true;
                }
            }
            let maker_left = self.book.order(f.maker_order_id).map_or(0, |o| o.size);
            taker_left -= f.size;
            replies.push((
                f.maker_agent_id,
                Payload::FillNotice {
                    order_id: f.maker_order_id,
                    price: f.price,
                    size: f.size,
                    remaining: maker_left,
                },
            ));
            replies.push((
                f.taker_agent_id,
                Payload::FillNotice {
                    order_id: f.taker_order_id,
                    price: f.price,
                    size: f.size,
                    remaining: taker_left,
                },
            ));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KernelStats {
    pub messages_sent: u64,
    pub messages_delivered: u64,
    pub messages_expired: u64,
    pub wakeups_delivered: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: EventTrace,
    pub stats: KernelStats,
}

pub struct Kernel {
    now: SimTime,
    close: SimTime,
    queue: EventQueue,
    latency: LatencyModel,
    exchange: Exchange,
    agents: Vec<Box<dyn Agent>>,
    fundamental: FundamentalProcess,
    stats: KernelStats,
}

impl Kernel {
    /// `agents[i]` receives id `i + 1`. `close` is the session length in ns.
    pub fn new(
        close: SimTime,
        latency: LatencyModel,
        fundamental: FundamentalProcess,
        agents: Vec<Box<dyn Agent>>,
    ) -> Self {
        Kernel {
            now: 0,
            close,
            queue: EventQueue::default(),
            latency,
            exchange: Exchange::new(),
            agents,
            fundamental,
            stats: KernelStats::default(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn exchange(&self) -> &Exchange {
        &self.exchange
    }

    /// Enqueues a message from `sender`, applying latency and computation delay.
    pub fn send(&mut self, sender: AgentId, recipient: AgentId, payload: Payload) {
        let deliver_at = self.now
            + self.latency.latency(sender, recipient)
            + self.latency.computation_delay_ns;
        self.enqueue(Message {
            sender,
            recipient,
            sent_at: self.now,
            deliver_at,
            payload,
        });
    }

    pub fn schedule_wakeup(&mut self, agent_id: AgentId, at: SimTime) -> Result<(), KernelError> {
        if at < self.now {
            return Err(KernelError::Causality {
                agent_id,
                at,
                now: self.now,
            });
        }
        self.enqueue(Message {
            sender: agent_id,
            recipient: agent_id,
            sent_at: self.now,
            deliver_at: at,
            payload: Payload::WakeUp,
        });
        Ok(())
    }

    fn enqueue(&mut self, msg: Message) {
        self.stats.messages_sent += 1;
        self.queue.push(msg);
    }

    fn agent_index(&self, id: AgentId) -> Option<usize> {
        let idx = usize::try_from(id).ok()?.checked_sub(1)?;
        (idx < self.agents.len()).then_some(idx)
    }

    fn dispatch(&mut self, agent_id: AgentId, msg: Option<&Message>) -> Result<(), KernelError> {
        let idx = self
            .agent_index(agent_id)
            .ok_or(KernelError::UnknownRecipient(agent_id))?;
        let mut outbox = Vec::new();
        let mut ctx = Context {
            now: self.now,
            agent_id,
            close: self.close,
            fundamental: &mut self.fundamental,
            outbox: &mut outbox,
        };
        let agent = &mut self.agents[idx];
        let result = match msg {
            Some(m) => agent.receive(&mut ctx, m),
            None => agent.start(&mut ctx),
        };
        result.map_err(|e| KernelError::AgentFault {
            agent_id,
            time: self.now,
            message: e.0,
        })?;
        for out in outbox {
            match out {
                Outgoing::Send { to, payload } => self.send(agent_id, to, payload),
                Outgoing::Wakeup { at } => self.schedule_wakeup(agent_id, at)?,
            }
        }
        Ok(())
    }

    /// Runs the session to completion and returns the exchange trace.
    pub fn run(mut self) -> Result<RunOutput, KernelError> {
        self.exchange
            .trace
            .push(OrderEvent::marker(EventType::SessionOpen, 0));
        for i in 0..self.agents.len() {
            self.dispatch(i as AgentId + 1, None)?;
        }
        while let Some(at) = self.queue.peek_time() {
            if at >= self.close {
                break;
            }
            let msg = self.queue.pop().expect("peeked");
            if msg.deliver_at < self.now {
                return Err(KernelError::Causality {
                    agent_id: msg.recipient,
                    at: msg.deliver_at,
                    now: self.now,
                });
            }
            self.now = msg.deliver_at;
            self.stats.messages_delivered += 1;
            if msg.recipient == EXCHANGE_ID {
                let mut replies = Vec::new();
                self.exchange.handle(self.now, &msg, &mut replies);
                for (to, payload) in replies {
                    self.send(EXCHANGE_ID, to, payload);
                }
            } else {
                if msg.payload == Payload::WakeUp {
                    self.stats.wakeups_delivered += 1;
                }
                self.dispatch(msg.recipient, Some(&msg))?;
            }
        }
        self.stats.messages_expired = self.queue.len() as u64;
        self.now = self.close;
        self.exchange
            .trace
            .push(OrderEvent::marker(EventType::SessionClose, self.close));
        Ok(RunOutput {
            trace: EventTrace::new(self.exchange.trace),
            stats: self.stats,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Re-schedules itself every `period` and counts wakeups.
    struct Ticker {
        period: SimTime,
        first: SimTime,
        seen: std::rc::Rc<std::cell::RefCell<Vec<SimTime>>>,
    }

    impl Agent for Ticker {
        fn kind(&self) -> &'static str {
            "ticker"
        }
        fn start(&mut self, ctx: &mut Context<'_>) -> Result<(), AgentError> {
            ctx.schedule_wakeup(self.first).map_err(|e| AgentError(e.to_string()))
        }
        fn receive(&mut self, ctx: &mut Context<'_>, msg: &Message) -> Result<(), AgentError> {
            if msg.payload == Payload::WakeUp {
                self.seen.borrow_mut().push(ctx.now());
                ctx.schedule_wakeup(ctx.now() + self.period)
                    .map_err(|e| AgentError(e.to_string()))?;
            }
            Ok(())
        }
    }

    fn flat_fundamental() -> FundamentalProcess {
        FundamentalProcess::new(10_000, 0.0, 0.0, 1_000_000, 10_000, agent_rng(0, -1))
    }

    #[test]
    fn wakeup_chain_count() {
        let seen = std::rc::Rc::new(std::cell::RefCell::new(Vec::new()));
        let s = 1_000_000_000;
        let agent = Ticker {
            period: 10 * s,
            first: 0,
            seen: seen.clone(),
        };
        let out = Kernel::new(60 * s, LatencyModel::fixed(1000), flat_fundamental(), vec![Box::new(agent)])
            .run()
            .unwrap();
        let times = seen.borrow().clone();
        assert_eq!(times.len(), 6);
        assert_eq!(*times.last().unwrap(), 50 * s);
        assert_eq!(out.stats.wakeups_delivered, 6);
        assert_eq!(
            out.stats.messages_sent,
            out.stats.messages_delivered + out.stats.messages_expired
        );
    }

    #[test]
    fn empty_population_trace_has_only_markers() {
        let out = Kernel::new(1_000, LatencyModel::fixed(1), flat_fundamental(), vec![])
            .run()
            .unwrap();
        let kinds: Vec<_> = out.trace.events.iter().map(|e| e.event_type).collect();
        assert_eq!(kinds, vec![EventType::SessionOpen, EventType::SessionClose]);
    }

    #[test]
    fn latency_is_additive() {
        let mut k = Kernel::new(1_000_000, LatencyModel::fixed(1_000), flat_fundamental(), vec![]);
        k.now = 5_000;
        k.send(1, EXCHANGE_ID, Payload::LastTradeQuery);
        assert_eq!(k.queue.peek_time(), Some(6_000));
    }

    #[test]
    fn computation_delay_adds_to_latency() {
        let latency = LatencyModel {
            default_ns: 1_000,
            computation_delay_ns: 250,
            ..Default::default()
        };
        let mut k = Kernel::new(1_000_000, latency, flat_fundamental(), vec![]);
        k.send(1, EXCHANGE_ID, Payload::LastTradeQuery);
        assert_eq!(k.queue.peek_time(), Some(1_250));
    }

    #[test]
    fn equal_delivery_times_keep_send_order() {
        let mut q = EventQueue::default();
        for (i, t) in [(1, 10), (2, 5), (3, 10), (4, 5)] {
            q.push(Message {
                sender: i,
                recipient: 0,
                sent_at: 0,
                deliver_at: t,
                payload: Payload::WakeUp,
            });
        }
        let order: Vec<_> = std::iter::from_fn(|| q.pop()).map(|m| m.sender).collect();
        assert_eq!(order, vec![2, 4, 1, 3]);
    }

    #[test]
    fn past_wakeup_is_a_causality_error() {
        let mut k = Kernel::new(1_000_000, LatencyModel::fixed(1), flat_fundamental(), vec![]);
        k.now = 100;
        assert!(matches!(
            k.schedule_wakeup(1, 99),
            Err(KernelError::Causality { .. })
        ));
    }

    struct Faulty;
    impl Agent for Faulty {
        fn kind(&self) -> &'static str {
            "faulty"
        }
        fn start(&mut self, ctx: &mut Context<'_>) -> Result<(), AgentError> {
            ctx.schedule_wakeup(42).map_err(|e| AgentError(e.to_string()))
        }
        fn receive(&mut self, _: &mut Context<'_>, _: &Message) -> Result<(), AgentError> {
            Err(AgentError("boom".into()))
        }
    }

    #[test]
    fn agent_fault_reports_id_and_time() {
        let err = Kernel::new(1_000, LatencyModel::fixed(1), flat_fundamental(), vec![Box::new(Faulty)])
            .run()
            .unwrap_err();
        assert_eq!(
            err,
            KernelError::AgentFault {
                agent_id: 1,
                time: 42,
                message: "boom".into()
            }
        );
    }

    #[test]
    fn exchange_matches_and_notifies() {
        let mut ex = Exchange::new();
        let mut replies = Vec::new();
        let msg = |sender, payload| Message {
            sender,
            recipient: EXCHANGE_ID,
            sent_at: 0,
            deliver_at: 0,
            payload,
        };
        ex.handle(1, &msg(1, Payload::LimitOrder { order_id: 10, side: Side::Sell, price: 101, size: 5 }), &mut replies);
        ex.handle(2, &msg(2, Payload::LimitOrder { order_id: 20, side: Side::Buy, price: 101, size: 3 }), &mut replies);
        let kinds: Vec<_> = ex.trace.iter().map(|e| e.event_type).collect();
        assert_eq!(kinds, vec![EventType::SubmitLimit, EventType::SubmitLimit, EventType::Execute]);
        assert_eq!(replies.len(), 2);
        assert!(replies.contains(&(1, Payload::FillNotice { order_id: 10, price: 101, size: 3, remaining: 2 })));
        assert!(replies.contains(&(2, Payload::FillNotice { order_id: 20, price: 101, size: 3, remaining: 0 })));

        // Only the owner may cancel.
        ex.handle(3, &msg(2, Payload::Cancel { order_id: 10 }), &mut replies);
        assert!(ex.book().contains(10));
        ex.handle(3, &msg(1, Payload::Cancel { order_id: 10 }), &mut replies);
        assert!(!ex.book().contains(10));
        assert_eq!(ex.trace.last().unwrap().size, 2);

        replies.clear();
        ex.handle(4, &msg(5, Payload::OrderStreamQuery { len: 10 }), &mut replies);
        match &replies[0].1 {
            Payload::OrderStreamReply { records } => {
                assert_eq!(records.len(), 2);
                assert!(records.iter().all(|r| r.transacted));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
