//! Canonical order-event log.
//!
//! The event log is a CSV file with the exact header
//!
//! ```text
//! timestamp_ns,event_type,order_id,agent_id,side,price_cents,size
//! ```
//!
//! One row per event. `event_type` is one of `SUBMIT_LIMIT`,
//! `SUBMIT_MARKET`, `CANCEL`, `EXECUTE`, plus the two session markers
//! `SESSION_OPEN` and `SESSION_CLOSE` (which carry an empty `side`, zero
//! price and zero size). Timestamps are integer nanoseconds.
//!
//! `EXECUTE` rows reference the *resting* order and carry its side and the
//! trade price; the aggressor is the order of the most recent preceding
//! `SUBMIT_*` row. `CANCEL` rows carry the canceled remaining size.
//! Market submits use `price_cents = 0`. Files ending in `.gz` are read and
//! written gzip-compressed.
//!
//! Quote snapshots (for data without order-level events) use the header
//! `timestamp_ns,bid_cents,ask_cents,bid_size,ask_size`.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use thiserror::Error;

use crate::metrics::MetricReport;
use crate::types::{AgentId, Nanos, OrderId, Price, Qty, Side};

pub const EVENT_LOG_HEADER: &str = "timestamp_ns,event_type,order_id,agent_id,side,price_cents,size";
pub const QUOTE_LOG_HEADER: &str = "timestamp_ns,bid_cents,ask_cents,bid_size,ask_size";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventType {
    SubmitLimit,
    SubmitMarket,
    Cancel,
    Execute,
    SessionOpen,
    SessionClose,
}

impl EventType {
    pub fn as_str(self) -> &'static str {
        match self {
            EventType::SubmitLimit => "SUBMIT_LIMIT",
            EventType::SubmitMarket => "SUBMIT_MARKET",
            EventType::Cancel => "CANCEL",
            EventType::Execute => "EXECUTE",
            EventType::SessionOpen => "SESSION_OPEN",
            EventType::SessionClose => "SESSION_CLOSE",
        }
    }

    pub fn is_marker(self) -> bool {
        matches!(self, EventType::SessionOpen | EventType::SessionClose)
    }

    pub fn is_submit(self) -> bool {
        matches!(self, EventType::SubmitLimit | EventType::SubmitMarket)
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "SUBMIT_LIMIT" => EventType::SubmitLimit,
            "SUBMIT_MARKET" => EventType::SubmitMarket,
            "CANCEL" => EventType::Cancel,
            "EXECUTE" => EventType::Execute,
            "SESSION_OPEN" => EventType::SessionOpen,
            "SESSION_CLOSE" => EventType::SessionClose,
            other => return Err(format!("unknown event_type `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderEvent {
    pub timestamp_ns: Nanos,
    pub event_type: EventType,
    pub order_id: OrderId,
    pub agent_id: AgentId,
    /// `None` only for session markers.
    pub side: Option<Side>,
    pub price_cents: Price,
    pub size: Qty,
}

impl OrderEvent {
    pub fn marker(event_type: EventType, timestamp_ns: Nanos) -> Self {
        OrderEvent {
            timestamp_ns,
            event_type,
            order_id: 0,
            agent_id: -1,
            side: None,
            price_cents: 0,
            size: 0,
        }
    }

    pub fn submit_limit(ts: Nanos, order_id: OrderId, agent_id: AgentId, side: Side, price: Price, size: Qty) -> Self {
        OrderEvent {
            timestamp_ns: ts,
            event_type: EventType::SubmitLimit,
            order_id,
            agent_id,
            side: Some(side),
            price_cents: price,
            size,
        }
    }

    pub fn submit_market(ts: Nanos, order_id: OrderId, agent_id: AgentId, side: Side, size: Qty) -> Self {
        OrderEvent {
            timestamp_ns: ts,
            event_type: EventType::SubmitMarket,
            order_id,
            agent_id,
            side: Some(side),
            price_cents: 0,
            size,
        }
    }

    pub fn cancel(ts: Nanos, order_id: OrderId, agent_id: AgentId, side: Side, price: Price, size: Qty) -> Self {
        OrderEvent {
            timestamp_ns: ts,
            event_type: EventType::Cancel,
            order_id,
            agent_id,
            side: Some(side),
            price_cents: price,
            size,
        }
    }

    /// Execution against the resting order `order_id` owned by `agent_id`.
    pub fn execute(ts: Nanos, order_id: OrderId, agent_id: AgentId, maker_side: Side, price: Price, size: Qty) -> Self {
        OrderEvent {
            timestamp_ns: ts,
            event_type: EventType::Execute,
            order_id,
            agent_id,
            side: Some(maker_side),
            price_cents: price,
            size,
        }
    }
}

/// Ordered exchange-side event stream for one asset and one session.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventTrace {
    pub events: Vec<OrderEvent>,
}

impl EventTrace {
    pub fn new(events: Vec<OrderEvent>) -> Self {
        EventTrace { events }
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    /// Session window: the open/close markers when present, otherwise the
    /// first and last event timestamps.
    pub fn session_bounds(&self) -> Option<(Nanos, Nanos)> {
        let first = self.events.first()?.timestamp_ns;
        let last = self.events.last()?.timestamp_ns;
        let open = self
            .events
            .iter()
            .find(|e| e.event_type == EventType::SessionOpen)
            .map_or(first, |e| e.timestamp_ns);
        let close = self
            .events
            .iter()
            .rev()
            .find(|e| e.event_type == EventType::SessionClose)
            .map_or(last, |e| e.timestamp_ns);
        Some((open, close))
    }

    pub fn count(&self, kind: EventType) -> usize {
        self.events.iter().filter(|e| e.event_type == kind).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuoteSnapshot {
    pub timestamp_ns: Nanos,
    pub bid: Price,
    pub ask: Price,
    pub bid_size: Qty,
    pub ask_size: Qty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReadMode {
    /// Abort on the first invalid row.
    #[default]
    Strict,
    /// Drop invalid rows and count them.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// 1-based line number in the file, header included.
    pub line: u64,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad header: expected `{expected}`, found `{found}`")]
    Header { expected: &'static str, found: String },
    #[error("{0}")]
    Invalid(Violation),
}

#[derive(Debug, Clone, Default)]
pub struct ReadOutcome {
    pub trace: EventTrace,
    /// Rows dropped in lenient mode.
    pub violations: Vec<Violation>,
}

fn open_reader(path: &Path) -> Result<Box<dyn Read>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let buffered = BufReader::new(file);
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzDecoder::new(buffered)))
    } else {
        Ok(Box::new(buffered))
    }
}

fn open_writer(path: &Path) -> Result<Box<dyn Write>, IngestError> {
    let file = File::create(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let buffered = BufWriter::new(file);
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzEncoder::new(buffered, Compression::default())))
    } else {
        Ok(Box::new(buffered))
    }
}

/// Tracks outstanding sizes so that executions and cancels can be checked
/// against earlier submissions.
#[derive(Default)]
struct Validator {
    last_ts: Option<Nanos>,
    outstanding: HashMap<OrderId, Qty>,
    aggressor: Option<OrderId>,
}

impl Validator {
    fn check(&mut self, ev: &OrderEvent) -> Result<(), String> {
        if let Some(prev) = self.last_ts {
            if ev.timestamp_ns < prev {
                return Err(format!("timestamp {} decreases (previous {prev})", ev.timestamp_ns));
            }
        }
        if ev.event_type.is_marker() {
            self.last_ts = Some(ev.timestamp_ns);
            return Ok(());
        }
        if ev.side.is_none() {
            return Err(format!("{} row without side", ev.event_type));
        }
        if ev.size == 0 {
            return Err("size must be positive".into());
        }
        match ev.event_type {
            EventType::SubmitLimit | EventType::SubmitMarket => {
                if ev.event_type == EventType::SubmitLimit && ev.price_cents <= 0 {
                    return Err(format!("limit price must be positive, got {}", ev.price_cents));
                }
                if self.outstanding.get(&ev.order_id).is_some_and(|&q| q > 0) {
                    return Err(format!("order {} submitted while still live", ev.order_id));
                }
                self.outstanding.insert(ev.order_id, ev.size);
                self.aggressor = Some(ev.order_id);
            }
            EventType::Execute => {
                let left = self
                    .outstanding
                    .get_mut(&ev.order_id)
                    .ok_or_else(|| format!("EXECUTE references unknown order {}", ev.order_id))?;
                if ev.size > *left {
                    return Err(format!(
                        "EXECUTE of {} exceeds outstanding {} on order {}",
                        ev.size, left, ev.order_id
                    ));
                }
                *left -= ev.size;
                if let Some(taker) = self.aggressor.filter(|&t| t != ev.order_id) {
                    if let Some(q) = self.outstanding.get_mut(&taker) {
                        *q = q.saturating_sub(ev.size);
                    }
                }
            }
            EventType::Cancel => {
                let left = self
                    .outstanding
                    .get_mut(&ev.order_id)
                    .ok_or_else(|| format!("CANCEL references unknown order {}", ev.order_id))?;
                if ev.size > *left {
                    return Err(format!(
                        "CANCEL of {} exceeds outstanding {} on order {}",
                        ev.size, left, ev.order_id
                    ));
                }
                *left = 0;
            }
            EventType::SessionOpen | EventType::SessionClose => unreachable!(),
        }
        if ev.event_type != EventType::Execute && !ev.event_type.is_submit() {
            self.aggressor = None;
        }
        self.last_ts = Some(ev.timestamp_ns);
        Ok(())
    }
}

fn parse_field<T: FromStr>(record: &csv::StringRecord, idx: usize, name: &str) -> Result<T, String> {
    let raw = record.get(idx).ok_or_else(|| format!("missing field `{name}`"))?;
    raw.trim()
        .parse()
        .map_err(|_| format!("bad {name} `{raw}`"))
}

fn parse_event(record: &csv::StringRecord) -> Result<OrderEvent, (bool, String)> {
    if record.len() != 7 {
        return Err((false, format!("expected 7 fields, found {}", record.len())));
    }
    let event_type: EventType = record[1].trim().parse().map_err(|e| (true, e))?;
    let side = match record[4].trim() {
        "" => None,
        s => Some(s.parse::<Side>().map_err(|e| (false, e))?),
    };
    let soft = |e| (false, e);
    Ok(OrderEvent {
        timestamp_ns: parse_field(record, 0, "timestamp_ns").map_err(soft)?,
        event_type,
        order_id: parse_field(record, 2, "order_id").map_err(soft)?,
        agent_id: parse_field(record, 3, "agent_id").map_err(soft)?,
        side,
        price_cents: parse_field(record, 5, "price_cents").map_err(soft)?,
        size: parse_field(record, 6, "size").map_err(soft)?,
    })
}

/// Reads and validates an event log.
///
/// An unknown `event_type` aborts in either mode; other violations abort in
/// strict mode and drop the row in lenient mode.
pub fn read_event_log(path: impl AsRef<Path>, mode: ReadMode) -> Result<ReadOutcome, IngestError> {
    read_event_log_from(open_reader(path.as_ref())?, mode)
}

pub fn read_event_log_from(reader: impl Read, mode: ReadMode) -> Result<ReadOutcome, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r?.iter().collect::<Vec<_>>().join(","),
        None => String::new(),
    };
    if header != EVENT_LOG_HEADER {
        return Err(IngestError::Header {
            expected: EVENT_LOG_HEADER,
            found: header,
        });
    }
    let mut validator = Validator::default();
    let mut out = ReadOutcome::default();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let checked = parse_event(&record).and_then(|ev| {
            validator.check(&ev).map_err(|m| (false, m))?;
            Ok(ev)
        });
        match checked {
            Ok(ev) => out.trace.events.push(ev),
            Err((fatal, message)) => {
                let v = Violation { line, message };
                if fatal || mode == ReadMode::Strict {
                    return Err(IngestError::Invalid(v));
                }
                out.violations.push(v);
            }
        }
    }
    Ok(out)
}

pub fn write_event_log(trace: &EventTrace, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path = path.as_ref();
    let mut sink = open_writer(path)?;
    write_event_log_to(trace, &mut sink)?;
    sink.flush().map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_event_log_to(trace: &EventTrace, sink: impl Write) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(EVENT_LOG_HEADER.split(','))?;
    for e in &trace.events {
        w.write_record([
            e.timestamp_ns.to_string().as_str(),
            e.event_type.as_str(),
            e.order_id.to_string().as_str(),
            e.agent_id.to_string().as_str(),
            e.side.map_or("", Side::as_str),
            e.price_cents.to_string().as_str(),
            e.size.to_string().as_str(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Serializes the event log into memory.
pub fn event_log_bytes(trace: &EventTrace) -> Vec<u8> {
    let mut buf = Vec::new();
    write_event_log_to(trace, &mut buf).expect("writing to memory cannot fail");
    buf
}

pub fn read_quote_log(path: impl AsRef<Path>) -> Result<Vec<QuoteSnapshot>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(open_reader(path.as_ref())?);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r?.iter().collect::<Vec<_>>().join(","),
        None => String::new(),
    };
    if header != QUOTE_LOG_HEADER {
        return Err(IngestError::Header {
            expected: QUOTE_LOG_HEADER,
            found: header,
        });
    }
    let mut out: Vec<QuoteSnapshot> = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let parsed = (|| -> Result<QuoteSnapshot, String> {
            let q = QuoteSnapshot {
                timestamp_ns: parse_field(&record, 0, "timestamp_ns")?,
                bid: parse_field(&record, 1, "bid_cents")?,
                ask: parse_field(&record, 2, "ask_cents")?,
                bid_size: parse_field(&record, 3, "bid_size")?,
                ask_size: parse_field(&record, 4, "ask_size")?,
            };
            if q.bid >= q.ask {
                return Err(format!("crossed quote {} >= {}", q.bid, q.ask));
            }
            if out.last().is_some_and(|p| p.timestamp_ns > q.timestamp_ns) {
                return Err("timestamp decreases".into());
            }
            Ok(q)
        })();
        out.push(parsed.map_err(|message| IngestError::Invalid(Violation { line, message }))?);
    }
    Ok(out)
}

pub fn write_report(report: &MetricReport, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path = path.as_ref();
    let mut sink = open_writer(path)?;
    sink.write_all(&report.to_json_bytes()?)
        .and_then(|_| sink.flush())
        .map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })
}

pub fn read_report(path: impl AsRef<Path>) -> Result<MetricReport, IngestError> {
    let reader = open_reader(path.as_ref())?;
    Ok(serde_json::from_reader(reader)?)
}
