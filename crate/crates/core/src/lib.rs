//! Discrete-event limit order book simulator with a stylized-facts metric suite.
//!
//! The crate is organised bottom-up:
//!
//! - [`lob`]: price-then-FIFO limit order book.
//! - [`kernel`]: nanosecond discrete-event kernel, messages, the exchange agent.
//! - [`agents`]: zero-intelligence, belief-learning, market-maker and momentum
//!   traders plus the exogenous fundamental.
//! - [`config`]: TOML configuration and the `sparse_zi_100` / `rmsc01` presets.
//! - [`ingest`]: canonical CSV event log and JSON report I/O.
//! - [`replay`], [`series`]: book reconstruction and sampled time series.
//! - [`stats`], [`distfit`]: descriptive statistics and maximum-likelihood fits.
//! - [`metrics`]: return, order-flow and market-impact stylized facts.
//! - [`compare`]: side-by-side comparison of two metric reports.
//!
//! Simulated and historical data share one currency, the [`ingest::EventTrace`],
//! so every metric runs identically on both.

pub mod agents;
pub mod compare;
pub mod config;
pub mod distfit;
pub mod ingest;
pub mod kernel;
pub mod lob;
pub mod metrics;
pub mod replay;
pub mod series;
pub mod stats;
pub mod types;

pub use config::{simulate, SimConfig};
pub use ingest::{EventTrace, EventType, OrderEvent};
pub use lob::LimitOrderBook;
pub use types::{Nanos, Price, Qty, Side};
