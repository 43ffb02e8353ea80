//! Revealed-preference inverse reinforcement learning and strategy masking.
//!
//! An adversary observes a decision maker's responses and runs
//! revealed-preference tests ([`irl_utility`], [`irl_strategy`]) to recover
//! the utility or the budget behind them. The decision maker can answer with
//! deliberately sub-optimal responses ([`iirl`]) that push the adversary's test
//! margin down at minimal cost. [`sample_complexity`] studies how robust that
//! masking is to noisy utilities and [`radar`] is the cognitive radar case study.

pub mod dataset;
pub mod error;
pub mod function;
pub mod iirl;
pub mod io;
pub mod irl_strategy;
pub mod irl_utility;
pub mod linalg;
pub mod margin;
pub mod optim;
pub mod plot;
pub mod radar;
pub mod report;
pub mod sample_complexity;
pub mod synth;

pub mod cli;

pub use dataset::{validate_dataset, BudgetSpec, Dataset, DatasetMode, Observation, ResponseVector};
pub use error::{Error, Result};
pub use function::{EnvelopeMode, EnvelopePiece, FunctionSpec};
pub use margin::{kkt_multiplier, MarginReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
