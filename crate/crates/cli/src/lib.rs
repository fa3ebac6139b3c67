//! Batch front end: option-chain CSV in, JSON and CSV results out.

pub mod bundle;
pub mod chain_csv;
pub mod commands;
pub mod output;
pub mod prior_arg;

pub use bundle::ResultBundle;
pub use chain_csv::{parse_chain, ParsedChain};
