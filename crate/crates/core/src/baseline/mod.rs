//! Baseline function `(i, t) -> (o', g')`.
//!
//! A [`BaselineProvider`] answers "what would the reference router have
//! delivered for this input at this block offset". Two real implementations
//! exist: [`ReplayProvider`] serves recorded quotes, [`SyntheticProvider`]
//! routes through constant-product pool snapshots.

pub mod cpmm;
pub mod replay;
pub mod router;
pub mod simple;
pub mod synthetic;

pub use cpmm::cpmm_swap_out;
pub use replay::ReplayProvider;
pub use router::{route_optimal_split, RouteResult, Split, SHARE_FLOOR};
pub use synthetic::{SyntheticProvider, DEFAULT_FIXED_OVERHEAD_GAS};

use crate::model::{Quote, TokenAmount, TradeRecord};

/// Block offsets quoted by default, relative to the settlement block.
pub const DEFAULT_OFFSETS: std::ops::RangeInclusive<i64> = -4..=3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BaselineError {
    #[error("no quote for trade {trade_id} at offset {offset}")]
    QuoteUnavailable { trade_id: String, offset: i64 },
    #[error("no pool snapshot at offset {0}")]
    SnapshotUnavailable(i64),
    #[error("routing requires at least one pool")]
    NoPools,
    #[error("quote set holds several providers ({0}); select one")]
    AmbiguousProvider(String),
    #[error("provider {0} not present in quote set")]
    UnknownProvider(String),
    #[error("quote already gas-corrected")]
    AlreadyCorrected,
}

/// Deterministic source of counterfactual quotes.
///
/// `amount_in` equals the trade's input except when the price engine
/// re-quotes a gas-adjusted input.
pub trait BaselineProvider: Send + Sync {
    fn provider_id(&self) -> &str;

    fn supports_offset(&self, offset: i64) -> bool;

    fn quote(
        &self,
        trade: &TradeRecord,
        offset: i64,
        amount_in: &TokenAmount,
    ) -> Result<Quote, BaselineError>;
}
