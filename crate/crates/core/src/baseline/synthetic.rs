use std::collections::BTreeMap;

use crate::decimal::Dec;
use crate::model::{Pool, Quote, TokenAmount, TradeRecord};

use super::router::route_optimal_split;
use super::{BaselineError, BaselineProvider};

/// Base swap overhead added to the hop gas of every synthetic route.
pub const DEFAULT_FIXED_OVERHEAD_GAS: u64 = 80_000;

/// Routes each request through the pool snapshot at the requested offset.
///
/// Routing prices gas at the trade's base fee plus `f_prime`.
#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    provider_id: String,
    snapshots: BTreeMap<i64, Vec<Pool>>,
    pub f_prime: Dec,
    pub fixed_overhead: u64,
}

impl SyntheticProvider {
    pub fn new(snapshots: BTreeMap<i64, Vec<Pool>>, f_prime: Dec) -> Self {
        SyntheticProvider {
            provider_id: String::from("synthetic"),
            snapshots,
            f_prime,
            fixed_overhead: DEFAULT_FIXED_OVERHEAD_GAS,
        }
    }

    pub fn with_overhead(mut self, gas: u64) -> Self {
        self.fixed_overhead = gas;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.provider_id = id.into();
        self
    }

    pub fn snapshots(&self) -> &BTreeMap<i64, Vec<Pool>> {
        &self.snapshots
    }

    pub fn synthetic_quote(
        &self,
        trade: &TradeRecord,
        offset: i64,
        amount_in: &TokenAmount,
    ) -> Result<Quote, BaselineError> {
        let pools = self
            .snapshots
            .get(&offset)
            .ok_or(BaselineError::SnapshotUnavailable(offset))?;
        let gas_price = Dec::from_u128(trade.gas.base_fee) + &self.f_prime;
        let route = route_optimal_split(pools, amount_in, trade.direction, &gas_price)?;
        Ok(Quote {
            trade_id: trade.trade_id.clone(),
            offset,
            out_estimate: route.total_out,
            gas_estimate: Dec::from_u128((route.total_gas + self.fixed_overhead) as u128),
            provider_id: self.provider_id.clone(),
            corrected: false,
        })
    }
}

impl BaselineProvider for SyntheticProvider {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    fn supports_offset(&self, offset: i64) -> bool {
        self.snapshots.contains_key(&offset)
    }

    fn quote(&self, trade: &TradeRecord, offset: i64, amount_in: &TokenAmount) -> Result<Quote, BaselineError> {
        self.synthetic_quote(trade, offset, amount_in)
    }
}
