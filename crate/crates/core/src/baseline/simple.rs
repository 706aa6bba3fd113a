//! Closed-form providers, handy for what-if runs and fixtures.

use crate::decimal::Dec;
use crate::model::{Quote, TokenAmount, TradeRecord};

use super::{BaselineError, BaselineProvider};

/// Returns the same `(o', g')` for every input and offset.
#[derive(Debug, Clone)]
pub struct FixedProvider {
    pub out: TokenAmount,
    pub gas: Dec,
}

impl FixedProvider {
    pub fn new(out: TokenAmount, gas: Dec) -> Self {
        FixedProvider { out, gas }
    }
}

impl BaselineProvider for FixedProvider {
    fn provider_id(&self) -> &str {
        "fixed"
    }

    fn supports_offset(&self, _offset: i64) -> bool {
        true
    }

    fn quote(&self, trade: &TradeRecord, offset: i64, _amount_in: &TokenAmount) -> Result<Quote, BaselineError> {
        Ok(Quote {
            trade_id: trade.trade_id.clone(),
            offset,
            out_estimate: self.out,
            gas_estimate: self.gas.clone(),
            provider_id: self.provider_id().to_string(),
            corrected: false,
        })
    }
}

/// Zero-impact router: `o' = rate * amount_in`, constant gas.
#[derive(Debug, Clone)]
pub struct LinearProvider {
    /// Output units per input unit, both normalized.
    pub rate: Dec,
    pub gas: Dec,
}

impl LinearProvider {
    pub fn new(rate: Dec, gas: Dec) -> Self {
        LinearProvider { rate, gas }
    }
}

impl BaselineProvider for LinearProvider {
    fn provider_id(&self) -> &str {
        "linear"
    }

    fn supports_offset(&self, _offset: i64) -> bool {
        true
    }

    fn quote(&self, trade: &TradeRecord, offset: i64, amount_in: &TokenAmount) -> Result<Quote, BaselineError> {
        let decimals = trade.amount_out.decimals;
        let out = &self.rate * amount_in.normalized() * Dec::pow10(decimals as i64);
        Ok(Quote {
            trade_id: trade.trade_id.clone(),
            offset,
            out_estimate: TokenAmount {
                raw: out.floor_u128().unwrap_or(0),
                decimals,
            },
            gas_estimate: self.gas.clone(),
            provider_id: self.provider_id().to_string(),
            corrected: false,
        })
    }
}
