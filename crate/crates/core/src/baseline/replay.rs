use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::ingest::QuoteSet;
use crate::model::{Quote, TokenAmount, TradeRecord};

use super::{BaselineError, BaselineProvider};

/// Serves recorded quotes from a [`QuoteSet`].
///
/// Re-quotes for an input other than the trade's own (the gas-adjusted
/// input of filler-paid `WETH_IN` trades) scale the recorded output
/// linearly, `o'' = floor(o' * amount / i)`, and keep the recorded gas.
#[derive(Debug, Clone)]
pub struct ReplayProvider {
    quotes: QuoteSet,
    provider_id: String,
}

impl ReplayProvider {
    /// `provider_id` may be omitted when the set holds a single provider.
    pub fn new(quotes: QuoteSet, provider_id: Option<&str>) -> Result<Self, BaselineError> {
        let providers = quotes.providers();
        let id = match provider_id {
            Some(id) if providers.contains(id) => id.to_string(),
            Some(id) => return Err(BaselineError::UnknownProvider(id.to_string())),
            None if providers.len() == 1 => providers.iter().next().unwrap().to_string(),
            None if providers.is_empty() => String::from("replay"),
            None => {
                let names: Vec<&str> = providers.into_iter().collect();
                return Err(BaselineError::AmbiguousProvider(names.join(", ")));
            }
        };
        Ok(ReplayProvider {
            quotes,
            provider_id: id,
        })
    }

    pub fn quotes(&self) -> &QuoteSet {
        &self.quotes
    }

    pub fn replay_quote(&self, trade_id: &str, offset: i64) -> Result<&Quote, BaselineError> {
        self.quotes
            .get(trade_id, offset, &self.provider_id)
            .ok_or_else(|| BaselineError::QuoteUnavailable {
                trade_id: trade_id.to_string(),
                offset,
            })
    }
}

impl BaselineProvider for ReplayProvider {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    fn supports_offset(&self, offset: i64) -> bool {
        self.quotes.offsets().contains(&offset)
    }

    fn quote(&self, trade: &TradeRecord, offset: i64, amount_in: &TokenAmount) -> Result<Quote, BaselineError> {
        let stored = self.replay_quote(&trade.trade_id, offset)?;
        if amount_in.raw == trade.amount_in.raw {
            return Ok(stored.clone());
        }
        let scaled = BigUint::from(stored.out_estimate.raw) * BigUint::from(amount_in.raw)
            / BigUint::from(trade.amount_in.raw);
        let mut quote = stored.clone();
        quote.out_estimate.raw = scaled.to_u128().unwrap_or(u128::MAX);
        Ok(quote)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ingest_quotes, Format};
    use crate::model::{Direction, GasTerms, Interface, SettlementPath};

    fn set(csv: &str) -> QuoteSet {
        let text = format!("trade_id,offset,out_estimate_raw,out_estimate_decimals,gas_estimate,provider_id\n{csv}");
        ingest_quotes(text.as_bytes(), Format::Csv, true).unwrap().0
    }

    fn trade(id: &str) -> TradeRecord {
        TradeRecord {
            trade_id: id.into(),
            interface: Interface::Uniswap,
            path: SettlementPath::X,
            block_number: 1,
            direction: Direction::WethIn,
            gas_internalized: true,
            amount_in: TokenAmount::wei(1_000_000),
            amount_out: TokenAmount::new(3000, 6).unwrap(),
            gas: GasTerms::new(1, 1, 1).unwrap(),
            usd_value: None,
            timestamp: 0,
        }
    }

    #[test]
    fn stored_quote_returned_unchanged() {
        let p = ReplayProvider::new(set("T1,0,2995,6,140000,uni\n"), None).unwrap();
        let q = p.quote(&trade("T1"), 0, &trade("T1").amount_in).unwrap();
        assert_eq!(q.out_estimate.raw, 2995);
        assert_eq!(q.gas_estimate, "140000".parse().unwrap());
        assert_eq!(p.provider_id(), "uni");
    }

    #[test]
    fn missing_key_unavailable() {
        let p = ReplayProvider::new(set("T1,0,2995,6,140000,uni\n"), None).unwrap();
        assert_eq!(
            p.quote(&trade("T1"), -1, &trade("T1").amount_in).unwrap_err(),
            BaselineError::QuoteUnavailable {
                trade_id: "T1".into(),
                offset: -1
            }
        );
    }

    #[test]
    fn two_providers_disambiguated() {
        let quotes = set("T1,0,100,6,1,a\nT1,0,200,6,2,b\n");
        assert!(matches!(
            ReplayProvider::new(quotes.clone(), None),
            Err(BaselineError::AmbiguousProvider(_))
        ));
        let a = ReplayProvider::new(quotes.clone(), Some("a")).unwrap();
        let b = ReplayProvider::new(quotes.clone(), Some("b")).unwrap();
        let t = trade("T1");
        assert_eq!(a.quote(&t, 0, &t.amount_in).unwrap().out_estimate.raw, 100);
        assert_eq!(b.quote(&t, 0, &t.amount_in).unwrap().out_estimate.raw, 200);
        assert!(matches!(
            ReplayProvider::new(quotes, Some("c")),
            Err(BaselineError::UnknownProvider(_))
        ));
    }

    #[test]
    fn requote_scales_linearly() {
        let p = ReplayProvider::new(set("T1,0,3000,6,1,uni\n"), None).unwrap();
        let q = p.quote(&trade("T1"), 0, &TokenAmount::wei(997_000)).unwrap();
        assert_eq!(q.out_estimate.raw, 2991);
    }
}
