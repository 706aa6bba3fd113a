//! Gas-internalized realized and counterfactual prices.
//!
//! Prices are output-token units per input-token unit, both normalized.
//! Gas always settles in ETH, so the gas cost `g(b+f)` is charged against
//! whichever side of the trade is WETH:
//!
//! | gas paid by | `WETH_IN`            | `WETH_OUT`          |
//! |-------------|----------------------|---------------------|
//! | user        | `o / (i + g(b+f))`   | `(o - g(b+f)) / i`  |
//! | filler      | `o / i`              | `o / i`             |
//!
//! Counterfactual prices use the baseline quote `(o', g')` and the baseline
//! priority fee `f'`. For filler-paid `WETH_IN` trades the baseline gas is
//! taken out of the input first and the remainder is re-quoted.

use std::sync::LazyLock;

use crate::baseline::{BaselineError, BaselineProvider};
use crate::decimal::Dec;
use crate::model::{Direction, Quote, TokenAmount, TradeRecord, WETH_DECIMALS};

static WEI_TO_ETH: LazyLock<Dec> = LazyLock::new(|| Dec::pow10(-(WETH_DECIMALS as i64)));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PriceCase {
    RealizedExternalGas,
    RealizedInternalGas,
    CounterfactualExternalGas,
    CounterfactualInternalGas,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Price {
    pub value: Dec,
    pub case: PriceCase,
}

impl Price {
    /// Only reachable for `WETH_OUT` trades whose gas exceeds their output.
    pub fn is_negative(&self) -> bool {
        self.value.is_negative()
    }
}

/// The OFA-controllable quantities `(o, g, f)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionVector {
    /// Output amount, normalized token units.
    pub output: Dec,
    /// Gas units.
    pub gas: Dec,
    /// Priority fee, wei per gas.
    pub priority_fee: Dec,
}

#[derive(Debug, thiserror::Error)]
pub enum PriceError {
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("trade {trade_id}: gas-adjusted input is not positive")]
    NonPositiveAdjustedInput { trade_id: String },
}

/// `g (b + f)` converted from wei to ETH.
pub fn gas_cost_eth(gas: &Dec, base_fee: &Dec, priority_fee: &Dec) -> Dec {
    gas * (base_fee + priority_fee) * &*WEI_TO_ETH
}

pub fn wei_to_eth(wei: &Dec) -> Dec {
    wei * &*WEI_TO_ETH
}

fn base_fee(trade: &TradeRecord) -> Dec {
    Dec::from_u128(trade.gas.base_fee)
}

pub fn realized_price(trade: &TradeRecord) -> Price {
    let i = trade.amount_in.normalized();
    let o = trade.amount_out.normalized();
    if trade.gas_internalized {
        return Price {
            value: o / i,
            case: PriceCase::RealizedInternalGas,
        };
    }
    let cost = trade.gas.cost_eth();
    let value = match trade.direction {
        Direction::WethIn => o / (i + cost),
        Direction::WethOut => (o - cost) / i,
    };
    Price {
        value,
        case: PriceCase::RealizedExternalGas,
    }
}

/// Counterfactual price together with the baseline decision vector.
#[derive(Debug, Clone)]
pub struct Counterfactual {
    pub price: Price,
    pub x_prime: DecisionVector,
    /// Input that was routed by the baseline (normalized): `i`, or
    /// `i' = i - g'(b+f')` for filler-paid `WETH_IN` trades.
    pub routed_input: Dec,
    /// The quote for the full input `i`.
    pub quote: Quote,
}

pub fn counterfactual_price(
    trade: &TradeRecord,
    baseline: &dyn BaselineProvider,
    offset: i64,
    f_prime: &Dec,
) -> Result<Counterfactual, PriceError> {
    let i = trade.amount_in.normalized();
    let b = base_fee(trade);
    let quote = baseline.quote(trade, offset, &trade.amount_in)?;
    let o_prime = quote.out_estimate.normalized();
    let g_prime = quote.gas_estimate.clone();
    let cost = gas_cost_eth(&g_prime, &b, f_prime);

    let x_prime = |output: Dec| DecisionVector {
        output,
        gas: g_prime.clone(),
        priority_fee: f_prime.clone(),
    };

    let (value, case, x, routed) = match (trade.gas_internalized, trade.direction) {
        (false, Direction::WethIn) => (
            &o_prime / (&i + &cost),
            PriceCase::CounterfactualExternalGas,
            x_prime(o_prime),
            i,
        ),
        (false, Direction::WethOut) => (
            (&o_prime - &cost) / &i,
            PriceCase::CounterfactualExternalGas,
            x_prime(o_prime),
            i,
        ),
        (true, Direction::WethOut) => (
            (&o_prime - &cost) / &i,
            PriceCase::CounterfactualInternalGas,
            x_prime(o_prime),
            i,
        ),
        (true, Direction::WethIn) => {
            let adjusted = &i - &cost;
            if !adjusted.is_positive() {
                return Err(PriceError::NonPositiveAdjustedInput {
                    trade_id: trade.trade_id.clone(),
                });
            }
            let gas_wei = &g_prime * (&b + f_prime);
            let adjusted_raw = (Dec::from_u128(trade.amount_in.raw) - gas_wei)
                .floor_u128()
                .filter(|raw| *raw > 0)
                .ok_or_else(|| PriceError::NonPositiveAdjustedInput {
                    trade_id: trade.trade_id.clone(),
                })?;
            let requote = baseline.quote(trade, offset, &TokenAmount::wei(adjusted_raw))?;
            let o_second = requote.out_estimate.normalized();
            (
                &o_second / (&adjusted + &cost),
                PriceCase::CounterfactualInternalGas,
                x_prime(o_second),
                adjusted,
            )
        }
    };
    Ok(Counterfactual {
        price: Price { value, case },
        x_prime: x,
        routed_input: routed,
        quote,
    })
}

/// The user-paid-gas price as a function of `(o, g, f)` with the input and
/// base fee held fixed. Attribution expands this function about `x'`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceFunction {
    pub direction: Direction,
    /// Input amount the gas is added to (`WETH_IN`) or divided by
    /// (`WETH_OUT`), normalized.
    pub input: Dec,
    /// Base fee, wei per gas.
    pub base_fee: Dec,
}

impl PriceFunction {
    /// The function whose value at `x'` is the counterfactual price.
    ///
    /// Filler-paid `WETH_IN` trades use the baseline's routed input
    /// `i' = i - g'(b+f')`, so that `P(x') = o''/(i' + g'(b+f')) = p'`.
    pub fn for_trade(trade: &TradeRecord, x_prime: &DecisionVector) -> Self {
        let b = base_fee(trade);
        let i = trade.amount_in.normalized();
        let input = match (trade.gas_internalized, trade.direction) {
            (true, Direction::WethIn) => i - gas_cost_eth(&x_prime.gas, &b, &x_prime.priority_fee),
            _ => i,
        };
        PriceFunction {
            direction: trade.direction,
            input,
            base_fee: b,
        }
    }

    pub fn eval(&self, x: &DecisionVector) -> Dec {
        let cost = gas_cost_eth(&x.gas, &self.base_fee, &x.priority_fee);
        match self.direction {
            Direction::WethIn => &x.output / (&self.input + cost),
            Direction::WethOut => (&x.output - cost) / &self.input,
        }
    }
}

/// The realized decision vector `x`, expressed so that `P(x) = p` under
/// [`PriceFunction::for_trade`].
///
/// User-paid gas: `x = (o, g, f)`. Filler-paid gas assumes the filler was
/// compensated exactly `g(b+f)`:
/// * `WETH_OUT`: the gross output before the filler kept its gas,
///   `o + g(b+f)`;
/// * `WETH_IN`: the output the user's realized efficiency `o/i` implies for
///   the baseline's routed input plus the realized gas,
///   `o (i' + g(b+f)) / i`.
pub fn realized_decision(trade: &TradeRecord, x_prime: &DecisionVector) -> DecisionVector {
    let o = trade.amount_out.normalized();
    let gas = Dec::from_u128(trade.gas.gas_used);
    let fee = Dec::from_u128(trade.gas.priority_fee);
    let output = match (trade.gas_internalized, trade.direction) {
        (false, _) => o,
        (true, Direction::WethOut) => o + trade.gas.cost_eth(),
        (true, Direction::WethIn) => {
            let routed = PriceFunction::for_trade(trade, x_prime).input;
            o * (routed + trade.gas.cost_eth()) / trade.amount_in.normalized()
        }
    };
    DecisionVector {
        output,
        gas,
        priority_fee: fee,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::simple::{FixedProvider, LinearProvider};
    use crate::model::{GasTerms, Interface, SettlementPath};

    const GWEI: u128 = 1_000_000_000;

    fn d(s: &str) -> Dec {
        s.parse().unwrap()
    }

    fn trade(direction: Direction, internal: bool, i: TokenAmount, o: TokenAmount, gas: GasTerms) -> TradeRecord {
        TradeRecord {
            trade_id: "t".into(),
            interface: Interface::Uniswap,
            path: SettlementPath::Classic,
            block_number: 1,
            direction,
            gas_internalized: internal,
            amount_in: i,
            amount_out: o,
            gas,
            usd_value: None,
            timestamp: 0,
        }
    }

    fn usdc(units: u128) -> TokenAmount {
        TokenAmount::new(units * 1_000_000, 6).unwrap()
    }

    fn eth(milli: u128) -> TokenAmount {
        TokenAmount::wei(milli * 10u128.pow(15))
    }

    #[test]
    fn weth_in_external_gas_price() {
        let t = trade(
            Direction::WethIn,
            false,
            eth(1000),
            usdc(3000),
            GasTerms::new(150_000, 20 * GWEI, GWEI).unwrap(),
        );
        let p = realized_price(&t);
        assert_eq!(p.case, PriceCase::RealizedExternalGas);
        // 3000 / (1 + 150000 * 21e-9)
        let oracle = d("3000") / d("1.00315");
        assert_eq!(p.value, oracle);
        // the quoted 2990.5796 is the truncated value
        assert!((p.value.to_f64() - 2990.5796).abs() < 1e-4);
        assert_eq!(p.value.to_fixed(4), "2990.5797");
    }

    #[test]
    fn internalized_price_is_plain_ratio() {
        let t = trade(
            Direction::WethIn,
            true,
            eth(2000),
            usdc(6000),
            GasTerms::new(150_000, 20 * GWEI, GWEI).unwrap(),
        );
        assert_eq!(realized_price(&t).value, d("3000"));
    }

    #[test]
    fn weth_out_price_can_be_negative() {
        // o = 0.001 ETH, gas cost 0.002 ETH (100000 gas at 20 gwei), i = 10 USDC
        let t = trade(
            Direction::WethOut,
            false,
            usdc(10),
            eth(1),
            GasTerms::new(100_000, 20 * GWEI, 0).unwrap(),
        );
        let p = realized_price(&t);
        assert!(p.is_negative());
        assert_eq!(p.value, d("-0.0001"));
    }

    #[test]
    fn counterfactual_external_weth_in() {
        let t = trade(
            Direction::WethIn,
            false,
            eth(1000),
            usdc(3000),
            GasTerms::new(150_000, 20 * GWEI, GWEI).unwrap(),
        );
        let provider = FixedProvider::new(usdc(2995), d("140000"));
        let cf = counterfactual_price(&t, &provider, 0, &d("100000000")).unwrap();
        // 2995 / (1 + 140000 * 20.1e-9)
        let oracle = d("2995") / d("1.002814");
        assert_eq!(cf.price.value, oracle);
        assert_eq!(cf.price.value.to_fixed(1), "2986.6");
        assert_eq!(cf.x_prime.gas, d("140000"));
        assert_eq!(cf.x_prime.priority_fee, d("100000000"));
    }

    #[test]
    fn internalized_weth_in_requotes_adjusted_input() {
        // gas cost 0.003 ETH: 150000 gas * (19.9 + 0.1) gwei
        let t = trade(
            Direction::WethIn,
            true,
            eth(1000),
            usdc(2990),
            GasTerms::new(150_000, 19_900_000_000, 0).unwrap(),
        );
        let provider = LinearProvider::new(d("3000"), d("150000"));
        let cf = counterfactual_price(&t, &provider, 0, &d("100000000")).unwrap();
        assert_eq!(cf.routed_input, d("0.997"));
        assert_eq!(cf.x_prime.output, d("2991"));
        assert_eq!(cf.price.value, d("2991"));
        assert_eq!(cf.price.case, PriceCase::CounterfactualInternalGas);
    }

    #[test]
    fn internalized_weth_in_gas_exceeding_input_rejected() {
        let t = trade(
            Direction::WethIn,
            true,
            TokenAmount::wei(1000),
            usdc(1),
            GasTerms::new(1, 1, 0).unwrap(),
        );
        let provider = LinearProvider::new(d("3000"), d("150000"));
        assert!(matches!(
            counterfactual_price(&t, &provider, 0, &d("1")),
            Err(PriceError::NonPositiveAdjustedInput { .. })
        ));
    }

    #[test]
    fn gas_free_limit_collapses_every_case() {
        for internal in [false, true] {
            for (dir, i, o) in [(Direction::WethIn, eth(2000), usdc(6000)), (Direction::WethOut, usdc(4000), eth(2000))] {
                let t = trade(dir, internal, i, o, GasTerms::new(0, 20 * GWEI, 0).unwrap());
                let provider = LinearProvider::new(
                    o.normalized() / i.normalized(),
                    Dec::zero(),
                );
                let cf = counterfactual_price(&t, &provider, 0, &Dec::zero()).unwrap();
                assert_eq!(cf.price.value, o.normalized() / i.normalized(), "{dir:?} {internal}");
            }
        }
    }

    #[test]
    fn self_baseline_reproduces_realized_price() {
        let gas = GasTerms::new(180_000, 25 * GWEI, 2 * GWEI).unwrap();
        let f = Dec::from_u128(gas.priority_fee);
        for (dir, i, o) in [(Direction::WethIn, eth(1500), usdc(4400)), (Direction::WethOut, usdc(4400), eth(1400))] {
            let ext = trade(dir, false, i, o, gas);
            let provider = FixedProvider::new(o, Dec::from_u128(gas.gas_used));
            let cf = counterfactual_price(&ext, &provider, 0, &f).unwrap();
            assert_eq!(cf.price.value, realized_price(&ext).value);
        }
        // filler-paid WETH_OUT: the baseline must return the gross output
        let t = trade(Direction::WethOut, true, usdc(4400), eth(1400), gas);
        let gross = TokenAmount::wei(t.amount_out.raw + t.gas.cost_wei().unwrap());
        let provider = FixedProvider::new(gross, Dec::from_u128(gas.gas_used));
        let cf = counterfactual_price(&t, &provider, 0, &f).unwrap();
        assert_eq!(cf.price.value, realized_price(&t).value);
        // filler-paid WETH_IN: requoting the realized routed input returns o
        let t = trade(Direction::WethIn, true, eth(1500), usdc(4400), gas);
        let provider = FixedProvider::new(t.amount_out, Dec::from_u128(gas.gas_used));
        let cf = counterfactual_price(&t, &provider, 0, &f).unwrap();
        assert_eq!(cf.price.value, realized_price(&t).value);
    }

    #[test]
    fn price_function_matches_both_prices() {
        let gas = GasTerms::new(210_000, 30 * GWEI, 3 * GWEI).unwrap();
        for internal in [false, true] {
            for (dir, i, o) in [(Direction::WethIn, eth(700), usdc(2100)), (Direction::WethOut, usdc(2100), eth(690))] {
                let t = trade(dir, internal, i, o, gas);
                let provider = LinearProvider::new(o.normalized() / i.normalized() * d("0.999"), d("170000"));
                let cf = counterfactual_price(&t, &provider, 0, &d("100000000")).unwrap();
                let func = PriceFunction::for_trade(&t, &cf.x_prime);
                assert_eq!(func.eval(&cf.x_prime), cf.price.value);
                let x = realized_decision(&t, &cf.x_prime);
                let diff = (func.eval(&x) - realized_price(&t).value).abs();
                assert!(diff < d("1e-40"), "{dir:?} {internal}: {diff}");
            }
        }
    }

    #[test]
    fn unit_safety_across_decimal_representations() {
        let gas = GasTerms::new(100_000, 10 * GWEI, GWEI).unwrap();
        let a = trade(Direction::WethIn, false, eth(1000), TokenAmount::new(3_000_000_000, 6).unwrap(), gas);
        let b = trade(Direction::WethIn, false, eth(1000), TokenAmount::new(3_000_000_000_000_000_000_000, 18).unwrap(), gas);
        assert_eq!(realized_price(&a).value, realized_price(&b).value);
    }
}
