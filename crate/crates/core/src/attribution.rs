//! Price improvement `π = (p − p')/p'` and its first-order decomposition
//! into routing, gas and priority-fee contributions about the baseline.

use crate::baseline::BaselineProvider;
use crate::decimal::Dec;
use crate::model::{Direction, TradeRecord};
use crate::price::{
    counterfactual_price, realized_decision, realized_price, wei_to_eth, Counterfactual, DecisionVector, Price,
    PriceError, PriceFunction,
};

#[derive(Debug, thiserror::Error)]
pub enum AttributionError {
    #[error("baseline price {0} is not positive")]
    NonPositiveBaseline(Dec),
    #[error(transparent)]
    Price(#[from] PriceError),
}

pub fn price_improvement(p: &Price, p_prime: &Price) -> Result<Dec, AttributionError> {
    if !p_prime.value.is_positive() {
        return Err(AttributionError::NonPositiveBaseline(p_prime.value.clone()));
    }
    Ok((&p.value - &p_prime.value) / &p_prime.value)
}

/// `ρ(Δt)` at each offset. Offsets the baseline cannot price are kept as
/// gaps holding their error.
pub fn pi_curve(
    trade: &TradeRecord,
    baseline: &dyn BaselineProvider,
    offsets: &[i64],
    f_prime: &Dec,
) -> Vec<(i64, Result<Dec, AttributionError>)> {
    let p = realized_price(trade);
    offsets
        .iter()
        .map(|&dt| {
            let rho = counterfactual_price(trade, baseline, dt, f_prime)
                .map_err(AttributionError::from)
                .and_then(|cf| price_improvement(&p, &cf.price));
            (dt, rho)
        })
        .collect()
}

/// `∂p/∂o`, `∂p/∂g`, `∂p/∂f` at `x'`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partials {
    pub d_output: Dec,
    pub d_gas: Dec,
    pub d_fee: Dec,
}

pub fn partials_at_baseline(trade: &TradeRecord, x_prime: &DecisionVector) -> Partials {
    partials_of(&PriceFunction::for_trade(trade, x_prime), x_prime)
}

fn partials_of(func: &PriceFunction, x: &DecisionVector) -> Partials {
    let fee_eth = wei_to_eth(&(&func.base_fee + &x.priority_fee));
    let gas_eth = wei_to_eth(&x.gas);
    match func.direction {
        Direction::WethIn => {
            let denom = &func.input + &x.gas * &fee_eth;
            let denom_sq = &denom * &denom;
            Partials {
                d_output: Dec::one() / &denom,
                d_gas: -(&x.output * &fee_eth) / &denom_sq,
                d_fee: -(&x.output * &gas_eth) / &denom_sq,
            }
        }
        Direction::WethOut => Partials {
            d_output: Dec::one() / &func.input,
            d_gas: -fee_eth / &func.input,
            d_fee: -gas_eth / &func.input,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributionResult {
    pub trade_id: String,
    pub offset: i64,
    pub pi: Dec,
    pub pi_routing: Dec,
    pub pi_gas: Dec,
    pub pi_fee: Dec,
    /// Exact residual `π − (routing + gas + fee)`.
    pub pi_remainder: Dec,
    pub x: DecisionVector,
    pub x_prime: DecisionVector,
    pub p: Price,
    pub p_prime: Price,
}

impl AttributionResult {
    pub fn components(&self) -> [&Dec; 5] {
        [&self.pi, &self.pi_routing, &self.pi_gas, &self.pi_fee, &self.pi_remainder]
    }
}

pub fn attribute(
    trade: &TradeRecord,
    offset: i64,
    x: &DecisionVector,
    x_prime: &DecisionVector,
    p: &Price,
    p_prime: &Price,
) -> Result<AttributionResult, AttributionError> {
    let pi = price_improvement(p, p_prime)?;
    let d = partials_at_baseline(trade, x_prime);
    let pp = &p_prime.value;
    let pi_routing = &d.d_output * (&x.output - &x_prime.output) / pp;
    let pi_gas = &d.d_gas * (&x.gas - &x_prime.gas) / pp;
    let pi_fee = &d.d_fee * (&x.priority_fee - &x_prime.priority_fee) / pp;
    let pi_remainder = &pi - (&pi_routing + &pi_gas + &pi_fee);
    Ok(AttributionResult {
        trade_id: trade.trade_id.clone(),
        offset,
        pi,
        pi_routing,
        pi_gas,
        pi_fee,
        pi_remainder,
        x: x.clone(),
        x_prime: x_prime.clone(),
        p: p.clone(),
        p_prime: p_prime.clone(),
    })
}

/// Attribution against an already computed counterfactual.
pub fn attribute_counterfactual(
    trade: &TradeRecord,
    offset: i64,
    cf: &Counterfactual,
) -> Result<AttributionResult, AttributionError> {
    let p = realized_price(trade);
    let x = realized_decision(trade, &cf.x_prime);
    attribute(trade, offset, &x, &cf.x_prime, &p, &cf.price)
}

/// Prices the trade against `baseline` at `offset` and attributes.
pub fn attribute_at(
    trade: &TradeRecord,
    baseline: &dyn BaselineProvider,
    offset: i64,
    f_prime: &Dec,
) -> Result<AttributionResult, AttributionError> {
    let cf = counterfactual_price(trade, baseline, offset, f_prime)?;
    attribute_counterfactual(trade, offset, &cf)
}

/// `v · 10⁴`, half-even to 4 decimal places.
pub fn to_bps(v: &Dec) -> String {
    (v * Dec::from_u128(10_000)).to_fixed(4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::simple::FixedProvider;
    use crate::model::{GasTerms, Interface, SettlementPath, TokenAmount};
    use crate::price::PriceCase;

    const GWEI: u128 = 1_000_000_000;
    const ETH: u128 = 1_000_000_000_000_000_000;

    fn d(s: &str) -> Dec {
        s.parse().unwrap()
    }

    fn price(s: &str) -> Price {
        Price {
            value: d(s),
            case: PriceCase::RealizedExternalGas,
        }
    }

    fn trade(direction: Direction, internal: bool, i: TokenAmount, o: TokenAmount, gas: GasTerms) -> TradeRecord {
        TradeRecord {
            trade_id: "T1".into(),
            interface: Interface::Uniswap,
            path: if internal { SettlementPath::X } else { SettlementPath::Classic },
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

    #[test]
    fn improvement_basics() {
        assert!(price_improvement(&price("3000"), &price("3000")).unwrap().is_zero());
        assert_eq!(price_improvement(&price("3001.5"), &price("3000")).unwrap(), d("0.0005"));
        assert_eq!(to_bps(&d("0.0005")), "5.0000");
        assert!(matches!(
            price_improvement(&price("1"), &price("0")),
            Err(AttributionError::NonPositiveBaseline(_))
        ));
    }

    #[test]
    fn identical_vectors_give_zero_components() {
        let t = trade(Direction::WethIn, false, TokenAmount::wei(ETH), usdc(3000), GasTerms::new(150_000, 20 * GWEI, GWEI).unwrap());
        let x = DecisionVector {
            output: d("3000"),
            gas: d("150000"),
            priority_fee: Dec::from_u128(GWEI),
        };
        let p = realized_price(&t);
        let r = attribute(&t, 0, &x, &x, &p, &p).unwrap();
        for c in r.components() {
            assert!(c.is_zero());
        }
    }

    #[test]
    fn weth_out_unit_input_output_partial() {
        let t = trade(Direction::WethOut, false, usdc(1), TokenAmount::wei(ETH / 3000), GasTerms::new(1, 1, 1).unwrap());
        let x = DecisionVector {
            output: d("0.0003"),
            gas: d("100000"),
            priority_fee: d("100000000"),
        };
        assert_eq!(partials_at_baseline(&t, &x).d_output, Dec::one());
    }

    #[test]
    fn gas_free_weth_in_partials() {
        let t = trade(Direction::WethIn, false, TokenAmount::wei(2 * ETH), usdc(6000), GasTerms::new(1, 0, 0).unwrap());
        let x = DecisionVector {
            output: d("6000"),
            gas: Dec::zero(),
            priority_fee: d("100000000"),
        };
        let dp = partials_at_baseline(&t, &x);
        assert_eq!(dp.d_output, d("0.5"));
        assert!(dp.d_fee.is_zero());
    }

    #[test]
    fn weth_out_remainder_is_bilinear_term() {
        let t = trade(
            Direction::WethOut,
            false,
            usdc(3000),
            TokenAmount::wei(ETH),
            GasTerms::new(120_000, 15 * GWEI, 2 * GWEI).unwrap(),
        );
        let cf = FixedProvider::new(TokenAmount::wei(ETH - ETH / 1000), d("150000"));
        let f_prime = Dec::from_u128(GWEI / 10);
        let r = attribute_at(&t, &cf, 0, &f_prime).unwrap();
        let dg = d("120000") - d("150000");
        let df = Dec::from_u128(2 * GWEI) - &f_prime;
        let expected = -(dg * df * Dec::pow10(-18)) / (d("3000") * &r.p_prime.value);
        assert!(((&r.pi_remainder - &expected) / &expected).abs() < d("1e-30"));
        let sum = &r.pi_routing + &r.pi_gas + &r.pi_fee + &r.pi_remainder;
        assert_eq!(sum, r.pi);
    }

    #[test]
    fn sign_contracts_external_gas() {
        let base = DecisionVector {
            output: d("3000"),
            gas: d("150000"),
            priority_fee: d("100000000"),
        };
        let t = trade(Direction::WethIn, false, TokenAmount::wei(ETH), usdc(3000), GasTerms::new(150_000, 20 * GWEI, GWEI).unwrap());
        let func = PriceFunction::for_trade(&t, &base);
        let pp = Price { value: func.eval(&base), case: PriceCase::CounterfactualExternalGas };
        let check = |x: DecisionVector| {
            let p = Price { value: func.eval(&x), case: PriceCase::RealizedExternalGas };
            attribute(&t, 0, &x, &base, &p, &pp).unwrap()
        };
        let r = check(DecisionVector { output: d("3001"), ..base.clone() });
        assert!(r.pi_routing.is_positive());
        let r = check(DecisionVector { gas: d("140000"), ..base.clone() });
        assert!(r.pi_gas.is_positive());
        let r = check(DecisionVector { priority_fee: d("50000000"), ..base.clone() });
        assert!(r.pi_fee.is_positive());
    }

    #[test]
    fn curve_tracks_baseline_and_records_gaps() {
        use crate::baseline::ReplayProvider;
        use crate::ingest::{ingest_quotes, Format};
        let t = trade(Direction::WethIn, false, TokenAmount::wei(ETH), usdc(3000), GasTerms::new(150_000, 20 * GWEI, GWEI).unwrap());
        let csv = "trade_id,offset,out_estimate_raw,out_estimate_decimals,gas_estimate,provider_id\n\
                   T1,-1,2990000000,6,150000,r\nT1,0,2995000000,6,150000,r\n";
        let (quotes, _) = ingest_quotes(csv.as_bytes(), Format::Csv, true).unwrap();
        let provider = ReplayProvider::new(quotes, None).unwrap();
        let f_prime = d("100000000");
        let curve = pi_curve(&t, &provider, &[-2, -1, 0], &f_prime);
        assert!(curve[0].1.is_err());
        let rho_m1 = curve[1].1.as_ref().unwrap();
        let rho_0 = curve[2].1.as_ref().unwrap();
        assert!(rho_m1 > rho_0);
        let direct = attribute_at(&t, &provider, 0, &f_prime).unwrap();
        assert_eq!(&direct.pi, rho_0);
    }
}
