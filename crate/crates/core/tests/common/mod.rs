#![allow(dead_code)]

use ofapi_core::baseline::simple::LinearProvider;
use ofapi_core::{Dec, Direction, GasTerms, Interface, SettlementPath, TokenAmount, TradeRecord};
use proptest::prelude::*;

pub const GWEI: u128 = 1_000_000_000;

#[derive(Debug, Clone)]
pub struct Fixture {
    pub trade: TradeRecord,
    /// Baseline output per unit input.
    pub rate: f64,
    pub gas_prime: u128,
    pub f_prime: u128,
}

impl Fixture {
    pub fn provider(&self) -> LinearProvider {
        LinearProvider::new(Dec::from_f64(self.rate).unwrap(), Dec::from_u128(self.gas_prime))
    }

    pub fn f_prime_dec(&self) -> Dec {
        Dec::from_u128(self.f_prime)
    }
}

pub fn trade(
    id: &str,
    direction: Direction,
    internalized: bool,
    amount_in: TokenAmount,
    amount_out: TokenAmount,
    gas: GasTerms,
) -> TradeRecord {
    let path = if internalized { SettlementPath::X } else { SettlementPath::Classic };
    TradeRecord {
        trade_id: id.into(),
        interface: Interface::Uniswap,
        path,
        block_number: 19_000_000,
        direction,
        gas_internalized: internalized,
        amount_in,
        amount_out,
        gas,
        usd_value: Some(Dec::from_u128(10_000)),
        timestamp: 1_700_000_000,
    }
}

/// Random trade priced near 3000 token/WETH with a linear baseline near the
/// same price. Inputs are large enough that every price is positive.
pub fn fixture(direction: Direction, internalized: bool) -> impl Strategy<Value = Fixture> {
    (
        0.1f64..1000.0,
        1500.0f64..4500.0,
        -0.005f64..0.005,
        -0.005f64..0.005,
        50_000u128..500_000,
        50_000u128..500_000,
        (1u128..100, 0u128..5_000_000_000, 10_000_000u128..2_000_000_000),
    )
        .prop_map(move |(eth, price, d_real, d_base, g, g_prime, (b_gwei, f, f_prime))| {
            let (amount_in, amount_out, rate) = match direction {
                Direction::WethIn => {
                    let i = (eth * 1e18) as u128;
                    let o = (eth * price * (1.0 + d_real) * 1e6) as u128;
                    (TokenAmount::wei(i), TokenAmount::new(o, 6).unwrap(), price * (1.0 + d_base))
                }
                Direction::WethOut => {
                    let i = (eth * price * 1e6) as u128;
                    let o = (eth * (1.0 + d_real) * 1e18) as u128;
                    (TokenAmount::new(i, 6).unwrap(), TokenAmount::wei(o), (1.0 + d_base) / price)
                }
            };
            let gas = GasTerms::new(g, b_gwei * GWEI, f).unwrap();
            Fixture {
                trade: trade("p", direction, internalized, amount_in, amount_out, gas),
                rate,
                gas_prime: g_prime,
                f_prime,
            }
        })
}

pub fn any_fixture() -> impl Strategy<Value = Fixture> {
    prop_oneof![
        fixture(Direction::WethIn, false),
        fixture(Direction::WethIn, true),
        fixture(Direction::WethOut, false),
        fixture(Direction::WethOut, true),
    ]
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
