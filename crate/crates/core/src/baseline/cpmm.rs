//! Constant-product swap math.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::model::{Direction, Pool, TokenAmount};

/// Exact output of a constant-product swap, rounded down to base units:
/// `floor(R_out * a (1 - fee) / (R_in + a (1 - fee)))`.
pub fn cpmm_swap_out(pool: &Pool, amount_in: &TokenAmount, direction: Direction) -> TokenAmount {
    let (r_in, r_out) = pool.reserves(direction);
    let kept = BigUint::from(10_000 - pool.fee_bps);
    let effective = BigUint::from(amount_in.raw) * &kept;
    let numerator = BigUint::from(r_out.raw) * &effective;
    let denominator = BigUint::from(r_in.raw) * 10_000u32 + effective;
    let out = numerator / denominator;
    TokenAmount {
        raw: out.to_u128().expect("output below reserve"),
        decimals: r_out.decimals,
    }
}

/// Continuous normalized view of one pool for one swap direction.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Curve {
    pub reserve_in: f64,
    pub reserve_out: f64,
    /// `1 - fee`.
    pub gamma: f64,
}

impl Curve {
    pub fn new(pool: &Pool, direction: Direction) -> Self {
        let (r_in, r_out) = pool.reserves(direction);
        Curve {
            reserve_in: r_in.normalized().to_f64(),
            reserve_out: r_out.normalized().to_f64(),
            gamma: 1.0 - pool.fee_bps as f64 / 10_000.0,
        }
    }

    pub fn out(&self, amount: f64) -> f64 {
        if amount <= 0.0 {
            return 0.0;
        }
        let a = self.gamma * amount;
        self.reserve_out * a / (self.reserve_in + a)
    }

    /// Marginal output per unit input at zero size.
    pub fn spot(&self) -> f64 {
        self.gamma * self.reserve_out / self.reserve_in
    }
}
