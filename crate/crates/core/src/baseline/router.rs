//! Gas-aware optimal order splitting across constant-product pools.
//!
//! For a fixed set of pools the output-maximizing split equalizes marginal
//! output across every pool that receives flow (water-filling on the
//! concave CPMM curves). The pool set itself is chosen by maximizing output
//! net of the per-hop gas cost: exhaustively over subsets for up to
//! [`MAX_EXHAUSTIVE_POOLS`] pools, by greedy forward selection beyond.
//!
//! Gas is valued in output units at the zero-size marginal price of the
//! pool with the largest WETH reserve.

use crate::decimal::Dec;
use crate::model::{Direction, Pool, TokenAmount};

use super::cpmm::{cpmm_swap_out, Curve};
use super::BaselineError;

/// Shares below this are dropped together with their hop gas.
pub const SHARE_FLOOR: f64 = 1e-6;
pub const MAX_EXHAUSTIVE_POOLS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub pool_id: String,
    pub share: f64,
    /// Base units routed to this pool.
    pub amount_in: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteResult {
    pub splits: Vec<Split>,
    pub total_out: TokenAmount,
    pub total_gas: u64,
    /// `total_out` minus valued gas, normalized output units.
    pub net_output: f64,
}

/// Output units lost per gas unit at `gas_price_wei`.
pub fn gas_value_per_unit(pools: &[Pool], direction: Direction, gas_price_wei: &Dec) -> f64 {
    let eth_per_gas = gas_price_wei.to_f64() * 1e-18;
    match direction {
        Direction::WethOut => eth_per_gas,
        Direction::WethIn => {
            let deepest = pools
                .iter()
                .enumerate()
                .max_by(|(ia, a), (ib, b)| {
                    a.reserve_weth
                        .raw
                        .cmp(&b.reserve_weth.raw)
                        .then(ib.cmp(ia))
                })
                .map(|(_, p)| p);
            deepest.map_or(0.0, |p| eth_per_gas * Curve::new(p, Direction::WethIn).spot())
        }
    }
}

/// Output-maximizing allocation of `amount` over `members` (indices into
/// `curves`), zero for pools the optimum leaves unused.
fn water_fill(curves: &[Curve], members: &[usize], amount: f64) -> Vec<f64> {
    let mut order: Vec<usize> = members.to_vec();
    order.sort_by(|&a, &b| curves[b].spot().total_cmp(&curves[a].spot()).then(a.cmp(&b)));
    let mut alloc = vec![0.0; curves.len()];
    for k in 1..=order.len() {
        let active = &order[..k];
        // with s_j = sqrt(gamma R_in R_out): R_in + gamma a_j = s_j * t, t = 1/sqrt(lambda)
        let (mut sum_s, mut sum_r) = (0.0, 0.0);
        for &j in active {
            let c = &curves[j];
            sum_s += (c.gamma * c.reserve_in * c.reserve_out).sqrt() / c.gamma;
            sum_r += c.reserve_in / c.gamma;
        }
        let t = (amount + sum_r) / sum_s;
        let lambda = 1.0 / (t * t);
        let next_inactive = order.get(k).is_none_or(|&j| curves[j].spot() <= lambda);
        if next_inactive || k == order.len() {
            for &j in active {
                let c = &curves[j];
                let s = (c.gamma * c.reserve_in * c.reserve_out).sqrt();
                alloc[j] = ((s * t - c.reserve_in) / c.gamma).max(0.0);
            }
            let total: f64 = alloc.iter().sum();
            if total > 0.0 {
                alloc.iter_mut().for_each(|a| *a *= amount / total);
            }
            return alloc;
        }
    }
    alloc
}

struct Candidate {
    alloc: Vec<f64>,
    objective: f64,
}

fn evaluate(curves: &[Curve], pools: &[Pool], members: &[usize], amount: f64, gas_value: f64) -> Candidate {
    let alloc = water_fill(curves, members, amount);
    let mut objective = 0.0;
    for (j, &a) in alloc.iter().enumerate() {
        if a > SHARE_FLOOR * amount {
            objective += curves[j].out(a) - gas_value * pools[j].gas_per_hop as f64;
        }
    }
    Candidate { alloc, objective }
}

/// Best split of `amount_in` over `pools` net of hop gas at `gas_price_wei`.
pub fn route_optimal_split(
    pools: &[Pool],
    amount_in: &TokenAmount,
    direction: Direction,
    gas_price_wei: &Dec,
) -> Result<RouteResult, BaselineError> {
    if pools.is_empty() {
        return Err(BaselineError::NoPools);
    }
    let curves: Vec<Curve> = pools.iter().map(|p| Curve::new(p, direction)).collect();
    let amount = amount_in.normalized().to_f64();
    let gas_value = gas_value_per_unit(pools, direction, gas_price_wei);
    let n = pools.len();

    let mut best: Option<Candidate> = None;
    let consider = |cand: Candidate, best: &mut Option<Candidate>| {
        if best.as_ref().is_none_or(|b| cand.objective > b.objective) {
            *best = Some(cand);
        }
    };

    if n <= MAX_EXHAUSTIVE_POOLS {
        for mask in 1u32..(1 << n) {
            let members: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
            consider(evaluate(&curves, pools, &members, amount, gas_value), &mut best);
        }
    } else {
        let mut members: Vec<usize> = Vec::new();
        loop {
            let mut step: Option<(usize, Candidate)> = None;
            for j in (0..n).filter(|j| !members.contains(j)) {
                let mut trial = members.clone();
                trial.push(j);
                let cand = evaluate(&curves, pools, &trial, amount, gas_value);
                if step.as_ref().is_none_or(|(_, s)| cand.objective > s.objective) {
                    step = Some((j, cand));
                }
            }
            match step {
                Some((j, cand)) if best.as_ref().is_none_or(|b| cand.objective > b.objective) => {
                    members.push(j);
                    best = Some(cand);
                }
                _ => break,
            }
        }
    }

    let alloc = best.expect("at least one candidate").alloc;
    Ok(materialize(pools, &alloc, amount_in, direction, gas_value))
}

/// Turns a continuous allocation into base-unit splits and exact outputs.
fn materialize(
    pools: &[Pool],
    alloc: &[f64],
    amount_in: &TokenAmount,
    direction: Direction,
    gas_value: f64,
) -> RouteResult {
    let total: f64 = alloc.iter().sum();
    let mut shares: Vec<f64> = alloc
        .iter()
        .map(|&a| if total > 0.0 { a / total } else { 0.0 })
        .map(|s| if s < SHARE_FLOOR { 0.0 } else { s })
        .collect();
    let kept: f64 = shares.iter().sum();
    if kept <= 0.0 {
        // degenerate input; everything to the first pool
        shares = vec![0.0; pools.len()];
        shares[0] = 1.0;
    } else {
        shares.iter_mut().for_each(|s| *s /= kept);
    }

    let mut amounts: Vec<u128> = shares
        .iter()
        .map(|&s| (s * amount_in.raw as f64).floor() as u128)
        .collect();
    let assigned: u128 = amounts.iter().sum();
    let largest = shares
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.total_cmp(b).then(ib.cmp(ia)))
        .map(|(j, _)| j)
        .unwrap_or(0);
    if assigned <= amount_in.raw {
        amounts[largest] += amount_in.raw - assigned;
    } else {
        amounts[largest] -= assigned - amount_in.raw;
    }

    let out_decimals = pools[0].reserves(direction).1.decimals;
    let mut splits = Vec::new();
    let mut total_out: u128 = 0;
    let mut total_gas: u64 = 0;
    for (j, pool) in pools.iter().enumerate() {
        if amounts[j] == 0 {
            continue;
        }
        let out = cpmm_swap_out(pool, &TokenAmount::new(amounts[j], amount_in.decimals).unwrap_or(*amount_in), direction);
        total_out += out.raw;
        total_gas += pool.gas_per_hop;
        splits.push(Split {
            pool_id: pool.pool_id.clone(),
            share: amounts[j] as f64 / amount_in.raw as f64,
            amount_in: amounts[j],
        });
    }
    let total_out = TokenAmount {
        raw: total_out,
        decimals: out_decimals,
    };
    let net_output = total_out.normalized().to_f64() - gas_value * total_gas as f64;
    RouteResult {
        splits,
        total_out,
        total_gas,
        net_output,
    }
}
