use ofapi_core::baseline::{cpmm_swap_out, route_optimal_split};
use ofapi_core::{Dec, Direction, Pool, TokenAmount};
use proptest::prelude::*;

fn arb_pool(k: usize) -> impl Strategy<Value = Pool> {
    (100u64..50_000, 2500.0f64..3500.0, prop::sample::select(vec![1u32, 5, 30, 100]), 50_000u64..90_000).prop_map(
        move |(weth, price, fee_bps, gas)| Pool {
            pool_id: format!("p{k}"),
            reserve_weth: TokenAmount::wei(weth as u128 * 10u128.pow(18)),
            reserve_token: TokenAmount::new((weth as f64 * price * 1e6) as u128, 6).unwrap(),
            fee_bps,
            gas_per_hop: gas,
        },
    )
}

fn arb_pools() -> impl Strategy<Value = Vec<Pool>> {
    (1usize..6).prop_flat_map(|n| (0..n).map(arb_pool).collect::<Vec<_>>())
}

fn amount(direction: Direction, eth: f64) -> TokenAmount {
    match direction {
        Direction::WethIn => TokenAmount::wei((eth * 1e18) as u128),
        Direction::WethOut => TokenAmount::new((eth * 3000.0 * 1e6) as u128, 6).unwrap(),
    }
}

proptest! {
    #[test]
    fn split_conserves_input_and_beats_single_pools(
        pools in arb_pools(),
        eth in 0.01f64..2000.0,
        weth_in in any::<bool>(),
        gwei in 1u64..200,
    ) {
        let direction = if weth_in { Direction::WethIn } else { Direction::WethOut };
        let a = amount(direction, eth);
        let price = Dec::from_u128(gwei as u128 * 1_000_000_000);
        let r = route_optimal_split(&pools, &a, direction, &price).unwrap();
        let routed: u128 = r.splits.iter().map(|s| s.amount_in).sum();
        prop_assert_eq!(routed, a.raw);
        let shares: f64 = r.splits.iter().map(|s| s.share).sum();
        prop_assert!((shares - 1.0).abs() < 1e-9);
        // the total equals the sum of the per-pool swaps
        let summed: u128 = r
            .splits
            .iter()
            .map(|s| {
                let pool = pools.iter().find(|p| p.pool_id == s.pool_id).unwrap();
                cpmm_swap_out(pool, &TokenAmount { raw: s.amount_in, decimals: a.decimals }, direction).raw
            })
            .sum();
        prop_assert_eq!(summed, r.total_out.raw);
        for p in &pools {
            let single = route_optimal_split(std::slice::from_ref(p), &a, direction, &price).unwrap();
            prop_assert!(r.net_output >= single.net_output - 1e-9 * single.net_output.abs().max(1.0));
        }
    }

    #[test]
    fn adding_a_pool_never_hurts(pools in arb_pools(), extra in arb_pool(9), eth in 0.01f64..2000.0) {
        let a = amount(Direction::WethOut, eth);
        let price = Dec::from_u128(20_000_000_000);
        let before = route_optimal_split(&pools, &a, Direction::WethOut, &price).unwrap();
        let mut more = pools.clone();
        more.push(extra);
        let after = route_optimal_split(&more, &a, Direction::WethOut, &price).unwrap();
        prop_assert!(after.net_output >= before.net_output - 1e-9 * before.net_output.abs().max(1.0));
    }
}
