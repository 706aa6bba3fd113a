//! Seeded synthetic datasets with known ground truth.
//!
//! Router-executed paths (`Classic`, `Aggregator`) settle at exactly the
//! synthetic router's offset-0 output, perturbed by symmetric execution
//! noise, so their self-baseline price improvement is zero in expectation.
//! OFA paths (`X`, `Fusion`) are filler-paid and receive an extra output
//! fraction on top of the routed amount.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! the spec's `seed`, consumed in a fixed order: pool snapshots first, then
//! trades one at a time.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::baseline::{route_optimal_split, BaselineProvider, SyntheticProvider};
use crate::decimal::Dec;
use crate::ingest::{write_csv, IngestError, SnapshotPool};
use crate::model::{Direction, GasTerms, Pool, Quote, SettlementPath, TokenAmount, TradeRecord, WETH_DECIMALS};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Write(#[from] IngestError),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::InvalidSpec(msg.into())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SizeDistribution {
    LogUniform { min_usd: f64, max_usd: f64 },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasProfile {
    /// Realized gas relative to the router's (bias-corrected) estimate.
    #[serde(default = "one")]
    pub gas_scale: f64,
    /// Relative standard deviation of realized gas.
    #[serde(default = "default_gas_noise")]
    pub gas_noise: f64,
    #[serde(default = "default_priority_fee")]
    pub priority_fee_gwei: [f64; 2],
}

impl Default for GasProfile {
    fn default() -> Self {
        GasProfile {
            gas_scale: 1.0,
            gas_noise: default_gas_noise(),
            priority_fee_gwei: default_priority_fee(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSpec {
    pub pool_id: String,
    /// Normalized WETH reserve, e.g. `"20000"`.
    pub reserve_weth: String,
    /// Normalized token reserve.
    pub reserve_token: String,
    pub fee_bps: u32,
    pub gas_per_hop: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_trades: usize,
    pub size_distribution: SizeDistribution,
    /// Mix weights keyed by path name (`Classic`, `X`, `Aggregator`,
    /// `Fusion`); must sum to 1.
    pub paths: BTreeMap<String, f64>,
    /// Extra output fraction for OFA fills, e.g. `0.0005` for 5 bps.
    #[serde(default)]
    pub ofa_liquidity_bonus: f64,
    /// OFA fills smaller than this (USD) get no bonus.
    #[serde(default)]
    pub bonus_min_usd: Option<f64>,
    /// Router gas estimate divided by true gas.
    #[serde(default = "one")]
    pub estimator_gas_bias: f64,
    /// Standard deviation of multiplicative execution noise on outputs.
    #[serde(default)]
    pub execution_noise_bps: f64,
    /// When set, the noise standard deviation scales as
    /// `sqrt(ref / size_usd)`, i.e. variance inversely proportional to size.
    #[serde(default)]
    pub execution_noise_ref_usd: Option<f64>,
    #[serde(default = "half")]
    pub weth_in_fraction: f64,
    #[serde(default = "default_base_fee")]
    pub base_fee_gwei: [f64; 2],
    #[serde(default = "default_f_prime")]
    pub f_prime_gwei: f64,
    #[serde(default = "default_overhead")]
    pub fixed_overhead_gas: u64,
    /// Inclusive offset range of the pool snapshots and quotes.
    #[serde(default = "default_offsets")]
    pub offsets: [i64; 2],
    /// Relative reserve-depth jitter of non-zero offsets.
    #[serde(default)]
    pub depth_jitter: f64,
    /// Price jitter of non-zero offsets, basis points.
    #[serde(default)]
    pub price_jitter_bps: f64,
    #[serde(default = "default_token_decimals")]
    pub token_decimals: u8,
    #[serde(default)]
    pub gas_profiles: BTreeMap<String, GasProfile>,
    pub pools: Vec<PoolSpec>,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_gas_noise() -> f64 {
    0.05
}
fn default_priority_fee() -> [f64; 2] {
    [0.05, 0.15]
}
fn default_base_fee() -> [f64; 2] {
    [10.0, 30.0]
}
fn default_f_prime() -> f64 {
    0.1
}
fn default_overhead() -> u64 {
    crate::baseline::DEFAULT_FIXED_OVERHEAD_GAS
}
fn default_offsets() -> [i64; 2] {
    [-4, 3]
}
fn default_token_decimals() -> u8 {
    6
}

fn check_range(name: &str, r: [f64; 2]) -> Result<(), ScenarioError> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] >= 0.0 && r[0] <= r[1]) {
        return Err(invalid(format!("{name} must be a nonnegative [lo, hi] range")));
    }
    Ok(())
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_trades == 0 {
            return Err(invalid("n_trades must be positive"));
        }
        let SizeDistribution::LogUniform { min_usd, max_usd } = self.size_distribution;
        if !(min_usd > 0.0 && min_usd < max_usd && max_usd.is_finite()) {
            return Err(invalid("size_distribution needs 0 < min_usd < max_usd"));
        }
        if self.paths.is_empty() {
            return Err(invalid("paths mix is empty"));
        }
        for (name, w) in &self.paths {
            if matches!(SettlementPath::parse(name), SettlementPath::Other(_)) {
                return Err(invalid(format!("unknown path {name}")));
            }
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(invalid(format!("path weight for {name} must be nonnegative")));
            }
        }
        let total: f64 = self.paths.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("path weights sum to {total}, expected 1")));
        }
        for name in self.gas_profiles.keys() {
            if !self.paths.contains_key(name) {
                return Err(invalid(format!("gas profile for path {name} not in mix")));
            }
        }
        for (name, p) in &self.gas_profiles {
            if !(p.gas_scale > 0.0 && p.gas_noise >= 0.0 && p.gas_noise < 0.5) {
                return Err(invalid(format!("gas profile {name}: need gas_scale > 0 and 0 <= gas_noise < 0.5")));
            }
            check_range(&format!("gas_profiles.{name}.priority_fee_gwei"), p.priority_fee_gwei)?;
        }
        if !(self.ofa_liquidity_bonus >= 0.0 && self.ofa_liquidity_bonus < 1.0) {
            return Err(invalid("ofa_liquidity_bonus must be in [0, 1)"));
        }
        if !(self.estimator_gas_bias > 0.0) {
            return Err(invalid("estimator_gas_bias must be positive"));
        }
        if !(self.execution_noise_bps >= 0.0 && self.execution_noise_bps < 1000.0) {
            return Err(invalid("execution_noise_bps must be in [0, 1000)"));
        }
        if self.execution_noise_ref_usd.is_some_and(|r| !(r > 0.0 && r.is_finite())) {
            return Err(invalid("execution_noise_ref_usd must be positive"));
        }
        if !(0.0..=1.0).contains(&self.weth_in_fraction) {
            return Err(invalid("weth_in_fraction must be in [0, 1]"));
        }
        check_range("base_fee_gwei", self.base_fee_gwei)?;
        if !(self.f_prime_gwei >= 0.0) {
            return Err(invalid("f_prime_gwei must be nonnegative"));
        }
        if self.offsets[0] > 0 || self.offsets[1] < 0 {
            return Err(invalid("offsets range must contain 0"));
        }
        if !(0.0..0.9).contains(&self.depth_jitter) || !(0.0..1000.0).contains(&self.price_jitter_bps) {
            return Err(invalid("depth_jitter must be in [0, 0.9) and price_jitter_bps in [0, 1000)"));
        }
        if self.token_decimals > crate::model::MAX_DECIMALS {
            return Err(invalid("token_decimals too large"));
        }
        if self.pools.is_empty() {
            return Err(invalid("pool universe is empty"));
        }
        for p in &self.pools {
            self.pool(p)?;
        }
        Ok(())
    }

    fn pool(&self, p: &PoolSpec) -> Result<Pool, ScenarioError> {
        let raw = |s: &str, decimals: u8| -> Result<u128, ScenarioError> {
            let v: Dec = s.parse().map_err(|_| invalid(format!("pool {}: bad reserve {s}", p.pool_id)))?;
            (v * Dec::pow10(decimals as i64))
                .floor_u128()
                .filter(|r| *r > 0)
                .ok_or_else(|| invalid(format!("pool {}: reserve must be positive", p.pool_id)))
        };
        let pool = Pool {
            pool_id: p.pool_id.clone(),
            reserve_weth: TokenAmount::wei(raw(&p.reserve_weth, WETH_DECIMALS)?),
            reserve_token: TokenAmount {
                raw: raw(&p.reserve_token, self.token_decimals)?,
                decimals: self.token_decimals,
            },
            fee_bps: p.fee_bps,
            gas_per_hop: p.gas_per_hop,
        };
        pool.validate().map_err(|e| invalid(format!("pool {}: {e}", p.pool_id)))?;
        Ok(pool)
    }

    fn f_prime_wei(&self) -> u128 {
        gwei_to_wei(self.f_prime_gwei)
    }
}

fn gwei_to_wei(gwei: f64) -> u128 {
    (gwei * 1e9).round() as u128
}

/// Generated dataset.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub trades: Vec<TradeRecord>,
    pub snapshots: BTreeMap<i64, Vec<Pool>>,
    pub quotes: Vec<Quote>,
}

impl Scenario {
    /// Writes `trades.csv`, `pools.csv` (snapshot form) and `quotes.csv`.
    pub fn write(&self, dir: &Path) -> Result<(), ScenarioError> {
        std::fs::create_dir_all(dir)?;
        write_csv(&self.trades, BufWriter::new(File::create(dir.join("trades.csv"))?))?;
        let snaps: Vec<SnapshotPool> = self
            .snapshots
            .iter()
            .flat_map(|(&offset, pools)| pools.iter().map(move |p| SnapshotPool { offset, pool: p.clone() }))
            .collect();
        write_csv(&snaps, BufWriter::new(File::create(dir.join("pools.csv"))?))?;
        write_csv(&self.quotes, BufWriter::new(File::create(dir.join("quotes.csv"))?))?;
        Ok(())
    }
}

fn scale_raw(raw: u128, factor: f64) -> u128 {
    let f = Dec::from_f64(factor).unwrap_or_else(Dec::one);
    (Dec::from_u128(raw) * f).floor_u128().unwrap_or(0)
}

fn snapshots(spec: &ScenarioSpec, universe: &[Pool], rng: &mut ChaCha8Rng) -> BTreeMap<i64, Vec<Pool>> {
    let mut out = BTreeMap::new();
    for offset in spec.offsets[0]..=spec.offsets[1] {
        let pools = universe
            .iter()
            .map(|p| {
                let depth: f64 = 1.0 + spec.depth_jitter * rng.gen_range(-1.0..=1.0);
                let price: f64 = 1.0 + spec.price_jitter_bps * 1e-4 * rng.gen_range(-1.0..=1.0);
                if offset == 0 {
                    return p.clone();
                }
                let mut q = p.clone();
                q.reserve_weth.raw = scale_raw(p.reserve_weth.raw, depth).max(1);
                q.reserve_token.raw = scale_raw(p.reserve_token.raw, depth * price).max(1);
                q
            })
            .collect();
        out.insert(offset, pools);
    }
    out
}

struct Draw<'a> {
    path: SettlementPath,
    profile: &'a GasProfile,
    direction: Direction,
    size_usd: f64,
    base_fee: u128,
    priority_fee: u128,
    noise: f64,
    gas_factor: f64,
}

pub fn generate(spec: &ScenarioSpec) -> Result<Scenario, ScenarioError> {
    spec.validate()?;
    let universe: Vec<Pool> = spec.pools.iter().map(|p| spec.pool(p)).collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let snapshots = snapshots(spec, &universe, &mut rng);

    let deepest = universe
        .iter()
        .max_by_key(|p| p.reserve_weth.raw)
        .expect("nonempty universe");
    let eth_usd = (deepest.reserve_token.normalized() / deepest.reserve_weth.normalized()).to_f64();

    let path_names: Vec<&String> = spec.paths.keys().collect();
    let path_index = WeightedIndex::new(spec.paths.values().copied()).map_err(|e| invalid(e.to_string()))?;
    let default_profile = GasProfile::default();
    let SizeDistribution::LogUniform { min_usd, max_usd } = spec.size_distribution;
    let (ln_min, ln_max) = (min_usd.ln(), max_usd.ln());
    let f_prime = spec.f_prime_wei();

    let mut trades = Vec::with_capacity(spec.n_trades);
    for k in 0..spec.n_trades {
        let mut attempt = 0;
        let trade = loop {
            attempt += 1;
            if attempt > 1000 {
                return Err(invalid(format!("could not draw a valid trade #{k} in 1000 attempts")));
            }
            let name = path_names[path_index.sample(&mut rng)];
            let base_lo = gwei_to_wei(spec.base_fee_gwei[0]);
            let base_hi = gwei_to_wei(spec.base_fee_gwei[1]);
            let profile = spec.gas_profiles.get(name).unwrap_or(&default_profile);
            let fee_lo = gwei_to_wei(profile.priority_fee_gwei[0]);
            let fee_hi = gwei_to_wei(profile.priority_fee_gwei[1]);
            let direction = if rng.gen::<f64>() < spec.weth_in_fraction {
                Direction::WethIn
            } else {
                Direction::WethOut
            };
            let z_noise: f64 = rng.sample(StandardNormal);
            let z_gas: f64 = rng.sample(StandardNormal);
            let size_usd = rng.gen_range(ln_min..=ln_max).exp();
            let noise_scale = spec.execution_noise_ref_usd.map_or(1.0, |r| (r / size_usd).sqrt());
            let draw = Draw {
                path: SettlementPath::parse(name),
                profile,
                direction,
                size_usd,
                base_fee: rng.gen_range(base_lo..=base_hi),
                priority_fee: rng.gen_range(fee_lo..=fee_hi),
                noise: spec.execution_noise_bps * 1e-4 * noise_scale * z_noise,
                gas_factor: (1.0 + profile.gas_noise * z_gas).max(0.05),
            };
            if let Some(t) = build_trade(spec, &snapshots[&0], &draw, k, eth_usd, f_prime) {
                break t;
            }
        };
        trades.push(trade);
    }

    let provider = SyntheticProvider::new(snapshots.clone(), Dec::from_u128(f_prime)).with_overhead(spec.fixed_overhead_gas);
    let mut quotes = Vec::with_capacity(trades.len() * snapshots.len());
    for t in &trades {
        for &offset in snapshots.keys() {
            quotes.push(
                provider
                    .quote(t, offset, &t.amount_in)
                    .map_err(|e| invalid(format!("quote for {}: {e}", t.trade_id)))?,
            );
        }
    }
    Ok(Scenario {
        trades,
        snapshots,
        quotes,
    })
}

fn build_trade(
    spec: &ScenarioSpec,
    pools: &[Pool],
    d: &Draw,
    k: usize,
    eth_usd: f64,
    f_prime: u128,
) -> Option<TradeRecord> {
    let internal = matches!(d.path, SettlementPath::X | SettlementPath::Fusion);
    let in_decimals = match d.direction {
        Direction::WethIn => WETH_DECIMALS,
        Direction::WethOut => spec.token_decimals,
    };
    let out_decimals = match d.direction {
        Direction::WethIn => spec.token_decimals,
        Direction::WethOut => WETH_DECIMALS,
    };
    let in_units = match d.direction {
        Direction::WethIn => d.size_usd / eth_usd,
        Direction::WethOut => d.size_usd,
    };
    let i_raw = (Dec::from_f64(in_units)? * Dec::pow10(in_decimals as i64)).floor_u128()?;
    if i_raw == 0 {
        return None;
    }
    let amount_in = TokenAmount::new(i_raw, in_decimals).ok()?;
    let gas_price = Dec::from_u128(d.base_fee + f_prime);
    let route = |amount: &TokenAmount| route_optimal_split(pools, amount, d.direction, &gas_price).ok();

    let full = route(&amount_in)?;
    let estimate = (full.total_gas + spec.fixed_overhead_gas) as f64;
    let gas_used = (estimate * d.profile.gas_scale / spec.estimator_gas_bias * d.gas_factor).round() as u128;
    let gas = GasTerms::new(gas_used.max(1), d.base_fee, d.priority_fee).ok()?;
    let cost = gas.cost_wei()?;

    let gated = spec.bonus_min_usd.is_none_or(|min| d.size_usd >= min);
    let bonus = if internal && gated { spec.ofa_liquidity_bonus } else { 0.0 };
    let uplift = (1.0 + bonus) * (1.0 + d.noise);

    let out_raw = match (internal, d.direction) {
        (false, _) => scale_raw(full.total_out.raw, uplift),
        (true, Direction::WethOut) => scale_raw(full.total_out.raw, uplift).checked_sub(cost)?,
        (true, Direction::WethIn) => {
            let net = TokenAmount::wei(i_raw.checked_sub(cost)?);
            if net.raw == 0 {
                return None;
            }
            scale_raw(route(&net)?.total_out.raw, uplift)
        }
    };
    if out_raw == 0 {
        return None;
    }
    let usd: Dec = Dec::from_f64(d.size_usd)?.to_fixed(2).parse().ok()?;
    let trade = TradeRecord {
        trade_id: format!("S{:06}", k + 1),
        interface: d.path.interface()?,
        path: d.path.clone(),
        block_number: 19_000_000 + k as u64,
        direction: d.direction,
        gas_internalized: internal,
        amount_in,
        amount_out: TokenAmount::new(out_raw, out_decimals).ok()?,
        gas,
        usd_value: Some(usd),
        timestamp: 1_700_000_000 + 12 * k as u64,
    };
    trade.validate().ok()?;
    Some(trade)
}
