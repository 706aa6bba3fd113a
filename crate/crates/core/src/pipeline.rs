//! Trade-set evaluation: every (trade, offset) pair priced and attributed,
//! optionally under the nominal and perturbed gas calibrations.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::attribution::{attribute_at, AttributionError, AttributionResult};
use crate::baseline::{BaselineError, BaselineProvider};
use crate::calibration::{perturbed_calibrations, CalibratedProvider, GasCalibration};
use crate::decimal::Dec;
use crate::model::{SettlementPath, TradeRecord};
use crate::price::PriceError;
use crate::stats::{estimate, group_estimates, rolling_by_size, GroupBy, Observation, RollingPoint, StatsError, WeightedEstimate};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Exclusion {
    QuoteUnavailable,
    SnapshotUnavailable,
    NoPools,
    NonPositiveBaseline,
    NonPositiveAdjustedInput,
    Other(String),
}

impl Exclusion {
    pub fn as_str(&self) -> &str {
        match self {
            Exclusion::QuoteUnavailable => "QuoteUnavailable",
            Exclusion::SnapshotUnavailable => "SnapshotUnavailable",
            Exclusion::NoPools => "NoPools",
            Exclusion::NonPositiveBaseline => "NonPositiveBaseline",
            Exclusion::NonPositiveAdjustedInput => "NonPositiveAdjustedInput",
            Exclusion::Other(s) => s,
        }
    }
}

impl fmt::Display for Exclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<AttributionError> for Exclusion {
    fn from(e: AttributionError) -> Self {
        match e {
            AttributionError::NonPositiveBaseline(_) => Exclusion::NonPositiveBaseline,
            AttributionError::Price(PriceError::NonPositiveAdjustedInput { .. }) => Exclusion::NonPositiveAdjustedInput,
            AttributionError::Price(PriceError::Baseline(b)) => match b {
                BaselineError::QuoteUnavailable { .. } => Exclusion::QuoteUnavailable,
                BaselineError::SnapshotUnavailable(_) => Exclusion::SnapshotUnavailable,
                BaselineError::NoPools => Exclusion::NoPools,
                other => Exclusion::Other(other.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Position of the trade in the input slice.
    pub trade_index: usize,
    pub trade_id: String,
    pub offset: i64,
    pub outcome: Result<AttributionResult, Exclusion>,
}

/// Attributes every trade at every offset, ordered by `(trade_id, offset)`.
pub fn evaluate(
    trades: &[TradeRecord],
    provider: &dyn BaselineProvider,
    offsets: &[i64],
    f_prime: &Dec,
) -> Vec<Evaluation> {
    let mut order: Vec<usize> = (0..trades.len()).collect();
    order.sort_by(|&a, &b| trades[a].trade_id.cmp(&trades[b].trade_id));
    let mut sorted_offsets = offsets.to_vec();
    sorted_offsets.sort_unstable();
    sorted_offsets.dedup();
    let jobs: Vec<(usize, i64)> = order
        .iter()
        .flat_map(|&k| sorted_offsets.iter().map(move |&dt| (k, dt)))
        .collect();
    jobs.par_iter()
        .map(|&(k, dt)| {
            let trade = &trades[k];
            Evaluation {
                trade_index: k,
                trade_id: trade.trade_id.clone(),
                offset: dt,
                outcome: attribute_at(trade, provider, dt, f_prime).map_err(Exclusion::from),
            }
        })
        .collect()
}

/// [`evaluate`] with every quote gas-corrected by `cal` (none: raw quotes).
pub fn evaluate_calibrated(
    trades: &[TradeRecord],
    provider: &dyn BaselineProvider,
    cal: Option<&GasCalibration>,
    offsets: &[i64],
    f_prime: &Dec,
) -> Vec<Evaluation> {
    match cal {
        Some(cal) => {
            let wrapped = CalibratedProvider::new(provider, cal.clone());
            evaluate(trades, &wrapped, offsets, f_prime)
        }
        None => evaluate(trades, provider, offsets, f_prime),
    }
}

/// `(g, g')` pairs for calibration: realized gas of trades on `path` against
/// the offset-0 baseline estimate for the same input.
pub fn calibration_pairs(
    trades: &[TradeRecord],
    provider: &dyn BaselineProvider,
    path: &SettlementPath,
) -> Vec<(f64, f64)> {
    let mut sample: Vec<&TradeRecord> = trades.iter().filter(|t| &t.path == path).collect();
    sample.sort_by(|a, b| a.trade_id.cmp(&b.trade_id));
    sample
        .par_iter()
        .filter_map(|t| match provider.quote(t, 0, &t.amount_in) {
            Ok(q) => Some((t.gas.gas_used as f64, q.gas_estimate.to_f64())),
            Err(e) => {
                log::warn!("trade {} left out of calibration: {e}", t.trade_id);
                None
            }
        })
        .collect()
}

/// Per-trade quantity aggregated by the statistics layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Pi,
    Routing,
    Gas,
    Fee,
    Remainder,
}

impl Component {
    pub const ALL: [Component; 5] = [
        Component::Pi,
        Component::Routing,
        Component::Gas,
        Component::Fee,
        Component::Remainder,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Component::Pi => "pi",
            Component::Routing => "pi_routing",
            Component::Gas => "pi_gas",
            Component::Fee => "pi_fee",
            Component::Remainder => "pi_remainder",
        }
    }

    /// Value in basis points.
    pub fn bps(&self, r: &AttributionResult) -> f64 {
        let v = match self {
            Component::Pi => &r.pi,
            Component::Routing => &r.pi_routing,
            Component::Gas => &r.pi_gas,
            Component::Fee => &r.pi_fee,
            Component::Remainder => &r.pi_remainder,
        };
        v.to_f64() * 1e4
    }
}

/// Nominal evaluation plus the two perturbed-calibration passes.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub nominal: Vec<Evaluation>,
    pub upper: Vec<Evaluation>,
    pub lower: Vec<Evaluation>,
}

impl Analysis {
    /// Runs three passes: `β₁`, `β₁ + kδβ₁`, `β₁ − kδβ₁`. Without a
    /// calibration all three are the uncorrected evaluation.
    pub fn run(
        trades: &[TradeRecord],
        provider: &dyn BaselineProvider,
        cal: Option<&GasCalibration>,
        sys_multiplier: f64,
        offsets: &[i64],
        f_prime: &Dec,
    ) -> Self {
        let nominal = evaluate_calibrated(trades, provider, cal, offsets, f_prime);
        let (upper, lower) = match cal {
            Some(cal) => {
                let p = perturbed_calibrations(cal, sys_multiplier);
                (
                    evaluate_calibrated(trades, provider, Some(&p.upper), offsets, f_prime),
                    evaluate_calibrated(trades, provider, Some(&p.lower), offsets, f_prime),
                )
            }
            None => (nominal.clone(), nominal.clone()),
        };
        Analysis { nominal, upper, lower }
    }

    pub fn exclusion_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.nominal {
            if let Err(x) = &e.outcome {
                *counts.entry(x.to_string()).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn offsets(&self) -> Vec<i64> {
        let mut v: Vec<i64> = self.nominal.iter().map(|e| e.offset).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Weighted observations at `offset` for included trades with a USD
    /// size. A trade excluded only under a perturbed calibration keeps its
    /// nominal value on that side.
    pub fn observations<'t>(
        &self,
        trades: &'t [TradeRecord],
        offset: i64,
        component: Component,
    ) -> Vec<(&'t TradeRecord, Observation)> {
        let mut out = Vec::new();
        for ((n, u), l) in self.nominal.iter().zip(&self.upper).zip(&self.lower) {
            if n.offset != offset {
                continue;
            }
            let Ok(r) = &n.outcome else { continue };
            let trade = &trades[n.trade_index];
            let Some(usd) = &trade.usd_value else { continue };
            let value = component.bps(r);
            let side = |e: &Evaluation| e.outcome.as_ref().map(|r| component.bps(r)).unwrap_or(value);
            out.push((
                trade,
                Observation {
                    value,
                    weight: usd.to_f64(),
                    upper: side(u),
                    lower: side(l),
                },
            ));
        }
        out
    }

    /// Estimates per group label (`path:*` and `interface:*`) at `offset`.
    pub fn group_curves(
        &self,
        trades: &[TradeRecord],
        offset: i64,
        component: Component,
    ) -> BTreeMap<String, WeightedEstimate> {
        let obs = self.observations(trades, offset, component);
        let mut groups: BTreeMap<String, Vec<Observation>> = BTreeMap::new();
        for (trade, o) in &obs {
            for by in [GroupBy::Path, GroupBy::Interface] {
                groups.entry(by.label(trade)).or_default().push(*o);
            }
        }
        group_estimates(groups, offset)
    }

    pub fn overall(&self, trades: &[TradeRecord], offset: i64, component: Component) -> Result<WeightedEstimate, StatsError> {
        let obs: Vec<Observation> = self.observations(trades, offset, component).into_iter().map(|(_, o)| o).collect();
        estimate(&obs)
    }

    /// Rolling-by-size series of `π` at `offset` over trades accepted by
    /// `filter`.
    pub fn rolling(
        &self,
        trades: &[TradeRecord],
        offset: i64,
        window: usize,
        stride: usize,
        filter: impl Fn(&TradeRecord) -> bool,
    ) -> Result<Vec<RollingPoint>, StatsError> {
        let obs: Vec<Observation> = self
            .observations(trades, offset, Component::Pi)
            .into_iter()
            .filter(|(t, _)| filter(t))
            .map(|(_, o)| o)
            .collect();
        rolling_by_size(&obs, window, stride)
    }
}
