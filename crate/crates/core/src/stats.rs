//! USD-weighted means with statistical and systematic uncertainty.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::calibration::{GasCalibration, Perturbed};
use crate::model::TradeRecord;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("need at least 2 observations, got {0}")]
    InsufficientData(usize),
    #[error("total weight is zero")]
    ZeroTotalWeight,
    #[error("weight {0} at position {1} is negative or not finite")]
    InvalidWeight(f64, usize),
    #[error("window {window} exceeds the {n} available observations")]
    WindowTooLarge { window: usize, n: usize },
    #[error("window must be at least 2, got {0}")]
    WindowTooSmall(usize),
}

/// Weighted mean and `σ_stat = sqrt(Σ w(x̄ − x)² / (n Σ w))`.
///
/// `n` counts every observation, zero-weight ones included.
pub fn weighted_mean_with_stat(values: &[(f64, f64)]) -> Result<(f64, f64), StatsError> {
    let n = values.len();
    if n < 2 {
        return Err(StatsError::InsufficientData(n));
    }
    if let Some(k) = values.iter().position(|&(_, w)| !(w >= 0.0 && w.is_finite())) {
        return Err(StatsError::InvalidWeight(values[k].1, k));
    }
    let total: f64 = values.iter().map(|&(_, w)| w).sum();
    if total <= 0.0 {
        return Err(StatsError::ZeroTotalWeight);
    }
    // shift by a positive-weight value so equal inputs give an exact mean
    let origin = values.iter().find(|&&(_, w)| w > 0.0).map(|&(x, _)| x).unwrap_or(0.0);
    let mean = origin + values.iter().map(|&(x, w)| w * (x - origin)).sum::<f64>() / total;
    let ss: f64 = values.iter().map(|&(x, w)| w * (mean - x).powi(2)).sum();
    Ok((mean, (ss / (n as f64 * total)).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedEstimate {
    pub mean: f64,
    pub stat_sigma: f64,
    pub sys_upper: f64,
    pub sys_lower: f64,
    pub n: usize,
    pub total_weight: f64,
}

impl WeightedEstimate {
    /// `sqrt(σ_stat² + σ_sys,upper²)`.
    pub fn band_upper(&self) -> f64 {
        self.stat_sigma.hypot(self.sys_upper)
    }

    pub fn band_lower(&self) -> f64 {
        self.stat_sigma.hypot(self.sys_lower)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

/// Band half-widths `|x̄(β₁+δ) − x̄(β₁)|` and `|x̄(β₁) − x̄(β₁−δ)|`, where
/// `mean_under` recomputes the mean under a perturbed calibration.
pub fn systematic_band<E>(
    nominal_mean: f64,
    perturbed: &Perturbed,
    mut mean_under: impl FnMut(Side, &GasCalibration) -> Result<f64, E>,
) -> Result<(f64, f64), E> {
    let upper = mean_under(Side::Upper, &perturbed.upper)?;
    let lower = mean_under(Side::Lower, &perturbed.lower)?;
    Ok(((upper - nominal_mean).abs(), (nominal_mean - lower).abs()))
}

/// One weighted value together with its re-evaluations under the upper and
/// lower perturbed calibrations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub value: f64,
    pub weight: f64,
    pub upper: f64,
    pub lower: f64,
}

impl Observation {
    /// No systematic variation.
    pub fn plain(value: f64, weight: f64) -> Self {
        Observation {
            value,
            weight,
            upper: value,
            lower: value,
        }
    }
}

pub fn estimate(obs: &[Observation]) -> Result<WeightedEstimate, StatsError> {
    let nominal: Vec<(f64, f64)> = obs.iter().map(|o| (o.value, o.weight)).collect();
    let (mean, stat_sigma) = weighted_mean_with_stat(&nominal)?;
    let perturbed = |pick: fn(&Observation) -> f64| {
        let pairs: Vec<(f64, f64)> = obs.iter().map(|o| (pick(o), o.weight)).collect();
        weighted_mean_with_stat(&pairs).map(|(m, _)| m)
    };
    let upper = perturbed(|o| o.upper)?;
    let lower = perturbed(|o| o.lower)?;
    Ok(WeightedEstimate {
        mean,
        stat_sigma,
        sys_upper: (upper - mean).abs(),
        sys_lower: (mean - lower).abs(),
        n: obs.len(),
        total_weight: obs.iter().map(|o| o.weight).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollingPoint {
    pub median_usd: f64,
    pub estimate: WeightedEstimate,
}

fn median_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Estimates over contiguous windows of observations sorted by weight
/// (USD size), advancing `stride` observations per point.
pub fn rolling_by_size(obs: &[Observation], window: usize, stride: usize) -> Result<Vec<RollingPoint>, StatsError> {
    if window < 2 {
        return Err(StatsError::WindowTooSmall(window));
    }
    if window > obs.len() {
        return Err(StatsError::WindowTooLarge { window, n: obs.len() });
    }
    let stride = stride.max(1);
    let mut sorted = obs.to_vec();
    sorted.sort_by(|a, b| a.weight.total_cmp(&b.weight));
    let starts: Vec<usize> = (0..=sorted.len() - window).step_by(stride).collect();
    starts
        .par_iter()
        .map(|&s| {
            let chunk = &sorted[s..s + window];
            let sizes: Vec<f64> = chunk.iter().map(|o| o.weight).collect();
            Ok(RollingPoint {
                median_usd: median_sorted(&sizes),
                estimate: estimate(chunk)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupBy {
    Path,
    Interface,
}

impl GroupBy {
    /// Group label of a trade, e.g. `path:X` or `interface:Uniswap`.
    pub fn label(&self, trade: &TradeRecord) -> String {
        match self {
            GroupBy::Path => format!("path:{}", trade.path),
            GroupBy::Interface => format!("interface:{}", trade.interface),
        }
    }
}

/// Per-group estimates. Groups that cannot be estimated are skipped with a
/// warning.
pub fn interface_aggregate<'a>(
    items: impl IntoIterator<Item = (&'a TradeRecord, Observation)>,
    group_by: GroupBy,
    offset: i64,
) -> BTreeMap<String, WeightedEstimate> {
    let mut groups: BTreeMap<String, Vec<Observation>> = BTreeMap::new();
    for (trade, obs) in items {
        groups.entry(group_by.label(trade)).or_default().push(obs);
    }
    group_estimates(groups, offset)
}

pub fn group_estimates(groups: BTreeMap<String, Vec<Observation>>, offset: i64) -> BTreeMap<String, WeightedEstimate> {
    groups
        .into_par_iter()
        .filter_map(|(label, obs)| match estimate(&obs) {
            Ok(est) => Some((label, est)),
            Err(e) => {
                log::warn!("group {label} at offset {offset} skipped: {e}");
                None
            }
        })
        .collect()
}
