//! Through-origin regression of baseline gas estimates on realized gas,
//! `g' ≈ β₁ g`, and the correction `g' ← g'/β₁`.

use serde::{Deserialize, Serialize};

use crate::baseline::{BaselineError, BaselineProvider};
use crate::decimal::Dec;
use crate::model::{Quote, TokenAmount, TradeRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("need at least 2 (g, g') pairs, got {0}")]
    InsufficientData(usize),
    #[error("all realized gas values are zero")]
    DegenerateRegressor,
    #[error("non-finite or negative gas value in pair {0}")]
    InvalidPair(usize),
    #[error("fitted slope {0} is not positive")]
    NonPositiveSlope(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasCalibration {
    pub beta1: f64,
    pub beta1_se: f64,
    pub n_points: usize,
    /// Mean and standard deviation of `g'/g`.
    pub residual_mean: f64,
    pub residual_stddev: f64,
}

impl GasCalibration {
    /// `β₁ = 1`, `δβ₁ = 0`: leaves quotes untouched.
    pub fn identity() -> Self {
        GasCalibration {
            beta1: 1.0,
            beta1_se: 0.0,
            n_points: 0,
            residual_mean: 1.0,
            residual_stddev: 0.0,
        }
    }

    pub fn with_beta1(&self, beta1: f64) -> Self {
        GasCalibration { beta1, ..self.clone() }
    }
}

/// Fits `g' = β₁ g` by least squares through the origin.
///
/// `pairs` are `(g, g')`. The standard error is
/// `sqrt(Σ(g' − β₁g)² / ((n−1) Σg²))`.
pub fn fit_gas_bias(pairs: &[(f64, f64)]) -> Result<GasCalibration, CalibrationError> {
    let n = pairs.len();
    if n < 2 {
        return Err(CalibrationError::InsufficientData(n));
    }
    if let Some(k) = pairs
        .iter()
        .position(|&(g, gp)| !g.is_finite() || !gp.is_finite() || g < 0.0 || gp < 0.0)
    {
        return Err(CalibrationError::InvalidPair(k));
    }
    let sgg: f64 = pairs.iter().map(|&(g, _)| g * g).sum();
    if sgg == 0.0 {
        return Err(CalibrationError::DegenerateRegressor);
    }
    let sgy: f64 = pairs.iter().map(|&(g, gp)| g * gp).sum();
    let beta1 = sgy / sgg;
    if beta1 <= 0.0 {
        return Err(CalibrationError::NonPositiveSlope(beta1));
    }
    let ssr: f64 = pairs.iter().map(|&(g, gp)| (gp - beta1 * g).powi(2)).sum();
    let beta1_se = (ssr / ((n - 1) as f64 * sgg)).sqrt();

    let ratios: Vec<f64> = pairs.iter().filter(|(g, _)| *g > 0.0).map(|&(g, gp)| gp / g).collect();
    let (residual_mean, residual_stddev) = mean_std(&ratios);
    Ok(GasCalibration {
        beta1,
        beta1_se,
        n_points: n,
        residual_mean,
        residual_stddev,
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, var.sqrt())
}

/// Exact decimal form of `β₁` (shortest round-trip representation).
fn beta_dec(cal: &GasCalibration) -> Dec {
    Dec::from_f64(cal.beta1).expect("finite beta1")
}

/// Divides the quote's gas by `β₁`. Fails if the quote was already corrected.
pub fn correct_gas(quote: &Quote, cal: &GasCalibration) -> Result<Quote, BaselineError> {
    if quote.corrected {
        return Err(BaselineError::AlreadyCorrected);
    }
    let mut out = quote.clone();
    if cal.beta1 != 1.0 {
        out.gas_estimate = &quote.gas_estimate / beta_dec(cal);
    }
    out.corrected = true;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbed {
    pub upper: GasCalibration,
    pub lower: GasCalibration,
    pub lower_clamped: bool,
}

/// Calibrations at `β₁ ± k·δβ₁`. A non-positive lower slope is clamped to
/// `β₁/2`.
pub fn perturbed_calibrations(cal: &GasCalibration, multiplier: f64) -> Perturbed {
    let delta = multiplier * cal.beta1_se;
    let upper = cal.with_beta1(cal.beta1 + delta);
    let mut lower_beta = cal.beta1 - delta;
    let lower_clamped = lower_beta <= 0.0;
    if lower_clamped {
        log::warn!(
            "beta1 - delta = {lower_beta} is not positive; clamping lower calibration to beta1/2 = {}",
            cal.beta1 / 2.0
        );
        lower_beta = cal.beta1 / 2.0;
    }
    Perturbed {
        upper,
        lower: cal.with_beta1(lower_beta),
        lower_clamped,
    }
}

/// Wraps a provider and corrects the gas of every quote it returns.
pub struct CalibratedProvider<'a> {
    pub inner: &'a dyn BaselineProvider,
    pub calibration: GasCalibration,
}

impl<'a> CalibratedProvider<'a> {
    pub fn new(inner: &'a dyn BaselineProvider, calibration: GasCalibration) -> Self {
        CalibratedProvider { inner, calibration }
    }
}

impl BaselineProvider for CalibratedProvider<'_> {
    fn provider_id(&self) -> &str {
        self.inner.provider_id()
    }

    fn supports_offset(&self, offset: i64) -> bool {
        self.inner.supports_offset(offset)
    }

    fn quote(&self, trade: &TradeRecord, offset: i64, amount_in: &TokenAmount) -> Result<Quote, BaselineError> {
        let raw = self.inner.quote(trade, offset, amount_in)?;
        correct_gas(&raw, &self.calibration)
    }
}
