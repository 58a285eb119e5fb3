//! Scheme comparison: threshold inverses of coverage curves and the
//! minimum allowable efficiency ratio.

use serde::{Deserialize, Serialize};

use crate::analytic::{CoverageCurve, ThresholdUnit};
use crate::error::{Error, Result};
use crate::params::NetworkParams;

/// Default power-consumption ratio of a multi-chain BS to a single-chain one.
pub const DEFAULT_NU: f64 = 1.38;
/// Receive array size used for spatial multiplexing in power-normalized comparisons.
pub const DEFAULT_SM_N_UE: usize = 7;

fn axis(unit: ThresholdUnit, t: f64) -> f64 {
    match unit {
        ThresholdUnit::Decibel => t,
        ThresholdUnit::BitsPerSecond => t.ln(),
    }
}

fn unaxis(unit: ThresholdUnit, x: f64) -> f64 {
    match unit {
        ThresholdUnit::Decibel => x,
        ThresholdUnit::BitsPerSecond => x.exp(),
    }
}

/// Largest threshold whose coverage is at least `p`, interpolated between
/// grid points (log thresholds for rates). Fails when `p` lies outside the
/// range of the curve.
pub fn invert_coverage(curve: &CoverageCurve, p: f64) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::Domain("cannot invert an empty curve".into()));
    }
    let v = &curve.values;
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !(p >= lo && p <= hi) {
        return Err(Error::OutOfRange { level: p, lo, hi });
    }
    let last = v.iter().rposition(|&x| x >= p).expect("p <= max");
    if last + 1 == v.len() {
        return Ok(curve.thresholds[last]);
    }
    let (t0, t1) = (axis(curve.unit, curve.thresholds[last]), axis(curve.unit, curve.thresholds[last + 1]));
    let (v0, v1) = (v[last], v[last + 1]);
    let x = if v0 == v1 { t0 } else { t0 + (t1 - t0) * (v0 - p) / (v0 - v1) };
    Ok(unaxis(curve.unit, x))
}

/// Like [`invert_coverage`], but a level above the whole curve maps to zero
/// rate: no positive threshold is met with that probability.
pub fn invert_coverage_generalized(curve: &CoverageCurve, p: f64) -> Result<f64> {
    match invert_coverage(curve, p) {
        Err(Error::OutOfRange { hi, .. }) if p > hi && curve.unit == ThresholdUnit::BitsPerSecond => Ok(0.0),
        r => r,
    }
}

/// `O_{A,B}(p) = R_B^{-1}(p) / R_A^{-1}(p)` for curves computed at unit efficiency.
pub fn min_allowable_efficiency(curve_a: &CoverageCurve, curve_b: &CoverageCurve, p: f64) -> Result<f64> {
    if curve_a.unit != curve_b.unit {
        return Err(Error::Domain("curves use different threshold units".into()));
    }
    let a = invert_coverage(curve_a, p)?;
    let b = invert_coverage(curve_b, p)?;
    if curve_a.unit == ThresholdUnit::Decibel {
        return Err(Error::Domain("efficiency ratios are defined on rate curves".into()));
    }
    if a <= 0.0 {
        return Err(Error::Domain(format!("scheme A has no positive rate at level {p}")));
    }
    Ok(b / a)
}

/// Comparands for a power-normalized study: the single-chain scheme gets a
/// `nu` times denser deployment and one user per cell; the spatial
/// multiplexing comparand gets a smaller receive array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerNormalized {
    pub su: NetworkParams,
    pub sm: NetworkParams,
}

pub fn power_normalized_params(params: &NetworkParams, nu: f64, sm_n_ue: usize) -> Result<PowerNormalized> {
    if !(nu >= 1.0 && nu.is_finite()) {
        return Err(Error::param("nu", "must be at least 1"));
    }
    let mut su = params.with_lambda_bs(params.lambda_bs * nu);
    su.max_users = 1;
    su.streams = 1;
    let mut sm = params.clone();
    sm.n_ue = sm_n_ue;
    sm.max_users = 1;
    Ok(PowerNormalized { su, sm })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeComparison {
    pub scheme_a: String,
    pub scheme_b: String,
    pub percentiles: Vec<f64>,
    pub o_values: Vec<Option<f64>>,
    pub rate_inverses: Vec<(Option<f64>, Option<f64>)>,
}

impl SchemeComparison {
    /// Tabulates `O_{A,B}` over `percentiles`; levels outside either curve are `None`.
    pub fn new(a: &CoverageCurve, b: &CoverageCurve, percentiles: &[f64]) -> Self {
        let mut o_values = Vec::new();
        let mut rate_inverses = Vec::new();
        for &p in percentiles {
            let ra = invert_coverage(a, p).ok();
            let rb = invert_coverage(b, p).ok();
            o_values.push(match (ra, rb) {
                (Some(x), Some(y)) if x > 0.0 => Some(y / x),
                _ => None,
            });
            rate_inverses.push((ra, rb));
        }
        SchemeComparison {
            scheme_a: a.label.clone(),
            scheme_b: b.label.clone(),
            percentiles: percentiles.to_vec(),
            o_values,
            rate_inverses,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("p,rate_a_bps,rate_b_bps,o_ab\n");
        let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for i in 0..self.percentiles.len() {
            let (a, b) = self.rate_inverses[i];
            s.push_str(&format!("{},{},{},{}\n", self.percentiles[i], f(a), f(b), f(self.o_values[i])));
        }
        s
    }
}
