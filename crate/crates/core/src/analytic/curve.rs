use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdUnit {
    Decibel,
    BitsPerSecond,
}

impl ThresholdUnit {
    pub fn column(&self) -> &'static str {
        match self {
            ThresholdUnit::Decibel => "threshold_db",
            ThresholdUnit::BitsPerSecond => "threshold_bps",
        }
    }
}

/// CCDF values on a threshold grid; simulated curves carry 95% intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub label: String,
    pub unit: ThresholdUnit,
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
    pub ci: Option<Vec<(f64, f64)>>,
}

impl CoverageCurve {
    pub fn new(
        label: &str,
        unit: ThresholdUnit,
        thresholds: Vec<f64>,
        values: Vec<f64>,
        ci: Option<Vec<(f64, f64)>>,
    ) -> Result<Self> {
        if thresholds.len() != values.len() || ci.as_ref().is_some_and(|c| c.len() != values.len()) {
            return Err(Error::Domain("curve columns differ in length".into()));
        }
        if thresholds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("curve thresholds must be strictly increasing".into()));
        }
        Ok(CoverageCurve { label: label.to_string(), unit, thresholds, values, ci })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when the values never increase along the grid (up to `tol`).
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0] + tol)
    }

    /// CSV text with the threshold column named after the unit; interval
    /// columns are empty for curves without intervals.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},ccdf,ci_low,ci_high\n", self.unit.column());
        for i in 0..self.values.len() {
            let (lo, hi) = match &self.ci {
                Some(c) => (format!("{}", c[i].0), format!("{}", c[i].1)),
                None => (String::new(), String::new()),
            };
            s.push_str(&format!("{},{},{},{}\n", self.thresholds[i], self.values[i], lo, hi));
        }
        s
    }
}
