//! Closed-form engine: propagation measures, load distributions, the ZF
//! penalty, interference Laplace functionals and the coverage integrals.

pub mod coverage;
pub mod curve;
pub mod laplace;
pub mod load;
pub mod measures;
pub mod zf;

pub use coverage::{
    rate_coverage, sinr_coverage, snr_coverage, AnalyticConfig, CoverageEngine, Interference, LoadAveraging,
    SinrCoverage,
};
pub use curve::{CoverageCurve, ThresholdUnit};
pub use load::{kappa_interfering, kappa_serving, load_pmfs, LoadModel};
pub use measures::PropagationMeasures;
pub use zf::{mutual_exclusion_prob, zf_success_prob, zf_success_prob_composite, ZfEstimate, ZfForm};
pub use crate::params::default_sidelobes;
