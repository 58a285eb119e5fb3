use rayon::prelude::*;

use crate::channel::AngleLaw;
use crate::error::{Error, Result};
use crate::numerics::{choose, integrate_log_axis, QuadratureSpec, SeriesSum};
use crate::params::{db_to_linear, LinkKind, NetworkParams};

use super::curve::{CoverageCurve, ThresholdUnit};
use super::laplace::{
    laplace_functional, lower_bound_terms, single_path_terms, upper_bound_terms, InterferenceTerms,
    DEFAULT_CONFIG_CAP,
};
use super::load::{kappa_serving, load_pmfs, series_terms, LoadModel};
use super::measures::PropagationMeasures;
use super::zf::{zf_penalty, ZfForm, DEFAULT_ENUMERATION_CAP};

/// Exponent (log2 of the SINR threshold) beyond which a rate term is taken as zero.
const MAX_RATE_EXPONENT: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interference {
    Off,
    /// Exact for single-path channels.
    SinglePath,
    LowerBound,
    UpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadAveraging {
    /// Average over the scheduled-user distribution of the serving cell.
    Full,
    /// Every cell schedules `U_M` users.
    MaxLoad,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticConfig {
    pub zf_form: ZfForm,
    /// Angle law inside the ZF penalty.
    pub zeta_law: AngleLaw,
    /// Angle law for the exact single-path interference terms.
    pub single_path_law: AngleLaw,
    /// Angle law for the multipath interference lower bound.
    pub bound_law: AngleLaw,
    pub load_averaging: LoadAveraging,
    pub quad: QuadratureSpec,
    /// Load series keeps `floor(rate_terms_mult * rho)` terms.
    pub rate_terms_mult: f64,
    pub enumeration_cap: usize,
}

impl Default for AnalyticConfig {
    fn default() -> Self {
        AnalyticConfig {
            zf_form: ZfForm::ExactEvents,
            zeta_law: AngleLaw::Equiprobable,
            single_path_law: AngleLaw::Arcsine,
            bound_law: AngleLaw::Equiprobable,
            load_averaging: LoadAveraging::Full,
            quad: QuadratureSpec { rel_tol: 1e-7, abs_tol: 1e-12, max_subdivisions: 400 },
            rate_terms_mult: 12.0,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SinrCoverage {
    SinglePath(f64),
    Bounds { lower: f64, upper: f64 },
}

/// Closed-form coverage evaluator for one parameter set.
#[derive(Debug, Clone)]
pub struct CoverageEngine {
    params: NetworkParams,
    cfg: AnalyticConfig,
    measures: PropagationMeasures,
    load: LoadModel,
    /// `zeta[k][u]` for class `k` (0 = LOS) and `u` users.
    zeta: [Vec<f64>; 2],
    pivot: f64,
    single: Option<InterferenceTerms>,
    lower: InterferenceTerms,
    upper: InterferenceTerms,
    warnings: Vec<String>,
}

fn kidx(kind: LinkKind) -> usize {
    match kind {
        LinkKind::Los => 0,
        LinkKind::Nlos => 1,
    }
}

impl CoverageEngine {
    pub fn new(params: &NetworkParams, cfg: AnalyticConfig) -> Result<Self> {
        let mut warnings = params.validate()?;
        let measures = PropagationMeasures::new(params);
        let load = load_pmfs(params.density_ratio(), params.max_users)?;
        let mut zeta = [vec![1.0; params.max_users + 1], vec![1.0; params.max_users + 1]];
        for kind in LinkKind::BOTH {
            for u in 1..=params.max_users {
                let z = zf_penalty(params.paths(kind), u, params, cfg.zeta_law, cfg.zf_form, cfg.enumeration_cap)?;
                if z.fell_back {
                    warnings.push(format!("ZF penalty for eta={}, U={u} used the equiprobable formula", params.paths(kind)));
                }
                zeta[kidx(kind)][u] = z.value;
            }
        }
        let single = if params.paths_los == 1 && params.paths_nlos == 1 {
            Some(single_path_terms(params, &load, cfg.single_path_law)?)
        } else {
            None
        };
        let lower = lower_bound_terms(params, &load, cfg.bound_law, DEFAULT_CONFIG_CAP)?;
        if lower.fell_back {
            warnings.push("interference lower bound fell back to unit beam gains".into());
        }
        let upper = upper_bound_terms(params, &load);
        let pivot = measures.serving_scale(params.lambda_bs);
        Ok(CoverageEngine { params: params.clone(), cfg, measures, load, zeta, pivot, single, lower, upper, warnings })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn config(&self) -> &AnalyticConfig {
        &self.cfg
    }

    pub fn measures(&self) -> &PropagationMeasures {
        &self.measures
    }

    pub fn load(&self) -> &LoadModel {
        &self.load
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn zeta(&self, kind: LinkKind, users: usize) -> f64 {
        self.zeta[kidx(kind)][users]
    }

    pub fn association_probability(&self, kind: LinkKind) -> Result<f64> {
        self.measures.association_probability(kind, self.params.lambda_bs, &self.cfg.quad)
    }

    fn terms(&self, model: Interference) -> Result<Option<&InterferenceTerms>> {
        Ok(match model {
            Interference::Off => None,
            Interference::SinglePath => Some(self.single.as_ref().ok_or_else(|| {
                Error::Domain("single-path interference model needs one path on every link".into())
            })?),
            Interference::LowerBound => Some(&self.lower),
            Interference::UpperBound => Some(&self.upper),
        })
    }

    /// Laplace functional of the interference at `s`, given serving path loss `l`.
    pub fn interference_laplace(&self, model: Interference, s: f64, l: f64) -> Result<f64> {
        match self.terms(model)? {
            None => Ok(1.0),
            Some(t) => laplace_functional(
                &self.measures,
                t,
                self.params.lambda_bs,
                s * self.params.array_gain(),
                l,
                &self.inner_spec(),
            ),
        }
    }

    fn inner_spec(&self) -> QuadratureSpec {
        QuadratureSpec { rel_tol: self.cfg.quad.rel_tol * 10.0, abs_tol: 1e-10, ..self.cfg.quad }
    }

    /// Coverage with exactly `users` scheduled in the serving cell.
    pub fn coverage_given_users(&self, tau: f64, users: usize, model: Interference) -> Result<f64> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::Domain(format!("SINR threshold must be finite and non-negative, got {tau}")));
        }
        if users == 0 || users > self.params.max_users {
            return Err(Error::Domain(format!("users must lie in 1..={}, got {users}", self.params.max_users)));
        }
        let terms = self.terms(model)?;
        let g = self.params.array_gain();
        let noise = self.params.noise_power_w();
        let lambda = self.params.lambda_bs;
        let inner = self.inner_spec();
        let mut total = 0.0;
        for kind in LinkKind::BOTH {
            let eta = self.params.paths(kind);
            let z = self.zeta(kind, users);
            if z == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for n in 1..=eta {
                // s * G for this term, per unit serving path loss.
                let k = eta as f64 * tau * n as f64 * users as f64;
                let f = |l: f64| -> f64 {
                    let base = (-k * l * noise / g - lambda * self.measures.total_mass(l)).exp();
                    if base == 0.0 {
                        return 0.0;
                    }
                    let lap = match terms {
                        None => 1.0,
                        Some(t) => laplace_functional(&self.measures, t, lambda, k * l, l, &inner).unwrap_or(f64::NAN),
                    };
                    base * lambda * self.measures.density(kind, l) * lap
                };
                let r = integrate_log_axis(f, 0.0, self.pivot, &self.cfg.quad)?;
                let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                acc += sign * choose(eta, n) * r.value;
            }
            total += z * acc;
        }
        Ok(total.clamp(0.0, 1.0))
    }

    /// Coverage averaged over the serving-cell load (or at full load).
    pub fn coverage(&self, tau: f64, model: Interference) -> Result<f64> {
        match self.cfg.load_averaging {
            LoadAveraging::MaxLoad => self.coverage_given_users(tau, self.params.max_users, model),
            LoadAveraging::Full => {
                let mut s = 0.0;
                for u in 1..=self.params.max_users {
                    let w = self.load.serving_users[u];
                    if w > 0.0 {
                        s += w * self.coverage_given_users(tau, u, model)?;
                    }
                }
                Ok(s)
            }
        }
    }

    pub fn snr_coverage(&self, tau: f64) -> Result<f64> {
        self.coverage(tau, Interference::Off)
    }

    pub fn sinr_coverage(&self, tau: f64) -> Result<SinrCoverage> {
        if self.single.is_some() {
            return Ok(SinrCoverage::SinglePath(self.coverage(tau, Interference::SinglePath)?));
        }
        let a = self.coverage(tau, Interference::LowerBound)?;
        let b = self.coverage(tau, Interference::UpperBound)?;
        Ok(SinrCoverage::Bounds { lower: a.min(b), upper: a.max(b) })
    }

    /// P(per-user rate > `tau_r` bps).
    pub fn rate_coverage(&self, tau_r: f64, model: Interference) -> Result<SeriesSum> {
        self.rate_coverage_terms(tau_r, model, series_terms(self.load.rho, self.cfg.rate_terms_mult))
    }

    pub fn rate_coverage_terms(&self, tau_r: f64, model: Interference, terms: usize) -> Result<SeriesSum> {
        if !(tau_r.is_finite() && tau_r >= 0.0) {
            return Err(Error::Domain(format!("rate threshold must be finite and non-negative, got {tau_r}")));
        }
        let wb = self.params.efficiency * self.params.bandwidth_hz;
        let mut sum = 0.0;
        let mut last_term = 0.0;
        for n in 1..=terms {
            let u = n.min(self.params.max_users);
            let e = tau_r * n as f64 / (wb * u as f64);
            let t = if e > MAX_RATE_EXPONENT {
                0.0
            } else {
                kappa_serving(self.load.rho, n) * self.coverage_given_users(e.exp2() - 1.0, u, model)?
            };
            sum += t;
            last_term = t;
        }
        Ok(SeriesSum { sum, last_term, terms })
    }

    /// Coverage curve over thresholds in dB.
    pub fn coverage_curve(&self, thresholds_db: &[f64], model: Interference, label: &str) -> Result<CoverageCurve> {
        let values = thresholds_db
            .par_iter()
            .map(|&t| self.coverage(db_to_linear(t), model))
            .collect::<Result<Vec<f64>>>()?;
        CoverageCurve::new(label, ThresholdUnit::Decibel, thresholds_db.to_vec(), values, None)
    }

    /// Rate coverage curve over thresholds in bps.
    pub fn rate_curve(&self, thresholds_bps: &[f64], model: Interference, label: &str) -> Result<CoverageCurve> {
        let values = thresholds_bps
            .par_iter()
            .map(|&t| self.rate_coverage(t, model).map(|s| s.sum))
            .collect::<Result<Vec<f64>>>()?;
        CoverageCurve::new(label, ThresholdUnit::BitsPerSecond, thresholds_bps.to_vec(), values, None)
    }
}

/// Convenience wrappers with the default configuration.
pub fn snr_coverage(params: &NetworkParams, tau: f64) -> Result<f64> {
    CoverageEngine::new(params, AnalyticConfig::default())?.snr_coverage(tau)
}

pub fn sinr_coverage(params: &NetworkParams, tau: f64) -> Result<SinrCoverage> {
    CoverageEngine::new(params, AnalyticConfig::default())?.sinr_coverage(tau)
}

pub fn rate_coverage(params: &NetworkParams, tau_r: f64) -> Result<SeriesSum> {
    CoverageEngine::new(params, AnalyticConfig::default())?.rate_coverage(tau_r, Interference::Off)
}
