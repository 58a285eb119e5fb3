//! Laplace functional of out-of-cell interference conditioned on the serving
//! path loss, via the PGFL of the propagation process.
//!
//! Every model here reduces to a mixture of terms
//! `w * (1 - (1 + x * g / t)^(-p))` integrated against the intensity of
//! interfering path losses above the serving one, with `x = s * G`.

use crate::channel::{angle_pmf, AngleLaw};
use crate::error::Result;
use crate::numerics::{choose, integrate_log_axis, ln_factorial, QuadratureSpec};
use crate::params::{LinkKind, NetworkParams};

use super::load::LoadModel;
use super::measures::PropagationMeasures;

/// Budget on beam-hit configurations for the multipath lower bound.
pub const DEFAULT_CONFIG_CAP: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceTerm {
    pub weight: f64,
    pub gain: f64,
    pub power: f64,
}

/// Term mixtures per interferer class.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceTerms {
    pub los: Vec<LaplaceTerm>,
    pub nlos: Vec<LaplaceTerm>,
    /// Set when the configuration budget forced the all-ones bound.
    pub fell_back: bool,
}

impl InterferenceTerms {
    fn uniform(terms: Vec<LaplaceTerm>) -> Self {
        InterferenceTerms { los: terms.clone(), nlos: terms, fell_back: false }
    }

    pub fn for_kind(&self, kind: LinkKind) -> &[LaplaceTerm] {
        match kind {
            LinkKind::Los => &self.los,
            LinkKind::Nlos => &self.nlos,
        }
    }
}

fn merge(mut terms: Vec<LaplaceTerm>) -> Vec<LaplaceTerm> {
    terms.retain(|t| t.weight > 0.0 && t.gain > 0.0);
    terms.sort_by(|a, b| a.gain.total_cmp(&b.gain).then(a.power.total_cmp(&b.power)));
    let mut out: Vec<LaplaceTerm> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.last_mut() {
            Some(last) if (last.gain - t.gain).abs() <= 1e-14 * t.gain && last.power == t.power => last.weight += t.weight,
            _ => out.push(t),
        }
    }
    out
}

/// Mixture weight of `k` hits among `n` draws on the bin of a reference draw:
/// `C(n, k) sum_i q_i^(k+1) (1 - q_i)^(n-k)`.
fn hit_weights(q: &[f64], n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| choose(n, k) * q.iter().map(|&qi| qi.powi(k as i32 + 1) * (1.0 - qi).powi((n - k) as i32)).sum::<f64>())
        .collect()
}

/// Single-path interferers, exact under the sidelobe model.
pub fn single_path_terms(params: &NetworkParams, load: &LoadModel, law: AngleLaw) -> Result<InterferenceTerms> {
    let q_bs = angle_pmf(params.n_bs, law)?;
    let q_ue = angle_pmf(params.n_ue, law)?;
    let ue_hit: f64 = q_ue.iter().map(|q| q * q).sum();
    let (rb, ru) = (params.rho_bs * params.rho_bs, params.rho_ue * params.rho_ue);
    let mut terms = Vec::new();
    for n in 1..=load.u_max {
        let pn = load.interfering_users[n];
        if pn == 0.0 {
            continue;
        }
        for (k, wk) in hit_weights(&q_bs, n).into_iter().enumerate() {
            let c = k as f64 + (n - k) as f64 * rb;
            for (w_ue, g_ue) in [(ue_hit, 1.0), (1.0 - ue_hit, ru)] {
                terms.push(LaplaceTerm { weight: pn * wk * w_ue, gain: c * g_ue / n as f64, power: 1.0 });
            }
        }
    }
    Ok(InterferenceTerms::uniform(merge(terms)))
}

/// Upper bound: every beam gain floored at the product of sidelobes.
pub fn upper_bound_terms(params: &NetworkParams, load: &LoadModel) -> InterferenceTerms {
    let g = params.rho_bs * params.rho_bs * params.rho_ue * params.rho_ue;
    InterferenceTerms::uniform(merge(vec![LaplaceTerm { weight: load.active_fraction(), gain: g, power: 1.0 }]))
}

/// Crude lower bound: every beam gain set to one.
pub fn all_ones_terms(load: &LoadModel) -> InterferenceTerms {
    InterferenceTerms::uniform(vec![LaplaceTerm { weight: load.active_fraction(), gain: 1.0, power: 1.0 }])
}

/// Multisets of size `n` over `0..=eta`, as counts per value.
fn multisets(n: usize, eta: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, v: usize, eta: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if v == eta {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(left - c, v + 1, eta, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, 0, eta, &mut Vec::with_capacity(eta + 1), &mut out);
    out
}

fn lower_terms_for(params: &NetworkParams, load: &LoadModel, eta: usize, q_bs: &[f64], q_ue: &[f64]) -> Vec<LaplaceTerm> {
    let (rb, ru) = (params.rho_bs * params.rho_bs, params.rho_ue * params.rho_ue);
    let w_ue = hit_weights(q_ue, eta);
    let w_bs = hit_weights(q_bs, eta);
    let mut terms = Vec::new();
    for n in 1..=load.u_max {
        let pn = load.interfering_users[n];
        if pn == 0.0 {
            continue;
        }
        for counts in multisets(n, eta) {
            // Multinomial weight of this multiset of per-user hit counts.
            let mut ln_w = ln_factorial(n);
            let mut w = 1.0;
            for (v, &c) in counts.iter().enumerate() {
                ln_w -= ln_factorial(c);
                w *= w_bs[v].powi(c as i32);
            }
            let w = w * ln_w.exp();
            if w == 0.0 {
                continue;
            }
            for (m, &wm) in w_ue.iter().enumerate() {
                let mut c = 0.0;
                for j in 1..=eta {
                    let covering: usize = counts.iter().enumerate().filter(|&(v, _)| v >= j).map(|(_, &c)| c).sum();
                    let a = n as f64 * rb + (1.0 - rb) * covering as f64;
                    let b = if j <= m { 1.0 } else { ru };
                    c += a * b;
                }
                terms.push(LaplaceTerm { weight: pn * w * wm, gain: c / (eta * n) as f64, power: eta as f64 });
            }
        }
    }
    merge(terms)
}

/// Lower bound from Cauchy-Schwarz on the per-path beam gains.
pub fn lower_bound_terms(params: &NetworkParams, load: &LoadModel, law: AngleLaw, cap: usize) -> Result<InterferenceTerms> {
    let q_bs = angle_pmf(params.n_bs, law)?;
    let q_ue = angle_pmf(params.n_ue, law)?;
    let mut configs = 0usize;
    for eta in [params.paths_los, params.paths_nlos] {
        for n in 1..=load.u_max {
            configs = configs.saturating_add(choose(n + eta, eta) as usize * (eta + 1));
        }
    }
    if configs > cap {
        let mut t = all_ones_terms(load);
        t.fell_back = true;
        return Ok(t);
    }
    Ok(InterferenceTerms {
        los: lower_terms_for(params, load, params.paths_los, &q_bs, &q_ue),
        nlos: lower_terms_for(params, load, params.paths_nlos, &q_bs, &q_ue),
        fell_back: false,
    })
}

#[inline]
fn term_sum(terms: &[LaplaceTerm], y: f64) -> f64 {
    terms
        .iter()
        .map(|t| {
            let z = y * t.gain;
            if t.power == 1.0 {
                t.weight * z / (1.0 + z)
            } else {
                -t.weight * (-t.power * z.ln_1p()).exp_m1()
            }
        })
        .sum()
}

/// `L(s | serving path loss l)` for a given term mixture. `sg` is `s * G`.
pub fn laplace_functional(
    measures: &PropagationMeasures,
    terms: &InterferenceTerms,
    lambda: f64,
    sg: f64,
    l: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if sg == 0.0 {
        return Ok(1.0);
    }
    let shared = terms.los == terms.nlos;
    let integrand = |t: f64| {
        let y = sg / t;
        if shared {
            measures.total_density(t) * term_sum(&terms.los, y)
        } else {
            measures.density(LinkKind::Los, t) * term_sum(&terms.los, y)
                + measures.density(LinkKind::Nlos, t) * term_sum(&terms.nlos, y)
        }
    };
    let r = integrate_log_axis(integrand, l, l, spec)?;
    Ok((-lambda * r.value).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::load::load_pmfs;

    fn setup() -> (NetworkParams, LoadModel, PropagationMeasures) {
        let p = NetworkParams::interference_limited();
        let load = load_pmfs(p.density_ratio(), p.max_users).unwrap();
        let m = PropagationMeasures::new(&p);
        (p, load, m)
    }

    #[test]
    fn hit_weights_form_a_pmf() {
        let q = angle_pmf(16, AngleLaw::Arcsine).unwrap();
        let w = hit_weights(&q, 4);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multiset_count() {
        assert_eq!(multisets(4, 3).len(), 35);
        assert!(multisets(3, 2).iter().all(|c| c.iter().sum::<usize>() == 3));
    }

    #[test]
    fn unit_at_zero_and_ordered() {
        let (p, load, m) = setup();
        let spec = QuadratureSpec::with_tol(1e-8, 1e-12);
        let mut pm = p.clone();
        pm.paths_los = 2;
        pm.paths_nlos = 3;
        let lo = lower_bound_terms(&pm, &load, AngleLaw::Arcsine, DEFAULT_CONFIG_CAP).unwrap();
        let up = upper_bound_terms(&pm, &load);
        let l = m.serving_scale(p.lambda_bs);
        assert_eq!(laplace_functional(&m, &lo, p.lambda_bs, 0.0, l, &spec).unwrap(), 1.0);
        for f in [0.1, 1.0, 10.0, 100.0] {
            let a = laplace_functional(&m, &lo, p.lambda_bs, f * l, l, &spec).unwrap();
            let b = laplace_functional(&m, &up, p.lambda_bs, f * l, l, &spec).unwrap();
            assert!(a <= b + 1e-12 && a > 0.0 && b <= 1.0, "{f}: {a} {b}");
        }
    }

    #[test]
    fn single_path_lower_bound_matches_exact() {
        let (p, load, m) = setup();
        let spec = QuadratureSpec::with_tol(1e-9, 1e-14);
        // Users hit independently in the bound, so the two agree for uniform angles.
        let single = single_path_terms(&p, &load, AngleLaw::Equiprobable).unwrap();
        let lower = lower_bound_terms(&p, &load, AngleLaw::Equiprobable, DEFAULT_CONFIG_CAP).unwrap();
        let l = m.serving_scale(p.lambda_bs);
        for f in [0.3, 3.0, 30.0] {
            let a = laplace_functional(&m, &single, p.lambda_bs, f * l, l, &spec).unwrap();
            let b = laplace_functional(&m, &lower, p.lambda_bs, f * l, l, &spec).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn fallback_when_over_budget() {
        let (p, load, _) = setup();
        let t = lower_bound_terms(&p, &load, AngleLaw::Arcsine, 1).unwrap();
        assert!(t.fell_back);
        assert_eq!(t.los[0].gain, 1.0);
    }
}
