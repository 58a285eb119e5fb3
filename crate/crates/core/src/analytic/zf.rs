//! Probability that zero forcing leaves the typical user's beam untouched,
//! under the orthogonal-beam (virtual channel) model.
//!
//! The event: the typical user's strongest path is alone on its beam pair,
//! no co-scheduled user's strongest AoD equals the typical user's AoD or the
//! AoD of a typical-user path sharing its AoA, and no co-scheduled user has a
//! path landing on its own combiner through the typical user's AoD.

use crate::channel::{angle_pmf, AngleLaw};
use crate::error::{Error, Result};
use crate::numerics::{choose, ln_choose};
use crate::params::NetworkParams;

/// Work budget for exact tuple enumeration under a non-uniform angle law.
pub const DEFAULT_ENUMERATION_CAP: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZfForm {
    /// Exact probability of the separation event.
    ExactEvents,
    /// Closed-form composition `sum_j q_j B_j (p A_j(eta_L) + (1-p) A_j(eta_N))^(U-1)`.
    Composite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZfEstimate {
    pub value: f64,
    /// Set when the enumeration budget forced the equiprobable formula.
    pub fell_back: bool,
}

/// Probability that `u1` draws and `u2` draws, all i.i.d. uniform on `n`
/// symbols, use disjoint symbol sets.
pub fn mutual_exclusion_prob(n: usize, u1: usize, u2: usize) -> f64 {
    if u1 == 0 || u2 == 0 {
        return 1.0;
    }
    if n == 0 {
        return 0.0;
    }
    // Surjection counts d! S(u1, d) via the Stirling recurrence.
    let mut stirling = vec![vec![0.0f64; u1 + 1]; u1 + 1];
    stirling[0][0] = 1.0;
    for a in 1..=u1 {
        for b in 1..=a {
            stirling[a][b] = b as f64 * stirling[a - 1][b] + stirling[a - 1][b - 1];
        }
    }
    let nf = n as f64;
    let mut total = 0.0;
    for d in 1..=u1.min(n) {
        if n - d == 0 {
            continue;
        }
        let ln_surj = stirling[u1][d].ln() + crate::numerics::ln_factorial(d);
        let ln_term = ln_choose(nf, d as f64) + ln_surj + u2 as f64 * ((n - d) as f64).ln()
            - (u1 + u2) as f64 * nf.ln();
        total += ln_term.exp();
    }
    total.min(1.0)
}

/// `sum over r-tuples t (entries from weights) of prod w_t * (base - sum_{unique t} w)^power`.
fn tuple_sum(weights: &[f64], r: usize, base: f64, power: usize) -> f64 {
    fn rec(w: &[f64], left: usize, prod: f64, used: &mut Vec<usize>, used_sum: f64, base: f64, power: usize) -> f64 {
        if left == 0 {
            return prod * (base - used_sum).max(0.0).powi(power as i32);
        }
        let mut acc = 0.0;
        for (t, &wt) in w.iter().enumerate() {
            if wt == 0.0 {
                continue;
            }
            let fresh = !used.contains(&t);
            if fresh {
                used.push(t);
            }
            acc += rec(w, left - 1, prod * wt, used, if fresh { used_sum + wt } else { used_sum }, base, power);
            if fresh {
                used.pop();
            }
        }
        acc
    }
    rec(weights, r, 1.0, &mut Vec::with_capacity(r), 0.0, base, power)
}

struct ZfInputs {
    q_bs: Vec<f64>,
    q_ue: Vec<f64>,
    p_los: f64,
    eta_los: usize,
    eta_nlos: usize,
}

impl ZfInputs {
    fn new(params: &NetworkParams, law: AngleLaw) -> Result<Self> {
        Ok(ZfInputs {
            q_bs: angle_pmf(params.n_bs, law)?,
            q_ue: angle_pmf(params.n_ue, law)?,
            p_los: params.p_los,
            eta_los: params.paths_los,
            eta_nlos: params.paths_nlos,
        })
    }
}

fn check(eta: usize, users: usize) -> Result<()> {
    if eta == 0 || users == 0 {
        return Err(Error::Domain(format!("need eta >= 1 and U >= 1, got eta={eta}, U={users}")));
    }
    Ok(())
}

/// Exact probability of the separation event for a typical user with `eta`
/// paths sharing its BS with `users - 1` others. Equals 1 for a single user.
pub fn zf_success_prob(eta: usize, users: usize, params: &NetworkParams, law: AngleLaw) -> Result<ZfEstimate> {
    zf_success_prob_capped(eta, users, params, law, DEFAULT_ENUMERATION_CAP)
}

pub fn zf_success_prob_capped(
    eta: usize,
    users: usize,
    params: &NetworkParams,
    law: AngleLaw,
    cap: usize,
) -> Result<ZfEstimate> {
    check(eta, users)?;
    if users == 1 {
        return Ok(ZfEstimate { value: 1.0, fell_back: false });
    }
    let z = ZfInputs::new(params, law)?;
    let n_bs = z.q_bs.len();
    let others = users - 1;

    // Weight of r extra typical-user paths on the served AoA.
    let b: Vec<f64> = (0..eta)
        .map(|r| {
            z.q_ue
                .iter()
                .map(|&qi| qi * choose(eta - 1, r) * qi.powi(r as i32) * (1.0 - qi).powi((eta - 1 - r) as i32))
                .sum()
        })
        .collect();
    // A co-scheduled user's strongest beam pair must not pick up one of its
    // other paths through the typical user's AoD `j`.
    let co_user = |qj: f64| -> f64 {
        let a = |e: usize| -> f64 { z.q_ue.iter().map(|&qi| qi * (1.0 - qi * qj).powi(e as i32 - 1)).sum() };
        z.p_los * a(z.eta_los) + (1.0 - z.p_los) * a(z.eta_nlos)
    };

    let equiprobable = matches!(law, AngleLaw::Equiprobable);
    let work = (n_bs as f64).powi(eta as i32);
    let fell_back = !equiprobable && work > cap as f64;
    if equiprobable || fell_back {
        // All AoD bins are interchangeable.
        let nf = n_bs as f64;
        let sep: f64 = b
            .iter()
            .enumerate()
            .map(|(r, &br)| br * ((nf - 1.0) / nf).powi((r + others) as i32) * mutual_exclusion_prob(n_bs - 1, r, others))
            .sum();
        let value = sep * co_user(1.0 / nf).powi(others as i32);
        return Ok(ZfEstimate { value: value.clamp(0.0, 1.0), fell_back });
    }
    let mut total = 0.0;
    let mut rest = z.q_bs.clone();
    for (j, &qj) in z.q_bs.iter().enumerate() {
        if qj == 0.0 {
            continue;
        }
        rest[j] = 0.0;
        let sep: f64 = b
            .iter()
            .enumerate()
            .filter(|(_, &br)| br > 0.0)
            .map(|(r, &br)| br * tuple_sum(&rest, r, 1.0 - qj, others))
            .sum();
        rest[j] = qj;
        total += qj * sep * co_user(qj).powi(others as i32);
    }
    Ok(ZfEstimate { value: total.clamp(0.0, 1.0), fell_back: false })
}

/// Closed-form composite with general angle PMFs.
pub fn zf_success_prob_composite(
    eta: usize,
    users: usize,
    params: &NetworkParams,
    law: AngleLaw,
) -> Result<ZfEstimate> {
    zf_success_prob_composite_capped(eta, users, params, law, DEFAULT_ENUMERATION_CAP)
}

pub fn zf_success_prob_composite_capped(
    eta: usize,
    users: usize,
    params: &NetworkParams,
    law: AngleLaw,
    cap: usize,
) -> Result<ZfEstimate> {
    check(eta, users)?;
    let z = ZfInputs::new(params, law)?;
    let n_bs = z.q_bs.len();
    let c = |e: usize| -> f64 { z.q_ue.iter().map(|&qi| qi * (1.0 - qi).powi(e as i32 - 1)).sum() };
    let ce = c(eta);
    let a = |e: usize, qj: f64| -> f64 {
        let ce = c(e);
        ce + (1.0 - qj).powi(e as i32 - 1) * (1.0 - ce)
    };
    let work: f64 = (n_bs as f64).powi(eta as i32);
    let equiprobable = matches!(law, AngleLaw::Equiprobable);
    let fell_back = !equiprobable && work > cap as f64;
    let mut total = 0.0;
    for (j, &qj) in z.q_bs.iter().enumerate() {
        let d = if equiprobable || fell_back {
            mutual_exclusion_prob(n_bs - 1, eta - 1, users - 1)
        } else {
            let l: Vec<f64> = z.q_bs.iter().enumerate().filter(|&(t, _)| t != j).map(|(_, &w)| w / (1.0 - qj)).collect();
            tuple_sum(&l, eta - 1, 1.0, users - 1)
        };
        let bj = ce * (1.0 - qj).powi(users as i32 - 1) + d * (1.0 - ce);
        let mix = z.p_los * a(z.eta_los, qj) + (1.0 - z.p_los) * a(z.eta_nlos, qj);
        total += qj * bj * mix.powi(users as i32 - 1);
    }
    Ok(ZfEstimate { value: total.clamp(0.0, 1.0), fell_back })
}

/// Dispatches on the chosen form.
pub fn zf_penalty(
    eta: usize,
    users: usize,
    params: &NetworkParams,
    law: AngleLaw,
    form: ZfForm,
    cap: usize,
) -> Result<ZfEstimate> {
    match form {
        ZfForm::ExactEvents => zf_success_prob_capped(eta, users, params, law, cap),
        ZfForm::Composite => zf_success_prob_composite_capped(eta, users, params, law, cap),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n_bs: usize, n_ue: usize, eta: usize) -> NetworkParams {
        NetworkParams { n_bs, n_ue, paths_los: eta, paths_nlos: eta, ..NetworkParams::table1() }
    }

    fn brute_exclusion(n: usize, u1: usize, u2: usize) -> f64 {
        let total = n.pow((u1 + u2) as u32);
        let mut hits = 0;
        for code in 0..total {
            let mut c = code;
            let mut digits = Vec::new();
            for _ in 0..u1 + u2 {
                digits.push(c % n);
                c /= n;
            }
            let (a, b) = digits.split_at(u1);
            if a.iter().all(|x| !b.contains(x)) {
                hits += 1;
            }
        }
        hits as f64 / total as f64
    }

    #[test]
    fn exclusion_matches_enumeration() {
        for (n, u1, u2) in [(4, 2, 2), (5, 3, 1), (3, 1, 3), (6, 2, 3), (2, 3, 2)] {
            let e = mutual_exclusion_prob(n, u1, u2);
            assert!((e - brute_exclusion(n, u1, u2)).abs() < 1e-12, "{n} {u1} {u2}");
        }
        assert_eq!(mutual_exclusion_prob(10, 0, 5), 1.0);
        assert_eq!(mutual_exclusion_prob(10, 4, 0), 1.0);
        let big = mutual_exclusion_prob(1024, 3, 8);
        assert!(big.is_finite() && big > 0.9 && big < 1.0);
    }

    #[test]
    fn tuple_sum_uniform_reduces_to_exclusion() {
        let n = 7;
        let w = vec![1.0 / n as f64; n];
        for (r, u) in [(0, 2), (1, 3), (2, 2), (3, 1)] {
            let t = tuple_sum(&w, r, 1.0, u);
            assert!((t - mutual_exclusion_prob(n, r, u)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_user_single_path_is_certain() {
        let p = params(64, 16, 1);
        for law in [AngleLaw::Arcsine, AngleLaw::Equiprobable] {
            assert_eq!(zf_success_prob(1, 1, &p, law).unwrap().value, 1.0);
            assert_eq!(zf_success_prob_composite(1, 1, &p, law).unwrap().value, 1.0);
        }
    }

    #[test]
    fn nonincreasing_in_users_and_grows_with_arrays() {
        let p = NetworkParams::table1();
        for form in [ZfForm::ExactEvents, ZfForm::Composite] {
            let mut prev = 1.0;
            for u in 1..=6 {
                let z = zf_penalty(3, u, &p, AngleLaw::Arcsine, form, DEFAULT_ENUMERATION_CAP).unwrap().value;
                assert!(z <= prev + 1e-12, "{form:?} U={u}");
                prev = z;
            }
        }
        let small = zf_success_prob(3, 4, &params(16, 8, 3), AngleLaw::Equiprobable).unwrap().value;
        let large = zf_success_prob(3, 4, &params(1024, 256, 3), AngleLaw::Equiprobable).unwrap().value;
        assert!(small < large && large > 0.99, "{small} {large}");
    }

    #[test]
    fn equiprobable_general_path_agrees() {
        // The enumeration path with uniform weights must agree with the closed form.
        let p = params(12, 6, 2);
        let exact = zf_success_prob(2, 3, &p, AngleLaw::Equiprobable).unwrap().value;
        let z = ZfInputs::new(&p, AngleLaw::Equiprobable).unwrap();
        let n = z.q_bs.len();
        let mut total = 0.0;
        for j in 0..n {
            let mut rest = z.q_bs.clone();
            rest[j] = 0.0;
            let qj = z.q_bs[j];
            let b0 = 1.0 - 1.0 / 6.0;
            let b1 = 1.0 / 6.0;
            let sep = b0 * tuple_sum(&rest, 0, 1.0 - qj, 2) + b1 * tuple_sum(&rest, 1, 1.0 - qj, 2);
            let a: f64 = z.q_ue.iter().map(|&qi| qi * (1.0 - qi * qj)).sum();
            total += qj * sep * a.powi(2);
        }
        assert!((exact - total).abs() < 1e-12, "{exact} {total}");
    }

    #[test]
    fn fallback_is_flagged() {
        let p = params(64, 16, 3);
        let z = zf_success_prob_capped(3, 2, &p, AngleLaw::Arcsine, 10).unwrap();
        assert!(z.fell_back);
        assert!(!zf_success_prob(3, 2, &p, AngleLaw::Arcsine).unwrap().fell_back);
    }

    #[test]
    fn bad_arguments() {
        let p = NetworkParams::table1();
        assert!(zf_success_prob(0, 1, &p, AngleLaw::Arcsine).is_err());
        assert!(zf_success_prob(1, 0, &p, AngleLaw::Arcsine).is_err());
    }
}
