//! Cell-load distributions: users in the typical user's cell and in an
//! interfering cell, with the number of scheduled users capped at `U_M`.

use libm::lgamma as ln_gamma;

use crate::error::{Error, Result};
use crate::numerics::ln_factorial;

/// Shape constant of the gamma approximation to the Voronoi cell area.
const CELL_SHAPE: f64 = 3.5;

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("density ratio must be positive and finite, got {rho}")))
    }
}

fn ln_kappa_core(rho: f64, n: f64) -> f64 {
    let c = CELL_SHAPE;
    c * c.ln() + ln_gamma(n + c) - ln_gamma(c) - (n + c) * (c + rho).ln()
}

/// P(N = n), n >= 1: users in the typical user's cell (typical user included).
pub fn kappa_serving(rho: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let k = n as f64;
    (ln_kappa_core(rho, k) - ln_factorial(n - 1) + (k - 1.0) * rho.ln()).exp()
}

/// P(N = n), n >= 0: users in an interfering cell.
pub fn kappa_interfering(rho: f64, n: usize) -> f64 {
    let k = n as f64;
    let lr = if n == 0 { 0.0 } else { k * rho.ln() };
    (ln_kappa_core(rho, k) - ln_factorial(n) + lr).exp()
}

/// Number of terms kept in load series: `floor(mult * rho)`, at least 1.
pub fn series_terms(rho: f64, mult: f64) -> usize {
    ((mult * rho).floor() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadModel {
    pub rho: f64,
    pub u_max: usize,
    /// P(U = u) for the serving cell, indexed by `u` in `0..=u_max`.
    pub serving_users: Vec<f64>,
    /// P(U = u) for an interfering cell, indexed by `u` in `0..=u_max`.
    pub interfering_users: Vec<f64>,
    /// Terms kept when tabulating the raw load PMFs.
    pub truncation: usize,
}

impl LoadModel {
    /// Probability that an interfering BS is active.
    pub fn active_fraction(&self) -> f64 {
        1.0 - self.interfering_users[0]
    }
}

/// Scheduled-user PMFs for density ratio `rho` and user cap `u_max`. The cap
/// absorbs the tail mass, so both vectors sum to one.
pub fn load_pmfs(rho: f64, u_max: usize) -> Result<LoadModel> {
    check_rho(rho)?;
    if u_max == 0 {
        return Err(Error::Domain("user cap must be at least 1".into()));
    }
    let mut serving = vec![0.0; u_max + 1];
    let mut interfering = vec![0.0; u_max + 1];
    for u in 1..u_max {
        serving[u] = kappa_serving(rho, u);
    }
    for (u, slot) in interfering.iter_mut().enumerate().take(u_max) {
        *slot = kappa_interfering(rho, u);
    }
    serving[u_max] = (1.0 - serving[..u_max].iter().sum::<f64>()).max(0.0);
    interfering[u_max] = (1.0 - interfering[..u_max].iter().sum::<f64>()).max(0.0);

    // Tail mass beyond the truncation point shrinks geometrically with ratio rho / (3.5 + rho).
    let mut truncation = series_terms(rho, 12.0) + u_max;
    while kappa_serving(rho, truncation) > 1e-16 && truncation < 1_000_000 {
        truncation *= 2;
    }
    Ok(LoadModel { rho, u_max, serving_users: serving, interfering_users: interfering, truncation })
}
