//! Intensity measures of the one-dimensional propagation process
//! `{ |y|^alpha / S }` seen from the origin, per LOS/NLOS class.

use std::f64::consts::{LN_10, PI};

use crate::error::{Error, Result};
use crate::numerics::{integrate_log_axis, q, QuadratureSpec};
use crate::params::{LinkKind, NetworkParams};

/// Measures normalized to unit BS density; scale by `lambda` for a deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationMeasures {
    p_los: f64,
    d: f64,
    alpha: [f64; 2],
    sigma: [f64; 2],
    m: f64,
}

fn idx(kind: LinkKind) -> usize {
    match kind {
        LinkKind::Los => 0,
        LinkKind::Nlos => 1,
    }
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl PropagationMeasures {
    pub fn new(params: &NetworkParams) -> Self {
        PropagationMeasures {
            p_los: params.p_los,
            d: params.los_radius_m,
            alpha: [params.alpha_los, params.alpha_nlos],
            sigma: [0.1 * params.shadow_los_db * LN_10, 0.1 * params.shadow_nlos_db * LN_10],
            m: -0.1 * params.reference_loss_db() * LN_10,
        }
    }

    /// Standardized log path loss at which a link sits exactly at distance `D`.
    pub fn upsilon(&self, kind: LinkKind, t: f64) -> f64 {
        let k = idx(kind);
        ((self.d.powf(self.alpha[k]) / t).ln() - self.m) / self.sigma[k]
    }

    /// `exp(2 sigma^2 / alpha^2 + 2 m / alpha)`, the log-normal moment term.
    fn moment(&self, k: usize) -> f64 {
        let (a, s) = (self.alpha[k], self.sigma[k]);
        (2.0 * s * s / (a * a) + 2.0 * self.m / a).exp()
    }

    /// Expected number of links of class `kind` with path loss at most `t`, per unit density.
    pub fn mass(&self, kind: LinkKind, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let k = idx(kind);
        let (a, s) = (self.alpha[k], self.sigma[k]);
        let u = self.upsilon(kind, t);
        let far = t.powf(2.0 / a) * self.moment(k);
        let d2 = self.d * self.d;
        match kind {
            LinkKind::Los => PI * self.p_los * (d2 * q(u) + far * q(2.0 * s / a - u)),
            LinkKind::Nlos => -PI * self.p_los * d2 * q(u) + PI * far * (1.0 - self.p_los * q(2.0 * s / a - u)),
        }
    }

    /// Derivative of [`Self::mass`] in `t`.
    pub fn density(&self, kind: LinkKind, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let k = idx(kind);
        let (a, s) = (self.alpha[k], self.sigma[k]);
        let u = self.upsilon(kind, t);
        let far = self.moment(k) * t.powf(2.0 / a - 1.0);
        let z = s * std::f64::consts::SQRT_2 / a - u / std::f64::consts::SQRT_2;
        let bump = INV_SQRT_2PI / s * (-z * z).exp();
        let near = self.d * self.d * INV_SQRT_2PI / (t * s) * (-0.5 * u * u).exp();
        let tail = q(2.0 * s / a - u);
        match kind {
            LinkKind::Los => PI * self.p_los * (far * (2.0 / a * tail - bump) + near),
            LinkKind::Nlos => PI * (far * (2.0 / a - self.p_los * (2.0 / a) * tail + self.p_los * bump) - self.p_los * near),
        }
    }

    pub fn total_mass(&self, t: f64) -> f64 {
        self.mass(LinkKind::Los, t) + self.mass(LinkKind::Nlos, t)
    }

    pub fn total_density(&self, t: f64) -> f64 {
        self.density(LinkKind::Los, t) + self.density(LinkKind::Nlos, t)
    }

    /// Probability that at least one link of class `kind` exists.
    pub fn presence(&self, kind: LinkKind, lambda: f64) -> f64 {
        match kind {
            LinkKind::Los => -(-lambda * PI * self.p_los * self.d * self.d).exp_m1(),
            LinkKind::Nlos => 1.0,
        }
    }

    /// Density of the smallest path loss among class-`kind` links, given one exists.
    pub fn nearest_density(&self, kind: LinkKind, t: f64, lambda: f64) -> f64 {
        let b = self.presence(kind, lambda);
        if b == 0.0 {
            return 0.0;
        }
        lambda * (-lambda * self.mass(kind, t)).exp() * self.density(kind, t) / b
    }

    /// Path loss `t` where `lambda * M(t) = 1`: the typical serving-link scale.
    pub fn serving_scale(&self, lambda: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 80.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if lambda * self.total_mass(10f64.powf(mid)) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        10f64.powf(0.5 * (lo + hi))
    }

    /// Probability that the serving link is of class `kind`.
    pub fn association_probability(&self, kind: LinkKind, lambda: f64, spec: &QuadratureSpec) -> Result<f64> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Domain(format!("BS density must be positive, got {lambda}")));
        }
        let pivot = self.serving_scale(lambda);
        let r = integrate_log_axis(
            |t| (-lambda * self.total_mass(t)).exp() * lambda * self.density(kind, t),
            0.0,
            pivot,
            spec,
        )?;
        Ok(r.value)
    }
}
