use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Thermal noise floor in dBm/Hz at room temperature.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;
/// Half-power angle used for the default sidelobe gains, in radians.
pub const DEFAULT_SIDELOBE_ANGLE: f64 = 0.244;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    Los,
    Nlos,
}

impl LinkKind {
    pub const BOTH: [LinkKind; 2] = [LinkKind::Los, LinkKind::Nlos];

    pub fn other(self) -> LinkKind {
        match self {
            LinkKind::Los => LinkKind::Nlos,
            LinkKind::Nlos => LinkKind::Los,
        }
    }
}

/// Every scalar of the network model plus the simulation knobs. SI units:
/// Hz, metres, per square metre, watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub p_los: f64,
    pub los_radius_m: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    pub shadow_los_db: f64,
    pub shadow_nlos_db: f64,
    pub lambda_bs: f64,
    pub lambda_ue: f64,
    pub tx_power_w: f64,
    pub n_bs: usize,
    pub n_ue: usize,
    pub paths_los: usize,
    pub paths_nlos: usize,
    pub max_users: usize,
    pub streams: usize,
    pub noise_figure_db: f64,
    pub rho_bs: f64,
    pub rho_ue: f64,
    pub efficiency: f64,
    pub power_ratio: f64,
    pub sim_window_radius_m: f64,
}

pub fn per_km2(x: f64) -> f64 {
    x * 1e-6
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Default sidelobe gains `1 / (N sin(angle))` for the BS and UE arrays.
pub fn default_sidelobes(n_bs: usize, n_ue: usize, angle: f64) -> (f64, f64) {
    let s = angle.sin();
    ((1.0 / (n_bs as f64 * s)).min(1.0), (1.0 / (n_ue as f64 * s)).min(1.0))
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self::table1()
    }
}

impl NetworkParams {
    /// 73 GHz noise-limited reference deployment.
    pub fn table1() -> Self {
        let (rho_bs, rho_ue) = default_sidelobes(64, 16, DEFAULT_SIDELOBE_ANGLE);
        NetworkParams {
            carrier_hz: 73e9,
            bandwidth_hz: 1e9,
            p_los: 0.11,
            los_radius_m: 200.0,
            alpha_los: 2.0,
            alpha_nlos: 3.3,
            shadow_los_db: 5.2,
            shadow_nlos_db: 7.6,
            lambda_bs: per_km2(60.0),
            lambda_ue: per_km2(500.0),
            tx_power_w: dbm_to_watts(30.0),
            n_bs: 64,
            n_ue: 16,
            paths_los: 1,
            paths_nlos: 3,
            max_users: 4,
            streams: 2,
            noise_figure_db: 10.0,
            rho_bs,
            rho_ue,
            efficiency: 1.0,
            power_ratio: 1.38,
            sim_window_radius_m: 2000.0,
        }
    }

    /// 28 GHz, 200 MHz, lightly blocked and densely loaded single-path
    /// deployment with 64-element arrays at both ends.
    pub fn interference_limited() -> Self {
        NetworkParams {
            carrier_hz: 28e9,
            bandwidth_hz: 200e6,
            p_los: 0.5,
            lambda_ue: per_km2(1000.0),
            n_ue: 64,
            paths_los: 1,
            paths_nlos: 1,
            ..Self::table1()
        }
        .with_default_sidelobes(DEFAULT_SIDELOBE_ANGLE)
    }

    /// Recomputes the sidelobe gains from the array sizes.
    pub fn with_default_sidelobes(mut self, angle: f64) -> Self {
        let (b, u) = default_sidelobes(self.n_bs, self.n_ue, angle);
        self.rho_bs = b;
        self.rho_ue = u;
        self
    }

    pub fn with_lambda_bs(&self, lambda_bs: f64) -> Self {
        NetworkParams { lambda_bs, ..self.clone() }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Free-space loss at 1 m in dB.
    pub fn reference_loss_db(&self) -> f64 {
        20.0 * (4.0 * std::f64::consts::PI / self.wavelength()).log10()
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(THERMAL_NOISE_DBM_HZ + linear_to_db(self.bandwidth_hz) + self.noise_figure_db)
    }

    /// Transmit power times both array gains.
    pub fn array_gain(&self) -> f64 {
        self.tx_power_w * self.n_bs as f64 * self.n_ue as f64
    }

    /// Mean number of users per base station.
    pub fn density_ratio(&self) -> f64 {
        self.lambda_ue / self.lambda_bs
    }

    pub fn paths(&self, kind: LinkKind) -> usize {
        match kind {
            LinkKind::Los => self.paths_los,
            LinkKind::Nlos => self.paths_nlos,
        }
    }

    pub fn alpha(&self, kind: LinkKind) -> f64 {
        match kind {
            LinkKind::Los => self.alpha_los,
            LinkKind::Nlos => self.alpha_nlos,
        }
    }

    pub fn shadow_db(&self, kind: LinkKind) -> f64 {
        match kind {
            LinkKind::Los => self.shadow_los_db,
            LinkKind::Nlos => self.shadow_nlos_db,
        }
    }

    /// Checks ranges; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("los_radius_m", self.los_radius_m),
            ("alpha_los", self.alpha_los),
            ("alpha_nlos", self.alpha_nlos),
            ("lambda_bs", self.lambda_bs),
            ("lambda_ue", self.lambda_ue),
            ("tx_power_w", self.tx_power_w),
            ("efficiency", self.efficiency),
            ("power_ratio", self.power_ratio),
            ("sim_window_radius_m", self.sim_window_radius_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("shadow_los_db", self.shadow_los_db), ("shadow_nlos_db", self.shadow_nlos_db)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        if !self.noise_figure_db.is_finite() {
            return Err(Error::param("noise_figure_db", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.p_los) {
            return Err(Error::param("p_los", format!("must lie in [0, 1], got {}", self.p_los)));
        }
        for (name, v) in [("rho_bs", self.rho_bs), ("rho_ue", self.rho_ue)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        if self.efficiency > 1.0 {
            return Err(Error::param("efficiency", "must not exceed 1"));
        }
        if self.n_bs < 2 || self.n_ue < 2 {
            return Err(Error::param("n_bs/n_ue", "arrays need at least 2 elements"));
        }
        if self.paths_los == 0 || self.paths_nlos == 0 {
            return Err(Error::param("paths", "every link needs at least one path"));
        }
        if self.max_users == 0 || self.max_users > self.n_bs {
            return Err(Error::param(
                "max_users",
                format!("must lie in 1..={} (one RF chain per user), got {}", self.n_bs, self.max_users),
            ));
        }
        if self.streams == 0 || self.streams > self.n_ue.min(self.n_bs) {
            return Err(Error::param("streams", format!("must lie in 1..=min(n_bs, n_ue), got {}", self.streams)));
        }
        let mut warnings = Vec::new();
        if self.alpha_nlos <= 2.0 {
            warnings.push(format!(
                "alpha_nlos = {} <= 2: aggregate interference from an infinite plane diverges",
                self.alpha_nlos
            ));
        }
        if self.n_bs < 16 || self.n_ue < 4 {
            warnings.push("small arrays: the orthogonal-beam approximation is loose".into());
        }
        if self.sim_window_radius_m < 5.0 * self.los_radius_m {
            warnings.push("simulation window is small compared with the LOS radius".into());
        }
        Ok(warnings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_derived_quantities() {
        let p = NetworkParams::table1();
        assert!((p.reference_loss_db() - 69.714).abs() < 1e-3);
        assert!((p.noise_power_w() / 3.981_071_705_534_97e-11 - 1.0).abs() < 1e-12);
        assert_eq!(p.array_gain(), 1024.0);
        assert!((p.density_ratio() - 500.0 / 60.0).abs() < 1e-12);
        assert!(p.validate().unwrap().is_empty());
    }

    #[test]
    fn default_sidelobe_values() {
        let (b, u) = default_sidelobes(64, 16, DEFAULT_SIDELOBE_ANGLE);
        assert!((b - 0.0647).abs() < 1e-4);
        assert!((u - 0.2588).abs() < 1e-4);
    }

    #[test]
    fn validation_rejects_bad_ranges() {
        let mut p = NetworkParams::table1();
        p.p_los = 1.5;
        assert!(p.validate().is_err());
        let mut p = NetworkParams::table1();
        p.max_users = 65;
        assert!(p.validate().is_err());
        let mut p = NetworkParams::table1();
        p.lambda_bs = 0.0;
        assert!(p.validate().is_err());
        let mut p = NetworkParams::table1();
        p.alpha_nlos = 1.9;
        assert_eq!(p.validate().unwrap().len(), 1);
    }
}
