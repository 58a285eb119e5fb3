//! Experiment runner: a flat `key = value` config with units in the key
//! names, analytic / simulation / comparison pipelines, CSV curves and a JSON
//! run summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analytic::{
    AnalyticConfig, CoverageCurve, CoverageEngine, Interference, LoadAveraging, ZfForm,
};
use crate::channel::{AngleLaw, ChannelMode};
use crate::compare::{invert_coverage, power_normalized_params, SchemeComparison};
use crate::error::{Error, Result};
use crate::params::{dbm_to_watts, default_sidelobes, per_km2, NetworkParams};
use crate::simkernel::{linear_grid, log_grid, run_experiment, ExperimentPlan, ExperimentResult, Scheme, SimSettings};

/// Environment variable that sets the worker thread count.
pub const THREADS_ENV: &str = "MMWCOV_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    Analytic,
    Simulate,
    Validate,
    Compare,
    Sweep,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Analytic => "analytic",
            Mode::Simulate => "simulate",
            Mode::Validate => "validate",
            Mode::Compare => "compare",
            Mode::Sweep => "sweep",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "analytic" => Mode::Analytic,
            "simulate" => Mode::Simulate,
            "validate" => Mode::Validate,
            "compare" => Mode::Compare,
            "sweep" => Mode::Sweep,
            other => return Err(Error::param("mode", format!("unknown mode `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Preset {
    Table1,
    Interference,
}

/// Parsed configuration. Physical quantities are kept in the units of their
/// keys so that the canonical text round-trips exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub mode: Mode,
    pub scheme: Scheme,
    pub seed: u64,
    pub trials: usize,
    pub output_dir: PathBuf,

    pub carrier_ghz: f64,
    pub bandwidth_mhz: f64,
    pub p_los: f64,
    pub los_radius_m: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    pub shadow_los_db: f64,
    pub shadow_nlos_db: f64,
    pub lambda_bs_per_km2: f64,
    pub lambda_ue_per_km2: f64,
    pub tx_power_dbm: f64,
    pub n_bs: usize,
    pub n_ue: usize,
    pub paths_los: usize,
    pub paths_nlos: usize,
    pub max_users: usize,
    pub streams: usize,
    pub noise_figure_db: f64,
    pub sidelobe_angle_rad: f64,
    /// `None` derives the sidelobe gain from the array size.
    pub rho_bs: Option<f64>,
    pub rho_ue: Option<f64>,
    pub efficiency: f64,
    pub nu: f64,
    pub sm_n_ue: usize,

    pub interference: bool,
    pub channel_mode: ChannelMode,
    pub sim_window_radius_m: f64,
    pub assoc_radius_m: f64,
    pub interference_range_db: f64,

    pub zeta_form: ZfForm,
    pub zeta_law: AngleLaw,
    pub single_path_law: AngleLaw,
    pub bound_law: AngleLaw,
    pub load_averaging: LoadAveraging,
    pub rate_terms_mult: f64,

    pub threshold_db_min: f64,
    pub threshold_db_max: f64,
    pub threshold_db_step: f64,
    pub rate_bps_min: f64,
    pub rate_bps_max: f64,
    pub rate_points: usize,
    pub rate_curves: bool,
    pub percentiles: Vec<f64>,
    pub sweep_variable: String,
    pub sweep_values: Vec<f64>,
    pub sweep_threshold_db: f64,
}

/// Keys in canonical order.
pub const KEYS: &[&str] = &[
    "preset",
    "mode",
    "scheme",
    "seed",
    "trials",
    "output_dir",
    "carrier_ghz",
    "bandwidth_mhz",
    "p_los",
    "los_radius_m",
    "alpha_los",
    "alpha_nlos",
    "shadow_los_db",
    "shadow_nlos_db",
    "lambda_bs_per_km2",
    "lambda_ue_per_km2",
    "tx_power_dbm",
    "n_bs",
    "n_ue",
    "paths_los",
    "paths_nlos",
    "max_users",
    "streams",
    "noise_figure_db",
    "sidelobe_angle_rad",
    "rho_bs",
    "rho_ue",
    "efficiency",
    "nu",
    "sm_n_ue",
    "interference",
    "channel_mode",
    "sim_window_radius_m",
    "assoc_radius_m",
    "interference_range_db",
    "zeta_form",
    "zeta_law",
    "single_path_law",
    "bound_law",
    "load_averaging",
    "rate_terms_mult",
    "threshold_db_min",
    "threshold_db_max",
    "threshold_db_step",
    "rate_bps_min",
    "rate_bps_max",
    "rate_points",
    "rate_curves",
    "percentiles",
    "sweep_variable",
    "sweep_values",
    "sweep_threshold_db",
];

/// Variables a sweep may range over.
pub const SWEEP_VARIABLES: &[&str] = &["lambda_bs_per_km2", "lambda_ue_per_km2", "max_users", "n_bs", "n_ue"];

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::preset(Preset::Table1)
    }
}

fn law_name(l: AngleLaw) -> &'static str {
    match l {
        AngleLaw::Arcsine => "arcsine",
        AngleLaw::Equiprobable => "equiprobable",
    }
}

fn parse_law(s: &str) -> std::result::Result<AngleLaw, String> {
    match s {
        "arcsine" => Ok(AngleLaw::Arcsine),
        "equiprobable" => Ok(AngleLaw::Equiprobable),
        _ => Err(format!("expected `arcsine` or `equiprobable`, got `{s}`")),
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(format!("expected on/off, got `{s}`")),
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v)
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if v <= 0.0 {
        return Err(format!("must be positive, got {v}"));
    }
    Ok(v)
}

fn non_negative(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if v < 0.0 {
        return Err(format!("must be non-negative, got {v}"));
    }
    Ok(v)
}

fn probability(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("must lie in [0, 1], got {v}"));
    }
    Ok(v)
}

fn count(s: &str) -> std::result::Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("`{s}` is not a non-negative integer"))?;
    if v == 0 {
        return Err("must be at least 1".into());
    }
    Ok(v)
}

fn list(s: &str, each: fn(&str) -> std::result::Result<f64, String>) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(|x| each(x.trim())).collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let mut c = RunConfig {
            preset,
            mode: Mode::Analytic,
            scheme: Scheme::Mu,
            seed: 1,
            trials: 10_000,
            output_dir: PathBuf::from("out"),
            carrier_ghz: 73.0,
            bandwidth_mhz: 1000.0,
            p_los: 0.11,
            los_radius_m: 200.0,
            alpha_los: 2.0,
            alpha_nlos: 3.3,
            shadow_los_db: 5.2,
            shadow_nlos_db: 7.6,
            lambda_bs_per_km2: 60.0,
            lambda_ue_per_km2: 500.0,
            tx_power_dbm: 30.0,
            n_bs: 64,
            n_ue: 16,
            paths_los: 1,
            paths_nlos: 3,
            max_users: 4,
            streams: 2,
            noise_figure_db: 10.0,
            sidelobe_angle_rad: crate::params::DEFAULT_SIDELOBE_ANGLE,
            rho_bs: None,
            rho_ue: None,
            efficiency: 1.0,
            nu: crate::compare::DEFAULT_NU,
            sm_n_ue: crate::compare::DEFAULT_SM_N_UE,
            interference: false,
            channel_mode: ChannelMode::Physical,
            sim_window_radius_m: 2000.0,
            assoc_radius_m: SimSettings::default().assoc_radius_m,
            interference_range_db: SimSettings::default().interference_range_db,
            zeta_form: ZfForm::ExactEvents,
            zeta_law: AngleLaw::Equiprobable,
            single_path_law: AngleLaw::Arcsine,
            bound_law: AngleLaw::Equiprobable,
            load_averaging: LoadAveraging::Full,
            rate_terms_mult: 12.0,
            threshold_db_min: -10.0,
            threshold_db_max: 40.0,
            threshold_db_step: 1.0,
            rate_bps_min: 1e6,
            rate_bps_max: 1e11,
            rate_points: 101,
            rate_curves: false,
            percentiles: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95],
            sweep_variable: "lambda_bs_per_km2".into(),
            sweep_values: (40..=120).step_by(10).map(|x| x as f64).collect(),
            sweep_threshold_db: 20.0,
        };
        if preset == Preset::Interference {
            c.carrier_ghz = 28.0;
            c.bandwidth_mhz = 200.0;
            c.p_los = 0.5;
            c.lambda_ue_per_km2 = 1000.0;
            c.n_ue = 64;
            c.paths_los = 1;
            c.paths_nlos = 1;
            c.interference = true;
        }
        c
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "preset" => {
                self.preset = match v {
                    "table1" => Preset::Table1,
                    "interference" => Preset::Interference,
                    _ => return Err(format!("unknown preset `{v}` (table1, interference)")),
                }
            }
            "mode" => self.mode = Mode::parse(v).map_err(|e| e.to_string())?,
            "scheme" => self.scheme = Scheme::parse(v).map_err(|e| e.to_string())?,
            "seed" => self.seed = v.parse().map_err(|_| format!("`{v}` is not a non-negative integer"))?,
            "trials" => self.trials = count(v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "carrier_ghz" => self.carrier_ghz = positive(v)?,
            "bandwidth_mhz" => self.bandwidth_mhz = positive(v)?,
            "p_los" => self.p_los = probability(v)?,
            "los_radius_m" => self.los_radius_m = non_negative(v)?,
            "alpha_los" => self.alpha_los = positive(v)?,
            "alpha_nlos" => self.alpha_nlos = positive(v)?,
            "shadow_los_db" => self.shadow_los_db = positive(v)?,
            "shadow_nlos_db" => self.shadow_nlos_db = positive(v)?,
            "lambda_bs_per_km2" => self.lambda_bs_per_km2 = positive(v)?,
            "lambda_ue_per_km2" => self.lambda_ue_per_km2 = positive(v)?,
            "tx_power_dbm" => self.tx_power_dbm = parse_f64(v)?,
            "n_bs" => self.n_bs = count(v)?,
            "n_ue" => self.n_ue = count(v)?,
            "paths_los" => self.paths_los = count(v)?,
            "paths_nlos" => self.paths_nlos = count(v)?,
            "max_users" => self.max_users = count(v)?,
            "streams" => self.streams = count(v)?,
            "noise_figure_db" => self.noise_figure_db = non_negative(v)?,
            "sidelobe_angle_rad" => self.sidelobe_angle_rad = positive(v)?,
            "rho_bs" => self.rho_bs = if v == "auto" { None } else { Some(probability(v)?) },
            "rho_ue" => self.rho_ue = if v == "auto" { None } else { Some(probability(v)?) },
            "efficiency" => {
                let e = probability(v)?;
                if e == 0.0 {
                    return Err("must be positive".into());
                }
                self.efficiency = e
            }
            "nu" => {
                let n = positive(v)?;
                if n < 1.0 {
                    return Err(format!("must be at least 1, got {n}"));
                }
                self.nu = n
            }
            "sm_n_ue" => self.sm_n_ue = count(v)?,
            "interference" => self.interference = parse_bool(v)?,
            "channel_mode" => {
                self.channel_mode = match v {
                    "physical" => ChannelMode::Physical,
                    "virtual" => ChannelMode::Virtual(AngleLaw::Arcsine),
                    "virtual-equiprobable" => ChannelMode::Virtual(AngleLaw::Equiprobable),
                    _ => return Err(format!("unknown channel mode `{v}` (physical, virtual, virtual-equiprobable)")),
                }
            }
            "sim_window_radius_m" => self.sim_window_radius_m = positive(v)?,
            "assoc_radius_m" => self.assoc_radius_m = positive(v)?,
            "interference_range_db" => self.interference_range_db = positive(v)?,
            "zeta_form" => {
                self.zeta_form = match v {
                    "exact" => ZfForm::ExactEvents,
                    "composite" => ZfForm::Composite,
                    _ => return Err(format!("expected `exact` or `composite`, got `{v}`")),
                }
            }
            "zeta_law" => self.zeta_law = parse_law(v)?,
            "single_path_law" => self.single_path_law = parse_law(v)?,
            "bound_law" => self.bound_law = parse_law(v)?,
            "load_averaging" => {
                self.load_averaging = match v {
                    "full" => LoadAveraging::Full,
                    "max" => LoadAveraging::MaxLoad,
                    _ => return Err(format!("expected `full` or `max`, got `{v}`")),
                }
            }
            "rate_terms_mult" => self.rate_terms_mult = positive(v)?,
            "threshold_db_min" => self.threshold_db_min = parse_f64(v)?,
            "threshold_db_max" => self.threshold_db_max = parse_f64(v)?,
            "threshold_db_step" => self.threshold_db_step = positive(v)?,
            "rate_bps_min" => self.rate_bps_min = positive(v)?,
            "rate_bps_max" => self.rate_bps_max = positive(v)?,
            "rate_points" => {
                let n = count(v)?;
                if n < 2 {
                    return Err("need at least 2 points".into());
                }
                self.rate_points = n
            }
            "rate_curves" => self.rate_curves = parse_bool(v)?,
            "percentiles" => {
                let p = list(v, probability)?;
                if p.iter().any(|&x| x == 0.0 || x == 1.0) {
                    return Err("percentiles must lie strictly between 0 and 1".into());
                }
                self.percentiles = p
            }
            "sweep_variable" => {
                if !SWEEP_VARIABLES.contains(&v) {
                    return Err(format!("cannot sweep `{v}` (one of {})", SWEEP_VARIABLES.join(", ")));
                }
                self.sweep_variable = v.to_string()
            }
            "sweep_values" => self.sweep_values = list(v, positive)?,
            "sweep_threshold_db" => self.sweep_threshold_db = parse_f64(v)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_else(|| "auto".into());
        let onoff = |b: bool| if b { "on" } else { "off" }.to_string();
        match key {
            "preset" => match self.preset {
                Preset::Table1 => "table1".into(),
                Preset::Interference => "interference".into(),
            },
            "mode" => self.mode.name().into(),
            "scheme" => self.scheme.name().into(),
            "seed" => self.seed.to_string(),
            "trials" => self.trials.to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            "carrier_ghz" => self.carrier_ghz.to_string(),
            "bandwidth_mhz" => self.bandwidth_mhz.to_string(),
            "p_los" => self.p_los.to_string(),
            "los_radius_m" => self.los_radius_m.to_string(),
            "alpha_los" => self.alpha_los.to_string(),
            "alpha_nlos" => self.alpha_nlos.to_string(),
            "shadow_los_db" => self.shadow_los_db.to_string(),
            "shadow_nlos_db" => self.shadow_nlos_db.to_string(),
            "lambda_bs_per_km2" => self.lambda_bs_per_km2.to_string(),
            "lambda_ue_per_km2" => self.lambda_ue_per_km2.to_string(),
            "tx_power_dbm" => self.tx_power_dbm.to_string(),
            "n_bs" => self.n_bs.to_string(),
            "n_ue" => self.n_ue.to_string(),
            "paths_los" => self.paths_los.to_string(),
            "paths_nlos" => self.paths_nlos.to_string(),
            "max_users" => self.max_users.to_string(),
            "streams" => self.streams.to_string(),
            "noise_figure_db" => self.noise_figure_db.to_string(),
            "sidelobe_angle_rad" => self.sidelobe_angle_rad.to_string(),
            "rho_bs" => opt(self.rho_bs),
            "rho_ue" => opt(self.rho_ue),
            "efficiency" => self.efficiency.to_string(),
            "nu" => self.nu.to_string(),
            "sm_n_ue" => self.sm_n_ue.to_string(),
            "interference" => onoff(self.interference),
            "channel_mode" => match self.channel_mode {
                ChannelMode::Physical => "physical".into(),
                ChannelMode::Virtual(AngleLaw::Arcsine) => "virtual".into(),
                ChannelMode::Virtual(AngleLaw::Equiprobable) => "virtual-equiprobable".into(),
            },
            "sim_window_radius_m" => self.sim_window_radius_m.to_string(),
            "assoc_radius_m" => self.assoc_radius_m.to_string(),
            "interference_range_db" => self.interference_range_db.to_string(),
            "zeta_form" => match self.zeta_form {
                ZfForm::ExactEvents => "exact".into(),
                ZfForm::Composite => "composite".into(),
            },
            "zeta_law" => law_name(self.zeta_law).into(),
            "single_path_law" => law_name(self.single_path_law).into(),
            "bound_law" => law_name(self.bound_law).into(),
            "load_averaging" => match self.load_averaging {
                LoadAveraging::Full => "full".into(),
                LoadAveraging::MaxLoad => "max".into(),
            },
            "rate_terms_mult" => self.rate_terms_mult.to_string(),
            "threshold_db_min" => self.threshold_db_min.to_string(),
            "threshold_db_max" => self.threshold_db_max.to_string(),
            "threshold_db_step" => self.threshold_db_step.to_string(),
            "rate_bps_min" => self.rate_bps_min.to_string(),
            "rate_bps_max" => self.rate_bps_max.to_string(),
            "rate_points" => self.rate_points.to_string(),
            "rate_curves" => onoff(self.rate_curves),
            "percentiles" => join(&self.percentiles),
            "sweep_variable" => self.sweep_variable.clone(),
            "sweep_values" => join(&self.sweep_values),
            "sweep_threshold_db" => self.sweep_threshold_db.to_string(),
            _ => unreachable!("key table and getter disagree on `{key}`"),
        }
    }

    /// Every key with its resolved value, in canonical order.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            let _ = writeln!(s, "{k} = {}", self.get(k));
        }
        s
    }

    /// Hex digest of the canonical text, ignoring the output directory.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let h = Sha256::digest(c.canonical_text().as_bytes());
        h.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    pub fn params(&self) -> NetworkParams {
        let (auto_bs, auto_ue) = default_sidelobes(self.n_bs, self.n_ue, self.sidelobe_angle_rad);
        NetworkParams {
            carrier_hz: self.carrier_ghz * 1e9,
            bandwidth_hz: self.bandwidth_mhz * 1e6,
            p_los: self.p_los,
            los_radius_m: self.los_radius_m,
            alpha_los: self.alpha_los,
            alpha_nlos: self.alpha_nlos,
            shadow_los_db: self.shadow_los_db,
            shadow_nlos_db: self.shadow_nlos_db,
            lambda_bs: per_km2(self.lambda_bs_per_km2),
            lambda_ue: per_km2(self.lambda_ue_per_km2),
            tx_power_w: dbm_to_watts(self.tx_power_dbm),
            n_bs: self.n_bs,
            n_ue: self.n_ue,
            paths_los: self.paths_los,
            paths_nlos: self.paths_nlos,
            max_users: match self.scheme {
                Scheme::Mu => self.max_users,
                Scheme::Su | Scheme::Sm => 1,
            },
            streams: self.streams,
            noise_figure_db: self.noise_figure_db,
            rho_bs: self.rho_bs.unwrap_or(auto_bs),
            rho_ue: self.rho_ue.unwrap_or(auto_ue),
            efficiency: self.efficiency,
            power_ratio: self.nu,
            sim_window_radius_m: self.sim_window_radius_m,
        }
    }

    pub fn analytic_config(&self) -> AnalyticConfig {
        AnalyticConfig {
            zf_form: self.zeta_form,
            zeta_law: self.zeta_law,
            single_path_law: self.single_path_law,
            bound_law: self.bound_law,
            load_averaging: self.load_averaging,
            rate_terms_mult: self.rate_terms_mult,
            ..AnalyticConfig::default()
        }
    }

    pub fn thresholds_db(&self) -> Vec<f64> {
        linear_grid(self.threshold_db_min, self.threshold_db_max, self.threshold_db_step)
    }

    pub fn rate_thresholds_bps(&self) -> Vec<f64> {
        log_grid(self.rate_bps_min, self.rate_bps_max, self.rate_points)
    }

    pub fn plan(&self, params: NetworkParams, scheme: Scheme) -> ExperimentPlan {
        ExperimentPlan {
            params,
            scheme,
            trials: self.trials,
            seed: self.seed,
            thresholds_db: self.thresholds_db(),
            rate_thresholds_bps: self.rate_thresholds_bps(),
            settings: SimSettings {
                channel_mode: self.channel_mode,
                interference: self.interference,
                assoc_radius_m: self.assoc_radius_m,
                interference_range_db: self.interference_range_db,
                max_resamples: SimSettings::default().max_resamples,
            },
        }
    }

    /// Cross-field checks.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.threshold_db_max <= self.threshold_db_min {
            return Err(Error::param("threshold_db_max", "must exceed threshold_db_min"));
        }
        if self.rate_bps_max <= self.rate_bps_min {
            return Err(Error::param("rate_bps_max", "must exceed rate_bps_min"));
        }
        if self.mode == Mode::Sweep && self.sweep_values.is_empty() {
            return Err(Error::param("sweep_values", "a sweep needs at least one value"));
        }
        if self.sweep_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("sweep_values", "must be strictly increasing"));
        }
        self.params().validate()
    }
}

/// Parses a config document. Blank lines and `#` comments are ignored; the
/// preset, if any, is applied before the other keys.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config { line: line_no, reason: format!("expected `key = value`, got `{line}`") })?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.is_empty() || v.is_empty() {
            return Err(Error::Config { line: line_no, reason: "empty key or value".into() });
        }
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::Config { line: line_no, reason: format!("unknown key `{k}`") });
        }
        if let Some((first, ..)) = entries.iter().find(|(_, ek, _)| *ek == k) {
            return Err(Error::Config { line: line_no, reason: format!("duplicate key `{k}` (first set on line {first})") });
        }
        entries.push((line_no, k, v));
    }
    let mut cfg = RunConfig::default();
    if let Some((line, _, v)) = entries.iter().find(|(_, k, _)| k == "preset") {
        cfg.set("preset", v).map_err(|reason| Error::Config { line: *line, reason })?;
        cfg = RunConfig::preset(cfg.preset);
    }
    for (line, k, v) in &entries {
        cfg.set(k, v).map_err(|reason| Error::Config { line: *line, reason: format!("`{k}`: {reason}") })?;
    }
    Ok(cfg)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub tool: &'static str,
    pub version: &'static str,
    pub mode: String,
    pub scheme: String,
    pub digest: String,
    pub seed: u64,
    pub trials: usize,
    pub threads: usize,
    pub wall_time_s: f64,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
    pub statistics: serde_json::Map<String, serde_json::Value>,
    pub config: String,
}

struct Outputs {
    dir: PathBuf,
    mode: &'static str,
    scheme: String,
    digest: String,
    files: Vec<String>,
}

impl Outputs {
    /// Writes `<mode>_<scheme>[-<tag>]_<digest>.csv`.
    fn write(&mut self, tag: Option<&str>, body: &str) -> Result<()> {
        let scheme = match tag {
            Some(t) => format!("{}-{t}", self.scheme),
            None => self.scheme.clone(),
        };
        let name = format!("{}_{}_{}.csv", self.mode, scheme, self.digest);
        std::fs::write(self.dir.join(&name), body)?;
        self.files.push(name);
        Ok(())
    }
}

fn analytic_model(params: &NetworkParams, interference: bool) -> Interference {
    if !interference {
        Interference::Off
    } else if params.paths_los == 1 && params.paths_nlos == 1 {
        Interference::SinglePath
    } else {
        Interference::LowerBound
    }
}

fn stat(stats: &mut serde_json::Map<String, serde_json::Value>, key: &str, v: impl Serialize) {
    stats.insert(key.to_string(), serde_json::to_value(v).unwrap_or(serde_json::Value::Null));
}

fn sim_stats(stats: &mut serde_json::Map<String, serde_json::Value>, prefix: &str, r: &ExperimentResult) {
    let n = r.trials.len().max(1) as f64;
    stat(stats, &format!("{prefix}rank_deficient_trials"), r.rank_deficient_trials);
    stat(stats, &format!("{prefix}mean_scheduled"), r.trials.iter().map(|t| t.scheduled).sum::<usize>() as f64 / n);
    stat(stats, &format!("{prefix}mean_interferers"), r.trials.iter().map(|t| t.interferers).sum::<usize>() as f64 / n);
    stat(stats, &format!("{prefix}resamples"), r.trials.iter().map(|t| t.resamples).sum::<usize>());
}

/// Analytic curves for the configured scheme. Multipath interference yields
/// a lower and an upper curve.
fn analytic_curves(cfg: &RunConfig, params: &NetworkParams) -> Result<(CoverageEngine, CoverageCurve, Option<CoverageCurve>)> {
    if cfg.scheme == Scheme::Sm {
        return Err(Error::param("scheme", "spatial multiplexing is only available through simulation"));
    }
    let engine = CoverageEngine::new(params, cfg.analytic_config())?;
    let grid = cfg.thresholds_db();
    let model = analytic_model(params, cfg.interference);
    let label = format!("{}-analytic", cfg.scheme.name());
    let main = engine.coverage_curve(&grid, model, &label)?;
    let upper = if model == Interference::LowerBound {
        Some(engine.coverage_curve(&grid, Interference::UpperBound, &format!("{label}-upper"))?)
    } else {
        None
    };
    Ok((engine, main, upper))
}

fn max_gap(a: &CoverageCurve, b: &CoverageCurve) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sweep_params(cfg: &RunConfig, value: f64) -> Result<RunConfig> {
    let mut c = cfg.clone();
    let as_count = |v: f64| -> Result<usize> {
        if v.fract() != 0.0 || v < 1.0 {
            return Err(Error::param("sweep_values", format!("{} needs whole numbers, got {v}", cfg.sweep_variable)));
        }
        Ok(v as usize)
    };
    match cfg.sweep_variable.as_str() {
        "lambda_bs_per_km2" => c.lambda_bs_per_km2 = value,
        "lambda_ue_per_km2" => c.lambda_ue_per_km2 = value,
        "max_users" => c.max_users = as_count(value)?,
        "n_bs" => c.n_bs = as_count(value)?,
        "n_ue" => c.n_ue = as_count(value)?,
        other => return Err(Error::param("sweep_variable", format!("cannot sweep `{other}`"))),
    }
    Ok(c)
}

/// Runs the configured pipeline and writes its artifacts into `output_dir`.
pub fn execute(cfg: &RunConfig) -> Result<RunSummary> {
    let start = Instant::now();
    let mut warnings = cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let digest = cfg.digest();
    let mut out = Outputs {
        dir: cfg.output_dir.clone(),
        mode: cfg.mode.name(),
        scheme: cfg.scheme.name().to_string(),
        digest: digest.clone(),
        files: Vec::new(),
    };
    let mut stats = serde_json::Map::new();
    let params = cfg.params();

    match cfg.mode {
        Mode::Analytic => {
            let (engine, main, upper) = analytic_curves(cfg, &params)?;
            warnings.extend(engine.warnings().iter().cloned());
            out.write(None, &main.to_csv())?;
            if let Some(u) = upper {
                out.write(Some("upper"), &u.to_csv())?;
            }
            if cfg.rate_curves {
                let model = analytic_model(&params, cfg.interference);
                let rate = engine.rate_curve(&cfg.rate_thresholds_bps(), model, "rate-analytic")?;
                for p in [0.5, 0.95] {
                    stat(&mut stats, &format!("rate_inverse_{p}"), invert_coverage(&rate, p).ok());
                }
                out.write(Some("rate"), &rate.to_csv())?;
            }
        }
        Mode::Simulate => {
            let r = run_experiment(&cfg.plan(params.clone(), cfg.scheme))?;
            warnings.extend(r.warnings.iter().cloned());
            sim_stats(&mut stats, "", &r);
            out.write(None, &r.sinr.to_csv())?;
            out.write(Some("rate"), &r.per_user_rate.to_csv())?;
            out.write(Some("sumrate"), &r.sum_rate.to_csv())?;
        }
        Mode::Validate => {
            let (engine, main, upper) = analytic_curves(cfg, &params)?;
            warnings.extend(engine.warnings().iter().cloned());
            let r = run_experiment(&cfg.plan(params.clone(), cfg.scheme))?;
            warnings.extend(r.warnings.iter().cloned());
            sim_stats(&mut stats, "", &r);
            stat(&mut stats, "max_gap", max_gap(&main, &r.sinr));
            if let Some(u) = &upper {
                stat(&mut stats, "max_gap_upper", max_gap(u, &r.sinr));
                out.write(Some("analytic-upper"), &u.to_csv())?;
            }
            out.write(Some("analytic"), &main.to_csv())?;
            out.write(Some("sim"), &r.sinr.to_csv())?;
        }
        Mode::Compare => {
            out.scheme = "mu-su".into();
            let pn = power_normalized_params(&params, cfg.nu, cfg.sm_n_ue)?;
            let rates = cfg.rate_thresholds_bps();
            let mu = CoverageEngine::new(&params, cfg.analytic_config())?;
            let su = CoverageEngine::new(&pn.su, cfg.analytic_config())?;
            let model = analytic_model(&params, cfg.interference);
            let mu_rate = mu.rate_curve(&rates, model, "mu-rate-analytic")?;
            let su_rate = su.rate_curve(&rates, model, "su-rate-analytic")?;
            let per_user = SchemeComparison::new(&mu_rate, &su_rate, &cfg.percentiles);
            out.write(None, &per_user.to_csv())?;
            // Sum rates from simulation, including spatial multiplexing.
            let mu_sim = run_experiment(&cfg.plan(params.clone(), Scheme::Mu))?;
            let su_sim = run_experiment(&cfg.plan(pn.su.clone(), Scheme::Su))?;
            let sm_sim = run_experiment(&cfg.plan(pn.sm.clone(), Scheme::Sm))?;
            sim_stats(&mut stats, "mu_", &mu_sim);
            let sum = SchemeComparison::new(&mu_sim.sum_rate, &su_sim.sum_rate, &cfg.percentiles);
            out.write(Some("sumrate"), &sum.to_csv())?;
            out.scheme = "mu-sm".into();
            let sm = SchemeComparison::new(&mu_sim.sum_rate, &sm_sim.sum_rate, &cfg.percentiles);
            out.write(Some("sumrate"), &sm.to_csv())?;
            let pick = |c: &SchemeComparison, p: f64| {
                c.percentiles.iter().position(|&x| (x - p).abs() < 1e-12).and_then(|i| c.o_values[i])
            };
            stat(&mut stats, "o_mu_su_per_user_0.5", pick(&per_user, 0.5));
            stat(&mut stats, "o_mu_su_per_user_0.95", pick(&per_user, 0.95));
            stat(&mut stats, "o_mu_su_sum_rate_0.5", pick(&sum, 0.5));
            stat(&mut stats, "o_mu_sm_sum_rate_0.5", pick(&sm, 0.5));
            stat(&mut stats, "su_lambda_bs_per_km2", cfg.lambda_bs_per_km2 * cfg.nu);
        }
        Mode::Sweep => {
            if cfg.scheme == Scheme::Sm {
                return Err(Error::param("scheme", "spatial multiplexing is only available through simulation"));
            }
            let tau = crate::params::db_to_linear(cfg.sweep_threshold_db);
            let mut body = format!("{},ccdf,bound_low,bound_high\n", cfg.sweep_variable);
            let mut best = (f64::NAN, f64::NEG_INFINITY);
            for &v in &cfg.sweep_values {
                let c = sweep_params(cfg, v)?;
                let p = c.params();
                let engine = CoverageEngine::new(&p, c.analytic_config())?;
                let model = analytic_model(&p, c.interference);
                let main = engine.coverage(tau, model)?;
                let (lo, hi) = if model == Interference::LowerBound {
                    let up = engine.coverage(tau, Interference::UpperBound)?;
                    (main.min(up).to_string(), main.max(up).to_string())
                } else {
                    (String::new(), String::new())
                };
                if main > best.1 {
                    best = (v, main);
                }
                let _ = writeln!(body, "{v},{main},{lo},{hi}");
            }
            stat(&mut stats, "argmax", best.0);
            stat(&mut stats, "max_coverage", best.1);
            out.write(None, &body)?;
        }
    }

    warnings.sort();
    warnings.dedup();
    let summary = RunSummary {
        tool: "mmwcov",
        version: env!("CARGO_PKG_VERSION"),
        mode: cfg.mode.name().into(),
        scheme: cfg.scheme.name().into(),
        digest: digest.clone(),
        seed: cfg.seed,
        trials: cfg.trials,
        threads: rayon::current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
        files: out.files.clone(),
        warnings,
        statistics: stats,
        config: cfg.canonical_text(),
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(cfg.output_dir.join(format!("summary_{}_{}.json", cfg.mode.name(), digest)), text + "\n")?;
    Ok(summary)
}

/// Reads the thread-count override, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::param(THREADS_ENV, format!("expected a positive integer, got `{v}`"))),
        },
    }
}

/// Machine-readable error record for stderr.
pub fn error_record(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}
