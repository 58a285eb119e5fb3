//! Monte-Carlo engine: one independent network snapshot per trial, with
//! counter-based per-trial random streams so results do not depend on the
//! thread count.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{CoverageCurve, ThresholdUnit};
use crate::beamform::{design_mu_zf, design_sm, design_su, effective_matrix, log_det_rate, HybridLink};
use crate::channel::{synthesize_channel, ChannelMode, SparseChannel};
use crate::error::{Error, Result};
use crate::netgeom::{draw_link_state, sample_ppp, BsGrid, LinkState, NetworkRealization, Point};
use crate::numerics::{wilson_interval, EmpiricalCcdf, Z95};
use crate::params::{db_to_linear, linear_to_db, LinkKind, NetworkParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Multiuser MIMO, one stream per scheduled user.
    Mu,
    /// Single-user analog beamforming.
    Su,
    /// Single-user spatial multiplexing.
    Sm,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Mu => "mu",
            Scheme::Su => "su",
            Scheme::Sm => "sm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mu" => Ok(Scheme::Mu),
            "su" => Ok(Scheme::Su),
            "sm" => Ok(Scheme::Sm),
            other => Err(Error::param("scheme", format!("unknown scheme `{other}` (mu, su, sm)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub channel_mode: ChannelMode,
    pub interference: bool,
    /// UEs only consider BSs within this distance when associating.
    pub assoc_radius_m: f64,
    /// Interferers whose path loss exceeds the serving one by more than this are ignored.
    pub interference_range_db: f64,
    pub max_resamples: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            channel_mode: ChannelMode::Physical,
            interference: false,
            assoc_radius_m: 300.0,
            interference_range_db: 80.0,
            max_resamples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub params: NetworkParams,
    pub scheme: Scheme,
    pub trials: usize,
    pub seed: u64,
    pub thresholds_db: Vec<f64>,
    pub rate_thresholds_bps: Vec<f64>,
    pub settings: SimSettings,
}

/// `lo`, `lo + step`, ... up to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
}

impl ExperimentPlan {
    pub fn new(params: NetworkParams, scheme: Scheme, trials: usize, seed: u64) -> Self {
        ExperimentPlan {
            params,
            scheme,
            trials,
            seed,
            thresholds_db: linear_grid(-10.0, 40.0, 1.0),
            rate_thresholds_bps: log_grid(1e6, 1e11, 101),
            settings: SimSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<Vec<String>> {
        let w = self.params.validate()?;
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        let s = &self.settings;
        if !(s.assoc_radius_m > 0.0 && s.interference_range_db > 0.0) {
            return Err(Error::param("settings", "association radius and interference range must be positive"));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    /// SINR of the typical user; one entry per stream for SM.
    pub sinr: Vec<f64>,
    pub spectral_efficiency: f64,
    pub per_user_rate_bps: f64,
    pub sum_rate_bps: f64,
    pub scheduled: usize,
    pub cell_load: usize,
    pub serving_kind: LinkKind,
    pub serving_path_loss_db: f64,
    pub rank_deficient: bool,
    pub resamples: usize,
    pub interferers: usize,
}

/// Per-trial generator: the seed picks the key, the trial index the stream.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn design(scheme: Scheme, channels: &[SparseChannel], streams: usize) -> Result<HybridLink> {
    match scheme {
        Scheme::Mu => design_mu_zf(channels),
        Scheme::Su => Ok(design_su(&channels[0])),
        Scheme::Sm => design_sm(&channels[0], streams),
    }
}

/// Interference covariance (normalized by transmit power) seen through
/// combiner `w` from a cell with precoder `link`.
fn interference_cov(ch: &SparseChannel, w: &crate::beamform::HybridBeamformer, link: &HybridLink) -> DMatrix<Complex64> {
    let e = effective_matrix(ch, w, &link.precoder);
    let k = link.precoder.streams().max(1) as f64;
    (&e * e.adjoint()) / Complex64::new(k, 0.0)
}

pub fn run_trial(plan: &ExperimentPlan, trial: usize) -> Result<TrialResult> {
    let p = &plan.params;
    let s = &plan.settings;
    let mut rng = trial_rng(plan.seed, trial);

    let mut resamples = 0;
    let bs = loop {
        let pts = sample_ppp(p.lambda_bs, p.sim_window_radius_m, &mut rng)?;
        if !pts.is_empty() {
            break pts;
        }
        resamples += 1;
        if resamples > s.max_resamples {
            return Err(Error::EmptyNetwork { attempts: resamples });
        }
    };

    // Typical user's links to every BS decide the tagged BS and the interferer set.
    let typ_links: Vec<LinkState> = bs
        .iter()
        .map(|b| draw_link_state(b.norm().max(crate::netgeom::MIN_DISTANCE_M), p, &mut rng))
        .collect::<Result<_>>()?;
    let tagged = (0..bs.len())
        .min_by(|&a, &b| typ_links[a].path_loss.total_cmp(&typ_links[b].path_loss))
        .expect("non-empty");
    let limit = typ_links[tagged].path_loss * db_to_linear(s.interference_range_db);
    let interferers: Vec<usize> = if s.interference {
        (0..bs.len()).filter(|&b| b != tagged && typ_links[b].path_loss <= limit).collect()
    } else {
        Vec::new()
    };

    // Other users: only those that could attach to a BS we care about.
    let mut focus = vec![bs[tagged]];
    focus.extend(interferers.iter().map(|&b| bs[b]));
    let reach = focus.iter().map(|b| b.norm()).fold(0.0, f64::max) + s.assoc_radius_m;
    let grid = BsGrid::new(&focus, s.assoc_radius_m);
    let mut ues = vec![Point::ORIGIN];
    ues.extend(
        sample_ppp(p.lambda_ue, reach, &mut rng)?
            .into_iter()
            .filter(|u| grid.any_within(&focus, u, s.assoc_radius_m)),
    );
    let mut net = NetworkRealization::new(bs, ues);
    net.draw_links(p, Some(s.assoc_radius_m), &mut rng)?;
    // Reuse the typical user's already drawn links.
    for c in net.links[0].iter_mut() {
        c.link = typ_links[c.bs];
    }
    net.associate();
    let max_users = match plan.scheme {
        Scheme::Mu => p.max_users,
        Scheme::Su | Scheme::Sm => 1,
    };
    net.schedule(max_users, &mut rng);

    let channels_for = |net: &NetworkRealization, b: usize, rng: &mut ChaCha8Rng| -> Vec<SparseChannel> {
        net.scheduled[b]
            .iter()
            .map(|&u| {
                let link = net.link(u, b).expect("scheduled users are associated");
                synthesize_channel(link, p, s.channel_mode, rng)
            })
            .collect()
    };
    let served = net.scheduled[tagged].clone();
    let own_channels = channels_for(&net, tagged, &mut rng);
    let own = design(plan.scheme, &own_channels, p.streams)?;

    // Active interfering cells and their precoders.
    let mut cells: Vec<(usize, HybridLink)> = Vec::new();
    for &y in &interferers {
        if net.scheduled[y].is_empty() {
            continue;
        }
        let chs = channels_for(&net, y, &mut rng);
        cells.push((y, design(plan.scheme, &chs, p.streams)?));
    }

    let noise = p.noise_power_w() / p.tx_power_w;
    let wb = p.efficiency * p.bandwidth_hz;
    let load = net.load[tagged].max(1);
    let u_x = served.len();

    let oci_for = |user_pos: Point, link0: Option<&LinkState>, w: &crate::beamform::HybridBeamformer, rng: &mut ChaCha8Rng| -> Result<DMatrix<Complex64>> {
        let k = w.streams();
        let mut cov = DMatrix::<Complex64>::zeros(k, k);
        for (y, link) in &cells {
            let state = match link0 {
                Some(_) => typ_links[*y],
                None => draw_link_state(user_pos.dist(&net.bs[*y]).max(crate::netgeom::MIN_DISTANCE_M), p, rng)?,
            };
            let ch = synthesize_channel(&state, p, s.channel_mode, rng);
            cov += interference_cov(&ch, w, link);
        }
        Ok(cov)
    };

    let (sinr, se, per_user, sum_rate) = match plan.scheme {
        Scheme::Mu | Scheme::Su => {
            let mut rates = Vec::with_capacity(u_x);
            let mut typ_sinr = 0.0;
            for (i, &u) in served.iter().enumerate() {
                if plan.scheme == Scheme::Su && i > 0 {
                    break;
                }
                let w = &own.combiners[i];
                let e = effective_matrix(&own_channels[i], w, &own.precoder);
                let share = u_x as f64;
                let sig = e[(0, i)].norm_sqr() / share;
                let intra: f64 = (0..e.ncols()).filter(|&c| c != i).map(|c| e[(0, c)].norm_sqr()).sum::<f64>() / share;
                let oci = if cells.is_empty() {
                    0.0
                } else if i == 0 {
                    oci_for(Point::ORIGIN, Some(&typ_links[tagged]), w, &mut rng)?[(0, 0)].re
                } else {
                    oci_for(net.ue[u], None, w, &mut rng)?[(0, 0)].re
                };
                let g = sig / (noise + intra + oci);
                if i == 0 {
                    typ_sinr = g;
                }
                rates.push((1.0 + g).log2());
            }
            let se = rates[0];
            let per_user = wb * (u_x as f64 / load as f64) * se;
            let sum = wb * rates.iter().sum::<f64>();
            (vec![typ_sinr], se, per_user, sum)
        }
        Scheme::Sm => {
            let w = &own.combiners[0];
            let h = effective_matrix(&own_channels[0], w, &own.precoder);
            let mut r = (w.bb.adjoint() * w.gram(p.n_ue) * &w.bb) * Complex64::new(noise, 0.0);
            if !cells.is_empty() {
                r += oci_for(Point::ORIGIN, Some(&typ_links[tagged]), w, &mut rng)?;
            }
            let (rate, eig) = log_det_rate(&h, &r, 1.0)?;
            (eig, rate, wb * rate / load as f64, wb * rate)
        }
    };

    Ok(TrialResult {
        trial,
        sinr,
        spectral_efficiency: se,
        per_user_rate_bps: per_user,
        sum_rate_bps: sum_rate,
        scheduled: u_x,
        cell_load: net.load[tagged],
        serving_kind: typ_links[tagged].kind,
        serving_path_loss_db: typ_links[tagged].path_loss_db(),
        rank_deficient: own.rank_deficient,
        resamples,
        interferers: cells.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub trials: Vec<TrialResult>,
    pub sinr: CoverageCurve,
    pub per_user_rate: CoverageCurve,
    pub sum_rate: CoverageCurve,
    pub rank_deficient_trials: usize,
    pub warnings: Vec<String>,
}

/// Empirical CCDF of `samples` on `grid` with Wilson intervals.
pub fn empirical_curve(samples: Vec<f64>, grid: &[f64], unit: ThresholdUnit, label: &str) -> Result<CoverageCurve> {
    let e = EmpiricalCcdf::new(samples)?;
    let n = e.len();
    let mut values = Vec::with_capacity(grid.len());
    let mut ci = Vec::with_capacity(grid.len());
    for &t in grid {
        let k = e.count_above(t);
        values.push(if n == 0 { 0.0 } else { k as f64 / n as f64 });
        ci.push(wilson_interval(k, n, Z95));
    }
    CoverageCurve::new(label, unit, grid.to_vec(), values, Some(ci))
}

pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    let warnings = plan.validate()?;
    let trials = (0..plan.trials)
        .into_par_iter()
        .map(|i| run_trial(plan, i))
        .collect::<Result<Vec<TrialResult>>>()?;
    summarize(plan, trials, warnings)
}

/// Builds curves from finished trials, optionally keeping only some of them.
pub fn summarize(plan: &ExperimentPlan, trials: Vec<TrialResult>, warnings: Vec<String>) -> Result<ExperimentResult> {
    let sinr_db: Vec<f64> = trials
        .iter()
        .flat_map(|t| t.sinr.iter().map(|&g| if g > 0.0 { linear_to_db(g) } else { f64::NEG_INFINITY }))
        .collect();
    let label = plan.scheme.name();
    let sinr = empirical_curve(sinr_db, &plan.thresholds_db, ThresholdUnit::Decibel, &format!("{label}-sinr-sim"))?;
    let per_user = empirical_curve(
        trials.iter().map(|t| t.per_user_rate_bps).collect(),
        &plan.rate_thresholds_bps,
        ThresholdUnit::BitsPerSecond,
        &format!("{label}-rate-sim"),
    )?;
    let sum_rate = empirical_curve(
        trials.iter().map(|t| t.sum_rate_bps).collect(),
        &plan.rate_thresholds_bps,
        ThresholdUnit::BitsPerSecond,
        &format!("{label}-sumrate-sim"),
    )?;
    let rank_deficient_trials = trials.iter().filter(|t| t.rank_deficient).count();
    Ok(ExperimentResult { trials, sinr, per_user_rate: per_user, sum_rate, rank_deficient_trials, warnings })
}
