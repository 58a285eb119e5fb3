//! Hybrid precoder/combiner design: analog beam selection plus a small
//! digital stage (zero-forcing for MU-MIMO, SVD for spatial multiplexing).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{array_inner, Direction, SparseChannel};
use crate::error::{Error, Result};

/// Relative singular-value floor below which an effective channel counts as rank deficient.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamPair {
    pub aoa: Direction,
    pub aod: Direction,
    /// `|a_UE^H H a_BS|^2` times the path loss.
    pub gain: f64,
}

/// Exhaustive search over all (AoA, AoD) pairs of the channel's paths.
pub fn best_beam_pair(ch: &SparseChannel) -> BeamPair {
    let paths = &ch.paths;
    let eta = paths.len();
    // Pairwise steering inner products, shared by every candidate pair.
    let rx: Vec<Complex64> = (0..eta * eta).map(|i| array_inner(paths[i / eta].aoa, paths[i % eta].aoa, ch.n_ue)).collect();
    let tx: Vec<Complex64> = (0..eta * eta).map(|i| array_inner(paths[i / eta].aod, paths[i % eta].aod, ch.n_bs)).collect();
    let scale = ch.prefactor() * ch.prefactor() * ch.path_loss;
    let mut best = BeamPair { aoa: paths[0].aoa, aod: paths[0].aod, gain: -1.0 };
    for r in 0..eta {
        for t in 0..eta {
            let h: Complex64 = (0..eta).map(|k| paths[k].gain * rx[r * eta + k] * tx[k * eta + t]).sum();
            let g = h.norm_sqr() * scale;
            if g > best.gain {
                best = BeamPair { aoa: paths[r].aoa, aod: paths[t].aod, gain: g };
            }
        }
    }
    best
}

/// Analog directions plus a baseband matrix; column `k` is stream `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridBeamformer {
    pub rf: Vec<Direction>,
    pub bb: DMatrix<Complex64>,
}

impl HybridBeamformer {
    pub fn single(dir: Direction) -> Self {
        HybridBeamformer { rf: vec![dir], bb: DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)) }
    }

    pub fn streams(&self) -> usize {
        self.bb.ncols()
    }

    /// Gram matrix of the analog steering vectors on an `n`-element array.
    pub fn gram(&self, n: usize) -> DMatrix<Complex64> {
        let k = self.rf.len();
        DMatrix::from_fn(k, k, |i, j| array_inner(self.rf[i], self.rf[j], n))
    }

    /// Norms of the composite columns `F_RF f_k`.
    pub fn column_norms(&self, n: usize) -> Vec<f64> {
        let g = self.gram(n);
        (0..self.bb.ncols())
            .map(|k| {
                let c = self.bb.column(k);
                (c.adjoint() * &g * c)[(0, 0)].re.max(0.0).sqrt()
            })
            .collect()
    }

    fn normalize_columns(&mut self, n: usize) {
        let norms = self.column_norms(n);
        for (k, nk) in norms.into_iter().enumerate() {
            if nk > 0.0 {
                let s = Complex64::new(1.0 / nk, 0.0);
                for v in self.bb.column_mut(k).iter_mut() {
                    *v *= s;
                }
            }
        }
    }
}

/// `W^H H F` in beam space: rows are combiner streams, columns precoder streams.
pub fn effective_matrix(ch: &SparseChannel, w: &HybridBeamformer, f: &HybridBeamformer) -> DMatrix<Complex64> {
    let beams = DMatrix::from_fn(w.rf.len(), f.rf.len(), |i, j| ch.beam_response(w.rf[i], f.rf[j]));
    w.bb.adjoint() * beams * &f.bb
}

/// Designed transmit and receive beamformers for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridLink {
    pub precoder: HybridBeamformer,
    /// One combiner per scheduled user (MU-MIMO) or a single multi-stream one (SM).
    pub combiners: Vec<HybridBeamformer>,
    pub rank_deficient: bool,
    /// Users left unserved because their beams could not be separated.
    pub dropped: Vec<usize>,
    pub warnings: Vec<String>,
}

fn numerical_rank(m: &DMatrix<Complex64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * top).count()
}

/// Beam-space channel `H_bar[u][c] = a_UE(aoa_u)^H H_u a_BS(aod_c)`.
pub fn beamspace_channel(channels: &[SparseChannel], pairs: &[BeamPair]) -> DMatrix<Complex64> {
    let u = channels.len();
    DMatrix::from_fn(u, u, |r, c| channels[r].beam_response(pairs[r].aoa, pairs[c].aod))
}

/// MU-MIMO: best beam pair per user, then baseband zero forcing on the
/// beam-space channel. Users are admitted in order while the channel stays
/// full rank; later users whose beams collide are dropped.
pub fn design_mu_zf(channels: &[SparseChannel]) -> Result<HybridLink> {
    if channels.is_empty() {
        return Err(Error::Domain("MU-MIMO design needs at least one user".into()));
    }
    let n_bs = channels[0].n_bs;
    let u = channels.len();
    let pairs: Vec<BeamPair> = channels.iter().map(best_beam_pair).collect();
    let h_bar = beamspace_channel(channels, &pairs);

    let mut kept: Vec<usize> = Vec::with_capacity(u);
    let mut dropped = Vec::new();
    for cand in 0..u {
        let mut trial = kept.clone();
        trial.push(cand);
        let sub = DMatrix::from_fn(trial.len(), trial.len(), |r, c| h_bar[(trial[r], trial[c])]);
        if numerical_rank(&sub) == trial.len() {
            kept = trial;
        } else {
            dropped.push(cand);
        }
    }
    let mut warnings = Vec::new();
    let rank_deficient = !dropped.is_empty();
    if rank_deficient {
        warnings.push(format!("rank-deficient beam-space channel; dropped users {dropped:?}"));
    }

    let k = kept.len();
    let sub = DMatrix::from_fn(k, k, |r, c| h_bar[(kept[r], kept[c])]);
    let inv = sub
        .try_inverse()
        .ok_or_else(|| Error::Numerical("beam-space channel inversion failed".into()))?;
    let mut bb = DMatrix::<Complex64>::zeros(u, u);
    for (ci, &c) in kept.iter().enumerate() {
        for (ri, &r) in kept.iter().enumerate() {
            bb[(c, r)] = inv[(ci, ri)];
        }
    }
    let mut precoder = HybridBeamformer { rf: pairs.iter().map(|p| p.aod).collect(), bb };
    precoder.normalize_columns(n_bs);
    let combiners = pairs.iter().map(|p| HybridBeamformer::single(p.aoa)).collect();
    Ok(HybridLink { precoder, combiners, rank_deficient, dropped, warnings })
}

/// Single-user beam steering (one RF chain).
pub fn design_su(ch: &SparseChannel) -> HybridLink {
    let p = best_beam_pair(ch);
    HybridLink {
        precoder: HybridBeamformer::single(p.aod),
        combiners: vec![HybridBeamformer::single(p.aoa)],
        rank_deficient: false,
        dropped: Vec::new(),
        warnings: Vec::new(),
    }
}

/// Spatial multiplexing: analog beams on the `n_s` strongest paths with
/// distinct grid beams, SVD of the beam-space channel in baseband.
pub fn design_sm(ch: &SparseChannel, n_s: usize) -> Result<HybridLink> {
    if n_s == 0 {
        return Err(Error::Domain("spatial multiplexing needs at least one stream".into()));
    }
    let mut warnings = Vec::new();
    let mut order: Vec<usize> = (0..ch.paths.len()).collect();
    order.sort_by(|&a, &b| ch.paths[b].gain.norm_sqr().total_cmp(&ch.paths[a].gain.norm_sqr()));
    let same = |a: Direction, b: Direction| matches!((a, b), (Direction::Beam(i), Direction::Beam(j)) if i == j);
    let mut chosen: Vec<usize> = Vec::new();
    for i in order {
        if chosen.len() == n_s {
            break;
        }
        let p = &ch.paths[i];
        if chosen.iter().any(|&c| same(ch.paths[c].aoa, p.aoa) || same(ch.paths[c].aod, p.aod)) {
            continue;
        }
        chosen.push(i);
    }
    if chosen.len() < n_s {
        warnings.push(format!("streams reduced from {n_s} to {} (channel rank)", chosen.len()));
    }
    let ns = chosen.len();
    let w_rf = HybridBeamformer {
        rf: chosen.iter().map(|&i| ch.paths[i].aoa).collect(),
        bb: DMatrix::identity(ns, ns),
    };
    let f_rf = HybridBeamformer {
        rf: chosen.iter().map(|&i| ch.paths[i].aod).collect(),
        bb: DMatrix::identity(ns, ns),
    };
    let h_e = effective_matrix(ch, &w_rf, &f_rf);
    let svd = h_e.svd(true, true);
    let (u_mat, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v)) => (u, v),
        _ => return Err(Error::Numerical("SVD failed for spatial multiplexing".into())),
    };
    let mut precoder = HybridBeamformer { rf: f_rf.rf, bb: v_t.adjoint() };
    precoder.normalize_columns(ch.n_bs);
    let combiner = HybridBeamformer { rf: w_rf.rf, bb: u_mat };
    Ok(HybridLink { precoder, combiners: vec![combiner], rank_deficient: false, dropped: Vec::new(), warnings })
}

/// Residual sidelobe inner product between grid beams `i1`, `i2`.
pub fn sidelobe_inner_product(i1: usize, i2: usize, rho: f64) -> f64 {
    if i1 == i2 {
        1.0
    } else {
        rho
    }
}

/// Spectral efficiency `log2 det(I + (p / n_s) R^{-1} H H^H)` for an
/// `n_s`-stream effective channel `H` and noise-plus-interference covariance `R`.
pub fn log_det_rate(h: &DMatrix<Complex64>, r: &DMatrix<Complex64>, p: f64) -> Result<(f64, Vec<f64>)> {
    let ns = h.ncols().max(1) as f64;
    let chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?;
    let l_inv_h = chol
        .l()
        .solve_lower_triangular(h)
        .ok_or_else(|| Error::Numerical("whitening solve failed".into()))?;
    let sv = l_inv_h.svd(false, false).singular_values;
    let mut eig: Vec<f64> = sv.iter().map(|s| p / ns * s * s).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let rate = eig.iter().map(|e| (1.0 + e).log2()).sum();
    Ok((rate, eig))
}

/// Unconstrained benchmark: SVD precoding on the full matrix with equal power
/// over `n_s` streams.
pub fn dense_svd_rate(h: &DMatrix<Complex64>, n_s: usize, snr: f64) -> f64 {
    let sv = h.clone().svd(false, false).singular_values;
    let mut s: Vec<f64> = sv.iter().cloned().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s.iter().take(n_s).map(|x| (1.0 + snr / n_s as f64 * x * x).log2()).sum()
}
