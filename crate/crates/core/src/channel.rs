//! Sparse multipath channel on uniform linear arrays.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgeom::LinkState;
use crate::params::NetworkParams;

/// Distribution of quantized (virtual) angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AngleLaw {
    /// Quantized `pi * sin(phi)` with `phi` uniform.
    Arcsine,
    Equiprobable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelMode {
    /// Continuous angles, exact array responses.
    Physical,
    /// Angles on the orthogonal beam grid.
    Virtual(AngleLaw),
}

/// A beam direction: either an index on the `N`-point virtual grid (1-based)
/// or a continuous physical angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Direction {
    Beam(usize),
    Physical(f64),
}

impl Direction {
    /// Spatial frequency `theta` for an array of `n` elements.
    pub fn virtual_angle(&self, n: usize) -> f64 {
        match *self {
            Direction::Beam(i) => -PI + 2.0 * PI * i as f64 / n as f64,
            Direction::Physical(phi) => PI * phi.sin(),
        }
    }
}

/// Grid index (1..=n) whose bin contains spatial frequency `theta`.
pub fn quantize(theta: f64, n: usize) -> usize {
    let i = ((theta + PI) * n as f64 / (2.0 * PI)).round() as usize % n;
    if i == 0 {
        n
    } else {
        i
    }
}

/// Unit-norm ULA response at spatial frequency `theta`.
pub fn array_response(theta: f64, n: usize) -> DVector<Complex64> {
    let s = 1.0 / (n as f64).sqrt();
    DVector::from_iterator(n, (0..n).map(|k| Complex64::from_polar(s, k as f64 * theta)))
}

/// `a(theta1)^H a(theta2)` in closed form.
pub fn array_inner_angles(theta1: f64, theta2: f64, n: usize) -> Complex64 {
    let d = theta2 - theta1;
    let half = 0.5 * d;
    let den = half.sin();
    if den.abs() < 1e-12 {
        // d is a multiple of 2 pi: every term equals exp(j k d).
        let sum: Complex64 = (0..n).map(|k| Complex64::from_polar(1.0, k as f64 * d)).sum();
        return sum / n as f64;
    }
    let mag = (n as f64 * half).sin() / (n as f64 * den);
    Complex64::from_polar(1.0, (n as f64 - 1.0) * half) * mag
}

/// Inner product of two steering vectors on the same `n`-element array.
/// Grid beams are exactly orthogonal.
pub fn array_inner(a: Direction, b: Direction, n: usize) -> Complex64 {
    match (a, b) {
        (Direction::Beam(i), Direction::Beam(j)) => {
            if i % n == j % n {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
        _ => array_inner_angles(a.virtual_angle(n), b.virtual_angle(n), n),
    }
}

/// PMF of the virtual angle index `1..=n` under the arcsine law.
pub fn virtual_angle_pmf(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Domain(format!("virtual angle PMF needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    let edge = |x: f64| x.clamp(-1.0, 1.0).asin();
    let mut pmf: Vec<f64> = (1..n)
        .map(|i| {
            let i = i as f64;
            (edge(-1.0 + (2.0 * i + 1.0) / nf) - edge(-1.0 + (2.0 * i - 1.0) / nf)) / PI
        })
        .collect();
    let head: f64 = pmf.iter().sum();
    pmf.push(1.0 - head);
    Ok(pmf)
}

pub fn angle_pmf(n: usize, law: AngleLaw) -> Result<Vec<f64>> {
    match law {
        AngleLaw::Arcsine => virtual_angle_pmf(n),
        AngleLaw::Equiprobable => {
            if n < 2 {
                return Err(Error::Domain(format!("virtual angle PMF needs n >= 2, got {n}")));
            }
            Ok(vec![1.0 / n as f64; n])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    pub gain: Complex64,
    pub aoa: Direction,
    pub aod: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseChannel {
    pub paths: Vec<PathComponent>,
    pub path_loss: f64,
    pub n_bs: usize,
    pub n_ue: usize,
}

impl SparseChannel {
    /// `sqrt(N_BS N_UE / (eta L))`.
    pub fn prefactor(&self) -> f64 {
        (self.n_bs as f64 * self.n_ue as f64 / (self.paths.len() as f64 * self.path_loss)).sqrt()
    }

    /// `a_UE(w)^H H a_BS(f)` without forming `H`.
    pub fn beam_response(&self, w: Direction, f: Direction) -> Complex64 {
        let s: Complex64 = self
            .paths
            .iter()
            .map(|p| p.gain * array_inner(w, p.aoa, self.n_ue) * array_inner(p.aod, f, self.n_bs))
            .sum();
        s * self.prefactor()
    }

    pub fn strongest_path(&self) -> usize {
        (0..self.paths.len())
            .max_by(|&a, &b| self.paths[a].gain.norm_sqr().total_cmp(&self.paths[b].gain.norm_sqr()))
            .unwrap_or(0)
    }
}

fn draw_direction<R: Rng + ?Sized>(n: usize, mode: ChannelMode, rng: &mut R) -> Direction {
    match mode {
        ChannelMode::Physical => Direction::Physical(2.0 * PI * rng.random::<f64>()),
        ChannelMode::Virtual(AngleLaw::Arcsine) => {
            let phi = 2.0 * PI * rng.random::<f64>();
            Direction::Beam(quantize(PI * phi.sin(), n))
        }
        ChannelMode::Virtual(AngleLaw::Equiprobable) => Direction::Beam(rng.random_range(1..=n)),
    }
}

/// Draws `eta` paths with CN(0,1) gains for a link in the given state.
pub fn synthesize_channel<R: Rng + ?Sized>(
    link: &LinkState,
    params: &NetworkParams,
    mode: ChannelMode,
    rng: &mut R,
) -> SparseChannel {
    let eta = params.paths(link.kind);
    let paths = (0..eta)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            PathComponent {
                gain: Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2,
                aoa: draw_direction(params.n_ue, mode, rng),
                aod: draw_direction(params.n_bs, mode, rng),
            }
        })
        .collect();
    SparseChannel { paths, path_loss: link.path_loss, n_bs: params.n_bs, n_ue: params.n_ue }
}

/// Dense `N_UE x N_BS` channel matrix.
pub fn materialize_matrix(ch: &SparseChannel) -> DMatrix<Complex64> {
    let mut h = DMatrix::<Complex64>::zeros(ch.n_ue, ch.n_bs);
    for p in &ch.paths {
        let a_ue = array_response(p.aoa.virtual_angle(ch.n_ue), ch.n_ue);
        let a_bs = array_response(p.aod.virtual_angle(ch.n_bs), ch.n_bs);
        h += (a_ue * a_bs.adjoint()) * p.gain;
    }
    h * Complex64::new(ch.prefactor(), 0.0)
}
