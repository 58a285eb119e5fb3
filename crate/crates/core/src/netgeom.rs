//! Network geometry: PPP sampling, blockage/shadowing link states and
//! minimum-path-loss association.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{LinkKind, NetworkParams};

pub use crate::params::default_sidelobes;

/// Distances below this are clamped to avoid the path-loss singularity.
pub const MIN_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn offset(&self, by: &Point) -> Point {
        Point { x: self.x + by.x, y: self.y + by.y }
    }
}

/// Homogeneous PPP with `intensity` points per m^2 on a disk of `radius` at the origin.
pub fn sample_ppp<R: Rng + ?Sized>(intensity: f64, radius: f64, rng: &mut R) -> Result<Vec<Point>> {
    if !(intensity.is_finite() && intensity >= 0.0 && radius.is_finite() && radius >= 0.0) {
        return Err(Error::Domain(format!("bad PPP intensity {intensity} or radius {radius}")));
    }
    let mean = intensity * std::f64::consts::PI * radius * radius;
    if mean == 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean).map_err(|e| Error::Domain(e.to_string()))?.sample(rng) as usize;
    Ok((0..count)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            Point::new(r * phi.cos(), r * phi.sin())
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub distance_m: f64,
    pub kind: LinkKind,
    /// Linear large-scale gain `S`, including the 1 m reference loss.
    pub shadow_gain: f64,
    /// Linear path loss `d^alpha / S`.
    pub path_loss: f64,
}

impl LinkState {
    pub fn path_loss_db(&self) -> f64 {
        10.0 * self.path_loss.log10()
    }
}

/// Draws blockage and shadowing for one link at distance `d`.
pub fn draw_link_state<R: Rng + ?Sized>(d: f64, params: &NetworkParams, rng: &mut R) -> Result<LinkState> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::Domain(format!("link distance must be positive and finite, got {d}")));
    }
    let d = d.max(MIN_DISTANCE_M);
    let kind = if d <= params.los_radius_m && rng.random::<f64>() < params.p_los {
        LinkKind::Los
    } else {
        LinkKind::Nlos
    };
    let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
    let shadow_db = -params.reference_loss_db() + params.shadow_db(kind) * z;
    let shadow_gain = 10f64.powf(0.1 * shadow_db);
    let path_loss = d.powf(params.alpha(kind)) / shadow_gain;
    Ok(LinkState { distance_m: d, kind, shadow_gain, path_loss })
}

pub fn noise_power(params: &NetworkParams) -> f64 {
    params.noise_power_w()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateLink {
    pub bs: usize,
    pub link: LinkState,
}

/// One snapshot of the network. UE 0 is the typical user.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkRealization {
    pub bs: Vec<Point>,
    pub ue: Vec<Point>,
    /// Candidate serving links per UE.
    pub links: Vec<Vec<CandidateLink>>,
    pub association: Vec<Option<usize>>,
    pub load: Vec<usize>,
    /// Users scheduled by each BS; the typical user comes first at its BS.
    pub scheduled: Vec<Vec<usize>>,
}

/// Bucket grid for radius queries over BS positions.
pub(crate) struct BsGrid {
    cell: f64,
    min: Point,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl BsGrid {
    pub(crate) fn new(points: &[Point], cell: f64) -> Self {
        let (mut lo, mut hi) = (Point::new(f64::MAX, f64::MAX), Point::new(f64::MIN, f64::MIN));
        for p in points {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        if points.is_empty() {
            lo = Point::ORIGIN;
            hi = Point::ORIGIN;
        }
        let nx = ((hi.x - lo.x) / cell).floor() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (i, p) in points.iter().enumerate() {
            let cx = ((p.x - lo.x) / cell) as usize;
            let cy = ((p.y - lo.y) / cell) as usize;
            buckets[cy * nx + cx].push(i);
        }
        BsGrid { cell, min: lo, nx, ny, buckets }
    }

    /// True if some point lies within `radius` of `at`.
    pub(crate) fn any_within(&self, points: &[Point], at: &Point, radius: f64) -> bool {
        let span = (radius / self.cell).ceil() as i64;
        let cx = ((at.x - self.min.x) / self.cell).floor() as i64;
        let cy = ((at.y - self.min.y) / self.cell).floor() as i64;
        for gy in (cy - span).max(0)..=(cy + span).min(self.ny as i64 - 1) {
            for gx in (cx - span).max(0)..=(cx + span).min(self.nx as i64 - 1) {
                if self.buckets[gy as usize * self.nx + gx as usize].iter().any(|&i| points[i].dist(at) <= radius) {
                    return true;
                }
            }
        }
        false
    }

    fn within(&self, points: &[Point], at: &Point, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        let span = (radius / self.cell).ceil() as i64;
        let cx = ((at.x - self.min.x) / self.cell).floor() as i64;
        let cy = ((at.y - self.min.y) / self.cell).floor() as i64;
        for gy in (cy - span).max(0)..=(cy + span).min(self.ny as i64 - 1) {
            for gx in (cx - span).max(0)..=(cx + span).min(self.nx as i64 - 1) {
                for &i in &self.buckets[gy as usize * self.nx + gx as usize] {
                    if points[i].dist(at) <= radius {
                        out.push(i);
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

impl NetworkRealization {
    pub fn new(bs: Vec<Point>, ue: Vec<Point>) -> Self {
        NetworkRealization { bs, ue, ..Default::default() }
    }

    /// Draws candidate links. UE 0 sees every BS; other UEs see the BSs within
    /// `radius` (all BSs when `None`).
    pub fn draw_links<R: Rng + ?Sized>(
        &mut self,
        params: &NetworkParams,
        radius: Option<f64>,
        rng: &mut R,
    ) -> Result<()> {
        let mut links = Vec::with_capacity(self.ue.len());
        let grid = radius.map(|r| BsGrid::new(&self.bs, r.max(1.0)));
        let mut near = Vec::new();
        for (u, pos) in self.ue.iter().enumerate() {
            let mut cands = Vec::new();
            match (&grid, radius) {
                (Some(g), Some(r)) if u > 0 => {
                    g.within(&self.bs, pos, r, &mut near);
                    for &b in &near {
                        cands.push(CandidateLink { bs: b, link: draw_link_state(pos.dist(&self.bs[b]).max(MIN_DISTANCE_M), params, rng)? });
                    }
                }
                _ => {
                    for (b, bpos) in self.bs.iter().enumerate() {
                        cands.push(CandidateLink { bs: b, link: draw_link_state(pos.dist(bpos).max(MIN_DISTANCE_M), params, rng)? });
                    }
                }
            }
            links.push(cands);
        }
        self.links = links;
        Ok(())
    }

    /// Minimum-path-loss association over the drawn candidates; fills loads.
    pub fn associate(&mut self) {
        self.association = self
            .links
            .iter()
            .map(|c| c.iter().min_by(|a, b| a.link.path_loss.total_cmp(&b.link.path_loss)).map(|c| c.bs))
            .collect();
        self.load = vec![0; self.bs.len()];
        for b in self.association.iter().flatten() {
            self.load[*b] += 1;
        }
    }

    /// Uniformly schedules `min(load, u_max)` users per BS, typical user
    /// always included at its serving BS.
    pub fn schedule<R: Rng + ?Sized>(&mut self, u_max: usize, rng: &mut R) {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.bs.len()];
        for (u, b) in self.association.iter().enumerate() {
            if let Some(b) = b {
                members[*b].push(u);
            }
        }
        self.scheduled = members
            .into_iter()
            .map(|m| {
                let k = m.len().min(u_max);
                if k == 0 {
                    return Vec::new();
                }
                if m[0] == 0 {
                    let rest = &m[1..];
                    let mut out = vec![0];
                    out.extend(rand::seq::index::sample(rng, rest.len(), k - 1).into_iter().map(|i| rest[i]));
                    out
                } else {
                    rand::seq::index::sample(rng, m.len(), k).into_iter().map(|i| m[i]).collect()
                }
            })
            .collect();
    }

    pub fn serving_link(&self, ue: usize) -> Option<&CandidateLink> {
        let b = self.association.get(ue).copied().flatten()?;
        self.links[ue].iter().find(|c| c.bs == b)
    }

    pub fn link(&self, ue: usize, bs: usize) -> Option<&LinkState> {
        self.links.get(ue)?.iter().find(|c| c.bs == bs).map(|c| &c.link)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixed_link(d: f64, kind: LinkKind, p: &NetworkParams) -> LinkState {
        let shadow_gain = 10f64.powf(-0.1 * p.reference_loss_db());
        LinkState { distance_m: d, kind, shadow_gain, path_loss: d.powf(p.alpha(kind)) / shadow_gain }
    }

    #[test]
    fn ppp_count_matches_intensity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lambda = 60e-6;
        let r = 2000.0;
        let n: usize = (0..200).map(|_| sample_ppp(lambda, r, &mut rng).unwrap().len()).sum();
        let mean = lambda * std::f64::consts::PI * r * r;
        let avg = n as f64 / 200.0;
        // 200 draws of Poisson(754): sd of mean about 1.94.
        assert!((avg - mean).abs() < 8.0, "{avg} vs {mean}");
        assert!(sample_ppp(lambda, r, &mut rng).unwrap().iter().all(|p| p.norm() <= r));
    }

    #[test]
    fn link_state_regimes() {
        let p = NetworkParams::table1();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            assert_eq!(draw_link_state(250.0, &p, &mut rng).unwrap().kind, LinkKind::Nlos);
        }
        let mut p1 = p.clone();
        p1.p_los = 1.0;
        assert_eq!(draw_link_state(100.0, &p1, &mut rng).unwrap().kind, LinkKind::Los);
        assert!(draw_link_state(0.0, &p, &mut rng).is_err());
        assert!(draw_link_state(f64::NAN, &p, &mut rng).is_err());
        assert_eq!(draw_link_state(0.2, &p, &mut rng).unwrap().distance_m, 1.0);
    }

    #[test]
    fn association_picks_min_path_loss() {
        let p = NetworkParams::table1();
        let mut net = NetworkRealization::new(vec![Point::new(50.0, 0.0), Point::new(0.0, 120.0)], vec![Point::ORIGIN]);
        // 50 m NLOS: 50^3.3 ~ 4.2e5; 120 m LOS: 120^2 = 1.4e4.
        net.links = vec![vec![
            CandidateLink { bs: 0, link: fixed_link(50.0, LinkKind::Nlos, &p) },
            CandidateLink { bs: 1, link: fixed_link(120.0, LinkKind::Los, &p) },
        ]];
        net.associate();
        assert_eq!(net.association, vec![Some(1)]);
        assert_eq!(net.load, vec![0, 1]);
    }

    #[test]
    fn scheduling_keeps_typical_user() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = NetworkRealization::new(vec![Point::ORIGIN], vec![Point::ORIGIN; 10]);
        net.association = vec![Some(0); 10];
        net.load = vec![10];
        net.schedule(4, &mut rng);
        assert_eq!(net.scheduled[0].len(), 4);
        assert_eq!(net.scheduled[0][0], 0);
        let mut s = net.scheduled[0].clone();
        s.dedup();
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn radius_limited_candidates() {
        let p = NetworkParams::table1();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bs = vec![Point::new(0.0, 0.0), Point::new(900.0, 0.0), Point::new(1000.0, 50.0)];
        let ue = vec![Point::ORIGIN, Point::new(950.0, 0.0)];
        let mut net = NetworkRealization::new(bs, ue);
        net.draw_links(&p, Some(300.0), &mut rng).unwrap();
        assert_eq!(net.links[0].len(), 3);
        let seen: Vec<usize> = net.links[1].iter().map(|c| c.bs).collect();
        assert_eq!(seen, vec![1, 2]);
    }
}
