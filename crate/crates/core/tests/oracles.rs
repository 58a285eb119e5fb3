//! Brute-force Monte-Carlo oracles for the closed-form building blocks. The
//! samplers here are written from the model definitions and share no code
//! with the analytic engine.

use std::f64::consts::PI;

use mmwcov::analytic::{zf_success_prob, PropagationMeasures};
use mmwcov::channel::AngleLaw;
use mmwcov::numerics::QuadratureSpec;
use mmwcov::{LinkKind, NetworkParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn beam_index(n: usize, law: AngleLaw, rng: &mut ChaCha8Rng) -> usize {
    match law {
        AngleLaw::Equiprobable => rng.random_range(0..n),
        AngleLaw::Arcsine => {
            // Uniform physical angle, half-wavelength spacing, nearest of n grid points on [-pi, pi).
            let psi = PI * (2.0 * PI * rng.random::<f64>()).sin();
            let k = ((psi + PI) / (2.0 * PI / n as f64)).round() as usize;
            k % n
        }
    }
}

struct User {
    aoa: Vec<usize>,
    aod: Vec<usize>,
}

fn draw_user(eta: usize, p: &NetworkParams, law: AngleLaw, rng: &mut ChaCha8Rng) -> User {
    User {
        aoa: (0..eta).map(|_| beam_index(p.n_ue, law, rng)).collect(),
        aod: (0..eta).map(|_| beam_index(p.n_bs, law, rng)).collect(),
    }
}

/// All three separation conditions on the orthogonal beam grid; user 0 is
/// the typical user and path 0 is each user's strongest path.
fn zf_event(users: &[User]) -> bool {
    let t = &users[0];
    // Co-users' paths that reach their own combiner must avoid the typical AoD.
    let e1 = users[1..]
        .iter()
        .all(|k| (0..k.aoa.len()).all(|j| !(k.aoa[0] == k.aoa[j] && k.aod[j] == t.aod[0])));
    // Typical-user paths that reach its combiner must avoid co-users' AoDs.
    let e2 = users[1..]
        .iter()
        .all(|k| (0..t.aoa.len()).all(|j| !(t.aoa[0] == t.aoa[j] && t.aod[j] == k.aod[0])));
    // The strongest path is alone on its beam pair.
    let e3 = (1..t.aoa.len()).all(|j| !(t.aoa[0] == t.aoa[j] && t.aod[j] == t.aod[0]));
    e1 && e2 && e3
}

fn zeta_mc(p: &NetworkParams, eta: usize, u: usize, law: AngleLaw, trials: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..trials {
        let mut users = vec![draw_user(eta, p, law, &mut rng)];
        for _ in 1..u {
            let e = if rng.random::<f64>() < p.p_los { p.paths_los } else { p.paths_nlos };
            users.push(draw_user(e, p, law, &mut rng));
        }
        hits += zf_event(&users) as usize;
    }
    let m = hits as f64 / trials as f64;
    (m, (m * (1.0 - m) / trials as f64).sqrt())
}

fn check_zeta(n_bs: usize, n_ue: usize, eta: usize, u: usize, law: AngleLaw, p_los: f64, paths: (usize, usize)) {
    let p = NetworkParams { n_bs, n_ue, p_los, paths_los: paths.0, paths_nlos: paths.1, ..NetworkParams::table1() };
    let an = zf_success_prob(eta, u, &p, law).unwrap();
    assert!(!an.fell_back);
    let (mc, se) = zeta_mc(&p, eta, u, law, 400_000, 11 + eta as u64);
    let tol = 3.0 * se + 1e-4;
    assert!(
        (an.value - mc).abs() <= tol,
        "zeta({n_bs},{n_ue},{eta},{u},{law:?}) analytic {} vs event MC {mc} +- {se}",
        an.value
    );
}

#[test]
fn zeta_matches_event_simulation_small_arrays() {
    for law in [AngleLaw::Equiprobable, AngleLaw::Arcsine] {
        check_zeta(16, 8, 2, 2, law, 0.0, (2, 2));
    }
}

#[test]
fn zeta_matches_event_simulation_reference_arrays() {
    for law in [AngleLaw::Equiprobable, AngleLaw::Arcsine] {
        check_zeta(64, 16, 3, 4, law, 0.0, (3, 3));
    }
}

#[test]
fn zeta_matches_event_simulation_mixed_co_users() {
    check_zeta(16, 8, 3, 3, AngleLaw::Equiprobable, 0.4, (1, 3));
    check_zeta(16, 8, 1, 3, AngleLaw::Arcsine, 0.4, (1, 3));
}

/// Path loss in dB of a link at distance `d`, drawn from the blockage and
/// log-normal shadowing model.
fn draw_loss_db(p: &NetworkParams, d: f64, rng: &mut ChaCha8Rng) -> (LinkKind, f64) {
    let beta = 20.0 * (4.0 * PI * p.carrier_hz / 299_792_458.0).log10();
    let los = d <= p.los_radius_m && rng.random::<f64>() < p.p_los;
    let (alpha, xi, kind) = if los {
        (p.alpha_los, p.shadow_los_db, LinkKind::Los)
    } else {
        (p.alpha_nlos, p.shadow_nlos_db, LinkKind::Nlos)
    };
    let z: f64 = StandardNormal.sample(rng);
    (kind, beta + 10.0 * alpha * d.log10() + xi * z)
}

#[test]
fn intensity_measure_matches_scattered_links() {
    let p = NetworkParams::table1();
    let m = PropagationMeasures::new(&p);
    let radius = 3000.0;
    let area = PI * radius * radius;
    let n = 2_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let thresholds_db = [100.0, 115.0, 130.0];
    let mut counts = [[0usize; 3]; 2];
    for _ in 0..n {
        let d = radius * rng.random::<f64>().sqrt();
        let (kind, loss) = draw_loss_db(&p, d, &mut rng);
        let k = if kind == LinkKind::Los { 0 } else { 1 };
        for (i, &t) in thresholds_db.iter().enumerate() {
            counts[k][i] += (loss <= t) as usize;
        }
    }
    for (k, kind) in [LinkKind::Los, LinkKind::Nlos].into_iter().enumerate() {
        for (i, &t) in thresholds_db.iter().enumerate() {
            let frac = counts[k][i] as f64 / n as f64;
            let se = (frac * (1.0 - frac) / n as f64).sqrt();
            let an = m.mass(kind, 10f64.powf(t / 10.0)) / area;
            assert!((an - frac).abs() <= 4.0 * se + 1e-7, "{kind:?} at {t} dB: {an} vs {frac} +- {se}");
        }
    }
}

#[test]
fn association_probability_matches_network_drops() {
    let p = NetworkParams::table1();
    let m = PropagationMeasures::new(&p);
    let a_los = m.association_probability(LinkKind::Los, p.lambda_bs, &QuadratureSpec::default()).unwrap();
    let a_nlos = m.association_probability(LinkKind::Nlos, p.lambda_bs, &QuadratureSpec::default()).unwrap();
    assert!((a_los + a_nlos - 1.0).abs() < 1e-4);

    let radius: f64 = 2000.0;
    let mean = p.lambda_bs * PI * radius * radius;
    let poisson = rand_distr::Poisson::new(mean).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let drops = 20_000;
    let mut los_wins = 0usize;
    for _ in 0..drops {
        let count = poisson.sample(&mut rng) as usize;
        let mut best = (f64::INFINITY, LinkKind::Nlos);
        for _ in 0..count {
            let d = (radius * rng.random::<f64>().sqrt()).max(1.0);
            let (kind, loss) = draw_loss_db(&p, d, &mut rng);
            if loss < best.0 {
                best = (loss, kind);
            }
        }
        los_wins += (best.1 == LinkKind::Los) as usize;
    }
    let frac = los_wins as f64 / drops as f64;
    let se = (frac * (1.0 - frac) / drops as f64).sqrt();
    assert!((a_los - frac).abs() <= 4.0 * se, "A_L {a_los} vs drops {frac} +- {se}");
}
