//! BS and user placement.

use super::config::ScenarioConfig;
use super::stage_rng;
use crate::error::{Error, Result};
use rand::Rng;

/// Node positions, user-to-cell association and BS-user distances.
#[derive(Debug, Clone)]
pub struct Topology {
    /// BS positions in meters; index 0 is the macro BS at the origin.
    pub bs_positions: Vec<(f64, f64)>,
    /// User positions in meters.
    pub user_positions: Vec<(f64, f64)>,
    /// Serving cell of each user.
    pub user_cell: Vec<usize>,
    /// `distances[f][m]`: distance in meters between BS `f` and user `m`.
    pub distances: Vec<Vec<f64>>,
}

impl Topology {
    /// Users served by cell `f`, in ascending user index.
    pub fn cell_users(&self, f: usize) -> impl Iterator<Item = usize> + '_ {
        self.user_cell
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == f)
            .map(|(m, _)| m)
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Uniform draw inside a disc of radius `r` centered at `center`.
fn disc_point(rng: &mut impl Rng, center: (f64, f64), r: f64) -> (f64, f64) {
    let radius = r * rng.random::<f64>().sqrt();
    let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    (
        center.0 + radius * theta.cos(),
        center.1 + radius * theta.sin(),
    )
}

/// Place BSs and users.
///
/// The macro BS sits at the origin; small BSs are uniform inside the macro
/// disc. Users are associated round-robin (`user m -> cell m mod num_bs`) and
/// placed uniformly inside their serving cell's disc. Degenerate zero
/// distances are resampled so path loss stays finite.
pub fn build_topology(config: &ScenarioConfig, seed: u64) -> Result<Topology> {
    config.validate()?;
    let mut rng = stage_rng(seed, 0x10);

    let mut bs_positions = vec![(0.0, 0.0)];
    for _ in 1..config.num_bs {
        bs_positions.push(disc_point(&mut rng, (0.0, 0.0), config.macro_radius));
    }

    let mut user_positions = Vec::with_capacity(config.num_users);
    let mut user_cell = Vec::with_capacity(config.num_users);
    for m in 0..config.num_users {
        let f = m % config.num_bs;
        let radius = if f == 0 {
            config.macro_radius
        } else {
            config.small_radius
        };
        let mut pos = disc_point(&mut rng, bs_positions[f], radius);
        while dist(pos, bs_positions[f]) == 0.0 {
            pos = disc_point(&mut rng, bs_positions[f], radius);
        }
        user_positions.push(pos);
        user_cell.push(f);
    }

    let distances = bs_positions
        .iter()
        .map(|&bs| {
            user_positions
                .iter()
                .map(|&u| dist(bs, u))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();
    for f in 0..config.num_bs {
        for m in 0..config.num_users {
            if distances[f][m] == 0.0 {
                return Err(Error::Domain(format!(
                    "user {m} is exactly at BS {f}: singular path loss"
                )));
            }
        }
    }

    Ok(Topology {
        bs_positions,
        user_positions,
        user_cell,
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scheme;

    fn config(num_bs: usize, num_users: usize) -> ScenarioConfig {
        ScenarioConfig {
            num_bs,
            num_users,
            num_subcarriers: 8,
            num_codebooks: 12,
            codebook_size: 2,
            macro_radius: 1000.0,
            small_radius: 20.0,
            path_loss_exponent: -2.0,
            p_max: vec![30.0; num_bs],
            noise_power: 1e-12,
            l_t: 3,
            k: 6,
            scheme: Scheme::Psma,
            seed: 1,
            epsilon: 1e-4,
            upsilon: 1e-3,
            nu1: 0.1,
            nu2: 0.1,
        }
    }

    #[test]
    fn single_user_lands_inside_macro_disc() {
        let topo = build_topology(&config(1, 1), 7).unwrap();
        assert_eq!(topo.user_cell, vec![0]);
        assert!(topo.distances[0][0] <= 1000.0);
        assert!(topo.distances[0][0] > 0.0);
    }

    #[test]
    fn users_stay_within_their_cell_radius() {
        let cfg = config(3, 12);
        let topo = build_topology(&cfg, 3).unwrap();
        for m in 0..cfg.num_users {
            let f = topo.user_cell[m];
            let radius = if f == 0 {
                cfg.macro_radius
            } else {
                cfg.small_radius
            };
            assert!(
                topo.distances[f][m] <= radius + 1e-9,
                "user {m} at distance {} exceeds radius {radius} of cell {f}",
                topo.distances[f][m]
            );
        }
    }

    #[test]
    fn same_seed_reproduces_topology() {
        let cfg = config(3, 12);
        let a = build_topology(&cfg, 42).unwrap();
        let b = build_topology(&cfg, 42).unwrap();
        assert_eq!(a.bs_positions, b.bs_positions);
        assert_eq!(a.user_positions, b.user_positions);
        assert_eq!(a.user_cell, b.user_cell);
    }

    #[test]
    fn distances_consistent_with_positions() {
        let cfg = config(2, 4);
        let topo = build_topology(&cfg, 5).unwrap();
        for f in 0..2 {
            for m in 0..4 {
                let expect = dist(topo.bs_positions[f], topo.user_positions[m]);
                assert_eq!(topo.distances[f][m], expect);
            }
        }
    }
}
