//! Exhaustive grid-search oracle for tiny power problems.
//!
//! The evaluator below recomputes SINRs term by term with plain loops so the
//! oracle stays an independent check on the solver rather than a second
//! client of its machinery.

use crate::error::{Error, Result};
use crate::phy::{avg_codebook_gain, Allocation};
use crate::scenario::{ChannelRealization, CodebookStructure};

/// Flat description of one active entry for the direct evaluator.
struct FlatEntry {
    cell: usize,
    user: usize,
    codebook: usize,
    eff_own: f64,
    noise: f64,
    /// Average-gain key used for the decode order.
    key: (f64, usize),
}

struct DirectEvaluator {
    entries: Vec<FlatEntry>,
    /// `cross[i][j]`: gain applied to entry `j`'s power as interference at
    /// entry `i`'s receiver (zero when not coupled).
    cross: Vec<Vec<f64>>,
    /// Ordered decode pairs as `(worse, better)` entry indices.
    pairs: Vec<(usize, usize)>,
    cells: Vec<usize>,
}

impl DirectEvaluator {
    fn new(
        alloc: &Allocation,
        channel: &ChannelRealization,
        structure: &CodebookStructure,
    ) -> Self {
        let mut entries = Vec::new();
        for (f, m, c) in alloc.active_entries() {
            let subs = &structure.codebook_subcarriers[c];
            let eff_own: f64 = subs
                .iter()
                .map(|&n| structure.eta[n][c] * channel.gain[f][m][n])
                .sum();
            entries.push(FlatEntry {
                cell: f,
                user: m,
                codebook: c,
                eff_own,
                noise: channel.noise[m],
                key: (avg_codebook_gain(channel, structure, f, m, c), m),
            });
        }
        let n = entries.len();
        let mut cross = vec![vec![0.0; n]; n];
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j || entries[i].codebook != entries[j].codebook {
                    continue;
                }
                if entries[i].cell != entries[j].cell {
                    // Other-cell co-channel stream: interference scaled by
                    // the gain from j's BS to i's receiver.
                    let c = entries[i].codebook;
                    let (victim, interferer_bs) = (entries[i].user, entries[j].cell);
                    let subs = &structure.codebook_subcarriers[c];
                    cross[i][j] = subs
                        .iter()
                        .map(|&s| structure.eta[s][c] * channel.gain[interferer_bs][victim][s])
                        .sum();
                } else if entries[i].key < entries[j].key {
                    // Same-cell stream decoded later than i stays in i's
                    // denominator, scaled by i's own codebook gain; it also
                    // forms an ordered decode pair.
                    cross[i][j] = entries[i].eff_own;
                    pairs.push((i, j));
                }
            }
        }
        let cells = entries.iter().map(|e| e.cell).collect();
        DirectEvaluator {
            entries,
            cross,
            pairs,
            cells,
        }
    }

    fn sum_rate(&self, p: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.entries.len() {
            let mut den = self.entries[i].noise;
            for j in 0..self.entries.len() {
                den += self.cross[i][j] * p[j];
            }
            total += (1.0 + p[i] * self.entries[i].eff_own / den).ln();
        }
        total
    }

    /// Worst decode-order residual; the candidate is admissible when <= 0
    /// up to rounding.
    fn max_sic_residual(&self, p: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for &(wi, bi) in &self.pairs {
            let worse = &self.entries[wi];
            let better = &self.entries[bi];
            let mut toward_worse = worse.noise;
            let mut toward_better = better.noise;
            for j in 0..self.entries.len() {
                if self.entries[j].cell != worse.cell && self.entries[j].codebook == worse.codebook
                {
                    toward_worse += self.cross[wi][j] * p[j];
                    toward_better += self.cross[bi][j] * p[j];
                }
            }
            let residual = worse.eff_own * toward_better - better.eff_own * toward_worse;
            let scale = worse.eff_own * toward_better + better.eff_own * toward_worse;
            worst = worst.max(residual / scale.max(f64::MIN_POSITIVE));
        }
        if worst.is_finite() {
            worst
        } else {
            0.0
        }
    }
}

/// Exhaustive grid search over the per-cell power simplex.
///
/// Refuses instances with more than three active power variables; within
/// that, every grid point satisfying the budgets and the decode-order
/// constraints is evaluated and the best one returned.
pub fn brute_force_power_oracle(
    alloc: &Allocation,
    channel: &ChannelRealization,
    structure: &CodebookStructure,
    p_max: &[f64],
    grid_points: usize,
) -> Result<Allocation> {
    let entries = alloc.active_entries();
    if entries.len() > 3 {
        return Err(Error::OracleRefusal(format!(
            "{} active power variables exceed the oracle's limit of 3",
            entries.len()
        )));
    }
    if grid_points < 2 {
        return Err(Error::Domain("need at least two grid points".into()));
    }
    let eval = DirectEvaluator::new(alloc, channel, structure);
    let n = eval.entries.len();
    let grids: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let cap = p_max[eval.cells[i]];
            (0..grid_points)
                .map(|k| cap * k as f64 / (grid_points - 1) as f64)
                .collect()
        })
        .collect();

    let mut best_p = vec![0.0; n];
    let mut best_rate = eval.sum_rate(&best_p);
    let mut p = vec![0.0; n];
    let mut index = vec![0usize; n];
    loop {
        for i in 0..n {
            p[i] = grids[i][index[i]];
        }
        let mut feasible = true;
        for f in 0..p_max.len() {
            let total: f64 = (0..n).filter(|&i| eval.cells[i] == f).map(|i| p[i]).sum();
            if total > p_max[f] * (1.0 + 1e-12) {
                feasible = false;
                break;
            }
        }
        if feasible && eval.max_sic_residual(&p) <= 1e-12 {
            let rate = eval.sum_rate(&p);
            if rate > best_rate {
                best_rate = rate;
                best_p.copy_from_slice(&p);
            }
        }
        // Odometer increment over the grid product.
        let mut carry = 0;
        while carry < n {
            index[carry] += 1;
            if index[carry] < grid_points {
                break;
            }
            index[carry] = 0;
            carry += 1;
        }
        if carry == n {
            break;
        }
    }

    let mut out = alloc.clone();
    out.mask_powers();
    for (slot, e) in eval.entries.iter().enumerate() {
        out.p[e.user][e.codebook] = best_p[slot];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::sum_rate;
    use crate::scenario::Scheme;

    fn single_cell_fixture(
        num_users: usize,
    ) -> (Allocation, ChannelRealization, CodebookStructure) {
        let gain: Vec<Vec<f64>> = (0..num_users)
            .map(|m| vec![0.5 + m as f64, 1.5 - 0.3 * m as f64])
            .collect();
        let channel = ChannelRealization {
            gain: vec![gain],
            noise: vec![0.2; num_users],
        };
        let structure = CodebookStructure {
            rho: vec![vec![true, false], vec![true, true]],
            eta: vec![vec![0.5, 0.0], vec![0.5, 1.0]],
            codebook_subcarriers: vec![vec![0, 1], vec![1]],
        };
        let alloc = Allocation::empty(Scheme::Psma, vec![0; num_users], 1, 2);
        (alloc, channel, structure)
    }

    #[test]
    fn one_variable_is_a_scalar_argmax() {
        let (mut alloc, channel, structure) = single_cell_fixture(1);
        alloc.q[0][0] = true;
        alloc.p[0][0] = 1.0;
        let best = brute_force_power_oracle(&alloc, &channel, &structure, &[4.0], 501).unwrap();
        // Rate grows with power: the grid maximum sits at the budget.
        assert!((best.p[0][0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn two_variables_respect_the_budget() {
        let (mut alloc, channel, structure) = single_cell_fixture(2);
        alloc.q[0][0] = true;
        alloc.q[1][1] = true;
        alloc.p[0][0] = 0.5;
        alloc.p[1][1] = 0.5;
        let best = brute_force_power_oracle(&alloc, &channel, &structure, &[2.0], 200).unwrap();
        let total = best.p[0][0] + best.p[1][1];
        assert!(total <= 2.0 * (1.0 + 1e-12), "total {total}");
        // Orthogonal streams at healthy SNR: both entries get power.
        assert!(best.p[0][0] > 0.0 && best.p[1][1] > 0.0);
    }

    #[test]
    fn refuses_more_than_three_variables() {
        let (mut alloc, channel, structure) = single_cell_fixture(4);
        for m in 0..4 {
            alloc.q[m][m % 2] = true;
            alloc.p[m][m % 2] = 0.1;
        }
        match brute_force_power_oracle(&alloc, &channel, &structure, &[2.0], 50) {
            Err(Error::OracleRefusal(_)) => {}
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn direct_evaluator_matches_public_sum_rate() {
        let (mut alloc, channel, structure) = single_cell_fixture(3);
        alloc.q[0][0] = true;
        alloc.q[1][0] = true;
        alloc.q[2][1] = true;
        alloc.p[0][0] = 0.7;
        alloc.p[1][0] = 0.4;
        alloc.p[2][1] = 0.9;
        let eval = DirectEvaluator::new(&alloc, &channel, &structure);
        let p: Vec<f64> = alloc
            .active_entries()
            .iter()
            .map(|&(_, m, c)| alloc.p[m][c])
            .collect();
        let direct = eval.sum_rate(&p);
        let routed = sum_rate(&alloc, &channel, &structure).unwrap().sum_rate;
        assert!(
            (direct - routed).abs() < 1e-12,
            "direct {direct} vs routed {routed}"
        );
    }
}
