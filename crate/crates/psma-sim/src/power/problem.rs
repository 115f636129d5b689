//! Precomputed view of one power-allocation subproblem: the active entries
//! of a fixed assignment, their coupling lists and the SIC pair constraints.

use crate::error::{Error, Result};
use crate::phy::{detection_order, effective_codebook_gain, Allocation};
use crate::scenario::{ChannelRealization, CodebookStructure, ScenarioConfig};

/// Solver tunables; defaults mirror the scenario-level tolerances.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Stop threshold on the max-abs power change, relative to the largest
    /// cell budget.
    pub epsilon: f64,
    /// Base step size of the budget-multiplier updates.
    pub nu1: f64,
    /// Base step size of the SIC-multiplier updates.
    pub nu2: f64,
    pub max_dual_iters: usize,
    pub max_scale_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            epsilon: 1e-4,
            nu1: 0.1,
            nu2: 0.1,
            max_dual_iters: 500,
            max_scale_iters: 120,
        }
    }
}

impl SolverOptions {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        SolverOptions {
            epsilon: config.epsilon,
            nu1: config.nu1,
            nu2: config.nu2,
            ..SolverOptions::default()
        }
    }
}

/// One active `(cell, user, codebook)` entry.
#[derive(Debug, Clone)]
pub(crate) struct Entry {
    pub cell: usize,
    pub user: usize,
    pub codebook: usize,
    /// Effective own-channel gain of this stream at its receiver.
    pub eff_own: f64,
    pub noise: f64,
    /// Same-(cell, codebook) group this entry belongs to.
    pub group: usize,
    /// Position in the group's decode order (0 = decoded first).
    pub pos: usize,
    /// Co-channel entries in other cells: `(entry, gain_in, gain_out)` where
    /// `gain_in` scales their power as interference at this entry's receiver
    /// and `gain_out` scales this entry's power at their receiver.
    pub cochannel: Vec<(usize, f64, f64)>,
}

/// Users of one cell sharing one codebook, in decode order.
#[derive(Debug, Clone)]
pub(crate) struct Group {
    pub cell: usize,
    pub codebook: usize,
    pub entries: Vec<usize>,
}

/// One ordered SIC pair: `better` must decode `worse`'s stream.
#[derive(Debug, Clone)]
pub(crate) struct SicPair {
    pub cell: usize,
    pub codebook: usize,
    pub group: usize,
    pub worse_entry: usize,
    pub better_entry: usize,
    pub worse_pos: usize,
    /// Effective gains of the shared codebook at the worse / better receiver.
    pub eff_worse: f64,
    pub eff_better: f64,
    pub noise_worse: f64,
    pub noise_better: f64,
    /// Other-cell co-channel entries with their gains toward the worse and
    /// better receivers.
    pub cross: Vec<(usize, f64, f64)>,
}

/// Immutable problem view shared by the closed form, the dual loop and the
/// diagnostics.
pub struct PowerProblem {
    pub p_max: Vec<f64>,
    pub(crate) entries: Vec<Entry>,
    pub(crate) groups: Vec<Group>,
    pub(crate) pairs: Vec<SicPair>,
    /// Entry indices per cell.
    pub(crate) cell_entries: Vec<Vec<usize>>,
    /// Reverse map `(user, codebook) -> entry index`.
    entry_of: Vec<Vec<Option<usize>>>,
}

impl PowerProblem {
    /// Build the solver view of `alloc`'s assignment (powers are ignored).
    pub fn new(
        alloc: &Allocation,
        channel: &ChannelRealization,
        structure: &CodebookStructure,
        p_max: &[f64],
    ) -> Result<Self> {
        if p_max.len() != alloc.num_cells {
            return Err(Error::Domain(format!(
                "expected {} budget entries, got {}",
                alloc.num_cells,
                p_max.len()
            )));
        }
        let num_users = alloc.num_users();
        let num_codebooks = alloc.num_codebooks();
        let mut entries: Vec<Entry> = Vec::new();
        let mut groups: Vec<Group> = Vec::new();
        let mut entry_of = vec![vec![None; num_codebooks]; num_users];

        for f in 0..alloc.num_cells {
            for c in 0..num_codebooks {
                let order = detection_order(alloc, structure, channel, f, c);
                if order.is_empty() {
                    continue;
                }
                let group_idx = groups.len();
                let mut group_entries = Vec::with_capacity(order.len());
                for (pos, &m) in order.iter().enumerate() {
                    let idx = entries.len();
                    entry_of[m][c] = Some(idx);
                    entries.push(Entry {
                        cell: f,
                        user: m,
                        codebook: c,
                        eff_own: effective_codebook_gain(channel, structure, f, m, c),
                        noise: channel.noise[m],
                        group: group_idx,
                        pos,
                        cochannel: Vec::new(),
                    });
                    group_entries.push(idx);
                }
                groups.push(Group {
                    cell: f,
                    codebook: c,
                    entries: group_entries,
                });
            }
        }

        // Co-channel coupling across cells.
        for i in 0..entries.len() {
            let (cell_i, user_i, c) = (entries[i].cell, entries[i].user, entries[i].codebook);
            let mut list = Vec::new();
            for (j, other) in entries.iter().enumerate() {
                if other.codebook != c || other.cell == cell_i {
                    continue;
                }
                let gain_in = effective_codebook_gain(channel, structure, other.cell, user_i, c);
                let gain_out = effective_codebook_gain(channel, structure, cell_i, other.user, c);
                list.push((j, gain_in, gain_out));
            }
            entries[i].cochannel = list;
        }

        // Ordered SIC pairs within each group.
        let mut pairs = Vec::new();
        for (g, group) in groups.iter().enumerate() {
            for wi in 0..group.entries.len() {
                for bi in wi + 1..group.entries.len() {
                    let worse_entry = group.entries[wi];
                    let better_entry = group.entries[bi];
                    let worse = &entries[worse_entry];
                    let better = &entries[better_entry];
                    let cross = entries
                        .iter()
                        .enumerate()
                        .filter(|(_, e)| e.codebook == group.codebook && e.cell != group.cell)
                        .map(|(j, e)| {
                            let toward_worse = effective_codebook_gain(
                                channel,
                                structure,
                                e.cell,
                                worse.user,
                                group.codebook,
                            );
                            let toward_better = effective_codebook_gain(
                                channel,
                                structure,
                                e.cell,
                                better.user,
                                group.codebook,
                            );
                            (j, toward_worse, toward_better)
                        })
                        .collect();
                    pairs.push(SicPair {
                        cell: group.cell,
                        codebook: group.codebook,
                        group: g,
                        worse_entry,
                        better_entry,
                        worse_pos: wi,
                        eff_worse: worse.eff_own,
                        eff_better: better.eff_own,
                        noise_worse: worse.noise,
                        noise_better: better.noise,
                        cross,
                    });
                }
            }
        }

        let mut cell_entries = vec![Vec::new(); alloc.num_cells];
        for (i, e) in entries.iter().enumerate() {
            cell_entries[e.cell].push(i);
        }

        Ok(PowerProblem {
            p_max: p_max.to_vec(),
            entries,
            groups,
            pairs,
            cell_entries,
            entry_of,
        })
    }

    pub fn num_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cell_entries.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn entry_index(&self, user: usize, codebook: usize) -> Option<usize> {
        self.entry_of[user][codebook]
    }

    pub fn entry_key(&self, idx: usize) -> (usize, usize, usize) {
        let e = &self.entries[idx];
        (e.cell, e.user, e.codebook)
    }

    /// Largest budget, the scale for convergence thresholds.
    pub fn p_ref(&self) -> f64 {
        self.p_max
            .iter()
            .cloned()
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE)
    }

    /// Denominator (noise + interference) of every entry's SINR at `p`.
    pub(crate) fn denominators(&self, p: &[f64]) -> Vec<f64> {
        let mut den = vec![0.0; self.entries.len()];
        for (i, e) in self.entries.iter().enumerate() {
            let mut acc = e.noise;
            for &(j, gain_in, _) in &e.cochannel {
                acc += p[j] * gain_in;
            }
            let group = &self.groups[e.group];
            let later: f64 = group.entries[e.pos + 1..].iter().map(|&j| p[j]).sum();
            acc += e.eff_own * later;
            den[i] = acc;
        }
        den
    }

    /// Per-entry SINRs at `p`.
    pub fn sinrs(&self, p: &[f64]) -> Vec<f64> {
        let den = self.denominators(p);
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| p[i] * e.eff_own / den[i])
            .collect()
    }

    /// True sum rate at `p`, in nats.
    pub fn true_sum_rate(&self, p: &[f64]) -> f64 {
        self.sinrs(p).iter().map(|&g| (1.0 + g).ln()).sum()
    }

    /// Surrogate objective at `p` for the given coefficients; entries with
    /// zero power are skipped (their surrogate weight is zero at the fixed
    /// point that produced them).
    pub fn surrogate(&self, p: &[f64], xi: &[f64], psi: &[f64]) -> f64 {
        let den = self.denominators(p);
        let mut acc = 0.0;
        for (i, e) in self.entries.iter().enumerate() {
            if p[i] > 0.0 && xi[i] > 0.0 {
                acc += xi[i] * (p[i] * e.eff_own / den[i]).ln();
            }
            acc += psi[i];
        }
        acc
    }

    /// Budget slack per cell at `p` (positive means unused power).
    pub fn budget_slack(&self, p: &[f64]) -> Vec<f64> {
        (0..self.num_cells())
            .map(|f| self.p_max[f] - self.cell_entries[f].iter().map(|&i| p[i]).sum::<f64>())
            .collect()
    }

    /// Worst (most positive) budget violation relative to its budget.
    pub fn budget_violation(&self, p: &[f64]) -> f64 {
        self.budget_slack(p)
            .iter()
            .enumerate()
            .map(|(f, s)| {
                if self.p_max[f] > 0.0 {
                    (-s).max(0.0) / self.p_max[f]
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    /// Exact decode-order residual of pair `k` at `p`; the constraint is
    /// satisfied when the value is <= 0.
    ///
    /// The same-cell superposition terms cancel between the two receivers,
    /// leaving a form that is linear in the other-cell co-channel powers.
    pub(crate) fn pair_exact_residual(&self, k: usize, p: &[f64]) -> f64 {
        let pair = &self.pairs[k];
        let mut toward_worse = pair.noise_worse; // interference + noise at worse
        let mut toward_better = pair.noise_better;
        for &(j, g_worse, g_better) in &pair.cross {
            toward_worse += p[j] * g_worse;
            toward_better += p[j] * g_better;
        }
        pair.eff_worse * toward_better - pair.eff_better * toward_worse
    }

    /// Worst (most positive) pair residual at `p`, normalized per pair by its
    /// own magnitude scale; zero when no pairs exist.
    pub fn max_sic_residual(&self, p: &[f64]) -> f64 {
        (0..self.pairs.len())
            .map(|k| {
                let raw = self.pair_exact_residual(k, p);
                raw / self.pair_scale(k, p)
            })
            .fold(0.0, f64::max)
    }

    /// Total log-power gradient magnitude of pair `k`'s linearized residual
    /// at `p`; the scale against which its multiplier moves prices.
    pub fn pair_sensitivity(&self, k: usize, p: &[f64]) -> f64 {
        let pair = &self.pairs[k];
        let mut acc = 0.0;
        for &(j, g_worse, g_better) in &pair.cross {
            acc += (pair.eff_worse * g_better + pair.eff_better * g_worse) * p[j];
        }
        let group = &self.groups[pair.group];
        for &j in &group.entries[pair.worse_pos + 1..] {
            acc += 2.0 * pair.eff_worse * pair.eff_better * p[j];
        }
        acc
    }

    /// Positive magnitude scale of pair `k`'s residual at `p`.
    pub(crate) fn pair_scale(&self, k: usize, p: &[f64]) -> f64 {
        let pair = &self.pairs[k];
        let mut toward_worse = pair.noise_worse;
        let mut toward_better = pair.noise_better;
        for &(j, g_worse, g_better) in &pair.cross {
            toward_worse += p[j] * g_worse;
            toward_better += p[j] * g_better;
        }
        (pair.eff_worse * toward_better + pair.eff_better * toward_worse).max(f64::MIN_POSITIVE)
    }

    /// DC residual of pair `k`: the convex (other-receiver) side keeps exact
    /// exponentials while the concave side is linearized around `anchor`.
    /// At `p == anchor` this equals the exact residual.
    pub(crate) fn pair_dc_residual(&self, k: usize, p: &[f64], anchor: &[f64]) -> f64 {
        let pair = &self.pairs[k];
        let lin = |j: usize| -> f64 {
            // First-order expansion of exp at the anchor's log-power; silent
            // entries contribute nothing.
            if anchor[j] > 0.0 {
                anchor[j] * (1.0 + (p[j] / anchor[j]).ln())
            } else {
                0.0
            }
        };
        let group = &self.groups[pair.group];
        let superposed_exact: f64 = group.entries[pair.worse_pos + 1..]
            .iter()
            .map(|&j| p[j])
            .sum();
        let superposed_lin: f64 = group.entries[pair.worse_pos + 1..]
            .iter()
            .map(|&j| lin(j))
            .sum();
        let mut toward_better_exact = pair.noise_better;
        let mut toward_worse_lin = pair.noise_worse;
        for &(j, g_worse, g_better) in &pair.cross {
            toward_better_exact += p[j] * g_better;
            toward_worse_lin += lin(j) * g_worse;
        }
        pair.eff_worse * (toward_better_exact + superposed_exact * pair.eff_better)
            - pair.eff_better * (toward_worse_lin + superposed_lin * pair.eff_worse)
    }
}
