//! Closed-form physical-layer math: codebook gains, per-scheme SINRs, rates,
//! SIC feasibility and receiver-complexity accounting.
//!
//! Everything is a pure function over immutable inputs; rates are in nats per
//! channel use throughout.

mod complexity;
mod sinr;

pub use complexity::{receiver_complexity, ComplexityParams};
pub use sinr::{
    avg_codebook_gain, detection_order, effective_codebook_gain, sic_feasible, sinr_cross,
    sinr_pdnoma, sinr_psma, sinr_scma, sum_rate, SicPairCheck, SinrReport,
};

use crate::scenario::Scheme;

/// One scheme's resource assignment: the binary codebook-assignment matrix
/// and the continuous power matrix.
///
/// For PD-NOMA the codebook axis is the subcarrier axis (the structure is the
/// subcarrier identity) and `q` plays the role of the per-subcarrier
/// assignment indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub scheme: Scheme,
    /// Serving cell of each user; `q[m][c]` may only be set for the pair
    /// (`user_cell[m]`, `m`).
    pub user_cell: Vec<usize>,
    pub num_cells: usize,
    /// `q[m][c]`: codebook `c` assigned to user `m` in its serving cell.
    pub q: Vec<Vec<bool>>,
    /// `p[m][c]`: transmit power in watts; meaningful only where assigned.
    pub p: Vec<Vec<f64>>,
}

impl Allocation {
    /// All-unassigned allocation with zero powers.
    pub fn empty(
        scheme: Scheme,
        user_cell: Vec<usize>,
        num_cells: usize,
        num_codebooks: usize,
    ) -> Self {
        let num_users = user_cell.len();
        Allocation {
            scheme,
            user_cell,
            num_cells,
            q: vec![vec![false; num_codebooks]; num_users],
            p: vec![vec![0.0; num_codebooks]; num_users],
        }
    }

    pub fn num_users(&self) -> usize {
        self.q.len()
    }

    pub fn num_codebooks(&self) -> usize {
        self.q.first().map_or(0, |row| row.len())
    }

    /// True when user `m` is served codebook `c` by cell `f`.
    pub fn active(&self, f: usize, m: usize, c: usize) -> bool {
        self.user_cell[m] == f && self.q[m][c]
    }

    /// Power of entry `(m, c)` masked by the assignment indicator.
    pub fn power(&self, m: usize, c: usize) -> f64 {
        if self.q[m][c] {
            self.p[m][c]
        } else {
            0.0
        }
    }

    /// Users of cell `f` assigned codebook `c`, ascending index.
    pub fn assigned_users(&self, f: usize, c: usize) -> Vec<usize> {
        (0..self.num_users())
            .filter(|&m| self.active(f, m, c))
            .collect()
    }

    /// Active `(cell, user, codebook)` triples in lexicographic order.
    pub fn active_entries(&self) -> Vec<(usize, usize, usize)> {
        let mut entries = Vec::new();
        for f in 0..self.num_cells {
            for m in 0..self.num_users() {
                if self.user_cell[m] != f {
                    continue;
                }
                for c in 0..self.num_codebooks() {
                    if self.q[m][c] {
                        entries.push((f, m, c));
                    }
                }
            }
        }
        entries
    }

    /// Total masked power spent by cell `f`.
    pub fn cell_power(&self, f: usize) -> f64 {
        (0..self.num_users())
            .filter(|&m| self.user_cell[m] == f)
            .map(|m| {
                (0..self.num_codebooks())
                    .map(|c| self.power(m, c))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Zero out powers on unassigned entries.
    pub fn mask_powers(&mut self) {
        for m in 0..self.num_users() {
            for c in 0..self.num_codebooks() {
                if !self.q[m][c] {
                    self.p[m][c] = 0.0;
                }
            }
        }
    }
}
