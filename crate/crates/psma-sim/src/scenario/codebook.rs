//! Subcarrier-to-codebook structure: the sparse mapping `rho` and the
//! per-subcarrier power fractions `eta`.

use super::config::{binomial, ScenarioConfig};
use crate::error::{Error, Result};

/// How to fill the power fractions on a codebook's support.
#[derive(Debug, Clone, PartialEq)]
pub enum EtaPolicy {
    /// Every supported subcarrier carries `1/codebook_size` of the stream
    /// power.
    UniformEta,
    /// Caller-provided fractions per codebook, each summing to one over the
    /// codebook's support.
    Custom(Vec<Vec<f64>>),
}

/// Subcarrier membership and power split of every codebook.
#[derive(Debug, Clone)]
pub struct CodebookStructure {
    /// `rho[n][c]`: true when codebook `c` contains subcarrier `n`.
    pub rho: Vec<Vec<bool>>,
    /// `eta[n][c]`: share of a stream's power radiated on subcarrier `n`;
    /// zero off support, sums to one over each codebook's support.
    pub eta: Vec<Vec<f64>>,
    /// Support of each codebook, ascending subcarrier indices.
    pub codebook_subcarriers: Vec<Vec<usize>>,
}

impl CodebookStructure {
    pub fn num_codebooks(&self) -> usize {
        self.codebook_subcarriers.len()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.rho.len()
    }

    /// Degenerate structure that identifies codebooks with bare subcarriers:
    /// `n` singleton codebooks carrying their full stream power. This is the
    /// resource axis used by the PD-NOMA baseline.
    pub fn subcarrier_identity(num_subcarriers: usize) -> Self {
        let mut rho = vec![vec![false; num_subcarriers]; num_subcarriers];
        let mut eta = vec![vec![0.0; num_subcarriers]; num_subcarriers];
        let mut support = Vec::with_capacity(num_subcarriers);
        for n in 0..num_subcarriers {
            rho[n][n] = true;
            eta[n][n] = 1.0;
            support.push(vec![n]);
        }
        CodebookStructure {
            rho,
            eta,
            codebook_subcarriers: support,
        }
    }

    /// True when every codebook splits power equally over its support.
    pub fn is_uniform_eta(&self) -> bool {
        self.codebook_subcarriers
            .iter()
            .enumerate()
            .all(|(c, subs)| {
                let share = 1.0 / subs.len() as f64;
                subs.iter()
                    .all(|&n| (self.eta[n][c] - share).abs() <= 1e-15)
            })
    }

    /// How many codebooks contain subcarrier `n`.
    pub fn subcarrier_membership(&self, n: usize) -> usize {
        (0..self.num_codebooks())
            .filter(|&c| self.rho[n][c])
            .count()
    }

    fn check(&self) -> Result<()> {
        for (c, subs) in self.codebook_subcarriers.iter().enumerate() {
            let mut eta_sum = 0.0;
            for n in 0..self.num_subcarriers() {
                if self.rho[n][c] != subs.contains(&n) {
                    return Err(Error::Domain(format!(
                        "rho/support mismatch at subcarrier {n}, codebook {c}"
                    )));
                }
                if self.rho[n][c] {
                    if !(self.eta[n][c] > 0.0) {
                        return Err(Error::Domain(format!(
                            "eta must be positive on support (subcarrier {n}, codebook {c})"
                        )));
                    }
                    eta_sum += self.eta[n][c];
                } else if self.eta[n][c] != 0.0 {
                    return Err(Error::Domain(format!(
                        "eta must be zero off support (subcarrier {n}, codebook {c})"
                    )));
                }
            }
            if (eta_sum - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!(
                    "eta fractions of codebook {c} sum to {eta_sum}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// Next `u`-subset of `0..n` after `subset` in lexicographic order.
fn next_subset(subset: &mut [usize], n: usize) -> bool {
    let u = subset.len();
    let mut i = u;
    while i > 0 {
        i -= 1;
        if subset[i] < n - (u - i) {
            subset[i] += 1;
            for j in i + 1..u {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Select the codebook supports and power fractions.
///
/// Supports are chosen greedily: among all unused subsets, take the one whose
/// subcarriers currently appear in the fewest codebooks (total load, then max
/// load, then lexicographic order). With `num_codebooks * codebook_size`
/// divisible by `num_subcarriers` this yields per-subcarrier membership
/// counts that differ by at most one.
pub fn build_codebook_structure(
    config: &ScenarioConfig,
    policy: EtaPolicy,
) -> Result<CodebookStructure> {
    let n = config.num_subcarriers;
    let u = config.codebook_size;
    let c_total = binomial(n, u);
    if config.num_codebooks as u64 > c_total {
        return Err(Error::Infeasible(format!(
            "{} codebooks requested but only {} distinct supports of size {} exist over {} subcarriers",
            config.num_codebooks, c_total, u, n
        )));
    }

    // All candidate supports in lexicographic order.
    let mut candidates = Vec::new();
    let mut subset: Vec<usize> = (0..u).collect();
    loop {
        candidates.push(subset.clone());
        if !next_subset(&mut subset, n) {
            break;
        }
    }

    let mut used = vec![false; candidates.len()];
    let mut load = vec![0usize; n];
    let mut supports = Vec::with_capacity(config.num_codebooks);
    for _ in 0..config.num_codebooks {
        let mut best: Option<(usize, usize, usize)> = None; // (total, max, idx)
        for (idx, cand) in candidates.iter().enumerate() {
            if used[idx] {
                continue;
            }
            let total: usize = cand.iter().map(|&s| load[s]).sum();
            let max: usize = cand.iter().map(|&s| load[s]).max().unwrap_or(0);
            let key = (total, max, idx);
            if best.map_or(true, |b| key < b) {
                best = Some(key);
            }
        }
        let (_, _, idx) = best.expect("candidate pool cannot be exhausted");
        used[idx] = true;
        for &s in &candidates[idx] {
            load[s] += 1;
        }
        supports.push(candidates[idx].clone());
    }

    let mut rho = vec![vec![false; config.num_codebooks]; n];
    let mut eta = vec![vec![0.0; config.num_codebooks]; n];
    for (c, subs) in supports.iter().enumerate() {
        for &s in subs {
            rho[s][c] = true;
        }
        match &policy {
            EtaPolicy::UniformEta => {
                for &s in subs {
                    eta[s][c] = 1.0 / u as f64;
                }
            }
            EtaPolicy::Custom(fractions) => {
                let row = fractions.get(c).ok_or_else(|| {
                    Error::Domain(format!("custom eta missing row for codebook {c}"))
                })?;
                if row.len() != n {
                    return Err(Error::Domain(format!(
                        "custom eta row {c} has {} entries, expected {n}",
                        row.len()
                    )));
                }
                for s in 0..n {
                    eta[s][c] = row[s];
                }
            }
        }
    }

    let structure = CodebookStructure {
        rho,
        eta,
        codebook_subcarriers: supports,
    };
    structure.check()?;
    Ok(structure)
}
