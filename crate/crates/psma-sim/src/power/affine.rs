//! Affine form of the SIC decode-order constraints in log-power space.
//!
//! After the same-cell superposition terms cancel, each ordered pair's exact
//! decode condition is linear in the other-cell co-channel powers. Replacing
//! each exponentiated log-power with its first-order expansion around an
//! anchor yields an affine inequality that matches the exact residual at the
//! anchor and deviates quadratically away from it.

use super::problem::PowerProblem;
use crate::error::{Error, Result};
use crate::phy::Allocation;
use crate::scenario::{ChannelRealization, CodebookStructure};

/// One power variable's contribution to an affine constraint.
#[derive(Debug, Clone)]
pub struct AffineTerm {
    pub cell: usize,
    pub user: usize,
    pub codebook: usize,
    /// Coefficient of the natural power in the exact (linear-in-power) form.
    pub coeff: f64,
    /// Anchor power this term was expanded around.
    pub anchor_power: f64,
}

/// Affine inequality `value <= 0` for one ordered decode pair.
#[derive(Debug, Clone)]
pub struct AffineSicConstraint {
    pub cell: usize,
    pub codebook: usize,
    /// User whose stream must be decoded by `better`.
    pub worse: usize,
    pub better: usize,
    /// Power-independent part (noise terms weighted by the two receivers'
    /// codebook gains).
    pub constant: f64,
    pub terms: Vec<AffineTerm>,
    /// Exact residual at the anchor; the affine form reproduces it there.
    pub value_at_anchor: f64,
}

impl AffineSicConstraint {
    /// Affine value at the given powers (log-space expansion around the
    /// anchor).
    pub fn eval_affine(&self, power: impl Fn(usize, usize, usize) -> f64) -> f64 {
        let mut acc = self.constant;
        for t in &self.terms {
            let p = power(t.cell, t.user, t.codebook);
            acc += t.coeff * t.anchor_power * (1.0 + (p / t.anchor_power).ln());
        }
        acc
    }

    /// Exact residual at the given powers.
    pub fn eval_exact(&self, power: impl Fn(usize, usize, usize) -> f64) -> f64 {
        let mut acc = self.constant;
        for t in &self.terms {
            acc += t.coeff * power(t.cell, t.user, t.codebook);
        }
        acc
    }
}

/// Build one affine decode-order inequality per ordered same-codebook pair,
/// expanded around the anchor allocation's powers.
///
/// Every active entry must carry a strictly positive anchor power, since the
/// expansion lives in log-power space.
pub fn linearize_sic_constraint(
    anchor: &Allocation,
    channel: &ChannelRealization,
    structure: &CodebookStructure,
) -> Result<Vec<AffineSicConstraint>> {
    for (f, m, c) in anchor.active_entries() {
        if !(anchor.p[m][c] > 0.0) {
            return Err(Error::Domain(format!(
                "anchor power must be strictly positive on active entries \
                 (cell {f}, user {m}, codebook {c})"
            )));
        }
    }
    let zero_budgets = vec![0.0; anchor.num_cells];
    let problem = PowerProblem::new(anchor, channel, structure, &zero_budgets)?;
    let anchor_powers: Vec<f64> = (0..problem.num_entries())
        .map(|i| {
            let (_, m, c) = problem.entry_key(i);
            anchor.p[m][c]
        })
        .collect();

    let mut constraints = Vec::with_capacity(problem.num_pairs());
    for (k, pair) in problem.pairs.iter().enumerate() {
        let constant = pair.eff_worse * pair.noise_better - pair.eff_better * pair.noise_worse;
        let terms: Vec<AffineTerm> = pair
            .cross
            .iter()
            .map(|&(j, g_worse, g_better)| {
                let (cell, user, codebook) = problem.entry_key(j);
                AffineTerm {
                    cell,
                    user,
                    codebook,
                    coeff: pair.eff_worse * g_better - pair.eff_better * g_worse,
                    anchor_power: anchor_powers[j],
                }
            })
            .collect();
        let value_at_anchor = problem.pair_exact_residual(k, &anchor_powers);
        let (_, worse_user, _) = problem.entry_key(pair.worse_entry);
        let (_, better_user, _) = problem.entry_key(pair.better_entry);
        constraints.push(AffineSicConstraint {
            cell: pair.cell,
            codebook: pair.codebook,
            worse: worse_user,
            better: better_user,
            constant,
            terms,
            value_at_anchor,
        });
    }
    Ok(constraints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scheme;

    /// Two cells, two users each, all four users on one pair codebook.
    fn two_cell_fixture() -> (Allocation, ChannelRealization, CodebookStructure) {
        let gain = vec![
            vec![
                vec![1.2, 0.8],
                vec![2.5, 1.9],
                vec![0.15, 0.31],
                vec![0.22, 0.11],
            ],
            vec![
                vec![0.31, 0.09],
                vec![0.27, 0.4],
                vec![1.8, 2.2],
                vec![3.1, 2.4],
            ],
        ];
        let channel = ChannelRealization {
            gain,
            noise: vec![0.05, 0.04, 0.06, 0.03],
        };
        let structure = CodebookStructure {
            rho: vec![vec![true], vec![true]],
            eta: vec![vec![0.5], vec![0.5]],
            codebook_subcarriers: vec![vec![0, 1]],
        };
        let mut alloc = Allocation::empty(Scheme::Psma, vec![0, 0, 1, 1], 2, 1);
        for m in 0..4 {
            alloc.q[m][0] = true;
            alloc.p[m][0] = 0.5 + 0.25 * m as f64;
        }
        (alloc, channel, structure)
    }

    #[test]
    fn affine_equals_exact_at_anchor() {
        let (alloc, channel, structure) = two_cell_fixture();
        let constraints = linearize_sic_constraint(&alloc, &channel, &structure).unwrap();
        assert_eq!(constraints.len(), 2); // one ordered pair per cell
        let at = |_f: usize, m: usize, c: usize| alloc.p[m][c];
        for con in &constraints {
            let affine = con.eval_affine(at);
            let exact = con.eval_exact(at);
            assert!((affine - exact).abs() < 1e-9, "{affine} vs {exact}");
            assert!((affine - con.value_at_anchor).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_eta_anchor_is_feasible() {
        let (alloc, channel, structure) = two_cell_fixture();
        let constraints = linearize_sic_constraint(&alloc, &channel, &structure).unwrap();
        for con in &constraints {
            assert!(
                con.value_at_anchor <= 0.0,
                "uniform power split must satisfy the decode order: {con:?}"
            );
        }
    }

    #[test]
    fn affine_error_decays_quadratically() {
        let (alloc, channel, structure) = two_cell_fixture();
        let constraints = linearize_sic_constraint(&alloc, &channel, &structure).unwrap();
        let con = &constraints[0];
        // Random-ish fixed perturbation direction in log space.
        let direction = [0.31f64, -0.47, 0.22, 0.11];
        let mut errors = Vec::new();
        for &h in &[0.1, 0.05, 0.025] {
            let perturbed =
                |_f: usize, m: usize, c: usize| alloc.p[m][c] * (h * direction[m]).exp();
            let err = (con.eval_affine(perturbed) - con.eval_exact(perturbed)).abs();
            errors.push(err);
        }
        // Halving the step should cut the mismatch roughly fourfold.
        assert!(errors[1] < errors[0] / 2.5, "{errors:?}");
        assert!(errors[2] < errors[1] / 2.5, "{errors:?}");
    }

    #[test]
    fn zero_anchor_power_is_rejected() {
        let (mut alloc, channel, structure) = two_cell_fixture();
        alloc.p[1][0] = 0.0;
        assert!(linearize_sic_constraint(&alloc, &channel, &structure).is_err());
    }
}
