//! Exhaustive enumeration oracle for tiny assignment instances.

use super::{check_feasible, AssignmentCandidate};
use crate::error::{Error, Result};
use crate::phy::{sum_rate, Allocation};
use crate::scenario::{ChannelRealization, CodebookStructure, ScenarioConfig, Scheme};

/// Upper bound on the enumerated space.
const MAX_SPACE: u64 = 1_000_000;

/// Enumerate every binary assignment over the fixed candidate powers, filter
/// by feasibility, and return the best. The first maximizer in ascending
/// bit-mask order wins ties, so the result is deterministic.
///
/// Refuses instances whose assignment space exceeds 10^6 points.
pub fn exhaustive_assign_oracle(
    powers: &[Vec<f64>],
    user_cell: &[usize],
    num_cells: usize,
    channel: &ChannelRealization,
    structure: &CodebookStructure,
    config: &ScenarioConfig,
) -> Result<AssignmentCandidate> {
    let num_users = user_cell.len();
    let num_codebooks = structure.num_codebooks();
    let bits = num_users * num_codebooks;
    if bits >= 64 || (1u64 << bits) > MAX_SPACE {
        return Err(Error::OracleRefusal(format!(
            "assignment space 2^{bits} exceeds the enumeration cap of {MAX_SPACE}"
        )));
    }

    let mut best: Option<(f64, Allocation)> = None;
    let mut alloc = Allocation::empty(Scheme::Psma, user_cell.to_vec(), num_cells, num_codebooks);
    for mask in 0u64..(1u64 << bits) {
        for m in 0..num_users {
            for c in 0..num_codebooks {
                let on = mask >> (m * num_codebooks + c) & 1 == 1;
                alloc.q[m][c] = on;
                alloc.p[m][c] = if on { powers[m][c] } else { 0.0 };
            }
        }
        let report = check_feasible(&alloc, channel, structure, config);
        if !report.feasible {
            continue;
        }
        let value = sum_rate(&alloc, channel, structure)?.sum_rate;
        if best.as_ref().map_or(true, |(b, _)| value > *b) {
            best = Some((value, alloc.clone()));
        }
    }
    let (_, alloc) = best.expect("the empty assignment is always feasible");
    AssignmentCandidate::evaluate(alloc, channel, structure, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(num_users: usize, l_t: usize) -> ScenarioConfig {
        ScenarioConfig {
            num_bs: 1,
            num_users,
            num_subcarriers: 4,
            num_codebooks: 2,
            codebook_size: 2,
            macro_radius: 1000.0,
            small_radius: 20.0,
            path_loss_exponent: -2.0,
            p_max: vec![4.0],
            noise_power: 0.1,
            l_t,
            k: 4,
            scheme: Scheme::Psma,
            seed: 1,
            epsilon: 1e-4,
            upsilon: 1e-3,
            nu1: 0.1,
            nu2: 0.1,
        }
    }

    fn structure() -> CodebookStructure {
        CodebookStructure {
            rho: vec![
                vec![true, false],
                vec![true, false],
                vec![false, true],
                vec![false, true],
            ],
            eta: vec![
                vec![0.5, 0.0],
                vec![0.5, 0.0],
                vec![0.0, 0.5],
                vec![0.0, 0.5],
            ],
            codebook_subcarriers: vec![vec![0, 1], vec![2, 3]],
        }
    }

    #[test]
    fn one_user_two_codebooks_picks_the_best_subset() {
        let config = config(1, 1);
        let st = structure();
        let channel = ChannelRealization {
            gain: vec![vec![vec![3.0, 3.0, 0.4, 0.4]]],
            noise: vec![0.1],
        };
        // Budget admits both entries; taking both maximizes the rate, so the
        // oracle must return {00 -> both on}.
        let powers = vec![vec![1.5, 1.5]];
        let cand = exhaustive_assign_oracle(&powers, &[0], 1, &channel, &st, &config).unwrap();
        assert!(cand.alloc.q[0][0] && cand.alloc.q[0][1]);
        assert!(cand.feasible);
    }

    #[test]
    fn relabeling_symmetric_users_keeps_the_objective() {
        let config = config(2, 1);
        let st = structure();
        let channel = ChannelRealization {
            gain: vec![vec![vec![1.0, 1.2, 0.8, 0.9]; 2]],
            noise: vec![0.1, 0.1],
        };
        let powers = vec![vec![1.0, 1.0]; 2];
        let a = exhaustive_assign_oracle(&powers, &[0, 0], 1, &channel, &st, &config).unwrap();
        let b = exhaustive_assign_oracle(&powers, &[0, 0], 1, &channel, &st, &config).unwrap();
        assert_eq!(a.objective, b.objective);
        // Identical channels: swapping user labels cannot change the value.
        assert!((a.objective - b.objective).abs() == 0.0);
    }

    #[test]
    fn refuses_oversized_spaces() {
        let config = config(8, 2);
        let st = CodebookStructure::subcarrier_identity(4);
        let channel = ChannelRealization {
            gain: vec![vec![vec![1.0; 4]; 8]],
            noise: vec![0.1; 8],
        };
        let powers = vec![vec![0.1; 4]; 8];
        match exhaustive_assign_oracle(&powers, &[0; 8], 1, &channel, &st, &config) {
            Err(Error::OracleRefusal(_)) => {}
            other => panic!("expected refusal, got {other:?}"),
        }
    }
}
