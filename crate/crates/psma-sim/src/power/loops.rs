//! Dual subgradient loop and the outer surrogate re-anchoring loop.

use super::closed_form::closed_form_fixed_point;
use super::problem::{PowerProblem, SolverOptions};
use super::{scale_coeffs, DualState, PowerIterTrace, ScaleCoeffs};
use crate::error::{Error, Result};

/// One multiplier update against an explicit expansion point: budget prices
/// move against their slack, SIC prices against the linearized residual,
/// both projected onto the nonnegative orthant.
fn subgradient_step_anchored(
    dual: &DualState,
    problem: &PowerProblem,
    p: &[f64],
    dc_anchor: &[f64],
) -> DualState {
    let slack = problem.budget_slack(p);
    let delta = dual
        .delta
        .iter()
        .zip(&slack)
        .zip(&dual.nu1)
        .map(|((&d, &s), &nu)| (d - nu * s).max(0.0))
        .collect();
    let beta = dual
        .beta
        .iter()
        .enumerate()
        .zip(&dual.nu2)
        .map(|((k, &b), &nu)| (b + nu * problem.pair_dc_residual(k, p, dc_anchor)).max(0.0))
        .collect();
    DualState {
        delta,
        beta,
        nu1: dual.nu1.clone(),
        nu2: dual.nu2.clone(),
        iter: dual.iter + 1,
    }
}

/// One multiplier update at the current iterate, where the linearized
/// decode-order residual coincides with the exact one.
pub fn subgradient_step(dual: &DualState, problem: &PowerProblem, p: &[f64]) -> DualState {
    subgradient_step_anchored(dual, problem, p, p)
}

/// Result of one inner dual solve.
pub struct InnerSolve {
    pub powers: Vec<f64>,
    pub dual: DualState,
    pub converged: bool,
    pub iterations: usize,
}

/// Scale for the per-cell budget steps: moves `delta` by a fraction of its
/// own equilibrium scale per unit of relative slack.
fn budget_step_scales(problem: &PowerProblem, scale: &ScaleCoeffs) -> Vec<f64> {
    (0..problem.num_cells())
        .map(|f| {
            if problem.p_max[f] <= 0.0 {
                return 0.0;
            }
            let xi_sum: f64 = problem.cell_entries[f].iter().map(|&i| scale.xi[i]).sum();
            let delta0 = (xi_sum / problem.p_max[f]).max(f64::MIN_POSITIVE);
            delta0 / problem.p_max[f]
        })
        .collect()
}

/// Scale for the per-pair SIC steps, derived from the pair's own residual
/// magnitude and gradient magnitude at the starting point so that a unit
/// residual moves the price by an O(1) fraction of its useful range.
fn sic_step_scales(problem: &PowerProblem, p0: &[f64]) -> Vec<f64> {
    (0..problem.num_pairs())
        .map(|k| {
            let grad_scale = problem.pair_sensitivity(k, p0);
            let residual_scale = problem.pair_scale(k, p0);
            if grad_scale <= 0.0 {
                return 0.0;
            }
            1.0 / (grad_scale * residual_scale).max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// Initial budget prices: the equal-split equilibrium value, which makes the
/// very first closed-form sweep budget-tight for uncoupled entries.
fn initial_dual(problem: &PowerProblem, scale: &ScaleCoeffs) -> DualState {
    let delta = (0..problem.num_cells())
        .map(|f| {
            if problem.p_max[f] <= 0.0 {
                return f64::INFINITY;
            }
            let xi_sum: f64 = problem.cell_entries[f].iter().map(|&i| scale.xi[i]).sum();
            (xi_sum / problem.p_max[f]).max(f64::MIN_POSITIVE)
        })
        .collect();
    DualState {
        delta,
        beta: vec![0.0; problem.num_pairs()],
        nu1: vec![0.0; problem.num_cells()],
        nu2: vec![0.0; problem.num_pairs()],
        iter: 0,
    }
}

/// Bisect each cell's budget price onto budget-tightness at the stationary
/// powers, coordinating cells for a few rounds; the subgradient loop then
/// only has to track the coupling drift instead of walking the whole way at
/// its diminishing schedule.
fn tighten_budget_prices(
    problem: &PowerProblem,
    scale: &ScaleCoeffs,
    dual: &DualState,
    p_seed: &[f64],
    dc_anchor: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut delta = dual.delta.clone();
    let mut p = p_seed.to_vec();
    let mut probe = dual.clone();
    for _ in 0..3 {
        for f in 0..problem.num_cells() {
            if problem.p_max[f] <= 0.0 || problem.cell_entries[f].is_empty() {
                continue;
            }
            let reference = delta[f].max(f64::MIN_POSITIVE);
            let mut total_at = |df: f64, p_warm: &[f64]| -> Result<(f64, Vec<f64>)> {
                probe.delta = delta.clone();
                probe.delta[f] = df;
                let p_fp = closed_form_fixed_point(
                    scale, &probe, problem, p_warm, dc_anchor, 1e-10, 2000,
                )?;
                let total = problem.cell_entries[f].iter().map(|&i| p_fp[i]).sum();
                Ok((total, p_fp))
            };
            let mut lo = reference * 1e-6;
            let mut hi = reference * 1e6;
            let (total_lo, p_lo) = total_at(lo, &p)?;
            if total_lo <= problem.p_max[f] {
                // Interior optimum: coupling already bounds the cell below
                // its budget at a vanishing price.
                delta[f] = lo;
                p = p_lo;
                continue;
            }
            let (total_hi, p_hi) = total_at(hi, &p)?;
            if total_hi > problem.p_max[f] {
                delta[f] = hi;
                p = p_hi;
                continue;
            }
            for _ in 0..60 {
                let mid = (lo * hi).sqrt();
                let (total, p_mid) = total_at(mid, &p)?;
                if total > problem.p_max[f] {
                    lo = mid;
                } else {
                    hi = mid;
                }
                p = p_mid;
                if (hi - lo) <= 1e-9 * hi {
                    break;
                }
            }
            delta[f] = hi;
        }
    }
    probe.delta = delta.clone();
    let p_final = closed_form_fixed_point(scale, &probe, problem, &p, dc_anchor, 1e-10, 2000)?;
    Ok((delta, p_final))
}

/// Scale powers of each cell down onto its budget when the dual loop left a
/// residual violation; dual methods only satisfy the budget in the limit.
fn project_onto_budget(problem: &PowerProblem, p: &mut [f64]) {
    for f in 0..problem.num_cells() {
        let total: f64 = problem.cell_entries[f].iter().map(|&i| p[i]).sum();
        if total > problem.p_max[f] {
            let factor = if total > 0.0 {
                problem.p_max[f] / total
            } else {
                0.0
            };
            for &i in &problem.cell_entries[f] {
                p[i] *= factor;
            }
        }
    }
}

/// Find a stationary point of the surrogate problem at fixed coefficients by
/// alternating the closed-form power sweep with subgradient multiplier
/// updates until the iterate settles.
pub fn solve_power_inner(
    problem: &PowerProblem,
    p0: &[f64],
    scale: &ScaleCoeffs,
    opts: &SolverOptions,
    trace: &mut PowerIterTrace,
) -> Result<InnerSolve> {
    let n = problem.num_entries();
    if n == 0 {
        return Ok(InnerSolve {
            powers: Vec::new(),
            dual: initial_dual(problem, scale),
            converged: true,
            iterations: 0,
        });
    }
    for (i, &p) in p0.iter().enumerate() {
        let cell = problem.entries[i].cell;
        if problem.p_max[cell] > 0.0 && !(p > 0.0) {
            let (f, m, c) = problem.entry_key(i);
            return Err(Error::Domain(format!(
                "initial power must be strictly positive on active entries \
                 (cell {f}, user {m}, codebook {c})"
            )));
        }
    }
    // Degenerate budgets force their cells silent.
    let live: Vec<bool> = problem
        .entries
        .iter()
        .map(|e| problem.p_max[e.cell] > 0.0)
        .collect();
    if !live.iter().any(|&l| l) {
        return Ok(InnerSolve {
            powers: vec![0.0; n],
            dual: initial_dual(problem, scale),
            converged: true,
            iterations: 0,
        });
    }

    let budget_scales = budget_step_scales(problem, scale);
    let sic_scales = sic_step_scales(problem, p0);
    let mut dual = initial_dual(problem, scale);
    let mut p: Vec<f64> = p0
        .iter()
        .zip(&live)
        .map(|(&x, &l)| if l { x } else { 0.0 })
        .collect();
    let (delta, p_tight) = tighten_budget_prices(problem, scale, &dual, &p, p0)?;
    dual.delta = delta;
    for (current, (&tight, &l)) in p.iter_mut().zip(p_tight.iter().zip(&live)) {
        *current = if l { tight } else { 0.0 };
    }
    let threshold = opts.epsilon * problem.p_ref();
    let mut converged = false;
    let mut iterations = 0;

    // Dual iterates are not monotone in the true objective and may end below
    // the warm start; keep the best budget-projected iterate seen, starting
    // with the warm start itself.
    let mut best = {
        let mut start = p.clone();
        project_onto_budget(problem, &mut start);
        let rate = problem.true_sum_rate(&start);
        (rate, start)
    };

    for u in 1..=opts.max_dual_iters {
        iterations = u;
        let damping = 1.0 / (u as f64).sqrt();
        dual.nu1 = budget_scales
            .iter()
            .map(|s| opts.nu1 * s * damping)
            .collect();
        dual.nu2 = sic_scales.iter().map(|s| opts.nu2 * s * damping).collect();

        let mut p_new = closed_form_fixed_point(scale, &dual, problem, &p, p0, 1e-9, 1000)?;
        for (i, &l) in live.iter().enumerate() {
            if !l {
                p_new[i] = 0.0;
            }
        }
        dual = subgradient_step_anchored(&dual, problem, &p_new, p0);

        let step = p
            .iter()
            .zip(&p_new)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        p = p_new;

        let mut projected = p.clone();
        project_onto_budget(problem, &mut projected);
        let rate = problem.true_sum_rate(&projected);
        if rate > best.0 {
            best = (rate, projected);
        }

        trace
            .surrogate
            .push(problem.surrogate(&p, &scale.xi, &scale.psi));
        trace.true_rate.push(rate);
        trace.budget_residual.push(problem.budget_violation(&p));
        trace.sic_residual.push(problem.max_sic_residual(&p));
        trace.step_norm.push(step);

        if step <= threshold {
            converged = true;
            break;
        }
    }

    Ok(InnerSolve {
        powers: best.1,
        dual,
        converged,
        iterations,
    })
}

/// Result of a full surrogate-loop power solve.
pub struct PowerSolve {
    pub powers: Vec<f64>,
    pub trace: PowerIterTrace,
    pub converged: bool,
    /// Smallest multiplier seen in the final dual state.
    pub min_multiplier: f64,
    pub outer_iterations: usize,
}

/// Solve the power subproblem by re-anchoring the surrogate at each achieved
/// SINR profile until the iterate stops moving.
///
/// The first round runs with the loose `xi = 1, psi = 0` coefficients; each
/// later round anchors at the previous round's SINRs, which makes the bound
/// tight there and the accepted true-rate trace non-decreasing. A round that
/// fails to improve is discarded and the incumbent returned.
pub fn solve_power_scale(
    problem: &PowerProblem,
    p0: &[f64],
    opts: &SolverOptions,
) -> Result<PowerSolve> {
    let n = problem.num_entries();
    let mut trace = PowerIterTrace::default();
    if n == 0 || problem.p_max.iter().all(|&b| b <= 0.0) {
        trace.outer_rates.push(0.0);
        return Ok(PowerSolve {
            powers: vec![0.0; n],
            trace,
            converged: true,
            min_multiplier: 0.0,
            outer_iterations: 0,
        });
    }

    let mut scale = ScaleCoeffs::ones(n);
    let mut current = p0.to_vec();
    let mut best = current.clone();
    let mut best_rate = problem.true_sum_rate(&best);
    let mut min_multiplier = f64::INFINITY;
    let threshold = opts.epsilon * problem.p_ref();
    let mut converged = false;
    let mut outer_iterations = 0;

    for round in 0..opts.max_scale_iters {
        outer_iterations += 1;
        let inner = solve_power_inner(problem, &current, &scale, opts, &mut trace)?;
        min_multiplier = min_multiplier.min(inner.dual.min_multiplier());
        let rate = problem.true_sum_rate(&inner.powers);
        let step = current
            .iter()
            .zip(&inner.powers)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);

        if rate > best_rate {
            best_rate = rate;
            best = inner.powers.clone();
            current = inner.powers;
            trace.outer_rates.push(best_rate);
            if step <= threshold {
                converged = true;
                break;
            }
        } else if round == 0 {
            // The mandated loose first round can wander away from a good
            // warm start; fall back to it and anchor there.
            current = best.clone();
            trace.outer_rates.push(best_rate);
        } else {
            // An anchored round that fails to ascend is a stall: keep the
            // incumbent.
            trace.outer_rates.push(best_rate);
            converged = true;
            break;
        }

        // Re-anchor at the continuation point's SINRs. Entries driven to
        // zero power keep a tiny positive floor so the anchor stays in the
        // bound's domain but carries no surrogate weight.
        let sinrs = problem.sinrs(&current);
        let anchored: Vec<f64> = sinrs.iter().map(|&g| g.max(1e-300)).collect();
        scale = scale_coeffs(&anchored)?;
        for (i, &g) in sinrs.iter().enumerate() {
            if !(g > 0.0) {
                scale.xi[i] = 0.0;
                scale.psi[i] = 0.0;
            }
        }
        for p in current.iter_mut() {
            if !(*p > 0.0) {
                *p = f64::MIN_POSITIVE;
            }
        }
    }

    if trace.outer_rates.is_empty() {
        trace.outer_rates.push(best_rate);
    }
    Ok(PowerSolve {
        powers: best,
        trace,
        converged,
        min_multiplier: if min_multiplier.is_finite() {
            min_multiplier
        } else {
            0.0
        },
        outer_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::Allocation;
    use crate::scenario::{ChannelRealization, CodebookStructure, Scheme};

    fn identity_structure(n: usize) -> CodebookStructure {
        CodebookStructure::subcarrier_identity(n)
    }

    fn single_entry_fixture(p_max: f64) -> (Allocation, ChannelRealization, CodebookStructure) {
        let channel = ChannelRealization {
            gain: vec![vec![vec![4.0]]],
            noise: vec![1.0],
        };
        let structure = identity_structure(1);
        let mut alloc = Allocation::empty(Scheme::Psma, vec![0], 1, 1);
        alloc.q[0][0] = true;
        alloc.p[0][0] = p_max.max(1e-3) / 2.0;
        (alloc, channel, structure)
    }

    #[test]
    fn budget_price_hand_updates() {
        // slack 2 at price 1 with step 0.1 moves to 0.8; slack 0 leaves the
        // price alone; over-stepping projects onto zero.
        let (alloc, channel, structure) = single_entry_fixture(3.0);
        let problem = PowerProblem::new(&alloc, &channel, &structure, &[3.0]).unwrap();
        let dual = DualState {
            delta: vec![1.0],
            beta: vec![],
            nu1: vec![0.1],
            nu2: vec![],
            iter: 0,
        };
        let next = subgradient_step(&dual, &problem, &[1.0]);
        assert!((next.delta[0] - 0.8).abs() < 1e-15);
        assert_eq!(next.iter, 1);

        let next = subgradient_step(&dual, &problem, &[3.0]);
        assert_eq!(next.delta[0], 1.0);

        let dual_low = DualState {
            delta: vec![0.1],
            beta: vec![],
            nu1: vec![0.1],
            nu2: vec![],
            iter: 0,
        };
        let next = subgradient_step(&dual_low, &problem, &[1.0]);
        assert_eq!(next.delta[0], 0.0);
    }

    #[test]
    fn single_user_inner_solve_hits_the_budget() {
        let (alloc, channel, structure) = single_entry_fixture(5.0);
        let problem = PowerProblem::new(&alloc, &channel, &structure, &[5.0]).unwrap();
        let scale = ScaleCoeffs::ones(1);
        let opts = SolverOptions::default();
        let mut trace = PowerIterTrace::default();
        let solve = solve_power_inner(&problem, &[2.5], &scale, &opts, &mut trace).unwrap();
        assert!(solve.converged);
        // A lone rate-seeking user spends the whole budget.
        assert!(
            (solve.powers[0] - 5.0).abs() < 5.0 * 2e-2,
            "{}",
            solve.powers[0]
        );
        assert!(problem.budget_violation(&solve.powers) <= 1e-6);
    }

    #[test]
    fn zero_budget_returns_silence() {
        let (alloc, channel, structure) = single_entry_fixture(0.0);
        let problem = PowerProblem::new(&alloc, &channel, &structure, &[0.0]).unwrap();
        let opts = SolverOptions::default();
        let solve = solve_power_scale(&problem, &[0.0], &opts).unwrap();
        assert!(solve.converged);
        assert_eq!(solve.powers, vec![0.0]);
        assert_eq!(problem.true_sum_rate(&solve.powers), 0.0);
    }

    #[test]
    fn multiplier_nonnegative_after_any_step() {
        let (alloc, channel, structure) = single_entry_fixture(3.0);
        let problem = PowerProblem::new(&alloc, &channel, &structure, &[3.0]).unwrap();
        for &(delta, power) in &[
            (0.0, 10.0),
            (5.0, 0.0),
            (0.01, 3.0),
            (2.0, 2.9),
            (0.05, 0.1),
        ] {
            let dual = DualState {
                delta: vec![delta],
                beta: vec![],
                nu1: vec![0.5],
                nu2: vec![],
                iter: 3,
            };
            let next = subgradient_step(&dual, &problem, &[power]);
            assert!(next.delta[0] >= 0.0);
        }
    }

    #[test]
    fn fixed_point_terminates_outer_loop_quickly() {
        // A single user already at the optimum stays there: the outer loop
        // accepts it and stops within two rounds.
        let (alloc, channel, structure) = single_entry_fixture(5.0);
        let problem = PowerProblem::new(&alloc, &channel, &structure, &[5.0]).unwrap();
        let opts = SolverOptions::default();
        let solve = solve_power_scale(&problem, &[5.0], &opts).unwrap();
        assert!(solve.converged);
        assert!(solve.outer_iterations <= 2, "{}", solve.outer_iterations);
        assert!((solve.powers[0] - 5.0).abs() <= 5.0 * 2e-2);
    }
}
