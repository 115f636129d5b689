//! Closed-form stationary-point power update and the Lagrangian it solves.

use super::problem::PowerProblem;
use super::{DualState, ScaleCoeffs};
use crate::error::{Error, Result};

/// Coupling terms of one entry's stationarity balance, all evaluated at an
/// anchor allocation.
#[derive(Debug, Clone, Copy, Default)]
struct Couplings {
    /// Same-cell surrogate coupling through users decoded earlier.
    a: f64,
    /// Other-cell surrogate coupling through co-channel reuse.
    b: f64,
    /// SIC-multiplier coupling that scales with the entry's own power.
    c: f64,
    /// SIC-multiplier coupling fixed at the anchor power.
    g: f64,
}

fn couplings(
    problem: &PowerProblem,
    scale: &ScaleCoeffs,
    dual: &DualState,
    dc_anchor: &[f64],
    den: &[f64],
) -> Vec<Couplings> {
    let mut terms = vec![Couplings::default(); problem.num_entries()];

    for (i, entry) in problem.entries.iter().enumerate() {
        // Users of the same codebook decoded before `i` keep `i`'s power in
        // their denominators.
        let group = &problem.groups[entry.group];
        for &j in &group.entries[..entry.pos] {
            terms[i].a += scale.xi[j] * problem.entries[j].eff_own / den[j];
        }
        // Every co-channel entry in another cell sees `i` as interference.
        for &(j, _, gain_out) in &entry.cochannel {
            terms[i].b += scale.xi[j] * gain_out / den[j];
        }
    }

    for (k, pair) in problem.pairs.iter().enumerate() {
        let beta = dual.beta[k];
        if beta == 0.0 {
            continue;
        }
        // Other-cell co-channel powers appear exponentially on the convex
        // side (observed at the better receiver) and linearized on the
        // concave side (observed at the worse receiver); the linearized side
        // is pinned to the round's expansion point.
        for &(j, g_worse, g_better) in &pair.cross {
            terms[j].c += beta * pair.eff_worse * g_better;
            terms[j].g += beta * pair.eff_better * g_worse * dc_anchor[j];
        }
        // Same-cell powers superposed after the worse user enter both sides
        // with the product of the two receivers' codebook gains.
        let group = &problem.groups[pair.group];
        for &j in &group.entries[pair.worse_pos + 1..] {
            terms[j].c += beta * pair.eff_worse * pair.eff_better;
            terms[j].g += beta * pair.eff_better * pair.eff_worse * dc_anchor[j];
        }
    }

    terms
}

/// One fixed-point sweep of the stationarity condition: every entry's power
/// is set to `(xi + G) / (delta + A + B + C)`, clamped at zero. The
/// surrogate couplings A and B follow the rolling iterate `p_anchor`; the
/// constraint couplings C and G stay pinned to `dc_anchor`, the expansion
/// point of the linearized decode-order constraints.
///
/// Iterating this map at fixed multipliers converges to the stationary point
/// of [`lagrangian_value`] (with the same `dc_anchor`) in log-power space.
pub fn power_closed_form_anchored(
    scale: &ScaleCoeffs,
    dual: &DualState,
    problem: &PowerProblem,
    p_anchor: &[f64],
    dc_anchor: &[f64],
) -> Result<Vec<f64>> {
    let den = problem.denominators(p_anchor);
    let terms = couplings(problem, scale, dual, dc_anchor, &den);
    let mut p_new = vec![0.0; problem.num_entries()];
    for (i, entry) in problem.entries.iter().enumerate() {
        let numerator = scale.xi[i] + terms[i].g;
        let denominator = dual.delta[entry.cell] + terms[i].a + terms[i].b + terms[i].c;
        if denominator <= 0.0 {
            if numerator == 0.0 {
                p_new[i] = 0.0;
                continue;
            }
            return Err(Error::UnboundedPowerUpdate {
                cell: entry.cell,
                user: entry.user,
                codebook: entry.codebook,
            });
        }
        p_new[i] = (numerator / denominator).max(0.0);
    }
    Ok(p_new)
}

/// [`power_closed_form_anchored`] with a single anchor playing both roles.
pub fn power_closed_form(
    scale: &ScaleCoeffs,
    dual: &DualState,
    problem: &PowerProblem,
    p_anchor: &[f64],
) -> Result<Vec<f64>> {
    power_closed_form_anchored(scale, dual, problem, p_anchor, p_anchor)
}

/// Solve the stationarity condition at fixed multipliers: the update formula
/// is implicit (its couplings depend on the powers), so it is iterated with
/// 0.5 damping from `p_init` until the relative change falls below `tol`.
///
/// The result zeroes the gradient of [`lagrangian_value`] (with the same
/// `dc_anchor`) in log-power space.
pub fn closed_form_fixed_point(
    scale: &ScaleCoeffs,
    dual: &DualState,
    problem: &PowerProblem,
    p_init: &[f64],
    dc_anchor: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<Vec<f64>> {
    let mut p = p_init.to_vec();
    for _ in 0..max_sweeps {
        let next = power_closed_form_anchored(scale, dual, problem, &p, dc_anchor)?;
        let mut moved = 0.0f64;
        for (current, target) in p.iter_mut().zip(next) {
            let mixed = 0.5 * (*current + target);
            moved = moved.max((mixed - *current).abs() / current.abs().max(1e-12));
            *current = mixed;
        }
        if moved <= tol {
            break;
        }
    }
    Ok(p)
}

/// Lagrangian of the surrogate problem at powers `p`, with the SIC
/// constraints DC-linearized around `anchor`:
/// surrogate objective plus budget prices plus SIC prices.
///
/// The closed form's fixed point makes the gradient of this function in
/// log-power space vanish, which is what the stationarity acceptance check
/// differentiates numerically.
pub fn lagrangian_value(
    problem: &PowerProblem,
    scale: &ScaleCoeffs,
    dual: &DualState,
    p: &[f64],
    anchor: &[f64],
) -> f64 {
    let mut value = problem.surrogate(p, &scale.xi, &scale.psi);
    for (f, slack) in problem.budget_slack(p).iter().enumerate() {
        value += dual.delta[f] * slack;
    }
    for k in 0..problem.num_pairs() {
        value -= dual.beta[k] * problem.pair_dc_residual(k, p, anchor);
    }
    value
}
