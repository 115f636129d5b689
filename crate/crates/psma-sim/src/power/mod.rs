//! Continuous power-allocation solver for a fixed codebook assignment.
//!
//! The nonconvex sum-rate objective is lower-bounded by the logarithmic
//! surrogate `xi * ln(gamma) + psi`, re-anchored between outer rounds; the
//! SIC decode-order constraints are linearized in log-power space; the
//! resulting concave problem is solved through its Lagrangian with a
//! closed-form power update and subgradient multiplier ascent. A grid-search
//! oracle over tiny instances provides an independent quality check.

mod affine;
mod closed_form;
mod loops;
mod oracle;
mod problem;

pub use affine::{linearize_sic_constraint, AffineSicConstraint};
pub use closed_form::{
    closed_form_fixed_point, lagrangian_value, power_closed_form, power_closed_form_anchored,
};
pub use loops::{solve_power_inner, solve_power_scale, subgradient_step, InnerSolve, PowerSolve};
pub use oracle::brute_force_power_oracle;
pub use problem::{PowerProblem, SolverOptions};

use crate::error::{Error, Result};

/// Surrogate coefficients of the bound `xi * ln(x) + psi <= ln(1 + x)`,
/// one pair per active entry, tight at the anchor SINR.
#[derive(Debug, Clone)]
pub struct ScaleCoeffs {
    pub xi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl ScaleCoeffs {
    /// Loose initialization `xi = 1`, `psi = 0` (the plain `ln x <= ln(1+x)`
    /// bound), used before the first anchor is available.
    pub fn ones(len: usize) -> Self {
        ScaleCoeffs {
            xi: vec![1.0; len],
            psi: vec![0.0; len],
        }
    }
}

/// Coefficients anchored at one SINR value.
pub fn scale_pair(anchor_sinr: f64) -> (f64, f64) {
    let xi = anchor_sinr / (1.0 + anchor_sinr);
    let psi = (1.0 + anchor_sinr).ln() - xi * anchor_sinr.ln();
    (xi, psi)
}

/// Anchor the surrogate at the given per-entry SINRs.
pub fn scale_coeffs(anchor_sinr: &[f64]) -> Result<ScaleCoeffs> {
    let mut xi = Vec::with_capacity(anchor_sinr.len());
    let mut psi = Vec::with_capacity(anchor_sinr.len());
    for (idx, &g) in anchor_sinr.iter().enumerate() {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::Domain(format!(
                "anchor SINR for active entry {idx} must be positive and finite, got {g}"
            )));
        }
        let (x, p) = scale_pair(g);
        xi.push(x);
        psi.push(p);
    }
    Ok(ScaleCoeffs { xi, psi })
}

/// Lagrange multipliers and step sizes of the dual ascent.
///
/// `delta[f]` prices cell `f`'s power budget; `beta[k]` prices the k-th
/// linearized SIC pair constraint. Step sizes are kept per cell and per pair
/// so heterogeneous budgets (30 W macro next to 2 W small cells) move at
/// comparable relative speed.
#[derive(Debug, Clone)]
pub struct DualState {
    pub delta: Vec<f64>,
    pub beta: Vec<f64>,
    pub nu1: Vec<f64>,
    pub nu2: Vec<f64>,
    pub iter: usize,
}

impl DualState {
    pub fn min_multiplier(&self) -> f64 {
        self.delta
            .iter()
            .chain(self.beta.iter())
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Per-iteration solver diagnostics.
///
/// `surrogate`, `true_rate`, `budget_residual`, `sic_residual` and
/// `step_norm` are recorded once per dual iteration across all outer rounds;
/// `outer_rates` holds the accepted true sum rate after each surrogate
/// re-anchoring and is non-decreasing by construction.
#[derive(Debug, Clone, Default)]
pub struct PowerIterTrace {
    pub surrogate: Vec<f64>,
    pub true_rate: Vec<f64>,
    pub budget_residual: Vec<f64>,
    pub sic_residual: Vec<f64>,
    pub step_norm: Vec<f64>,
    pub outer_rates: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_anchor_gives_half_and_ln2() {
        let (xi, psi) = scale_pair(1.0);
        assert_eq!(xi, 0.5);
        assert!((psi - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn xi_approaches_one_for_large_anchor() {
        let (xi, _) = scale_pair(1e9);
        assert!(xi > 1.0 - 1e-8);
        let (xi_small, _) = scale_pair(1e-9);
        assert!(xi_small < 1e-8);
    }

    #[test]
    fn bound_holds_and_is_tight_at_anchor() {
        // Direct inequality evaluation over a deterministic log grid.
        let grid: Vec<f64> = (-30..=30).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
        for &g0 in &grid {
            let (xi, psi) = scale_pair(g0);
            for &x in &grid {
                let lhs = xi * x.ln() + psi;
                let rhs = (1.0 + x).ln();
                assert!(
                    lhs <= rhs + 1e-12,
                    "bound violated at anchor {g0}, x {x}: {lhs} > {rhs}"
                );
            }
            let at_anchor = xi * g0.ln() + psi - (1.0 + g0).ln();
            assert!(at_anchor.abs() < 1e-9, "not tight at anchor {g0}");
        }
    }

    #[test]
    fn rejects_nonpositive_anchor() {
        assert!(scale_coeffs(&[1.0, 0.0]).is_err());
        assert!(scale_coeffs(&[1.0, -2.0]).is_err());
        assert!(scale_coeffs(&[1.0, 2.0]).is_ok());
    }
}
