//! Experiment orchestration: the power/assignment alternation loop, Monte
//! Carlo sweeps over users / power / codebook load, paired scheme
//! comparisons and CSV emission.

mod emit;

pub use emit::{emit_comparison, emit_results, render_comparison, render_rows, render_summary};

use crate::assign::{assign_codebooks, check_feasible};
use crate::error::{Error, Result};
use crate::phy::{avg_codebook_gain, sum_rate, Allocation};
use crate::power::{solve_power_scale, PowerIterTrace, PowerProblem, SolverOptions};
use crate::scenario::{
    build_codebook_structure, build_topology, sample_channels, ChannelRealization,
    CodebookStructure, EtaPolicy, ScenarioConfig, Scheme, Topology,
};
use rayon::prelude::*;
use std::path::PathBuf;

/// Maximum outer alternation rounds.
const MAX_ALTERNATION_ITERS: usize = 20;

/// Derive the scheme-specific configuration and resource structure.
///
/// The exclusive-codebook baseline is the shared machinery with the
/// codebook-reuse limit forced to one; the power-domain baseline runs on the
/// bare subcarrier axis (singleton codebooks carrying full stream power).
pub fn scheme_setup(
    base: &ScenarioConfig,
    scheme: Scheme,
) -> Result<(ScenarioConfig, CodebookStructure)> {
    let mut config = base.clone();
    config.scheme = scheme;
    match scheme {
        Scheme::Psma => {
            let structure = build_codebook_structure(&config, EtaPolicy::UniformEta)?;
            Ok((config, structure))
        }
        Scheme::Scma => {
            config.l_t = 1;
            let structure = build_codebook_structure(&config, EtaPolicy::UniformEta)?;
            Ok((config, structure))
        }
        Scheme::Pdnoma => {
            config.num_codebooks = config.num_subcarriers;
            config.codebook_size = 1;
            let structure = CodebookStructure::subcarrier_identity(config.num_subcarriers);
            Ok((config, structure))
        }
    }
}

/// Greedy feasible start: round-robin over users, each taking its
/// best-average-gain codebook that still fits the per-codebook load and
/// per-subcarrier reuse limits, until nothing more fits.
pub fn greedy_initial_assignment(
    config: &ScenarioConfig,
    topology: &Topology,
    channel: &ChannelRealization,
    structure: &CodebookStructure,
) -> Allocation {
    let num_users = config.num_users;
    let num_codebooks = structure.num_codebooks();
    let mut alloc = Allocation::empty(
        config.scheme,
        topology.user_cell.clone(),
        config.num_bs,
        num_codebooks,
    );
    let mut lt_used = vec![vec![0usize; num_codebooks]; config.num_bs];
    let mut k_used = vec![vec![0usize; structure.num_subcarriers()]; config.num_bs];
    loop {
        let mut progress = false;
        for m in 0..num_users {
            let f = topology.user_cell[m];
            let mut best: Option<(f64, usize)> = None;
            for c in 0..num_codebooks {
                if alloc.q[m][c] || lt_used[f][c] >= config.l_t {
                    continue;
                }
                if structure.codebook_subcarriers[c]
                    .iter()
                    .any(|&n| k_used[f][n] >= config.k)
                {
                    continue;
                }
                let gain = avg_codebook_gain(channel, structure, f, m, c);
                if best.map_or(true, |(g, _)| gain > g) {
                    best = Some((gain, c));
                }
            }
            if let Some((_, c)) = best {
                alloc.q[m][c] = true;
                lt_used[f][c] += 1;
                for &n in &structure.codebook_subcarriers[c] {
                    k_used[f][n] += 1;
                }
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    alloc
}

/// Split each cell's budget equally over its active entries.
fn equal_split_powers(alloc: &mut Allocation, p_max: &[f64]) {
    for f in 0..alloc.num_cells {
        let entries: Vec<(usize, usize)> = alloc
            .active_entries()
            .into_iter()
            .filter(|&(cell, _, _)| cell == f)
            .map(|(_, m, c)| (m, c))
            .collect();
        if entries.is_empty() {
            continue;
        }
        let share = p_max[f] / entries.len() as f64;
        for (m, c) in entries {
            alloc.p[m][c] = share;
        }
    }
}

/// Outcome of one full alternation solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub alloc: Allocation,
    pub sum_rate_nats: f64,
    /// Accepted sum rate after each outer round, starting at the greedy
    /// initial point; non-decreasing by construction.
    pub trace: Vec<f64>,
    pub outer_iters: usize,
    pub converged: bool,
    /// Worst relative budget overrun of the final allocation.
    pub budget_residual: f64,
    pub sic_violations: usize,
    /// Smallest Lagrange multiplier observed in the final power solve.
    pub min_multiplier: f64,
    /// Users left without any codebook by the load limits.
    pub unserved_users: Vec<usize>,
    /// Dual-loop diagnostics of the last power solve.
    pub power_trace: PowerIterTrace,
}

/// Alternate the continuous power solver and the discrete assignment search
/// from a greedy start until the power matrix settles.
pub fn alternate_solve(
    config: &ScenarioConfig,
    topology: &Topology,
    channel: &ChannelRealization,
    structure: &CodebookStructure,
) -> Result<SolveOutcome> {
    alternate_solve_warm(config, topology, channel, structure, None)
}

/// [`alternate_solve`] seeded with a caller-provided starting assignment
/// (e.g. the solution of a more constrained scenario in a load sweep); the
/// warm start's rate is the floor of the monotone trace.
pub fn alternate_solve_warm(
    config: &ScenarioConfig,
    topology: &Topology,
    channel: &ChannelRealization,
    structure: &CodebookStructure,
    warm: Option<&Allocation>,
) -> Result<SolveOutcome> {
    config.validate()?;
    let opts = SolverOptions::from_config(config);

    let mut alloc = match warm {
        Some(seed) => {
            let mut alloc = seed.clone();
            alloc.scheme = config.scheme;
            alloc.mask_powers();
            alloc
        }
        None => greedy_initial_assignment(config, topology, channel, structure),
    };
    let unserved_users: Vec<usize> = (0..config.num_users)
        .filter(|&m| alloc.q[m].iter().all(|&q| !q))
        .collect();
    if warm.is_some() {
        // Keep the warm powers (the trace floor); top up any powerless
        // active entries with leftover budget so the log-domain solver can
        // take them.
        for f in 0..config.num_bs {
            let active: Vec<(usize, usize)> = alloc
                .active_entries()
                .into_iter()
                .filter(|&(cell, _, _)| cell == f)
                .map(|(_, m, c)| (m, c))
                .collect();
            let used: f64 = active.iter().map(|&(m, c)| alloc.p[m][c]).sum();
            let dry: Vec<(usize, usize)> = active
                .iter()
                .cloned()
                .filter(|&(m, c)| !(alloc.p[m][c] > 0.0))
                .collect();
            if dry.is_empty() {
                continue;
            }
            let headroom = (config.p_max[f] - used).max(0.0);
            let seed = (headroom / dry.len() as f64).max(config.p_max[f] * 1e-12);
            for (m, c) in dry {
                alloc.p[m][c] = seed;
            }
        }
    } else {
        equal_split_powers(&mut alloc, &config.p_max);
    }

    let mut rate = sum_rate(&alloc, channel, structure)?.sum_rate;
    let mut trace = vec![rate];
    let mut previous_powers = alloc.p.clone();
    let p_ref = config.p_ref();
    let mut converged = false;
    let mut outer_iters = 0;
    let mut min_multiplier = f64::INFINITY;
    let mut power_trace = PowerIterTrace::default();

    for _ in 0..MAX_ALTERNATION_ITERS {
        outer_iters += 1;

        // Continuous half: re-optimize powers for the current assignment.
        let problem = PowerProblem::new(&alloc, channel, structure, &config.p_max)?;
        let p0: Vec<f64> = (0..problem.num_entries())
            .map(|i| {
                let (_, m, c) = problem.entry_key(i);
                alloc.p[m][c].max(f64::MIN_POSITIVE)
            })
            .collect();
        let solve = solve_power_scale(&problem, &p0, &opts)?;
        min_multiplier = min_multiplier.min(solve.min_multiplier);
        for i in 0..problem.num_entries() {
            let (_, m, c) = problem.entry_key(i);
            alloc.p[m][c] = solve.powers[i];
        }
        alloc.mask_powers();
        power_trace = solve.trace;
        rate = sum_rate(&alloc, channel, structure)?.sum_rate;

        // Discrete half: candidate powers price every potential entry at the
        // cell's mean active power so flips and shifts stay budget-scaled.
        let mut dense = alloc.p.clone();
        for f in 0..config.num_bs {
            let active: Vec<f64> = alloc
                .active_entries()
                .into_iter()
                .filter(|&(cell, _, _)| cell == f)
                .map(|(_, m, c)| alloc.p[m][c])
                .collect();
            let seed = if active.is_empty() {
                config.p_max[f]
            } else {
                active.iter().sum::<f64>() / active.len() as f64
            };
            for m in topology.cell_users(f) {
                for c in 0..alloc.num_codebooks() {
                    if !alloc.q[m][c] {
                        dense[m][c] = seed;
                    }
                }
            }
        }
        // A stubborn decode-order residual can leave the incumbent outside
        // the assignment gate; treat that as a stall on the current point.
        let candidate = match assign_codebooks(&dense, &alloc, channel, structure, config) {
            Ok(candidate) => candidate,
            Err(Error::Infeasible(_)) => {
                trace.push(rate);
                converged = true;
                break;
            }
            Err(other) => return Err(other),
        };
        alloc = candidate.alloc;
        rate = candidate.objective;
        trace.push(rate);

        let step = alloc
            .p
            .iter()
            .flatten()
            .zip(previous_powers.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        previous_powers = alloc.p.clone();
        if step <= config.upsilon * p_ref {
            converged = true;
            break;
        }
    }

    let report = check_feasible(&alloc, channel, structure, config);
    let budget_residual = report
        .budget_slack
        .iter()
        .enumerate()
        .map(|(f, &s)| {
            if config.p_max[f] > 0.0 {
                (-s).max(0.0) / config.p_max[f]
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);

    Ok(SolveOutcome {
        sum_rate_nats: rate,
        trace,
        outer_iters,
        converged,
        budget_residual,
        sic_violations: report.sic_violations,
        min_multiplier: if min_multiplier.is_finite() {
            min_multiplier
        } else {
            0.0
        },
        unserved_users,
        power_trace,
        alloc,
    })
}

/// Run one scheme end to end on a derived scenario and trial seed.
pub fn run_single(base: &ScenarioConfig, scheme: Scheme, seed: u64) -> Result<SolveOutcome> {
    let (config, structure) = scheme_setup(base, scheme)?;
    let topology = build_topology(&config, seed)?;
    let channel = sample_channels(&topology, &config, seed)?;
    alternate_solve(&config, &topology, &channel, &structure)
}

/// Sweep axis of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Users,
    TotalPower,
    LT,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Users => "users",
            SweepAxis::TotalPower => "power",
            SweepAxis::LT => "lt",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "users" => Ok(SweepAxis::Users),
            "power" => Ok(SweepAxis::TotalPower),
            "lt" => Ok(SweepAxis::LT),
            other => Err(Error::InvalidConfig {
                field: "axis".into(),
                reason: format!("unknown sweep axis `{other}` (expected users|power|lt)"),
            }),
        }
    }
}

/// A full sweep specification.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub base: ScenarioConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidConfig {
                field: "trials".into(),
                reason: "need at least one trial".into(),
            });
        }
        if self.values.is_empty() {
            return Err(Error::InvalidConfig {
                field: "values".into(),
                reason: "need at least one sweep value".into(),
            });
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig {
                field: "values".into(),
                reason: "sweep values must be strictly increasing".into(),
            });
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig {
                field: "schemes".into(),
                reason: "need at least one scheme".into(),
            });
        }
        Ok(())
    }
}

/// Derive the scenario at one sweep point.
pub fn apply_axis(base: &ScenarioConfig, axis: SweepAxis, value: f64) -> Result<ScenarioConfig> {
    let mut config = base.clone();
    match axis {
        SweepAxis::Users => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::InvalidConfig {
                    field: "values".into(),
                    reason: format!("user counts must be positive integers, got {value}"),
                });
            }
            config.num_users = value as usize;
        }
        SweepAxis::TotalPower => {
            let total: f64 = base.p_max.iter().sum();
            if !(value > 0.0) || !(total > 0.0) {
                return Err(Error::InvalidConfig {
                    field: "values".into(),
                    reason: "total power values must be positive".into(),
                });
            }
            let factor = value / total;
            config.p_max = base.p_max.iter().map(|p| p * factor).collect();
        }
        SweepAxis::LT => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::InvalidConfig {
                    field: "values".into(),
                    reason: format!("codebook loads must be positive integers, got {value}"),
                });
            }
            config.l_t = value as usize;
        }
    }
    config.validate()?;
    Ok(config)
}

/// One emitted result row.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub sweep_axis: SweepAxis,
    pub sweep_value: f64,
    pub seed: u64,
    pub sum_rate_nats: f64,
    pub outer_iters: usize,
    pub converged: bool,
    pub budget_residual: f64,
    pub sic_violations: usize,
}

/// All rows of one experiment.
#[derive(Debug, Clone)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

/// Execute the sweep: one row per (scheme, value, trial). Trials share seeds
/// across schemes and values, so scheme comparisons are paired; failures are
/// recorded in-row and never abort the sweep.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for &scheme in &spec.schemes {
        for &value in &spec.values {
            for trial in 0..spec.trials {
                jobs.push((scheme, value, trial));
            }
        }
    }
    let rows: Vec<ResultRow> = jobs
        .par_iter()
        .map(|&(scheme, value, trial)| {
            let seed = spec.base.seed.wrapping_add(trial as u64);
            let outcome = apply_axis(&spec.base, spec.axis, value)
                .and_then(|cfg| run_single(&cfg, scheme, seed));
            match outcome {
                Ok(out) => ResultRow {
                    scheme,
                    sweep_axis: spec.axis,
                    sweep_value: value,
                    seed,
                    sum_rate_nats: out.sum_rate_nats,
                    outer_iters: out.outer_iters,
                    converged: out.converged,
                    budget_residual: out.budget_residual,
                    sic_violations: out.sic_violations,
                },
                Err(_) => ResultRow {
                    scheme,
                    sweep_axis: spec.axis,
                    sweep_value: value,
                    seed,
                    sum_rate_nats: 0.0,
                    outer_iters: 0,
                    converged: false,
                    budget_residual: 0.0,
                    sic_violations: 0,
                },
            }
        })
        .collect();
    Ok(ResultTable { rows })
}

/// One paired-seed comparison row.
#[derive(Debug, Clone)]
pub struct CompareRow {
    pub seed: u64,
    pub psma: f64,
    pub scma: f64,
    pub pdnoma: f64,
    /// Digest of the gain tensor shared by the three runs.
    pub gain_digest: u64,
}

/// Paired comparison across the three schemes.
#[derive(Debug, Clone)]
pub struct ComparisonSummary {
    pub rows: Vec<CompareRow>,
    pub mean_psma: f64,
    pub mean_scma: f64,
    pub mean_pdnoma: f64,
    /// Mean per-seed ratio and its standard error.
    pub ratio_psma_scma: (f64, f64),
    pub ratio_psma_pdnoma: (f64, f64),
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Run all three schemes on identical channel draws per seed and report the
/// paired mean ratios.
pub fn compare_schemes(base: &ScenarioConfig, seeds: &[u64]) -> Result<ComparisonSummary> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig {
            field: "seeds".into(),
            reason: "need at least one seed".into(),
        });
    }
    let rows: Vec<Result<CompareRow>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rates = [0.0; 3];
            let mut digest = None;
            for (slot, scheme) in [Scheme::Psma, Scheme::Scma, Scheme::Pdnoma]
                .into_iter()
                .enumerate()
            {
                let (config, structure) = scheme_setup(base, scheme)?;
                let topology = build_topology(&config, seed)?;
                let channel = sample_channels(&topology, &config, seed)?;
                match digest {
                    None => digest = Some(channel.gain_digest()),
                    Some(d) => {
                        if d != channel.gain_digest() {
                            return Err(Error::Domain(
                                "paired comparison saw different channel draws".into(),
                            ));
                        }
                    }
                }
                let outcome = alternate_solve(&config, &topology, &channel, &structure)?;
                rates[slot] = outcome.sum_rate_nats;
            }
            Ok(CompareRow {
                seed,
                psma: rates[0],
                scma: rates[1],
                pdnoma: rates[2],
                gain_digest: digest.unwrap_or(0),
            })
        })
        .collect();
    let rows: Vec<CompareRow> = rows.into_iter().collect::<Result<_>>()?;

    let psma: Vec<f64> = rows.iter().map(|r| r.psma).collect();
    let scma: Vec<f64> = rows.iter().map(|r| r.scma).collect();
    let pdnoma: Vec<f64> = rows.iter().map(|r| r.pdnoma).collect();
    let ratio_scma: Vec<f64> = rows.iter().map(|r| r.psma / r.scma).collect();
    let ratio_pdnoma: Vec<f64> = rows.iter().map(|r| r.psma / r.pdnoma).collect();

    Ok(ComparisonSummary {
        mean_psma: mean_and_se(&psma).0,
        mean_scma: mean_and_se(&scma).0,
        mean_pdnoma: mean_and_se(&pdnoma).0,
        ratio_psma_scma: mean_and_se(&ratio_scma),
        ratio_psma_pdnoma: mean_and_se(&ratio_pdnoma),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_base() -> ScenarioConfig {
        ScenarioConfig {
            num_bs: 1,
            num_users: 2,
            num_subcarriers: 4,
            num_codebooks: 2,
            codebook_size: 2,
            macro_radius: 500.0,
            small_radius: 20.0,
            path_loss_exponent: -2.0,
            p_max: vec![4.0],
            noise_power: 1e-10,
            l_t: 2,
            k: 4,
            scheme: Scheme::Psma,
            seed: 7,
            epsilon: 1e-4,
            upsilon: 1e-3,
            nu1: 0.1,
            nu2: 0.1,
        }
    }

    #[test]
    fn spec_rejects_bad_sweeps() {
        let base = tiny_base();
        let mut spec = ExperimentSpec {
            base,
            axis: SweepAxis::Users,
            values: vec![2.0, 4.0],
            trials: 1,
            schemes: vec![Scheme::Psma],
            out_dir: None,
        };
        assert!(spec.validate().is_ok());
        spec.values = vec![4.0, 2.0];
        assert!(spec.validate().is_err());
        spec.values = vec![2.0, 2.0];
        assert!(spec.validate().is_err());
        spec.values = vec![2.0, 4.0];
        spec.trials = 0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn axis_application_derives_scenarios() {
        let base = tiny_base();
        let users = apply_axis(&base, SweepAxis::Users, 6.0).unwrap();
        assert_eq!(users.num_users, 6);
        let power = apply_axis(&base, SweepAxis::TotalPower, 8.0).unwrap();
        assert_eq!(power.p_max, vec![8.0]);
        let lt = apply_axis(&base, SweepAxis::LT, 1.0).unwrap();
        assert_eq!(lt.l_t, 1);
        assert!(apply_axis(&base, SweepAxis::Users, 2.5).is_err());
    }

    #[test]
    fn zero_budget_converges_immediately_to_silence() {
        let mut base = tiny_base();
        base.p_max = vec![0.0];
        let out = run_single(&base, Scheme::Psma, 3).unwrap();
        assert_eq!(out.sum_rate_nats, 0.0);
        assert!(out.converged);
        assert!(out.budget_residual <= 0.0 + 1e-12);
    }

    #[test]
    fn saturated_load_reports_partial_service() {
        // One codebook, one slot: the second user cannot be served.
        let mut base = tiny_base();
        base.num_codebooks = 1;
        base.l_t = 1;
        let out = run_single(&base, Scheme::Psma, 5).unwrap();
        assert_eq!(out.unserved_users.len(), 1);
        assert!(out.sum_rate_nats > 0.0);
    }

    #[test]
    fn experiment_produces_one_row_per_job() {
        let spec = ExperimentSpec {
            base: tiny_base(),
            axis: SweepAxis::Users,
            values: vec![2.0],
            trials: 1,
            schemes: vec![Scheme::Psma],
            out_dir: None,
        };
        let table = run_experiment(&spec).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert!(table.rows[0].sum_rate_nats > 0.0);
        assert!(table.rows[0].converged);
    }

    #[test]
    fn single_entry_network_matches_grid_oracle() {
        let mut base = tiny_base();
        base.num_users = 1;
        base.num_codebooks = 1;
        let (config, structure) = scheme_setup(&base, Scheme::Psma).unwrap();
        let topo = build_topology(&config, 11).unwrap();
        let channel = sample_channels(&topo, &config, 11).unwrap();
        let out = alternate_solve(&config, &topo, &channel, &structure).unwrap();
        let oracle = crate::power::brute_force_power_oracle(
            &out.alloc,
            &channel,
            &structure,
            &config.p_max,
            2000,
        )
        .unwrap();
        let oracle_rate = sum_rate(&oracle, &channel, &structure).unwrap().sum_rate;
        assert!(
            (out.sum_rate_nats - oracle_rate).abs() <= 0.02 * oracle_rate,
            "alternation {} vs grid {}",
            out.sum_rate_nats,
            oracle_rate
        );
    }

    #[test]
    fn greedy_start_saturates_load_limits() {
        let base = tiny_base();
        let (config, structure) = scheme_setup(&base, Scheme::Psma).unwrap();
        let topo = build_topology(&config, 1).unwrap();
        let channel = sample_channels(&topo, &config, 1).unwrap();
        let alloc = greedy_initial_assignment(&config, &topo, &channel, &structure);
        // 2 users, 2 codebooks, l_t = 2, k = 4: every (user, codebook) pair fits.
        assert_eq!(alloc.active_entries().len(), 4);
    }
}
