//! Command-line front end: single solves, Monte Carlo sweeps, paired scheme
//! comparisons and receiver-complexity evaluation.

use clap::{Args, Parser, Subcommand};
use psma_sim::error::Error;
use psma_sim::experiment::{
    compare_schemes, emit_comparison, emit_results, run_experiment, run_single, ExperimentSpec,
    SweepAxis,
};
use psma_sim::phy::{receiver_complexity, ComplexityParams};
use psma_sim::scenario::{load_scenario, Scheme};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "psma-sim",
    about = "System-level simulator for PSMA, SCMA and PD-NOMA downlink HetNets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario end to end and print the outcome.
    Simulate(SimulateArgs),
    /// Sweep users, total power or the codebook load over Monte Carlo trials.
    Sweep(SweepArgs),
    /// Run the three schemes on identical channels and report paired ratios.
    Compare(CompareArgs),
    /// Evaluate the receiver-complexity formulas at one operating point.
    Complexity(ComplexityArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scenario scheme (psma|scma|pdnoma).
    #[arg(long)]
    scheme: Option<Scheme>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Sweep axis: users|power|lt.
    #[arg(long)]
    axis: SweepAxis,
    /// Comma-separated, strictly increasing sweep values.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    /// Monte Carlo trials per sweep point.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Schemes to run (default: all three).
    #[arg(long, value_delimiter = ',', default_values = ["psma", "scma", "pdnoma"])]
    schemes: Vec<Scheme>,
    /// Output directory for rows.csv and summary.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Seeds: comma-separated list and/or inclusive ranges like 1..50.
    #[arg(long)]
    seeds: String,
    /// Output directory for per_seed.csv and comparison.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ComplexityArgs {
    /// Message-passing iterations.
    #[arg(long)]
    it: u64,
    /// Codebook alphabet size.
    #[arg(long)]
    pi: u64,
    /// Nonzero factor-graph row entries.
    #[arg(long)]
    d: u64,
    /// Codebooks per user (doubles as subcarriers per user for PD-NOMA).
    #[arg(long)]
    g: u64,
    /// Users per codebook (doubles as users per subcarrier for PD-NOMA).
    #[arg(long)]
    lt: u64,
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>, Error> {
    let mut seeds = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: u64 = lo.trim().parse().map_err(|_| Error::InvalidConfig {
                field: "seeds".into(),
                reason: format!("bad range start in `{part}`"),
            })?;
            let hi: u64 = hi.trim().parse().map_err(|_| Error::InvalidConfig {
                field: "seeds".into(),
                reason: format!("bad range end in `{part}`"),
            })?;
            if hi < lo {
                return Err(Error::InvalidConfig {
                    field: "seeds".into(),
                    reason: format!("empty range `{part}`"),
                });
            }
            seeds.extend(lo..=hi);
        } else {
            seeds.push(part.parse().map_err(|_| Error::InvalidConfig {
                field: "seeds".into(),
                reason: format!("bad seed `{part}`"),
            })?);
        }
    }
    if seeds.is_empty() {
        return Err(Error::InvalidConfig {
            field: "seeds".into(),
            reason: "no seeds given".into(),
        });
    }
    Ok(seeds)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(args) => {
            let mut config = load_scenario(&args.scenario)?;
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            if let Some(scheme) = args.scheme {
                config.scheme = scheme;
            }
            let outcome = run_single(&config, config.scheme, config.seed)?;
            println!("scheme: {}", config.scheme.as_str());
            println!("seed: {}", config.seed);
            println!("sum_rate_nats: {}", outcome.sum_rate_nats);
            println!("outer_iters: {}", outcome.outer_iters);
            println!("converged: {}", outcome.converged);
            println!("budget_residual: {}", outcome.budget_residual);
            println!("sic_violations: {}", outcome.sic_violations);
            if !outcome.unserved_users.is_empty() {
                println!(
                    "unserved_users: {}",
                    outcome
                        .unserved_users
                        .iter()
                        .map(|u| u.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                );
            }
            Ok(())
        }
        Command::Sweep(args) => {
            let base = load_scenario(&args.scenario)?;
            let spec = ExperimentSpec {
                base,
                axis: args.axis,
                values: args.values,
                trials: args.trials,
                schemes: args.schemes,
                out_dir: Some(args.out.clone()),
            };
            let table = run_experiment(&spec)?;
            let (rows, summary) = emit_results(&table, &args.out)?;
            println!("wrote {}", rows.display());
            println!("wrote {}", summary.display());
            Ok(())
        }
        Command::Compare(args) => {
            let base = load_scenario(&args.scenario)?;
            let seeds = parse_seeds(&args.seeds)?;
            let summary = compare_schemes(&base, &seeds)?;
            let (per_seed, totals) = emit_comparison(&summary, &args.out)?;
            println!("wrote {}", per_seed.display());
            println!("wrote {}", totals.display());
            println!(
                "psma/scma: {} (se {})",
                summary.ratio_psma_scma.0, summary.ratio_psma_scma.1
            );
            println!(
                "psma/pdnoma: {} (se {})",
                summary.ratio_psma_pdnoma.0, summary.ratio_psma_pdnoma.1
            );
            Ok(())
        }
        Command::Complexity(args) => {
            let params = ComplexityParams {
                i_t: args.it,
                pi_size: args.pi,
                d: args.d,
                g: args.g,
                l_t: args.lt,
                g_prime: args.g,
                l_t_prime: args.lt,
            };
            params.validate()?;
            println!("scma: {}", receiver_complexity(&params, Scheme::Scma));
            println!("psma: {}", receiver_complexity(&params, Scheme::Psma));
            println!("pdnoma: {}", receiver_complexity(&params, Scheme::Pdnoma));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
