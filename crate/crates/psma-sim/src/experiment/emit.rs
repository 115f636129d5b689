//! CSV emission. Output is byte-stable for identical inputs: rows are sorted
//! by a total key and floats use the shortest round-trip form.

use super::{ComparisonSummary, ResultRow, ResultTable};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        (a.scheme.as_str(), a.sweep_value, a.seed)
            .partial_cmp(&(b.scheme.as_str(), b.sweep_value, b.seed))
            .expect("sweep values and seeds are finite")
    });
}

/// Render the per-trial rows CSV.
pub fn render_rows(table: &ResultTable) -> String {
    let mut rows = table.rows.clone();
    sort_rows(&mut rows);
    let mut out = String::from(
        "scheme,sweep_axis,sweep_value,seed,sum_rate_nats,outer_iters,converged,budget_residual,sic_violations\n",
    );
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.scheme.as_str(),
            r.sweep_axis.as_str(),
            r.sweep_value,
            r.seed,
            r.sum_rate_nats,
            r.outer_iters,
            r.converged,
            r.budget_residual,
            r.sic_violations
        )
        .expect("string write cannot fail");
    }
    out
}

/// Render the per-(scheme, value) mean/stddev summary CSV.
pub fn render_summary(table: &ResultTable) -> String {
    let mut rows = table.rows.clone();
    sort_rows(&mut rows);
    let mut out =
        String::from("scheme,sweep_axis,sweep_value,trials,mean_sum_rate_nats,std_sum_rate_nats\n");
    let mut i = 0;
    while i < rows.len() {
        let key = (rows[i].scheme, rows[i].sweep_value);
        let mut values = Vec::new();
        while i < rows.len() && (rows[i].scheme, rows[i].sweep_value) == key {
            values.push(rows[i].sum_rate_nats);
            i += 1;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            key.0.as_str(),
            rows[i - 1].sweep_axis.as_str(),
            key.1,
            values.len(),
            mean,
            std
        )
        .expect("string write cannot fail");
    }
    out
}

/// Write `rows.csv` and `summary.csv` under `dir`, creating it if needed.
pub fn emit_results(table: &ResultTable, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    if table.rows.is_empty() {
        return Err(Error::Domain(
            "refusing to emit an empty result table".into(),
        ));
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let rows_path = dir.join("rows.csv");
    let summary_path = dir.join("summary.csv");
    std::fs::write(&rows_path, render_rows(table))?;
    std::fs::write(&summary_path, render_summary(table))?;
    Ok((rows_path, summary_path))
}

/// Render the paired comparison CSVs: one per-seed table, one summary.
pub fn render_comparison(summary: &ComparisonSummary) -> (String, String) {
    let mut rows = summary.rows.clone();
    rows.sort_by_key(|r| r.seed);
    let mut per_seed = String::from(
        "seed,psma_nats,scma_nats,pdnoma_nats,psma_over_scma,psma_over_pdnoma,gain_digest\n",
    );
    for r in &rows {
        writeln!(
            per_seed,
            "{},{},{},{},{},{},{:016x}",
            r.seed,
            r.psma,
            r.scma,
            r.pdnoma,
            r.psma / r.scma,
            r.psma / r.pdnoma,
            r.gain_digest
        )
        .expect("string write cannot fail");
    }
    let mut totals = String::from("metric,value,stderr\n");
    let lines = [
        ("mean_psma_nats", summary.mean_psma, 0.0),
        ("mean_scma_nats", summary.mean_scma, 0.0),
        ("mean_pdnoma_nats", summary.mean_pdnoma, 0.0),
        (
            "ratio_psma_over_scma",
            summary.ratio_psma_scma.0,
            summary.ratio_psma_scma.1,
        ),
        (
            "ratio_psma_over_pdnoma",
            summary.ratio_psma_pdnoma.0,
            summary.ratio_psma_pdnoma.1,
        ),
    ];
    for (name, value, se) in lines {
        writeln!(totals, "{name},{value},{se}").expect("string write cannot fail");
    }
    (per_seed, totals)
}

/// Write `per_seed.csv` and `comparison.csv` under `dir`.
pub fn emit_comparison(
    summary: &ComparisonSummary,
    dir: impl AsRef<Path>,
) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let (per_seed, totals) = render_comparison(summary);
    let per_seed_path = dir.join("per_seed.csv");
    let totals_path = dir.join("comparison.csv");
    std::fs::write(&per_seed_path, per_seed)?;
    std::fs::write(&totals_path, totals)?;
    Ok((per_seed_path, totals_path))
}
