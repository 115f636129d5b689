//! SINR formulas for the three schemes, detection ordering and the SIC
//! decodability check.

use super::Allocation;
use crate::error::{Error, Result};
use crate::scenario::{ChannelRealization, CodebookStructure, Scheme};

/// Average channel gain of user `m` over codebook `c`'s support, the
/// criterion by which same-codebook users are ordered for SIC.
pub fn avg_codebook_gain(
    channel: &ChannelRealization,
    structure: &CodebookStructure,
    f: usize,
    m: usize,
    c: usize,
) -> f64 {
    let subs = &structure.codebook_subcarriers[c];
    let total: f64 = subs.iter().map(|&n| channel.gain[f][m][n]).sum();
    total / subs.len() as f64
}

/// Effective received gain of a stream on codebook `c` from BS `b` at user
/// `u`: the eta-weighted sum of subcarrier gains.
pub fn effective_codebook_gain(
    channel: &ChannelRealization,
    structure: &CodebookStructure,
    b: usize,
    u: usize,
    c: usize,
) -> f64 {
    structure.codebook_subcarriers[c]
        .iter()
        .map(|&n| structure.eta[n][c] * channel.gain[b][u][n])
        .sum()
}

/// Ordering key for SIC inside a codebook: ascending average gain, ties
/// broken by ascending user index, so the order is total.
fn order_key(
    channel: &ChannelRealization,
    structure: &CodebookStructure,
    f: usize,
    m: usize,
    c: usize,
) -> (f64, usize) {
    (avg_codebook_gain(channel, structure, f, m, c), m)
}

fn key_less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Users of cell `f` assigned codebook `c` in decode order: worst average
/// gain first, ties by ascending user index. Empty when nobody is assigned.
pub fn detection_order(
    alloc: &Allocation,
    structure: &CodebookStructure,
    channel: &ChannelRealization,
    f: usize,
    c: usize,
) -> Vec<usize> {
    let mut users = alloc.assigned_users(f, c);
    users.sort_by(|&a, &b| {
        let ka = order_key(channel, structure, f, a, c);
        let kb = order_key(channel, structure, f, b, c);
        ka.0.partial_cmp(&kb.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(ka.1.cmp(&kb.1))
    });
    users
}

/// Same-codebook same-cell power that remains as interference once the
/// signals of everyone decoded before `reference` have been cancelled:
/// the powers of assigned users strictly after `reference` in decode order.
fn residual_superposed_power(
    alloc: &Allocation,
    channel: &ChannelRealization,
    structure: &CodebookStructure,
    f: usize,
    reference: usize,
    c: usize,
) -> f64 {
    let ref_key = order_key(channel, structure, f, reference, c);
    alloc
        .assigned_users(f, c)
        .into_iter()
        .filter(|&i| i != reference && key_less(ref_key, order_key(channel, structure, f, i, c)))
        .map(|i| alloc.p[i][c])
        .sum()
}

/// Interference received at user `m` from codebook `c` streams of every
/// other cell.
fn intercell_interference(
    alloc: &Allocation,
    channel: &ChannelRealization,
    structure: &CodebookStructure,
    f: usize,
    m: usize,
    c: usize,
) -> f64 {
    let mut acc = 0.0;
    for fp in 0..alloc.num_cells {
        if fp == f {
            continue;
        }
        for mp in alloc.assigned_users(fp, c) {
            acc += alloc.p[mp][c] * effective_codebook_gain(channel, structure, fp, m, c);
        }
    }
    acc
}

/// SINR of `owner`'s codebook-`c` stream as observed at `observer`'s
/// receiver, after the observer has cancelled everyone decoded before
/// `owner`. Inactive observers yield zero (nothing is decodable there).
fn cross_sinr_raw(
    alloc: &Allocation,
    channel: &ChannelRealization,
    structure: &CodebookStructure,
    f: usize,
    owner: usize,
    observer: usize,
    c: usize,
) -> f64 {
    if !alloc.active(f, observer, c) || !(alloc.power(owner, c) > 0.0) {
        return 0.0;
    }
    let eff = effective_codebook_gain(channel, structure, f, observer, c);
    let numerator = alloc.p[owner][c] * eff;
    let denominator = channel.noise[observer]
        + intercell_interference(alloc, channel, structure, f, observer, c)
        + eff * residual_superposed_power(alloc, channel, structure, f, owner, c);
    numerator / denominator
}

/// SINR of user `m`'s own stream on codebook `c` in cell `f`.
///
/// Same-cell interference comes from users with better (or tie-broken
/// better) average gain, whose signals are decoded after `m` and therefore
/// cannot be cancelled; other cells interfere through codebook-`c` reuse
/// only. Unassigned entries report zero.
pub fn sinr_psma(
    alloc: &Allocation,
    channel: &ChannelRealization,
    structure: &CodebookStructure,
    f: usize,
    m: usize,
    c: usize,
) -> f64 {
    cross_sinr_raw(alloc, channel, structure, f, m, m, c)
}

/// SINR of `m_prime`'s stream measured at user `m`'s receiver, the quantity
/// that must dominate `m_prime`'s own SINR for `m` to cancel that stream.
///
/// Both users must share codebook `c` in cell `f`.
pub fn sinr_cross(
    alloc: &Allocation,
    channel: &ChannelRealization,
    structure: &CodebookStructure,
    f: usize,
    m_prime: usize,
    m: usize,
    c: usize,
) -> Result<f64> {
    if !alloc.active(f, m_prime, c) || !alloc.active(f, m, c) {
        return Err(Error::Domain(format!(
            "users {m_prime} and {m} do not share codebook {c} in cell {f}"
        )));
    }
    Ok(cross_sinr_raw(alloc, channel, structure, f, m_prime, m, c))
}

/// SINR under the exclusive-codebook discipline: no same-cell codebook reuse,
/// so the only interference is codebook-`c` reuse in other cells.
pub fn sinr_scma(
    alloc: &Allocation,
    channel: &ChannelRealization,
    structure: &CodebookStructure,
    f: usize,
    m: usize,
    c: usize,
) -> Result<f64> {
    if alloc.assigned_users(f, c).len() > 1 {
        return Err(Error::Domain(format!(
            "codebook {c} reused inside cell {f}: exclusive-codebook contract violated"
        )));
    }
    if !alloc.active(f, m, c) || !(alloc.power(m, c) > 0.0) {
        return Ok(0.0);
    }
    let numerator = alloc.p[m][c] * effective_codebook_gain(channel, structure, f, m, c);
    let denominator = channel.noise[m] + intercell_interference(alloc, channel, structure, f, m, c);
    Ok(numerator / denominator)
}

/// Per-subcarrier SINR for the PD-NOMA baseline, written directly against
/// the subcarrier gains: same-cell users with better per-subcarrier gain
/// (index tie-break) remain as interference, other cells interfere with all
/// their subcarrier-`n` power.
pub fn sinr_pdnoma(
    alloc: &Allocation,
    channel: &ChannelRealization,
    f: usize,
    m: usize,
    n: usize,
) -> f64 {
    if !alloc.active(f, m, n) || !(alloc.power(m, n) > 0.0) {
        return 0.0;
    }
    let own_gain = channel.gain[f][m][n];
    let my_key = (channel.gain[f][m][n], m);
    let mut residual = 0.0;
    for j in alloc.assigned_users(f, n) {
        if j == m {
            continue;
        }
        let key = (channel.gain[f][j][n], j);
        if key_less(my_key, key) {
            residual += alloc.p[j][n];
        }
    }
    let mut intercell = 0.0;
    for fp in 0..alloc.num_cells {
        if fp == f {
            continue;
        }
        for j in alloc.assigned_users(fp, n) {
            intercell += alloc.p[j][n] * channel.gain[fp][m][n];
        }
    }
    let denominator = channel.noise[m] + own_gain * residual + intercell;
    alloc.p[m][n] * own_gain / denominator
}

/// Per-entry SINRs and rates plus the system sum rate, in nats.
#[derive(Debug, Clone)]
pub struct SinrReport {
    /// `gamma[m][c]` (codebook axis; subcarrier axis for PD-NOMA).
    pub gamma: Vec<Vec<f64>>,
    /// `rate[m][c] = ln(1 + gamma[m][c])`.
    pub rate: Vec<Vec<f64>>,
    /// Sum of each user's entry rates.
    pub per_user_rate: Vec<f64>,
    /// Total over all cells, users and entries.
    pub sum_rate: f64,
}

/// Evaluate every SINR and rate for the allocation's scheme.
pub fn sum_rate(
    alloc: &Allocation,
    channel: &ChannelRealization,
    structure: &CodebookStructure,
) -> Result<SinrReport> {
    let num_users = alloc.num_users();
    let num_entries = alloc.num_codebooks();
    let mut gamma = vec![vec![0.0; num_entries]; num_users];
    for m in 0..num_users {
        let f = alloc.user_cell[m];
        for c in 0..num_entries {
            if !alloc.q[m][c] {
                continue;
            }
            gamma[m][c] = match alloc.scheme {
                Scheme::Psma => sinr_psma(alloc, channel, structure, f, m, c),
                Scheme::Scma => sinr_scma(alloc, channel, structure, f, m, c)?,
                Scheme::Pdnoma => sinr_pdnoma(alloc, channel, f, m, c),
            };
        }
    }
    let rate: Vec<Vec<f64>> = gamma
        .iter()
        .map(|row| row.iter().map(|&g| (1.0 + g).ln()).collect())
        .collect();
    let per_user_rate: Vec<f64> = rate.iter().map(|row| row.iter().sum()).collect();
    let sum_rate = per_user_rate.iter().sum();
    Ok(SinrReport {
        gamma,
        rate,
        per_user_rate,
        sum_rate,
    })
}

/// Result of one ordered-pair SIC decodability check.
#[derive(Debug, Clone)]
pub struct SicPairCheck {
    pub cell: usize,
    pub codebook: usize,
    /// User with the better average gain, which must decode `worse`'s stream.
    pub better: usize,
    /// User whose stream gets decoded and cancelled.
    pub worse: usize,
    /// SINR of `worse`'s stream at `better`'s receiver.
    pub gamma_at_better: f64,
    /// `q[better] *` SINR of `worse`'s stream at its own receiver.
    pub gamma_at_worse: f64,
    pub satisfied: bool,
    /// `gamma_at_better - gamma_at_worse`; nonnegative when decodable.
    pub slack: f64,
}

/// Check the SIC decode condition for every ordered same-codebook same-cell
/// pair: each assigned stream must be decodable at every better-ranked user
/// of its codebook. Pairs whose better user is unassigned are trivially
/// satisfied (there is nothing to decode there).
pub fn sic_feasible(
    alloc: &Allocation,
    channel: &ChannelRealization,
    structure: &CodebookStructure,
) -> Vec<SicPairCheck> {
    let mut checks = Vec::new();
    for f in 0..alloc.num_cells {
        for c in 0..alloc.num_codebooks() {
            let assigned = alloc.assigned_users(f, c);
            if assigned.is_empty() {
                continue;
            }
            for &worse in &assigned {
                let worse_key = order_key(channel, structure, f, worse, c);
                for better in alloc
                    .user_cell
                    .iter()
                    .enumerate()
                    .filter(|(u, &cell)| cell == f && *u != worse)
                    .map(|(u, _)| u)
                {
                    let better_key = order_key(channel, structure, f, better, c);
                    if !key_less(worse_key, better_key) {
                        continue;
                    }
                    let q_better = alloc.q[better][c];
                    let gamma_at_better =
                        cross_sinr_raw(alloc, channel, structure, f, worse, better, c);
                    let gamma_at_worse = if q_better {
                        cross_sinr_raw(alloc, channel, structure, f, worse, worse, c)
                    } else {
                        0.0
                    };
                    let slack = gamma_at_better - gamma_at_worse;
                    checks.push(SicPairCheck {
                        cell: f,
                        codebook: c,
                        better,
                        worse,
                        gamma_at_better,
                        gamma_at_worse,
                        satisfied: slack >= 0.0,
                        slack,
                    });
                }
            }
        }
    }
    checks
}
