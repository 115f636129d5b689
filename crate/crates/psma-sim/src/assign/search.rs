//! Deterministic poll search over binary assignments.
//!
//! The neighborhood of an incumbent consists of single-bit flips, moves of a
//! user between codebooks, and pairwise codebook exchanges between users.
//! The best feasible improving neighbor is accepted; when a full poll finds
//! none, the poll set shrinks to flips only, and a stall there stops the
//! search. The incumbent is never discarded, so the returned objective is at
//! least the starting one.
//!
//! Candidates are ranked with a per-codebook incremental evaluator (a move
//! only perturbs the rates of the codebooks it touches); the returned
//! incumbent is re-scored through the public rate path, and the start is
//! kept instead if rounding ever put it ahead.

use super::{check_feasible, AssignmentCandidate, BUDGET_GRACE};
use crate::error::{Error, Result};
use crate::phy::{avg_codebook_gain, effective_codebook_gain, sum_rate, Allocation};
use crate::scenario::{ChannelRealization, CodebookStructure, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Move {
    Flip {
        user: usize,
        codebook: usize,
    },
    Shift {
        user: usize,
        from: usize,
        to: usize,
    },
    /// Retire one user's entry in favor of another user's candidate entry.
    Replace {
        off_user: usize,
        off_cb: usize,
        on_user: usize,
        on_cb: usize,
    },
    Exchange {
        user_a: usize,
        cb_a: usize,
        user_b: usize,
        cb_b: usize,
    },
}

impl Move {
    fn codebooks(&self) -> (usize, Option<usize>) {
        match *self {
            Move::Flip { codebook, .. } => (codebook, None),
            Move::Shift { from, to, .. } => (from, Some(to)),
            Move::Replace { off_cb, on_cb, .. } => (off_cb, Some(on_cb)),
            Move::Exchange { cb_a, cb_b, .. } => (cb_a, Some(cb_b)),
        }
    }
}

struct Evaluator<'a> {
    structure: &'a CodebookStructure,
    config: &'a ScenarioConfig,
    /// `eff[f][m][c]`: effective codebook gain from BS `f` at user `m`.
    eff: Vec<Vec<Vec<f64>>>,
    /// `key[m][c]`: decode-order key of user `m` on codebook `c` in its own
    /// cell.
    key: Vec<Vec<(f64, usize)>>,
    noise: Vec<f64>,
    num_cells: usize,
}

impl<'a> Evaluator<'a> {
    fn new(
        channel: &'a ChannelRealization,
        structure: &'a CodebookStructure,
        config: &'a ScenarioConfig,
        user_cell: &[usize],
        num_cells: usize,
    ) -> Self {
        let num_users = user_cell.len();
        let num_codebooks = structure.num_codebooks();
        let mut eff = vec![vec![vec![0.0; num_codebooks]; num_users]; num_cells];
        for f in 0..num_cells {
            for m in 0..num_users {
                for c in 0..num_codebooks {
                    eff[f][m][c] = effective_codebook_gain(channel, structure, f, m, c);
                }
            }
        }
        let mut key = vec![vec![(0.0, 0); num_codebooks]; num_users];
        for (m, &f) in user_cell.iter().enumerate() {
            for c in 0..num_codebooks {
                key[m][c] = (avg_codebook_gain(channel, structure, f, m, c), m);
            }
        }
        Evaluator {
            structure,
            config,
            eff,
            key,
            noise: channel.noise.clone(),
            num_cells,
        }
    }

    /// Sum of all entry rates on codebook `c`.
    fn codebook_rate(&self, alloc: &Allocation, c: usize) -> f64 {
        let mut users: Vec<(usize, usize, f64)> = Vec::with_capacity(8);
        for m in 0..alloc.num_users() {
            if alloc.q[m][c] {
                users.push((alloc.user_cell[m], m, alloc.p[m][c]));
            }
        }
        if users.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        for &(f, m, p) in &users {
            let mut den = self.noise[m];
            let mut superposed = 0.0;
            for &(fo, mo, po) in &users {
                if mo == m {
                    continue;
                }
                if fo != f {
                    den += po * self.eff[fo][m][c];
                } else if self.key[m][c] < self.key[mo][c] {
                    superposed += po;
                }
            }
            den += self.eff[f][m][c] * superposed;
            total += (1.0 + p * self.eff[f][m][c] / den).ln();
        }
        total
    }

    #[cfg(test)]
    fn total_rate(&self, alloc: &Allocation) -> f64 {
        (0..alloc.num_codebooks())
            .map(|c| self.codebook_rate(alloc, c))
            .sum()
    }

    /// Decode-order check for every pair on codebook `c`, using the material
    /// counting rule. Pair residuals on `c` depend only on `c`'s assignments
    /// and powers, so a move needs to re-check just the codebooks it touched.
    fn codebook_sic_ok(&self, alloc: &Allocation, c: usize) -> bool {
        let rel_tol = self.config.epsilon;
        for f in 0..self.num_cells {
            let mut members: Vec<(usize, f64)> = Vec::with_capacity(4);
            for m in 0..alloc.num_users() {
                if alloc.user_cell[m] == f && alloc.q[m][c] {
                    members.push((m, alloc.p[m][c]));
                }
            }
            if members.len() < 2 {
                continue;
            }
            members.sort_by(|a, b| {
                self.key[a.0][c]
                    .partial_cmp(&self.key[b.0][c])
                    .expect("gains are finite")
            });
            // Interference at an observer from other cells' streams on c.
            let intercell = |obs: usize| -> f64 {
                let mut acc = 0.0;
                for mo in 0..alloc.num_users() {
                    let fo = alloc.user_cell[mo];
                    if fo != f && alloc.q[mo][c] {
                        acc += alloc.p[mo][c] * self.eff[fo][obs][c];
                    }
                }
                acc
            };
            for wi in 0..members.len() {
                let (worse, p_worse) = members[wi];
                if !(p_worse > 0.0) {
                    continue;
                }
                let superposed: f64 = members[wi + 1..].iter().map(|&(_, p)| p).sum();
                for &(better, _) in &members[wi + 1..] {
                    let eff_b = self.eff[f][better][c];
                    let eff_w = self.eff[f][worse][c];
                    let g_at_better = p_worse * eff_b
                        / (self.noise[better] + intercell(better) + eff_b * superposed);
                    let g_at_worse = p_worse * eff_w
                        / (self.noise[worse] + intercell(worse) + eff_w * superposed);
                    let scale = g_at_better.max(g_at_worse);
                    if scale > super::SIC_VACUOUS_GAMMA
                        && g_at_better - g_at_worse < -rel_tol * scale
                    {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Budget, load and reuse feasibility limited to what `mv` can perturb.
    fn move_feasible(&self, alloc: &Allocation, mv: Move) -> bool {
        let cells: Vec<usize> = match mv {
            Move::Flip { user, .. } | Move::Shift { user, .. } => vec![alloc.user_cell[user]],
            Move::Replace {
                off_user, on_user, ..
            } => {
                let (fa, fb) = (alloc.user_cell[off_user], alloc.user_cell[on_user]);
                if fa == fb {
                    vec![fa]
                } else {
                    vec![fa, fb]
                }
            }
            Move::Exchange { user_a, user_b, .. } => {
                let (fa, fb) = (alloc.user_cell[user_a], alloc.user_cell[user_b]);
                if fa == fb {
                    vec![fa]
                } else {
                    vec![fa, fb]
                }
            }
        };
        let (c1, c2) = mv.codebooks();
        for &f in &cells {
            if alloc.cell_power(f) > self.config.p_max[f] * (1.0 + BUDGET_GRACE) {
                return false;
            }
            for c in std::iter::once(c1).chain(c2) {
                if alloc.assigned_users(f, c).len() > self.config.l_t {
                    return false;
                }
            }
            let mut subcarriers: Vec<usize> = self.structure.codebook_subcarriers[c1].clone();
            if let Some(c2) = c2 {
                subcarriers.extend(&self.structure.codebook_subcarriers[c2]);
            }
            subcarriers.sort_unstable();
            subcarriers.dedup();
            for n in subcarriers {
                let mut used = 0;
                for c in 0..alloc.num_codebooks() {
                    if self.structure.rho[n][c] {
                        used += alloc.assigned_users(f, c).len();
                    }
                }
                if used > self.config.k {
                    return false;
                }
            }
        }
        true
    }
}

fn apply(alloc: &mut Allocation, powers: &[Vec<f64>], mv: Move) {
    fn set(alloc: &mut Allocation, powers: &[Vec<f64>], m: usize, c: usize, on: bool) {
        alloc.q[m][c] = on;
        alloc.p[m][c] = if on { powers[m][c] } else { 0.0 };
    }
    match mv {
        Move::Flip { user, codebook } => {
            let on = !alloc.q[user][codebook];
            set(alloc, powers, user, codebook, on);
        }
        Move::Shift { user, from, to } => {
            set(alloc, powers, user, from, false);
            set(alloc, powers, user, to, true);
        }
        Move::Replace {
            off_user,
            off_cb,
            on_user,
            on_cb,
        } => {
            set(alloc, powers, off_user, off_cb, false);
            set(alloc, powers, on_user, on_cb, true);
        }
        Move::Exchange {
            user_a,
            cb_a,
            user_b,
            cb_b,
        } => {
            set(alloc, powers, user_a, cb_a, false);
            set(alloc, powers, user_b, cb_b, false);
            set(alloc, powers, user_a, cb_b, true);
            set(alloc, powers, user_b, cb_a, true);
        }
    }
}

fn undo(alloc: &mut Allocation, powers: &[Vec<f64>], mv: Move) {
    match mv {
        Move::Flip { .. } => apply(alloc, powers, mv),
        Move::Shift { user, from, to } => apply(
            alloc,
            powers,
            Move::Shift {
                user,
                from: to,
                to: from,
            },
        ),
        Move::Replace {
            off_user,
            off_cb,
            on_user,
            on_cb,
        } => apply(
            alloc,
            powers,
            Move::Replace {
                off_user: on_user,
                off_cb: on_cb,
                on_user: off_user,
                on_cb: off_cb,
            },
        ),
        Move::Exchange {
            user_a,
            cb_a,
            user_b,
            cb_b,
        } => apply(
            alloc,
            powers,
            Move::Exchange {
                user_a,
                cb_a: cb_b,
                user_b,
                cb_b: cb_a,
            },
        ),
    }
}

/// Candidate moves in deterministic lexicographic order.
fn poll_moves(alloc: &Allocation, flips_only: bool) -> Vec<Move> {
    let m_count = alloc.num_users();
    let c_count = alloc.num_codebooks();
    let mut moves = Vec::new();
    for m in 0..m_count {
        for c in 0..c_count {
            moves.push(Move::Flip {
                user: m,
                codebook: c,
            });
        }
    }
    if flips_only {
        return moves;
    }
    for m in 0..m_count {
        for from in 0..c_count {
            if !alloc.q[m][from] {
                continue;
            }
            for to in 0..c_count {
                if to != from && !alloc.q[m][to] {
                    moves.push(Move::Shift { user: m, from, to });
                }
            }
        }
    }
    for off_user in 0..m_count {
        for off_cb in 0..c_count {
            if !alloc.q[off_user][off_cb] {
                continue;
            }
            for on_user in 0..m_count {
                if on_user == off_user {
                    continue;
                }
                for on_cb in 0..c_count {
                    if !alloc.q[on_user][on_cb] {
                        moves.push(Move::Replace {
                            off_user,
                            off_cb,
                            on_user,
                            on_cb,
                        });
                    }
                }
            }
        }
    }
    for a in 0..m_count {
        for b in a + 1..m_count {
            for cb_a in 0..c_count {
                if !alloc.q[a][cb_a] || alloc.q[b][cb_a] {
                    continue;
                }
                for cb_b in 0..c_count {
                    if cb_b == cb_a || !alloc.q[b][cb_b] || alloc.q[a][cb_b] {
                        continue;
                    }
                    moves.push(Move::Exchange {
                        user_a: a,
                        cb_a,
                        user_b: b,
                        cb_b,
                    });
                }
            }
        }
    }
    moves
}

/// Poll to a stall from one starting assignment; returns the incumbent and
/// its incremental objective.
fn poll_to_stall(
    start: &Allocation,
    powers: &[Vec<f64>],
    eval: &Evaluator,
    check_sic: bool,
) -> (Allocation, f64) {
    let mut incumbent = start.clone();
    let mut col_rates: Vec<f64> = (0..incumbent.num_codebooks())
        .map(|c| eval.codebook_rate(&incumbent, c))
        .collect();
    let mut objective: f64 = col_rates.iter().sum();

    let mut flips_only = false;
    loop {
        let moves = poll_moves(&incumbent, flips_only);
        let improve_floor = objective + 1e-12 * objective.abs().max(1.0);
        let mut best: Option<(Move, f64)> = None;
        for mv in moves {
            apply(&mut incumbent, powers, mv);
            let (c1, c2) = mv.codebooks();
            let feasible = eval.move_feasible(&incumbent, mv)
                && (!check_sic
                    || (eval.codebook_sic_ok(&incumbent, c1)
                        && c2.map_or(true, |c| eval.codebook_sic_ok(&incumbent, c))));
            if feasible {
                let mut value = objective - col_rates[c1] + eval.codebook_rate(&incumbent, c1);
                if let Some(c2) = c2 {
                    value += eval.codebook_rate(&incumbent, c2) - col_rates[c2];
                }
                if value > improve_floor && best.map_or(true, |(_, b)| value > b) {
                    best = Some((mv, value));
                }
            }
            undo(&mut incumbent, powers, mv);
        }
        match best {
            Some((mv, value)) => {
                apply(&mut incumbent, powers, mv);
                let (c1, c2) = mv.codebooks();
                col_rates[c1] = eval.codebook_rate(&incumbent, c1);
                if let Some(c2) = c2 {
                    col_rates[c2] = eval.codebook_rate(&incumbent, c2);
                }
                objective = value;
                flips_only = false;
            }
            None if !flips_only => flips_only = true,
            None => break,
        }
    }
    (incumbent, objective)
}

/// Secondary start: admit entries by descending standalone rate density
/// (rate per watt against bare noise) while the constraint counters allow,
/// which lands the poll in a different basin than a sparse incumbent.
fn density_start(
    powers: &[Vec<f64>],
    template: &Allocation,
    eval: &Evaluator,
    check_sic: bool,
    config: &ScenarioConfig,
    structure: &CodebookStructure,
) -> Allocation {
    let mut order: Vec<(usize, usize, f64)> = Vec::new();
    for m in 0..template.num_users() {
        let f = template.user_cell[m];
        for c in 0..template.num_codebooks() {
            let p = powers[m][c];
            if p > 0.0 {
                let rate = (1.0 + p * eval.eff[f][m][c] / eval.noise[m]).ln();
                order.push((m, c, rate / p));
            }
        }
    }
    order.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap_or(std::cmp::Ordering::Equal));

    let mut alloc = Allocation::empty(
        template.scheme,
        template.user_cell.clone(),
        template.num_cells,
        template.num_codebooks(),
    );
    let mut spent = vec![0.0; template.num_cells];
    let mut lt_used = vec![vec![0usize; template.num_codebooks()]; template.num_cells];
    let mut k_used = vec![vec![0usize; structure.num_subcarriers()]; template.num_cells];
    for (m, c, _) in order {
        let f = template.user_cell[m];
        if spent[f] + powers[m][c] > config.p_max[f] * (1.0 + BUDGET_GRACE)
            || lt_used[f][c] >= config.l_t
            || structure.codebook_subcarriers[c]
                .iter()
                .any(|&n| k_used[f][n] >= config.k)
        {
            continue;
        }
        alloc.q[m][c] = true;
        alloc.p[m][c] = powers[m][c];
        if check_sic && !eval.codebook_sic_ok(&alloc, c) {
            alloc.q[m][c] = false;
            alloc.p[m][c] = 0.0;
            continue;
        }
        spent[f] += powers[m][c];
        lt_used[f][c] += 1;
        for &n in &structure.codebook_subcarriers[c] {
            k_used[f][n] += 1;
        }
    }
    alloc
}

/// Improve a feasible assignment by polling its flip/shift/replace/exchange
/// neighborhood against the fixed candidate powers `powers[m][c]`.
///
/// Polls run from the caller's incumbent and from a deterministic
/// density-greedy start; the better stall point wins. The result is scored
/// through the public rate path and never falls below the incumbent.
pub fn assign_codebooks(
    powers: &[Vec<f64>],
    q0: &Allocation,
    channel: &ChannelRealization,
    structure: &CodebookStructure,
    config: &ScenarioConfig,
) -> Result<AssignmentCandidate> {
    let mut start = q0.clone();
    for m in 0..start.num_users() {
        for c in 0..start.num_codebooks() {
            start.p[m][c] = if start.q[m][c] { powers[m][c] } else { 0.0 };
        }
    }
    let report = check_feasible(&start, channel, structure, config);
    if !report.feasible {
        return Err(Error::Infeasible(
            "starting assignment violates its constraints".into(),
        ));
    }

    let eval = Evaluator::new(
        channel,
        structure,
        config,
        &start.user_cell,
        start.num_cells,
    );
    // Uniform splits keep every single-cell pair decodable regardless of
    // powers; with several cells (or custom splits) the decode order has to
    // be re-checked on the codebooks a move touches.
    let check_sic = !structure.is_uniform_eta() || start.num_cells > 1;

    let (from_q0, value_q0) = poll_to_stall(&start, powers, &eval, check_sic);
    let alt = density_start(powers, &start, &eval, check_sic, config, structure);
    let (from_alt, value_alt) = poll_to_stall(&alt, powers, &eval, check_sic);
    let incumbent = if value_alt > value_q0 {
        from_alt
    } else {
        from_q0
    };

    // Score through the public rate path; keep the start if incremental
    // rounding ever put it ahead.
    let found = AssignmentCandidate::evaluate(incumbent, channel, structure, config)?;
    let baseline = sum_rate(&start, channel, structure)?.sum_rate;
    if found.objective >= baseline {
        Ok(found)
    } else {
        AssignmentCandidate::evaluate(start, channel, structure, config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scheme;

    fn config(num_users: usize, num_codebooks: usize, l_t: usize) -> ScenarioConfig {
        ScenarioConfig {
            num_bs: 1,
            num_users,
            num_subcarriers: 4,
            num_codebooks,
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

    fn fixture(num_users: usize) -> (ChannelRealization, CodebookStructure) {
        let gain: Vec<Vec<f64>> = (0..num_users)
            .map(|m| {
                (0..4)
                    .map(|n| 0.2 + 0.7 * m as f64 + 0.13 * n as f64)
                    .collect()
            })
            .collect();
        let channel = ChannelRealization {
            gain: vec![gain],
            noise: vec![0.1; num_users],
        };
        let structure = CodebookStructure {
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
        };
        (channel, structure)
    }

    #[test]
    fn incremental_evaluator_matches_public_rate() {
        let config = config(3, 2, 2);
        let (channel, structure) = fixture(3);
        let mut alloc = Allocation::empty(Scheme::Psma, vec![0, 0, 0], 1, 2);
        alloc.q[0][0] = true;
        alloc.p[0][0] = 0.8;
        alloc.q[1][0] = true;
        alloc.p[1][0] = 0.4;
        alloc.q[2][1] = true;
        alloc.p[2][1] = 1.1;
        let eval = Evaluator::new(&channel, &structure, &config, &alloc.user_cell, 1);
        let fast = eval.total_rate(&alloc);
        let official = sum_rate(&alloc, &channel, &structure).unwrap().sum_rate;
        assert!((fast - official).abs() < 1e-12, "{fast} vs {official}");
    }

    #[test]
    fn single_user_single_codebook_gets_assigned() {
        let config = config(1, 1, 1);
        let channel = ChannelRealization {
            gain: vec![vec![vec![1.0, 1.2, 0.0, 0.0]]],
            noise: vec![0.1],
        };
        let structure = CodebookStructure {
            rho: vec![vec![true], vec![true], vec![false], vec![false]],
            eta: vec![vec![0.5], vec![0.5], vec![0.0], vec![0.0]],
            codebook_subcarriers: vec![vec![0, 1]],
        };
        let q0 = Allocation::empty(Scheme::Psma, vec![0], 1, 1);
        let powers = vec![vec![2.0]];
        let cand = assign_codebooks(&powers, &q0, &channel, &structure, &config).unwrap();
        assert!(
            cand.alloc.q[0][0],
            "the only profitable entry must be taken"
        );
        assert!(cand.feasible);
        assert!(cand.objective > 0.0);
    }

    #[test]
    fn result_never_degrades_the_incumbent() {
        let config = config(3, 2, 2);
        let (channel, structure) = fixture(3);
        let mut q0 = Allocation::empty(Scheme::Psma, vec![0, 0, 0], 1, 2);
        q0.q[0][0] = true;
        q0.q[1][1] = true;
        let powers = vec![vec![0.9, 0.7]; 3];
        let baseline = {
            let mut masked = q0.clone();
            for m in 0..3 {
                for c in 0..2 {
                    masked.p[m][c] = if masked.q[m][c] { powers[m][c] } else { 0.0 };
                }
            }
            sum_rate(&masked, &channel, &structure).unwrap().sum_rate
        };
        let cand = assign_codebooks(&powers, &q0, &channel, &structure, &config).unwrap();
        assert!(cand.feasible);
        assert!(cand.objective >= baseline);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let config = config(3, 2, 1);
        let (channel, structure) = fixture(3);
        let mut q0 = Allocation::empty(Scheme::Psma, vec![0, 0, 0], 1, 2);
        q0.q[0][0] = true;
        q0.q[1][0] = true; // two users on one codebook with l_t = 1
        let powers = vec![vec![0.5, 0.5]; 3];
        assert!(assign_codebooks(&powers, &q0, &channel, &structure, &config).is_err());
    }
}
