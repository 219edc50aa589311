//! Brute-force references: every LP written out with all of its columns.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fairness::{allocation_count, enumerate_allocations};
use crate::lpengine::{dense_lp_solve, DenseLp, RowKind, Sense};
use crate::model::{matching_welfare, Instance, Matching, Objective, Rat, WelfareMeasure};
use crate::twoebm::all_matchings;

pub const ENUMERATION_MAX_N: usize = 8;
pub const FULL_LP_MAX_N: usize = 4;
pub const GENERAL_EXISTENCE_CAP: u128 = 100_000;

/// All `n!` matchings in lexicographic order.
pub fn enumerate_matchings(n: usize) -> Result<impl Iterator<Item = Matching>> {
    if n > ENUMERATION_MAX_N {
        return Err(Error::CapExceeded { states: (1..=n as u128).product(), cap: 40_320 });
    }
    Ok(all_matchings(n))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReferenceProblem {
    Welfare(Objective),
    /// Minimum total expected subsidy with per-outcome payments.
    Subsidy,
    /// Maximum minimum expected utility when payments sum to `-rent`.
    Utility { rent: f64 },
}

#[derive(Clone, Debug)]
pub struct ReferenceOptimum {
    pub value: f64,
    /// Positive probabilities of the optimal vertex.
    pub x: Vec<(Matching, f64)>,
    /// Positive payment mass `t_i(b)` as `(agent, matching, value)`.
    pub t: Vec<(usize, Matching, f64)>,
}

const SUPPORT_TOL: f64 = 1e-12;

/// Solves the complete primal LP of a welfare or payment problem for a
/// matching instance with at most four agents.
pub fn full_lp_reference(instance: &Instance, problem: ReferenceProblem) -> Result<ReferenceOptimum> {
    let n = instance.require_matching()?;
    if n > FULL_LP_MAX_N {
        return Err(Error::CapExceeded { states: (1..=n as u128).product(), cap: 24 });
    }
    let v = instance.values_f64();
    let mut matchings: Vec<Matching> = all_matchings(n).collect();
    if problem == ReferenceProblem::Welfare(Objective::LogNash) {
        matchings.retain(|b| (0..n).all(|i| v[i][b.item_of(i)] > 0.0));
        if matchings.is_empty() {
            return Err(Error::LogNashUnsupportable);
        }
    }
    let nb = matchings.len();
    let with_t = !matches!(problem, ReferenceProblem::Welfare(_));
    let with_q = matches!(problem, ReferenceProblem::Utility { .. });
    // columns: x(b) for each b, then t_i(b) at nb + b*n + i, then q
    let n_t = if with_t { nb * n } else { 0 };
    let n_vars = nb + n_t + usize::from(with_q);
    let t_col = |b: usize, i: usize| nb + b * n + i;
    let q_col = nb + n_t;

    let mut objective = vec![0.0; n_vars];
    match problem {
        ReferenceProblem::Welfare(obj) => {
            for (b, m) in matchings.iter().enumerate() {
                objective[b] = matching_welfare(v, m, WelfareMeasure::from(obj));
            }
        }
        ReferenceProblem::Subsidy => {
            for c in objective.iter_mut().skip(nb) {
                *c = -1.0;
            }
        }
        ReferenceProblem::Utility { .. } => objective[q_col] = 1.0,
    }
    let mut lp = DenseLp::new(Sense::Maximize, objective);
    let t_sign = if with_q { -1.0 } else { 1.0 };
    for i in 0..n {
        for j in 0..n {
            for k in (0..n).filter(|&k| k != i) {
                let mut row = vec![0.0; n_vars];
                for (b, m) in matchings.iter().enumerate().filter(|(_, m)| m.item_of(i) == j) {
                    row[b] = v[i][j] - v[i][m.item_of(k)];
                    if with_t {
                        row[t_col(b, i)] += t_sign;
                        row[t_col(b, k)] -= t_sign;
                    }
                }
                lp.add_row(row, RowKind::Ge, 0.0);
            }
        }
    }
    let mut convex = vec![0.0; n_vars];
    convex[..nb].iter_mut().for_each(|c| *c = 1.0);
    lp.add_row(convex, RowKind::Eq, 1.0);
    if let ReferenceProblem::Utility { rent } = problem {
        for i in 0..n {
            let mut row = vec![0.0; n_vars];
            row[q_col] = 1.0;
            for (b, m) in matchings.iter().enumerate() {
                row[b] = -v[i][m.item_of(i)];
                row[t_col(b, i)] = 1.0;
            }
            lp.add_row(row, RowKind::Le, 0.0);
        }
        let mut row = vec![0.0; n_vars];
        row[nb..nb + n_t].iter_mut().for_each(|c| *c = 1.0);
        lp.add_row(row, RowKind::Eq, rent);
        lp.set_free(q_col);
    }
    let sol = match dense_lp_solve(&lp) {
        Err(Error::Infeasible) if problem == ReferenceProblem::Welfare(Objective::LogNash) => {
            return match full_lp_reference(instance, ReferenceProblem::Welfare(Objective::Utilitarian)) {
                Ok(_) => Err(Error::LogNashUnsupportable),
                Err(e) => Err(e),
            };
        }
        other => other?,
    };
    let x = matchings
        .iter()
        .zip(&sol.x)
        .filter(|(_, &p)| p > SUPPORT_TOL)
        .map(|(m, &p)| (m.clone(), p))
        .collect();
    let mut t = Vec::new();
    if with_t {
        for (b, m) in matchings.iter().enumerate() {
            for i in 0..n {
                let val = sol.x[t_col(b, i)];
                if val > SUPPORT_TOL {
                    t.push((i, m.clone(), val));
                }
            }
        }
    }
    let value = match problem {
        ReferenceProblem::Subsidy => -sol.objective,
        _ => sol.objective,
    };
    Ok(ReferenceOptimum { value, x, t })
}

/// Whether any lottery over general allocations is iEF, decided exactly by
/// an LP over all `n^m` allocations.
pub fn ief_existence_general(instance: &Instance) -> Result<bool> {
    let n = instance.n_agents();
    let m = instance.n_items();
    let count = allocation_count(n, m);
    if count > GENERAL_EXISTENCE_CAP {
        return Err(Error::CapExceeded { states: count, cap: GENERAL_EXISTENCE_CAP });
    }
    let allocs: Vec<_> = enumerate_allocations(n, m)?.collect();
    let mut bundles_of: Vec<Vec<Vec<usize>>> = vec![Vec::new(); n];
    for a in &allocs {
        for (i, list) in bundles_of.iter_mut().enumerate() {
            if !list.iter().any(|s| s.as_slice() == a.bundle(i)) {
                list.push(a.bundle(i).to_vec());
            }
        }
    }
    let mut lp = DenseLp::new(Sense::Maximize, vec![Rat::zero(); allocs.len()]);
    for i in 0..n {
        for s in &bundles_of[i] {
            let own = instance.bundle_value(i, s);
            for k in (0..n).filter(|&k| k != i) {
                let row: Vec<Rat> = allocs
                    .iter()
                    .map(|a| if a.bundle(i) == s.as_slice() { &own - instance.bundle_value(i, a.bundle(k)) } else { Rat::zero() })
                    .collect();
                lp.add_row(row, RowKind::Ge, Rat::zero());
            }
        }
    }
    lp.add_row(vec![Rat::one(); allocs.len()], RowKind::Eq, Rat::one());
    match dense_lp_solve(&lp) {
        Ok(_) => Ok(true),
        Err(Error::Infeasible) => Ok(false),
        Err(e) => Err(e),
    }
}
