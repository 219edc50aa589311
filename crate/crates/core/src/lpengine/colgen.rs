//! Restricted-master column generation over an abstract column family.

use std::collections::BTreeSet;
use std::fmt::Debug;

use super::simplex::{dense_lp_solve, DenseLp, RowKind, Sense};
use crate::error::{Error, Result};

/// Which objective the restricted master is currently optimizing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Minimize the total violation slack; columns carry zero cost.
    Feasibility,
    /// The problem's own objective.
    Optimality,
}

/// One LP column: objective coefficient and sparse constraint coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub cost: f64,
    pub entries: Vec<(usize, f64)>,
    /// Variable without sign restriction.
    pub free: bool,
}

#[derive(Clone, Debug)]
pub struct Priced<K> {
    pub key: K,
    /// Reduced cost as computed by the oracle.
    pub reduced_cost: f64,
}

/// A maximization LP whose columns are generated on demand by a pricing
/// oracle.
pub trait ColumnProblem {
    type Key: Clone + Ord + Debug;

    fn rows(&self) -> Vec<(RowKind, f64)>;

    fn column(&self, key: &Self::Key) -> Column;

    /// Columns the master starts from.
    fn seed(&self) -> Result<Vec<Self::Key>>;

    /// Columns with positive reduced cost under the shadow prices `duals`,
    /// or an empty list as a certificate that none exceeds the tolerance.
    fn price(&self, duals: &[f64], phase: Phase, tol: f64) -> Result<Vec<Priced<Self::Key>>>;

    /// Upper bound on the full LP optimum from the restricted one and the
    /// largest reduced cost, when the problem admits one.
    fn lagrangian_bound(&self, _objective: f64, _max_reduced_cost: f64) -> Option<f64> {
        None
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ColGenOptions {
    pub tol_price: f64,
    pub phase1_tol: f64,
    pub max_iterations: usize,
}

impl ColGenOptions {
    /// Defaults for an instance with `n` agents: cap `10 n^3 + 1000`.
    pub fn for_size(n: usize) -> Self {
        Self { tol_price: 1e-7, phase1_tol: 1e-7, max_iterations: 10 * n * n * n + 1000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub objective: f64,
    pub max_reduced_cost: f64,
    pub bound: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ColGenResult<K> {
    /// Every column of the final master with its value.
    pub columns: Vec<(K, f64)>,
    pub objective: f64,
    pub duals: Vec<f64>,
    pub iterations: usize,
    pub phase1_iterations: usize,
    pub history: Vec<IterationRecord>,
}

#[derive(Clone, Debug)]
pub struct Phase1Result<K> {
    pub feasible: bool,
    pub slack_total: f64,
    pub columns: Vec<K>,
    pub iterations: usize,
}

struct Master<K> {
    keys: Vec<K>,
    cols: Vec<Column>,
    seen: BTreeSet<K>,
}

impl<K: Clone + Ord + Debug> Master<K> {
    fn new() -> Self {
        Self { keys: Vec::new(), cols: Vec::new(), seen: BTreeSet::new() }
    }

    fn add<P: ColumnProblem<Key = K>>(&mut self, problem: &P, key: K) -> bool {
        if self.seen.contains(&key) {
            return false;
        }
        self.cols.push(problem.column(&key));
        self.seen.insert(key.clone());
        self.keys.push(key);
        true
    }
}

struct Restricted {
    x: Vec<f64>,
    objective: f64,
    duals: Vec<f64>,
    slack_total: f64,
}

/// Solves the restricted master. With `with_slacks`, every row gets a
/// violation variable and the objective is to minimize their total.
fn solve_restricted(rows: &[(RowKind, f64)], cols: &[Column], with_slacks: bool) -> Result<Restricted> {
    let m = rows.len();
    // rows no current column touches are vacuous when rhs is zero
    let mut used = vec![false; m];
    for col in cols {
        for &(r, c) in &col.entries {
            if c != 0.0 {
                used[r] = true;
            }
        }
    }
    let active: Vec<usize> = (0..m).filter(|&r| used[r] || rows[r].1 != 0.0).collect();
    let mut local = vec![usize::MAX; m];
    for (idx, &r) in active.iter().enumerate() {
        local[r] = idx;
    }

    let n_slacks = if with_slacks {
        active.iter().map(|&r| if rows[r].0 == RowKind::Eq { 2 } else { 1 }).sum()
    } else {
        0
    };
    let n_vars = cols.len() + n_slacks;
    let mut objective = vec![0.0; n_vars];
    for (j, col) in cols.iter().enumerate() {
        objective[j] = if with_slacks { 0.0 } else { col.cost };
    }
    for o in objective.iter_mut().skip(cols.len()) {
        *o = -1.0;
    }
    let mut lp = DenseLp::new(Sense::Maximize, objective);
    let mut dense = vec![vec![0.0; n_vars]; active.len()];
    for (j, col) in cols.iter().enumerate() {
        for &(r, c) in &col.entries {
            if local[r] != usize::MAX {
                dense[local[r]][j] += c;
            }
        }
        if col.free {
            lp.set_free(j);
        }
    }
    if with_slacks {
        let mut s = cols.len();
        for (idx, &r) in active.iter().enumerate() {
            match rows[r].0 {
                RowKind::Ge => {
                    dense[idx][s] = 1.0;
                    s += 1;
                }
                RowKind::Le => {
                    dense[idx][s] = -1.0;
                    s += 1;
                }
                RowKind::Eq => {
                    dense[idx][s] = 1.0;
                    dense[idx][s + 1] = -1.0;
                    s += 2;
                }
            }
        }
    }
    for (idx, row) in dense.into_iter().enumerate() {
        let r = active[idx];
        lp.add_row(row, rows[r].0, rows[r].1);
    }
    let sol = dense_lp_solve(&lp)?;
    let mut duals = vec![0.0; m];
    for (idx, &r) in active.iter().enumerate() {
        duals[r] = sol.duals[idx];
    }
    let slack_total = sol.x[cols.len()..].iter().sum();
    Ok(Restricted { x: sol.x[..cols.len()].to_vec(), objective: sol.objective, duals, slack_total })
}

fn reduced_cost(col: &Column, duals: &[f64], phase: Phase) -> f64 {
    let cost = match phase {
        Phase::Feasibility => 0.0,
        Phase::Optimality => col.cost,
    };
    col.entries.iter().fold(cost, |acc, &(r, c)| acc - duals[r] * c)
}

/// Adds the oracle's columns after checking each reported reduced cost
/// against the one recomputed from the column itself.
fn absorb<P: ColumnProblem>(
    problem: &P,
    master: &mut Master<P::Key>,
    priced: Vec<Priced<P::Key>>,
    duals: &[f64],
    phase: Phase,
    tol: f64,
) -> Result<(usize, f64)> {
    let mut added = 0;
    let mut max_rc = 0.0f64;
    for p in priced {
        let col = problem.column(&p.key);
        let direct = reduced_cost(&col, duals, phase);
        if (direct - p.reduced_cost).abs() > 1e-6 * (1.0 + direct.abs()) {
            return Err(Error::InvariantViolation(format!(
                "oracle reduced cost {} disagrees with direct evaluation {} for column {:?}",
                p.reduced_cost, direct, p.key
            )));
        }
        max_rc = max_rc.max(direct);
        if direct > tol && master.add(problem, p.key) {
            added += 1;
        }
    }
    Ok((added, max_rc))
}

fn seeded<P: ColumnProblem>(problem: &P) -> Result<Master<P::Key>> {
    let mut master = Master::new();
    for key in problem.seed()? {
        master.add(problem, key);
    }
    if master.keys.is_empty() {
        return Err(Error::InvalidParameter("column generation needs at least one seed column".into()));
    }
    Ok(master)
}

fn run_phase1<P: ColumnProblem>(
    problem: &P,
    rows: &[(RowKind, f64)],
    master: &mut Master<P::Key>,
    opts: &ColGenOptions,
) -> Result<(bool, f64, usize)> {
    let mut iterations = 0;
    loop {
        let sol = solve_restricted(rows, &master.cols, true)?;
        if sol.slack_total <= 1e-12 {
            return Ok((true, sol.slack_total, iterations));
        }
        if iterations >= opts.max_iterations {
            return Err(Error::IterationLimit { cap: opts.max_iterations, last_violation: sol.slack_total });
        }
        iterations += 1;
        let priced = problem.price(&sol.duals, Phase::Feasibility, opts.tol_price)?;
        let (added, _) = absorb(problem, master, priced, &sol.duals, Phase::Feasibility, opts.tol_price)?;
        if added == 0 {
            return Ok((sol.slack_total <= opts.phase1_tol, sol.slack_total, iterations));
        }
    }
}

/// Minimizes the total violation of the rows over all columns.
pub fn phase1_feasibility<P: ColumnProblem>(problem: &P, opts: &ColGenOptions) -> Result<Phase1Result<P::Key>> {
    let rows = problem.rows();
    let mut master = seeded(problem)?;
    let (feasible, slack_total, iterations) = run_phase1(problem, &rows, &mut master, opts)?;
    Ok(Phase1Result { feasible, slack_total, columns: master.keys, iterations })
}

/// Phase 1 followed by column generation on the problem's objective.
/// Returns [`Error::Infeasible`] when phase 1 cannot drive the violation
/// below its tolerance.
pub fn solve_master<P: ColumnProblem>(problem: &P, opts: &ColGenOptions) -> Result<ColGenResult<P::Key>> {
    let rows = problem.rows();
    let mut master = seeded(problem)?;
    let (feasible, _, phase1_iterations) = run_phase1(problem, &rows, &mut master, opts)?;
    if !feasible {
        return Err(Error::Infeasible);
    }
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let sol = match solve_restricted(&rows, &master.cols, false) {
            Ok(sol) => sol,
            Err(Error::Infeasible) => {
                return Err(Error::Numerical("restricted master infeasible after a feasible phase 1".into()))
            }
            Err(e) => return Err(e),
        };
        let priced = problem.price(&sol.duals, Phase::Optimality, opts.tol_price)?;
        let (added, max_rc) = absorb(problem, &mut master, priced, &sol.duals, Phase::Optimality, opts.tol_price)?;
        history.push(IterationRecord {
            objective: sol.objective,
            max_reduced_cost: max_rc,
            bound: problem.lagrangian_bound(sol.objective, max_rc),
        });
        if added == 0 {
            let columns = master.keys.into_iter().zip(sol.x).collect();
            return Ok(ColGenResult {
                columns,
                objective: sol.objective,
                duals: sol.duals,
                iterations,
                phase1_iterations,
                history,
            });
        }
        iterations += 1;
        if iterations >= opts.max_iterations {
            return Err(Error::IterationLimit { cap: opts.max_iterations, last_violation: max_rc });
        }
    }
}
