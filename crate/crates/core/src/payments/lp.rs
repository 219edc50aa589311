//! Subsidy minimization and rent-constrained utility maximization with
//! per-outcome payments, by column generation, followed by the epsilon
//! repair that turns an LP vertex into a lottery with payments.


use super::PaymentScheme;
use crate::error::{Error, Result};
use crate::lpengine::{
    dense_lp_solve, solve_master, ColGenOptions, Column, ColumnProblem, DenseLp, Phase, Priced, RowKind, Sense,
};
use crate::model::{rat_to_f64, Instance, Lottery, Matching};
use crate::twoebm::{all_matchings, max_weight_assignment, solve_2ebm_any, EdgePairWeights};
use crate::welfare_opt::DualPoint;

/// Matchings with at most this much probability count as unused.
pub const REPAIR_SUPPORT_TOL: f64 = 1e-9;
/// Payment mass below this is treated as zero.
pub const REPAIR_T_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PaymentKey {
    /// The minimum-utility variable of the rent LP.
    Q,
    X(Matching),
    /// `t_i(b)`: payment mass of agent `i` in matching `b`.
    T(usize, Matching),
}

/// Row layout shared by both LPs: iEF rows `(i * n + j) * n + k`, then the
/// convexity row, then (rent LP only) the rent row and one row per agent.
struct Layout {
    n: usize,
}

impl Layout {
    fn ief(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    fn conv(&self) -> usize {
        self.n * self.n * self.n
    }

    fn rent(&self) -> usize {
        self.conv() + 1
    }

    fn agent(&self, i: usize) -> usize {
        self.conv() + 2 + i
    }

    fn x_entries(&self, values: &[Vec<f64>], b: &Matching) -> Vec<(usize, f64)> {
        let n = self.n;
        let mut entries = Vec::new();
        for i in 0..n {
            let j = b.item_of(i);
            for k in (0..n).filter(|&k| k != i) {
                let c = values[i][j] - values[i][b.item_of(k)];
                if c != 0.0 {
                    entries.push((self.ief(i, j, k), c));
                }
            }
        }
        entries.push((self.conv(), 1.0));
        entries
    }

    /// `sign` on the rows of `h` as the holder, `-sign` where `h` is the
    /// compared agent.
    fn t_entries(&self, h: usize, b: &Matching, sign: f64) -> Vec<(usize, f64)> {
        let n = self.n;
        let mut entries = Vec::new();
        for k in (0..n).filter(|&k| k != h) {
            entries.push((self.ief(h, b.item_of(h), k), sign));
        }
        for i in (0..n).filter(|&i| i != h) {
            entries.push((self.ief(i, b.item_of(i), h), -sign));
        }
        entries
    }
}

fn ief_rows(n: usize) -> Vec<(RowKind, f64)> {
    let mut rows = vec![(RowKind::Ge, 0.0); n * n * n];
    rows.push((RowKind::Eq, 1.0));
    rows
}

fn x_oracle(values: &[Vec<f64>], dual: &DualPoint, extra: impl Fn(usize, usize) -> f64) -> Result<(Matching, f64)> {
    let n = dual.n;
    let nn = n as f64 * (n as f64 - 1.0);
    let w = EdgePairWeights::from_fn(n, |i, j, k, l| {
        (values[i][j] - values[i][l]) * dual.y(i, j, k) + extra(i, j) + dual.z / nn
    });
    let sol = solve_2ebm_any(&w)?;
    Ok((sol.matching, sol.value))
}

fn direct_rc(col: &Column, duals: &[f64]) -> f64 {
    col.cost - col.entries.iter().map(|(r, a)| duals[*r] * a).sum::<f64>()
}

fn priced(cands: Vec<(PaymentKey, f64)>, tol: f64) -> Vec<Priced<PaymentKey>> {
    cands.into_iter().filter(|(_, rc)| *rc > tol).map(|(key, reduced_cost)| Priced { key, reduced_cost }).collect()
}

fn max_util_matching(values: &[Vec<f64>]) -> Matching {
    max_weight_assignment(values).0
}

/// `min sum t` subject to the iEF rows with `+t_i(b) - t_k(b)`.
pub struct SubsidyProblem {
    layout: Layout,
    values: Vec<Vec<f64>>,
    seed: Matching,
}

impl SubsidyProblem {
    pub fn new(instance: &Instance) -> Result<Self> {
        let n = instance.require_matching()?;
        let values = instance.values_f64().to_vec();
        let seed = max_util_matching(&values);
        Ok(Self { layout: Layout { n }, values, seed })
    }
}

impl ColumnProblem for SubsidyProblem {
    type Key = PaymentKey;

    fn rows(&self) -> Vec<(RowKind, f64)> {
        ief_rows(self.layout.n)
    }

    fn column(&self, key: &PaymentKey) -> Column {
        match key {
            PaymentKey::X(b) => Column { cost: 0.0, entries: self.layout.x_entries(&self.values, b), free: false },
            PaymentKey::T(h, b) => Column { cost: -1.0, entries: self.layout.t_entries(*h, b, 1.0), free: false },
            PaymentKey::Q => unreachable!("the subsidy LP has no q column"),
        }
    }

    fn seed(&self) -> Result<Vec<PaymentKey>> {
        let mut keys = vec![PaymentKey::X(self.seed.clone())];
        keys.extend((0..self.layout.n).map(|h| PaymentKey::T(h, self.seed.clone())));
        Ok(keys)
    }

    fn price(&self, duals: &[f64], phase: Phase, tol: f64) -> Result<Vec<Priced<PaymentKey>>> {
        let n = self.layout.n;
        let dual = DualPoint::from_shadow(n, duals);
        let mut cands = Vec::new();
        if n == 1 {
            let key = PaymentKey::X(Matching::identity(1));
            let rc = direct_rc(&self.column(&key), duals);
            cands.push((key, rc));
        } else {
            let (b, rc) = x_oracle(&self.values, &dual, |_, _| 0.0)?;
            cands.push((PaymentKey::X(b), rc));
        }
        let share = if phase == Phase::Optimality { 1.0 / n as f64 } else { 0.0 };
        for h in 0..n {
            let c: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|l| {
                            if i == h {
                                (0..n).filter(|&k| k != h).map(|k| dual.y(h, l, k)).sum::<f64>() - share
                            } else {
                                -dual.y(i, l, h) - share
                            }
                        })
                        .collect()
                })
                .collect();
            let (b, rc) = max_weight_assignment(&c);
            cands.push((PaymentKey::T(h, b), rc));
        }
        Ok(priced(cands, tol))
    }
}

/// `max q` with per-agent utility rows, the iEF rows with `-t_i(b) + t_k(b)`
/// and the rent row `sum t = R`.
pub struct UtilityProblem {
    layout: Layout,
    values: Vec<Vec<f64>>,
    rent: f64,
    seed: Matching,
}

impl UtilityProblem {
    pub fn new(instance: &Instance, rent: f64) -> Result<Self> {
        let n = instance.require_matching()?;
        if !(rent >= 0.0 && rent.is_finite()) {
            return Err(Error::InvalidParameter(format!("rent must be finite and nonnegative, got {rent}")));
        }
        let values = instance.values_f64().to_vec();
        let seed = max_util_matching(&values);
        Ok(Self { layout: Layout { n }, values, rent, seed })
    }
}

impl ColumnProblem for UtilityProblem {
    type Key = PaymentKey;

    fn rows(&self) -> Vec<(RowKind, f64)> {
        let mut rows = ief_rows(self.layout.n);
        rows.push((RowKind::Eq, self.rent));
        rows.extend((0..self.layout.n).map(|_| (RowKind::Le, 0.0)));
        rows
    }

    fn column(&self, key: &PaymentKey) -> Column {
        let l = &self.layout;
        match key {
            PaymentKey::Q => Column { cost: 1.0, entries: (0..l.n).map(|i| (l.agent(i), 1.0)).collect(), free: true },
            PaymentKey::X(b) => {
                let mut entries = l.x_entries(&self.values, b);
                for i in 0..l.n {
                    let v = self.values[i][b.item_of(i)];
                    if v != 0.0 {
                        entries.push((l.agent(i), -v));
                    }
                }
                Column { cost: 0.0, entries, free: false }
            }
            PaymentKey::T(h, b) => {
                let mut entries = l.t_entries(*h, b, -1.0);
                entries.push((l.agent(*h), 1.0));
                entries.push((l.rent(), 1.0));
                Column { cost: 0.0, entries, free: false }
            }
        }
    }

    fn seed(&self) -> Result<Vec<PaymentKey>> {
        let mut keys = vec![PaymentKey::Q, PaymentKey::X(self.seed.clone())];
        keys.extend((0..self.layout.n).map(|h| PaymentKey::T(h, self.seed.clone())));
        Ok(keys)
    }

    fn price(&self, duals: &[f64], _phase: Phase, tol: f64) -> Result<Vec<Priced<PaymentKey>>> {
        let l = &self.layout;
        let n = l.n;
        let dual = DualPoint::from_shadow(n, duals);
        let w: Vec<f64> = (0..n).map(|i| duals[l.agent(i)]).collect();
        let g = -duals[l.rent()];
        let mut cands = Vec::new();
        if n == 1 {
            let key = PaymentKey::X(Matching::identity(1));
            let rc = direct_rc(&self.column(&key), duals);
            cands.push((key, rc));
        } else {
            let (b, rc) = x_oracle(&self.values, &dual, |i, j| w[i] * self.values[i][j] / (n as f64 - 1.0))?;
            cands.push((PaymentKey::X(b), rc));
        }
        for h in 0..n {
            let share = (g - w[h]) / n as f64;
            let c: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|l| {
                            if i == h {
                                -(0..n).filter(|&k| k != h).map(|k| dual.y(h, l, k)).sum::<f64>() + share
                            } else {
                                dual.y(i, l, h) + share
                            }
                        })
                        .collect()
                })
                .collect();
            let (b, rc) = max_weight_assignment(&c);
            cands.push((PaymentKey::T(h, b), rc));
        }
        Ok(priced(cands, tol))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RepairMode {
    /// `delta = eps / (2 V_max)`, payments `t / x'`.
    Subsidy,
    /// `delta = eps / V_max`, payments `-t / x'`.
    Utility,
}

#[derive(Clone, Debug)]
pub struct Repaired {
    pub lottery: Lottery<f64>,
    /// C-payments aligned with the lottery's support.
    pub payments: PaymentScheme<f64>,
    pub delta: f64,
    /// Matchings with positive probability in the LP solution.
    pub k1: usize,
    /// Matchings carrying payment mass but no probability.
    pub k2: usize,
}

/// Moves probability `delta` onto the matchings that carry payment mass but
/// no probability, and divides payment mass by probability. Without such
/// matchings the LP solution is returned as it is.
pub fn epsilon_repair(
    x: &[(Matching, f64)],
    t: &[(usize, Matching, f64)],
    v_max: f64,
    epsilon: f64,
    mode: RepairMode,
) -> Result<Repaired> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut k1: Vec<(Matching, f64)> = x.iter().filter(|(_, p)| *p > REPAIR_SUPPORT_TOL).cloned().collect();
    let mass: f64 = k1.iter().map(|(_, p)| p).sum();
    if k1.is_empty() || mass <= 0.0 {
        return Err(Error::Numerical("LP solution has no probability mass".into()));
    }
    k1.iter_mut().for_each(|(_, p)| *p /= mass);
    let mut k2: Vec<Matching> = Vec::new();
    for (_, b, val) in t {
        if *val > REPAIR_T_TOL && !k1.iter().any(|(m, _)| m == b) && !k2.contains(b) {
            k2.push(b.clone());
        }
    }
    let delta = if k2.is_empty() {
        0.0
    } else {
        let scale = match mode {
            RepairMode::Subsidy => 2.0,
            RepairMode::Utility => 1.0,
        };
        (epsilon / (scale * v_max.max(f64::MIN_POSITIVE))).min(1.0)
    };
    let mut support: Vec<(Matching, f64)> = k1.iter().map(|(b, p)| (b.clone(), (1.0 - delta) * p)).collect();
    let share = if k2.is_empty() { 0.0 } else { delta / k2.len() as f64 };
    support.extend(k2.iter().map(|b| (b.clone(), share)));
    let n = support[0].0.len();
    let sign = match mode {
        RepairMode::Subsidy => 1.0,
        RepairMode::Utility => -1.0,
    };
    let mut rows = vec![vec![0.0; n]; support.len()];
    for (h, b, val) in t {
        if *val <= REPAIR_T_TOL {
            continue;
        }
        let idx = support.iter().position(|(m, _)| m == b).expect("every payment matching is in the support");
        rows[idx][*h] += sign * val / support[idx].1;
    }
    Ok(Repaired {
        lottery: Lottery::from_matchings(support)?,
        payments: PaymentScheme::C(rows),
        delta,
        k1: k1.len(),
        k2: k2.len(),
    })
}

fn split_solution(columns: &[(PaymentKey, f64)]) -> (Vec<(Matching, f64)>, Vec<(usize, Matching, f64)>) {
    let mut x = Vec::new();
    let mut t = Vec::new();
    for (key, val) in columns {
        match key {
            PaymentKey::X(b) => x.push((b.clone(), *val)),
            PaymentKey::T(h, b) => t.push((*h, b.clone(), *val)),
            PaymentKey::Q => {}
        }
    }
    (x, t)
}

/// Expected utility `E[v_i(b(i)) + p_i(b)]` of every agent.
pub fn expected_utilities(instance: &Instance, lottery: &Lottery<f64>, payments: &PaymentScheme<f64>) -> Vec<f64> {
    let n = instance.n_agents();
    let v = instance.values_f64();
    let mut out = vec![0.0; n];
    for (idx, (alloc, p)) in lottery.support().iter().enumerate() {
        for (i, u) in out.iter_mut().enumerate() {
            let own: f64 = alloc.bundle(i).iter().map(|&j| v[i][j]).sum();
            *u += p * (own + payments.pay(i, idx, alloc.bundle(i)));
        }
    }
    out
}

/// Matchings at or below this size are re-solved over every matching, not
/// just those the master generated.
const FULL_POOL_MAX_N: usize = 4;

/// Link factors tried when no support-restricted re-solve is accepted.
const LINK_FACTORS: [f64; 5] = [1.0, 10.0, 100.0, 1e3, 1e4];

/// Matchings below this probability in a linked solution are dropped.
const LINK_SUPPORT_TOL: f64 = 1e-7;

/// Dense re-solve over `pool` with x and every t column per matching. With
/// `floor`, every drawn matching gets `x(b) >= floor`; with `link`, every
/// payment column is bounded by `link * x(b)`. `relax` is added to the x
/// coefficient of every interim row whose conditioning event `b` triggers.
fn resolve_restricted<P: ColumnProblem<Key = PaymentKey>>(
    problem: &P,
    with_q: bool,
    pool: &[Matching],
    floor: Option<f64>,
    link: Option<f64>,
    relax: f64,
) -> Result<(Vec<(PaymentKey, f64)>, f64)> {
    let n = pool[0].len();
    let mut keys: Vec<PaymentKey> = if with_q { vec![PaymentKey::Q] } else { Vec::new() };
    for b in pool {
        keys.push(PaymentKey::X(b.clone()));
        keys.extend((0..n).map(|h| PaymentKey::T(h, b.clone())));
    }
    let cols: Vec<Column> = keys.iter().map(|k| problem.column(k)).collect();
    let rows = problem.rows();
    let mut lp = DenseLp::new(Sense::Maximize, cols.iter().map(|c| c.cost).collect());
    let mut dense = vec![vec![0.0; keys.len()]; rows.len()];
    let layout = Layout { n };
    for (v, c) in cols.iter().enumerate() {
        for (r, a) in &c.entries {
            dense[*r][v] += a;
        }
        if c.free {
            lp.set_free(v);
        }
        if let (PaymentKey::X(b), true) = (&keys[v], relax > 0.0) {
            for i in 0..n {
                for k in (0..n).filter(|&k| k != i) {
                    dense[layout.ief(i, b.item_of(i), k)][v] += relax;
                }
            }
        }
    }
    for (row, (kind, rhs)) in dense.into_iter().zip(rows) {
        lp.add_row(row, kind, rhs);
    }
    let mut x_var = 0;
    for (v, key) in keys.iter().enumerate() {
        match key {
            PaymentKey::X(_) => {
                x_var = v;
                if let Some(f) = floor {
                    lp.add_sparse_row(&[(v, 1.0)], RowKind::Ge, f);
                }
            }
            PaymentKey::T(..) => {
                if let Some(m) = link {
                    lp.add_sparse_row(&[(v, 1.0), (x_var, -m)], RowKind::Le, 0.0);
                }
            }
            PaymentKey::Q => {}
        }
    }
    let sol = dense_lp_solve(&lp)?;
    Ok((keys.into_iter().zip(sol.x).collect(), sol.objective))
}

/// Matchings of `columns` whose x value exceeds `tol`, and the smallest such
/// value.
fn drawn(columns: &[(PaymentKey, f64)], tol: f64) -> (Vec<Matching>, f64) {
    let mut out = Vec::new();
    let mut least = f64::INFINITY;
    for (key, val) in columns {
        if let PaymentKey::X(b) = key {
            if *val > tol {
                out.push(b.clone());
                least = least.min(*val);
            }
        }
    }
    (out, least)
}

/// Looks for a master solution in which every matching carrying payment mass
/// is drawn. Each candidate support is re-solved with a probability floor on
/// all of its matchings, which rules out phantom matchings. Candidates are
/// the master's drawn and paying matchings, its drawn matchings alone, and
/// the supports of LPs whose payment columns are linked to their matching's
/// probability, first exactly and then with every interim row relaxed by
/// `relax` times the probability of its conditioning event. Returns the
/// first repair whose objective passes `accept`, otherwise the best one
/// found.
fn resolve_repair<P: ColumnProblem<Key = PaymentKey>>(
    problem: &P,
    columns: &[(PaymentKey, f64)],
    rep: &Repaired,
    relax: f64,
    accept: impl Fn(f64) -> bool,
    repair: impl Fn(&[(Matching, f64)], &[(usize, Matching, f64)]) -> Result<Repaired>,
) -> Result<Option<Repaired>> {
    let with_q = columns.iter().any(|(k, _)| *k == PaymentKey::Q);
    let try_support = |support: &[Matching], floor: f64, relax: f64| -> Result<Option<(Repaired, f64)>> {
        if support.is_empty() {
            return Ok(None);
        }
        let Ok((cols, obj)) = resolve_restricted(problem, with_q, support, Some(floor), None, relax) else {
            return Ok(None);
        };
        let (x, t) = split_solution(&cols);
        let linked = repair(&x, &t)?;
        Ok((linked.k2 == 0).then_some((linked, obj)))
    };
    let mut best: Option<(Repaired, f64)> = None;
    let mut consider = |found: Option<(Repaired, f64)>| -> Option<Repaired> {
        let (linked, obj) = found?;
        if accept(obj) {
            return Some(linked);
        }
        if best.as_ref().is_none_or(|(_, b)| obj > *b) {
            best = Some((linked, obj));
        }
        None
    };

    let mut paying: Vec<Matching> = Vec::new();
    let mut pool: Vec<Matching> = Vec::new();
    for (key, val) in columns {
        if let PaymentKey::X(b) | PaymentKey::T(_, b) = key {
            if !pool.contains(b) {
                pool.push(b.clone());
            }
            let pays = matches!(key, PaymentKey::T(..)) && *val > REPAIR_T_TOL;
            if (pays || *val > REPAIR_SUPPORT_TOL) && !paying.contains(b) {
                paying.push(b.clone());
            }
        }
    }
    if let Some(found) = consider(try_support(&paying, support_floor(rep), 0.0)?) {
        return Ok(Some(found));
    }
    let (k1, least) = drawn(columns, REPAIR_SUPPORT_TOL);
    for floor in [least, least * 1e-3] {
        if let Some(found) = consider(try_support(&k1, floor, 0.0)?) {
            return Ok(Some(found));
        }
    }

    if let Some(n) = pool.first().map(Matching::len) {
        if n <= FULL_POOL_MAX_N {
            pool = all_matchings(n).collect();
        }
        for relax in [0.0, relax] {
            for m in LINK_FACTORS {
                let Ok((cols, _)) = resolve_restricted(problem, with_q, &pool, None, Some(m), relax) else {
                    continue;
                };
                let (support, least) = drawn(&cols, LINK_SUPPORT_TOL);
                if let Some(found) = consider(try_support(&support, least / 2.0, relax)?) {
                    return Ok(Some(found));
                }
            }
        }
    }
    Ok(best.map(|(linked, _)| linked))
}

/// Smallest probability of the repaired lottery.
fn support_floor(rep: &Repaired) -> f64 {
    rep.lottery.support().iter().map(|(_, p)| *p).fold(1.0, f64::min)
}

#[derive(Clone, Debug)]
pub struct SubsidyResult {
    pub lottery: Lottery<f64>,
    pub payments: PaymentScheme<f64>,
    /// Expected total subsidy of the returned pair.
    pub total: f64,
    pub lp_optimum: f64,
    pub repair: RepairStats,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepairStats {
    pub delta: f64,
    pub k1: usize,
    pub k2: usize,
    /// Whether the returned pair comes from a support-restricted re-solve
    /// rather than the epsilon repair. Such a pair satisfies the interim
    /// constraints exactly; its objective can trail the LP optimum by more
    /// than epsilon when no re-solve gets within it.
    pub resolved: bool,
}

pub fn solve_subsidy_min(instance: &Instance, epsilon: f64) -> Result<SubsidyResult> {
    let n = instance.require_matching()?;
    solve_subsidy_min_with(instance, epsilon, &ColGenOptions::for_size(n))
}

pub fn solve_subsidy_min_with(instance: &Instance, epsilon: f64, opts: &ColGenOptions) -> Result<SubsidyResult> {
    let problem = SubsidyProblem::new(instance)?;
    let res = match solve_master(&problem, opts) {
        Err(Error::Infeasible) => {
            return Err(Error::InvariantViolation("subsidy LP reported infeasible; payments can always repair".into()))
        }
        other => other?,
    };
    let (x, t) = split_solution(&res.columns);
    let mut rep = epsilon_repair(&x, &t, rat_to_f64(&instance.v_max()), epsilon, RepairMode::Subsidy)?;
    let mut stats = RepairStats { delta: rep.delta, k1: rep.k1, k2: rep.k2, resolved: false };
    if rep.k2 > 0 {
        let v_max = rat_to_f64(&instance.v_max());
        let found = resolve_repair(&problem, &res.columns, &rep, epsilon / 2.0, |obj| -obj <= -res.objective + epsilon, |x, t| {
            epsilon_repair(x, t, v_max, epsilon, RepairMode::Subsidy)
        })?;
        if let Some(linked) = found {
            rep = linked;
            stats.resolved = true;
        }
    }
    let total = rep.payments.expected_total(&rep.lottery);
    Ok(SubsidyResult {
        total,
        lp_optimum: -res.objective,
        repair: stats,
        lottery: rep.lottery,
        payments: rep.payments,
        iterations: res.iterations + res.phase1_iterations,
    })
}

#[derive(Clone, Debug)]
pub struct UtilityResult {
    pub lottery: Lottery<f64>,
    pub payments: PaymentScheme<f64>,
    pub min_expected_utility: f64,
    pub expected_utilities: Vec<f64>,
    pub lp_optimum: f64,
    /// `sum of expected payments + R`; zero when the rent is met.
    pub rent_residual: f64,
    pub repair: RepairStats,
    pub iterations: usize,
}

pub fn solve_utility_max(instance: &Instance, rent: f64, epsilon: f64) -> Result<UtilityResult> {
    let n = instance.require_matching()?;
    solve_utility_max_with(instance, rent, epsilon, &ColGenOptions::for_size(n))
}

pub fn solve_utility_max_with(
    instance: &Instance,
    rent: f64,
    epsilon: f64,
    opts: &ColGenOptions,
) -> Result<UtilityResult> {
    let problem = UtilityProblem::new(instance, rent)?;
    let res = solve_master(&problem, opts)?;
    let (x, t) = split_solution(&res.columns);
    let mut rep = epsilon_repair(&x, &t, rat_to_f64(&instance.v_max()), epsilon, RepairMode::Utility)?;
    let mut stats = RepairStats { delta: rep.delta, k1: rep.k1, k2: rep.k2, resolved: false };
    if rep.k2 > 0 {
        let v_max = rat_to_f64(&instance.v_max());
        let found = resolve_repair(&problem, &res.columns, &rep, epsilon / 2.0, |obj| obj >= res.objective - epsilon, |x, t| {
            epsilon_repair(x, t, v_max, epsilon, RepairMode::Utility)
        })?;
        if let Some(linked) = found {
            rep = linked;
            stats.resolved = true;
        }
    }
    let utilities = expected_utilities(instance, &rep.lottery, &rep.payments);
    let min = utilities.iter().cloned().fold(f64::INFINITY, f64::min);
    let residual = rep.payments.expected_total(&rep.lottery) + rent;
    Ok(UtilityResult {
        min_expected_utility: min,
        expected_utilities: utilities,
        lp_optimum: res.objective,
        rent_residual: residual,
        repair: stats,
        lottery: rep.lottery,
        payments: rep.payments,
        iterations: res.iterations + res.phase1_iterations,
    })
}
