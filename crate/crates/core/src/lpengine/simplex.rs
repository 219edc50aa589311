//! Dense two-phase tableau simplex, generic over the scalar type.
//!
//! Returns basic (vertex) solutions together with shadow prices. In float
//! mode rows are scaled by their largest coefficient; in exact mode nothing
//! is scaled and all comparisons are exact.


use crate::error::{Error, Result};
use crate::model::Scalar;

const PIVOT_TOL: f64 = 1e-7;
const FEAS_TOL: f64 = 1e-9;
const UNBOUNDED_TOL: f64 = 1e-7;
const PERTURBATION: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct DenseLp<T> {
    pub sense: Sense,
    pub objective: Vec<T>,
    pub rows: Vec<Vec<T>>,
    pub kinds: Vec<RowKind>,
    pub rhs: Vec<T>,
    /// Variables without a sign restriction.
    pub free: Vec<bool>,
}

impl<T: Scalar> DenseLp<T> {
    pub fn new(sense: Sense, objective: Vec<T>) -> Self {
        let n = objective.len();
        Self { sense, objective, rows: Vec::new(), kinds: Vec::new(), rhs: Vec::new(), free: vec![false; n] }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_row(&mut self, coefs: Vec<T>, kind: RowKind, rhs: T) -> usize {
        assert_eq!(coefs.len(), self.n_vars(), "row width must match the variable count");
        self.rows.push(coefs);
        self.kinds.push(kind);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    /// Adds a row from `(variable, coefficient)` pairs.
    pub fn add_sparse_row(&mut self, entries: &[(usize, T)], kind: RowKind, rhs: T) -> usize {
        let mut coefs = vec![T::zero(); self.n_vars()];
        for (v, c) in entries {
            coefs[*v] = coefs[*v].clone() + c.clone();
        }
        self.add_row(coefs, kind, rhs)
    }

    pub fn set_free(&mut self, var: usize) {
        self.free[var] = true;
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// Shadow prices: derivative of the optimum with respect to each rhs.
    pub duals: Vec<T>,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub stall_limit: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_iterations: 200_000, stall_limit: 40 }
    }
}

pub fn dense_lp_solve<T: Scalar>(lp: &DenseLp<T>) -> Result<LpSolution<T>> {
    dense_lp_solve_with(lp, SimplexOptions::default())
}

struct Tableau<T> {
    a: Vec<Vec<T>>,
    b: Vec<T>,
    basis: Vec<usize>,
    d: Vec<T>,
    obj: T,
    n_cols: usize,
    iterations: usize,
    bland: bool,
    stall: usize,
    perturbed: bool,
}

enum PivotOutcome {
    Optimal,
    Unbounded,
}

impl<T: Scalar> Tableau<T> {
    fn price(&mut self, costs: &[T]) {
        self.d = costs.to_vec();
        self.obj = T::zero();
        for (r, &bj) in self.basis.iter().enumerate() {
            let cb = costs[bj].clone();
            if cb.is_zero() {
                continue;
            }
            for (dj, arj) in self.d.iter_mut().zip(&self.a[r]) {
                if !arj.is_zero() {
                    *dj = dj.clone() - cb.clone() * arj.clone();
                }
            }
            self.obj = self.obj.clone() + cb * self.b[r].clone();
        }
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let piv = self.a[r][col].clone();
        let inv = T::one() / piv;
        for v in self.a[r].iter_mut() {
            if !v.is_zero() {
                *v = v.clone() * inv.clone();
            }
        }
        self.b[r] = self.b[r].clone() * inv;
        let prow = self.a[r].clone();
        let pb = self.b[r].clone();
        let nz: Vec<usize> = (0..self.n_cols).filter(|&j| !prow[j].is_zero()).collect();
        for rr in 0..self.a.len() {
            if rr == r {
                continue;
            }
            let f = self.a[rr][col].clone();
            if f.is_zero() {
                continue;
            }
            let row = &mut self.a[rr];
            for &j in &nz {
                row[j] = row[j].clone() - f.clone() * prow[j].clone();
            }
            row[col] = T::zero();
            self.b[rr] = self.b[rr].clone() - f * pb.clone();
            if !T::EXACT && self.b[rr] < T::zero() && self.b[rr] > -T::slack_tol() {
                self.b[rr] = T::zero();
            }
        }
        let f = self.d[col].clone();
        if !f.is_zero() {
            for &j in &nz {
                self.d[j] = self.d[j].clone() - f.clone() * prow[j].clone();
            }
            self.d[col] = T::zero();
            self.obj = self.obj.clone() + f * pb;
        }
        self.basis[r] = col;
    }

    /// Rebuilds `a` and `b` from the original rows for the current basis by
    /// Gauss-Jordan elimination with partial pivoting. Float mode only.
    fn reinvert(&mut self, a0: &[Vec<T>], b0: &[T]) -> Result<()> {
        let m = a0.len();
        let mut w: Vec<Vec<T>> = a0.to_vec();
        let mut rhs: Vec<T> = b0.to_vec();
        let mut order: Vec<usize> = Vec::with_capacity(m);
        let mut used = vec![false; m];
        for &col in &self.basis {
            let p = (0..m)
                .filter(|&r| !used[r])
                .max_by(|&x, &y| w[x][col].abs_val().partial_cmp(&w[y][col].abs_val()).expect("finite entries"))
                .expect("as many rows as basic columns");
            if w[p][col].abs_val() <= T::from_f64(1e-12) {
                return Err(Error::Numerical("basis became singular".into()));
            }
            used[p] = true;
            order.push(p);
            let inv = T::one() / w[p][col].clone();
            for v in w[p].iter_mut() {
                *v = v.clone() * inv.clone();
            }
            rhs[p] = rhs[p].clone() * inv;
            let prow = w[p].clone();
            let pb = rhs[p].clone();
            for r in (0..m).filter(|&r| r != p) {
                let f = w[r][col].clone();
                if f.is_zero() {
                    continue;
                }
                for (v, pv) in w[r].iter_mut().zip(&prow) {
                    if !pv.is_zero() {
                        *v = v.clone() - f.clone() * pv.clone();
                    }
                }
                w[r][col] = T::zero();
                rhs[r] = rhs[r].clone() - f * pb.clone();
            }
        }
        self.perturbed = false;
        for (slot, &p) in order.iter().enumerate() {
            self.a[slot] = w[p].clone();
            self.b[slot] = rhs[p].clone();
            if self.b[slot] < T::zero() {
                if self.b[slot] < -T::from_f64(1e-7) {
                    return Err(Error::Numerical("basis lost primal feasibility".into()));
                }
                self.b[slot] = T::zero();
            }
        }
        Ok(())
    }

    /// Largest violation of the original rows by the current basic solution.
    fn residual(&self, a0: &[Vec<T>], b0: &[T]) -> f64 {
        let mut x = vec![0.0; self.n_cols];
        for (r, &bj) in self.basis.iter().enumerate() {
            x[bj] = self.b[r].to_f64();
        }
        a0.iter()
            .zip(b0)
            .map(|(row, b)| {
                let act: f64 = row.iter().zip(&x).filter(|(_, v)| **v != 0.0).map(|(a, v)| a.to_f64() * v).sum();
                (act - b.to_f64()).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest mismatch between the tableau's reduced costs and
    /// `c_j - y A_j` with `y` read off the identity columns.
    fn dual_residual(&self, costs: &[T], a0: &[Vec<T>], identity: &[usize]) -> f64 {
        let y: Vec<f64> = identity.iter().map(|&c| costs[c].to_f64() - self.d[c].to_f64()).collect();
        let mut worst = 0.0f64;
        for j in 0..self.n_cols {
            let mut e = costs[j].to_f64();
            for (r, row) in a0.iter().enumerate() {
                let a = row[j].to_f64();
                if a != 0.0 {
                    e -= y[r] * a;
                }
            }
            worst = worst.max((e - self.d[j].to_f64()).abs());
        }
        worst
    }

    /// Runs to optimality, reinverting and resuming until a reinverted
    /// tableau needs no further pivots.
    fn run_stable(
        &mut self,
        costs: &[T],
        allowed: &[bool],
        opts: &SimplexOptions,
        a0: &[Vec<T>],
        b0: &[T],
        identity: &[usize],
        bounded: bool,
    ) -> Result<PivotOutcome> {
        for _ in 0..4 {
            let before = self.iterations;
            if let PivotOutcome::Unbounded = self.run(allowed, opts, bounded)? {
                return Ok(PivotOutcome::Unbounded);
            }
            if T::EXACT {
                return Ok(PivotOutcome::Optimal);
            }
            let settled = self.iterations == before;
            if self.residual(a0, b0) <= 1e-10 && self.dual_residual(costs, a0, identity) <= 1e-10 {
                return Ok(PivotOutcome::Optimal);
            }
            self.reinvert(a0, b0)?;
            self.price(costs);
            if settled {
                return Ok(PivotOutcome::Optimal);
            }
        }
        self.run(allowed, opts, bounded)
    }

    /// Exact mode: minimum ratio with ties broken by lowest basic index.
    fn exact_ratio(&self, col: usize) -> Option<(usize, T)> {
        let mut leave: Option<(usize, T)> = None;
        for r in 0..self.a.len() {
            let arc = &self.a[r][col];
            if *arc <= T::zero() {
                continue;
            }
            let ratio = self.b[r].clone() / arc.clone();
            let better = match &leave {
                None => true,
                Some((lr, best)) => ratio < *best || (ratio == *best && self.basis[r] < self.basis[*lr]),
            };
            if better {
                leave = Some((r, ratio));
            }
        }
        leave
    }

    /// Float mode: Harris two-pass test. The step bound is relaxed by the
    /// feasibility tolerance and the largest pivot within it is chosen.
    fn harris_ratio(&self, col: usize) -> Option<(usize, T)> {
        let ptol = T::from_f64(PIVOT_TOL);
        let ftol = T::from_f64(FEAS_TOL);
        let mut bound: Option<T> = None;
        for r in 0..self.a.len() {
            let arc = &self.a[r][col];
            if *arc <= ptol {
                continue;
            }
            let relaxed = (self.b[r].clone() + ftol.clone()) / arc.clone();
            if bound.as_ref().is_none_or(|b| relaxed < *b) {
                bound = Some(relaxed);
            }
        }
        let bound = bound?;
        let mut leave: Option<usize> = None;
        for r in 0..self.a.len() {
            let arc = &self.a[r][col];
            if *arc <= ptol || self.b[r].clone() / arc.clone() > bound {
                continue;
            }
            let better = match leave {
                None => true,
                Some(lr) if self.bland => self.basis[r] < self.basis[lr],
                Some(lr) => *arc > self.a[lr][col],
            };
            if better {
                leave = Some(r);
            }
        }
        leave.map(|r| {
            let ratio = self.b[r].clone() / self.a[r][col].clone();
            (r, if ratio < T::zero() { T::zero() } else { ratio })
        })
    }

    /// Float mode: minimum ratio over pivots above tolerance, ties by lowest
    /// basic index.
    fn bland_ratio(&self, col: usize) -> Option<(usize, T)> {
        let ptol = T::from_f64(PIVOT_TOL);
        let mut leave: Option<(usize, T)> = None;
        for r in 0..self.a.len() {
            let arc = &self.a[r][col];
            if *arc <= ptol {
                continue;
            }
            let ratio = self.b[r].clone() / arc.clone();
            let better = match &leave {
                None => true,
                Some((lr, best)) => {
                    let gap = best.clone() - ratio.clone();
                    gap > T::from_f64(1e-12) || (gap >= T::from_f64(-1e-12) && self.basis[r] < self.basis[*lr])
                }
            };
            if better {
                leave = Some((r, ratio));
            }
        }
        leave
    }

    /// Lifts degenerate rows off zero by small distinct amounts. The current
    /// basis stays feasible; reinverting from the original rhs undoes it.
    fn perturb(&mut self) {
        let ftol = T::from_f64(FEAS_TOL);
        let mut state: u64 = 0x2545_f491_4f6c_dd1d;
        for b in self.b.iter_mut() {
            state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
            if *b <= ftol {
                let u = (state >> 11) as f64 / (1u64 << 53) as f64;
                *b = b.clone() + T::from_f64(PERTURBATION * (1.0 + u));
            }
        }
        self.perturbed = true;
        self.stall = 0;
    }

    /// `bounded` marks a problem known to have a finite optimum (phase 1), in
    /// which case a column without a pivot row is numerical noise.
    fn run(&mut self, allowed: &[bool], opts: &SimplexOptions, bounded: bool) -> Result<PivotOutcome> {
        let dtol = T::slack_tol();
        let mut skip = vec![false; self.n_cols];
        loop {
            if self.iterations >= opts.max_iterations {
                return Err(Error::Numerical(format!("simplex exceeded {} pivots", opts.max_iterations)));
            }
            let mut entering: Option<usize> = None;
            for j in 0..self.n_cols {
                if !allowed[j] || skip[j] || self.d[j] <= dtol {
                    continue;
                }
                match entering {
                    None => entering = Some(j),
                    Some(e) if !self.bland && self.d[j] > self.d[e] => entering = Some(j),
                    _ => {}
                }
                if self.bland {
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(PivotOutcome::Optimal);
            };
            let leave = if T::EXACT {
                self.exact_ratio(col)
            } else if self.bland {
                self.bland_ratio(col)
            } else {
                self.harris_ratio(col)
            };
            let Some((r, ratio)) = leave else {
                if T::EXACT || (!bounded && self.d[col] > T::from_f64(UNBOUNDED_TOL)) {
                    return Ok(PivotOutcome::Unbounded);
                }
                skip[col] = true;
                continue;
            };
            if ratio <= dtol {
                self.stall += 1;
                if self.stall > opts.stall_limit {
                    if !T::EXACT && !self.perturbed {
                        self.perturb();
                    } else {
                        self.bland = true;
                    }
                }
            } else {
                self.stall = 0;
            }
            self.pivot(r, col);
            skip.iter_mut().for_each(|s| *s = false);
            self.iterations += 1;
        }
    }
}

pub fn dense_lp_solve_with<T: Scalar>(lp: &DenseLp<T>, opts: SimplexOptions) -> Result<LpSolution<T>> {
    let n = lp.n_vars();
    let m = lp.n_rows();
    if lp.kinds.len() != m || lp.rhs.len() != m || lp.free.len() != n {
        return Err(Error::DimensionMismatch("inconsistent LP description".into()));
    }

    // internal columns: x (free variables split), then slack/surplus, then artificials
    let mut col_of: Vec<(usize, Option<usize>)> = Vec::with_capacity(n);
    let mut nx = 0;
    for v in 0..n {
        if lp.free[v] {
            col_of.push((nx, Some(nx + 1)));
            nx += 2;
        } else {
            col_of.push((nx, None));
            nx += 1;
        }
    }

    let mut sign = vec![T::one(); m];
    let mut scale = vec![T::one(); m];
    let mut kinds = lp.kinds.clone();
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut rhs: Vec<T> = Vec::with_capacity(m);
    for r in 0..m {
        let mut row = vec![T::zero(); nx];
        for (v, &(p, neg)) in col_of.iter().enumerate() {
            let c = lp.rows[r][v].clone();
            if let Some(q) = neg {
                row[q] = -c.clone();
            }
            row[p] = c;
        }
        let mut b = lp.rhs[r].clone();
        if b < T::zero() {
            sign[r] = -T::one();
            for c in row.iter_mut() {
                *c = -c.clone();
            }
            b = -b;
            kinds[r] = match kinds[r] {
                RowKind::Le => RowKind::Ge,
                RowKind::Ge => RowKind::Le,
                RowKind::Eq => RowKind::Eq,
            };
        }
        if !T::EXACT {
            let s = row.iter().fold(T::zero(), |acc, c| acc.max_of(c.abs_val()));
            if s > T::zero() {
                for c in row.iter_mut() {
                    *c = c.clone() / s.clone();
                }
                b = b / s.clone();
                scale[r] = s;
            }
        }
        rows.push(row);
        rhs.push(b);
    }

    let n_slack = kinds.iter().filter(|k| **k != RowKind::Eq).count();
    let n_art = kinds.iter().filter(|k| **k != RowKind::Le).count();
    let n_cols = nx + n_slack + n_art;
    let mut a = vec![vec![T::zero(); n_cols]; m];
    let mut basis = vec![0; m];
    let mut identity_col = vec![0; m];
    let mut is_art = vec![false; n_cols];
    let mut next_slack = nx;
    let mut next_art = nx + n_slack;
    for r in 0..m {
        a[r][..nx].clone_from_slice(&rows[r]);
        match kinds[r] {
            RowKind::Le => {
                a[r][next_slack] = T::one();
                basis[r] = next_slack;
                identity_col[r] = next_slack;
                next_slack += 1;
            }
            RowKind::Ge => {
                a[r][next_slack] = -T::one();
                next_slack += 1;
                a[r][next_art] = T::one();
                basis[r] = next_art;
                identity_col[r] = next_art;
                is_art[next_art] = true;
                next_art += 1;
            }
            RowKind::Eq => {
                a[r][next_art] = T::one();
                basis[r] = next_art;
                identity_col[r] = next_art;
                is_art[next_art] = true;
                next_art += 1;
            }
        }
    }

    let mut cost = vec![T::zero(); n_cols];
    for (v, &(p, neg)) in col_of.iter().enumerate() {
        let c = match lp.sense {
            Sense::Maximize => lp.objective[v].clone(),
            Sense::Minimize => -lp.objective[v].clone(),
        };
        if let Some(q) = neg {
            cost[q] = -c.clone();
        }
        cost[p] = c;
    }

    let a0 = a.clone();
    let b0 = rhs.clone();
    let mut tab = Tableau {
        a,
        b: rhs,
        basis,
        d: Vec::new(),
        obj: T::zero(),
        n_cols,
        iterations: 0,
        bland: false,
        stall: 0,
        perturbed: false,
    };

    if n_art > 0 {
        let phase1: Vec<T> = (0..n_cols).map(|j| if is_art[j] { -T::one() } else { T::zero() }).collect();
        tab.price(&phase1);
        let allowed = vec![true; n_cols];
        if let PivotOutcome::Unbounded = tab.run_stable(&phase1, &allowed, &opts, &a0, &b0, &identity_col, true)? {
            return Err(Error::Numerical("phase 1 reported unbounded".into()));
        }
        let infeas_tol = if T::EXACT { T::zero() } else { T::from_f64(1e-9) };
        if tab.obj < -infeas_tol {
            return Err(Error::Infeasible);
        }
        // drive remaining artificials out of the basis where possible
        for r in 0..m {
            if !is_art[tab.basis[r]] {
                continue;
            }
            let ptol = if T::EXACT { T::zero() } else { T::from_f64(PIVOT_TOL) };
            let best = (0..nx + n_slack)
                .filter(|&j| tab.a[r][j].abs_val() > ptol)
                .max_by(|&x, &y| tab.a[r][x].abs_val().partial_cmp(&tab.a[r][y].abs_val()).expect("finite entries"));
            if let Some(j) = best {
                tab.pivot(r, j);
            }
        }
        tab.bland = false;
        tab.stall = 0;
    }

    tab.price(&cost);
    let allowed: Vec<bool> = (0..n_cols).map(|j| !is_art[j]).collect();
    if let PivotOutcome::Unbounded = tab.run_stable(&cost, &allowed, &opts, &a0, &b0, &identity_col, false)? {
        return Err(Error::Unbounded);
    }

    let mut xi = vec![T::zero(); n_cols];
    for (r, &bj) in tab.basis.iter().enumerate() {
        xi[bj] = tab.b[r].clone();
    }
    let x: Vec<T> = col_of
        .iter()
        .map(|&(p, neg)| match neg {
            Some(q) => xi[p].clone() - xi[q].clone(),
            None => xi[p].clone(),
        })
        .collect();
    if !T::EXACT {
        check_residuals(lp, &x)?;
    }
    let objective = x.iter().zip(&lp.objective).fold(T::zero(), |acc, (xv, c)| acc + xv.clone() * c.clone());
    let duals = (0..m)
        .map(|r| {
            let y = -tab.d[identity_col[r]].clone() * sign[r].clone() / scale[r].clone();
            match lp.sense {
                Sense::Maximize => y,
                Sense::Minimize => -y,
            }
        })
        .collect();
    Ok(LpSolution { x, objective, duals, iterations: tab.iterations })
}

/// Float solutions must satisfy the original rows to within `1e-7` relative
/// to the row's largest coefficient.
fn check_residuals<T: Scalar>(lp: &DenseLp<T>, x: &[T]) -> Result<()> {
    for r in 0..lp.n_rows() {
        let row = &lp.rows[r];
        let act = row.iter().zip(x).fold(T::zero(), |acc, (a, v)| acc + a.clone() * v.clone()).to_f64();
        let rhs = lp.rhs[r].to_f64();
        let viol = match lp.kinds[r] {
            RowKind::Le => act - rhs,
            RowKind::Ge => rhs - act,
            RowKind::Eq => (act - rhs).abs(),
        };
        let scale = row.iter().fold(rhs.abs(), |acc, a| acc.max(a.to_f64().abs())).max(1.0);
        if viol > 1e-7 * scale {
            return Err(Error::Numerical(format!("row {r} violated by {viol:e} after solve")));
        }
    }
    if x.iter().zip(&lp.free).any(|(v, &free)| !free && v.to_f64() < -1e-7) {
        return Err(Error::Numerical("negative value on a sign-restricted variable".into()));
    }
    Ok(())
}
