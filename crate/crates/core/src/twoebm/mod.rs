//! Maximum edge-pair-weighted perfect bipartite matching (2EBM).
//!
//! `solve_2ebm` works on the LP relaxation over centro-symmetric doubly
//! stochastic matrices. Its vertices are centro-symmetric permutation
//! matrices, but such a permutation need not encode a single matching (two
//! agent pairs can disagree on the item of a shared agent). When the vertex
//! returned is not a matching the solver branches on the item of a
//! conflicting agent; the relaxation value is a valid upper bound in every
//! node, so the search is exact.

mod assignment;
mod cs;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lpengine::{dense_lp_solve, DenseLp, RowKind, Sense};
use crate::model::Matching;

pub use assignment::{all_matchings, max_weight_assignment, max_weight_assignment_masked, perfect_matching};
pub use cs::{
    matching_permutation, peel_cs_permutation, permutation_to_matching, reconstruction_error, to_cs_matrix, CsDsMatrix,
    PairIndexMap, PeelTerm, CS_ENTRY_TOL, CS_SUM_TOL,
};

/// Largest side size accepted by [`brute_force_2ebm`].
pub const BRUTE_FORCE_MAX_N: usize = 8;

const INTEGRAL_TOL: f64 = 1e-6;
const BOUND_TOL: f64 = 1e-9;

/// Weights `psi(i, j, k, l)` on ordered pairs of non-incident edges
/// `((i,j), (k,l))`, plus a mask of usable edges.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgePairWeights {
    n: usize,
    psi: Vec<f64>,
    allowed: Vec<bool>,
}

impl EdgePairWeights {
    pub fn new(n: usize) -> Self {
        Self { n, psi: vec![0.0; n * n * n * n], allowed: vec![true; n * n] }
    }

    /// Fills every quadruple with `i != k`, `j != l` from `f`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut w = Self::new(n);
        for i in 0..n {
            for j in 0..n {
                for k in (0..n).filter(|&k| k != i) {
                    for l in (0..n).filter(|&l| l != j) {
                        let idx = w.idx(i, j, k, l);
                        w.psi[idx] = f(i, j, k, l);
                    }
                }
            }
        }
        w
    }

    /// The reduction from classical assignment: `psi(e, e') = w(e) / (n-1)`.
    pub fn from_edge_weights(weights: &[Vec<f64>]) -> Self {
        let n = weights.len();
        let denom = (n.max(2) - 1) as f64;
        Self::from_fn(n, |i, j, _, _| weights[i][j] / denom)
    }

    fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Weight of the quadruple; zero outside the valid set.
    pub fn psi(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        if i == k || j == l || !self.is_allowed(i, j) || !self.is_allowed(k, l) {
            0.0
        } else {
            self.psi[self.idx(i, j, k, l)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, w: f64) {
        assert!(i != k && j != l, "edges of a pair must not share an endpoint");
        let idx = self.idx(i, j, k, l);
        self.psi[idx] = w;
    }

    pub fn forbid(&mut self, i: usize, j: usize) {
        self.allowed[i * self.n + j] = false;
    }

    pub fn with_mask(mut self, allowed: &[Vec<bool>]) -> Self {
        for (i, row) in allowed.iter().enumerate() {
            for (j, &ok) in row.iter().enumerate() {
                self.allowed[i * self.n + j] = ok;
            }
        }
        self
    }

    pub fn is_allowed(&self, i: usize, j: usize) -> bool {
        self.allowed[i * self.n + j]
    }

    pub fn mask(&self) -> Vec<Vec<bool>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.is_allowed(i, j)).collect()).collect()
    }

    pub fn respects_mask(&self, b: &Matching) -> bool {
        (0..self.n).all(|i| self.is_allowed(i, b.item_of(i)))
    }

    /// `Psi(b)`: total weight over ordered pairs of edges of `b`.
    pub fn objective(&self, b: &Matching) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n {
            for k in (0..self.n).filter(|&k| k != i) {
                total += self.psi[self.idx(i, b.item_of(i), k, b.item_of(k))];
            }
        }
        total
    }
}

/// Counters describing how a solve went.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TwoEbmStats {
    pub lp_solves: usize,
    pub branch_nodes: usize,
    /// Largest distance from {0, 1} over all relaxation solutions.
    pub max_fractionality: f64,
    /// Relaxation vertices that were permutations but not matchings.
    pub non_matching_vertices: usize,
    pub peel_calls: usize,
    /// Whether the root relaxation already returned a matching.
    pub root_is_matching: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoEbmSolution {
    pub matching: Matching,
    pub value: f64,
    pub stats: TwoEbmStats,
}

/// Relaxation optimum: the dense quadruple table `t` and its value.
#[derive(Clone, Debug)]
pub struct Relaxation {
    pub t: Vec<f64>,
    pub value: f64,
}

/// Solves the LP relaxation restricted to `allowed` edges. Variables
/// `u(i,k,j,l)`, `i < k`, stand for `t(i,j,k,l) = t(k,l,i,j)`; rows are one
/// per unordered agent pair and one per unordered item pair. `None` when the
/// restriction leaves the relaxation infeasible.
pub fn solve_relaxation(w: &EdgePairWeights, allowed: &[Vec<bool>]) -> Result<Option<Relaxation>> {
    let n = w.n();
    let mut vars: Vec<(usize, usize, usize, usize)> = Vec::new();
    for i in 0..n {
        for k in (i + 1)..n {
            for j in 0..n {
                if !allowed[i][j] {
                    continue;
                }
                for l in (0..n).filter(|&l| l != j && allowed[k][l]) {
                    vars.push((i, k, j, l));
                }
            }
        }
    }
    let objective: Vec<f64> = vars.iter().map(|&(i, k, j, l)| w.psi(i, j, k, l) + w.psi(k, l, i, j)).collect();
    let mut lp = DenseLp::new(Sense::Maximize, objective);
    let pair_row = |a: usize, b: usize| a * n + b;
    let mut agent_rows = vec![Vec::new(); n * n];
    let mut item_rows = vec![Vec::new(); n * n];
    for (v, &(i, k, j, l)) in vars.iter().enumerate() {
        agent_rows[pair_row(i, k)].push(v);
        item_rows[pair_row(j.min(l), j.max(l))].push(v);
    }
    for a in 0..n {
        for b in (a + 1)..n {
            for rows in [&agent_rows, &item_rows] {
                let members = &rows[pair_row(a, b)];
                if members.is_empty() {
                    return Ok(None);
                }
                let entries: Vec<(usize, f64)> = members.iter().map(|&v| (v, 1.0)).collect();
                lp.add_sparse_row(&entries, RowKind::Eq, 1.0);
            }
        }
    }
    let sol = match dense_lp_solve(&lp) {
        Ok(sol) => sol,
        Err(Error::Infeasible) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut t = vec![0.0; n * n * n * n];
    for (&(i, k, j, l), &x) in vars.iter().zip(&sol.x) {
        t[((i * n + j) * n + k) * n + l] = x;
        t[((k * n + l) * n + i) * n + j] = x;
    }
    Ok(Some(Relaxation { t, value: sol.objective }))
}

fn t_at(t: &[f64], n: usize, i: usize, j: usize, k: usize, l: usize) -> f64 {
    t[((i * n + j) * n + k) * n + l]
}

fn fractionality(t: &[f64]) -> f64 {
    t.iter().map(|x| x.abs().min((x - 1.0).abs())).fold(0.0, f64::max)
}

/// The matching an integral relaxation vertex encodes, if any.
fn vertex_matching(t: &[f64], n: usize) -> Option<Matching> {
    let mut item: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        for j in 0..n {
            for k in (0..n).filter(|&k| k != i) {
                for l in (0..n).filter(|&l| l != j) {
                    if t_at(t, n, i, j, k, l) > 0.5 {
                        match item[i] {
                            None => item[i] = Some(j),
                            Some(prev) if prev != j => return None,
                            _ => {}
                        }
                    }
                }
            }
        }
    }
    let assignment: Option<Vec<usize>> = item.into_iter().collect();
    let b = Matching::new(assignment?).ok()?;
    let all_pairs = (0..n).all(|i| (0..n).filter(|&k| k != i).all(|k| t_at(t, n, i, b.item_of(i), k, b.item_of(k)) > 0.5));
    all_pairs.then_some(b)
}

/// Agent whose relaxation support spans the most items.
fn branching_agent(t: &[f64], n: usize, allowed: &[Vec<bool>]) -> usize {
    let mut best = (0, 0usize);
    for i in 0..n {
        let free = allowed[i].iter().filter(|&&a| a).count();
        if free <= 1 {
            continue;
        }
        let mut items = 0;
        for j in 0..n {
            let mass: f64 =
                (0..n).filter(|&k| k != i).map(|k| (0..n).map(|l| t_at(t, n, i, j, k, l)).sum::<f64>()).sum();
            if mass > INTEGRAL_TOL {
                items += 1;
            }
        }
        if items > best.1 {
            best = (i, items);
        }
    }
    if best.1 == 0 {
        (0..n).find(|&i| allowed[i].iter().filter(|&&a| a).count() > 1).unwrap_or(0)
    } else {
        best.0
    }
}

fn fix_edge(allowed: &[Vec<bool>], i: usize, j: usize) -> Vec<Vec<bool>> {
    let mut out = allowed.to_vec();
    for (a, row) in out.iter_mut().enumerate() {
        for (item, cell) in row.iter_mut().enumerate() {
            if (a == i) != (item == j) {
                *cell = false;
            }
        }
    }
    out
}

struct Search<'a> {
    w: &'a EdgePairWeights,
    best: Option<(Matching, f64)>,
    stats: TwoEbmStats,
}

impl Search<'_> {
    fn offer(&mut self, b: Matching) {
        let value = self.w.objective(&b);
        if self.best.as_ref().is_none_or(|(_, v)| value > *v + BOUND_TOL) {
            self.best = Some((b, value));
        }
    }

    fn node(&mut self, allowed: Vec<Vec<bool>>, root: bool) -> Result<()> {
        let n = self.w.n();
        if perfect_matching(&allowed).is_none() {
            return Ok(());
        }
        self.stats.branch_nodes += 1;
        let Some(relax) = solve_relaxation(self.w, &allowed)? else {
            return Ok(());
        };
        self.stats.lp_solves += 1;
        if let Some((_, v)) = &self.best {
            if relax.value <= *v + BOUND_TOL {
                return Ok(());
            }
        }
        let frac = fractionality(&relax.t);
        self.stats.max_fractionality = self.stats.max_fractionality.max(frac);
        if frac <= INTEGRAL_TOL {
            if let Some(b) = vertex_matching(&relax.t, n) {
                if root {
                    self.stats.root_is_matching = true;
                }
                self.offer(b);
                return Ok(());
            }
            self.stats.non_matching_vertices += 1;
        } else {
            // not a vertex: decompose and try every permutation in it
            self.stats.peel_calls += 1;
            let map = PairIndexMap::new(n);
            let cs = to_cs_matrix(&relax.t, &map)?;
            for term in peel_cs_permutation(&cs)? {
                if let Some(b) = permutation_to_matching(&term.perm, &map) {
                    if self.w.respects_mask(&b) {
                        self.offer(b);
                    }
                }
            }
        }
        // incumbent from the item marginals of the relaxation
        let marg: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).filter(|&k| k != i).map(|k| (0..n).map(|l| t_at(&relax.t, n, i, j, k, l)).sum::<f64>()).sum())
                    .collect()
            })
            .collect();
        if let Some((b, _)) = max_weight_assignment_masked(&marg, &allowed) {
            self.offer(b);
        }
        if let Some((_, v)) = &self.best {
            if relax.value <= *v + BOUND_TOL {
                return Ok(());
            }
        }
        let i = branching_agent(&relax.t, n, &allowed);
        for j in 0..n {
            if allowed[i][j] {
                self.node(fix_edge(&allowed, i, j), false)?;
            }
        }
        Ok(())
    }
}

fn check_input(w: &EdgePairWeights) -> Result<Vec<Vec<bool>>> {
    if w.n() < 2 {
        return Err(Error::InvalidParameter(format!("2EBM needs n >= 2, got {}", w.n())));
    }
    let mask = w.mask();
    if perfect_matching(&mask).is_none() {
        return Err(Error::NoPerfectMatching);
    }
    Ok(mask)
}

fn search(w: &EdgePairWeights, allowed: Vec<Vec<bool>>, stats: &mut TwoEbmStats) -> Result<Option<(Matching, f64)>> {
    let mut s = Search { w, best: None, stats: std::mem::take(stats) };
    s.node(allowed, true)?;
    *stats = s.stats;
    Ok(s.best)
}

/// An optimal matching, without the lexicographic tie-break. Used by the
/// pricing oracles, where any maximizer will do.
pub fn solve_2ebm_any(w: &EdgePairWeights) -> Result<TwoEbmSolution> {
    let mask = check_input(w)?;
    let mut stats = TwoEbmStats::default();
    let (matching, value) = search(w, mask, &mut stats)?.ok_or(Error::NoPerfectMatching)?;
    Ok(TwoEbmSolution { matching, value, stats })
}

/// The lexicographically smallest optimal matching within the mask.
pub fn solve_2ebm(w: &EdgePairWeights) -> Result<TwoEbmSolution> {
    let first = solve_2ebm_any(w)?;
    let n = w.n();
    let target = first.value;
    let mut stats = first.stats;
    let mut current = first.matching;
    let mut mask = w.mask();
    for i in 0..n {
        for j in 0..n {
            if !mask[i][j] {
                continue;
            }
            if j == current.item_of(i) {
                mask = fix_edge(&mask, i, j);
                break;
            }
            let fixed = fix_edge(&mask, i, j);
            if let Some((b, v)) = search(w, fixed.clone(), &mut stats)? {
                if v >= target - BOUND_TOL {
                    current = b;
                    mask = fixed;
                    break;
                }
            }
        }
    }
    let value = w.objective(&current);
    Ok(TwoEbmSolution { matching: current, value, stats })
}

/// Exhaustive maximum over all matchings respecting the mask; ties go to the
/// lexicographically smallest assignment.
pub fn brute_force_2ebm(w: &EdgePairWeights) -> Result<(Matching, f64)> {
    if w.n() > BRUTE_FORCE_MAX_N {
        return Err(Error::CapExceeded { states: (1..=w.n() as u128).product(), cap: 40320 });
    }
    let scored: Vec<(Matching, f64)> =
        all_matchings(w.n()).filter(|b| w.respects_mask(b)).map(|b| (b.clone(), w.objective(&b))).collect();
    let max = scored.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    scored.into_iter().find(|(_, v)| *v >= max - BOUND_TOL).ok_or(Error::NoPerfectMatching)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_by_two() {
        let mut w = EdgePairWeights::new(2);
        w.set(0, 0, 1, 1, 1.0);
        w.set(1, 1, 0, 0, 1.0);
        let sol = solve_2ebm(&w).unwrap();
        assert_eq!(sol.matching, Matching::identity(2));
        assert!((sol.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn no_perfect_matching_is_an_error() {
        let mut w = EdgePairWeights::new(2);
        w.forbid(0, 0);
        w.forbid(1, 0);
        assert!(matches!(solve_2ebm(&w), Err(Error::NoPerfectMatching)));
    }

    #[test]
    fn random_instances_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [3usize, 4] {
            for _ in 0..30 {
                let w = EdgePairWeights::from_fn(n, |_, _, _, _| rng.gen_range(-1.0..1.0));
                let sol = solve_2ebm(&w).unwrap();
                let (bb, bv) = brute_force_2ebm(&w).unwrap();
                assert!((sol.value - bv).abs() < 1e-7, "n={n}: {} vs {}", sol.value, bv);
                assert_eq!(sol.matching, bb);
                assert!(sol.stats.max_fractionality <= 1e-6);
            }
        }
    }

    #[test]
    fn masked_instances_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = 4;
            let mut w = EdgePairWeights::from_fn(n, |_, _, _, _| rng.gen_range(-1.0..1.0));
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.gen_bool(0.3) {
                        w.forbid(i, j);
                    }
                }
            }
            let sol = solve_2ebm(&w).unwrap();
            let (_, bv) = brute_force_2ebm(&w).unwrap();
            assert!(w.respects_mask(&sol.matching));
            assert!((sol.value - bv).abs() < 1e-7);
        }
    }

    #[test]
    fn assignment_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let weights: Vec<Vec<f64>> = (0..4).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let w = EdgePairWeights::from_edge_weights(&weights);
            let (_, direct) = max_weight_assignment(&weights);
            assert!((solve_2ebm(&w).unwrap().value - direct).abs() < 1e-7);
        }
    }

    #[test]
    fn relaxation_solutions_are_cs_doubly_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 4;
        let map = PairIndexMap::new(n);
        for _ in 0..10 {
            let w = EdgePairWeights::from_fn(n, |_, _, _, _| rng.gen_range(-1.0..1.0));
            let relax = solve_relaxation(&w, &w.mask()).unwrap().unwrap();
            let cs = to_cs_matrix(&relax.t, &map).unwrap();
            assert!(cs.is_integral(1e-6));
        }
    }
}
