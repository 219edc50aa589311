//! Welfare-maximizing iEF lotteries over matchings.
//!
//! The LP has one variable per matching, one iEF row per `(i, j, k)` and a
//! convexity row. Columns are generated by 2EBM pricing oracles built from
//! the current duals.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lpengine::{solve_master, ColGenOptions, Column, ColumnProblem, Phase, Priced, RowKind};
use crate::model::{matching_welfare, Instance, Lottery, Matching, Objective, WelfareMeasure};
use crate::twoebm::{perfect_matching, solve_2ebm_any, EdgePairWeights};

/// Probabilities below this are dropped from the returned lottery.
pub const SUPPORT_TOL: f64 = 1e-9;

/// A point of the dual of the welfare LP: `y(i, j, k) >= 0` on the iEF rows
/// and `z` on the convexity row, signed so that the dual constraint for a
/// matching `b` reads `SW(b) + sum y(i,b(i),k) (v_i(b(i)) - v_i(b(k))) + z <= 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualPoint {
    pub n: usize,
    /// Indexed `(i * n + j) * n + k`.
    pub y: Vec<f64>,
    pub z: f64,
}

impl DualPoint {
    pub fn zero(n: usize) -> Self {
        Self { n, y: vec![0.0; n * n * n], z: 0.0 }
    }

    pub fn y(&self, i: usize, j: usize, k: usize) -> f64 {
        self.y[(i * self.n + j) * self.n + k]
    }

    pub fn set_y(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.y[(i * self.n + j) * self.n + k] = v;
    }

    /// Reads a dual point off engine shadow prices laid out as in
    /// [`WelfareProblem::rows`].
    pub(crate) fn from_shadow(n: usize, duals: &[f64]) -> Self {
        let y = duals[..n * n * n].iter().map(|d| -d).collect();
        Self { n, y, z: -duals[n * n * n] }
    }

    /// `sum_{i, k != i} y(i, b(i), k) (v_i(b(i)) - v_i(b(k)))`.
    pub fn envy_term(&self, values: &[Vec<f64>], b: &Matching) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            let j = b.item_of(i);
            for k in (0..n).filter(|&k| k != i) {
                total += self.y(i, j, k) * (values[i][j] - values[i][b.item_of(k)]);
            }
        }
        total
    }

    /// Left-hand side of the dual constraint of `b` for welfare `sw`.
    pub fn constraint_lhs(&self, values: &[Vec<f64>], b: &Matching, sw: f64) -> f64 {
        self.envy_term(values, b) + sw + self.z
    }
}

fn base_psi(values: &[Vec<f64>], dual: &DualPoint, i: usize, j: usize, k: usize, l: usize) -> f64 {
    let n = dual.n as f64;
    (values[i][j] - values[i][l]) * dual.y(i, j, k) + dual.z / (n * (n - 1.0))
}

/// Phase-1 pricing: the dual constraint without the welfare term.
pub fn price_feasibility(values: &[Vec<f64>], dual: &DualPoint) -> EdgePairWeights {
    EdgePairWeights::from_fn(dual.n, |i, j, k, l| base_psi(values, dual, i, j, k, l))
}

pub fn price_utilitarian(values: &[Vec<f64>], dual: &DualPoint) -> EdgePairWeights {
    let half = 2.0 * (dual.n as f64 - 1.0);
    EdgePairWeights::from_fn(dual.n, |i, j, k, l| {
        base_psi(values, dual, i, j, k, l) + (values[i][j] + values[k][l]) / half
    })
}

/// Positive-value edges only.
pub fn positive_mask(values: &[Vec<f64>]) -> Vec<Vec<bool>> {
    values.iter().map(|row| row.iter().map(|&v| v > 0.0).collect()).collect()
}

pub fn price_lognash(values: &[Vec<f64>], dual: &DualPoint) -> EdgePairWeights {
    let half = 2.0 * (dual.n as f64 - 1.0);
    let mask = positive_mask(values);
    EdgePairWeights::from_fn(dual.n, |i, j, k, l| {
        if mask[i][j] && mask[k][l] {
            base_psi(values, dual, i, j, k, l) + (values[i][j].ln() + values[k][l].ln()) / half
        } else {
            0.0
        }
    })
    .with_mask(&mask)
}

/// One restricted 2EBM per distinct value `e` (descending), over edges worth
/// at least `e`. Returns each stratum's maximizer with its true dual
/// constraint value, strata without a perfect matching skipped and
/// duplicates dropped.
pub fn price_egalitarian(values: &[Vec<f64>], levels: &[f64], dual: &DualPoint) -> Result<Vec<(Matching, f64)>> {
    let n = dual.n;
    let nn = n as f64 * (n as f64 - 1.0);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &e in levels {
        let mask: Vec<Vec<bool>> = values.iter().map(|row| row.iter().map(|&v| v >= e).collect()).collect();
        if perfect_matching(&mask).is_none() {
            continue;
        }
        let w = EdgePairWeights::from_fn(n, |i, j, k, l| {
            (values[i][j] - values[i][l]) * dual.y(i, j, k) + (e + dual.z) / nn
        })
        .with_mask(&mask);
        let b = solve_2ebm_any(&w)?.matching;
        if seen.insert(b.clone()) {
            let sw = matching_welfare(values, &b, WelfareMeasure::Egalitarian);
            let lhs = dual.constraint_lhs(values, &b, sw);
            out.push((b, lhs));
        }
    }
    Ok(out)
}

/// The welfare LP as a column-generation problem.
pub struct WelfareProblem {
    n: usize,
    values: Vec<Vec<f64>>,
    objective: Objective,
    levels: Vec<f64>,
    seed: Matching,
}

impl WelfareProblem {
    pub fn new(instance: &Instance, objective: Objective) -> Result<Self> {
        let n = instance.require_matching()?;
        let values = instance.values_f64().to_vec();
        let seed = match objective {
            Objective::LogNash => perfect_matching(&positive_mask(&values)).ok_or(Error::LogNashUnsupportable)?,
            _ => Matching::identity(n),
        };
        let levels = instance.distinct_values_desc().iter().map(crate::model::rat_to_f64).collect();
        Ok(Self { n, values, objective, levels, seed })
    }

    fn welfare(&self, b: &Matching) -> f64 {
        matching_welfare(&self.values, b, WelfareMeasure::from(self.objective))
    }

    fn conv_row(&self) -> usize {
        self.n * self.n * self.n
    }
}

impl ColumnProblem for WelfareProblem {
    type Key = Matching;

    fn rows(&self) -> Vec<(RowKind, f64)> {
        let mut rows = vec![(RowKind::Ge, 0.0); self.n * self.n * self.n];
        rows.push((RowKind::Eq, 1.0));
        rows
    }

    fn column(&self, b: &Matching) -> Column {
        let n = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            let j = b.item_of(i);
            for k in (0..n).filter(|&k| k != i) {
                let c = self.values[i][j] - self.values[i][b.item_of(k)];
                if c != 0.0 {
                    entries.push(((i * n + j) * n + k, c));
                }
            }
        }
        entries.push((self.conv_row(), 1.0));
        Column { cost: self.welfare(b), entries, free: false }
    }

    fn seed(&self) -> Result<Vec<Matching>> {
        Ok(vec![self.seed.clone()])
    }

    fn price(&self, duals: &[f64], phase: Phase, tol: f64) -> Result<Vec<Priced<Matching>>> {
        let dual = DualPoint::from_shadow(self.n, duals);
        let candidates: Vec<(Matching, f64)> = match (phase, self.objective) {
            (Phase::Feasibility, Objective::LogNash) => {
                let w = price_feasibility(&self.values, &dual).with_mask(&positive_mask(&self.values));
                let sol = solve_2ebm_any(&w)?;
                vec![(sol.matching, sol.value)]
            }
            (Phase::Feasibility, _) => {
                let sol = solve_2ebm_any(&price_feasibility(&self.values, &dual))?;
                vec![(sol.matching, sol.value)]
            }
            (Phase::Optimality, Objective::Utilitarian) => {
                let sol = solve_2ebm_any(&price_utilitarian(&self.values, &dual))?;
                vec![(sol.matching, sol.value)]
            }
            (Phase::Optimality, Objective::LogNash) => {
                let sol = solve_2ebm_any(&price_lognash(&self.values, &dual))?;
                vec![(sol.matching, sol.value)]
            }
            (Phase::Optimality, Objective::Egalitarian) => price_egalitarian(&self.values, &self.levels, &dual)?,
        };
        Ok(candidates
            .into_iter()
            .filter(|(_, rc)| *rc > tol)
            .map(|(key, reduced_cost)| Priced { key, reduced_cost })
            .collect())
    }

    fn lagrangian_bound(&self, objective: f64, max_reduced_cost: f64) -> Option<f64> {
        Some(objective + max_reduced_cost.max(0.0))
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub lottery: Lottery<f64>,
    /// Expected welfare of `lottery`.
    pub objective: f64,
    /// Welfare of each support matching, in support order.
    pub support_welfare: Vec<f64>,
    pub duals: DualPoint,
    pub iterations: usize,
    pub phase1_iterations: usize,
}

/// Drops tiny probabilities and renormalizes.
pub(crate) fn prune_support(columns: &[(Matching, f64)]) -> Result<Vec<(Matching, f64)>> {
    let kept: Vec<(Matching, f64)> = columns.iter().filter(|(_, x)| *x > SUPPORT_TOL).cloned().collect();
    let total: f64 = kept.iter().map(|(_, x)| x).sum();
    if kept.is_empty() || total <= 0.0 {
        return Err(Error::Numerical("master solution has no support".into()));
    }
    Ok(kept.into_iter().map(|(b, x)| (b, x / total)).collect())
}

pub fn solve_ief_welfare(instance: &Instance, objective: Objective) -> Result<SolveResult> {
    let n = instance.require_matching()?;
    solve_ief_welfare_with(instance, objective, &ColGenOptions::for_size(n))
}

pub fn solve_ief_welfare_with(instance: &Instance, objective: Objective, opts: &ColGenOptions) -> Result<SolveResult> {
    let n = instance.require_matching()?;
    let problem = match WelfareProblem::new(instance, objective) {
        Err(Error::LogNashUnsupportable) => return Err(lognash_failure(instance, opts)),
        other => other?,
    };
    let res = match solve_master(&problem, opts) {
        Err(Error::Infeasible) if objective == Objective::LogNash => return Err(lognash_failure(instance, opts)),
        other => other?,
    };
    let support = prune_support(&res.columns)?;
    let support_welfare: Vec<f64> = support.iter().map(|(b, _)| problem.welfare(b)).collect();
    let value = support.iter().zip(&support_welfare).map(|((_, x), w)| x * w).sum();
    Ok(SolveResult {
        lottery: Lottery::from_matchings(support)?,
        objective: value,
        support_welfare,
        duals: DualPoint::from_shadow(n, &res.duals),
        iterations: res.iterations,
        phase1_iterations: res.phase1_iterations,
    })
}

/// Distinguishes "no iEF lottery at all" from "none on positive edges".
fn lognash_failure(instance: &Instance, opts: &ColGenOptions) -> Error {
    match WelfareProblem::new(instance, Objective::Utilitarian).and_then(|p| solve_master(&p, opts)) {
        Ok(_) => Error::LogNashUnsupportable,
        Err(e) => e,
    }
}

/// Best welfare of any single matching, ignoring fairness.
pub fn unconstrained_optimum(instance: &Instance, measure: WelfareMeasure) -> Result<(Matching, f64)> {
    let n = instance.require_matching()?;
    let values = instance.values_f64();
    match measure {
        WelfareMeasure::Utilitarian => Ok(crate::twoebm::max_weight_assignment(values)),
        _ => {
            if n > crate::testkit::ENUMERATION_MAX_N {
                return Err(Error::CapExceeded { states: (1..=n as u128).product(), cap: 40_320 });
            }
            let mut best: Option<(Matching, f64)> = None;
            for b in crate::twoebm::all_matchings(n) {
                let w = matching_welfare(values, &b, measure);
                if best.as_ref().is_none_or(|(_, bw)| w > *bw) {
                    best = Some((b, w));
                }
            }
            Ok(best.expect("n! >= 1"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{enumerate_matchings, fixtures};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dual(rng: &mut ChaCha8Rng, n: usize) -> DualPoint {
        let mut d = DualPoint::zero(n);
        for y in d.y.iter_mut() {
            *y = rng.gen_range(0.0..1.0);
        }
        d.z = rng.gen_range(-2.0..2.0);
        d
    }

    #[test]
    fn utilitarian_pricing_aggregates_to_the_dual_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let values = fixtures::pareto_failure().instance.values_f64().to_vec();
        for _ in 0..10 {
            let d = random_dual(&mut rng, 3);
            let w = price_utilitarian(&values, &d);
            for b in enumerate_matchings(3).unwrap() {
                let sw = matching_welfare(&values, &b, WelfareMeasure::Utilitarian);
                assert!((w.objective(&b) - d.constraint_lhs(&values, &b, sw)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn utilitarian_pricing_boundary_cases() {
        let inst = fixtures::pareto_failure().instance;
        let values = inst.values_f64().to_vec();
        let (b0, u0) = unconstrained_optimum(&inst, WelfareMeasure::Utilitarian).unwrap();
        let mut d = DualPoint::zero(3);
        d.z = -u0 - 1.0;
        let sol = solve_2ebm_any(&price_utilitarian(&values, &d)).unwrap();
        assert!((sol.value + 1.0).abs() < 1e-9);

        let d = DualPoint::zero(3);
        let sol = solve_2ebm_any(&price_utilitarian(&values, &d)).unwrap();
        assert!((sol.value - u0).abs() < 1e-9);
        assert!((matching_welfare(&values, &sol.matching, WelfareMeasure::Utilitarian) - u0).abs() < 1e-9);
        let _ = b0;
    }

    #[test]
    fn lognash_pricing_with_unit_values_is_the_feasibility_oracle() {
        let values = vec![vec![1.0; 3]; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = random_dual(&mut rng, 3);
        let a = price_lognash(&values, &d);
        let b = price_feasibility(&values, &d);
        for m in enumerate_matchings(3).unwrap() {
            assert!((a.objective(&m) - b.objective(&m)).abs() < 1e-12);
        }
    }

    #[test]
    fn egalitarian_pricing_finds_a_violating_matching() {
        let values = fixtures::ief_without_ef().instance.values_f64().to_vec();
        let mut d = DualPoint::zero(3);
        d.z = -0.1;
        let levels = [2.0 / 3.0, 0.5, 1.0 / 3.0, 0.0];
        let found = price_egalitarian(&values, &levels, &d).unwrap();
        let best = found.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
        let brute = enumerate_matchings(3)
            .unwrap()
            .map(|b| matching_welfare(&values, &b, WelfareMeasure::Egalitarian) - 0.1)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((best - brute).abs() < 1e-9);
        assert!(best > 0.0);
    }

    #[test]
    fn pareto_fixture_gives_the_uniform_lottery() {
        let inst = fixtures::pareto_failure().instance;
        let res = solve_ief_welfare(&inst, Objective::Utilitarian).unwrap();
        assert!((res.objective - 11.0 / 9.0).abs() < 1e-6);
        assert_eq!(res.lottery.len(), 3);
        for (_, p) in res.lottery.support() {
            assert!((p - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn infeasible_fixture() {
        let inst = fixtures::proportional_without_ief().instance;
        assert!(matches!(solve_ief_welfare(&inst, Objective::Utilitarian), Err(Error::Infeasible)));
    }

    #[test]
    fn lognash_needs_positive_matchings() {
        // agent 0 values nothing, so no matching is positive for it
        let inst = Instance::from_fractions(&[&[(0, 1), (0, 1)], &[(1, 1), (0, 1)]]).unwrap();
        assert!(matches!(solve_ief_welfare(&inst, Objective::LogNash), Err(Error::LogNashUnsupportable)));
    }
}
