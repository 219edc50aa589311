//! Grid search comparing the best per-agent (A) and per-item (B) payment
//! schemes over lotteries whose probabilities are multiples of `1 / D`.

use crate::error::{Error, Result};
use crate::lpengine::{dense_lp_solve, DenseLp, RowKind, Sense};
use crate::model::{rat, Instance, Lottery, Matching, Rat};
use crate::twoebm::all_matchings;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CompareProblem {
    /// Minimize the total subsidy.
    Subsidy,
    /// Maximize the minimum expected utility with the given rent.
    Rent(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportSet {
    All,
    /// Matchings in which every agent gets at least `1/n` of their total value.
    Proportional,
}

#[derive(Clone, Copy, Debug)]
pub struct CompareConfig {
    pub problem: CompareProblem,
    pub denominator: u32,
    pub support: SupportSet,
    /// Cap on the number of grid lotteries.
    pub cap: u128,
}

impl CompareConfig {
    pub fn new(problem: CompareProblem) -> Self {
        Self { problem, denominator: 12, support: SupportSet::All, cap: 100_000 }
    }
}

#[derive(Clone, Debug)]
pub struct PaymentOptimum {
    /// Total subsidy, or minimum expected utility for rent.
    pub value: f64,
    pub lottery: Lottery<Rat>,
    /// Per agent for A, per item for B. Rent payments are negative.
    pub payments: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct CompareReport {
    pub best_a: Option<PaymentOptimum>,
    pub best_b: Option<PaymentOptimum>,
    pub lotteries: usize,
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Calls `f` with every vector of `parts` nonnegative integers summing to `total`.
fn for_each_composition(parts: usize, total: u32, f: &mut impl FnMut(&[u32])) {
    fn rec(buf: &mut Vec<u32>, parts: usize, left: u32, f: &mut impl FnMut(&[u32])) {
        if buf.len() + 1 == parts {
            buf.push(left);
            f(buf);
            buf.pop();
            return;
        }
        for c in (0..=left).rev() {
            buf.push(c);
            rec(buf, parts, left - c, f);
            buf.pop();
        }
    }
    rec(&mut Vec::with_capacity(parts), parts, total, f);
}

/// Conditional law of the lottery: `mass[i][j] = Pr(b(i) = j)` and
/// `pair[i][j][k][l] = Pr(b(k) = l | b(i) = j)`.
struct Conditionals {
    mass: Vec<Vec<f64>>,
    pair: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Conditionals {
    fn new(n: usize, support: &[(Matching, f64)]) -> Self {
        let mut mass = vec![vec![0.0; n]; n];
        let mut pair = vec![vec![vec![vec![0.0; n]; n]; n]; n];
        for (b, p) in support {
            for i in 0..n {
                mass[i][b.item_of(i)] += p;
                for k in 0..n {
                    pair[i][b.item_of(i)][k][b.item_of(k)] += p;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if mass[i][j] > 0.0 {
                    pair[i][j].iter_mut().flatten().for_each(|x| *x /= mass[i][j]);
                }
            }
        }
        Self { mass, pair }
    }

    /// `E[v_i(b(k)) | b(i) = j] - v_i(j)`.
    fn gap(&self, v: &[Vec<f64>], i: usize, j: usize, k: usize) -> f64 {
        let e: f64 = (0..v.len()).map(|l| self.pair[i][j][k][l] * v[i][l]).sum();
        e - v[i][j]
    }

    fn held(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.mass.len()).filter(move |&j| self.mass[i][j] > 0.0)
    }
}

fn solve(lp: &DenseLp<f64>) -> Option<(f64, Vec<f64>)> {
    dense_lp_solve(lp).ok().map(|s| (s.objective, s.x))
}

fn subsidy_a(n: usize, v: &[Vec<f64>], c: &Conditionals) -> Option<(f64, Vec<f64>)> {
    let mut lp = DenseLp::new(Sense::Minimize, vec![1.0; n]);
    for i in 0..n {
        for k in (0..n).filter(|&k| k != i) {
            let w = c.held(i).map(|j| c.gap(v, i, j, k)).fold(f64::NEG_INFINITY, f64::max);
            lp.add_sparse_row(&[(i, 1.0), (k, -1.0)], RowKind::Ge, w);
        }
    }
    solve(&lp)
}

fn subsidy_b(n: usize, v: &[Vec<f64>], c: &Conditionals) -> Option<(f64, Vec<f64>)> {
    let mut lp = DenseLp::new(Sense::Minimize, vec![1.0; n]);
    for i in 0..n {
        for j in c.held(i).collect::<Vec<_>>() {
            for k in (0..n).filter(|&k| k != i) {
                let mut row: Vec<(usize, f64)> = (0..n).map(|l| (l, -c.pair[i][j][k][l])).collect();
                row.push((j, 1.0));
                lp.add_sparse_row(&row, RowKind::Ge, c.gap(v, i, j, k));
            }
        }
    }
    solve(&lp)
}

/// Variables `c_0..c_{n-1}` (contributions, `-p`) and a free `q` at index `n`.
fn rent_a(n: usize, v: &[Vec<f64>], c: &Conditionals, rent: f64) -> Option<(f64, Vec<f64>)> {
    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    let mut lp = DenseLp::new(Sense::Maximize, obj);
    lp.set_free(n);
    lp.add_sparse_row(&(0..n).map(|i| (i, 1.0)).collect::<Vec<_>>(), RowKind::Eq, rent);
    for i in 0..n {
        for k in (0..n).filter(|&k| k != i) {
            let w = c.held(i).map(|j| c.gap(v, i, j, k)).fold(f64::NEG_INFINITY, f64::max);
            lp.add_sparse_row(&[(k, 1.0), (i, -1.0)], RowKind::Ge, w);
        }
        let ev: f64 = (0..n).map(|j| c.mass[i][j] * v[i][j]).sum();
        lp.add_sparse_row(&[(n, 1.0), (i, 1.0)], RowKind::Le, ev);
    }
    solve(&lp).map(|(q, x)| (q, x[..n].iter().map(|c| -c).collect()))
}

fn rent_b(n: usize, v: &[Vec<f64>], c: &Conditionals, rent: f64) -> Option<(f64, Vec<f64>)> {
    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    let mut lp = DenseLp::new(Sense::Maximize, obj);
    lp.set_free(n);
    lp.add_sparse_row(&(0..n).map(|j| (j, 1.0)).collect::<Vec<_>>(), RowKind::Eq, rent);
    for i in 0..n {
        for j in c.held(i).collect::<Vec<_>>() {
            for k in (0..n).filter(|&k| k != i) {
                let mut row: Vec<(usize, f64)> = (0..n).map(|l| (l, c.pair[i][j][k][l])).collect();
                row.push((j, -1.0));
                lp.add_sparse_row(&row, RowKind::Ge, c.gap(v, i, j, k));
            }
        }
        let ev: f64 = (0..n).map(|j| c.mass[i][j] * v[i][j]).sum();
        let mut row: Vec<(usize, f64)> = (0..n).map(|j| (j, c.mass[i][j])).collect();
        row.push((n, 1.0));
        lp.add_sparse_row(&row, RowKind::Le, ev);
    }
    solve(&lp).map(|(q, x)| (q, x[..n].iter().map(|c| -c).collect()))
}

fn keep(best: &mut Option<PaymentOptimum>, cand: Option<(f64, Vec<f64>)>, lottery: &Lottery<Rat>, minimize: bool) {
    let Some((value, payments)) = cand else { return };
    let better = match best {
        None => true,
        Some(b) if minimize => value < b.value - 1e-12,
        Some(b) => value > b.value + 1e-12,
    };
    if better {
        *best = Some(PaymentOptimum { value, lottery: lottery.clone(), payments });
    }
}

/// Best A-payment and best B-payment optimum over all grid lotteries.
/// Lotteries for which a scheme is infeasible are skipped for that scheme.
pub fn brute_compare_ab(instance: &Instance, config: &CompareConfig) -> Result<CompareReport> {
    let n = instance.require_matching()?;
    if config.denominator == 0 {
        return Err(Error::InvalidParameter("grid denominator must be positive".into()));
    }
    if let CompareProblem::Rent(r) = config.problem {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("rent must be finite and nonnegative, got {r}")));
        }
    }
    let v = instance.values_f64();
    let matchings: Vec<Matching> = all_matchings(n)
        .filter(|b| match config.support {
            SupportSet::All => true,
            SupportSet::Proportional => {
                (0..n).all(|i| instance.value(i, b.item_of(i)) * rat(n as i64, 1) >= instance.total_value(i))
            }
        })
        .collect();
    if matchings.is_empty() {
        return Ok(CompareReport { best_a: None, best_b: None, lotteries: 0 });
    }
    let d = config.denominator;
    let states = binomial(d as u128 + matchings.len() as u128 - 1, matchings.len() as u128 - 1);
    if states > config.cap {
        return Err(Error::CapExceeded { states, cap: config.cap });
    }
    let mut report = CompareReport { best_a: None, best_b: None, lotteries: 0 };
    let minimize = config.problem == CompareProblem::Subsidy;
    for_each_composition(matchings.len(), d, &mut |counts| {
        let support: Vec<(Matching, Rat)> = matchings
            .iter()
            .zip(counts)
            .filter(|(_, &c)| c > 0)
            .map(|(b, &c)| (b.clone(), rat(c as i64, d as i64)))
            .collect();
        let float: Vec<(Matching, f64)> =
            support.iter().map(|(b, _)| b.clone()).zip(counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / d as f64)).collect();
        let cond = Conditionals::new(n, &float);
        let lottery = Lottery::from_matchings(support).expect("grid weights sum to one");
        report.lotteries += 1;
        let (a, b) = match config.problem {
            CompareProblem::Subsidy => (subsidy_a(n, v, &cond), subsidy_b(n, v, &cond)),
            CompareProblem::Rent(r) => (rent_a(n, v, &cond, r), rent_b(n, v, &cond, r)),
        };
        keep(&mut report.best_a, a, &lottery, minimize);
        keep(&mut report.best_b, b, &lottery, minimize);
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::fixtures;

    #[test]
    fn compositions_are_counted() {
        let mut count = 0;
        for_each_composition(3, 4, &mut |c| {
            assert_eq!(c.iter().sum::<u32>(), 4);
            count += 1;
        });
        assert_eq!(count as u128, binomial(6, 2));
    }

    #[test]
    fn per_item_subsidies_can_beat_per_agent() {
        let f = fixtures::subsidy_b_beats_a();
        let r = brute_compare_ab(&f.instance, &CompareConfig::new(CompareProblem::Subsidy)).unwrap();
        let (a, b) = (r.best_a.unwrap(), r.best_b.unwrap());
        assert!(b.value <= 0.03 + 1e-9, "{}", b.value);
        assert!(a.value >= 1.0 / 3.0 + 0.02 - 1e-9, "{}", a.value);
    }

    #[test]
    fn per_agent_subsidies_can_beat_per_item() {
        let f = fixtures::subsidy_a_beats_b();
        let r = brute_compare_ab(&f.instance, &CompareConfig::new(CompareProblem::Subsidy)).unwrap();
        let (a, b) = (r.best_a.unwrap(), r.best_b.unwrap());
        assert!(a.value <= 0.03 + 1e-9, "{}", a.value);
        assert!(b.value >= 0.06 - 1e-9, "{}", b.value);
    }

    #[test]
    fn identical_agents_need_nothing() {
        let inst = Instance::from_fractions(&[&[(1, 2), (1, 2)], &[(1, 2), (1, 2)]]).unwrap();
        let r = brute_compare_ab(&inst, &CompareConfig::new(CompareProblem::Subsidy)).unwrap();
        assert!(r.best_a.unwrap().value.abs() < 1e-12);
        assert!(r.best_b.unwrap().value.abs() < 1e-12);
        let r = brute_compare_ab(&inst, &CompareConfig::new(CompareProblem::Rent(1.0))).unwrap();
        assert!((r.best_a.unwrap().value - 0.0).abs() < 1e-9);
    }
}
