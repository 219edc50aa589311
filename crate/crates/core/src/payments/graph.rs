use num_traits::Zero;

use crate::error::{Error, Result};
use crate::model::{bundle_value_with, conditional_value_with, Instance, Lottery, Rat, Scalar};
use crate::twoebm::all_matchings;

/// Complete digraph on the agents; `w(i, k)` is the worst conditional envy
/// of `i` towards `k` over the bundles `i` receives.
#[derive(Clone, Debug, PartialEq)]
pub struct InterimEnvyGraph<T> {
    n: usize,
    w: Vec<Vec<T>>,
}

impl<T: Scalar> InterimEnvyGraph<T> {
    pub fn build(instance: &Instance, lottery: &Lottery<T>) -> Result<Self> {
        lottery.check_fits(instance)?;
        let n = instance.n_agents();
        let values = instance.values_as::<T>();
        let mut w = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            let bundles: Vec<Vec<usize>> = lottery.bundle_marginal(i).into_keys().collect();
            for (k, cell) in w[i].iter_mut().enumerate() {
                if k == i {
                    continue;
                }
                let mut best: Option<T> = None;
                for s in &bundles {
                    let gap = conditional_value_with(&values, lottery, i, k, s)? - bundle_value_with(&values, i, s);
                    best = Some(match best {
                        None => gap,
                        Some(b) => b.max_of(gap),
                    });
                }
                *cell = best.expect("every agent holds some bundle");
            }
        }
        Ok(Self { n, w })
    }

    /// Graph with given weights; the diagonal is ignored.
    pub fn from_weights(w: Vec<Vec<T>>) -> Self {
        Self { n: w.len(), w }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, k: usize) -> &T {
        &self.w[i][k]
    }

    pub fn weights(&self) -> &[Vec<T>] {
        &self.w
    }

    /// Longest path weight out of every node, the empty path included.
    /// Bellman-Ford style: `n - 1` rounds suffice without positive cycles,
    /// so an improvement in round `n` reports one.
    pub fn longest_paths(&self) -> Result<Vec<T>> {
        let n = self.n;
        let mut d = vec![T::zero(); n];
        for round in 0..n.max(1) {
            let mut changed = false;
            for i in 0..n {
                for k in (0..n).filter(|&k| k != i) {
                    let cand = self.w[i][k].clone() + d[k].clone();
                    if (cand.clone() - d[i].clone()).is_pos_tol() {
                        d[i] = cand;
                        changed = true;
                    }
                }
            }
            if !changed {
                return Ok(d);
            }
            if round + 1 == n.max(1) {
                return Err(Error::PositiveCycle);
            }
        }
        Ok(d)
    }
}

pub fn build_envy_graph<T: Scalar>(instance: &Instance, lottery: &Lottery<T>) -> Result<InterimEnvyGraph<T>> {
    InterimEnvyGraph::build(instance, lottery)
}

/// Whether some vector of per-agent payments makes the lottery iEF, i.e.
/// whether the graph has no positive-weight cycle.
pub fn is_ief_able_a<T: Scalar>(graph: &InterimEnvyGraph<T>) -> bool {
    graph.longest_paths().is_ok()
}

/// Per-agent subsidies `p_i` = longest path weight from `i`.
pub fn compute_a_payments<T: Scalar>(graph: &InterimEnvyGraph<T>) -> Result<Vec<T>> {
    graph.longest_paths()
}

/// Cap on `n! * prod_i |bundles of i|` for [`permutation_condition`].
pub const PERMUTATION_CAP: u128 = 5_000_000;

/// For every choice of a support bundle `S_i` per agent and every
/// permutation `sigma`, `sum v_i(S_i) >= sum E[v_i(A_sigma(i)) | A_i = S_i]`.
/// Checked by enumeration, exactly.
pub fn permutation_condition(instance: &Instance, lottery: &Lottery<Rat>) -> Result<bool> {
    lottery.check_fits(instance)?;
    let n = instance.n_agents();
    let values = instance.values();
    let bundles: Vec<Vec<Vec<usize>>> =
        (0..n).map(|i| lottery.bundle_marginal(i).into_keys().collect()).collect();
    let states: u128 =
        (1..=n as u128).product::<u128>() * bundles.iter().map(|b| b.len() as u128).product::<u128>();
    if states > PERMUTATION_CAP {
        return Err(Error::CapExceeded { states, cap: PERMUTATION_CAP });
    }
    // gain[i][s][k] = E[v_i(A_k) | A_i = S] - v_i(S)
    let mut gain: Vec<Vec<Vec<Rat>>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut per_bundle = Vec::new();
        for s in &bundles[i] {
            let own = bundle_value_with(values, i, s);
            let row = (0..n)
                .map(|k| {
                    if k == i {
                        Ok(Rat::zero())
                    } else {
                        Ok(conditional_value_with(values, lottery, i, k, s)? - &own)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            per_bundle.push(row);
        }
        gain.push(per_bundle);
    }
    let perms: Vec<Vec<usize>> = all_matchings(n).map(|m| m.as_slice().to_vec()).collect();
    let mut choice = vec![0usize; n];
    loop {
        for sigma in &perms {
            let total: Rat = (0..n).map(|i| &gain[i][choice[i]][sigma[i]]).sum();
            if total > Rat::zero() {
                return Ok(false);
            }
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(true);
            }
            choice[pos] += 1;
            if choice[pos] < bundles[pos].len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}
