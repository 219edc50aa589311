//! Decision procedures for the fairness properties of deterministic
//! allocations and of lotteries.
//!
//! Checkers over lotteries are generic over [`Scalar`]: with [`Rat`] they are
//! exact; with `f64` every slack gets the absolute tolerance
//! [`crate::model::FLOAT_SLACK_TOL`].

mod brute;

use num_traits::Zero;
use serde::Serialize;

use crate::error::Result;
use crate::model::{bundle_value_with, conditional_value_with, Allocation, Instance, Lottery, Num, Rat, Scalar};

pub use brute::{
    allocation_count, enumerate_allocations, exists_eef_allocation, exists_mms_allocation, is_eef, is_mms,
    mms_shares, MmsShares, ALLOCATION_CAP,
};

/// What a violated property points at.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Agent `agent` envies `other`.
    Pair { agent: usize, other: usize },
    /// The iEF condition of `agent` towards `other` fails when holding `bundle`.
    Conditional { agent: usize, other: usize, bundle: Vec<usize> },
    /// `agent` falls short of a per-agent threshold.
    Agent { agent: usize },
    /// The support entry at `index` breaks the property.
    SupportEntry { index: usize, inner: Box<Witness> },
    /// A violating allocation (used by existence searches).
    Allocation { bundles: Vec<Vec<usize>> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FairnessReport {
    pub property: String,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// Minimum over all checked constraints of LHS - RHS; `None` when there
    /// was nothing to check.
    pub margin: Option<Num>,
}

/// Tracks the tightest constraint seen so far.
pub(crate) struct MarginTracker<T> {
    worst: Option<(T, Witness)>,
}

impl<T: Scalar> MarginTracker<T> {
    pub(crate) fn new() -> Self {
        Self { worst: None }
    }

    pub(crate) fn observe(&mut self, slack: T, witness: impl FnOnce() -> Witness) {
        let replace = match &self.worst {
            None => true,
            Some((w, _)) => slack < *w,
        };
        if replace {
            self.worst = Some((slack, witness()));
        }
    }

    pub(crate) fn finish(self, property: &str) -> FairnessReport {
        match self.worst {
            None => FairnessReport { property: property.into(), holds: true, witness: None, margin: None },
            Some((slack, witness)) => {
                let holds = slack.is_nonneg_tol();
                FairnessReport {
                    property: property.into(),
                    holds,
                    witness: if holds { None } else { Some(witness) },
                    margin: Some(slack.to_num()),
                }
            }
        }
    }
}

fn ef_tracker<T: Scalar>(values: &[Vec<T>], alloc: &Allocation) -> MarginTracker<T> {
    let n = alloc.n_agents();
    let mut tracker = MarginTracker::new();
    for i in 0..n {
        let own = bundle_value_with(values, i, alloc.bundle(i));
        for k in (0..n).filter(|&k| k != i) {
            let slack = own.clone() - bundle_value_with(values, i, alloc.bundle(k));
            tracker.observe(slack, || Witness::Pair { agent: i, other: k });
        }
    }
    tracker
}

/// `v_i(A_i) >= v_i(A_k)` for every pair.
pub fn is_envy_free(instance: &Instance, alloc: &Allocation) -> Result<FairnessReport> {
    alloc.check_fits(instance)?;
    Ok(ef_tracker(instance.values(), alloc).finish("ef"))
}

fn proportional_tracker<T: Scalar>(values: &[Vec<T>], alloc: &Allocation) -> MarginTracker<T> {
    let n = alloc.n_agents();
    let mut tracker = MarginTracker::new();
    for (i, row) in values.iter().enumerate() {
        let total = row.iter().fold(T::zero(), |a, v| a + v.clone());
        let slack = bundle_value_with(values, i, alloc.bundle(i)) - total / T::from_usize(n);
        tracker.observe(slack, || Witness::Agent { agent: i });
    }
    tracker
}

/// `v_i(A_i) >= v_i(I) / n` for every agent.
pub fn is_proportional(instance: &Instance, alloc: &Allocation) -> Result<FairnessReport> {
    alloc.check_fits(instance)?;
    Ok(proportional_tracker(instance.values(), alloc).finish("proportional"))
}

/// Float-tolerant proportionality, for allocations produced by the LP engines.
pub fn is_proportional_with<T: Scalar>(instance: &Instance, alloc: &Allocation) -> Result<FairnessReport> {
    alloc.check_fits(instance)?;
    Ok(proportional_tracker(&instance.values_as::<T>(), alloc).finish("proportional"))
}

/// Interim envy-freeness with additive slack `epsilon`: for every agent `i`,
/// every bundle `S` she receives with positive probability and every `k != i`,
/// `v_i(S) >= E[v_i(A_k) | A_i = S] - epsilon`.
pub fn is_ief<T: Scalar>(instance: &Instance, lottery: &Lottery<T>, epsilon: T) -> Result<FairnessReport> {
    lottery.check_fits(instance)?;
    let values = instance.values_as::<T>();
    let n = instance.n_agents();
    let mut tracker = MarginTracker::new();
    for i in 0..n {
        for bundle in lottery.bundle_marginal(i).into_keys() {
            let own = bundle_value_with(&values, i, &bundle);
            for k in (0..n).filter(|&k| k != i) {
                let cond = conditional_value_with(&values, lottery, i, k, &bundle)?;
                let slack = own.clone() - cond + epsilon.clone();
                tracker.observe(slack, || Witness::Conditional { agent: i, other: k, bundle: bundle.clone() });
            }
        }
    }
    Ok(tracker.finish("ief"))
}

/// `E[v_i(A_i)] >= E[v_i(A_k)]` for every pair.
pub fn is_ex_ante_ef<T: Scalar>(instance: &Instance, lottery: &Lottery<T>) -> Result<FairnessReport> {
    lottery.check_fits(instance)?;
    let values = instance.values_as::<T>();
    let n = instance.n_agents();
    // expected[i][k] = E[v_i(A_k)]
    let mut expected = vec![vec![T::zero(); n]; n];
    for (alloc, p) in lottery.support() {
        for (i, row) in expected.iter_mut().enumerate() {
            for (k, cell) in row.iter_mut().enumerate() {
                *cell = cell.clone() + p.clone() * bundle_value_with(&values, i, alloc.bundle(k));
            }
        }
    }
    let mut tracker = MarginTracker::new();
    for i in 0..n {
        for k in (0..n).filter(|&k| k != i) {
            let slack = expected[i][i].clone() - expected[i][k].clone();
            tracker.observe(slack, || Witness::Pair { agent: i, other: k });
        }
    }
    Ok(tracker.finish("ex_ante_ef"))
}

/// Every allocation in the support is envy-free.
pub fn is_ex_post_ef<T: Scalar>(instance: &Instance, lottery: &Lottery<T>) -> Result<FairnessReport> {
    lottery.check_fits(instance)?;
    let values = instance.values_as::<T>();
    let mut tracker = MarginTracker::new();
    for (index, (alloc, _)) in lottery.support().iter().enumerate() {
        let inner = ef_tracker(&values, alloc);
        if let Some((slack, witness)) = inner.worst {
            tracker.observe(slack, || Witness::SupportEntry { index, inner: Box::new(witness) });
        }
    }
    Ok(tracker.finish("ex_post_ef"))
}

/// Every allocation in the support is proportional.
pub fn is_ex_post_proportional<T: Scalar>(instance: &Instance, lottery: &Lottery<T>) -> Result<FairnessReport> {
    lottery.check_fits(instance)?;
    let values = instance.values_as::<T>();
    let mut tracker = MarginTracker::new();
    for (index, (alloc, _)) in lottery.support().iter().enumerate() {
        if let Some((slack, witness)) = proportional_tracker(&values, alloc).worst {
            tracker.observe(slack, || Witness::SupportEntry { index, inner: Box::new(witness) });
        }
    }
    Ok(tracker.finish("ex_post_proportional"))
}

/// Largest envy `v_i(A_k) - v_i(A_i)` over support allocations and pairs,
/// floored at zero.
pub fn max_envy<T: Scalar>(instance: &Instance, lottery: &Lottery<T>) -> Result<T> {
    lottery.check_fits(instance)?;
    let values = instance.values_as::<T>();
    let n = instance.n_agents();
    let mut worst = T::zero();
    for (alloc, _) in lottery.support() {
        for i in 0..n {
            let own = bundle_value_with(&values, i, alloc.bundle(i));
            for k in (0..n).filter(|&k| k != i) {
                let envy = bundle_value_with(&values, i, alloc.bundle(k)) - own.clone();
                worst = worst.max_of(envy);
            }
        }
    }
    Ok(worst)
}

/// Exact iEF with zero slack on a rational lottery.
pub fn is_ief_exact(instance: &Instance, lottery: &Lottery<Rat>) -> Result<FairnessReport> {
    is_ief(instance, lottery, Rat::zero())
}
