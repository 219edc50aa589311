use num_traits::Zero;

use super::{FairnessReport, MarginTracker, Witness};
use crate::error::{Error, Result};
use crate::model::{Allocation, Instance, Rat};

/// Largest number of allocations a brute-force search may visit.
pub const ALLOCATION_CAP: u128 = 2_000_000;

/// `n^m`, saturating.
pub fn allocation_count(n_agents: usize, n_items: usize) -> u128 {
    let mut total: u128 = 1;
    for _ in 0..n_items {
        total = total.saturating_mul(n_agents as u128);
    }
    total
}

fn check_cap(states: u128) -> Result<()> {
    if states > ALLOCATION_CAP {
        Err(Error::CapExceeded { states, cap: ALLOCATION_CAP })
    } else {
        Ok(())
    }
}

/// Owner vectors in lexicographic order, each entry in `0..n`.
struct Odometer {
    digits: Vec<usize>,
    base: usize,
    done: bool,
}

impl Odometer {
    fn new(len: usize, base: usize) -> Self {
        Self { digits: vec![0; len], base, done: base == 0 && len > 0 }
    }
}

impl Iterator for Odometer {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.digits.clone();
        let mut pos = self.digits.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.digits[pos] += 1;
            if self.digits[pos] < self.base {
                break;
            }
            self.digits[pos] = 0;
        }
        Some(out)
    }
}

/// Every allocation of `n_items` items to `n_agents` agents, ordered by owner
/// vector.
pub fn enumerate_allocations(n_agents: usize, n_items: usize) -> Result<impl Iterator<Item = Allocation>> {
    check_cap(allocation_count(n_agents, n_items))?;
    Ok(Odometer::new(n_items, n_agents)
        .map(move |owners| Allocation::from_owners(&owners, n_agents).expect("odometer yields valid owners")))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MmsShares {
    pub tau: Vec<Rat>,
}

/// Smallest achievable maximum bundle value for `row` when `items` are split
/// into `parts` bundles.
fn min_max_split(row: &[Rat], items: &[usize], parts: usize) -> Result<Rat> {
    if items.is_empty() || parts == 0 {
        return Ok(Rat::zero());
    }
    check_cap(allocation_count(parts, items.len()))?;
    let mut best: Option<Rat> = None;
    // the first item can be pinned to bundle 0 by symmetry
    for owners in Odometer::new(items.len() - 1, parts) {
        let mut sums = vec![Rat::zero(); parts];
        sums[0] += &row[items[0]];
        for (idx, &owner) in owners.iter().enumerate() {
            sums[owner] += &row[items[idx + 1]];
        }
        let worst = sums.into_iter().max().expect("parts > 0");
        if best.as_ref().is_none_or(|b| worst < *b) {
            best = Some(worst);
        }
    }
    Ok(best.expect("at least one split"))
}

/// `tau_i = min_A max_j v_i(A_j)` by exhaustive search.
pub fn mms_shares(instance: &Instance) -> Result<MmsShares> {
    let n = instance.n_agents();
    check_cap(allocation_count(n, instance.n_items()))?;
    let items: Vec<usize> = (0..instance.n_items()).collect();
    let tau = instance.values().iter().map(|row| min_max_split(row, &items, n)).collect::<Result<_>>()?;
    Ok(MmsShares { tau })
}

/// `v_i(A_i) >= tau_i` for every agent.
pub fn is_mms(instance: &Instance, alloc: &Allocation, shares: &MmsShares) -> Result<FairnessReport> {
    alloc.check_fits(instance)?;
    if shares.tau.len() != instance.n_agents() {
        return Err(Error::DimensionMismatch(format!(
            "{} shares for {} agents",
            shares.tau.len(),
            instance.n_agents()
        )));
    }
    let mut tracker = MarginTracker::new();
    for (i, tau) in shares.tau.iter().enumerate() {
        tracker.observe(instance.bundle_value(i, alloc.bundle(i)) - tau, || Witness::Agent { agent: i });
    }
    Ok(tracker.finish("mms"))
}

pub fn exists_mms_allocation(instance: &Instance) -> Result<(bool, Option<Allocation>)> {
    let shares = mms_shares(instance)?;
    for alloc in enumerate_allocations(instance.n_agents(), instance.n_items())? {
        if is_mms(instance, &alloc, &shares)?.holds {
            return Ok((true, Some(alloc)));
        }
    }
    Ok((false, None))
}

/// Epistemic envy-freeness: for each agent, some redistribution of the items
/// she does not hold leaves her envy-free.
pub fn is_eef(instance: &Instance, alloc: &Allocation) -> Result<FairnessReport> {
    alloc.check_fits(instance)?;
    let n = instance.n_agents();
    let mut tracker = MarginTracker::new();
    for i in 0..n {
        let own = instance.bundle_value(i, alloc.bundle(i));
        let rest: Vec<usize> = (0..instance.n_items()).filter(|j| !alloc.bundle(i).contains(j)).collect();
        let worst = if n == 1 { Rat::zero() } else { min_max_split(&instance.values()[i], &rest, n - 1)? };
        tracker.observe(own - worst, || Witness::Agent { agent: i });
    }
    Ok(tracker.finish("eef"))
}

pub fn exists_eef_allocation(instance: &Instance) -> Result<(bool, Option<Allocation>)> {
    for alloc in enumerate_allocations(instance.n_agents(), instance.n_items())? {
        if is_eef(instance, &alloc)?.holds {
            return Ok((true, Some(alloc)));
        }
    }
    Ok((false, None))
}
