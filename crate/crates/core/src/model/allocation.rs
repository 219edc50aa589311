use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::instance::Instance;
use super::scalar::{parse_rat, rat_from_json, sig12, Rat, Scalar};
use crate::error::{Error, Result};

/// A perfect matching: entry `i` is the item given to agent `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Matching(Vec<usize>);

impl Matching {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        let n = assignment.len();
        let mut seen = vec![false; n];
        for (agent, &item) in assignment.iter().enumerate() {
            if item >= n {
                return Err(Error::InvalidMatching(format!("agent {agent} gets item {item} >= {n}")));
            }
            if std::mem::replace(&mut seen[item], true) {
                return Err(Error::InvalidMatching(format!("item {item} assigned twice")));
            }
        }
        Ok(Self(assignment))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn item_of(&self, agent: usize) -> usize {
        self.0[agent]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn to_allocation(&self) -> Allocation {
        Allocation { bundles: self.0.iter().map(|&j| vec![j]).collect() }
    }

    /// Parses the `a-c-b` notation (agent order, items lettered from `a`).
    pub fn from_letters(text: &str) -> Result<Self> {
        let items = text
            .split('-')
            .map(|s| {
                let mut chars = s.trim().chars();
                match (chars.next(), chars.next()) {
                    (Some(c @ 'a'..='z'), None) => Ok(c as usize - 'a' as usize),
                    _ => Err(Error::Parse(format!("bad matching token {s:?} in {text:?}"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(items)
    }
}

impl fmt::Display for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letters = self.0.len() <= 26;
        for (pos, &j) in self.0.iter().enumerate() {
            if pos > 0 {
                f.write_str("-")?;
            }
            if letters {
                write!(f, "{}", (b'a' + j as u8) as char)?;
            } else {
                write!(f, "{j}")?;
            }
        }
        Ok(())
    }
}

/// A partition of the items into one bundle per agent. Bundles are kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Allocation {
    bundles: Vec<Vec<usize>>,
}

impl Allocation {
    pub fn new(mut bundles: Vec<Vec<usize>>, n_items: usize) -> Result<Self> {
        let mut owner = vec![None; n_items];
        for (agent, bundle) in bundles.iter_mut().enumerate() {
            bundle.sort_unstable();
            for &item in bundle.iter() {
                if item >= n_items {
                    return Err(Error::InvalidAllocation(format!("item {item} out of range")));
                }
                if let Some(prev) = owner[item].replace(agent) {
                    return Err(Error::InvalidAllocation(format!(
                        "item {item} given to agents {prev} and {agent}"
                    )));
                }
            }
        }
        if let Some(item) = owner.iter().position(Option::is_none) {
            return Err(Error::InvalidAllocation(format!("item {item} is not allocated")));
        }
        Ok(Self { bundles })
    }

    /// `owners[j]` is the agent receiving item `j`.
    pub fn from_owners(owners: &[usize], n_agents: usize) -> Result<Self> {
        let mut bundles = vec![Vec::new(); n_agents];
        for (item, &agent) in owners.iter().enumerate() {
            if agent >= n_agents {
                return Err(Error::InvalidAllocation(format!("agent {agent} out of range")));
            }
            bundles[agent].push(item);
        }
        Ok(Self { bundles })
    }

    pub fn n_agents(&self) -> usize {
        self.bundles.len()
    }

    pub fn n_items(&self) -> usize {
        self.bundles.iter().map(Vec::len).sum()
    }

    pub fn bundle(&self, agent: usize) -> &[usize] {
        &self.bundles[agent]
    }

    pub fn bundles(&self) -> &[Vec<usize>] {
        &self.bundles
    }

    /// The matching this allocation represents, when every bundle is a singleton.
    pub fn as_matching(&self) -> Option<Matching> {
        if self.bundles.iter().all(|b| b.len() == 1) {
            Matching::new(self.bundles.iter().map(|b| b[0]).collect()).ok()
        } else {
            None
        }
    }

    pub fn check_fits(&self, instance: &Instance) -> Result<()> {
        if self.n_agents() != instance.n_agents() || self.n_items() != instance.n_items() {
            return Err(Error::DimensionMismatch(format!(
                "allocation over {} agents/{} items, instance has {}/{}",
                self.n_agents(),
                self.n_items(),
                instance.n_agents(),
                instance.n_items()
            )));
        }
        Ok(())
    }
}

impl From<&Matching> for Allocation {
    fn from(m: &Matching) -> Self {
        m.to_allocation()
    }
}

/// A finite lottery over allocations.
#[derive(Clone, Debug, PartialEq)]
pub struct Lottery<T> {
    support: Vec<(Allocation, T)>,
}

/// Probabilities summing to one within this slack are accepted in float mode.
pub const FLOAT_SUM_TOL: f64 = 1e-7;

impl<T: Scalar> Lottery<T> {
    /// Validates positivity, normalization and distinctness of the support.
    pub fn new(support: Vec<(Allocation, T)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidLottery("empty support".into()));
        }
        let shape = (support[0].0.n_agents(), support[0].0.n_items());
        let mut total = T::zero();
        for (pos, (alloc, p)) in support.iter().enumerate() {
            if (alloc.n_agents(), alloc.n_items()) != shape {
                return Err(Error::InvalidLottery(format!("support entry {pos} has a different shape")));
            }
            if *p <= T::zero() {
                return Err(Error::InvalidLottery(format!("support entry {pos} has probability {p:?}")));
            }
            total = total + p.clone();
        }
        let off = (total - T::one()).abs_val();
        let ok = if T::EXACT { off.is_zero() } else { off.to_f64() <= FLOAT_SUM_TOL };
        if !ok {
            return Err(Error::InvalidLottery(format!("probabilities sum to 1{:+e}", off.to_f64())));
        }
        let mut sorted: Vec<&Allocation> = support.iter().map(|(a, _)| a).collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidLottery("support entries are not distinct".into()));
        }
        Ok(Self { support })
    }

    /// Like [`Lottery::new`] but merges repeated outcomes first.
    pub fn merged(entries: impl IntoIterator<Item = (Allocation, T)>) -> Result<Self> {
        let mut acc: BTreeMap<Allocation, T> = BTreeMap::new();
        let mut order = Vec::new();
        for (alloc, p) in entries {
            match acc.get_mut(&alloc) {
                Some(q) => *q = q.clone() + p,
                None => {
                    order.push(alloc.clone());
                    acc.insert(alloc, p);
                }
            }
        }
        let support = order
            .into_iter()
            .map(|a| {
                let p = acc.remove(&a).expect("present");
                (a, p)
            })
            .collect();
        Self::new(support)
    }

    pub fn deterministic(alloc: Allocation) -> Self {
        Self { support: vec![(alloc, T::one())] }
    }

    pub fn uniform(allocs: Vec<Allocation>) -> Result<Self> {
        let p = T::one() / T::from_usize(allocs.len());
        Self::new(allocs.into_iter().map(|a| (a, p.clone())).collect())
    }

    pub fn from_matchings(entries: Vec<(Matching, T)>) -> Result<Self> {
        Self::new(entries.into_iter().map(|(m, p)| (m.to_allocation(), p)).collect())
    }

    pub fn support(&self) -> &[(Allocation, T)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn n_agents(&self) -> usize {
        self.support[0].0.n_agents()
    }

    pub fn n_items(&self) -> usize {
        self.support[0].0.n_items()
    }

    pub fn as_matchings(&self) -> Option<Vec<(Matching, T)>> {
        self.support.iter().map(|(a, p)| a.as_matching().map(|m| (m, p.clone()))).collect()
    }

    pub fn check_fits(&self, instance: &Instance) -> Result<()> {
        self.support[0].0.check_fits(instance)
    }

    /// Marginal distribution of agent `i`'s bundle.
    pub fn bundle_marginal(&self, agent: usize) -> BTreeMap<Vec<usize>, T> {
        let mut out: BTreeMap<Vec<usize>, T> = BTreeMap::new();
        for (alloc, p) in &self.support {
            let key = alloc.bundle(agent).to_vec();
            let entry = out.entry(key).or_insert_with(T::zero);
            *entry = entry.clone() + p.clone();
        }
        out
    }

    /// Probability that agent `i` receives item `j`, as a dense matrix.
    pub fn item_marginals(&self) -> Vec<Vec<T>> {
        let n = self.n_agents();
        let m = self.n_items();
        let mut out = vec![vec![T::zero(); m]; n];
        for (alloc, p) in &self.support {
            for (i, row) in out.iter_mut().enumerate() {
                for &j in alloc.bundle(i) {
                    row[j] = row[j].clone() + p.clone();
                }
            }
        }
        out
    }

    pub fn map_prob<U: Scalar>(&self) -> Lottery<U> {
        Lottery {
            support: self.support.iter().map(|(a, p)| (a.clone(), U::from_f64(p.to_f64()))).collect(),
        }
    }

    pub fn to_json(&self) -> LotteryJson {
        LotteryJson {
            support: self
                .support
                .iter()
                .map(|(alloc, p)| {
                    let prob = if T::EXACT {
                        serde_json::Value::String(format!("{}", p.to_num()))
                    } else {
                        serde_json::json!(sig12(p.to_f64()))
                    };
                    match alloc.as_matching() {
                        Some(m) => OutcomeJson { matching: Some(m.as_slice().to_vec()), bundles: None, prob },
                        None => OutcomeJson { matching: None, bundles: Some(alloc.bundles().to_vec()), prob },
                    }
                })
                .collect(),
        }
    }
}

impl Lottery<Rat> {
    pub fn to_float(&self) -> Lottery<f64> {
        self.map_prob()
    }
}

/// Wire form: `{"support": [{"matching": [..], "prob": "1/2"}, ...]}`, or
/// `"bundles": [[..], ..]` for general allocations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LotteryJson {
    pub support: Vec<OutcomeJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutcomeJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matching: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundles: Option<Vec<Vec<usize>>>,
    pub prob: serde_json::Value,
}

/// A lottery read from JSON: exact when every probability is a string.
#[derive(Clone, Debug)]
pub enum AnyLottery {
    Exact(Lottery<Rat>),
    Float(Lottery<f64>),
}

impl AnyLottery {
    pub fn from_json(json: &LotteryJson, instance: &Instance) -> Result<Self> {
        let mut outcomes = Vec::with_capacity(json.support.len());
        let mut exact = true;
        for (pos, entry) in json.support.iter().enumerate() {
            let alloc = match (&entry.matching, &entry.bundles) {
                (Some(m), None) => {
                    if m.len() != instance.n_agents() {
                        return Err(Error::DimensionMismatch(format!(
                            "support entry {pos}: matching of length {} for {} agents",
                            m.len(),
                            instance.n_agents()
                        )));
                    }
                    if !instance.is_matching_instance() {
                        return Err(Error::NotMatchingInstance {
                            agents: instance.n_agents(),
                            items: instance.n_items(),
                        });
                    }
                    Matching::new(m.clone())?.to_allocation()
                }
                (None, Some(b)) => {
                    if b.len() != instance.n_agents() {
                        return Err(Error::DimensionMismatch(format!(
                            "support entry {pos}: {} bundles for {} agents",
                            b.len(),
                            instance.n_agents()
                        )));
                    }
                    Allocation::new(b.clone(), instance.n_items())?
                }
                _ => {
                    return Err(Error::Parse(format!(
                        "support entry {pos} needs exactly one of \"matching\" or \"bundles\""
                    )))
                }
            };
            if !entry.prob.is_string() {
                exact = false;
            }
            outcomes.push((alloc, &entry.prob));
        }
        if exact {
            let support = outcomes
                .into_iter()
                .map(|(a, p)| Ok((a, rat_from_json(p)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(AnyLottery::Exact(Lottery::new(support)?))
        } else {
            let support = outcomes
                .into_iter()
                .map(|(a, p)| {
                    let x = match p {
                        serde_json::Value::Number(n) => n.as_f64().unwrap_or(f64::NAN),
                        serde_json::Value::String(s) => parse_rat(s)?.to_f64(),
                        other => return Err(Error::Parse(format!("bad probability {other}"))),
                    };
                    Ok((a, x))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AnyLottery::Float(Lottery::new(support)?))
        }
    }

    pub fn to_float(&self) -> Lottery<f64> {
        match self {
            AnyLottery::Exact(l) => l.to_float(),
            AnyLottery::Float(l) => l.clone(),
        }
    }
}

impl<T: Scalar> Lottery<T> {
    pub fn total_probability(&self) -> T {
        self.support.iter().fold(T::zero(), |acc, (_, p)| acc + p.clone())
    }

    pub fn is_deterministic(&self) -> bool {
        self.support.len() == 1 && self.support[0].1 == T::one()
    }
}
