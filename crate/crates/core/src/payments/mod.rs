//! iEF with payments: per-agent (A), per-bundle (B) and per-agent-and-outcome
//! (C) payment vectors, the interim envy graph, and the subsidy and rent
//! optimizers.

mod compare;
mod graph;
mod lp;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fairness::{FairnessReport, MarginTracker, Witness};
use crate::model::{bundle_value_with, parse_rat, Instance, Lottery, Num, Rat, Scalar};

pub use compare::{brute_compare_ab, CompareConfig, CompareProblem, CompareReport, PaymentOptimum, SupportSet};
pub use graph::{
    build_envy_graph, compute_a_payments, is_ief_able_a, permutation_condition, InterimEnvyGraph, PERMUTATION_CAP,
};
pub use lp::{
    epsilon_repair, expected_utilities, solve_subsidy_min, solve_subsidy_min_with, solve_utility_max,
    solve_utility_max_with, PaymentKey, RepairMode, RepairStats, Repaired, SubsidyProblem, SubsidyResult, UtilityProblem,
    UtilityResult, REPAIR_SUPPORT_TOL, REPAIR_T_TOL,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PaymentKind {
    A,
    B,
    C,
}

impl std::str::FromStr for PaymentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(PaymentKind::A),
            "B" | "b" => Ok(PaymentKind::B),
            "C" | "c" => Ok(PaymentKind::C),
            other => Err(Error::InvalidParameter(format!("unknown payment kind {other:?}"))),
        }
    }
}

/// Payments added to the agents' values. Positive entries are subsidies,
/// negative entries are contributions (rent).
#[derive(Clone, Debug, PartialEq)]
pub enum PaymentScheme<T> {
    /// `p_i` per agent.
    A(Vec<T>),
    /// `p(S)` per bundle; bundles without an entry pay nothing.
    B(BTreeMap<Vec<usize>, T>),
    /// `p_i(A)` per support entry (in support order) and agent.
    C(Vec<Vec<T>>),
}

impl<T: Scalar> PaymentScheme<T> {
    /// B-payments on a matching instance: one value per item.
    pub fn per_item(values: Vec<T>) -> Self {
        Self::per_item_any(values)
    }

    pub fn kind(&self) -> PaymentKind {
        match self {
            PaymentScheme::A(_) => PaymentKind::A,
            PaymentScheme::B(_) => PaymentKind::B,
            PaymentScheme::C(_) => PaymentKind::C,
        }
    }

    fn validate(&self, n: usize, support: usize) -> Result<()> {
        match self {
            PaymentScheme::A(p) if p.len() != n => {
                Err(Error::SchemeMismatch(format!("{} agent payments for {n} agents", p.len())))
            }
            PaymentScheme::C(rows) if rows.len() != support => Err(Error::SchemeMismatch(format!(
                "{} payment rows for a support of size {support}",
                rows.len()
            ))),
            PaymentScheme::C(rows) => match rows.iter().position(|r| r.len() != n) {
                Some(idx) => Err(Error::SchemeMismatch(format!(
                    "payment row {idx} has {} entries for {n} agents",
                    rows[idx].len()
                ))),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Payment to `agent` in support entry `idx` whose bundle is `bundle`.
    fn pay(&self, agent: usize, idx: usize, bundle: &[usize]) -> T {
        match self {
            PaymentScheme::A(p) => p[agent].clone(),
            PaymentScheme::B(p) => p.get(bundle).cloned().unwrap_or_else(T::zero),
            PaymentScheme::C(rows) => rows[idx][agent].clone(),
        }
    }

    /// Expected total payment under the lottery.
    pub fn expected_total(&self, lottery: &Lottery<T>) -> T {
        let mut total = T::zero();
        for (idx, (alloc, p)) in lottery.support().iter().enumerate() {
            for i in 0..alloc.n_agents() {
                total = total + p.clone() * self.pay(i, idx, alloc.bundle(i));
            }
        }
        total
    }

    pub fn to_json(&self) -> serde_json::Value {
        let num = |x: &T| serde_json::to_value(x.to_num()).expect("numbers serialize");
        match self {
            PaymentScheme::A(p) => serde_json::json!({"kind": "A", "values": p.iter().map(num).collect::<Vec<_>>()}),
            PaymentScheme::B(p) => serde_json::json!({
                "kind": "B",
                "values": p.iter().map(|(s, x)| serde_json::json!({"bundle": s, "payment": num(x)})).collect::<Vec<_>>()
            }),
            PaymentScheme::C(rows) => serde_json::json!({
                "kind": "C",
                "values": rows.iter().map(|r| r.iter().map(num).collect::<Vec<_>>()).collect::<Vec<_>>()
            }),
        }
    }
}

impl<T> PaymentScheme<T> {
    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> PaymentScheme<U> {
        match self {
            PaymentScheme::A(p) => PaymentScheme::A(p.iter().map(&f).collect()),
            PaymentScheme::B(p) => PaymentScheme::B(p.iter().map(|(s, x)| (s.clone(), f(x))).collect()),
            PaymentScheme::C(rows) => PaymentScheme::C(rows.iter().map(|r| r.iter().map(&f).collect()).collect()),
        }
    }
}

/// A payment scheme read from JSON: exact when every entry was a `"p/q"`
/// string or carried an `"exact"` field.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyPayments {
    Exact(PaymentScheme<Rat>),
    Float(PaymentScheme<f64>),
}

impl AnyPayments {
    /// Reads `{"kind": "A"|"B"|"C", "values": ...}` as written by
    /// [`PaymentScheme::to_json`]. B values may also be a plain per-item
    /// array. Entries are numbers, rational strings or `{"value", "exact"}`.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let kind: PaymentKind = value
            .get("kind")
            .and_then(|k| k.as_str())
            .ok_or_else(|| Error::Parse("payments need a \"kind\" string".into()))?
            .parse()?;
        let values = value.get("values").ok_or_else(|| Error::Parse("payments need \"values\"".into()))?;
        let list = |v: &serde_json::Value, what: &str| -> Result<Vec<Num>> {
            v.as_array()
                .ok_or_else(|| Error::Parse(format!("{what} must be an array")))?
                .iter()
                .map(num_from_json)
                .collect()
        };
        let scheme: PaymentScheme<Num> = match kind {
            PaymentKind::A => PaymentScheme::A(list(values, "A payments")?),
            PaymentKind::C => PaymentScheme::C(
                values
                    .as_array()
                    .ok_or_else(|| Error::Parse("C payments must be an array of rows".into()))?
                    .iter()
                    .map(|row| list(row, "a C payment row"))
                    .collect::<Result<_>>()?,
            ),
            PaymentKind::B => {
                let entries = values.as_array().ok_or_else(|| Error::Parse("B payments must be an array".into()))?;
                if entries.iter().all(|e| e.is_object() && e.get("bundle").is_some()) {
                    let mut map = BTreeMap::new();
                    for e in entries {
                        let bundle: Vec<usize> = serde_json::from_value(e["bundle"].clone())?;
                        let pay = e.get("payment").ok_or_else(|| Error::Parse("B entry without \"payment\"".into()))?;
                        let mut sorted = bundle.clone();
                        sorted.sort_unstable();
                        sorted.dedup();
                        if sorted != bundle {
                            return Err(Error::Parse(format!("bundle {bundle:?} must be strictly increasing")));
                        }
                        if map.insert(bundle.clone(), num_from_json(pay)?).is_some() {
                            return Err(Error::Parse(format!("bundle {bundle:?} listed twice")));
                        }
                    }
                    PaymentScheme::B(map)
                } else {
                    PaymentScheme::per_item_any(list(values, "B payments")?)
                }
            }
        };
        let exact = std::cell::Cell::new(true);
        scheme.map(|x| exact.set(exact.get() && matches!(x, Num::Exact(_))));
        Ok(if exact.get() {
            AnyPayments::Exact(scheme.map(|x| x.exact().cloned().expect("checked exact")))
        } else {
            AnyPayments::Float(scheme.map(Num::to_f64))
        })
    }

    pub fn kind(&self) -> PaymentKind {
        match self {
            AnyPayments::Exact(p) => p.kind(),
            AnyPayments::Float(p) => p.kind(),
        }
    }

    pub fn to_float(&self) -> PaymentScheme<f64> {
        match self {
            AnyPayments::Exact(p) => p.map(crate::model::rat_to_f64),
            AnyPayments::Float(p) => p.clone(),
        }
    }
}

impl<T> PaymentScheme<T> {
    fn per_item_any(values: Vec<T>) -> Self {
        PaymentScheme::B(values.into_iter().enumerate().map(|(j, p)| (vec![j], p)).collect())
    }
}

fn num_from_json(value: &serde_json::Value) -> Result<Num> {
    match value {
        serde_json::Value::String(s) => Ok(Num::Exact(parse_rat(s)?)),
        serde_json::Value::Number(n) => {
            n.as_f64().map(Num::Float).ok_or_else(|| Error::Parse(format!("payment {n} is not representable")))
        }
        serde_json::Value::Object(o) => match (o.get("exact"), o.get("value")) {
            (Some(serde_json::Value::String(s)), _) => Ok(Num::Exact(parse_rat(s)?)),
            (_, Some(v)) if v.is_number() => num_from_json(v),
            _ => Err(Error::Parse(format!("payment object {value} needs \"value\" or \"exact\""))),
        },
        other => Err(Error::Parse(format!("expected a payment number, got {other}"))),
    }
}

/// For every agent `i`, bundle `S` she receives and `k != i`:
/// `v_i(S) + E[pay_i | A_i = S] >= E[v_i(A_k) + pay_k | A_i = S] - epsilon`.
pub fn check_ief_with_payments<T: Scalar>(
    instance: &Instance,
    lottery: &Lottery<T>,
    scheme: &PaymentScheme<T>,
    epsilon: T,
) -> Result<FairnessReport> {
    lottery.check_fits(instance)?;
    let n = instance.n_agents();
    scheme.validate(n, lottery.len())?;
    let values = instance.values_as::<T>();
    let mut tracker = MarginTracker::new();
    for i in 0..n {
        for bundle in lottery.bundle_marginal(i).into_keys() {
            let own = bundle_value_with(&values, i, &bundle);
            let mut mass = T::zero();
            let mut own_pay = T::zero();
            let mut other = vec![T::zero(); n];
            for (idx, (alloc, p)) in lottery.support().iter().enumerate() {
                if alloc.bundle(i) != bundle.as_slice() {
                    continue;
                }
                mass = mass + p.clone();
                own_pay = own_pay + p.clone() * scheme.pay(i, idx, &bundle);
                for (k, acc) in other.iter_mut().enumerate() {
                    let b = alloc.bundle(k);
                    *acc = acc.clone() + p.clone() * (bundle_value_with(&values, i, b) + scheme.pay(k, idx, b));
                }
            }
            for k in (0..n).filter(|&k| k != i) {
                let slack = own.clone() + own_pay.clone() / mass.clone() - other[k].clone() / mass.clone()
                    + epsilon.clone();
                tracker.observe(slack, || Witness::Conditional { agent: i, other: k, bundle: bundle.clone() });
            }
        }
    }
    let property = match scheme.kind() {
        PaymentKind::A => "ief_with_a_payments",
        PaymentKind::B => "ief_with_b_payments",
        PaymentKind::C => "ief_with_c_payments",
    };
    Ok(tracker.finish(property))
}
