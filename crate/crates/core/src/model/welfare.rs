use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::allocation::{Allocation, Lottery, Matching};
use super::instance::Instance;
use super::scalar::{Num, Rat, Scalar};
use crate::error::{Error, Result};

/// Objectives the iEF solvers can optimize.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Utilitarian,
    Egalitarian,
    LogNash,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::Utilitarian, Objective::Egalitarian, Objective::LogNash];
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "util" | "utilitarian" => Ok(Objective::Utilitarian),
            "egal" | "egalitarian" => Ok(Objective::Egalitarian),
            "lognash" | "log-nash" => Ok(Objective::LogNash),
            other => Err(Error::InvalidParameter(format!("unknown objective {other:?}"))),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Utilitarian => "util",
            Objective::Egalitarian => "egal",
            Objective::LogNash => "lognash",
        })
    }
}

/// Welfare measures available for evaluation. Average Nash has no solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WelfareMeasure {
    Utilitarian,
    Egalitarian,
    AverageNash,
    LogNash,
}

impl From<Objective> for WelfareMeasure {
    fn from(o: Objective) -> Self {
        match o {
            Objective::Utilitarian => WelfareMeasure::Utilitarian,
            Objective::Egalitarian => WelfareMeasure::Egalitarian,
            Objective::LogNash => WelfareMeasure::LogNash,
        }
    }
}

fn agent_values(instance: &Instance, alloc: &Allocation) -> Vec<Rat> {
    (0..instance.n_agents()).map(|i| instance.bundle_value(i, alloc.bundle(i))).collect()
}

/// Welfare of an allocation. Utilitarian and egalitarian values are exact;
/// the Nash variants are floats, and log-Nash is `-inf` when some agent gets 0.
pub fn welfare(instance: &Instance, alloc: &Allocation, measure: WelfareMeasure) -> Result<Num> {
    alloc.check_fits(instance)?;
    let vals = agent_values(instance, alloc);
    Ok(match measure {
        WelfareMeasure::Utilitarian => Num::Exact(vals.iter().sum()),
        WelfareMeasure::Egalitarian => Num::Exact(vals.iter().min().cloned().unwrap_or_else(Rat::zero)),
        WelfareMeasure::AverageNash => {
            let n = vals.len() as f64;
            if vals.iter().any(Zero::is_zero) {
                Num::Float(0.0)
            } else {
                let log_sum: f64 = vals.iter().map(|v| v.to_f64().ln()).sum();
                Num::Float((log_sum / n).exp())
            }
        }
        WelfareMeasure::LogNash => Num::Float(log_nash(vals.iter().map(Scalar::to_f64))),
    })
}

fn log_nash(values: impl Iterator<Item = f64>) -> f64 {
    let mut total = 0.0;
    for v in values {
        if v <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += v.ln();
    }
    total
}

/// Float welfare of a matching, the form the LP engines consume.
pub fn matching_welfare(values: &[Vec<f64>], matching: &Matching, measure: WelfareMeasure) -> f64 {
    let vals = (0..matching.len()).map(|i| values[i][matching.item_of(i)]);
    match measure {
        WelfareMeasure::Utilitarian => vals.sum(),
        WelfareMeasure::Egalitarian => vals.fold(f64::INFINITY, f64::min),
        WelfareMeasure::LogNash => log_nash(vals),
        WelfareMeasure::AverageNash => {
            let n = matching.len() as f64;
            let lg = log_nash(vals);
            if lg == f64::NEG_INFINITY {
                0.0
            } else {
                (lg / n).exp()
            }
        }
    }
}

/// Expected welfare of a lottery under a measure, in float.
pub fn expected_welfare<T: Scalar>(instance: &Instance, lottery: &Lottery<T>, measure: WelfareMeasure) -> Result<f64> {
    let mut acc = 0.0;
    for (alloc, p) in lottery.support() {
        acc += p.to_f64() * welfare(instance, alloc, measure)?.to_f64();
    }
    Ok(acc)
}

/// `E[v_i(A_k) | A_i = S]` under the lottery.
pub fn conditional_bundle_value<T: Scalar>(
    instance: &Instance,
    lottery: &Lottery<T>,
    agent: usize,
    other: usize,
    bundle: &[usize],
) -> Result<T> {
    lottery.check_fits(instance)?;
    let values = instance.values_as::<T>();
    conditional_value_with(&values, lottery, agent, other, bundle)
}

pub(crate) fn bundle_value_with<T: Scalar>(values: &[Vec<T>], agent: usize, bundle: &[usize]) -> T {
    bundle.iter().fold(T::zero(), |acc, &j| acc + values[agent][j].clone())
}

pub(crate) fn conditional_value_with<T: Scalar>(
    values: &[Vec<T>],
    lottery: &Lottery<T>,
    agent: usize,
    other: usize,
    bundle: &[usize],
) -> Result<T> {
    let mut mass = T::zero();
    let mut weighted = T::zero();
    for (alloc, p) in lottery.support() {
        if alloc.bundle(agent) == bundle {
            mass = mass + p.clone();
            weighted = weighted + p.clone() * bundle_value_with(values, agent, alloc.bundle(other));
        }
    }
    if mass.is_zero() {
        return Err(Error::NullConditioning { agent, bundle: bundle.to_vec() });
    }
    Ok(weighted / mass)
}
