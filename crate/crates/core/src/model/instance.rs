use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::scalar::{rat_from_json, rat_to_f64, Rat, Scalar};
use crate::error::{Error, Result};

/// Agents, items and an additive non-negative valuation matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    n_agents: usize,
    n_items: usize,
    values: Vec<Vec<Rat>>,
    values_f64: Vec<Vec<f64>>,
}

impl Instance {
    pub fn new(values: Vec<Vec<Rat>>) -> Result<Self> {
        let n_agents = values.len();
        if n_agents == 0 {
            return Err(Error::InvalidInstance("no agents".into()));
        }
        let n_items = values[0].len();
        for (i, row) in values.iter().enumerate() {
            if row.len() != n_items {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {n_items}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| v.is_negative()) {
                return Err(Error::InvalidInstance(format!("negative valuation v[{i}][{j}]")));
            }
        }
        let values_f64 = values.iter().map(|row| row.iter().map(rat_to_f64).collect()).collect();
        Ok(Self { n_agents, n_items, values, values_f64 })
    }

    /// Builds an instance from numerator/denominator pairs.
    pub fn from_fractions(rows: &[&[(i64, i64)]]) -> Result<Self> {
        let values = rows
            .iter()
            .map(|row| row.iter().map(|&(p, q)| super::scalar::rat(p, q)).collect())
            .collect();
        Self::new(values)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn is_matching_instance(&self) -> bool {
        self.n_agents == self.n_items
    }

    pub fn require_matching(&self) -> Result<usize> {
        if self.is_matching_instance() {
            Ok(self.n_agents)
        } else {
            Err(Error::NotMatchingInstance { agents: self.n_agents, items: self.n_items })
        }
    }

    pub fn value(&self, agent: usize, item: usize) -> &Rat {
        &self.values[agent][item]
    }

    pub fn value_f64(&self, agent: usize, item: usize) -> f64 {
        self.values_f64[agent][item]
    }

    pub fn values(&self) -> &[Vec<Rat>] {
        &self.values
    }

    pub fn values_f64(&self) -> &[Vec<f64>] {
        &self.values_f64
    }

    /// The valuation matrix converted to the requested scalar type.
    pub fn values_as<T: Scalar>(&self) -> Vec<Vec<T>> {
        self.values.iter().map(|row| row.iter().map(T::from_rat).collect()).collect()
    }

    pub fn bundle_value(&self, agent: usize, bundle: &[usize]) -> Rat {
        bundle.iter().map(|&j| &self.values[agent][j]).sum()
    }

    pub fn total_value(&self, agent: usize) -> Rat {
        self.values[agent].iter().sum()
    }

    /// Largest single valuation entry.
    pub fn v_max(&self) -> Rat {
        self.values.iter().flatten().max().cloned().unwrap_or_else(Rat::zero)
    }

    pub fn is_normalized(&self) -> bool {
        (0..self.n_agents).all(|i| self.total_value(i) == Rat::from_integer(1.into()))
    }

    /// Rescales every row with positive total to sum to one.
    pub fn normalize(&self) -> Self {
        let values = self
            .values
            .iter()
            .map(|row| {
                let total: Rat = row.iter().sum();
                if total.is_zero() {
                    row.clone()
                } else {
                    row.iter().map(|v| v / &total).collect()
                }
            })
            .collect();
        Self::new(values).expect("normalizing keeps the instance valid")
    }

    /// Distinct valuation values in descending order.
    pub fn distinct_values_desc(&self) -> Vec<Rat> {
        let mut all: Vec<Rat> = self.values.iter().flatten().cloned().collect();
        all.sort();
        all.dedup();
        all.reverse();
        all
    }

    pub fn to_json(&self) -> InstanceJson {
        InstanceJson {
            agents: self.n_agents,
            items: self.n_items,
            valuations: self
                .values
                .iter()
                .map(|row| row.iter().map(|v| serde_json::Value::String(v.to_string())).collect())
                .collect(),
        }
    }

    pub fn from_json(json: &InstanceJson) -> Result<Self> {
        if json.valuations.len() != json.agents {
            return Err(Error::DimensionMismatch(format!(
                "\"agents\" is {} but {} valuation rows were given",
                json.agents,
                json.valuations.len()
            )));
        }
        let values = json
            .valuations
            .iter()
            .enumerate()
            .map(|(i, row)| {
                if row.len() != json.items {
                    return Err(Error::DimensionMismatch(format!(
                        "\"items\" is {} but row {i} has {} entries",
                        json.items,
                        row.len()
                    )));
                }
                row.iter().map(rat_from_json).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let json: InstanceJson = serde_json::from_str(text)?;
        Self::from_json(&json)
    }
}

/// Wire form: `{"agents": n, "items": m, "valuations": [[...]]}` with entries
/// given as JSON numbers or `"p/q"` strings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceJson {
    pub agents: usize,
    pub items: usize,
    pub valuations: Vec<Vec<serde_json::Value>>,
}
