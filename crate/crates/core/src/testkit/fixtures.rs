//! The fixture catalogue. Each fixture is a JSON file under `fixtures/` with
//! exact rational entries.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{rat_from_json, Allocation, AnyLottery, Instance, InstanceJson, Lottery, LotteryJson, Rat};

#[derive(Clone, Debug)]
pub struct FixturePayments {
    /// `"A"` (per agent) or `"B"` (per item).
    pub kind: String,
    pub values: Vec<Rat>,
}

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub description: String,
    pub instance: Instance,
    /// Reference lottery, when the fixture comes with one.
    pub lottery: Option<Lottery<Rat>>,
    /// Reference allocation for non-matching fixtures.
    pub allocation: Option<Allocation>,
    pub payments: Option<FixturePayments>,
    pub rent: Option<Rat>,
    pub epsilon: Option<Rat>,
}

#[derive(Deserialize)]
struct PaymentsJson {
    kind: String,
    values: Vec<serde_json::Value>,
}

#[derive(Deserialize)]
struct FixtureJson {
    name: String,
    #[serde(default)]
    description: String,
    instance: InstanceJson,
    #[serde(default)]
    lottery: Option<LotteryJson>,
    #[serde(default)]
    allocation: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    payments: Option<PaymentsJson>,
    #[serde(default)]
    rent: Option<serde_json::Value>,
    #[serde(default)]
    epsilon: Option<serde_json::Value>,
}

impl Fixture {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: FixtureJson = serde_json::from_str(text)?;
        let instance = Instance::from_json(&raw.instance)?;
        let lottery = match raw.lottery {
            Some(json) => match AnyLottery::from_json(&json, &instance)? {
                AnyLottery::Exact(l) => Some(l),
                AnyLottery::Float(_) => {
                    return Err(Error::Parse(format!("fixture {}: probabilities must be exact", raw.name)))
                }
            },
            None => None,
        };
        let allocation = raw.allocation.map(|b| Allocation::new(b, instance.n_items())).transpose()?;
        let payments = raw
            .payments
            .map(|p| {
                Ok::<_, Error>(FixturePayments {
                    kind: p.kind,
                    values: p.values.iter().map(rat_from_json).collect::<Result<_>>()?,
                })
            })
            .transpose()?;
        Ok(Fixture {
            name: raw.name,
            description: raw.description,
            instance,
            lottery,
            allocation,
            payments,
            rent: raw.rent.as_ref().map(rat_from_json).transpose()?,
            epsilon: raw.epsilon.as_ref().map(rat_from_json).transpose()?,
        })
    }
}

macro_rules! fixture_files {
    ($($name:ident),* $(,)?) => {
        /// Names of all bundled fixtures.
        pub const NAMES: &[&str] = &[$(stringify!($name)),*];

        /// Looks a bundled fixture up by name.
        pub fn by_name(name: &str) -> Result<Fixture> {
            match name {
                $(stringify!($name) => Ok($name()),)*
                other => Err(Error::InvalidParameter(format!("unknown fixture {other:?}"))),
            }
        }

        $(
            pub fn $name() -> Fixture {
                Fixture::parse(include_str!(concat!("../../fixtures/", stringify!($name), ".json")))
                    .expect("bundled fixture parses")
            }
        )*
    };
}

fixture_files!(
    ief_without_ef,
    proportional_without_ief,
    eef_without_ief,
    pareto_failure,
    subsidy_ef_vs_ief,
    rent_ef_vs_ief,
    subsidy_b_beats_a,
    rent_b_beats_a,
    subsidy_a_beats_b,
    rent_a_beats_b,
);

pub fn all() -> Vec<Fixture> {
    NAMES.iter().map(|n| by_name(n).expect("listed")).collect()
}
