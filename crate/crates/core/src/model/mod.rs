//! Instances, matchings, allocations, lotteries and welfare evaluation.

mod allocation;
mod instance;
mod scalar;
mod welfare;

pub use allocation::{Allocation, AnyLottery, Lottery, LotteryJson, Matching, OutcomeJson, FLOAT_SUM_TOL};
pub use instance::{Instance, InstanceJson};
pub use scalar::{parse_rat, rat, rat_from_json, rat_int, rat_to_f64, sig12, Num, Rat, Scalar, FLOAT_SLACK_TOL};
pub use welfare::{
    conditional_bundle_value, expected_welfare, matching_welfare, welfare, Objective, WelfareMeasure,
};

pub(crate) use welfare::{bundle_value_with, conditional_value_with};
