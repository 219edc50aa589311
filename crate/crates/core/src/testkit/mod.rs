//! Test support: exact fixtures, instance families, brute-force reference
//! solvers, seeded generators and the price-of-iEF experiment.

mod experiment;
pub mod families;
pub mod fixtures;
mod oracles;
mod random;

pub use experiment::{price_experiment, write_csv, PriceRow};
pub use families::{egal_gap, gen_price_family, max_envy, nash_gap, util_gap, Family};
pub use oracles::{
    enumerate_matchings, full_lp_reference, ief_existence_general, ReferenceOptimum, ReferenceProblem,
    ENUMERATION_MAX_N, FULL_LP_MAX_N, GENERAL_EXISTENCE_CAP,
};
pub use random::{random_instance, random_matching_lottery, random_normalized_instance};
