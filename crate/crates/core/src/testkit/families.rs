//! Parametric instance families with known price-of-iEF behaviour.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::{rat, Instance, Rat};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// `n = 2k` agents; utilitarian welfare gap of order `n`.
    UtilGap,
    /// Egalitarian gap: iEF optimum `1/(n-1)` against `1/3`.
    EgalGap,
    /// The utilitarian family with `eps = 1/(6k)`; average-Nash gap `sqrt(k/2)`.
    NashGap,
    /// Support allocations with envy `1 - 2/n`.
    MaxEnvy,
    /// The 3x3 instance with a unique, Pareto-dominated iEF lottery.
    ParetoFailure,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "util" => Ok(Family::UtilGap),
            "egal" => Ok(Family::EgalGap),
            "nash" => Ok(Family::NashGap),
            "maxenvy" => Ok(Family::MaxEnvy),
            "pareto" => Ok(Family::ParetoFailure),
            other => Err(Error::InvalidParameter(format!("unknown family {other:?}"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::UtilGap => "util",
            Family::EgalGap => "egal",
            Family::NashGap => "nash",
            Family::MaxEnvy => "maxenvy",
            Family::ParetoFailure => "pareto",
        })
    }
}

/// Builds a family member. `size` is `k` for the util/nash families and `n`
/// otherwise; `eps` is only read by the util family.
pub fn gen_price_family(family: Family, size: usize, eps: &Rat) -> Result<Instance> {
    match family {
        Family::UtilGap => util_gap(size, eps),
        Family::NashGap => nash_gap(size),
        Family::EgalGap => egal_gap(size),
        Family::MaxEnvy => max_envy(size),
        Family::ParetoFailure => {
            if size != 3 {
                return Err(Error::InvalidParameter(format!("pareto family has n = 3 only, got {size}")));
            }
            Ok(super::fixtures::pareto_failure().instance)
        }
    }
}

pub fn util_gap(k: usize, eps: &Rat) -> Result<Instance> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    let n = 2 * k;
    let kk = k as i64;
    let half = rat(1, 2 * kk);
    if eps <= &Rat::zero() || eps >= &half {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1/(2k)), got {eps}")));
    }
    let mut values = vec![vec![Rat::zero(); n]; n];
    for i in 0..k {
        values[i][i] = rat(kk, kk + 1);
        values[i][i + k] = rat(1, kk + 1);
    }
    for row in values.iter_mut().skip(k) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if j < k { &half + eps } else { &half - eps };
        }
    }
    Instance::new(values)
}

pub fn nash_gap(k: usize) -> Result<Instance> {
    util_gap(k, &rat(1, 6 * k as i64))
}

pub fn egal_gap(n: usize) -> Result<Instance> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!("egal family needs n >= 4, got {n}")));
    }
    let mut values = vec![vec![Rat::zero(); n]; n];
    values[0][0] = rat(1, 3);
    values[0][1] = rat(2, 3);
    for (i, row) in values.iter_mut().enumerate().take(n - 2).skip(1) {
        row[i] = rat(1, 3);
        row[i + 1] = rat(1, 3);
        row[n - 1] = rat(1, 3);
    }
    values[n - 2][n - 2] = rat(1, 2);
    values[n - 2][n - 1] = rat(1, 2);
    let d = (n - 1) as i64;
    values[n - 1][0] = rat(1, d);
    values[n - 1][n - 1] = Rat::one() - rat(1, d);
    Instance::new(values)
}

pub fn max_envy(n: usize) -> Result<Instance> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("max-envy family needs n >= 2, got {n}")));
    }
    let nn = n as i64;
    let mut values = vec![vec![Rat::zero(); n]; n];
    values[0][0] = rat(1, nn);
    values[0][1] = rat(nn - 1, nn);
    for row in values.iter_mut().skip(1) {
        for v in row.iter_mut().skip(1) {
            *v = rat(1, nn - 1);
        }
    }
    Instance::new(values)
}
