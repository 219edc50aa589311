//! Price-of-iEF sweeps over the instance families.

use std::io::Write;

use serde::Serialize;

use super::families::{gen_price_family, Family};
use crate::error::{Error, Result};
use crate::model::{sig12, Objective, Rat, WelfareMeasure};
use crate::welfare_opt::{solve_ief_welfare, unconstrained_optimum};

#[derive(Clone, Debug, Serialize)]
pub struct PriceRow {
    pub family: String,
    pub size: usize,
    pub n: usize,
    pub unconstrained: f64,
    pub ief: f64,
    /// `unconstrained / ief`; for the Nash family the ratio of average Nash
    /// welfares, `exp((unconstrained - ief) / n)` in log terms.
    pub ratio: f64,
}

fn objective_of(family: Family) -> Result<Objective> {
    match family {
        Family::UtilGap | Family::ParetoFailure => Ok(Objective::Utilitarian),
        Family::EgalGap => Ok(Objective::Egalitarian),
        Family::NashGap => Ok(Objective::LogNash),
        Family::MaxEnvy => Err(Error::InvalidParameter("the maxenvy family has no welfare ratio".into())),
    }
}

pub fn price_experiment(family: Family, size: usize, eps: &Rat) -> Result<PriceRow> {
    let objective = objective_of(family)?;
    let instance = gen_price_family(family, size, eps)?;
    let n = instance.n_agents();
    let (_, unconstrained) = unconstrained_optimum(&instance, WelfareMeasure::from(objective))?;
    let ief = solve_ief_welfare(&instance, objective)?.objective;
    let ratio = match objective {
        Objective::LogNash => ((unconstrained - ief) / n as f64).exp(),
        _ if ief > 0.0 => unconstrained / ief,
        _ => f64::INFINITY,
    };
    Ok(PriceRow { family: family.to_string(), size, n, unconstrained, ief, ratio })
}

pub fn write_csv<W: Write>(out: &mut W, rows: &[PriceRow]) -> std::io::Result<()> {
    writeln!(out, "family,size,n,unconstrained,ief,ratio")?;
    for r in rows {
        let (u, i, q) = (sig12(r.unconstrained), sig12(r.ief), sig12(r.ratio));
        writeln!(out, "{},{},{},{u},{i},{q}", r.family, r.size, r.n)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rat;

    #[test]
    fn pareto_row() {
        let row = price_experiment(Family::ParetoFailure, 3, &rat(0, 1)).unwrap();
        assert!((row.ief - 11.0 / 9.0).abs() < 1e-9);
        assert!((row.unconstrained - 4.0 / 3.0).abs() < 1e-9);
        let mut buf = Vec::new();
        write_csv(&mut buf, &[row]).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("family,size,n"));
    }

    #[test]
    fn maxenvy_has_no_ratio() {
        assert!(price_experiment(Family::MaxEnvy, 4, &rat(0, 1)).is_err());
    }
}
