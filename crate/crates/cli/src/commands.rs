use std::path::Path;

use anyhow::{bail, Result};
use ief::fairness::{
    enumerate_allocations, exists_eef_allocation, exists_mms_allocation, is_eef, is_envy_free, is_ex_ante_ef,
    is_ex_post_ef, is_ex_post_proportional, is_ief, is_mms, is_proportional, max_envy, mms_shares, FairnessReport,
    Witness,
};
use ief::model::{rat_to_f64, AnyLottery};
use ief::payments::{
    brute_compare_ab, build_envy_graph, check_ief_with_payments, compute_a_payments, is_ief_able_a, solve_subsidy_min,
    solve_utility_max, AnyPayments, CompareConfig, CompareProblem, PaymentOptimum, PaymentScheme, SupportSet,
};
use ief::testkit::{
    full_lp_reference, ief_existence_general, price_experiment, random_normalized_instance, write_csv, Family,
    PriceRow, ReferenceProblem,
};
use ief::twoebm::{brute_force_2ebm, solve_2ebm, EdgePairWeights};
use ief::welfare_opt::solve_ief_welfare;
use ief::{Allocation, Error, Instance, Lottery, Objective, Rat, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::output::{self, num, nums, scalar, Report};
use crate::{input, CheckProperty, ExistsProperty, Format, OracleProblem};

fn solver_failure(err: Error, detail: Value) -> Result<Report> {
    match err {
        Error::Infeasible => Ok(Report::negative("infeasible", detail)),
        Error::LogNashUnsupportable => Ok(Report::negative("lognash_unsupportable", detail)),
        Error::NoPerfectMatching => Ok(Report::negative("no_perfect_matching", detail)),
        Error::PositiveCycle => Ok(Report::negative("positive_cycle", detail)),
        other => Err(other.into()),
    }
}

/// Every support allocation must satisfy the property; the first failing
/// entry is the witness and the margin is the smallest seen.
fn every_support_entry<T: Scalar>(
    lottery: &Lottery<T>,
    property: &str,
    check: impl Fn(&Allocation) -> ief::Result<FairnessReport>,
) -> Result<FairnessReport> {
    let mut out = FairnessReport { property: property.into(), holds: true, witness: None, margin: None };
    for (idx, (alloc, _)) in lottery.support().iter().enumerate() {
        let r = check(alloc)?;
        if !r.holds && out.holds {
            out.holds = false;
            out.witness = r.witness.map(|w| Witness::SupportEntry { index: idx, inner: Box::new(w) });
        }
        if let Some(m) = r.margin {
            if out.margin.as_ref().is_none_or(|w| m.to_f64() < w.to_f64()) {
                out.margin = Some(m);
            }
        }
    }
    Ok(out)
}

fn check_with<T: Scalar>(
    instance: &Instance,
    lottery: &Lottery<T>,
    property: CheckProperty,
    epsilon: T,
) -> Result<Value> {
    let r = match property {
        CheckProperty::Ief => is_ief(instance, lottery, epsilon)?,
        CheckProperty::ExAnteEf => is_ex_ante_ef(instance, lottery)?,
        CheckProperty::ExPostEf => is_ex_post_ef(instance, lottery)?,
        CheckProperty::ExPostProp => is_ex_post_proportional(instance, lottery)?,
        CheckProperty::Ef => every_support_entry(lottery, "ef", |a| is_envy_free(instance, a))?,
        CheckProperty::Prop => every_support_entry(lottery, "proportional", |a| is_proportional(instance, a))?,
        CheckProperty::Eef => every_support_entry(lottery, "eef", |a| is_eef(instance, a))?,
        CheckProperty::Mms => {
            let shares = mms_shares(instance)?;
            every_support_entry(lottery, "mms", |a| is_mms(instance, a, &shares))?
        }
        CheckProperty::MaxEnvy => {
            let envy = max_envy(instance, lottery)?;
            let slack = epsilon - envy.clone();
            let holds = slack.is_nonneg_tol();
            let r = FairnessReport { property: "max_envy".into(), holds, witness: None, margin: Some(slack.to_num()) };
            let mut v = output::report(&r);
            v["value"] = scalar(&envy);
            return Ok(v);
        }
    };
    Ok(output::report(&r))
}

pub fn check(instance: &Path, lottery: &Path, property: CheckProperty, epsilon: &str, tol: f64) -> Result<Report> {
    let inst = input::instance(instance)?;
    let lot = input::lottery(lottery, &inst)?;
    let eps = input::rational(epsilon, "epsilon")?;
    let (mut v, exact) = match &lot {
        AnyLottery::Exact(l) => (check_with(&inst, l, property, eps.clone())?, true),
        AnyLottery::Float(l) => (check_with(&inst, l, property, rat_to_f64(&eps) + tol)?, false),
    };
    v["epsilon"] = scalar(&eps);
    v["exact"] = json!(exact);
    let holds = v["holds"].as_bool().unwrap_or(false);
    Ok(Report::json(v, holds))
}

pub fn solve(instance: &Path, objective: Objective, format: Format) -> Result<Report> {
    let inst = input::instance(instance)?;
    let res = match solve_ief_welfare(&inst, objective) {
        Ok(r) => r,
        Err(e) => return solver_failure(e, json!({"objective": objective.to_string()})),
    };
    if format == Format::Csv {
        let mut text = String::from("matching,prob,welfare\n");
        for ((alloc, p), w) in res.lottery.support().iter().zip(&res.support_welfare) {
            let m = alloc.as_matching().expect("solver lotteries are over matchings");
            text.push_str(&format!("{m},{},{}\n", ief::model::sig12(*p), ief::model::sig12(*w)));
        }
        return Ok(Report::csv(text));
    }
    let y: Vec<f64> = res.duals.y.iter().map(|&x| ief::model::sig12(x)).collect();
    Ok(Report::json(
        json!({
            "objective": objective.to_string(),
            "value": num(res.objective),
            "lottery": output::lottery(&res.lottery),
            "support_welfare": nums(&res.support_welfare),
            "iterations": res.iterations,
            "phase1_iterations": res.phase1_iterations,
            "duals": {"z": ief::model::sig12(res.duals.z), "y": y},
        }),
        true,
    ))
}

pub fn two_ebm(path: &Path) -> Result<Report> {
    let w = input::edge_pair_weights(path)?;
    let sol = match solve_2ebm(&w) {
        Ok(s) => s,
        Err(e) => return solver_failure(e, json!({"n": w.n()})),
    };
    let s = &sol.stats;
    Ok(Report::json(
        json!({
            "matching": sol.matching.as_slice(),
            "value": num(sol.value),
            "stats": {
                "lp_solves": s.lp_solves,
                "branch_nodes": s.branch_nodes,
                "max_fractionality": num(s.max_fractionality),
                "non_matching_vertices": s.non_matching_vertices,
                "peel_calls": s.peel_calls,
                "root_is_matching": s.root_is_matching,
            },
        }),
        true,
    ))
}

fn graph_with<T: Scalar>(inst: &Instance, lottery: &Lottery<T>) -> Result<Value> {
    let g = build_envy_graph(inst, lottery)?;
    let weights: Vec<Vec<Value>> = g
        .weights()
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().map(|(k, w)| if i == k { Value::Null } else { scalar(w) }).collect())
        .collect();
    let a = compute_a_payments(&g).ok();
    Ok(json!({
        "weights": weights,
        "ief_able_a": is_ief_able_a(&g),
        "a_payments": a.map(|p| p.iter().map(scalar).collect::<Vec<_>>()),
    }))
}

pub fn graph(instance: &Path, lottery: &Path) -> Result<Report> {
    let inst = input::instance(instance)?;
    let v = match input::lottery(lottery, &inst)? {
        AnyLottery::Exact(l) => graph_with(&inst, &l)?,
        AnyLottery::Float(l) => graph_with(&inst, &l)?,
    };
    Ok(Report::json(v, true))
}

fn apay_with<T: Scalar>(inst: &Instance, lottery: &Lottery<T>) -> Result<Report> {
    let g = build_envy_graph(inst, lottery)?;
    match compute_a_payments(&g) {
        Ok(p) => {
            let scheme = PaymentScheme::A(p);
            let r = check_ief_with_payments(inst, lottery, &scheme, T::zero())?;
            Ok(Report::json(
                json!({
                    "payments": output::payments(&scheme),
                    "total": scalar(&scheme.expected_total(lottery)),
                    "check": output::report(&r),
                }),
                true,
            ))
        }
        Err(e) => solver_failure(e, json!({})),
    }
}

pub fn apay(instance: &Path, lottery: &Path) -> Result<Report> {
    let inst = input::instance(instance)?;
    match input::lottery(lottery, &inst)? {
        AnyLottery::Exact(l) => apay_with(&inst, &l),
        AnyLottery::Float(l) => apay_with(&inst, &l),
    }
}

pub fn paycheck(
    instance: &Path,
    lottery: &Path,
    payments: &Path,
    kind: Option<&str>,
    epsilon: &str,
    tol: f64,
) -> Result<Report> {
    let inst = input::instance(instance)?;
    let lot = input::lottery(lottery, &inst)?;
    let pay = input::payments(payments, kind)?;
    let eps = input::rational(epsilon, "epsilon")?;
    let (r, exact) = match (&lot, &pay) {
        (AnyLottery::Exact(l), AnyPayments::Exact(p)) => (check_ief_with_payments(&inst, l, p, eps.clone())?, true),
        _ => {
            let scheme = pay.to_float();
            (check_ief_with_payments(&inst, &lot.to_float(), &scheme, rat_to_f64(&eps) + tol)?, false)
        }
    };
    let mut v = output::report(&r);
    v["epsilon"] = scalar(&eps);
    v["exact"] = json!(exact);
    Ok(Report::json(v, r.holds))
}

pub fn subsidy(instance: &Path, epsilon: f64) -> Result<Report> {
    let inst = input::instance(instance)?;
    let res = solve_subsidy_min(&inst, epsilon)?;
    let r = check_ief_with_payments(&inst, &res.lottery, &res.payments, epsilon)?;
    Ok(Report::json(
        json!({
            "epsilon": num(epsilon),
            "total": num(res.total),
            "lp_optimum": num(res.lp_optimum),
            "lottery": output::lottery(&res.lottery),
            "payments": output::payments(&res.payments),
            "check": output::report(&r),
            "repair": output::repair(&res.repair),
            "iterations": res.iterations,
        }),
        true,
    ))
}

pub fn rent(instance: &Path, rent: f64, epsilon: f64) -> Result<Report> {
    let inst = input::instance(instance)?;
    let res = match solve_utility_max(&inst, rent, epsilon) {
        Ok(r) => r,
        Err(e) => return solver_failure(e, json!({"rent": num(rent)})),
    };
    let r = check_ief_with_payments(&inst, &res.lottery, &res.payments, epsilon)?;
    Ok(Report::json(
        json!({
            "rent": num(rent),
            "epsilon": num(epsilon),
            "min_expected_utility": num(res.min_expected_utility),
            "expected_utilities": nums(&res.expected_utilities),
            "lp_optimum": num(res.lp_optimum),
            "rent_residual": num(res.rent_residual),
            "lottery": output::lottery(&res.lottery),
            "payments": output::payments(&res.payments),
            "check": output::report(&r),
            "repair": output::repair(&res.repair),
            "iterations": res.iterations,
        }),
        true,
    ))
}

pub fn exists(instance: &Path, property: ExistsProperty) -> Result<Report> {
    let inst = input::instance(instance)?;
    let (name, found, witness): (&str, bool, Option<Allocation>) = match property {
        ExistsProperty::Ief => ("ief", ief_existence_general(&inst)?, None),
        ExistsProperty::Ef | ExistsProperty::Prop => {
            let test = |a: &Allocation| match property {
                ExistsProperty::Ef => is_envy_free(&inst, a),
                _ => is_proportional(&inst, a),
            };
            let mut hit = None;
            for a in enumerate_allocations(inst.n_agents(), inst.n_items())? {
                if test(&a)?.holds {
                    hit = Some(a);
                    break;
                }
            }
            let name = if property == ExistsProperty::Ef { "ef" } else { "proportional" };
            (name, hit.is_some(), hit)
        }
        ExistsProperty::Eef => {
            let (found, a) = exists_eef_allocation(&inst)?;
            ("eef", found, a)
        }
        ExistsProperty::Mms => {
            let (found, a) = exists_mms_allocation(&inst)?;
            ("mms", found, a)
        }
    };
    let mut v = json!({"property": name, "exists": found});
    if let Some(a) = witness {
        v["allocation"] = json!(a.bundles());
    }
    Ok(Report::json(v, found))
}

pub fn full_lp(instance: &Path, problem: OracleProblem, rent: f64) -> Result<Report> {
    let inst = input::instance(instance)?;
    let reference = match problem {
        OracleProblem::Util => ReferenceProblem::Welfare(Objective::Utilitarian),
        OracleProblem::Egal => ReferenceProblem::Welfare(Objective::Egalitarian),
        OracleProblem::Lognash => ReferenceProblem::Welfare(Objective::LogNash),
        OracleProblem::Subsidy => ReferenceProblem::Subsidy,
        OracleProblem::Rent => ReferenceProblem::Utility { rent },
    };
    let name = format!("{problem:?}").to_lowercase();
    let opt = match full_lp_reference(&inst, reference) {
        Ok(o) => o,
        Err(e) => return solver_failure(e, json!({"problem": name})),
    };
    let support: Vec<Value> =
        opt.x.iter().map(|(b, x)| json!({"matching": b.as_slice(), "prob": num(*x)})).collect();
    let t: Vec<Value> = opt
        .t
        .iter()
        .map(|(i, b, v)| json!({"agent": i, "matching": b.as_slice(), "mass": num(*v)}))
        .collect();
    Ok(Report::json(json!({"problem": name, "value": num(opt.value), "support": support, "payment_mass": t}), true))
}

fn optimum(o: &Option<PaymentOptimum>) -> Value {
    match o {
        None => Value::Null,
        Some(o) => json!({"value": num(o.value), "lottery": output::lottery(&o.lottery), "payments": nums(&o.payments)}),
    }
}

pub fn compare(
    instance: &Path,
    problem: OracleProblem,
    rent: f64,
    denominator: u32,
    proportional: bool,
) -> Result<Report> {
    let inst = input::instance(instance)?;
    let problem = match problem {
        OracleProblem::Subsidy => CompareProblem::Subsidy,
        OracleProblem::Rent => CompareProblem::Rent(rent),
        other => bail!("compare works on the subsidy and rent problems, not {other:?}"),
    };
    let mut config = CompareConfig::new(problem);
    config.denominator = denominator;
    if proportional {
        config.support = SupportSet::Proportional;
    }
    let r = brute_compare_ab(&inst, &config)?;
    Ok(Report::json(
        json!({"best_a": optimum(&r.best_a), "best_b": optimum(&r.best_b), "lotteries": r.lotteries}),
        true,
    ))
}

/// Cross-checks the solvers against brute-force references on seeded random
/// instances.
pub fn random_check(seed: u64, cases: usize, n: usize) -> Result<Report> {
    if !(2..=4).contains(&n) {
        bail!("--n must be between 2 and 4 for the full-LP references, got {n}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut checks = 0usize;
    let eps = 1e-3;
    for case in 0..cases {
        let inst = random_normalized_instance(&mut rng, n, 6);
        for obj in Objective::ALL {
            checks += 1;
            let cg = solve_ief_welfare(&inst, obj);
            let full = full_lp_reference(&inst, ReferenceProblem::Welfare(obj));
            let agree = match (&cg, &full) {
                (Ok(a), Ok(b)) => {
                    (a.objective - b.value).abs() < 1e-6 && is_ief(&inst, &a.lottery, 1e-6)?.holds
                }
                (Err(a), Err(b)) => std::mem::discriminant(a) == std::mem::discriminant(b),
                _ => false,
            };
            if !agree {
                failures.push(format!("case {case}: {obj} welfare differs from the full LP"));
            }
        }
        checks += 1;
        let sub = solve_subsidy_min(&inst, eps)?;
        let full = full_lp_reference(&inst, ReferenceProblem::Subsidy)?;
        if (sub.lp_optimum - full.value).abs() >= 1e-6
            || !check_ief_with_payments(&inst, &sub.lottery, &sub.payments, eps)?.holds
        {
            failures.push(format!("case {case}: subsidy output disagrees with the full LP"));
        }
        checks += 1;
        let w = EdgePairWeights::from_fn(n, |_, _, _, _| rng.gen_range(-1.0..1.0));
        let (sol, (_, brute)) = (solve_2ebm(&w)?, brute_force_2ebm(&w)?);
        if (sol.value - brute).abs() >= 1e-7 {
            failures.push(format!("case {case}: 2EBM value {} vs brute force {brute}", sol.value));
        }
    }
    let ok = failures.is_empty();
    Ok(Report::json(json!({"seed": seed, "cases": cases, "n": n, "checks": checks, "failures": failures}), ok))
}

fn family_size(family: Family, n: usize) -> Result<usize> {
    match family {
        Family::UtilGap | Family::NashGap => {
            if n % 2 != 0 {
                bail!("the {family} family has an even number of agents, got {n}");
            }
            Ok(n / 2)
        }
        _ => Ok(n),
    }
}

pub fn experiment(family: &str, sizes: &[usize], epsilon: &Rat, jobs: usize, format: Format) -> Result<Report> {
    let family: Family = family.parse()?;
    let params = sizes.iter().map(|&n| family_size(family, n)).collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let rows: Vec<PriceRow> = pool
        .install(|| params.par_iter().map(|&size| price_experiment(family, size, epsilon)).collect::<ief::Result<_>>())?;
    match format {
        Format::Csv => {
            let mut out = Vec::new();
            write_csv(&mut out, &rows)?;
            Ok(Report::csv(String::from_utf8(out)?))
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "family": r.family, "size": r.size, "n": r.n,
                        "unconstrained": num(r.unconstrained), "ief": num(r.ief), "ratio": num(r.ratio),
                    })
                })
                .collect();
            Ok(Report::json(Value::Array(rows), true))
        }
    }
}
