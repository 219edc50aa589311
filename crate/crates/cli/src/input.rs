//! Reading instances, lotteries, payments and 2EBM weights from JSON files.

use std::fs;
use std::io::Read;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use ief::model::{parse_rat, rat_from_json, rat_to_f64, AnyLottery, InstanceJson, LotteryJson};
use ief::payments::AnyPayments;
use ief::twoebm::EdgePairWeights;
use ief::{Instance, Rat};
use serde_json::Value;

/// Parses a file (or standard input for `-`) as JSON. Syntax errors carry the
/// line and column reported by the parser.
pub fn read_json(path: &Path) -> Result<Value> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading standard input")?;
        s
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    serde_json::from_str(&text).map_err(|e| anyhow!("{}: malformed JSON: {e}", path.display()))
}

/// Picks `key` out of a wrapper document (a fixture or a solver report) when
/// present, otherwise the document itself.
fn unwrap_field<'a>(doc: &'a Value, key: &str) -> &'a Value {
    doc.get(key).filter(|v| v.is_object()).unwrap_or(doc)
}

pub fn instance(path: &Path) -> Result<Instance> {
    let doc = read_json(path)?;
    let json: InstanceJson = serde_json::from_value(unwrap_field(&doc, "instance").clone())
        .map_err(|e| anyhow!("{}: not an instance: {e}", path.display()))?;
    Instance::from_json(&json).map_err(|e| anyhow!("{}: {e}", path.display()))
}

pub fn lottery(path: &Path, instance: &Instance) -> Result<AnyLottery> {
    let doc = read_json(path)?;
    let json: LotteryJson = serde_json::from_value(unwrap_field(&doc, "lottery").clone())
        .map_err(|e| anyhow!("{}: not a lottery: {e}", path.display()))?;
    AnyLottery::from_json(&json, instance).map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// Payments as `{"kind", "values"}`, a document with a `"payments"` field, or
/// a bare `values` array whose kind comes from `kind`.
pub fn payments(path: &Path, kind: Option<&str>) -> Result<AnyPayments> {
    let doc = read_json(path)?;
    let mut json = match &doc {
        Value::Array(_) => {
            let kind = kind.ok_or_else(|| anyhow!("{}: a bare payment array needs --kind", path.display()))?;
            serde_json::json!({"kind": kind, "values": doc})
        }
        _ => unwrap_field(&doc, "payments").clone(),
    };
    if let (Some(flag), Some(obj)) = (kind, json.as_object_mut()) {
        match obj.get("kind").and_then(Value::as_str) {
            Some(found) if !found.eq_ignore_ascii_case(flag) => {
                bail!("{}: payments are of kind {found}, --kind says {flag}", path.display())
            }
            Some(_) => {}
            None => {
                obj.insert("kind".into(), Value::String(flag.into()));
            }
        }
    }
    AnyPayments::from_json(&json).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn index(v: &Value, n: usize, what: &str) -> Result<usize> {
    let i = v.as_u64().ok_or_else(|| anyhow!("{what} must be a nonnegative integer, got {v}"))? as usize;
    if i >= n {
        bail!("{what} {i} out of range for n = {n}");
    }
    Ok(i)
}

/// `{"n": n, "psi": [[i, j, k, l, w], ...], "forbidden": [[i, j], ...]}`.
pub fn edge_pair_weights(path: &Path) -> Result<EdgePairWeights> {
    let doc = read_json(path)?;
    let ctx = |e: anyhow::Error| anyhow!("{}: {e}", path.display());
    let n = doc.get("n").and_then(Value::as_u64).ok_or_else(|| ctx(anyhow!("missing integer \"n\"")))? as usize;
    if n == 0 {
        return Err(ctx(anyhow!("n must be positive")));
    }
    let mut w = EdgePairWeights::new(n);
    let empty = Vec::new();
    let rows = match doc.get("psi") {
        None => &empty,
        Some(v) => v.as_array().ok_or_else(|| ctx(anyhow!("\"psi\" must be an array")))?,
    };
    for (pos, row) in rows.iter().enumerate() {
        let mut parse = || -> Result<()> {
            let cells = row.as_array().filter(|c| c.len() == 5).ok_or_else(|| anyhow!("expected [i, j, k, l, w]"))?;
            let i = index(&cells[0], n, "agent")?;
            let j = index(&cells[1], n, "item")?;
            let k = index(&cells[2], n, "agent")?;
            let l = index(&cells[3], n, "item")?;
            if i == k || j == l {
                bail!("edges ({i},{j}) and ({k},{l}) share an endpoint");
            }
            let weight = rat_to_f64(&rat_from_json(&cells[4])?);
            w.set(i, j, k, l, weight);
            Ok(())
        };
        parse().map_err(|e| ctx(anyhow!("psi[{pos}]: {e}")))?;
    }
    if let Some(list) = doc.get("forbidden") {
        let list = list.as_array().ok_or_else(|| ctx(anyhow!("\"forbidden\" must be an array")))?;
        for (pos, edge) in list.iter().enumerate() {
            let parse = || -> Result<(usize, usize)> {
                let cells = edge.as_array().filter(|c| c.len() == 2).ok_or_else(|| anyhow!("expected [i, j]"))?;
                Ok((index(&cells[0], n, "agent")?, index(&cells[1], n, "item")?))
            };
            let (i, j) = parse().map_err(|e| ctx(anyhow!("forbidden[{pos}]: {e}")))?;
            w.forbid(i, j);
        }
    }
    Ok(w)
}

/// A command-line number, read exactly.
pub fn rational(text: &str, flag: &str) -> Result<Rat> {
    parse_rat(text).map_err(|e| anyhow!("--{flag}: {e}"))
}
