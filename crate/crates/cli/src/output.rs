//! JSON building blocks shared by the commands.

use ief::fairness::FairnessReport;
use ief::payments::{PaymentScheme, RepairStats};
use ief::{Lottery, Num, Scalar};
use serde_json::{json, Value};

/// What a command prints, and whether the checked property held.
pub struct Report {
    pub body: Body,
    pub holds: bool,
}

pub enum Body {
    Json(Value),
    Csv(String),
}

impl Report {
    pub fn json(value: Value, holds: bool) -> Self {
        Self { body: Body::Json(value), holds }
    }

    pub fn csv(text: String) -> Self {
        Self { body: Body::Csv(text), holds: true }
    }

    /// A run that completed but found no solution.
    pub fn negative(status: &str, detail: Value) -> Self {
        let mut body = json!({"status": status});
        if let (Some(obj), Value::Object(extra)) = (body.as_object_mut(), detail) {
            obj.extend(extra);
        }
        Self::json(body, false)
    }
}

pub fn num(x: f64) -> Value {
    serde_json::to_value(Num::Float(x)).expect("numbers serialize")
}

pub fn scalar<T: Scalar>(x: &T) -> Value {
    serde_json::to_value(x.to_num()).expect("numbers serialize")
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn lottery<T: Scalar>(l: &Lottery<T>) -> Value {
    serde_json::to_value(l.to_json()).expect("lotteries serialize")
}

pub fn report(r: &FairnessReport) -> Value {
    serde_json::to_value(r).expect("reports serialize")
}

pub fn payments<T: Scalar>(p: &PaymentScheme<T>) -> Value {
    p.to_json()
}

pub fn repair(stats: &RepairStats) -> Value {
    json!({"delta": num(stats.delta), "k1": stats.k1, "k2": stats.k2, "resolved": stats.resolved})
}
