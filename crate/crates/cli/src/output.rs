//! JSON records and number formatting shared by all commands.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Number, Value};
use twophase::linalg::{CMatrix, CVector};
use twophase::SpinQuantum;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: &str = "1.0";
/// JSON Schema of [`OutputRecord`].
pub const SCHEMA: &str = include_str!("../schema/output.schema.json");
pub const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub schema_version: String,
    pub command: String,
    pub inputs: Value,
    pub results: Value,
    pub timing: Timing,
}

impl OutputRecord {
    pub fn new(command: &str, inputs: Value, results: Value, started: Instant) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            command: command.to_string(),
            inputs: round_value(inputs),
            results: round_value(results),
            timing: Timing { wall_seconds: round_sig(started.elapsed().as_secs_f64()) },
        }
    }

    pub fn write(&self, out: &mut dyn Write) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::io("serializing output", e))?;
        writeln!(out, "{text}").map_err(|e| CliError::io("writing output", e))
    }
}

/// Round to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Round every float in a JSON tree; non-finite numbers become `null`.
pub fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| Number::from_f64(round_sig(x)))
            .map(Value::Number)
            .unwrap_or(Value::Null),
        Value::Array(items) => Value::Array(items.into_iter().map(round_value).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_value(v))).collect::<Map<_, _>>()),
        other => other,
    }
}

/// `null` for non-finite values, which JSON cannot carry.
pub fn num(x: f64) -> Value {
    Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

pub fn spin_json(j: SpinQuantum) -> Value {
    json!({ "two_j": j.two_j(), "j": j.j(), "text": j.to_string() })
}

/// Rows of `[re, im]` pairs.
pub fn matrix_json(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| Value::Array((0..m.ncols()).map(|c| json!([m[(r, c)].re, m[(r, c)].im])).collect()))
            .collect(),
    )
}

pub fn vector_json(v: &CVector) -> Value {
    Value::Array(v.iter().map(|z| json!([z.re, z.im])).collect())
}

pub fn real_matrix_json(m: &[[f64; 2]; 2]) -> Value {
    json!([[num(m[0][0]), num(m[0][1])], [num(m[1][0]), num(m[1][1])]])
}
