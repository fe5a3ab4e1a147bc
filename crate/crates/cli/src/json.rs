//! JSON encoding with 10 significant digits and string-coded infinities.

use nalgebra::DMatrix;
use serde_json::{json, Value};

/// Rounds to 10 significant digits; infinities become `"inf"` / `"-inf"`, NaN becomes null.
pub fn num(x: f64) -> Value {
    if x.is_nan() {
        Value::Null
    } else if x == f64::INFINITY {
        json!("inf")
    } else if x == f64::NEG_INFINITY {
        json!("-inf")
    } else {
        let rounded: f64 = format!("{x:.9e}").parse().expect("formatted float parses");
        json!(rounded)
    }
}

pub fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn vector<'a>(xs: impl IntoIterator<Item = &'a f64>) -> Value {
    Value::Array(xs.into_iter().map(|&x| num(x)).collect())
}

/// Row-major nested arrays.
pub fn matrix(m: &DMatrix<f64>) -> Value {
    Value::Array((0..m.nrows()).map(|i| vector(m.row(i).iter())).collect())
}
