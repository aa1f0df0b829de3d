//! CSV and JSON writers. All reals are rounded to 12 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::config::Format;
use crate::CliError;

pub const SIG_DIGITS: usize = 12;

/// `x` rounded to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Shortest text for `x` at 12 significant digits. Plain decimals inside
/// `[1e-5, 1e12)`, exponent notation outside.
pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        return "0".into();
    }
    let a = r.abs();
    if (1e-5..1e12).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<Option<usize>> for Cell {
    fn from(n: Option<usize>) -> Self {
        n.map_or(Cell::Empty, Cell::from)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match c {
                    Cell::Num(x) => out.push_str(&fmt_num(*x)),
                    Cell::Int(n) => write!(out, "{n}").unwrap(),
                    Cell::Text(s) => out.push_str(s),
                    Cell::Empty => {}
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Rounds every float in a JSON tree. Integers are left alone.
pub fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

pub fn to_rounded<T: Serialize>(x: &T) -> Value {
    round_value(serde_json::to_value(x).expect("result types serialize to JSON"))
}

/// One dataset ready to be written in either format.
#[derive(Debug, Clone)]
pub struct Report {
    pub table: Table,
    pub data: Value,
}

pub fn json_document(meta: &Value, data: &Value) -> String {
    let mut doc = Map::new();
    doc.insert("meta".into(), meta.clone());
    doc.insert("data".into(), data.clone());
    let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn render(report: &Report, format: Format, meta: &Value) -> String {
    match format {
        Format::Csv => report.table.to_csv(),
        Format::Json => json_document(meta, &report.data),
    }
}

/// Writes to `path`, or stdout when there is none.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::output(p, e))?;
            }
            fs::write(p, text).map_err(|e| CliError::output(p, e))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::output("stdout", e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(0.865500216093969), "0.865500216094");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(150.0), "150");
        assert_eq!(fmt_num(-2.5), "-2.5");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(2.6e-7), "2.6e-7");
        assert_eq!(fmt_num(1.23456789012345e-9), "1.23456789012e-9");
        assert_eq!(fmt_num(3e12), "3e12");
        assert_eq!(fmt_num(123456.7890123456), "123456.789012");
    }

    #[test]
    fn rounding_is_idempotent() {
        for x in [0.1234567890123456, 9.99999999999999e-3, 7.0e-300, 1e300 / 3.0] {
            let r = round_sig(x);
            assert_eq!(round_sig(r), r);
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), r);
        }
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(["a", "b", "c"]);
        t.push(vec![Cell::Num(0.5), Cell::Int(3), Cell::Empty]);
        t.push(vec![
            Cell::Text("x".into()),
            Cell::from(Some(2usize)),
            Cell::from(None),
        ]);
        assert_eq!(t.to_csv(), "a,b,c\n0.5,3,\nx,2,\n");
    }

    #[test]
    fn json_rounding_keeps_integers() {
        let v = round_value(json!({"x": 0.12345678901234567, "n": 68, "v": [1.0, 2.000000000000001]}));
        assert_eq!(v, json!({"x": 0.123456789012, "n": 68, "v": [1.0, 2.0]}));
    }

    #[test]
    fn document_has_meta_and_data() {
        let s = json_document(&json!({"k": 1}), &json!([1]));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back, json!({"meta": {"k": 1}, "data": [1]}));
        assert!(s.ends_with('\n'));
    }
}
