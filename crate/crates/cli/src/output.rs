//! CSV and JSON-lines rendering.
//!
//! Floats are written with 17 significant digits in scientific notation,
//! which round-trips every `f64` and does not depend on locale.

use crate::config::{Format, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub fields: Vec<(String, Value)>,
}

impl Record {
    pub fn get(&self, column: &str) -> Option<&Value> {
        self.fields.iter().find(|(c, _)| c == column).map(|(_, v)| v)
    }

    pub fn is_ok(&self) -> bool {
        matches!(self.get("status"), Some(Value::Text(s)) if s == "ok")
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn cell(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Float(f) => format_float(*f),
        Value::Text(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Empty => String::new(),
    }
}

fn json_value(v: &Value) -> String {
    match v {
        Value::Text(s) => serde_json::Value::String(s.clone()).to_string(),
        Value::Empty => "null".into(),
        other => cell(other),
    }
}

pub fn render(columns: &[String], records: &[Record], format: Format) -> Result<Vec<u8>, csv::Error> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(columns)?;
            for r in records {
                w.write_record(r.fields.iter().map(|(_, v)| cell(v)))?;
            }
            Ok(w.into_inner().map_err(|e| e.into_error())?)
        }
        Format::Json => {
            let mut out = String::new();
            for r in records {
                let body: Vec<String> = r
                    .fields
                    .iter()
                    .map(|(c, v)| format!("{}:{}", serde_json::Value::String(c.clone()), json_value(v)))
                    .collect();
                out.push('{');
                out.push_str(&body.join(","));
                out.push_str("}\n");
            }
            Ok(out.into_bytes())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 7.3e-3, 1e300, -2.5, 0.0] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn json_lines_parse() {
        let r = Record {
            fields: vec![
                ("a".into(), Value::Float(0.25)),
                ("b".into(), Value::Text("x,\"y\"".into())),
                ("c".into(), Value::Empty),
                ("d".into(), Value::Bool(true)),
            ],
        };
        let bytes = render(&["a".into(), "b".into(), "c".into(), "d".into()], &[r], Format::Json).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["a"], 0.25);
        assert_eq!(v["b"], "x,\"y\"");
        assert!(v["c"].is_null());
        let csv = render(&["a".into(), "b".into(), "c".into(), "d".into()], &[], Format::Csv).unwrap();
        assert_eq!(csv, b"a,b,c,d\n");
    }
}
