use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;

/// Shortest round-trip form, switching to exponent notation for very large
/// or very small magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x.is_finite() && x != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<const K: usize>(header: [&str; K]) -> Self {
        Self::from_header(header.iter().map(|s| s.to_string()).collect())
    }

    pub fn from_header(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: impl IntoIterator<Item = String>) {
        self.rows.push(row.into_iter().collect());
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

#[derive(Serialize)]
pub struct ResultBundle<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub inputs: &'a RunConfig,
    pub provenance: Value,
    pub outputs: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

impl ResultBundle<'_> {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }
}

/// `key,value` rows for every scalar leaf; arrays of objects are skipped.
pub fn scalar_table(outputs: &Value) -> Table {
    let mut t = Table::new(["key", "value"]);
    flatten("", outputs, &mut t);
    t
}

fn flatten(prefix: &str, v: &Value, t: &mut Table) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&key(k), x, t);
            }
        }
        Value::Array(a) if a.iter().any(Value::is_object) => {}
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&key(&i.to_string()), x, t);
            }
        }
        Value::String(s) => t.push([prefix.to_string(), s.clone()]),
        Value::Null => t.push([prefix.to_string(), String::new()]),
        Value::Number(n) => t.push([prefix.to_string(), n.as_f64().map_or_else(|| n.to_string(), num)]),
        other => t.push([prefix.to_string(), other.to_string()]),
    }
}
