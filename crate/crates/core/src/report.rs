//! Row-oriented output: CSV with full float precision (17 significant
//! digits, so values round-trip bit-exactly) and JSON summaries. Identical
//! inputs produce byte-identical text.

use serde::Serialize;

/// Full-precision float rendering for CSV fields.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v:.16e}")
}

/// A simple in-memory table with a fixed column set.
#[derive(Clone, Debug)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: Vec<S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Array-of-objects JSON rendering of the same rows.
    pub fn to_json(&self) -> String {
        let objects: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut map = serde_json::Map::new();
                for (c, v) in self.columns.iter().zip(row) {
                    map.insert(c.clone(), serde_json::Value::String(v.clone()));
                }
                serde_json::Value::Object(map)
            })
            .collect();
        serde_json::to_string_pretty(&objects).expect("string-valued table")
    }
}

/// Serialize a summary object to deterministic pretty JSON.
pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable summary")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip() {
        for v in [
            1.0,
            -0.995,
            std::f64::consts::PI,
            1.0 / 3.0,
            6.02e23,
            -2.6634e-12,
        ] {
            let s = fmt_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_float(f64::INFINITY), "inf");
        assert_eq!(fmt_float(f64::NAN), "nan");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(vec!["a", "b"]);
        t.push_row(vec!["1".into(), "2".into()]);
        assert_eq!(t.to_csv(), "a,b\n1,2\n");
        let json = t.to_json();
        assert!(json.contains("\"a\": \"1\""));
    }
}
