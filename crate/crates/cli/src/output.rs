//! Report rendering: JSON with derived numbers rounded to 12 significant
//! digits, or a plain table rounded to 6.

use serde_json::{Map, Number, Value};

pub const JSON_DIGITS: usize = 12;
pub const TABLE_DIGITS: usize = 6;

/// Keys whose subtrees are stored data, not derived numbers, and are kept at
/// full precision so they deserialize bit for bit.
const VERBATIM_KEYS: &[&str] = &["instance", "config", "a", "b"];

pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

fn round_number(n: &Number, digits: usize) -> Value {
    if n.is_f64() {
        let x = n.as_f64().expect("f64");
        Number::from_f64(round_sig(x, digits))
            .map(Value::Number)
            .unwrap_or(Value::Null)
    } else {
        Value::Number(n.clone())
    }
}

/// Rounds every float outside the verbatim subtrees.
pub fn round_value(v: Value, digits: usize) -> Value {
    match v {
        Value::Number(n) => round_number(&n, digits),
        Value::Array(xs) => Value::Array(xs.into_iter().map(|x| round_value(x, digits)).collect()),
        Value::Object(m) => Value::Object(
            m.into_iter()
                .map(|(k, x)| {
                    let x = if VERBATIM_KEYS.contains(&k.as_str()) {
                        x
                    } else {
                        round_value(x, digits)
                    };
                    (k, x)
                })
                .collect(),
        ),
        other => other,
    }
}

pub fn render_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(&round_value(v.clone(), JSON_DIGITS)).expect("serializable");
    s.push('\n');
    s
}

fn scalar_cell(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => {
                let r = round_sig(x, TABLE_DIGITS);
                if r != 0.0 && (r.abs() < 1e-4 || r.abs() >= 1e9) {
                    format!("{r:e}")
                } else {
                    format!("{r}")
                }
            }
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

fn is_flat_record(v: &Value) -> bool {
    v.as_object()
        .is_some_and(|m| m.values().all(|x| !x.is_object() && !x.is_array()))
}

fn push_rows(out: &mut String, prefix: &str, rows: &[Value]) {
    let keys: Vec<&String> = rows[0].as_object().expect("record").keys().collect();
    out.push_str(&format!("{prefix}:\n"));
    out.push_str(&format!(
        "  {}\n",
        keys.iter().map(|k| k.as_str()).collect::<Vec<_>>().join("\t")
    ));
    for r in rows {
        let m = r.as_object().expect("record");
        let cells: Vec<String> = keys
            .iter()
            .map(|k| m.get(*k).map(scalar_cell).unwrap_or_default())
            .collect();
        out.push_str(&format!("  {}\n", cells.join("\t")));
    }
}

fn flatten(out: &mut String, prefix: &str, v: &Value) {
    match v {
        Value::Object(m) => flatten_map(out, prefix, m),
        Value::Array(xs) if !xs.is_empty() && xs.iter().all(is_flat_record) => push_rows(out, prefix, xs),
        Value::Array(xs) if xs.iter().all(|x| !x.is_object() && !x.is_array()) => {
            let cells: Vec<String> = xs.iter().map(scalar_cell).collect();
            out.push_str(&format!("{prefix}\t[{}]\n", cells.join(", ")));
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                flatten(out, &format!("{prefix}.{i}"), x);
            }
        }
        scalar => out.push_str(&format!("{prefix}\t{}\n", scalar_cell(scalar))),
    }
}

fn flatten_map(out: &mut String, prefix: &str, m: &Map<String, Value>) {
    for (k, x) in m {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        flatten(out, &key, x);
    }
}

pub fn render_table(v: &Value) -> String {
    let mut out = String::new();
    flatten(&mut out, "", v);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn rounds_to_significant_digits() {
        assert_eq!(round_sig(9.499293557381234, 12), 9.49929355738);
        assert_eq!(round_sig(1.23456789e-7, 6), 1.23457e-7);
        assert_eq!(round_sig(0.0, 6), 0.0);
    }

    #[test]
    fn verbatim_subtrees_keep_precision() {
        let v = json!({"lhs": 0.1234567890123456, "instance": {"re": [0.1234567890123456]}});
        let r = round_value(v, 12);
        assert_eq!(r["lhs"], json!(0.123456789012));
        assert_eq!(r["instance"]["re"][0], json!(0.1234567890123456));
    }

    #[test]
    fn table_of_records() {
        let v = json!({"p": 1.5, "rows": [{"epsilon": 0.1, "entry11": 0.16722333}]});
        let t = render_table(&v);
        assert!(t.contains("p\t1.5"));
        assert!(t.contains("0.167223"));
    }
}
