//! File formats shared by the library and the command line.
//!
//! Series are UTF-8 CSV with a header row and `.` decimals. JSON output goes
//! through [`to_json_checked`], which refuses to emit non-finite numbers.

use std::io::Read;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Reads the column named `column` from a CSV with a header row.
pub fn read_series_csv<R: Read>(input: R, column: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(input);
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| Error::Format(format!("missing column `{column}`")))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = rec
            .get(idx)
            .ok_or_else(|| Error::Format(format!("line {line}: missing field `{column}`")))?
            .trim();
        let v: f64 = field
            .parse()
            .map_err(|_| Error::Format(format!("line {line}: cannot parse `{field}`")))?;
        if !v.is_finite() {
            return Err(Error::Format(format!("line {line}: non-finite value `{field}`")));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Format("no data rows".into()));
    }
    Ok(out)
}

/// Writes `t,x` rows for `x_1..x_n`.
pub fn write_series_csv<W: std::io::Write>(x: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x"])?;
    for (i, v) in x.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn find_null(v: &Value, path: &mut String) -> bool {
    match v {
        Value::Null => true,
        Value::Array(items) => items.iter().enumerate().any(|(i, item)| {
            let len = path.len();
            path.push_str(&format!("[{i}]"));
            let found = find_null(item, path);
            if !found {
                path.truncate(len);
            }
            found
        }),
        Value::Object(map) => map.iter().any(|(k, item)| {
            let len = path.len();
            path.push('.');
            path.push_str(k);
            let found = find_null(item, path);
            if !found {
                path.truncate(len);
            }
            found
        }),
        _ => false,
    }
}

/// Pretty JSON, or [`Error::NonFinite`] naming the first field that would
/// have been written as `null` (which is how NaN and infinities serialize).
pub fn to_json_checked<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut path = String::from("$");
    if find_null(&v, &mut path) {
        return Err(Error::NonFinite(path));
    }
    Ok(serde_json::to_string_pretty(&v)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_named_column() {
        let text = "t,x\n1,0.5\n2,-1e-3\n";
        assert_eq!(read_series_csv(text.as_bytes(), "x").unwrap(), vec![0.5, -1e-3]);
        assert!(matches!(read_series_csv(text.as_bytes(), "y"), Err(Error::Format(_))));
        assert!(read_series_csv("x\nabc\n".as_bytes(), "x").is_err());
        assert!(read_series_csv("x\nNaN\n".as_bytes(), "x").is_err());
        assert!(read_series_csv("x\n".as_bytes(), "x").is_err());
    }

    #[test]
    fn series_round_trip() {
        let x = vec![0.1 + 0.2, -3.5, 1e-310];
        let mut buf = Vec::new();
        write_series_csv(&x, &mut buf).unwrap();
        assert!(buf.starts_with(b"t,x\n1,"));
        assert_eq!(read_series_csv(buf.as_slice(), "x").unwrap(), x);
    }

    #[test]
    fn json_refuses_non_finite() {
        #[derive(Serialize)]
        struct S {
            a: Vec<f64>,
        }
        assert!(to_json_checked(&S { a: vec![1.0, 2.5] }).is_ok());
        match to_json_checked(&S { a: vec![1.0, f64::NAN] }) {
            Err(Error::NonFinite(p)) => assert_eq!(p, "$.a[1]"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
