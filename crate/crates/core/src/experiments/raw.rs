use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One replicate (or one path) at one sample size. Quantities that the
/// experiment does not compute stay `None` and are written as empty cells.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawRow {
    pub replicate: usize,
    pub n: usize,
    /// The Gram matrix was singular; every statistic below is absent.
    pub failed: bool,
    pub theta_hat: Option<Vec<f64>>,
    /// `(theta_hat - theta) / se`, with plug-in standard errors.
    pub studentized: Option<Vec<f64>>,
    pub error_norm: Option<f64>,
    pub lr_statistic: Option<f64>,
    pub reject: Option<bool>,
    pub lan_remainder: Option<f64>,
    pub qsl_ratio: Option<f64>,
    pub lil_value: Option<f64>,
    /// `max |s_k|` over the first configured size up to `n`.
    pub lil_sup: Option<f64>,
}

impl RawRow {
    pub fn failed(replicate: usize, n: usize) -> Self {
        Self {
            replicate,
            n,
            failed: true,
            ..Self::default()
        }
    }
}

const SCALARS: [&str; 7] = [
    "error_norm",
    "lr_statistic",
    "reject",
    "lan_remainder",
    "qsl_ratio",
    "lil_value",
    "lil_sup",
];

fn header(p: usize) -> Vec<String> {
    let mut h = vec!["replicate".to_string(), "n".into(), "failed".into()];
    h.extend((1..=p).map(|j| format!("theta_hat_{j}")));
    h.extend((1..=p).map(|j| format!("z_{j}")));
    h.extend(SCALARS.iter().map(|s| s.to_string()));
    h
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn vector_cells(v: &Option<Vec<f64>>, p: usize) -> Vec<String> {
    match v {
        Some(v) => v.iter().map(f64::to_string).collect(),
        None => vec![String::new(); p],
    }
}

/// Writes rows for an order-`p` model. Floats use shortest round-trip
/// formatting, so reading the file back reproduces every value exactly.
pub fn write_raw_csv<W: Write>(rows: &[RawRow], p: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(p))?;
    for r in rows {
        let mut rec = vec![r.replicate.to_string(), r.n.to_string(), r.failed.to_string()];
        rec.extend(vector_cells(&r.theta_hat, p));
        rec.extend(vector_cells(&r.studentized, p));
        rec.push(cell(r.error_norm));
        rec.push(cell(r.lr_statistic));
        rec.push(r.reject.map(|b| b.to_string()).unwrap_or_default());
        rec.push(cell(r.lan_remainder));
        rec.push(cell(r.qsl_ratio));
        rec.push(cell(r.lil_value));
        rec.push(cell(r.lil_sup));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(s: &str, line: usize) -> Result<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Format(format!("raw.csv line {line}: cannot parse `{s}`")))
}

fn parse_vector(fields: &[&str], line: usize) -> Result<Option<Vec<f64>>> {
    if fields.iter().all(|f| f.is_empty()) {
        return Ok(None);
    }
    fields
        .iter()
        .map(|f| {
            parse::<f64>(f, line)?
                .ok_or_else(|| Error::Format(format!("raw.csv line {line}: partial vector")))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Reads a file produced by [`write_raw_csv`]; returns the model order and rows.
pub fn read_raw_csv<R: Read>(input: R) -> Result<(usize, Vec<RawRow>)> {
    let mut rdr = csv::Reader::from_reader(input);
    let head = rdr.headers()?.clone();
    let width = head.len();
    if width < 3 + SCALARS.len() || (width - 3 - SCALARS.len()) % 2 != 0 {
        return Err(Error::Format("raw.csv: unexpected column count".into()));
    }
    let p = (width - 3 - SCALARS.len()) / 2;
    if head.iter().collect::<Vec<_>>() != header(p) {
        return Err(Error::Format("raw.csv: unexpected header".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let f: Vec<&str> = rec.iter().collect();
        let need = |v: Option<usize>| {
            v.ok_or_else(|| Error::Format(format!("raw.csv line {line}: missing index")))
        };
        let s = 3 + 2 * p;
        rows.push(RawRow {
            replicate: need(parse(f[0], line)?)?,
            n: need(parse(f[1], line)?)?,
            failed: parse(f[2], line)?.unwrap_or(false),
            theta_hat: parse_vector(&f[3..3 + p], line)?,
            studentized: parse_vector(&f[3 + p..s], line)?,
            error_norm: parse(f[s], line)?,
            lr_statistic: parse(f[s + 1], line)?,
            reject: parse(f[s + 2], line)?,
            lan_remainder: parse(f[s + 3], line)?,
            qsl_ratio: parse(f[s + 4], line)?,
            lil_value: parse(f[s + 5], line)?,
            lil_sup: parse(f[s + 6], line)?,
        });
    }
    Ok((p, rows))
}
