use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::aggregate::Aggregates;
use super::config::ExperimentConfig;
use super::raw::{write_raw_csv, RawRow};
use crate::error::Result;
use crate::io::to_json_checked;

/// One point of a plot-ready series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub series: String,
    pub n: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: ExperimentConfig,
    #[serde(flatten)]
    pub aggregates: Aggregates,
    pub passed: bool,
    /// Wall-clock seconds; the only field that varies between identical runs.
    pub runtime_secs: f64,
    /// One row per replicate per sample size, written to `raw.csv`.
    #[serde(skip)]
    pub raw: Vec<RawRow>,
    /// Written to `curves.csv`.
    #[serde(skip)]
    pub curves: Vec<CurvePoint>,
}

impl ExperimentReport {
    /// A copy with the runtime zeroed, for comparing runs.
    pub fn without_runtime(&self) -> Self {
        Self {
            runtime_secs: 0.0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_checked(self)
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_json()?.as_bytes())?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn write_curves_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for point in &self.curves {
            w.serialize(point)?;
        }
        if self.curves.is_empty() {
            w.write_record(["series", "n", "value"])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `report.json`, `raw.csv` and `curves.csv` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = self.to_json()?;
        std::fs::write(dir.join("report.json"), json + "\n")?;
        write_raw_csv(
            &self.raw,
            self.config.order(),
            BufWriter::new(File::create(dir.join("raw.csv"))?),
        )?;
        self.write_curves_csv(BufWriter::new(File::create(dir.join("curves.csv"))?))?;
        Ok(())
    }
}

/// Per-size series derived from the aggregates.
pub fn aggregate_curves(aggregates: &Aggregates) -> Vec<CurvePoint> {
    let mut out = Vec::new();
    let mut push = |series: &str, n: usize, value: Option<f64>| {
        if let Some(value) = value {
            out.push(CurvePoint {
                series: series.to_string(),
                n,
                value,
            });
        }
    };
    for a in &aggregates.per_n {
        push("median_error", a.n, a.median_error);
        push("rejection_rate", a.n, a.rejection_rate);
        push("predicted_rejection", a.n, a.predicted_rejection);
        push("median_abs_remainder", a.n, a.median_abs_remainder);
        push("median_qsl_ratio", a.n, a.median_qsl_ratio);
        push("median_lil_sup", a.n, a.median_lil_sup);
        push("lil_pass_fraction", a.n, a.lil_pass_fraction);
        for (j, r) in a.variance_ratio.iter().flatten().enumerate() {
            push(&format!("variance_ratio_{}", j + 1), a.n, Some(*r));
        }
    }
    out
}
