//! The shared CSV schema for experiment results.
//!
//! Files start with `#`-prefixed comment lines echoing the run's
//! configuration, then a header and one row per `(experiment, n)`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sim::RatioReport;

pub const CSV_HEADER: [&str; 13] = [
    "experiment",
    "n",
    "c",
    "mechanism",
    "revenue",
    "rev_se",
    "welfare",
    "wel_se",
    "ratio",
    "bound",
    "bound_satisfied",
    "seed",
    "samples",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub experiment: String,
    pub n: usize,
    pub c: f64,
    pub mechanism: String,
    pub revenue: f64,
    pub rev_se: f64,
    pub welfare: f64,
    pub wel_se: f64,
    pub ratio: f64,
    pub bound: f64,
    pub bound_satisfied: bool,
    pub seed: u64,
    pub samples: u64,
}

impl CsvRow {
    pub fn from_ratio(experiment: &str, r: &RatioReport) -> Self {
        Self {
            experiment: experiment.to_string(),
            n: r.n,
            c: r.c,
            mechanism: r.mechanism.to_string(),
            revenue: r.revenue.mean,
            rev_se: r.revenue.std_error,
            welfare: r.welfare.mean,
            wel_se: r.welfare.std_error,
            ratio: r.ratio,
            bound: r.bound,
            bound_satisfied: r.bound_satisfied,
            seed: r.revenue.seed,
            samples: r.revenue.n_samples,
        }
    }

    /// A row for an inequality check `lhs ≥ rhs`: revenue holds the left
    /// side, welfare the right, and the bound is 1 on their ratio.
    pub fn inequality(experiment: &str, check: &str, n: usize, lhs: f64, lhs_se: f64, rhs: f64, ok: bool) -> Self {
        Self {
            experiment: experiment.to_string(),
            n,
            c: f64::NAN,
            mechanism: check.to_string(),
            revenue: lhs,
            rev_se: lhs_se,
            welfare: rhs,
            wel_se: 0.0,
            ratio: lhs / rhs,
            bound: 1.0,
            bound_satisfied: ok,
            seed: 0,
            samples: 0,
        }
    }

    pub fn with_sampling(mut self, seed: u64, samples: u64) -> Self {
        self.seed = seed;
        self.samples = samples;
        self
    }
}

/// Writes comment lines, the header, and `rows`.
pub fn write_csv<W: Write>(mut out: W, comments: &[String], rows: &[CsvRow]) -> Result<()> {
    for line in comments {
        for part in line.lines() {
            writeln!(out, "# {part}")?;
        }
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows back, skipping comment lines.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<Vec<CsvRow>, _>>()?)
}
