//! Plot-ready CSV (`,` delimiter, header row, LF endings) and JSON writers.

use std::fmt::Write as _;
use std::io::{self, Write};

use serde::Serialize;

use crate::coulombgas::SweepRecord;
use crate::probability::ScanRow;
use crate::rg::{FlowTrajectory, KtFlow};
use crate::stabilizer::SweepPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Builds CSV text row by row.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text, columns: header.len() }
    }

    pub fn row<I, T>(&mut self, fields: I) -> &mut Self
    where
        I: IntoIterator<Item = T>,
        T: std::fmt::Display,
    {
        let mut n = 0;
        for (i, f) in fields.into_iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            let _ = write!(self.text, "{f}");
            n += 1;
        }
        debug_assert_eq!(n, self.columns, "row width does not match header");
        self.text.push('\n');
        self
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// `ell,lambda_x,lambda_y,lambda_z`.
pub fn flow_csv(traj: &FlowTrajectory) -> String {
    let mut csv = Csv::new(&["ell", "lambda_x", "lambda_y", "lambda_z"]);
    for s in &traj.samples {
        csv.row(std::iter::once(s.ell).chain(s.lambda.iter().copied()));
    }
    csv.into_string()
}

/// `ell,x,y`.
pub fn kt_csv(flow: &KtFlow) -> String {
    let mut csv = Csv::new(&["ell", "x", "y"]);
    for s in &flow.samples {
        csv.row([s.ell, s.x, s.y]);
    }
    csv.into_string()
}

/// `L,sum,ratio`.
pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut csv = Csv::new(&["L", "sum", "ratio"]);
    for r in rows {
        csv.row([r.size.to_string(), r.sum.to_string(), r.ratio.to_string()]);
    }
    csv.into_string()
}

/// `sweep,pairs,r2`; `r2` is empty for sweeps without charges.
pub fn coulomb_csv(trace: &[SweepRecord]) -> String {
    let mut csv = Csv::new(&["sweep", "pairs", "r2"]);
    for r in trace {
        csv.row([r.sweep.to_string(), r.pairs.to_string(), r.r2.map(|v| v.to_string()).unwrap_or_default()]);
    }
    csv.into_string()
}

/// `p,logical_rate,stderr`.
pub fn threshold_csv(points: &[SweepPoint]) -> String {
    let mut csv = Csv::new(&["p", "logical_rate", "stderr"]);
    for p in points {
        csv.row([p.p, p.logical_rate, p.stderr]);
    }
    csv.into_string()
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output types serialize");
    s.push('\n');
    s
}

/// Writes to `path`, or stdout when `path` is `None`.
pub fn emit(path: Option<&std::path::Path>, text: &str) -> io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}
