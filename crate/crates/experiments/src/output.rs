//! CSV result files: a `#`-prefixed JSON metadata line followed by a header
//! row and one row per replicate and condition.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub replicate: usize,
    /// Parameters that distinguish rows of one replicate, e.g. `k=5`.
    pub condition: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub ess_min: Option<f64>,
    /// Resampling events for SMC rows, kill-and-clone iterations for
    /// splitting rows.
    pub resample_count: Option<usize>,
    pub wall_seconds: f64,
    pub seed: u64,
    /// Empty for a usable estimate, otherwise why it is not one.
    pub flag: String,
    /// Per-row information that is not a grouping key.
    pub detail: String,
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
}

pub fn write_rows<W: Write>(mut out: W, config: &ExperimentConfig, rows: &[ResultRow]) -> Result<(), RunError> {
    let meta = Metadata {
        tool: "revsmc",
        version: env!("CARGO_PKG_VERSION"),
        config,
    };
    let json = serde_json::to_string(&meta).map_err(|e| std::io::Error::other(e.to_string()))?;
    writeln!(out, "# {json}")?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the rows of a result file, skipping `#` metadata lines.
pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>, RunError> {
    let mut body = String::new();
    for line in BufReader::new(input).lines() {
        let line = line?;
        if !line.starts_with('#') {
            body.push_str(&line);
            body.push('\n');
        }
    }
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let rows = r.deserialize().collect::<Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}
