//! Per-condition aggregation of result rows.

use serde::Serialize;

use crate::output::ResultRow;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub condition: String,
    /// Unflagged rows entering the statistics.
    pub n: usize,
    pub flagged: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single row.
    pub sd: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Groups rows by `(experiment, condition)` in order of first appearance.
/// Groups with only flagged rows report NaN statistics.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in rows {
        let key = (r.experiment.clone(), r.condition.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(experiment, condition)| {
            let group: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.experiment == experiment && r.condition == condition)
                .collect();
            let mut values: Vec<f64> = group.iter().filter(|r| r.flag.is_empty()).map(|r| r.estimate).collect();
            values.sort_by(f64::total_cmp);
            let n = values.len();
            let flagged = group.len() - n;
            if n == 0 {
                return SummaryRow {
                    experiment,
                    condition,
                    n,
                    flagged,
                    mean: f64::NAN,
                    sd: f64::NAN,
                    min: f64::NAN,
                    q25: f64::NAN,
                    median: f64::NAN,
                    q75: f64::NAN,
                    max: f64::NAN,
                };
            }
            let mean = values.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                experiment,
                condition,
                n,
                flagged,
                mean,
                sd,
                min: values[0],
                q25: quantile(&values, 0.25),
                median: quantile(&values, 0.5),
                q75: quantile(&values, 0.75),
                max: values[n - 1],
            }
        })
        .collect()
}
