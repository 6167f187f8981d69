use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::harness::{aggregate, Aggregate};
use crate::{Error, Result};

pub const CURVES_HEADER: &str = "K,instance,metric,time_or_step,value";

/// One long-format row of a curves file.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub n_agents: usize,
    pub instance: usize,
    pub metric: String,
    pub time_or_step: f64,
    pub value: f64,
}

impl CurveRow {
    pub fn write_to(&self, out: &mut String) {
        let _ = writeln!(out, "{},{},{},{},{}", self.n_agents, self.instance, self.metric, self.time_or_step, self.value);
    }
}

pub fn parse_curves(path: &Path, text: &str) -> Result<Vec<CurveRow>> {
    let malformed = |line: usize, message: String| Error::Malformed { path: path.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == CURVES_HEADER => {}
        Some((_, h)) => return Err(malformed(1, format!("expected header `{CURVES_HEADER}`, found `{h}`"))),
        None => return Err(malformed(1, "empty curves file".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(malformed(n, format!("expected 5 fields, found {}", fields.len())));
        }
        let int = |s: &str, what: &str| s.trim().parse::<usize>().map_err(|_| malformed(n, format!("bad {what} `{s}`")));
        let float = |s: &str, what: &str| {
            s.trim().parse::<f64>().ok().filter(|v| !v.is_nan()).ok_or_else(|| malformed(n, format!("bad {what} `{s}`")))
        };
        let metric = fields[2].trim();
        if metric.is_empty() {
            return Err(malformed(n, "empty metric name".into()));
        }
        rows.push(CurveRow {
            n_agents: int(fields[0], "K")?,
            instance: int(fields[1], "instance")?,
            metric: metric.to_string(),
            time_or_step: float(fields[3], "time_or_step")?,
            value: float(fields[4], "value")?,
        });
    }
    if rows.is_empty() {
        return Err(malformed(2, "no data rows".into()));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub metric: String,
    pub n_agents: usize,
    pub stats: Aggregate,
}

/// Last value of every instance, then mean and standard error per `(metric, K)`,
/// ordered by metric name and then `K`.
pub fn summarize_rows(rows: &[CurveRow]) -> Vec<SummaryRow> {
    let mut last: BTreeMap<(String, usize, usize), (f64, f64)> = BTreeMap::new();
    for r in rows {
        let key = (r.metric.clone(), r.n_agents, r.instance);
        let entry = last.entry(key).or_insert((r.time_or_step, r.value));
        if r.time_or_step >= entry.0 {
            *entry = (r.time_or_step, r.value);
        }
    }
    let mut grouped: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for ((metric, k, _), (_, v)) in last {
        grouped.entry((metric, k)).or_default().push(v);
    }
    grouped.into_iter().map(|((metric, n_agents), values)| SummaryRow { metric, n_agents, stats: aggregate(&values) }).collect()
}

pub fn summarize(path: &Path) -> Result<Vec<SummaryRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(summarize_rows(&parse_curves(path, &text)?))
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::from("metric,K,mean,se,n\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:.6},{:.6},{}", r.metric, r.n_agents, r.stats.mean, r.stats.se, r.stats.n);
    }
    out
}
