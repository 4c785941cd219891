//! Run configuration and result records.
//!
//! Records are emitted as JSON Lines (one record per line; sweeps append one
//! record per level) plus an optional summary CSV with the fixed column
//! order `k,p,region,lambda_min,constant,seconds`.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Cube,
    Lshape,
}

impl Domain {
    pub fn parse(s: &str) -> Option<Domain> {
        match s {
            "cube" => Some(Domain::Cube),
            "lshape" => Some(Domain::Lshape),
            _ => None,
        }
    }
}

/// Echoed configuration of a run; serialization round-trips exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub domain: Domain,
    pub extent: [f64; 3],
    pub subdivisions: usize,
    pub p: f64,
    /// Region name (`all`, `x0`, ... ) or `none` for the unconstrained run.
    pub region: String,
    pub tol: f64,
    pub seed: u64,
    #[serde(default)]
    pub restarts: usize,
    #[serde(default)]
    pub eigs: usize,
    #[serde(default)]
    pub samples: usize,
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub variant: Option<String>,
    #[serde(default)]
    pub force: Option<[f64; 3]>,
    #[serde(default)]
    pub slack: Option<f64>,
}

/// One scalar-results record; every populated scalar is finite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sum_form_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuation_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coercivity_lambda: Option<f64>,
    pub iterations: usize,
    pub seconds: f64,
    pub version: String,
}

impl ResultRecord {
    pub fn new(config: RunConfig) -> ResultRecord {
        ResultRecord {
            config,
            lambda_min: None,
            constant: None,
            kernel_dim: None,
            ratio: None,
            sum_form_factor: None,
            energy: None,
            residual: None,
            violations: None,
            max_ratio: None,
            mean_ratio: None,
            continuation_delta: None,
            coercivity_lambda: None,
            iterations: 0,
            seconds: 0.0,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Every populated scalar must be finite.
    pub fn all_finite(&self) -> bool {
        [
            self.lambda_min,
            self.constant,
            self.ratio,
            self.energy,
            self.residual,
            self.max_ratio,
            self.mean_ratio,
            self.continuation_delta,
            self.coercivity_lambda,
            self.sum_form_factor,
        ]
        .iter()
        .flatten()
        .all(|v| v.is_finite())
            && self.seconds.is_finite()
    }
}

/// Streaming writer for JSONL records and the summary CSV.
pub struct RecordWriter {
    jsonl: Option<std::io::BufWriter<std::fs::File>>,
    csv: Option<std::io::BufWriter<std::fs::File>>,
}

impl RecordWriter {
    pub fn create(jsonl: Option<&PathBuf>, csv: Option<&PathBuf>) -> std::io::Result<RecordWriter> {
        let jsonl = match jsonl {
            Some(p) => Some(std::io::BufWriter::new(std::fs::File::create(p)?)),
            None => None,
        };
        let mut csv = match csv {
            Some(p) => Some(std::io::BufWriter::new(std::fs::File::create(p)?)),
            None => None,
        };
        if let Some(w) = csv.as_mut() {
            writeln!(w, "k,p,region,lambda_min,constant,seconds")?;
        }
        Ok(RecordWriter { jsonl, csv })
    }

    pub fn write(&mut self, record: &ResultRecord) -> std::io::Result<()> {
        if let Some(w) = self.jsonl.as_mut() {
            serde_json::to_writer(&mut *w, record)?;
            writeln!(w)?;
        }
        if let Some(w) = self.csv.as_mut() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                record.config.subdivisions,
                record.config.p,
                record.config.region,
                record.lambda_min.map_or(String::new(), |v| v.to_string()),
                record.constant.map_or(String::new(), |v| v.to_string()),
                record.seconds
            )?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        if let Some(w) = self.jsonl.as_mut() {
            w.flush()?;
        }
        if let Some(w) = self.csv.as_mut() {
            w.flush()?;
        }
        Ok(())
    }
}

/// Parses `a,b,c` (or a single scalar, broadcast) into a triple.
pub fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let parse = |t: &str| -> Result<f64, String> {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("invalid number `{t}`"))
    };
    match parts.as_slice() {
        [one] => {
            let v = parse(one)?;
            Ok([v, v, v])
        }
        [a, b, c] => Ok([parse(a)?, parse(b)?, parse(c)?]),
        _ => Err(format!("expected `x,y,z` or a single value, got `{s}`")),
    }
}

/// Parses a sweep range `a..b` (inclusive).
pub fn parse_sweep(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected `k1..k2`, got `{s}`"))?;
    let lo: usize = a.parse().map_err(|_| format!("invalid level `{a}`"))?;
    let hi: usize = b.parse().map_err(|_| format!("invalid level `{b}`"))?;
    if lo == 0 || hi < lo {
        return Err(format!("sweep `{s}` must satisfy 1 <= k1 <= k2"));
    }
    Ok((lo, hi))
}
