//! Metrics records and artifact writers.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::booster::{ErrorRates, TerminationTag};
use crate::error::{Error, Result};

use super::config::RunConfig;

/// Summary of one experiment, written as `metrics.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub kind: String,
    pub seed: u64,
    pub total_error: f64,
    pub false_pos: f64,
    pub false_neg: f64,
    pub evaluation_samples: usize,
    /// Empirical soft margin `η̂(ρ)` on the evaluation sample.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_hat: Option<f64>,
    /// Analytic `η(ρ)` when the source has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_analytic: Option<f64>,
    pub epsilon: f64,
    /// `η̂ + ε`, the error target of the soft-margin guarantee.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_plus_epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub termination_tag: Option<TerminationTag>,
    pub region_count: usize,
    pub rounds: usize,
    pub attempts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    /// Raw draws taken from the training source, rejections included.
    pub samples_consumed: u64,
    pub wall_time_s: f64,
    pub config: RunConfig,
}

impl MetricsRecord {
    pub fn new(cfg: &RunConfig, rates: &ErrorRates) -> Self {
        MetricsRecord {
            kind: cfg.run.kind.to_string(),
            seed: cfg.run.seed,
            total_error: rates.total,
            false_pos: rates.false_pos,
            false_neg: rates.false_neg,
            evaluation_samples: rates.samples,
            eta_hat: None,
            eta_analytic: None,
            epsilon: cfg.learner.epsilon,
            eta_plus_epsilon: None,
            termination_tag: None,
            region_count: 0,
            rounds: 0,
            attempts: 0,
            converged: None,
            samples_consumed: 0,
            wall_time_s: 0.0,
            config: cfg.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("total_error", self.total_error), ("false_pos", self.false_pos), ("false_neg", self.false_neg)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} is not a rate")));
            }
        }
        if (self.false_pos + self.false_neg - self.total_error).abs() > 1e-12 {
            return Err(Error::invalid("total error is not the sum of its parts"));
        }
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// One JSON object per line. The first line is the resolved config.
pub fn write_json_lines<T: Serialize>(path: &Path, cfg: &RunConfig, rows: &[T]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    let header = serde_json::json!({ "config": cfg });
    writeln!(out, "{header}")?;
    for r in rows {
        let line = serde_json::to_string(r).map_err(|e| Error::invalid(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Resolved config as `#`-comment lines for CSV and record artifacts.
pub fn config_comments(cfg: &RunConfig) -> Vec<String> {
    let mut c = vec![format!("resolved config (seed {})", cfg.run.seed)];
    c.extend(cfg.to_toml().lines().map(str::to_string));
    c
}
