//! Experiment runner behind the `advbloom` binary.
//!
//! A run expands the parameter grid, evaluates each point with a seed
//! derived from the master seed, the experiment name and the point index,
//! and emits one record per point in grid order.

pub mod config;
pub mod experiments;
pub mod output;

use std::time::Instant;

use advbloom::stats::derive_seed;

pub use config::{ConfigError, Experiment, ExperimentConfig, Format, Value};
pub use output::Record;

pub const BUILD_ID: &str = env!("ADVBLOOM_BUILD_ID");

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub columns: Vec<String>,
    pub records: Vec<Record>,
}

impl RunOutput {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }

    pub fn render(&self, format: Format) -> Vec<u8> {
        output::render(&self.columns, &self.records, format).expect("in-memory csv writer cannot fail")
    }
}

pub fn columns(config: &ExperimentConfig) -> Vec<String> {
    let mut cols = vec!["experiment".to_string()];
    cols.extend(config.grid.iter().map(|(k, _)| k.to_string()));
    cols.extend(["trials", "seed"].map(String::from));
    cols.extend(config.experiment.metrics().iter().map(|m| m.to_string()));
    cols.extend(["status", "error", "build"].map(String::from));
    if config.timing {
        cols.push("elapsed_ms".into());
    }
    cols
}

/// Runs every grid point. A failing point yields a record with
/// `status = failed`, empty metrics and the error message.
pub fn run(config: &ExperimentConfig) -> RunOutput {
    let experiment = config.experiment;
    let metrics = experiment.metrics();
    let records = config
        .points()
        .into_iter()
        .enumerate()
        .map(|(i, point)| {
            let started = Instant::now();
            let seed = derive_seed(config.master_seed, experiment.name(), i as u64);
            let result = experiments::run_point(experiment, &point, config.trials, seed).and_then(|values| {
                assert_eq!(values.len(), metrics.len(), "{} metric arity", experiment.name());
                match values.iter().position(|v| matches!(v, Value::Float(f) if !f.is_finite())) {
                    Some(j) => Err(advbloom::Error::InvalidParameter(format!("non-finite {}", metrics[j]))),
                    None => Ok(values),
                }
            });
            let mut fields = vec![("experiment".to_string(), Value::Text(experiment.name().into()))];
            fields.extend(point.0.iter().map(|(k, v)| (k.to_string(), v.clone())));
            fields.push(("trials".into(), Value::Int(config.trials)));
            fields.push(("seed".into(), Value::Int(config.master_seed)));
            let (status, error) = match result {
                Ok(values) => {
                    fields.extend(metrics.iter().map(|m| m.to_string()).zip(values));
                    ("ok".to_string(), String::new())
                }
                Err(e) => {
                    fields.extend(metrics.iter().map(|m| (m.to_string(), Value::Empty)));
                    ("failed".to_string(), e.to_string())
                }
            };
            fields.push(("status".into(), Value::Text(status)));
            fields.push(("error".into(), Value::Text(error)));
            fields.push(("build".into(), Value::Text(BUILD_ID.into())));
            if config.timing {
                fields.push(("elapsed_ms".into(), Value::Int(started.elapsed().as_millis() as u64)));
            }
            Record { fields }
        })
        .collect();
    RunOutput {
        columns: columns(config),
        records,
    }
}
