//! `simulate-mixing`: generate a replicated strongly mixing batch and dump
//! it to CSV or the OSDB binary format.

use std::path::Path;

use osd_core::clt::Samples;
use osd_core::mixing::{generate, PathBatch};
use serde_json::json;

use crate::config::RunConfig;
use crate::io;
use crate::report::{Flag, Report};

use super::{rt, DriverError};

fn column_samples(batch: &PathBatch, t: usize) -> Samples {
    let d = batch.dim();
    let mut data = Vec::with_capacity(batch.replicas() * d);
    for r in 0..batch.replicas() {
        data.extend_from_slice(batch.at(r, t));
    }
    Samples::new(batch.replicas(), d, data)
}

pub fn run(config: &RunConfig, out_dir: &Path) -> Result<Report, DriverError> {
    let spec = config.process_spec()?;
    let n = config.usize_value("length")?;
    let replicas = config.usize_value("replicas")?;
    let seed = config.u64_value("seed")?;

    let batch = generate(&spec, n, replicas, seed).map_err(rt)?;

    let data_path = match config.get("data_format").unwrap_or("csv") {
        "bin" => {
            let p = out_dir.join("paths.osdb");
            io::write_batch_osdb(&p, &batch).map_err(rt)?;
            p
        }
        _ => {
            let p = out_dir.join("paths.csv");
            io::write_batch_csv(&p, &batch, 0).map_err(rt)?;
            p
        }
    };

    // Strict stationarity shows up as matching first/last marginals.
    let first = column_samples(&batch, 0).covariance();
    let last = column_samples(&batch, n - 1).covariance();
    let gap = first.sub(&last).max_abs();
    let noise = 10.0 / (replicas as f64).sqrt() * first.max_abs().max(1.0);

    let mut report = Report::new(config, "simulate-mixing");
    report.insert_metric("replicas", json!(replicas));
    report.insert_metric("length", json!(n));
    report.insert_metric("dim", json!(batch.dim()));
    report.insert_metric("data_file", json!(data_path.display().to_string()));
    report.insert_metric("stationarity_gap", json!(gap));
    report.push_flag(Flag::at_most("stationary_endpoints", gap, noise));
    Ok(report)
}
