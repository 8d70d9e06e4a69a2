//! `estimate-alpha`: empirical mixing-coefficient lower bounds per lag.

use std::path::Path;

use osd_core::mixing::{alpha_estimate, generate, ProcessSpec};
use serde_json::json;

use crate::config::RunConfig;
use crate::report::{Flag, Report};

use super::{maybe_write_metrics_csv, rt, DriverError};

pub fn run(config: &RunConfig, out_dir: &Path) -> Result<Report, DriverError> {
    let spec = config.process_spec()?;
    let n = config.usize_value("length")?;
    let replicas = config.usize_value("replicas")?;
    let seed = config.u64_value("seed")?;
    let lags = config.usize_list("alpha.lags")?;
    let directions = config.usize_value("alpha.directions").unwrap_or(8);
    let thresholds = config.usize_value("alpha.thresholds").unwrap_or(7);
    let positions = config.usize_value("alpha.positions").unwrap_or(3);

    let batch = generate(&spec, n, replicas, seed).map_err(rt)?;
    let mut estimates: Vec<(usize, f64)> = Vec::with_capacity(lags.len());
    for &lag in &lags {
        let a = alpha_estimate(&batch, lag, directions, thresholds, positions).map_err(rt)?;
        estimates.push((lag, a));
    }

    let mut report = Report::new(config, "estimate-alpha");
    report.insert_metric(
        "alpha",
        json!(estimates
            .iter()
            .map(|&(lag, a)| json!({ "lag": lag, "estimate": a }))
            .collect::<Vec<_>>()),
    );

    // Pass criteria depend on what the process promises.
    match &spec {
        ProcessSpec::Iid { .. } => {
            for &(lag, a) in &estimates {
                report.push_flag(Flag::at_most(&format!("alpha_iid_lag{lag}"), a, 0.01));
            }
        }
        ProcessSpec::Ma { coeffs, .. } => {
            let order = coeffs.len() - 1;
            for &(lag, a) in &estimates {
                if lag > order {
                    report.push_flag(Flag::at_most(&format!("alpha_ma_lag{lag}"), a, 0.01));
                }
            }
        }
        ProcessSpec::Ar1 { .. } => {
            if estimates.len() >= 2 {
                let first = estimates.first().unwrap().1;
                let last = estimates.last().unwrap().1;
                report.push_flag(Flag::at_most("alpha_decay_gap", last - first, 0.0));
            }
        }
    }

    let header: Vec<String> = vec!["lag".into(), "alpha".into()];
    let rows: Vec<Vec<f64>> = estimates
        .iter()
        .map(|&(lag, a)| vec![lag as f64, a])
        .collect();
    maybe_write_metrics_csv(config, out_dir, &header, &rows)?;
    Ok(report)
}
