//! `osd-sample`: draw from the stationary law of the Levy-driven operator
//! OU process and check the second moments against the Lyapunov solution.

use std::path::Path;

use osd_core::bdlp::{sample_osd, OsdSampler};
use serde_json::json;

use crate::config::{render_matrix, RunConfig};
use crate::io::{self, QFile};
use crate::report::{Flag, Report};

use super::{levy_from_config, rt, DriverError};

pub(crate) fn generator_from_config(config: &RunConfig) -> Result<osd_core::linalg::Mat, DriverError> {
    if let Some(path) = config.get("q_file") {
        let qf = QFile::read(Path::new(path)).map_err(rt)?;
        return qf.q_matrix().map_err(rt);
    }
    Ok(config.matrix("q.matrix")?)
}

pub(crate) fn sampler_from_config(config: &RunConfig) -> Result<OsdSampler, DriverError> {
    let q = generator_from_config(config)?;
    let dim = q.dim();
    let levy = levy_from_config(config, dim)?;
    let step = config.f64_value("bdlp.step").unwrap_or(1.0 / 64.0);
    match config.get("bdlp.horizon") {
        Some(_) => {
            let horizon = config.f64_value("bdlp.horizon")?;
            OsdSampler::new(q, levy, step, horizon).map_err(rt)
        }
        None => {
            let margin = osd_core::linalg::min_real_eigenvalue(&q).map_err(rt)?;
            if margin <= 0.0 {
                return Err(DriverError::Runtime(format!(
                    "generator spectral margin {margin} not positive"
                )));
            }
            OsdSampler::new(q, levy, step, 20.0 / margin).map_err(rt)
        }
    }
}

pub fn run(config: &RunConfig, out_dir: &Path) -> Result<Report, DriverError> {
    let sampler = sampler_from_config(config)?;
    let draws = config.usize_value("bdlp.draws")?;
    let seed = config.u64_value("seed")?;

    let samples = sample_osd(&sampler, draws, seed).map_err(rt)?;
    let data_path = match config.get("data_format").unwrap_or("csv") {
        "bin" => {
            let p = out_dir.join("samples.osdb");
            io::write_samples_osdb(&p, &samples).map_err(rt)?;
            p
        }
        _ => {
            let p = out_dir.join("samples.csv");
            io::write_samples_csv(&p, &samples).map_err(rt)?;
            p
        }
    };

    let empirical = samples.covariance();
    let lyapunov = sampler.stationary_covariance().map_err(rt)?;
    let gap = empirical.sub(&lyapunov).max_abs();
    let tol = 10.0 / (draws as f64).sqrt() * lyapunov.max_abs().max(1.0);

    let mut report = Report::new(config, "osd-sample");
    report.insert_metric("draws", json!(draws));
    report.insert_metric("q", json!(render_matrix(sampler.q())));
    report.insert_metric("spectral_margin", json!(sampler.spectral_margin()));
    report.insert_metric("horizon", json!(sampler.horizon()));
    report.insert_metric("step", json!(sampler.step()));
    report.insert_metric("empirical_cov", json!(render_matrix(&empirical)));
    report.insert_metric("lyapunov_cov", json!(render_matrix(&lyapunov)));
    report.insert_metric("cov_gap", json!(gap));
    report.insert_metric("data_file", json!(data_path.display().to_string()));
    report.push_flag(Flag::at_most("cov_matches_lyapunov", gap, tol));
    Ok(report)
}
