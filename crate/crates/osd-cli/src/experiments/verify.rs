//! `verify`: certify a recovered generator against a sampled law.
//!
//! Draws from the stationary law, checks the factorization identity at the
//! requested factor times (with a corrupted-generator negative control),
//! and reports membership margins of `exp(-tQ)` against the stationary
//! Gaussian second-moment proxy.

use std::path::Path;

use osd_core::bdlp::{factorization_check, sample_osd};
use osd_core::clt::default_z_grid;
use osd_core::linalg::mat_exp;
use osd_core::semigroup::{gaussian_membership, GaussianLaw};
use serde_json::json;

use crate::config::RunConfig;
use crate::report::{Flag, Report};

use super::{rt, sub_seed, DriverError};

pub fn run(config: &RunConfig, _out_dir: &Path) -> Result<Report, DriverError> {
    let sampler = super::osd::sampler_from_config(config)?;
    let draws = config.usize_value("bdlp.draws")?;
    let seed = config.u64_value("seed")?;
    let t_grid = config.f64_list("t.grid")?;
    if t_grid.iter().any(|&t| t <= 0.0) {
        return Err(DriverError::Runtime("t.grid must be positive".into()));
    }

    let samples = sample_osd(&sampler, draws, seed).map_err(rt)?;
    let dim = sampler.q().dim();
    let z_grid = default_z_grid(dim, 8, &[0.5, 1.0, 2.0, 3.0]);

    // Gaussian proxy for membership margins: exact for pure-Gaussian
    // drivers, a second-moment surrogate when jumps are active.
    let proxy = GaussianLaw::centered(sampler.stationary_covariance().map_err(rt)?).map_err(rt)?;
    let pure_gaussian = sampler.levy().jump_rate() == 0.0;

    let mut residuals = Vec::with_capacity(t_grid.len());
    let mut margins = Vec::with_capacity(t_grid.len());
    for (k, &t) in t_grid.iter().enumerate() {
        let r = factorization_check(
            &samples,
            sampler.q(),
            t,
            &sampler,
            &z_grid,
            sub_seed(seed, 100 + k as u64),
        )
        .map_err(rt)?;
        residuals.push((t, r));
        let a = mat_exp(sampler.q(), -t).map_err(rt)?;
        margins.push((t, gaussian_membership(&proxy, &a, 1e-8).margin));
    }

    // Negative control: the same identity with a corrupted generator must
    // visibly fail.
    let t0 = t_grid[0];
    let corrupted = sampler.q().scale(2.0);
    let control = factorization_check(
        &samples,
        &corrupted,
        t0,
        &sampler,
        &z_grid,
        sub_seed(seed, 999),
    )
    .map_err(rt)?;

    let mut report = Report::new(config, "verify");
    report.insert_metric(
        "factorization_residuals",
        json!(residuals
            .iter()
            .map(|&(t, r)| json!({ "t": t, "residual": r }))
            .collect::<Vec<_>>()),
    );
    report.insert_metric(
        "membership_margins",
        json!(margins
            .iter()
            .map(|&(t, m)| json!({ "t": t, "margin": m }))
            .collect::<Vec<_>>()),
    );
    report.insert_metric("negative_control_residual", json!(control));
    report.insert_metric("gaussian_proxy_exact", json!(pure_gaussian));

    let worst = residuals.iter().fold(0.0f64, |m, &(_, r)| m.max(r));
    report.push_flag(Flag::at_most("factorization_residual", worst, 0.05));
    report.push_flag(Flag::at_least("negative_control", control, 0.15));
    if pure_gaussian {
        let min_margin = margins.iter().fold(f64::INFINITY, |m, &(_, v)| m.min(v));
        report.push_flag(Flag::at_least("membership_min_margin", min_margin, -1e-6));
    }
    Ok(report)
}
