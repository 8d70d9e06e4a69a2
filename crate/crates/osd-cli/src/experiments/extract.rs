//! `extract-q`: from a saved normalizer track to a generator certificate.
//!
//! The pipeline walks the constructive chain: primitive idempotents of the
//! whitened limit law, contraction extraction `K_c` from normalizer ratios
//! at each requested level `c`, blockwise semigroup elements `C_w`, and
//! finally the averaged generator with its membership certificate.

use std::path::Path;

use osd_core::linalg::{det_sub, Idempotent, Mat};
use osd_core::semigroup::{
    build_cw, extract_generator, extract_kc, gaussian_membership, primitive_decomposition,
    GaussianLaw, SemigroupError,
};
use serde_json::json;

use crate::config::{render_matrix, RunConfig};
use crate::io::{QFile, TrackFile};
use crate::report::{Flag, Report};

use super::{rt, DriverError};

/// `extract_kc` at the largest base index whose crossing is still inside
/// the track.
fn extract_kc_auto(
    normalizers: &[Mat],
    j: &Idempotent,
    c: f64,
) -> Result<Mat, DriverError> {
    for n_index in (0..normalizers.len().saturating_sub(1)).rev() {
        match extract_kc(normalizers, j, c, n_index) {
            Ok(kc) => return Ok(kc),
            Err(SemigroupError::InsufficientHorizon) => continue,
            Err(e) => return Err(rt(e)),
        }
    }
    Err(DriverError::Runtime(format!(
        "insufficient normalizer horizon for c = {c}"
    )))
}

pub fn run(config: &RunConfig, out_dir: &Path) -> Result<Report, DriverError> {
    let track_path = config.str_value("track_file")?;
    let track_file = TrackFile::read(Path::new(track_path)).map_err(rt)?;
    let track = track_file.to_track().map_err(rt)?;
    let dim = track_file.dim;
    let c_values = config.f64_list("kc.c_values")?;
    let w_values = config.f64_list("cw.w_values")?;
    let t_grid = config.f64_list("t.grid")?;

    // Normalized sums converge to the standard normal by construction.
    let law = GaussianLaw::standard(dim);
    let idempotents = primitive_decomposition(&law).map_err(rt)?;
    let normalizers = track.normalizers();

    let mut cw_samples: Vec<(f64, Mat)> = Vec::new();
    let mut kc_details = Vec::new();
    let mut kc_margin_min = f64::INFINITY;
    for &c in &c_values {
        let mut pairs: Vec<(Idempotent, Mat)> = Vec::with_capacity(idempotents.len());
        for (r, j) in idempotents.iter().enumerate() {
            let kc = extract_kc_auto(normalizers, j, c)?;
            // Limit points of normalizer ratios land in the semigroup.
            let membership = gaussian_membership(&law, &kc, 1e-8);
            kc_margin_min = kc_margin_min.min(membership.margin);
            let t = j.mat().matmul(&kc).matmul(j.mat());
            let det = det_sub(j, &t).map_err(rt)?;
            kc_details.push(json!({
                "c": c,
                "block": r,
                "det": det,
                "membership_margin": membership.margin,
            }));
            pairs.push((j.clone(), t));
        }
        for &w in &w_values {
            let cw = build_cw(&pairs, w).map_err(rt)?;
            cw_samples.push((w, cw));
        }
    }

    let cert = extract_generator(&cw_samples, &law, &t_grid).map_err(rt)?;
    QFile::from_certificate(&cert)
        .write(&out_dir.join("q.json"))
        .map_err(rt)?;

    let min_margin = cert
        .membership_margins
        .iter()
        .fold(f64::INFINITY, |m, &(_, v)| m.min(v));

    let mut report = Report::new(config, "extract-q");
    report.insert_metric("q", json!(render_matrix(&cert.q)));
    report.insert_metric("spectral_margin", json!(cert.spectral_margin));
    report.insert_metric("consistency_residual", json!(cert.consistency_residual));
    report.insert_metric(
        "membership_margins",
        json!(cert
            .membership_margins
            .iter()
            .map(|&(t, m)| json!({ "t": t, "margin": m }))
            .collect::<Vec<_>>()),
    );
    report.insert_metric("kc", json!(kc_details));
    report.insert_metric("cw_samples", json!(cw_samples.len()));

    report.push_flag(Flag::at_least(
        "spectral_margin",
        cert.spectral_margin,
        1e-9,
    ));
    report.push_flag(Flag::at_least("membership_min_margin", min_margin, -1e-6));
    report.push_flag(Flag::at_least("kc_membership_min", kc_margin_min, -1e-6));
    report.push_flag(Flag::at_most(
        "consistency_residual",
        cert.consistency_residual,
        0.25,
    ));
    Ok(report)
}
