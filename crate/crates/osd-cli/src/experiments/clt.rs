//! `clt-run`: the end-to-end normalized-partial-sum harness.
//!
//! The run simulates the configured strongly mixing process, builds matrix
//! normalizers on both the reporting checkpoints and a dense geometric grid
//! (saved for `extract-q`), and verifies infinitesimality, block-sum bounds,
//! normalizer trends, the dependence bound, and convergence of the
//! normalized sums to the standard normal.
//!
//! Replicas are processed in chunks regenerated from their per-replica
//! streams, so the full `R x n x d` array never has to exist in memory.

use std::path::Path;

use osd_core::clt::{
    cf_independence_residual, default_z_grid, delta_schedule, energy_permutation_band,
    limit_distance, normalizer_diagnostics, partial_sums, regularize_normalizers,
    BlockSumAccumulator, MomentAccumulator, NormalizerTrack, Samples, TailAccumulator,
};
use osd_core::mixing::{generate, generate_slice};
use osd_core::semigroup::GaussianLaw;
use serde_json::json;

use crate::config::RunConfig;
use crate::io::TrackFile;
use crate::report::{Flag, Report};

use super::{rt, sub_seed, DriverError};

/// Geometric checkpoint grid for the normalizer sequence handed to
/// `extract-q`; the coarse reporting checkpoints are merged in.
fn dense_grid(first: usize, last: usize, ratio: f64, coarse: &[usize]) -> Vec<usize> {
    let mut grid: Vec<usize> = coarse.to_vec();
    let mut x = first as f64;
    while x < last as f64 {
        grid.push(x as usize);
        x *= ratio;
    }
    grid.push(last);
    grid.sort_unstable();
    grid.dedup();
    grid
}

fn chunk_sizes(total: usize, per_chunk: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < total {
        let len = per_chunk.min(total - start);
        out.push((start, len));
        start += len;
    }
    out
}

pub fn run(config: &RunConfig, out_dir: &Path) -> Result<Report, DriverError> {
    let spec = config.process_spec()?;
    let dim = spec.dim();
    let replicas = config.usize_value("replicas")?;
    let seed = config.u64_value("seed")?;
    let checkpoints = config.usize_list("checkpoints")?;
    if checkpoints.is_empty() {
        return Err(DriverError::Runtime("checkpoints must be non-empty".into()));
    }
    let n_max = *checkpoints.last().unwrap();
    let eps_grid = config.f64_list("eps.grid")?;
    let delta_levels = config.usize_value("delta.levels").unwrap_or(32).max(2);
    let block_windows = config.usize_value("block.windows").unwrap_or(8);
    let cf_gaps = config.usize_list("cf.gaps").unwrap_or_else(|_| vec![1, 4, 16]);
    let permutations = config.usize_value("energy.permutations").unwrap_or(200);
    let subsample = config.usize_value("energy.subsample").unwrap_or(1024);
    let grid_ratio = config.f64_value("kc.grid_ratio").unwrap_or(1.02);

    let law = GaussianLaw::standard(dim);
    // Budget ~128 MB of path data per chunk.
    let per_chunk = (128 * 1024 * 1024 / (n_max * dim * 8))
        .max(16)
        .min(replicas.max(1));
    let chunks = chunk_sizes(replicas, per_chunk);

    // Pass A: moments on the merged dense + coarse grid.
    let union_grid = dense_grid(checkpoints[0], n_max, grid_ratio, &checkpoints);
    let mut moments = MomentAccumulator::new(&union_grid, dim).map_err(rt)?;
    for &(start, len) in &chunks {
        let chunk = generate_slice(&spec, n_max, len, seed, start).map_err(rt)?;
        moments.absorb(&chunk).map_err(rt)?;
    }
    let union_track = regularize_normalizers(&moments.finish().map_err(rt)?, &law).map_err(rt)?;

    // Coarse reporting subtrack, frames inherited from the union track.
    let coarse_track = {
        let idx: Vec<usize> = checkpoints
            .iter()
            .map(|&n| union_track.index_of(n).expect("coarse grid in union"))
            .collect();
        NormalizerTrack::from_parts(
            checkpoints.clone(),
            idx.iter().map(|&i| union_track.a(i).clone()).collect(),
            idx.iter().map(|&i| union_track.b(i).to_vec()).collect(),
        )
    };

    TrackFile::from_track(&union_track, dim)
        .write(&out_dir.join("normalizers.json"))
        .map_err(rt)?;

    // Pass B: tail table over eps grid + schedule levels, and per-replica
    // sums at the coarse checkpoints.
    let mut levels: Vec<f64> = (1..=delta_levels).map(|m| 1.0 / m as f64).collect();
    levels.extend_from_slice(&eps_grid);
    let mut tails = TailAccumulator::new(&coarse_track, &levels);
    let mut sums_per_checkpoint: Vec<Vec<f64>> =
        vec![Vec::with_capacity(replicas * dim); checkpoints.len()];
    for &(start, len) in &chunks {
        let chunk = generate_slice(&spec, n_max, len, seed, start).map_err(rt)?;
        tails.absorb(&chunk).map_err(rt)?;
        for (ci, (_, samples)) in partial_sums(&chunk, &checkpoints)
            .map_err(rt)?
            .into_iter()
            .enumerate()
        {
            sums_per_checkpoint[ci].extend_from_slice(samples.data());
        }
    }
    let tail_table = tails.finish();

    // Schedule and block sums (pass C) when condition (A) is certified.
    let schedule = delta_schedule(&tail_table);
    let (schedule_ok, block_report) = match schedule {
        Ok(schedule) => {
            let mut blocks = BlockSumAccumulator::new(
                &coarse_track,
                &schedule,
                block_windows,
                sub_seed(seed, 3),
            );
            for &(start, len) in &chunks {
                let chunk = generate_slice(&spec, n_max, len, seed, start).map_err(rt)?;
                blocks.absorb(&chunk).map_err(rt)?;
            }
            (Some(schedule), Some(blocks.finish()))
        }
        Err(_) => (None, None),
    };

    // Convergence metrics per checkpoint.
    let z_grid = default_z_grid(dim, 4, &[0.5, 1.0, 2.0]);
    let mut energies = Vec::with_capacity(checkpoints.len());
    let mut cf_sups = Vec::with_capacity(checkpoints.len());
    let mut final_normed: Option<Samples> = None;
    for (ci, &n) in checkpoints.iter().enumerate() {
        let sums = Samples::new(replicas, dim, std::mem::take(&mut sums_per_checkpoint[ci]));
        let normed = sums.affine(coarse_track.a(ci), coarse_track.b(ci));
        let (energy, cf_sup) = limit_distance(&normed, &law, &z_grid, sub_seed(seed, 4 + n as u64));
        energies.push(energy);
        cf_sups.push(cf_sup);
        if n == n_max {
            final_normed = Some(normed);
        }
    }
    let final_normed = final_normed.expect("final checkpoint present");
    let band = energy_permutation_band(
        &final_normed,
        &law,
        permutations,
        subsample,
        sub_seed(seed, 2),
    );

    // Normalizer trend diagnostics on the coarse track.
    let diag = normalizer_diagnostics(&coarse_track).map_err(rt)?;

    // Dependence bound at the first checkpoint on a regenerated prefix
    // batch (per-replica streams make it an exact prefix of the long run).
    let n_cf = checkpoints[0];
    let cf_batch = generate(&spec, n_cf, replicas, seed).map_err(rt)?;
    let cf_track = NormalizerTrack::from_parts(
        vec![n_cf],
        vec![coarse_track.a(0).clone()],
        vec![coarse_track.b(0).to_vec()],
    );
    let mut cf_results = Vec::new();
    for &gap in &cf_gaps {
        // Gaps that leave no room for the split are not measurable at this
        // checkpoint; skip them instead of failing the run.
        if gap + 2 > n_cf {
            continue;
        }
        let r = cf_independence_residual(&cf_batch, &cf_track, n_cf, gap, &z_grid).map_err(rt)?;
        cf_results.push((gap, r));
    }

    // Report assembly.
    let mut report = Report::new(config, "clt-run");
    let eps_trend = eps_grid.iter().cloned().fold(f64::MIN, f64::max);
    let trend_col = tail_table
        .eps
        .iter()
        .position(|&e| (e - eps_trend).abs() < 1e-12)
        .expect("trend eps in table");
    let trend: Vec<f64> = (0..checkpoints.len())
        .map(|ci| tail_table.value(ci, trend_col))
        .collect();
    let monotone = trend
        .windows(2)
        .all(|w| w[1] <= w[0] + 1.0 / replicas as f64);

    report.insert_metric(
        "checkpoints",
        json!(checkpoints.iter().map(|&n| n as u64).collect::<Vec<_>>()),
    );
    report.insert_metric("energy", json!(energies));
    report.insert_metric("cf_sup", json!(cf_sups));
    report.insert_metric(
        "energy_band",
        json!({
            "statistic": band.statistic,
            "lower": band.lower,
            "upper": band.upper,
            "permutations": band.permutations,
        }),
    );
    report.insert_metric(
        "infinitesimality",
        json!(tail_table
            .eps
            .iter()
            .enumerate()
            .filter(|(_, e)| eps_grid.iter().any(|g| (*e - g).abs() < 1e-12))
            .map(|(col, e)| {
                json!({
                    "eps": e,
                    "values": (0..checkpoints.len())
                        .map(|ci| tail_table.value(ci, col))
                        .collect::<Vec<_>>(),
                })
            })
            .collect::<Vec<_>>()),
    );
    report.insert_metric("ratio_bound", json!(diag.ratio_bound));
    report.insert_metric("normalizer_norms", json!(diag.norms));
    report.insert_metric("det_ratios_adjusted", json!(diag.det_ratios_adjusted));
    if let Some(ref schedule) = schedule_ok {
        report.insert_metric(
            "delta_breakpoints",
            json!(schedule
                .breakpoints
                .iter()
                .map(|&(m, n)| json!({ "m": m, "n": n }))
                .collect::<Vec<_>>()),
        );
        report.insert_metric("delta", json!(schedule.delta));
    }
    if let Some(ref blocks) = block_report {
        report.insert_metric("block_worst_margin", json!(blocks.worst_margin));
    }
    report.insert_metric(
        "cf_independence",
        json!(cf_results
            .iter()
            .map(|(gap, r)| json!({
                "gap": gap,
                "residual": r.residual,
                "bound": r.bound,
                "slack": r.slack,
            }))
            .collect::<Vec<_>>()),
    );

    report.push_flag(Flag::boolean("energy_within_band", band.within()));
    report.push_flag(Flag::boolean("infinitesimality_monotone", monotone));
    report.push_flag(Flag::at_most(
        "infinitesimality_final",
        *trend.last().unwrap(),
        0.01,
    ));
    report.push_flag(Flag::at_most("ratio_bound", diag.ratio_bound, 2.0));
    report.push_flag(Flag::boolean("normalizer_trends", !diag.flagged()));
    report.push_flag(Flag::boolean("schedule_built", schedule_ok.is_some()));
    if let Some(ref blocks) = block_report {
        report.push_flag(Flag::at_most("block_sums", blocks.worst_margin, 0.0));
    }
    report.push_flag(Flag::boolean(
        "cf_bound_holds",
        cf_results.iter().all(|(_, r)| r.holds()),
    ));

    // Plot-ready per-checkpoint table.
    let mut header: Vec<String> = vec![
        "n".into(),
        "energy".into(),
        "cf_sup".into(),
        "ratio_bound".into(),
    ];
    for e in &eps_grid {
        header.push(format!("infinitesimality@{e}"));
    }
    let mut rows = Vec::with_capacity(checkpoints.len());
    for (ci, &n) in checkpoints.iter().enumerate() {
        let mut row = vec![n as f64, energies[ci], cf_sups[ci], diag.ratio_bound];
        for e in &eps_grid {
            let col = tail_table
                .eps
                .iter()
                .position(|t| (t - e).abs() < 1e-12)
                .expect("eps in table");
            row.push(tail_table.value(ci, col));
        }
        rows.push(row);
    }
    super::maybe_write_metrics_csv(config, out_dir, &header, &rows)?;

    Ok(report)
}
