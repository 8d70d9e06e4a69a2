//! Infinitesimality diagnostics: tail tables over the normalized array,
//! the staircase schedule `delta_n`, and the block-sum bound.

use alloc::vec;
use alloc::vec::Vec;

use libm::{floor, sqrt};

use crate::mixing::PathBatch;
use crate::rng::Rng;

use super::{CltError, NormalizerTrack};

/// `sup_{j <= n} P(||A_n X_j|| >= eps)` estimated across replicas, tabulated
/// per checkpoint and per `eps`.
#[derive(Debug, Clone)]
pub struct TailTable {
    pub checkpoints: Vec<usize>,
    /// Strictly decreasing threshold grid.
    pub eps: Vec<f64>,
    /// `values[checkpoint_idx][eps_idx]`.
    pub values: Vec<Vec<f64>>,
}

impl TailTable {
    pub fn value(&self, checkpoint_idx: usize, eps_idx: usize) -> f64 {
        self.values[checkpoint_idx][eps_idx]
    }
}

/// Streaming accumulator for the uniform tails
/// `max_{j <= n} P(||A_n X_j|| >= eps)`: per-position threshold buckets are
/// summed across replica chunks and the sup over positions is taken at the
/// end.
#[derive(Debug, Clone)]
pub struct TailAccumulator {
    checkpoints: Vec<usize>,
    a: Vec<crate::linalg::Mat>,
    /// Strictly decreasing threshold grid.
    eps: Vec<f64>,
    /// Ascending squared thresholds for the bucket search.
    asc_sq: Vec<f64>,
    /// Per checkpoint: `n * (E + 1)` bucket counts.
    counts: Vec<Vec<u32>>,
    replicas: usize,
}

impl TailAccumulator {
    pub fn new(track: &NormalizerTrack, eps_grid: &[f64]) -> Self {
        assert!(!eps_grid.is_empty(), "eps grid must be non-empty");
        let mut eps: Vec<f64> = eps_grid.to_vec();
        eps.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
        eps.dedup();
        assert!(eps.iter().all(|&e| e > 0.0), "thresholds must be positive");
        let asc_sq: Vec<f64> = eps.iter().rev().map(|e| e * e).collect();
        let e_count = eps.len();
        let counts = track
            .checkpoints()
            .iter()
            .map(|&n| vec![0u32; n * (e_count + 1)])
            .collect();
        TailAccumulator {
            checkpoints: track.checkpoints().to_vec(),
            a: track.normalizers().to_vec(),
            eps,
            asc_sq,
            counts,
            replicas: 0,
        }
    }

    pub fn absorb(&mut self, batch: &PathBatch) -> Result<(), CltError> {
        let d = batch.dim();
        let e_count = self.eps.len();
        for idx in 0..self.checkpoints.len() {
            let n = self.checkpoints[idx];
            if n > batch.length() {
                return Err(CltError::CheckpointOutOfRange {
                    checkpoint: n,
                    length: batch.length(),
                });
            }
            let a = &self.a[idx];
            let counts = &mut self.counts[idx];
            for r in 0..batch.replicas() {
                for j in 0..n {
                    let x = batch.at(r, j);
                    let mut sq = 0.0;
                    for i in 0..d {
                        let mut acc = 0.0;
                        for k in 0..d {
                            acc += a[(i, k)] * x[k];
                        }
                        sq += acc * acc;
                    }
                    // Number of ascending thresholds with eps^2 <= ||Ax||^2.
                    let k = self.asc_sq.partition_point(|&t| t <= sq);
                    counts[j * (e_count + 1) + k] += 1;
                }
            }
        }
        self.replicas += batch.replicas();
        Ok(())
    }

    pub fn finish(&self) -> TailTable {
        let e_count = self.eps.len();
        let mut values = Vec::with_capacity(self.checkpoints.len());
        for (idx, &n) in self.checkpoints.iter().enumerate() {
            let counts = &self.counts[idx];
            let mut sup = vec![0.0f64; e_count];
            for j in 0..n {
                // Suffix sums over buckets: the event {||Ax|| >= eps_i}
                // (descending i) counts every bucket at or above the
                // matching ascending threshold.
                let mut running = 0u32;
                for k in (1..=e_count).rev() {
                    running += counts[j * (e_count + 1) + k];
                    let desc = e_count - k;
                    let p = running as f64 / self.replicas.max(1) as f64;
                    if p > sup[desc] {
                        sup[desc] = p;
                    }
                }
            }
            values.push(sup);
        }
        TailTable {
            checkpoints: self.checkpoints.clone(),
            eps: self.eps.clone(),
            values,
        }
    }
}

/// Estimates the uniform tail `max_{j <= n} P(||A_n X_j|| >= eps)` for every
/// checkpoint of the track and every `eps` in the grid.
///
/// For a valid normalized-sum scheme these values tend to zero in `n` at
/// each fixed `eps` (the array is infinitesimal).
pub fn infinitesimality_check(
    batch: &PathBatch,
    track: &NormalizerTrack,
    eps_grid: &[f64],
) -> Result<TailTable, CltError> {
    let mut acc = TailAccumulator::new(track, eps_grid);
    acc.absorb(batch)?;
    Ok(acc.finish())
}

/// Staircase schedule `delta_n = 1/m` on `[N_m, N_{m+1})`.
#[derive(Debug, Clone)]
pub struct DeltaSchedule {
    pub checkpoints: Vec<usize>,
    pub delta: Vec<f64>,
    /// `(m, N_m)` breakpoints actually certified by the table.
    pub breakpoints: Vec<(usize, usize)>,
}

impl DeltaSchedule {
    pub fn delta_at_checkpoint(&self, idx: usize) -> f64 {
        self.delta[idx]
    }
}

/// Builds the schedule from a tail table: `N_1` is the first grid point and
/// `N_m` is the first grid point after `N_{m-1}` from which the sup-tail at
/// level `1/m` stays `<= 1/m` through the horizon.
///
/// The tail at level `1/m` is bounded conservatively by the table column
/// with the largest `eps <= 1/m`. The construction stops when the grid or
/// the threshold columns are exhausted; it fails with "not infinitesimal"
/// only when the failing level shows a flat, non-decaying tail at the end
/// of the horizon (a genuine condition-(A) violation, not data shortage).
pub fn delta_schedule(table: &TailTable) -> Result<DeltaSchedule, CltError> {
    let k = table.checkpoints.len();
    assert!(k > 0);
    let mid_idx = k / 2;

    // Conservative column for a level: largest eps <= level (eps sorted
    // descending).
    let column_for = |level: f64| -> Option<usize> {
        table.eps.iter().position(|&e| e <= level)
    };

    let mut breakpoints: Vec<(usize, usize)> = vec![(1, table.checkpoints[0])];
    let mut prev_pos = 0usize; // grid index of N_{m-1}
    for m in 2..=k + 1 {
        let level = 1.0 / m as f64;
        let Some(col) = column_for(level) else {
            break;
        };
        // First grid position after prev_pos whose tail stays <= level
        // through the end of the table.
        let mut found = None;
        'search: for start in prev_pos + 1..k {
            for pos in start..k {
                if table.values[pos][col] > level {
                    continue 'search;
                }
            }
            found = Some(start);
            break;
        }
        match found {
            Some(pos) => {
                breakpoints.push((m, table.checkpoints[pos]));
                prev_pos = pos;
            }
            None => {
                if prev_pos + 1 >= k {
                    // Grid exhausted; the schedule simply stops deepening.
                    break;
                }
                let tail_end = table.values[k - 1][col];
                let tail_mid = table.values[mid_idx][col];
                if tail_end > level && tail_end >= tail_mid * (1.0 - 1e-9) {
                    // Flat tail above the level at the horizon.
                    return Err(CltError::NotInfinitesimal);
                }
                break;
            }
        }
    }

    let mut delta = vec![1.0; k];
    for &(m, n_m) in &breakpoints {
        for (idx, &cp) in table.checkpoints.iter().enumerate() {
            if cp >= n_m {
                delta[idx] = 1.0 / m as f64;
            }
        }
    }
    Ok(DeltaSchedule {
        checkpoints: table.checkpoints.clone(),
        delta,
        breakpoints,
    })
}

/// Worst margins of the block-sum bound
/// `P(||A_n sum_{k in Q} X_k|| >= sqrt(delta_n)) <= sqrt(delta_n)`
/// over randomly placed contiguous windows `Q` with `|Q| <= delta_n^{-1/2}`.
#[derive(Debug, Clone)]
pub struct BlockSumReport {
    /// `(n, worst probability margin)` per checkpoint; the margin is
    /// `P_hat - (sqrt(delta_n) + 3/sqrt(R))`, nonpositive when the bound
    /// holds.
    pub per_checkpoint: Vec<(usize, f64)>,
    pub worst_margin: f64,
}

impl BlockSumReport {
    pub fn holds(&self) -> bool {
        self.worst_margin <= 0.0
    }
}

/// Streaming accumulator for the block-sum exceedance counts: the windows
/// are placed deterministically from the seed at construction, replica
/// chunks are absorbed, and the margins are assembled at the end.
#[derive(Debug, Clone)]
pub struct BlockSumAccumulator {
    checkpoints: Vec<usize>,
    a: Vec<crate::linalg::Mat>,
    delta: Vec<f64>,
    /// Per checkpoint: `(start, width)` windows.
    windows: Vec<Vec<(usize, usize)>>,
    exceed: Vec<Vec<u32>>,
    replicas: usize,
}

impl BlockSumAccumulator {
    pub fn new(
        track: &NormalizerTrack,
        schedule: &DeltaSchedule,
        windows_per_checkpoint: usize,
        seed: u64,
    ) -> Self {
        assert_eq!(
            schedule.checkpoints,
            track.checkpoints().to_vec(),
            "schedule and track must share checkpoints"
        );
        let mut windows = Vec::with_capacity(track.len());
        for (idx, &n) in track.checkpoints().iter().enumerate() {
            let delta = schedule.delta[idx];
            let q_n = floor(1.0 / sqrt(delta)).max(1.0) as usize;
            let width = q_n.min(n);
            let mut rng = Rng::stream(seed, n as u64);
            let here: Vec<(usize, usize)> = (0..windows_per_checkpoint.max(1))
                .map(|_| {
                    let start = (rng.next_u64() % (n - width + 1) as u64) as usize;
                    (start, width)
                })
                .collect();
            windows.push(here);
        }
        let exceed = windows.iter().map(|w| vec![0u32; w.len()]).collect();
        BlockSumAccumulator {
            checkpoints: track.checkpoints().to_vec(),
            a: track.normalizers().to_vec(),
            delta: schedule.delta.clone(),
            windows,
            exceed,
            replicas: 0,
        }
    }

    pub fn absorb(&mut self, batch: &PathBatch) -> Result<(), CltError> {
        let d = batch.dim();
        for idx in 0..self.checkpoints.len() {
            let n = self.checkpoints[idx];
            if n > batch.length() {
                return Err(CltError::CheckpointOutOfRange {
                    checkpoint: n,
                    length: batch.length(),
                });
            }
            let threshold = sqrt(self.delta[idx]);
            let a = &self.a[idx];
            for (w, &(start, width)) in self.windows[idx].iter().enumerate() {
                let mut exceed = 0u32;
                for r in 0..batch.replicas() {
                    let mut acc = [0.0f64; 16];
                    for t in start..start + width {
                        for (i, x) in batch.at(r, t).iter().enumerate() {
                            acc[i] += x;
                        }
                    }
                    let mut sq = 0.0;
                    for i in 0..d {
                        let mut v = 0.0;
                        for k in 0..d {
                            v += a[(i, k)] * acc[k];
                        }
                        sq += v * v;
                    }
                    if sq >= threshold * threshold {
                        exceed += 1;
                    }
                }
                self.exceed[idx][w] += exceed;
            }
        }
        self.replicas += batch.replicas();
        Ok(())
    }

    pub fn finish(&self) -> BlockSumReport {
        let slack = 3.0 / sqrt(self.replicas.max(1) as f64);
        let mut per_checkpoint = Vec::with_capacity(self.checkpoints.len());
        let mut worst = f64::NEG_INFINITY;
        for (idx, &n) in self.checkpoints.iter().enumerate() {
            let threshold = sqrt(self.delta[idx]);
            let mut margin_here = f64::NEG_INFINITY;
            for &count in &self.exceed[idx] {
                let p_hat = count as f64 / self.replicas.max(1) as f64;
                margin_here = margin_here.max(p_hat - (threshold + slack));
            }
            per_checkpoint.push((n, margin_here));
            worst = worst.max(margin_here);
        }
        BlockSumReport {
            per_checkpoint,
            worst_margin: worst,
        }
    }
}

pub fn block_sum_check(
    batch: &PathBatch,
    track: &NormalizerTrack,
    schedule: &DeltaSchedule,
    windows_per_checkpoint: usize,
    seed: u64,
) -> Result<BlockSumReport, CltError> {
    let mut acc = BlockSumAccumulator::new(track, schedule, windows_per_checkpoint, seed);
    acc.absorb(batch)?;
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clt::{normalizer_track_from_batch, NormalizerTrack};
    use crate::linalg::Mat;
    use crate::mixing::{generate, ProcessSpec};
    use crate::semigroup::GaussianLaw;
    use libm::{exp, fabs};

    fn iid_track(
        d: usize,
        n: usize,
        replicas: usize,
        seed: u64,
        checkpoints: &[usize],
    ) -> (crate::mixing::PathBatch, NormalizerTrack) {
        let batch = generate(
            &ProcessSpec::Iid {
                innovation: GaussianLaw::standard(d),
            },
            n,
            replicas,
            seed,
        )
        .unwrap();
        let track = normalizer_track_from_batch(&batch, checkpoints).unwrap();
        (batch, track)
    }

    #[test]
    fn tails_match_gaussian_oracle_for_iid() {
        // ||A_n X_j|| ~ ||N(0, I_2)|| / sqrt(n): P(>= eps) = exp(-eps^2 n/2).
        let checkpoints = [64, 256];
        let (batch, track) = iid_track(2, 256, 40_000, 37, &checkpoints);
        let eps = [0.1, 0.2];
        let table = infinitesimality_check(&batch, &track, &eps).unwrap();
        for (ci, &n) in checkpoints.iter().enumerate() {
            for (ei, &e) in table.eps.iter().enumerate() {
                let want = exp(-e * e * n as f64 / 2.0);
                let got = table.value(ci, ei);
                // The sup over j inflates the plain tail by MC noise only.
                assert!(
                    got >= want - 0.02 && got <= want + 0.05,
                    "n={n} eps={e}: got {got}, oracle {want}"
                );
            }
        }
    }

    #[test]
    fn tails_decrease_along_checkpoints() {
        let checkpoints = [32, 128, 512];
        let (batch, track) = iid_track(2, 512, 10_000, 41, &checkpoints);
        let table = infinitesimality_check(&batch, &track, &[0.15]).unwrap();
        for w in table.values.windows(2) {
            assert!(w[1][0] <= w[0][0] + 0.02);
        }
    }

    #[test]
    fn non_infinitesimal_track_stays_at_one() {
        // Deterministic-direction data with identity normalizers: the tail
        // at eps < 1 never moves.
        let batch = generate(
            &ProcessSpec::Iid {
                innovation: GaussianLaw::standard(1),
            },
            8,
            200,
            43,
        )
        .unwrap();
        let checkpoints: Vec<usize> = (1..=8).collect();
        let a = alloc::vec![Mat::identity(1); 8];
        let b = alloc::vec![alloc::vec![0.0]; 8];
        let track = NormalizerTrack::from_parts(checkpoints, a, b);
        let table = infinitesimality_check(&batch, &track, &[0.05]).unwrap();
        // Standard normal tail at 0.05 is ~0.96 at every checkpoint.
        for v in &table.values {
            assert!(v[0] > 0.9);
        }
        assert!(matches!(
            delta_schedule(&table),
            Err(CltError::NotInfinitesimal)
        ));
    }

    #[test]
    fn huge_eps_gives_zero_tail() {
        let checkpoints = [16];
        let (batch, track) = iid_track(1, 16, 500, 47, &checkpoints);
        let table = infinitesimality_check(&batch, &track, &[50.0]).unwrap();
        assert_eq!(table.value(0, 0), 0.0);
    }

    #[test]
    fn zero_tail_schedule_descends_one_over_m() {
        // All-zero tails: N_m takes the minimal admissible grid point, so
        // delta walks down 1, 1/2, 1/3, ... along the grid.
        let checkpoints: Vec<usize> = (1..=6).collect();
        let levels: Vec<f64> = (1..=7).map(|m| 1.0 / m as f64).collect();
        let table = TailTable {
            checkpoints: checkpoints.clone(),
            eps: levels,
            values: alloc::vec![alloc::vec![0.0; 7]; 6],
        };
        let schedule = delta_schedule(&table).unwrap();
        for (i, &d) in schedule.delta.iter().enumerate() {
            assert!(
                fabs(d - 1.0 / (i + 1) as f64) < 1e-15,
                "delta[{i}] = {d}"
            );
        }
    }

    #[test]
    fn exp_table_schedule_matches_brute_force() {
        // tail(n, eps) = exp(-n eps): compute the schedule and re-derive
        // every breakpoint by direct enumeration.
        let checkpoints: Vec<usize> = (1..=120).collect();
        let levels: Vec<f64> = (1..=40).map(|m| 1.0 / m as f64).collect();
        let values: Vec<Vec<f64>> = checkpoints
            .iter()
            .map(|&n| levels.iter().map(|&e| exp(-(n as f64) * e)).collect())
            .collect();
        let table = TailTable {
            checkpoints: checkpoints.clone(),
            eps: levels.clone(),
            values: values.clone(),
        };
        let schedule = delta_schedule(&table).unwrap();

        // Brute-force oracle for N_m.
        let mut oracle = alloc::vec![(1usize, 1usize)];
        let mut prev = 0usize;
        'outer: for m in 2..=40usize {
            let level = 1.0 / m as f64;
            let col = levels.iter().position(|&e| e <= level).unwrap();
            for start in prev + 1..checkpoints.len() {
                if (start..checkpoints.len()).all(|p| values[p][col] <= level) {
                    oracle.push((m, checkpoints[start]));
                    prev = start;
                    continue 'outer;
                }
            }
            break;
        }
        assert_eq!(schedule.breakpoints, oracle);
        // Schedule is nonincreasing and reaches a deep level.
        for w in schedule.delta.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert!(*schedule.delta.last().unwrap() < 0.1);
    }

    #[test]
    fn flat_tail_is_rejected() {
        let checkpoints: Vec<usize> = (1..=10).collect();
        let levels: Vec<f64> = (1..=10).map(|m| 1.0 / m as f64).collect();
        let table = TailTable {
            checkpoints,
            eps: levels,
            values: alloc::vec![alloc::vec![0.3; 10]; 10],
        };
        assert!(matches!(
            delta_schedule(&table),
            Err(CltError::NotInfinitesimal)
        ));
    }

    #[test]
    fn schedule_verifies_own_inequality_on_held_out_replicas() {
        let checkpoints = [32, 64, 128, 256];
        let (batch_a, track) = iid_track(2, 256, 10_000, 53, &checkpoints);
        let levels: Vec<f64> = (1..=24).map(|m| 1.0 / m as f64).collect();
        let table = infinitesimality_check(&batch_a, &track, &levels).unwrap();
        let schedule = delta_schedule(&table).unwrap();

        // Fresh replicas, same process; normalizers carried over.
        let batch_b = generate(
            &ProcessSpec::Iid {
                innovation: GaussianLaw::standard(2),
            },
            256,
            10_000,
            54,
        )
        .unwrap();
        let held_out = infinitesimality_check(&batch_b, &track, &levels).unwrap();
        let slack = 2.0 / libm::sqrt(10_000.0);
        for (ci, &delta) in schedule.delta.iter().enumerate() {
            // Tail at level delta, via the conservative column.
            let col = held_out.eps.iter().position(|&e| e <= delta).unwrap();
            assert!(
                held_out.value(ci, col) <= delta + slack,
                "checkpoint {ci}: {} > {delta}",
                held_out.value(ci, col)
            );
        }
    }

    #[test]
    fn block_sums_hold_for_iid_with_schedule() {
        let checkpoints = [64, 256];
        let (batch, track) = iid_track(2, 256, 10_000, 59, &checkpoints);
        let levels: Vec<f64> = (1..=16).map(|m| 1.0 / m as f64).collect();
        let table = infinitesimality_check(&batch, &track, &levels).unwrap();
        let schedule = delta_schedule(&table).unwrap();
        let report = block_sum_check(&batch, &track, &schedule, 8, 61).unwrap();
        assert!(report.holds(), "worst margin {}", report.worst_margin);
    }

    #[test]
    fn block_bound_trivial_at_delta_one() {
        // delta = 1: the bound is P(... >= 1) <= 1 + slack, always true.
        let checkpoints = [8];
        let (batch, track) = iid_track(1, 8, 500, 67, &checkpoints);
        let schedule = DeltaSchedule {
            checkpoints: alloc::vec![8],
            delta: alloc::vec![1.0],
            breakpoints: alloc::vec![(1, 8)],
        };
        let report = block_sum_check(&batch, &track, &schedule, 4, 3).unwrap();
        assert!(report.holds());
    }
}
