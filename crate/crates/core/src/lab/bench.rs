//! Direct versus far-field-accelerated kernel summation timings.

use std::f64::consts::PI;
use std::fmt::Write;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::farfield::{accelerated_sum, FarField, DEVIATION_TOLERANCE};
use crate::reduce::SourceSet;

const BENCH_SEED: u64 = 97;
/// Blob parameter of the benchmark sources.
const BENCH_BLOB: f64 = 0.05;
/// Targets lie beyond this multiple of the source reach.
pub const BENCH_FAR_RATIO: f64 = 4.0;

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub sources: usize,
    pub targets: usize,
    pub direct_seconds: f64,
    /// Expansion build plus evaluation.
    pub accelerated_seconds: f64,
    pub speedup: f64,
    /// max |accelerated − direct| / Σ|w||K| over the targets.
    pub max_deviation: f64,
    /// The accelerated path counts only when the deviation meets the bound.
    pub counts: bool,
}

/// M = G = size for each entry: sources in the unit disc with real-times-i
/// weights, targets between one and four qualifying distances
/// ([`BENCH_FAR_RATIO`] times the source reach).
pub fn kernel_bench(sizes: &[usize]) -> Result<Vec<BenchRow>> {
    sizes.iter().map(|&n| bench_one(n, n)).collect()
}

fn bench_one(m: usize, g: usize) -> Result<BenchRow> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(BENCH_SEED ^ m as u64);
    let positions: Vec<Complex64> = (0..m)
        .map(|_| Complex64::from_polar(rng.random::<f64>().sqrt(), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let weights: Vec<Complex64> = (0..m).map(|_| Complex64::new(0.0, rng.random_range(0.1..1.0) / m as f64)).collect();
    let sources = SourceSet::new(&positions, &weights);
    let d2 = BENCH_BLOB * BENCH_BLOB;
    let layout = FarField::with_ratio(&positions, &weights, BENCH_BLOB, BENCH_FAR_RATIO)?;
    let d0 = layout.qualifying_distance();
    let targets: Vec<Complex64> = (0..g)
        .map(|_| layout.centre() + Complex64::from_polar(d0 * rng.random_range(1.0..4.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let start = Instant::now();
    let direct: Vec<Complex64> = targets.par_iter().map(|&z| sources.cauchy_sum(z, d2)).collect();
    let direct_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let far = FarField::with_ratio(&positions, &weights, BENCH_BLOB, BENCH_FAR_RATIO)?;
    let (fast, _) = accelerated_sum(&sources, &far, &targets, BENCH_SEED);
    let accelerated_seconds = start.elapsed().as_secs_f64();
    let max_deviation = targets
        .iter()
        .zip(fast.iter().zip(&direct))
        .map(|(&z, (a, b))| {
            let scale = sources.cauchy_abs_sum(z, d2);
            if scale > 0.0 {
                (a - b).norm() / scale
            } else {
                0.0
            }
        })
        .fold(0.0f64, f64::max);
    Ok(BenchRow {
        sources: m,
        targets: g,
        direct_seconds,
        accelerated_seconds,
        speedup: direct_seconds / accelerated_seconds.max(f64::MIN_POSITIVE),
        max_deviation,
        counts: max_deviation <= DEVIATION_TOLERANCE,
    })
}

pub fn render_bench(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>8} {:>8} {:>12} {:>12} {:>9} {:>12} counts", "M", "G", "direct_s", "accel_s", "speedup", "deviation");
    for r in rows {
        let _ = writeln!(
            out,
            "{:>8} {:>8} {:>12.4e} {:>12.4e} {:>9.2} {:>12.3e} {}",
            r.sources, r.targets, r.direct_seconds, r.accelerated_seconds, r.speedup, r.max_deviation, r.counts
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sizes_give_empty_table() {
        assert!(kernel_bench(&[]).unwrap().is_empty());
        assert_eq!(render_bench(&[]).lines().count(), 1);
    }

    #[test]
    fn small_sizes_are_accurate() {
        for r in kernel_bench(&[1, 64]).unwrap() {
            assert!(r.counts, "{r:?}");
            assert!(r.speedup > 0.0);
        }
    }
}
