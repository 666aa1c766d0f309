//! Dense versus FFT-accelerated solve timings across problem sizes.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::array::ArrayGeometry;
use crate::channel::{assemble_channel, SubcarrierGrid};
use crate::em::{Position, Wavenumber};
use crate::scene::{Material, PartTag, ScattererSnapshot};
use crate::solver::{solve_transfer, SolverConfig, SolverMode};
use crate::validate::relative_distance;
use crate::{Error, Result};

/// Largest relative channel mismatch accepted between the two solvers.
pub const MATCH_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n_s: usize,
    pub dense_s: f64,
    pub fft_s: f64,
    pub fft_iterations: usize,
    pub h_rel_diff: f64,
}

impl BenchRow {
    pub fn matches(&self) -> bool {
        self.h_rel_diff <= MATCH_TOLERANCE
    }
}

/// The first `n` cells (in lattice order) of the smallest cube holding them,
/// pitch 0.25 m, 10 m in front of the array.
pub fn bench_target(n: usize) -> Result<ScattererSnapshot> {
    if n == 0 {
        return Err(Error::InvalidConfig("benchmark size must be at least 1".into()));
    }
    let side = (1..).find(|s: &usize| s.pow(3) >= n).unwrap_or(1);
    let mat = Material::new(3.0, 0.01, PartTag::Body)?;
    ScattererSnapshot::lattice_box(Position::new(10.0, 0.5, 0.0), [side; 3], 0.25, mat, |i, j, l| {
        (i * side + j) * side + l < n
    })
}

/// Times one dense direct and one iterative FFT solve (including channel
/// assembly) per size. `solver` supplies tolerance and self-term.
pub fn run_bench(sizes: &[usize], array: &ArrayGeometry, solver: &SolverConfig) -> Result<Vec<BenchRow>> {
    let k = Wavenumber::from_frequency(SubcarrierGrid::default().carrier_hz)?;
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let snap = bench_target(n)?;
        let time = |mode: SolverMode| -> Result<(f64, usize, nalgebra::DMatrix<crate::Complex64>)> {
            let cfg = SolverConfig { mode, ..solver.clone() };
            let t0 = Instant::now();
            let t = solve_transfer(&snap, array, &k, &cfg)?;
            let h = assemble_channel(&snap, &t, array, &k)?;
            Ok((t0.elapsed().as_secs_f64(), t.iterations, h))
        };
        let (dense_s, _, h_dense) = time(SolverMode::DenseDirect)?;
        let (fft_s, fft_iterations, h_fft) = time(SolverMode::IterativeFft)?;
        let row = BenchRow { n_s: n, dense_s, fft_s, fft_iterations, h_rel_diff: relative_distance(&h_fft, &h_dense) };
        tracing::info!(n_s = n, dense_s, fft_s, fft_iterations, h_rel_diff = row.h_rel_diff, "bench row");
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "n_s,dense_s,fft_s,fft_iterations,h_rel_diff,match")?;
    for r in rows {
        writeln!(w, "{},{:.6},{:.6},{},{:.3e},{}", r.n_s, r.dense_s, r.fft_s, r.fft_iterations, r.h_rel_diff, r.matches())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_have_the_requested_size() {
        for n in [1, 7, 8, 64, 65] {
            assert_eq!(bench_target(n).unwrap().n_voxels(), n);
        }
        assert!(bench_target(0).is_err());
    }

    #[test]
    fn one_row_per_size_and_solvers_agree() {
        let array = ArrayGeometry::cross(4, 4, SubcarrierGrid::default().carrier_hz).unwrap();
        let rows = run_bench(&[8, 27], &array, &SolverConfig::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.matches()), "{rows:?}");
        let mut out = Vec::new();
        write_bench_csv(&rows, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 3);
    }
}
