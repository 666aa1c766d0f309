//! Physics validation suite behind `nearfield validate` and the acceptance
//! tests. Each check reports a measured error against a bound; the report
//! prints as `name,measured,bound,status` lines.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::array::ArrayGeometry;
use crate::channel::{assemble_channel, simulate_dwell, SubcarrierGrid, SubcarrierSet};
use crate::em::{dipole_field, dyadic_green, Complex3Vector, Position, Wavenumber, EPSILON_0, SPEED_OF_LIGHT};
use crate::features::{fft4d_spectrum, signed_bin, FftPadding};
use crate::scene::{Material, PartTag, ScattererSnapshot, ScenarioConfig, TargetClass, TargetModel, TemplateVoxel};
use crate::solver::{assemble_interaction, fast_matvec, incident_stack, solve_transfer, SelfTerm, SolverConfig, SolverMode};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `measured <= bound` (and is not NaN).
    pub fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self { name: name.into(), measured, bound, passed: measured <= bound }
    }

    fn failed(name: impl Into<String>, bound: f64) -> Self {
        Self { name: name.into(), measured: f64::NAN, bound, passed: false }
    }

    pub fn status(&self) -> &'static str {
        if self.passed {
            "pass"
        } else {
            "fail"
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{:.6e},{:.6e},{}", self.name, self.measured, self.bound, self.status())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,measured,bound,status\n");
        for c in &self.checks {
            s.push_str(&c.to_string());
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub seed: u64,
    /// Flip the self-term sign in the solver (mutation test).
    pub inject_self_term_fault: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { seed: 0, inject_self_term_fault: false }
    }
}

/// Runs every check. Checks that error out are reported as failures.
pub fn run_validation(opts: &ValidationOptions) -> ValidationReport {
    let solver = |cfg: SolverConfig| if opts.inject_self_term_fault { cfg.with_self_term_fault() } else { cfg };
    let mut checks = vec![
        or_fail("dipole_green_consistency", 1e-10, dipole_green_consistency(1000, opts.seed)),
        or_fail("green_reciprocity", 1e-12, green_reciprocity(1000, opts.seed)),
        or_fail("zero_contrast", 0.0, zero_contrast(&solver(SolverConfig::dense()))),
    ];
    for eps in [2.0, 3.0, 5.0] {
        let name = format!("clausius_mossotti_eps{eps}");
        checks.push(or_fail(&name, 1e-8, clausius_mossotti(eps, &solver(SolverConfig::dense()))));
    }
    checks.push(or_fail("born_slope_deviation", 0.1, born_slope(&solver(SolverConfig::dense()))));
    checks.push(or_fail("fft_matvec_vs_dense", 1e-10, fft_matvec_vs_dense([5, 5, 8], opts.seed)));
    checks.push(or_fail("iterative_vs_dense", 1e-5, iterative_vs_dense([5, 5, 8], &solver(SolverConfig::default()))));
    match phase_checks(8, &solver(SolverConfig::dense())) {
        Ok(v) => checks.extend(v),
        Err(e) => {
            tracing::error!(error = %e, "phase checks failed to run");
            checks.push(Check::failed("phase_checks", 0.0));
        }
    }
    ValidationReport { checks }
}

fn or_fail(name: &str, bound: f64, res: Result<Check>) -> Check {
    res.unwrap_or_else(|e| {
        tracing::error!(check = name, error = %e, "check failed to run");
        Check::failed(name, bound)
    })
}

fn random_point(rng: &mut ChaCha8Rng, scale: f64) -> Position {
    Position::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

/// Largest relative difference between the dipole field and
/// `(k0²/ε0) G p` over random points, moments and frequencies.
pub fn dipole_green_consistency(n: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let k = Wavenumber::from_k0(rng.random_range(0.1..200.0))?;
        let src = random_point(&mut rng, 2.0);
        let obs = loop {
            let p = random_point(&mut rng, 2.0);
            if (p - src).norm() > 1e-3 {
                break p;
            }
        };
        let p = Complex3Vector::from_fn(|_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let e = dipole_field(&obs, &src, &p, &k)?;
        let g = dyadic_green(&obs, &src, &k)? * p * C64::from(k.k0 * k.k0 / EPSILON_0);
        worst = worst.max((e - g).norm() / g.norm());
    }
    Ok(Check::at_most("dipole_green_consistency", worst, 1e-10))
}

/// Largest `‖G(r, r') - G(r', r)ᵀ‖ / ‖G‖` over random pairs.
pub fn green_reciprocity(n: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let k = Wavenumber::from_k0(rng.random_range(0.1..200.0))?;
        let a = random_point(&mut rng, 5.0);
        let b = loop {
            let p = random_point(&mut rng, 5.0);
            if (p - a).norm() > 1e-3 {
                break p;
            }
        };
        let g = dyadic_green(&a, &b, &k)?;
        let gt = dyadic_green(&b, &a, &k)?.transpose();
        worst = worst.max((g - gt).norm() / g.norm());
    }
    Ok(Check::at_most("green_reciprocity", worst, 1e-12))
}

fn desk_fixture() -> Result<(ArrayGeometry, Wavenumber)> {
    let f = SubcarrierGrid::default().carrier_hz;
    Ok((ArrayGeometry::cross(8, 8, f)?, Wavenumber::from_frequency(f)?))
}

/// With `χ ≡ 0` the total field must equal the incident field and the
/// channel must vanish, bit for bit. Measured is the largest absolute entry
/// of `A - A_inc` and of `H`.
pub fn zero_contrast(solver: &SolverConfig) -> Result<Check> {
    let (array, k) = desk_fixture()?;
    let vacuum = Material::new(1.0, 0.0, PartTag::Body)?;
    let snap = ScattererSnapshot::cube(Position::new(10.0, 0.5, 0.0), 3, 0.25, vacuum)?;
    let mut worst = 0.0f64;
    for mode in [SolverMode::DenseDirect, SolverMode::IterativeFft] {
        let cfg = SolverConfig { mode, ..solver.clone() };
        let t = solve_transfer(&snap, &array, &k, &cfg)?;
        let inc = incident_stack(&snap, &array, &k)?;
        let da = (t.stacked() - &inc).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let h = assemble_channel(&snap, &t, &array, &k)?;
        worst = worst.max(da).max(h.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    Ok(Check::at_most("zero_contrast", worst, 0.0))
}

/// Polarizability recovered from a single-voxel solve with the static
/// self-term, against `3ε0ΔV(ε_r - 1)/(ε_r + 2)`.
pub fn clausius_mossotti(eps_r: f64, solver: &SolverConfig) -> Result<Check> {
    let f = SubcarrierGrid::default().carrier_hz;
    let k = Wavenumber::from_frequency(f)?;
    let side = 0.05 / k.k0;
    let array = ArrayGeometry::cross(2, 1, f)?;
    let mat = Material::new(eps_r, 0.0, PartTag::Body)?;
    let snap = ScattererSnapshot::cube(Position::new(3.0, 0.4, -0.2), 1, side, mat)?;
    let cfg = SolverConfig { mode: SolverMode::DenseDirect, self_term: SelfTerm::StaticOnly, ..solver.clone() };
    let t = solve_transfer(&snap, &array, &k, &cfg)?;
    let inc = incident_stack(&snap, &array, &k)?;
    let ratio = inc.dotc(t.stacked()) / inc.dotc(&inc);
    let dv = snap.delta_v;
    let chi = eps_r - 1.0;
    let alpha = ratio * (EPSILON_0 * dv * chi);
    let expected = 3.0 * EPSILON_0 * dv * (eps_r - 1.0) / (eps_r + 2.0);
    let err = (alpha - expected).norm() / expected;
    Ok(Check::at_most(format!("clausius_mossotti_eps{eps_r}"), err, 1e-8))
}

/// Least-squares slope of `log ‖A - A_inc‖/‖A_inc‖` against `log |χ|` on a
/// 27-voxel cube. Measured is `|slope - 1|`.
pub fn born_slope(solver: &SolverConfig) -> Result<Check> {
    let (array, k) = desk_fixture()?;
    let mut pts = Vec::new();
    for chi in [1e-3, 1e-2, 1e-1] {
        let mat = Material::new(1.0 + chi, 0.0, PartTag::Body)?;
        let snap = ScattererSnapshot::cube(Position::new(10.0, 0.5, 0.0), 3, 0.25, mat)?;
        let t = solve_transfer(&snap, &array, &k, solver)?;
        let inc = incident_stack(&snap, &array, &k)?;
        let rel = (t.stacked() - &inc).norm() / inc.norm();
        pts.push((chi.ln(), rel.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(Check::at_most("born_slope_deviation", (sxy / sxx - 1.0).abs(), 0.1))
}

fn lossy_box(dims: [usize; 3]) -> Result<ScattererSnapshot> {
    let mat = Material::new(3.0, 0.01, PartTag::Body)?;
    ScattererSnapshot::lattice_box(Position::new(10.0, 0.5, 0.0), dims, 0.25, mat, |_, _, _| true)
}

/// FFT operator against the assembled dense matrix on a random field.
pub fn fft_matvec_vs_dense(dims: [usize; 3], seed: u64) -> Result<Check> {
    let (_, k) = desk_fixture()?;
    let snap = lossy_box(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 3 * snap.n_voxels();
    let x: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let dense = assemble_interaction(&snap, &k, SelfTerm::StaticPlusRadiative)?;
    let y_dense = dense.matrix() * nalgebra::DVector::from_column_slice(&x);
    let y_fast = fast_matvec(&snap, &x, &k, SelfTerm::StaticPlusRadiative)?;
    let diff: f64 = y_fast.iter().zip(y_dense.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    Ok(Check::at_most("fft_matvec_vs_dense", diff / y_dense.norm(), 1e-10))
}

/// Iterative FFT solve against the dense direct solve, Frobenius-relative.
pub fn iterative_vs_dense(dims: [usize; 3], solver: &SolverConfig) -> Result<Check> {
    let (array, k) = desk_fixture()?;
    let snap = lossy_box(dims)?;
    let dense = solve_transfer(&snap, &array, &k, &SolverConfig { mode: SolverMode::DenseDirect, ..solver.clone() })?;
    let iter = solve_transfer(&snap, &array, &k, &SolverConfig { mode: SolverMode::IterativeFft, ..solver.clone() })?;
    let err = (iter.stacked() - dense.stacked()).norm() / dense.stacked().norm();
    Ok(Check::at_most("iterative_vs_dense", err, 1e-5))
}

/// Geometry of the single-voxel phase checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointTargetFixture {
    pub range_m: f64,
    pub azimuth_deg: f64,
    pub speed_mps: f64,
    pub frames: usize,
    pub frame_interval_s: f64,
}

impl Default for PointTargetFixture {
    fn default() -> Self {
        Self { range_m: 40.0, azimuth_deg: 30.0, speed_mps: 10.0, frames: 4, frame_interval_s: 0.01 }
    }
}

/// A weak single-voxel target receding radially, simulated across the full
/// subcarrier grid.
pub fn point_target_dwell(
    array_n: usize,
    fixture: &PointTargetFixture,
    solver: &SolverConfig,
) -> Result<(crate::channel::ChannelTensor, ArrayGeometry, ScenarioConfig)> {
    let grid = SubcarrierGrid::default();
    let array = ArrayGeometry::cross(array_n, array_n, grid.carrier_hz)?;
    let voxel = TemplateVoxel {
        position: Position::zeros(),
        lattice: [0, 0, 0],
        material: Material::new(1.01, 0.0, PartTag::Body)?,
        wheel: None,
    };
    let pitch = 0.25;
    let model = TargetModel::from_parts(TargetClass::Car, vec![voxel], vec![], [pitch; 3], pitch)?;
    let cfg = ScenarioConfig::new(
        fixture.range_m,
        fixture.azimuth_deg,
        fixture.speed_mps,
        fixture.azimuth_deg,
        fixture.frames,
        fixture.frame_interval_s,
    );
    let (tensor, _) = simulate_dwell(&model, &cfg, &array, &SubcarrierSet::all(grid), solver, None)?;
    Ok((tensor, array, cfg))
}

/// Subcarrier phase slope, inter-frame Doppler phase and angle peak on a
/// single-voxel target.
pub fn phase_checks(array_n: usize, solver: &SolverConfig) -> Result<Vec<Check>> {
    let fixture = PointTargetFixture::default();
    let (tensor, array, cfg) = point_target_dwell(array_n, &fixture, solver)?;
    let grid = SubcarrierGrid::default();
    let data = &tensor.data;
    let (nr, nt, nk, np) = data.dim();

    // Subcarrier slope on the (0, 0) pair at frame 0, against its exact
    // two-way path length.
    let target = cfg.position_at(0);
    let path = (target - array.tx_positions()[0]).norm() + (target - array.rx_positions()[0]).norm();
    let mut phase = Vec::with_capacity(nk);
    let mut prev = 0.0f64;
    for kk in 0..nk {
        let raw = data[[0, 0, kk, 0]].arg();
        let mut p = raw;
        if kk > 0 {
            p = prev + (raw - prev + PI).rem_euclid(2.0 * PI) - PI;
        }
        phase.push(p);
        prev = p;
    }
    let n = nk as f64;
    let mx = (n - 1.0) / 2.0;
    let my = phase.iter().sum::<f64>() / n;
    let sxy: f64 = phase.iter().enumerate().map(|(i, p)| (i as f64 - mx) * (p - my)).sum();
    let sxx: f64 = (0..nk).map(|i| (i as f64 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let expected_slope = -2.0 * PI * grid.spacing_hz * path / SPEED_OF_LIGHT;
    let slope_err = ((slope - expected_slope) / expected_slope).abs();

    // Doppler: phase of the frame-to-frame product summed over all entries.
    // A receding target rotates the phase negatively.
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..nr {
        for t in 0..nt {
            for kk in 0..nk {
                for m in 0..np - 1 {
                    acc += data[[r, t, kk, m + 1]] * data[[r, t, kk, m]].conj();
                }
            }
        }
    }
    let lambda = SPEED_OF_LIGHT / grid.carrier_hz;
    let expected_doppler = 4.0 * PI * fixture.speed_mps * fixture.frame_interval_s / lambda;
    let doppler_err = ((-acc.arg() - expected_doppler) / expected_doppler).abs();

    // Transmit-axis angle peak against the steering prediction.
    let pad = FftPadding(1);
    let spec = fft4d_spectrum(data, pad)?;
    let n_ang = spec.dim().1;
    let mut profile = vec![0.0f64; n_ang];
    for ((_, t, _, _), v) in spec.indexed_iter() {
        profile[t] += v.norm();
    }
    let peak = profile.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    let predicted = n_ang as f64 * array.spacing() / lambda * fixture.azimuth_deg.to_radians().sin();
    let bin_err = (signed_bin(peak, n_ang) as f64 - predicted).abs();

    Ok(vec![
        Check::at_most("subcarrier_phase_slope", slope_err, 0.02),
        Check::at_most("doppler_phase", doppler_err, 0.05),
        Check::at_most("fft4d_angle_peak_bins", bin_err, 1.0),
    ])
}

/// Relative Frobenius distance between two channel matrices.
pub fn relative_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_checks_pass() {
        assert!(dipole_green_consistency(50, 1).unwrap().passed);
        assert!(green_reciprocity(50, 1).unwrap().passed);
    }

    #[test]
    fn clausius_mossotti_catches_the_self_term_fault() {
        let good = clausius_mossotti(3.0, &SolverConfig::dense()).unwrap();
        assert!(good.passed, "{good}");
        let bad = clausius_mossotti(3.0, &SolverConfig::dense().with_self_term_fault()).unwrap();
        assert!(!bad.passed, "{bad}");
    }

    #[test]
    fn report_lines_are_csv() {
        let r = ValidationReport { checks: vec![Check::at_most("x", 0.5, 1.0), Check::at_most("y", 2.0, 1.0)] };
        assert!(!r.passed());
        let csv = r.to_csv();
        assert_eq!(csv.lines().next(), Some("name,measured,bound,status"));
        assert_eq!(csv.lines().nth(2), Some("y,2.000000e0,1.000000e0,fail"));
        assert_eq!(r.failures().count(), 1);
    }
}
