//! Volume-integral-equation solver for the per-voxel total-field transfer
//! matrices `A_k(r_n)`.
//!
//! Two paths are provided: an explicitly assembled operator factored by LU
//! (`dense_direct`), and restarted GMRES on a matrix-free operator whose
//! lattice part is applied by FFT convolution (`iterative_fft`). All `N_t`
//! right-hand sides share one operator.

mod gmres;
mod lattice;
mod operator;

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use lattice::{fast_matvec, FftOperator};
pub use operator::{assemble_interaction, self_coefficient, DenseInteraction, InteractionOperator};

use crate::array::ArrayGeometry;
use crate::em::{dyadic_green_unchecked, incident_matrix, Complex3Vector, Position, Wavenumber};
use crate::scene::{ScattererSnapshot, MAX_PITCH_PER_WAVELENGTH};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    DenseDirect,
    IterativeFft,
}

/// Regularization of the singular self-cell integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfTerm {
    /// Principal-value exclusion of a cubic cell, `C_self = -1/3`.
    StaticOnly,
    /// Adds the leading radiative reaction `-j k0³ ΔV / (6π)`.
    StaticPlusRadiative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Target relative residual `‖b - L a‖ / ‖b‖` per column.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub mode: SolverMode,
    pub self_term: SelfTerm,
    /// GMRES restart length.
    pub restart: usize,
    /// Reject snapshots whose voxel side exceeds `λ/8` at the solve frequency.
    pub enforce_pitch_bound: bool,
    /// Mutation hook for the validation suite, see [`SolverConfig::with_self_term_fault`].
    #[doc(hidden)]
    #[serde(skip)]
    pub fault_flip_self_term: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 500,
            mode: SolverMode::IterativeFft,
            self_term: SelfTerm::StaticPlusRadiative,
            restart: 60,
            enforce_pitch_bound: true,
            fault_flip_self_term: false,
        }
    }
}

impl SolverConfig {
    pub fn dense() -> Self {
        Self { mode: SolverMode::DenseDirect, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-2) {
            return Err(Error::InvalidConfig(format!("solver tolerance must lie in (0, 1e-2], got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("solver max_iterations must be at least 1".into()));
        }
        if self.restart == 0 {
            return Err(Error::InvalidConfig("solver restart must be at least 1".into()));
        }
        Ok(())
    }

    /// Flips the sign of the self-term coefficient. Mutation hook for the
    /// validation suite; never set this for real solves.
    #[doc(hidden)]
    pub fn with_self_term_fault(mut self) -> Self {
        self.fault_flip_self_term = true;
        self
    }

    fn c_self(&self, k0: f64, delta_v: f64) -> C64 {
        let c = self_coefficient(self.self_term, k0, delta_v);
        if self.fault_flip_self_term {
            -c
        } else {
            c
        }
    }
}

/// Total-field transfer matrices of one snapshot at one subcarrier.
#[derive(Debug, Clone)]
pub struct TransferMatrices {
    /// `3 N_s × N_t`, voxel-major rows.
    data: DMatrix<C64>,
    pub frequency_hz: f64,
    /// Fingerprint of the snapshot this was solved on.
    pub fingerprint: u64,
    /// Worst true relative residual over the columns.
    pub residual: f64,
    /// Total GMRES iterations over all columns (0 for direct solves).
    pub iterations: usize,
    pub mode: SolverMode,
    pub wall_time: Duration,
}

impl TransferMatrices {
    pub fn n_voxels(&self) -> usize {
        self.data.nrows() / 3
    }

    pub fn n_tx(&self) -> usize {
        self.data.ncols()
    }

    /// `A_k(r_n)`, a 3 × N_t matrix.
    pub fn voxel(&self, n: usize) -> DMatrix<C64> {
        self.data.rows(3 * n, 3).into_owned()
    }

    pub fn stacked(&self) -> &DMatrix<C64> {
        &self.data
    }
}

/// Incident fields of every transmit element at every voxel, stacked like
/// the unknowns: `3 N_s × N_t`.
pub fn incident_stack(snapshot: &ScattererSnapshot, array: &ArrayGeometry, k: &Wavenumber) -> Result<DMatrix<C64>> {
    let n = snapshot.n_voxels();
    let mut b = DMatrix::zeros(3 * n, array.n_tx());
    for (i, r) in snapshot.centers.iter().enumerate() {
        let a = incident_matrix(r, array, k)?;
        b.rows_mut(3 * i, 3).copy_from(&a);
    }
    Ok(b)
}

fn check_geometry(snapshot: &ScattererSnapshot, array: &ArrayGeometry, k: &Wavenumber, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    snapshot.validate()?;
    snapshot.check_distinct()?;
    let bound = k.wavelength() * MAX_PITCH_PER_WAVELENGTH;
    if cfg.enforce_pitch_bound && snapshot.voxel_side() > bound * (1.0 + 1e-9) {
        return Err(Error::Geometry(format!(
            "voxel side {:.4e} m exceeds λ/8 = {:.4e} m at {:.6e} Hz",
            snapshot.voxel_side(),
            bound,
            k.f
        )));
    }
    if let Some(e) = array.elements().position(|e| snapshot.contains(e)) {
        return Err(Error::Geometry(format!("array element {e} lies inside the scatterer guard volume")));
    }
    Ok(())
}

fn true_residual(op: &dyn InteractionOperator, b: &DMatrix<C64>, a: &DMatrix<C64>) -> f64 {
    let mut worst: f64 = 0.0;
    let mut y = vec![C64::default(); op.dim()];
    for t in 0..b.ncols() {
        let bt = b.column(t);
        let bn = bt.norm();
        if bn == 0.0 {
            continue;
        }
        op.apply(a.column(t).as_slice(), &mut y);
        let r: f64 = y.iter().zip(bt.iter()).map(|(u, v)| (v - u).norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(r / bn);
    }
    worst
}

/// Solves `L a_t = b_t` for every transmit column `t`.
pub fn solve_transfer(snapshot: &ScattererSnapshot, array: &ArrayGeometry, k: &Wavenumber, cfg: &SolverConfig) -> Result<TransferMatrices> {
    check_geometry(snapshot, array, k, cfg)?;
    let start = Instant::now();
    let chi = snapshot.contrasts(k);
    let c_self = cfg.c_self(k.k0, snapshot.delta_v);
    let b = incident_stack(snapshot, array, k)?;
    let n_tx = array.n_tx();

    let mode = match (cfg.mode, &snapshot.lattice) {
        (SolverMode::IterativeFft, None) => {
            tracing::debug!("snapshot has no lattice; falling back to dense_direct");
            SolverMode::DenseDirect
        }
        (m, _) => m,
    };

    let (data, iterations, residual) = match mode {
        SolverMode::DenseDirect => {
            let op = operator::assemble_with(snapshot, k, &chi, c_self);
            let lu = op.matrix().clone().lu();
            let a = lu.solve(&b).ok_or(Error::Singular)?;
            if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::Singular);
            }
            let residual = true_residual(&op, &b, &a);
            (a, 0, residual)
        }
        SolverMode::IterativeFft => {
            let op = FftOperator::build(snapshot, k, chi, c_self);
            let inv_diag: Vec<C64> = op.voxel_diagonal().iter().flat_map(|d| [d.inv(); 3]).collect();
            if inv_diag.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::Singular);
            }
            let columns: Vec<Vec<C64>> = (0..n_tx).map(|t| b.column(t).iter().copied().collect()).collect();
            let outcomes = par::map_slice(&columns, |bt| gmres::gmres(&op, bt, &inv_diag, cfg.tolerance, cfg.max_iterations, cfg.restart));
            let iterations = outcomes.iter().map(|o| o.iterations).sum();
            if let Some(bad) = outcomes.iter().find(|o| !o.converged) {
                return Err(Error::NotConverged { iterations: bad.iterations, residual: bad.residual });
            }
            let mut a = DMatrix::zeros(b.nrows(), n_tx);
            for (t, o) in outcomes.iter().enumerate() {
                a.set_column(t, &DVector::from_column_slice(&o.x));
            }
            let residual = true_residual(&op, &b, &a);
            (a, iterations, residual)
        }
    };

    let wall_time = start.elapsed();
    tracing::debug!(
        n_voxels = snapshot.n_voxels(),
        frequency_hz = k.f,
        ?mode,
        iterations,
        residual,
        wall_ms = wall_time.as_secs_f64() * 1e3,
        "vie solve"
    );
    Ok(TransferMatrices {
        data,
        frequency_hz: k.f,
        fingerprint: snapshot.fingerprint(),
        residual,
        iterations,
        mode,
        wall_time,
    })
}

pub(crate) fn check_pairing(snapshot: &ScattererSnapshot, transfer: &TransferMatrices, k: &Wavenumber) -> Result<()> {
    if transfer.fingerprint != snapshot.fingerprint() || transfer.n_voxels() != snapshot.n_voxels() {
        return Err(Error::Mismatch("transfer matrices were solved on a different snapshot".into()));
    }
    if transfer.frequency_hz != k.f {
        return Err(Error::Mismatch(format!(
            "transfer matrices solved at {} Hz, requested {} Hz",
            transfer.frequency_hz, k.f
        )));
    }
    Ok(())
}

/// Field radiated by the polarization currents for excitation `x`:
/// `k0² ΔV Σ_n G(r_obs, r_n) χ_n A(r_n) x`.
pub fn scattered_field(
    snapshot: &ScattererSnapshot,
    transfer: &TransferMatrices,
    x: &[C64],
    r_obs: &Position,
    k: &Wavenumber,
) -> Result<Complex3Vector> {
    check_pairing(snapshot, transfer, k)?;
    if x.len() != transfer.n_tx() {
        return Err(Error::Mismatch(format!("excitation has {} entries, array has {} transmitters", x.len(), transfer.n_tx())));
    }
    if snapshot.contains(r_obs) {
        return Err(Error::Domain("observation point lies inside the scatterer".into()));
    }
    let e = transfer.stacked() * DVector::from_column_slice(x);
    let chi = snapshot.contrasts(k);
    let mut out = Complex3Vector::zeros();
    for (n, c) in snapshot.centers.iter().enumerate() {
        if chi[n] == C64::default() {
            continue;
        }
        let g = dyadic_green_unchecked(&(r_obs - c), k.k0);
        let en = Vector3::new(e[3 * n], e[3 * n + 1], e[3 * n + 2]);
        out += g * en * chi[n];
    }
    Ok(out * C64::from(k.k0 * k.k0 * snapshot.delta_v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Material, PartTag};

    fn setup(mat: Material, n: usize, pitch: f64) -> (ScattererSnapshot, ArrayGeometry, Wavenumber) {
        let f = 4.9e9;
        let s = ScattererSnapshot::cube(Position::new(2.0, 0.1, -0.05), n, pitch, mat).unwrap();
        (s, ArrayGeometry::cross(3, 2, f).unwrap(), Wavenumber::from_frequency(f).unwrap())
    }

    fn frob_rel(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn zero_contrast_returns_incident_exactly() {
        let vac = Material::new(1.0, 0.0, PartTag::Body).unwrap();
        let (s, array, k) = setup(vac, 3, 0.006);
        let inc = incident_stack(&s, &array, &k).unwrap();
        for cfg in [SolverConfig::dense(), SolverConfig::default()] {
            let t = solve_transfer(&s, &array, &k, &cfg).unwrap();
            assert_eq!(t.stacked(), &inc);
            assert_eq!(t.residual, 0.0);
        }
    }

    #[test]
    fn single_voxel_closed_form() {
        let mat = Material::new(4.0, 0.0, PartTag::Body).unwrap();
        let (s, array, k) = setup(mat, 1, 0.005);
        let cfg = SolverConfig { self_term: SelfTerm::StaticOnly, ..SolverConfig::dense() };
        let t = solve_transfer(&s, &array, &k, &cfg).unwrap();
        let inc = incident_stack(&s, &array, &k).unwrap();
        // E = E_inc / (1 + χ/3) with χ = 3.
        assert!(frob_rel(t.stacked(), &(inc / C64::from(2.0))) < 1e-14);
    }

    #[test]
    fn dense_and_iterative_agree() {
        let mat = Material::new(3.0, 0.3, PartTag::Body).unwrap();
        let (s, array, k) = setup(mat, 4, 0.006);
        let dense = solve_transfer(&s, &array, &k, &SolverConfig::dense()).unwrap();
        let cfg = SolverConfig { tolerance: 1e-9, ..SolverConfig::default() };
        let fast = solve_transfer(&s, &array, &k, &cfg).unwrap();
        assert!(fast.residual <= 1e-9);
        assert!(fast.iterations > 0);
        assert!(frob_rel(fast.stacked(), dense.stacked()) < 1e-7);
    }

    #[test]
    fn reported_residual_is_true_residual() {
        let mat = Material::new(2.0, 0.1, PartTag::Body).unwrap();
        let (s, array, k) = setup(mat, 3, 0.006);
        let cfg = SolverConfig { tolerance: 1e-4, ..SolverConfig::default() };
        let t = solve_transfer(&s, &array, &k, &cfg).unwrap();
        let op = assemble_interaction(&s, &k, cfg.self_term).unwrap();
        let b = incident_stack(&s, &array, &k).unwrap();
        let r = op.matrix() * t.stacked() - &b;
        let worst = (0..b.ncols()).map(|c| r.column(c).norm() / b.column(c).norm()).fold(0.0, f64::max);
        assert!(t.residual <= cfg.tolerance);
        assert!(worst <= 2.0 * t.residual && t.residual <= 2.0 * worst, "{worst} vs {}", t.residual);
    }

    #[test]
    fn iteration_budget_error_reports_residual() {
        let mat = Material::new(6.0, 0.5, PartTag::Body).unwrap();
        let (s, array, k) = setup(mat, 4, 0.006);
        let cfg = SolverConfig { tolerance: 1e-10, max_iterations: 2, ..SolverConfig::default() };
        match solve_transfer(&s, &array, &k, &cfg) {
            Err(Error::NotConverged { iterations, residual }) => {
                assert!(iterations <= 2);
                assert!(residual > 1e-10);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn pitch_bound_and_guard_enforced() {
        let mat = Material::new(2.0, 0.0, PartTag::Body).unwrap();
        let (s, array, k) = setup(mat, 2, 0.01);
        assert!(matches!(solve_transfer(&s, &array, &k, &SolverConfig::dense()), Err(Error::Geometry(_))));
        let relaxed = SolverConfig { enforce_pitch_bound: false, ..SolverConfig::dense() };
        solve_transfer(&s, &array, &k, &relaxed).unwrap();

        let at_element = ScattererSnapshot::cube(array.tx_positions()[0], 1, 0.005, mat).unwrap();
        assert!(matches!(solve_transfer(&at_element, &array, &k, &SolverConfig::dense()), Err(Error::Geometry(_))));
    }

    #[test]
    fn scattered_field_is_linear_and_nulls_for_vacuum() {
        let mat = Material::new(2.5, 0.05, PartTag::Body).unwrap();
        let (s, array, k) = setup(mat, 2, 0.006);
        let t = solve_transfer(&s, &array, &k, &SolverConfig::dense()).unwrap();
        let obs = Position::new(0.0, 0.3, 0.2);
        let x1 = [C64::new(1.0, 0.5), C64::new(-0.2, 0.0), C64::new(0.0, 1.0)];
        let x2 = [C64::new(0.3, -0.1), C64::new(0.7, 0.2), C64::new(-1.0, 0.4)];
        let a = C64::new(0.4, -1.3);
        let sum: Vec<C64> = x1.iter().zip(&x2).map(|(u, v)| u * a + v).collect();
        let lhs = scattered_field(&s, &t, &sum, &obs, &k).unwrap();
        let rhs = scattered_field(&s, &t, &x1, &obs, &k).unwrap() * a + scattered_field(&s, &t, &x2, &obs, &k).unwrap();
        assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm());

        assert!(scattered_field(&s, &t, &x1, &s.centers[0], &k).is_err());

        let vac = Material::new(1.0, 0.0, PartTag::Body).unwrap();
        let (sv, _, _) = setup(vac, 2, 0.006);
        let tv = solve_transfer(&sv, &array, &k, &SolverConfig::dense()).unwrap();
        assert_eq!(scattered_field(&sv, &tv, &x1, &obs, &k).unwrap(), Complex3Vector::zeros());
        // Pairing with another snapshot is rejected.
        assert!(matches!(scattered_field(&sv, &t, &x1, &obs, &k), Err(Error::Mismatch(_))));
    }

    #[test]
    fn fault_hook_changes_self_term() {
        let mat = Material::new(3.0, 0.0, PartTag::Body).unwrap();
        let (s, array, k) = setup(mat, 1, 0.005);
        let good = SolverConfig { self_term: SelfTerm::StaticOnly, ..SolverConfig::dense() };
        let bad = good.clone().with_self_term_fault();
        let a = solve_transfer(&s, &array, &k, &good).unwrap();
        let b = solve_transfer(&s, &array, &k, &bad).unwrap();
        assert!(frob_rel(b.stacked(), a.stacked()) > 0.5);
    }
}
