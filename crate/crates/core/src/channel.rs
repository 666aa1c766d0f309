//! Channel matrices from VIE solutions, noise, and dwell tensors.
//!
//! `H_k = k0² ΔV Σ_n B_k(r_n) χ_n A_k(r_n)` with `B_k(r_n)` the receive
//! projection of the dyadic Green's function. The classifier consumes `H`
//! with entry-wise complex Gaussian noise whose level is calibrated on a
//! fixed reference scatterer.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Matrix3};
use ndarray::Array4;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::array::ArrayGeometry;
use crate::em::{dyadic_green_unchecked, Position, Wavenumber};
use crate::scene::{animate, Material, PartTag, ScattererSnapshot, ScenarioConfig, TargetModel, MAX_PITCH_PER_WAVELENGTH};
use crate::solver::{check_pairing, solve_transfer, SolverConfig, SolverMode, TransferMatrices};
use crate::{par, Error, Result};

/// Equally spaced OFDM subcarriers centred on the carrier:
/// `f_k = f_c + (k - (K - 1)/2) Δf`, `k = 0..K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubcarrierGrid {
    pub carrier_hz: f64,
    pub spacing_hz: f64,
    pub count: usize,
}

impl Default for SubcarrierGrid {
    /// Desk-scale numerology: 120 MHz carrier, 120 kHz spacing, 64 subcarriers.
    fn default() -> Self {
        Self { carrier_hz: 1.2e8, spacing_hz: 1.2e5, count: 64 }
    }
}

impl SubcarrierGrid {
    pub fn new(carrier_hz: f64, spacing_hz: f64, count: usize) -> Result<Self> {
        let g = Self { carrier_hz, spacing_hz, count };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidConfig("subcarrier grid needs at least one subcarrier".into()));
        }
        if !(self.spacing_hz > 0.0) || !(self.frequency(0) > 0.0) {
            return Err(Error::InvalidConfig(format!("subcarrier grid has non-positive frequencies: {self:?}")));
        }
        Ok(())
    }

    pub fn frequency(&self, k: usize) -> f64 {
        self.carrier_hz + (k as f64 - (self.count as f64 - 1.0) / 2.0) * self.spacing_hz
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.frequency(k)).collect()
    }

    pub fn min_wavelength(&self) -> f64 {
        crate::em::SPEED_OF_LIGHT / self.frequency(self.count - 1)
    }
}

/// Per-subcarrier excitation vectors `x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbingScheme {
    pub vectors: Vec<DVector<C64>>,
}

impl ProbingScheme {
    /// Orthogonal probing: subcarrier `k` excites transmitter `k mod N_t`.
    pub fn identity_sweep(n_tx: usize, n_subcarriers: usize) -> Self {
        let vectors = (0..n_subcarriers)
            .map(|k| {
                let mut x = DVector::zeros(n_tx);
                x[k % n_tx] = C64::from(1.0);
                x
            })
            .collect();
        Self { vectors }
    }

    pub fn validate(&self, n_tx: usize) -> Result<()> {
        for (k, x) in self.vectors.iter().enumerate() {
            if x.len() != n_tx {
                return Err(Error::Mismatch(format!("probing vector {k} has {} entries, array has {n_tx}", x.len())));
            }
            if x.iter().all(|v| *v == C64::default()) {
                return Err(Error::InvalidConfig(format!("probing vector {k} is zero")));
            }
        }
        Ok(())
    }
}

/// Per-voxel receive projections `B_k(r_n)` (N_r × 3 each); row `r` is
/// `q_rᴴ G(r_r, r_n)`.
pub fn receive_matrix(snapshot: &ScattererSnapshot, array: &ArrayGeometry, k: &Wavenumber) -> Result<Vec<DMatrix<C64>>> {
    snapshot
        .centers
        .iter()
        .enumerate()
        .map(|(n, c)| {
            let mut b = DMatrix::zeros(array.n_rx(), 3);
            for (r, (pos, q)) in array.rx_positions().iter().zip(array.rx_polarizations()).enumerate() {
                let d = pos - c;
                if d.norm() == 0.0 {
                    return Err(Error::Domain(format!("voxel {n} coincides with receive element {r}")));
                }
                let g: Matrix3<C64> = dyadic_green_unchecked(&d, k.k0);
                let row = q.map(C64::from).transpose() * g;
                b.row_mut(r).copy_from(&row);
            }
            Ok(b)
        })
        .collect()
}

/// `H_k = k0² ΔV Σ_n B_k(r_n) χ_n A_k(r_n)`, an N_r × N_t matrix.
pub fn assemble_channel(snapshot: &ScattererSnapshot, transfer: &TransferMatrices, array: &ArrayGeometry, k: &Wavenumber) -> Result<DMatrix<C64>> {
    check_pairing(snapshot, transfer, k)?;
    if transfer.n_tx() != array.n_tx() {
        return Err(Error::Mismatch(format!("transfer has {} columns, array has {} transmitters", transfer.n_tx(), array.n_tx())));
    }
    let chi = snapshot.contrasts(k);
    let b = receive_matrix(snapshot, array, k)?;
    let a = transfer.stacked();
    let mut h = DMatrix::zeros(array.n_rx(), array.n_tx());
    for (n, bn) in b.iter().enumerate() {
        if chi[n] == C64::default() {
            continue;
        }
        h += bn * a.rows(3 * n, 3) * chi[n];
    }
    Ok(h * C64::from(k.k0 * k.k0 * snapshot.delta_v))
}

fn cn_sample(rng: &mut ChaCha8Rng, sigma: f64) -> C64 {
    let s = sigma / std::f64::consts::SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

/// Received echo `y = H x + z`, `z ~ CN(0, σ² I)`, seeded by `seed`.
pub fn receive(h: &DMatrix<C64>, x: &DVector<C64>, sigma: f64, seed: u64) -> Result<DVector<C64>> {
    if h.ncols() != x.len() {
        return Err(Error::Mismatch(format!("channel has {} columns, excitation has {} entries", h.ncols(), x.len())));
    }
    let mut y = h * x;
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in y.iter_mut() {
            *v += cn_sample(&mut rng, sigma);
        }
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub target_snr_db: f64,
    pub reference_range_m: f64,
    /// Mixed into every sample's noise seed, so noise can be redrawn
    /// without changing the scenarios.
    pub rng_seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { target_snr_db: 20.0, reference_range_m: 50.0, rng_seed: 0 }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reference_range_m > 0.0) || !self.target_snr_db.is_finite() {
            return Err(Error::InvalidConfig(format!("invalid noise configuration: {self:?}")));
        }
        Ok(())
    }
}

/// Noise variance for a signal power and SNR in dB: `σ² = P / 10^(SNR/10)`.
pub fn sigma_from_power(power: f64, snr_db: f64) -> Result<f64> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::Domain(format!("calibration channel power must be positive, got {power}")));
    }
    Ok((power / 10f64.powf(snr_db / 10.0)).sqrt())
}

/// Outcome of the noise calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedNoise {
    /// Per-entry standard deviation of the complex noise on `H`.
    pub sigma_h: f64,
    /// Mean `|H_rt|²` of the calibration scatterer.
    pub calibration_power: f64,
    pub calibration_voxels: usize,
}

/// Largest cube the calibration is allowed to voxelize.
pub const MAX_CALIBRATION_VOXELS: usize = 20_000;

/// The reference scatterer: a 1 m³ cube with `eps_r = 3` on boresight at the
/// reference range, voxelized at `λ_min/8` or finer.
pub fn calibration_target(noise: &NoiseConfig, grid: &SubcarrierGrid) -> Result<ScattererSnapshot> {
    let per_side = (1.0 / (grid.min_wavelength() * MAX_PITCH_PER_WAVELENGTH)).ceil().max(1.0) as usize;
    if per_side.pow(3) > MAX_CALIBRATION_VOXELS {
        return Err(Error::InvalidConfig(format!(
            "calibration cube needs {} voxels at {:.3e} Hz (limit {MAX_CALIBRATION_VOXELS}); use a lower carrier",
            per_side.pow(3),
            grid.carrier_hz
        )));
    }
    let material = Material::new(3.0, 0.0, PartTag::Body)?;
    ScattererSnapshot::cube(Position::new(noise.reference_range_m, 0.0, 0.0), per_side, 1.0 / per_side as f64, material)
}

/// Solves the calibration scene at the carrier and sets `σ_H` so that the
/// mean entry power over `σ_H²` equals the target SNR.
pub fn calibrate_noise(noise: &NoiseConfig, array: &ArrayGeometry, grid: &SubcarrierGrid, solver: &SolverConfig) -> Result<CalibratedNoise> {
    noise.validate()?;
    grid.validate()?;
    let snapshot = calibration_target(noise, grid)?;
    let k = Wavenumber::from_frequency(grid.carrier_hz)?;
    let transfer = solve_transfer(&snapshot, array, &k, solver)?;
    let h = assemble_channel(&snapshot, &transfer, array, &k)?;
    let power = h.iter().map(|v| v.norm_sqr()).sum::<f64>() / h.len() as f64;
    Ok(CalibratedNoise {
        sigma_h: sigma_from_power(power, noise.target_snr_db)?,
        calibration_power: power,
        calibration_voxels: snapshot.n_voxels(),
    })
}

/// Complex dwell tensor indexed `(r, t, k, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    pub data: Array4<C64>,
    /// Frequency of each stored subcarrier slice.
    pub frequencies_hz: Vec<f64>,
    pub frame_interval_s: f64,
}

impl ChannelTensor {
    /// `(N_r, N_t, K, N_p)`.
    pub fn dims(&self) -> [usize; 4] {
        let s = self.data.shape();
        [s[0], s[1], s[2], s[3]]
    }

    /// The `N_r × N_t` matrix of subcarrier slot `k`, frame `m`.
    pub fn matrix(&self, k: usize, m: usize) -> DMatrix<C64> {
        let [nr, nt, _, _] = self.dims();
        DMatrix::from_fn(nr, nt, |r, t| self.data[[r, t, k, m]])
    }
}

/// Stacks per-cell channel matrices keyed by `(k, m)` into a tensor with
/// `frequencies_hz.len()` subcarrier slots and `frames` frames.
pub fn stack_dwell(
    cells: impl IntoIterator<Item = ((usize, usize), DMatrix<C64>)>,
    frequencies_hz: Vec<f64>,
    frames: usize,
    frame_interval_s: f64,
) -> Result<ChannelTensor> {
    let n_k = frequencies_hz.len();
    let mut grid: HashMap<(usize, usize), DMatrix<C64>> = HashMap::new();
    let mut shape: Option<(usize, usize)> = None;
    for ((k, m), h) in cells {
        if k >= n_k || m >= frames {
            return Err(Error::Mismatch(format!("cell (k={k}, m={m}) outside a {n_k} × {frames} dwell")));
        }
        match shape {
            None => shape = Some(h.shape()),
            Some(s) if s != h.shape() => {
                return Err(Error::Mismatch(format!("cell (k={k}, m={m}) has shape {:?}, expected {s:?}", h.shape())))
            }
            _ => {}
        }
        grid.insert((k, m), h);
    }
    let (nr, nt) = shape.ok_or(Error::MissingCell { k: 0, m: 0 })?;
    let mut data = Array4::zeros((nr, nt, n_k, frames));
    for m in 0..frames {
        for k in 0..n_k {
            let h = grid.get(&(k, m)).ok_or(Error::MissingCell { k, m })?;
            for r in 0..nr {
                for t in 0..nt {
                    data[[r, t, k, m]] = h[(r, t)];
                }
            }
        }
    }
    Ok(ChannelTensor { data, frequencies_hz, frame_interval_s })
}

/// Which subcarriers of a grid to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierSet {
    pub grid: SubcarrierGrid,
    /// Strictly increasing indices into the grid.
    pub indices: Vec<usize>,
}

impl SubcarrierSet {
    pub fn all(grid: SubcarrierGrid) -> Self {
        Self { indices: (0..grid.count).collect(), grid }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.indices.is_empty() {
            return Err(Error::InvalidConfig("no subcarriers selected".into()));
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("subcarrier indices must be strictly increasing".into()));
        }
        if let Some(&last) = self.indices.last() {
            if last >= self.grid.count {
                return Err(Error::InvalidConfig(format!("subcarrier index {last} outside a grid of {}", self.grid.count)));
            }
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.indices.iter().map(|&k| self.grid.frequency(k)).collect()
    }
}

/// Additive noise on `H`: entry-wise `CN(0, σ²)`, counter-seeded per cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelNoise {
    pub sigma: f64,
    pub seed: u64,
}

impl ChannelNoise {
    /// Adds the noise realization of global subcarrier `k`, frame `m`. The
    /// stream depends only on `(seed, k, m)`, so results do not depend on
    /// evaluation order or on which other cells are simulated.
    pub fn apply(&self, h: &mut DMatrix<C64>, k: usize, m: usize) {
        if self.sigma == 0.0 {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((k as u64) << 32) | m as u64);
        // Column-major fill, fixed order.
        for v in h.iter_mut() {
            *v += cn_sample(&mut rng, self.sigma);
        }
    }
}

/// Solver diagnostics of one `(k, m)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDiagnostics {
    pub k: usize,
    pub m: usize,
    pub iterations: usize,
    pub residual: f64,
    pub mode: SolverMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwellMetadata {
    pub scenario: ScenarioConfig,
    pub label: u32,
    pub class_name: String,
    pub subcarrier_indices: Vec<usize>,
    pub frequencies_hz: Vec<f64>,
    pub noise: Option<ChannelNoise>,
    pub n_voxels: usize,
    pub cells: Vec<CellDiagnostics>,
}

/// Simulates one dwell: animate each frame, solve every selected
/// `(subcarrier, frame)` cell, assemble `H`, add noise and stack.
pub fn simulate_dwell(
    model: &TargetModel,
    cfg: &ScenarioConfig,
    array: &ArrayGeometry,
    subcarriers: &SubcarrierSet,
    solver: &SolverConfig,
    noise: Option<ChannelNoise>,
) -> Result<(ChannelTensor, DwellMetadata)> {
    cfg.validate()?;
    subcarriers.validate()?;
    solver.validate()?;
    let snapshots = (0..cfg.frames).map(|m| animate(model, cfg, m)).collect::<Result<Vec<_>>>()?;
    let wavenumbers = subcarriers
        .frequencies()
        .into_iter()
        .map(Wavenumber::from_frequency)
        .collect::<Result<Vec<_>>>()?;

    let n_k = subcarriers.indices.len();
    let cells: Vec<(usize, usize)> = (0..cfg.frames).flat_map(|m| (0..n_k).map(move |s| (s, m))).collect();
    let solved = par::map_slice(&cells, |&(s, m)| -> Result<(DMatrix<C64>, CellDiagnostics)> {
        let k_global = subcarriers.indices[s];
        let wrap = |e: Error| Error::Cell { k: k_global, m, source: Box::new(e) };
        let snap = &snapshots[m];
        let k = &wavenumbers[s];
        let transfer = solve_transfer(snap, array, k, solver).map_err(wrap)?;
        let mut h = assemble_channel(snap, &transfer, array, k).map_err(wrap)?;
        if let Some(n) = noise {
            n.apply(&mut h, k_global, m);
        }
        let diag = CellDiagnostics { k: k_global, m, iterations: transfer.iterations, residual: transfer.residual, mode: transfer.mode };
        Ok((h, diag))
    });

    let mut matrices = Vec::with_capacity(cells.len());
    let mut diagnostics = Vec::with_capacity(cells.len());
    for (&(s, m), out) in cells.iter().zip(solved) {
        let (h, d) = out?;
        matrices.push(((s, m), h));
        diagnostics.push(d);
    }
    let tensor = stack_dwell(matrices, subcarriers.frequencies(), cfg.frames, cfg.frame_interval_s)?;
    let meta = DwellMetadata {
        scenario: *cfg,
        label: model.class.index(),
        class_name: model.class.name().to_string(),
        subcarrier_indices: subcarriers.indices.clone(),
        frequencies_hz: subcarriers.frequencies(),
        noise,
        n_voxels: model.n_voxels(),
        cells: diagnostics,
    };
    Ok((tensor, meta))
}
