//! FFT-accelerated application of the interaction operator.
//!
//! On a regular lattice `G(r_n, r_n')` depends only on the index offset, so
//! the coupling sum is a 3-D discrete convolution. It is evaluated by
//! zero-padded circulant embedding with one kernel transform per
//! (snapshot, subcarrier), reused for every right-hand side. Voxels that
//! have left the lattice (turning wheel cells) couple through explicit
//! 3×3 blocks.

use nalgebra::Matrix3;
use num_complex::Complex64 as C64;

use super::operator::{self_coefficient, voxel_diagonal, InteractionOperator};
use super::SelfTerm;
use crate::em::{dyadic_green_unchecked, Position, Wavenumber};
use crate::fft::Fft3;
use crate::scene::ScattererSnapshot;
use crate::{Error, Result};

// Unique entries of the symmetric kernel: xx, xy, xz, yy, yz, zz.
const SYM: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

struct LatticeConv {
    fft: Fft3,
    /// Voxel index and padded-grid cell for every lattice voxel.
    cells: Vec<(usize, usize)>,
    kernel: [Vec<C64>; 6],
}

impl LatticeConv {
    fn new(snapshot: &ScattererSnapshot, members: &[(usize, [i32; 3])], k0: f64, scale: f64) -> Self {
        let lattice = snapshot.lattice.as_ref().expect("lattice members imply a lattice");
        let mut lo = [i32::MAX; 3];
        let mut hi = [i32::MIN; 3];
        for (_, idx) in members {
            for d in 0..3 {
                lo[d] = lo[d].min(idx[d]);
                hi[d] = hi[d].max(idx[d]);
            }
        }
        let extent: [usize; 3] = std::array::from_fn(|d| (hi[d] - lo[d] + 1) as usize);
        let padded: [usize; 3] = std::array::from_fn(|d| if extent[d] == 1 { 1 } else { 2 * extent[d] });
        let fft = Fft3::new(padded);
        let flat = |i: usize, j: usize, l: usize| (i * padded[1] + j) * padded[2] + l;

        let cells = members
            .iter()
            .map(|(n, idx)| {
                let c: [usize; 3] = std::array::from_fn(|d| (idx[d] - lo[d]) as usize);
                (*n, flat(c[0], c[1], c[2]))
            })
            .collect();

        let total = fft.len();
        let mut kernel: [Vec<C64>; 6] = std::array::from_fn(|_| vec![C64::default(); total]);
        let span = |d: usize| -(extent[d] as i64 - 1)..=(extent[d] as i64 - 1);
        let wrap = |o: i64, p: usize| o.rem_euclid(p as i64) as usize;
        for a in span(0) {
            for b in span(1) {
                for c in span(2) {
                    if a == 0 && b == 0 && c == 0 {
                        continue;
                    }
                    let local = Position::new(a as f64, b as f64, c as f64) * lattice.pitch;
                    let g = dyadic_green_unchecked(&(lattice.axes * local), k0);
                    let at = flat(wrap(a, padded[0]), wrap(b, padded[1]), wrap(c, padded[2]));
                    for i in 0..3 {
                        for j in i..3 {
                            kernel[SYM[i][j]][at] = g[(i, j)] * scale;
                        }
                    }
                }
            }
        }
        for kc in kernel.iter_mut() {
            fft.forward(kc);
        }
        Self { fft, cells, kernel }
    }

    /// `y_n -= Σ_{n' on lattice} K(n, n') w_n'` for lattice voxels, where `w = χ x`.
    fn subtract_coupling(&self, w: &[C64], y: &mut [C64]) {
        let total = self.fft.len();
        let mut buf: [Vec<C64>; 3] = std::array::from_fn(|_| vec![C64::default(); total]);
        for &(n, cell) in &self.cells {
            for c in 0..3 {
                buf[c][cell] = w[3 * n + c];
            }
        }
        for b in buf.iter_mut() {
            self.fft.forward(b);
        }
        for f in 0..total {
            let v = [buf[0][f], buf[1][f], buf[2][f]];
            for i in 0..3 {
                buf[i][f] = self.kernel[SYM[i][0]][f] * v[0]
                    + self.kernel[SYM[i][1]][f] * v[1]
                    + self.kernel[SYM[i][2]][f] * v[2];
            }
        }
        let inv = 1.0 / total as f64;
        for b in buf.iter_mut() {
            self.fft.inverse(b);
        }
        for &(n, cell) in &self.cells {
            for c in 0..3 {
                y[3 * n + c] -= buf[c][cell] * inv;
            }
        }
    }
}

/// Matrix-free operator: FFT convolution for lattice voxels plus explicit
/// blocks for off-lattice voxels. With no lattice at all it degenerates to
/// an `O(N²)` direct sum.
pub struct FftOperator {
    n: usize,
    chi: Vec<C64>,
    diag: Vec<C64>,
    conv: Option<LatticeConv>,
    /// Off-lattice voxel indices and, for each, `k0²ΔV G(r_f, r_n)` over all `n`.
    free: Vec<usize>,
    free_rows: Vec<Vec<Matrix3<C64>>>,
}

impl FftOperator {
    pub fn new(snapshot: &ScattererSnapshot, k: &Wavenumber, self_term: SelfTerm) -> Result<Self> {
        snapshot.validate()?;
        snapshot.check_distinct()?;
        let chi = snapshot.contrasts(k);
        Ok(Self::build(snapshot, k, chi, self_coefficient(self_term, k.k0, snapshot.delta_v)))
    }

    /// Requires every voxel to sit on the lattice.
    pub fn lattice_only(snapshot: &ScattererSnapshot, k: &Wavenumber, self_term: SelfTerm) -> Result<Self> {
        match &snapshot.lattice {
            None => return Err(Error::OffLattice { index: 0 }),
            Some(l) => {
                if let Some(index) = l.indices.iter().position(Option::is_none) {
                    return Err(Error::OffLattice { index });
                }
            }
        }
        Self::new(snapshot, k, self_term)
    }

    pub(crate) fn build(snapshot: &ScattererSnapshot, k: &Wavenumber, chi: Vec<C64>, c_self: C64) -> Self {
        let n = snapshot.n_voxels();
        let scale = k.k0 * k.k0 * snapshot.delta_v;
        let mut members = Vec::new();
        let mut free = Vec::new();
        for i in 0..n {
            match snapshot.lattice.as_ref().and_then(|l| l.indices[i]) {
                Some(idx) => members.push((i, idx)),
                None => free.push(i),
            }
        }
        let conv = (!members.is_empty()).then(|| LatticeConv::new(snapshot, &members, k.k0, scale));
        let free_rows = free
            .iter()
            .map(|&f| {
                (0..n)
                    .map(|m| {
                        if m == f {
                            Matrix3::zeros()
                        } else {
                            dyadic_green_unchecked(&(snapshot.centers[f] - snapshot.centers[m]), k.k0) * C64::from(scale)
                        }
                    })
                    .collect()
            })
            .collect();
        let diag = voxel_diagonal(&chi, c_self);
        Self { n, chi, diag, conv, free, free_rows }
    }

    pub fn off_lattice_count(&self) -> usize {
        self.free.len()
    }
}

impl InteractionOperator for FftOperator {
    fn dim(&self) -> usize {
        3 * self.n
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let w: Vec<C64> = x.iter().enumerate().map(|(i, v)| v * self.chi[i / 3]).collect();
        for (i, (yi, xi)) in y.iter_mut().zip(x).enumerate() {
            *yi = self.diag[i / 3] * xi;
        }
        if let Some(conv) = &self.conv {
            conv.subtract_coupling(&w, y);
        }
        let is_free = |m: usize| self.free.binary_search(&m).is_ok();
        for (&f, row) in self.free.iter().zip(&self.free_rows) {
            let wf = nalgebra::Vector3::new(w[3 * f], w[3 * f + 1], w[3 * f + 2]);
            let mut acc = nalgebra::Vector3::<C64>::zeros();
            for (m, g) in row.iter().enumerate() {
                if m == f {
                    continue;
                }
                let wm = nalgebra::Vector3::new(w[3 * m], w[3 * m + 1], w[3 * m + 2]);
                acc += g * wm;
                // Reverse direction, skipped between two free voxels since
                // that pair is covered by the other row.
                if !is_free(m) {
                    let back = g.transpose() * wf;
                    for c in 0..3 {
                        y[3 * m + c] -= back[c];
                    }
                }
            }
            for c in 0..3 {
                y[3 * f + c] -= acc[c];
            }
        }
    }

    fn voxel_diagonal(&self) -> &[C64] {
        &self.diag
    }
}

/// Applies the interaction operator of a lattice snapshot to `field` through
/// the FFT path.
pub fn fast_matvec(snapshot: &ScattererSnapshot, field: &[C64], k: &Wavenumber, self_term: SelfTerm) -> Result<Vec<C64>> {
    let op = FftOperator::lattice_only(snapshot, k, self_term)?;
    if field.len() != op.dim() {
        return Err(Error::Mismatch(format!("field has {} entries, operator needs {}", field.len(), op.dim())));
    }
    let mut y = vec![C64::default(); op.dim()];
    op.apply(field, &mut y);
    Ok(y)
}
