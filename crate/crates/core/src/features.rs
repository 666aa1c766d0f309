//! Classifier-facing preprocessing and the 4-D FFT baseline front end.
//!
//! Feature tensors are `f32`, matching the on-disk sample format; scaling and
//! normalization are evaluated in `f64` and rounded once.
//!
//! FFT conventions: all transforms are unnormalized. The spatial axes and the
//! slow-time (Doppler) axis use the forward kernel `e^{-j2πnb/N}`; the
//! subcarrier axis uses the conjugate kernel so that a positive round-trip
//! delay lands on a positive range bin. Outputs are DC-centred: stored index
//! `j` holds signed bin `j - N/2` (integer division), as in numpy's `fftshift`.

use std::io::Write;

use ndarray::{s, Array2, Array4, Array5, Axis};
use num_complex::Complex64 as C64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelTensor;
use crate::fft::fft_axis;
use crate::{Error, Result};

/// Selected subcarrier slots of a dwell, 0-based and strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensingSelection {
    indices: Vec<usize>,
}

impl SensingSelection {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidConfig("subcarrier selection is empty".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!("subcarrier selection must be strictly increasing: {indices:?}")));
        }
        Ok(Self { indices })
    }

    /// `count` slots at a constant stride of `total / count`, starting at 0.
    pub fn evenly_spaced(count: usize, total: usize) -> Result<Self> {
        if count == 0 || count > total {
            return Err(Error::InvalidConfig(format!("cannot select {count} of {total} subcarriers")));
        }
        let stride = total / count;
        Self::new((0..count).map(|i| i * stride).collect())
    }

    pub fn all(total: usize) -> Result<Self> {
        Self::new((0..total).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Selection equivalent to applying `self`, then `inner` to the result.
    pub fn then(&self, inner: &SensingSelection) -> Result<Self> {
        let picked = inner
            .indices
            .iter()
            .map(|&i| {
                self.indices
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::InvalidConfig(format!("selection index {i} outside {} slots", self.indices.len())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(picked)
    }
}

/// Keeps the selected subcarrier slices, in order.
pub fn select_subcarriers(tensor: &ChannelTensor, sel: &SensingSelection) -> Result<ChannelTensor> {
    let n_k = tensor.dims()[2];
    if let Some(&bad) = sel.indices.iter().find(|&&i| i >= n_k) {
        return Err(Error::InvalidConfig(format!("subcarrier index {bad} outside a dwell of {n_k}")));
    }
    Ok(ChannelTensor {
        data: tensor.data.select(Axis(2), &sel.indices),
        frequencies_hz: sel.indices.iter().map(|&i| tensor.frequencies_hz[i]).collect(),
        frame_interval_s: tensor.frame_interval_s,
    })
}

/// Real/imaginary stack indexed `(c, r, t, m, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealFeatureTensor {
    pub data: Array5<f32>,
    /// Normalization scalar `M` (1 before normalization).
    pub scale: f64,
    /// Set when normalization met an all-zero sample.
    pub degenerate: bool,
}

impl RealFeatureTensor {
    /// `(N_r, N_t, N_p, K_sel)`.
    pub fn dims(&self) -> [usize; 4] {
        let s = self.data.shape();
        [s[1], s[2], s[3], s[4]]
    }

    /// Complex tensor `U[0] + jU[1]`, indexed `(r, t, k, m)` like a dwell.
    pub fn to_complex(&self) -> Array4<C64> {
        let [nr, nt, np, nk] = self.dims();
        Array4::from_shape_fn((nr, nt, nk, np), |(r, t, k, m)| {
            C64::new(self.data[[0, r, t, m, k]] as f64, self.data[[1, r, t, m, k]] as f64)
        })
    }

    fn max_magnitude(&self) -> f64 {
        let re = self.data.index_axis(Axis(0), 0);
        let im = self.data.index_axis(Axis(0), 1);
        re.iter().zip(im.iter()).map(|(&a, &b)| (a as f64).hypot(b as f64)).fold(0.0, f64::max)
    }
}

/// Splits a complex dwell `(r, t, k, m)` into `(c, r, t, m, k)` real channels.
pub fn to_real(tensor: &ChannelTensor) -> RealFeatureTensor {
    real_from_complex(&tensor.data)
}

pub fn real_from_complex(data: &Array4<C64>) -> RealFeatureTensor {
    let (nr, nt, nk, np) = data.dim();
    let out = Array5::from_shape_fn((2, nr, nt, np, nk), |(c, r, t, m, k)| {
        let z = data[[r, t, k, m]];
        if c == 0 {
            z.re as f32
        } else {
            z.im as f32
        }
    });
    RealFeatureTensor { data: out, scale: 1.0, degenerate: false }
}

/// Divides by the largest complex magnitude `M` and records it; an all-zero
/// sample is returned unchanged with the degenerate flag set.
pub fn normalize(u: &RealFeatureTensor) -> RealFeatureTensor {
    let m = u.max_magnitude();
    if m == 0.0 {
        return RealFeatureTensor { data: u.data.clone(), scale: u.scale, degenerate: true };
    }
    RealFeatureTensor {
        data: u.data.mapv(|v| (v as f64 / m) as f32),
        scale: u.scale * m,
        degenerate: false,
    }
}

/// Zero-padding factor applied to every axis before the 4-D transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FftPadding(pub usize);

impl Default for FftPadding {
    fn default() -> Self {
        Self(1)
    }
}

fn fftshift_axis(a: &Array4<C64>, axis: usize) -> Array4<C64> {
    let n = a.len_of(Axis(axis));
    let half = n / 2;
    let order: Vec<usize> = (0..n).map(|j| (j + n - half) % n).collect();
    a.select(Axis(axis), &order)
}

/// Complex 4-D spectrum of a `(r, t, k, m)` tensor, laid out
/// `(rx angle, tx angle, range, Doppler)` and DC-centred on every axis.
pub fn fft4d_spectrum(data: &Array4<C64>, pad: FftPadding) -> Result<Array4<C64>> {
    let (nr, nt, nk, np) = data.dim();
    if nr == 0 || nt == 0 || nk == 0 || np == 0 {
        return Err(Error::InvalidConfig(format!("fft4d needs a non-empty tensor, got {:?}", data.dim())));
    }
    if pad.0 == 0 {
        return Err(Error::InvalidConfig("padding factor must be at least 1".into()));
    }
    let p = pad.0;
    let mut x = Array4::<C64>::zeros((nr * p, nt * p, nk * p, np * p));
    x.slice_mut(s![..nr, ..nt, ..nk, ..np]).assign(data);
    let mut view = x.view_mut();
    fft_axis(&mut view, 0, FftDirection::Forward);
    fft_axis(&mut view, 1, FftDirection::Forward);
    fft_axis(&mut view, 2, FftDirection::Inverse);
    fft_axis(&mut view, 3, FftDirection::Forward);
    for axis in 0..4 {
        x = fftshift_axis(&x, axis);
    }
    Ok(x)
}

/// Doppler × range magnitude map `(N_p, K_sel)` (times the padding factor),
/// averaged over both angle axes.
pub fn fft4d_features(data: &Array4<C64>, pad: FftPadding) -> Result<Array2<f64>> {
    let spec = fft4d_spectrum(data, pad)?;
    let (na, nb, nk, np) = spec.dim();
    let mut out = Array2::<f64>::zeros((np, nk));
    for ((_, _, k, m), v) in spec.indexed_iter() {
        out[[m, k]] += v.norm();
    }
    out /= (na * nb) as f64;
    Ok(out)
}

/// Signed bin of DC-centred index `j` on an axis of length `n`.
pub fn signed_bin(j: usize, n: usize) -> i64 {
    j as i64 - (n / 2) as i64
}

/// DC-centred index of an unshifted DFT bin `b` on an axis of length `n`.
pub fn centred_index(b: i64, n: usize) -> usize {
    (b + (n / 2) as i64).rem_euclid(n as i64) as usize
}

/// Writes a Doppler × range map as long-format CSV with signed bins.
pub fn write_map_csv<W: Write>(map: &Array2<f64>, mut w: W) -> std::io::Result<()> {
    let (np, nk) = map.dim();
    writeln!(w, "doppler_bin,range_bin,magnitude")?;
    for m in 0..np {
        for k in 0..nk {
            writeln!(w, "{},{},{:e}", signed_bin(m, np), signed_bin(k, nk), map[[m, k]])?;
        }
    }
    Ok(())
}
