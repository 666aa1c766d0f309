//! Closed-form free-space electromagnetic kernels.
//!
//! Time convention is `e^{+jωt}`: an outgoing spherical wave is
//! `e^{-jk0R}/R`. Every downstream sign (radiative self-term, Doppler
//! direction, range-bin ordering) follows from this choice.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix3xX, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::ArrayGeometry;
use crate::{Error, Result};

/// Vacuum permittivity (F/m), CODATA 2018.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability (H/m), CODATA 2018.
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Speed of light in vacuum (m/s), exact.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Real position in metres.
pub type Position = Vector3<f64>;
/// Complex 3-vector: field (V/m) or dipole moment (C·m).
pub type Complex3Vector = Vector3<Complex64>;
/// Complex 3×3 dyadic (1/m for the Green's dyadic).
pub type Dyadic3x3 = Matrix3<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub epsilon0: f64,
    pub mu0: f64,
    pub c: f64,
}

impl PhysicalConstants {
    pub const SI: Self = Self {
        epsilon0: EPSILON_0,
        mu0: MU_0,
        c: SPEED_OF_LIGHT,
    };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::SI
    }
}

/// Frequency, angular frequency and free-space wavenumber of one subcarrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wavenumber {
    pub f: f64,
    pub omega: f64,
    pub k0: f64,
}

impl Wavenumber {
    pub fn from_frequency(f: f64) -> Result<Self> {
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::Domain(format!("frequency must be positive, got {f}")));
        }
        let omega = 2.0 * PI * f;
        Ok(Self {
            f,
            omega,
            k0: omega * (MU_0 * EPSILON_0).sqrt(),
        })
    }

    /// Builds a wavenumber from k0 directly (rad/m).
    pub fn from_k0(k0: f64) -> Result<Self> {
        if !(k0.is_finite() && k0 > 0.0) {
            return Err(Error::Domain(format!("wavenumber must be positive, got {k0}")));
        }
        let omega = k0 / (MU_0 * EPSILON_0).sqrt();
        Ok(Self {
            f: omega / (2.0 * PI),
            omega,
            k0,
        })
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.k0
    }
}

/// Scalar Green's function `e^{-jk0R} / (4πR)`.
pub fn scalar_green(r: f64, k: &Wavenumber) -> Result<Complex64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!(
            "scalar Green's function needs R > 0, got {r}"
        )));
    }
    Ok(scalar_green_unchecked(r, k.k0))
}

#[inline]
pub(crate) fn scalar_green_unchecked(r: f64, k0: f64) -> Complex64 {
    Complex64::from_polar(1.0 / (4.0 * PI * r), -k0 * r)
}

/// Free-space dyadic Green's function `(I + ∇∇ᵀ/k0²) g(|r - r_src|)`.
pub fn dyadic_green(r: &Position, r_src: &Position, k: &Wavenumber) -> Result<Dyadic3x3> {
    let d = r - r_src;
    if !(d.norm() > 0.0) {
        return Err(Error::Domain("dyadic Green's function at coincident points".into()));
    }
    Ok(dyadic_green_unchecked(&d, k.k0))
}

/// Closed-form radial expansion, `d = r - r_src` must be nonzero:
///
/// `G = g(R) [ (1 - (1 + jk0R)/(k0R)²) I + ((3 + 3jk0R - (k0R)²)/(k0R)²) r̂r̂ᵀ ]`
#[inline]
pub(crate) fn dyadic_green_unchecked(d: &Position, k0: f64) -> Dyadic3x3 {
    let r = d.norm();
    let kr = k0 * r;
    let kr2 = kr * kr;
    let g = scalar_green_unchecked(r, k0);
    let a = g * (1.0 - (1.0 + J * kr) / kr2);
    let b = g * ((3.0 + 3.0 * J * kr - kr2) / kr2);
    let u = d / r;
    let mut out = Dyadic3x3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let rr = b * (u[i] * u[j]);
            out[(i, j)] = if i == j { a + rr } else { rr };
        }
    }
    out
}

/// Electric field of a small dipole `p` at `r_src`, observed at `r`, including
/// the reactive `1/R²` and `1/R³` terms.
pub fn dipole_field(
    r: &Position,
    r_src: &Position,
    p: &Complex3Vector,
    k: &Wavenumber,
) -> Result<Complex3Vector> {
    let d = r - r_src;
    let dist = d.norm();
    if !(dist > 0.0) {
        return Err(Error::Domain("dipole field at its own source point".into()));
    }
    let k0 = k.k0;
    let u: Complex3Vector = (d / dist).map(Complex64::from);
    let phase = Complex64::from_polar(1.0 / (4.0 * PI * EPSILON_0), -k0 * dist);
    let radiative = u.cross(p).cross(&u) * Complex64::from(k0 * k0 / dist);
    let udotp = u.dot(p);
    let reactive = (u * (3.0 * udotp) - p)
        * (Complex64::from(1.0 / dist.powi(3)) + J * (k0 / (dist * dist)));
    Ok((radiative + reactive) * phase)
}

/// `3×N_t` incident-field matrix: column `t` is the field of transmit dipole `t` at `r`.
pub fn incident_matrix(r: &Position, array: &ArrayGeometry, k: &Wavenumber) -> Result<Matrix3xX<Complex64>> {
    let mut out = Matrix3xX::zeros(array.n_tx());
    for (t, (pos, p)) in array.tx_positions().iter().zip(array.tx_moments()).enumerate() {
        let e = dipole_field(r, pos, p, k).map_err(|_| {
            Error::Domain(format!("observation point coincides with transmit element {t}"))
        })?;
        out.set_column(t, &e);
    }
    Ok(out)
}
