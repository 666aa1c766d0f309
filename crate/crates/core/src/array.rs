//! Transmit/receive aperture geometry.

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::em::{Complex3Vector, Position, SPEED_OF_LIGHT};
use crate::{Error, Result};

/// Ideal-dipole MIMO aperture.
///
/// The default layout is the cross: a transmit ULA along `y` and a receive
/// ULA along `z`, both centred on the origin with half-wavelength spacing at
/// the carrier. Boresight is `+x`; the ground plane is `x`-`y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    tx_positions: Vec<Position>,
    rx_positions: Vec<Position>,
    tx_moments: Vec<Complex3Vector>,
    rx_polarizations: Vec<Vector3<f64>>,
    lambda_c: f64,
    spacing: f64,
}

impl ArrayGeometry {
    /// Cross-shaped array with `z`-oriented unit dipoles (1 C·m) and
    /// `z`-polarized receivers.
    pub fn cross(n_tx: usize, n_rx: usize, carrier_hz: f64) -> Result<Self> {
        if n_tx == 0 || n_rx == 0 {
            return Err(Error::InvalidConfig("array needs at least one tx and one rx element".into()));
        }
        if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
            return Err(Error::InvalidConfig(format!("carrier frequency must be positive, got {carrier_hz}")));
        }
        let lambda_c = SPEED_OF_LIGHT / carrier_hz;
        let d = lambda_c / 2.0;
        let centred = |i: usize, n: usize| (i as f64 - (n as f64 - 1.0) / 2.0) * d;
        let zhat = Vector3::new(0.0, 0.0, 1.0);
        Ok(Self {
            tx_positions: (0..n_tx).map(|t| Position::new(0.0, centred(t, n_tx), 0.0)).collect(),
            rx_positions: (0..n_rx).map(|r| Position::new(0.0, 0.0, centred(r, n_rx))).collect(),
            tx_moments: vec![zhat.map(Complex64::from); n_tx],
            rx_polarizations: vec![zhat; n_rx],
            lambda_c,
            spacing: d,
        })
    }

    /// Arbitrary element layout, used for reciprocity fixtures and tests.
    /// Receive polarizations are normalized to unit length.
    pub fn custom(
        tx_positions: Vec<Position>,
        tx_moments: Vec<Complex3Vector>,
        rx_positions: Vec<Position>,
        rx_polarizations: Vec<Vector3<f64>>,
        carrier_hz: f64,
    ) -> Result<Self> {
        if tx_positions.is_empty() || rx_positions.is_empty() {
            return Err(Error::InvalidConfig("array needs at least one tx and one rx element".into()));
        }
        if tx_positions.len() != tx_moments.len() || rx_positions.len() != rx_polarizations.len() {
            return Err(Error::InvalidConfig("element and moment/polarization counts differ".into()));
        }
        let mut pols = Vec::with_capacity(rx_polarizations.len());
        for q in rx_polarizations {
            let n = q.norm();
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::InvalidConfig("receive polarization must be nonzero".into()));
            }
            pols.push(q / n);
        }
        let lambda_c = SPEED_OF_LIGHT / carrier_hz;
        Ok(Self {
            tx_positions,
            rx_positions,
            tx_moments,
            rx_polarizations: pols,
            lambda_c,
            spacing: lambda_c / 2.0,
        })
    }

    pub fn n_tx(&self) -> usize {
        self.tx_positions.len()
    }

    pub fn n_rx(&self) -> usize {
        self.rx_positions.len()
    }

    pub fn tx_positions(&self) -> &[Position] {
        &self.tx_positions
    }

    pub fn rx_positions(&self) -> &[Position] {
        &self.rx_positions
    }

    pub fn tx_moments(&self) -> &[Complex3Vector] {
        &self.tx_moments
    }

    pub fn rx_polarizations(&self) -> &[Vector3<f64>] {
        &self.rx_polarizations
    }

    pub fn carrier_wavelength(&self) -> f64 {
        self.lambda_c
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// All element positions, tx first.
    pub fn elements(&self) -> impl Iterator<Item = &Position> {
        self.tx_positions.iter().chain(self.rx_positions.iter())
    }
}
