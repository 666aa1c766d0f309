use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::em::{Wavenumber, EPSILON_0};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartTag {
    Body,
    Wheel,
}

/// Piecewise-constant voxel material.
///
/// `contrast_cap`, when set, bounds `|χ|`: a contrast whose magnitude
/// exceeds the cap is rescaled onto it. Metal parts use this as a lossy
/// dielectric surrogate, since a perfect conductor has no finite contrast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub eps_r: f64,
    pub sigma: f64,
    pub part: PartTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contrast_cap: Option<f64>,
}

impl Material {
    pub fn new(eps_r: f64, sigma: f64, part: PartTag) -> Result<Self> {
        let m = Self { eps_r, sigma, part, contrast_cap: None };
        m.validate()?;
        Ok(m)
    }

    /// Aluminium-like conductor with `|χ|` capped at 50.
    pub fn metal_surrogate(part: PartTag) -> Self {
        Self {
            eps_r: 1.0,
            sigma: 3.5e7,
            part,
            contrast_cap: Some(50.0),
        }
    }

    /// Lossy tyre rubber.
    pub fn rubber() -> Self {
        Self {
            eps_r: 3.0,
            sigma: 1e-4,
            part: PartTag::Wheel,
            contrast_cap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_r >= 1.0 && self.eps_r.is_finite()) {
            return Err(Error::InvalidConfig(format!("eps_r must be >= 1, got {}", self.eps_r)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if let Some(cap) = self.contrast_cap {
            if !(cap > 0.0) {
                return Err(Error::InvalidConfig(format!("contrast cap must be positive, got {cap}")));
            }
        }
        Ok(())
    }

    /// Complex contrast `χ = eps_r - 1 - jσ/(ωε0)`; the imaginary part is never positive.
    pub fn contrast_at(&self, k: &Wavenumber) -> Complex64 {
        let chi = Complex64::new(self.eps_r - 1.0, -self.sigma / (k.omega * EPSILON_0));
        match self.contrast_cap {
            Some(cap) if chi.norm() > cap => chi * (cap / chi.norm()),
            _ => chi,
        }
    }
}

/// Material assignment per part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialTable {
    pub body: Material,
    pub wheel: Material,
}

impl Default for MaterialTable {
    fn default() -> Self {
        Self {
            body: Material::metal_surrogate(PartTag::Body),
            wheel: Material::rubber(),
        }
    }
}

impl MaterialTable {
    pub fn validate(&self) -> Result<()> {
        self.body.validate()?;
        self.wheel.validate()
    }
}
