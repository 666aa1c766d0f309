use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Material;
use crate::em::{Position, Wavenumber};
use crate::{Error, Result};

/// A regular lattice, possibly rigidly rotated: voxel `(i, j, l)` sits at
/// `origin + axes * (pitch * [i, j, l])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeFrame {
    pub origin: Position,
    /// Orthonormal columns.
    pub axes: Matrix3<f64>,
    pub pitch: f64,
    /// Lattice index per voxel; `None` for voxels that have left the lattice
    /// (rotating wheel cells).
    pub indices: Vec<Option<[i32; 3]>>,
}

impl LatticeFrame {
    pub fn position_of(&self, idx: [i32; 3]) -> Position {
        let local = Position::new(idx[0] as f64, idx[1] as f64, idx[2] as f64) * self.pitch;
        self.origin + self.axes * local
    }

    pub fn is_complete(&self) -> bool {
        self.indices.iter().all(Option::is_some)
    }
}

/// Voxelized target at one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScattererSnapshot {
    pub centers: Vec<Position>,
    pub delta_v: f64,
    pub materials: Vec<Material>,
    pub frame_index: usize,
    pub lattice: Option<LatticeFrame>,
}

impl ScattererSnapshot {
    /// Unstructured point cloud of cubic cells.
    pub fn new(centers: Vec<Position>, delta_v: f64, materials: Vec<Material>, frame_index: usize) -> Result<Self> {
        let s = Self { centers, delta_v, materials, frame_index, lattice: None };
        s.validate()?;
        Ok(s)
    }

    /// Voxels on a lattice; centers are computed from the lattice.
    pub fn on_lattice(frame: LatticeFrame, materials: Vec<Material>, frame_index: usize) -> Result<Self> {
        let centers = frame
            .indices
            .iter()
            .map(|idx| idx.map(|i| frame.position_of(i)))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Geometry("on_lattice needs an index for every voxel".into()))?;
        let s = Self {
            centers,
            delta_v: frame.pitch.powi(3),
            materials,
            frame_index,
            lattice: Some(frame),
        };
        s.validate()?;
        Ok(s)
    }

    /// Axis-aligned box of `dims` cells centred on `center`, keeping the
    /// cells for which `keep(i, j, l)` holds.
    pub fn lattice_box(
        center: Position,
        dims: [usize; 3],
        pitch: f64,
        material: Material,
        keep: impl Fn(usize, usize, usize) -> bool,
    ) -> Result<Self> {
        let half = |n: usize| (n as f64 - 1.0) / 2.0;
        let origin = center - Position::new(half(dims[0]), half(dims[1]), half(dims[2])) * pitch;
        let mut indices = Vec::new();
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for l in 0..dims[2] {
                    if keep(i, j, l) {
                        indices.push(Some([i as i32, j as i32, l as i32]));
                    }
                }
            }
        }
        let n = indices.len();
        let frame = LatticeFrame { origin, axes: Matrix3::identity(), pitch, indices };
        Self::on_lattice(frame, vec![material; n], 0)
    }

    /// Solid cube of `n³` cells.
    pub fn cube(center: Position, n: usize, pitch: f64, material: Material) -> Result<Self> {
        Self::lattice_box(center, [n; 3], pitch, material, |_, _, _| true)
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::Geometry("snapshot has no voxels".into()));
        }
        if !(self.delta_v > 0.0 && self.delta_v.is_finite()) {
            return Err(Error::Geometry(format!("voxel volume must be positive, got {}", self.delta_v)));
        }
        if self.materials.len() != self.centers.len() {
            return Err(Error::Geometry("one material per voxel required".into()));
        }
        if let Some(l) = &self.lattice {
            if l.indices.len() != self.centers.len() {
                return Err(Error::Geometry("lattice index count differs from voxel count".into()));
            }
        }
        for m in &self.materials {
            m.validate()?;
        }
        Ok(())
    }

    pub fn n_voxels(&self) -> usize {
        self.centers.len()
    }

    /// Edge length of the cubic cell.
    pub fn voxel_side(&self) -> f64 {
        self.delta_v.cbrt()
    }

    pub fn contrasts(&self, k: &Wavenumber) -> Vec<Complex64> {
        self.materials.iter().map(|m| m.contrast_at(k)).collect()
    }

    /// Returns an error naming the first pair of coincident voxel centers.
    pub fn check_distinct(&self) -> Result<()> {
        let tol = 1e-9 * self.voxel_side();
        let key = |p: &Position| {
            [
                (p.x / tol).round() as i64,
                (p.y / tol).round() as i64,
                (p.z / tol).round() as i64,
            ]
        };
        let mut seen: HashMap<[i64; 3], usize> = HashMap::with_capacity(self.centers.len());
        for (i, c) in self.centers.iter().enumerate() {
            if let Some(&first) = seen.get(&key(c)) {
                return Err(Error::DuplicateVoxel { first, second: i });
            }
            seen.insert(key(c), i);
        }
        Ok(())
    }

    /// Identity of the geometry, used to pair solutions with their snapshot.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.frame_index.hash(&mut h);
        self.delta_v.to_bits().hash(&mut h);
        for (c, m) in self.centers.iter().zip(&self.materials) {
            for v in c.iter() {
                v.to_bits().hash(&mut h);
            }
            m.eps_r.to_bits().hash(&mut h);
            m.sigma.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// Point is within the circumscribed sphere of some cell.
    pub fn contains(&self, r: &Position) -> bool {
        let rad = self.voxel_side() * 3f64.sqrt() / 2.0;
        self.centers.iter().any(|c| (c - r).norm() <= rad)
    }
}
