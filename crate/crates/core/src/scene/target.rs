use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{Material, MaterialTable, PartTag};
use crate::em::Position;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetClass {
    Car,
    Motorcycle,
}

impl TargetClass {
    pub const ALL: [TargetClass; 2] = [TargetClass::Car, TargetClass::Motorcycle];

    pub fn index(self) -> u32 {
        match self {
            TargetClass::Car => 0,
            TargetClass::Motorcycle => 1,
        }
    }

    pub fn from_index(i: u32) -> Option<Self> {
        Self::ALL.get(i as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TargetClass::Car => "car",
            TargetClass::Motorcycle => "motorcycle",
        }
    }

    pub fn wheel_count(self) -> usize {
        match self {
            TargetClass::Car => 4,
            TargetClass::Motorcycle => 2,
        }
    }
}

/// Box body plus wheel cylinders, canonical frame `x` forward, `y` left, `z` up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyParams {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub wheel_radius: f64,
    pub wheel_half_width: f64,
    /// Distance from the front/rear body face to the axle.
    pub wheel_inset: f64,
}

impl BodyParams {
    pub fn car() -> Self {
        Self {
            length: 4.5,
            width: 1.8,
            height: 1.5,
            wheel_radius: 0.3,
            wheel_half_width: 0.1,
            wheel_inset: 0.8,
        }
    }

    pub fn motorcycle() -> Self {
        Self {
            length: 2.1,
            width: 0.6,
            height: 1.1,
            wheel_radius: 0.3,
            wheel_half_width: 0.06,
            wheel_inset: 0.35,
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.length,
            self.width,
            self.height,
            self.wheel_radius,
            self.wheel_half_width,
            self.wheel_inset,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig(format!("body parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Geometry and material table for both classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryParams {
    pub car: BodyParams,
    pub motorcycle: BodyParams,
    pub materials: MaterialTable,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            car: BodyParams::car(),
            motorcycle: BodyParams::motorcycle(),
            materials: MaterialTable::default(),
        }
    }
}

impl GeometryParams {
    pub fn body(&self, class: TargetClass) -> &BodyParams {
        match class {
            TargetClass::Car => &self.car,
            TargetClass::Motorcycle => &self.motorcycle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wheel {
    /// Unit rotation axis (canonical frame).
    pub axis: Vector3<f64>,
    pub center: Position,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateVoxel {
    pub position: Position,
    pub lattice: [i32; 3],
    pub material: Material,
    /// Index into [`TargetModel::wheels`] for wheel cells.
    pub wheel: Option<usize>,
}

/// Canonical voxel template of one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetModel {
    pub class: TargetClass,
    pub voxels: Vec<TemplateVoxel>,
    pub wheels: Vec<Wheel>,
    pub extent: [f64; 3],
    pub pitch: f64,
}

impl TargetModel {
    /// Assembles a model from explicit parts. Wheel cells must reference an
    /// existing wheel and carry the wheel tag; wheel count is not checked, so
    /// this is also the entry point for point targets and test fixtures.
    pub fn from_parts(
        class: TargetClass,
        voxels: Vec<TemplateVoxel>,
        wheels: Vec<Wheel>,
        extent: [f64; 3],
        pitch: f64,
    ) -> Result<Self> {
        if voxels.is_empty() {
            return Err(Error::Geometry("target has no voxels".into()));
        }
        if !(pitch > 0.0) {
            return Err(Error::Geometry(format!("voxel pitch must be positive, got {pitch}")));
        }
        for v in &voxels {
            match v.wheel {
                Some(w) if w >= wheels.len() => {
                    return Err(Error::Geometry(format!("voxel references missing wheel {w}")))
                }
                Some(_) if v.material.part != PartTag::Wheel => {
                    return Err(Error::Geometry("wheel voxel without wheel tag".into()))
                }
                _ => {}
            }
        }
        Ok(Self { class, voxels, wheels, extent, pitch })
    }

    /// Number of cells belonging to wheel `w`.
    pub fn wheel_voxel_count(&self, w: usize) -> usize {
        self.voxels.iter().filter(|v| v.wheel == Some(w)).count()
    }

    pub fn n_voxels(&self) -> usize {
        self.voxels.len()
    }
}

/// Builds the procedural voxel template of a vehicle class.
///
/// The body is a one-cell-thick box shell (metal panels); each wheel is a
/// solid cylinder about the lateral axis whose hub is snapped to the
/// lattice, so every wheel owns at least its hub cell. Body cells within one
/// pitch of a wheel's swept disc are cleared to form a wheel well, keeping
/// rotating wheel cells at least one pitch away from the body.
pub fn build_target(class: TargetClass, params: &GeometryParams, voxel_pitch: f64) -> Result<TargetModel> {
    if !(voxel_pitch.is_finite() && voxel_pitch > 0.0) {
        return Err(Error::InvalidConfig(format!("voxel pitch must be positive, got {voxel_pitch}")));
    }
    params.materials.validate()?;
    let body = params.body(class);
    body.validate()?;
    let p = voxel_pitch;
    let eps = 1e-9 * p;

    let range = |half: f64| ((-half - eps) / p).ceil() as i32..=((half + eps) / p).floor() as i32;
    let (rx, ry, rz) = (range(body.length / 2.0), range(body.width / 2.0), range(body.height / 2.0));
    if rx.is_empty() || ry.is_empty() || rz.is_empty() {
        return Err(Error::Geometry(format!("pitch {p} m leaves the {} body empty", class.name())));
    }

    let ax = body.length / 2.0 - body.wheel_inset;
    let hub_offsets: Vec<(f64, f64)> = match class {
        TargetClass::Car => {
            let ay = body.width / 2.0 - body.wheel_half_width;
            vec![(ax, ay), (ax, -ay), (-ax, ay), (-ax, -ay)]
        }
        TargetClass::Motorcycle => vec![(ax, 0.0), (-ax, 0.0)],
    };
    let snap = |v: f64| (v / p).round() as i32;
    let hubs: Vec<[i32; 3]> = hub_offsets
        .iter()
        .map(|&(x, y)| [snap(x), snap(y), snap(-body.height / 2.0)])
        .collect();
    let axis = Vector3::new(0.0, 1.0, 0.0);
    let wheels: Vec<Wheel> = hubs
        .iter()
        .map(|h| Wheel {
            axis,
            center: Position::new(h[0] as f64, h[1] as f64, h[2] as f64) * p,
            radius: body.wheel_radius,
        })
        .collect();

    let r = body.wheel_radius;
    let hw = body.wheel_half_width;
    let in_wheel = |w: &[i32; 3], i: i32, j: i32, l: i32| {
        let (dx, dy, dz) = ((i - w[0]) as f64 * p, (j - w[1]) as f64 * p, (l - w[2]) as f64 * p);
        dy.abs() <= hw + eps && dx * dx + dz * dz <= r * r + eps
    };
    let in_well = |w: &[i32; 3], i: i32, j: i32, l: i32| {
        let (dx, dy, dz) = ((i - w[0]) as f64 * p, (j - w[1]) as f64 * p, (l - w[2]) as f64 * p);
        dy.abs() <= hw + p / 2.0 && dx * dx + dz * dz < (r + p) * (r + p)
    };

    let at = |idx: [i32; 3]| Position::new(idx[0] as f64, idx[1] as f64, idx[2] as f64) * p;
    let mut voxels = Vec::new();
    let on_shell = |i: i32, j: i32, l: i32| {
        i == *rx.start() || i == *rx.end() || j == *ry.start() || j == *ry.end() || l == *rz.start() || l == *rz.end()
    };
    for i in rx.clone() {
        for j in ry.clone() {
            for l in rz.clone() {
                if !on_shell(i, j, l) || hubs.iter().any(|w| in_well(w, i, j, l)) {
                    continue;
                }
                voxels.push(TemplateVoxel {
                    position: at([i, j, l]),
                    lattice: [i, j, l],
                    material: Material { part: PartTag::Body, ..params.materials.body },
                    wheel: None,
                });
            }
        }
    }

    let reach_r = (r / p).floor() as i32 + 1;
    let reach_w = (hw / p).floor() as i32 + 1;
    for (wi, w) in hubs.iter().enumerate() {
        let before = voxels.len();
        for i in w[0] - reach_r..=w[0] + reach_r {
            for j in w[1] - reach_w..=w[1] + reach_w {
                for l in w[2] - reach_r..=w[2] + reach_r {
                    if in_wheel(w, i, j, l) {
                        voxels.push(TemplateVoxel {
                            position: at([i, j, l]),
                            lattice: [i, j, l],
                            material: Material { part: PartTag::Wheel, ..params.materials.wheel },
                            wheel: Some(wi),
                        });
                    }
                }
            }
        }
        if voxels.len() == before {
            return Err(Error::Geometry(format!("pitch {p} m leaves wheel {wi} without voxels")));
        }
    }

    let mut cells = std::collections::HashSet::with_capacity(voxels.len());
    if !voxels.iter().all(|v| cells.insert(v.lattice)) {
        return Err(Error::Geometry(format!("pitch {p} m is too coarse: wheels overlap")));
    }

    TargetModel::from_parts(class, voxels, wheels, [body.length, body.width, body.height], p)
}
