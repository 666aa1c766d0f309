use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LatticeFrame, ScattererSnapshot, TargetModel};
use crate::em::Position;
use crate::{Error, Result};

/// One dwell's trajectory: constant-velocity straight line along the yaw
/// direction, starting at range `range0_m` and azimuth `azimuth0_deg`
/// (measured from boresight `+x` towards `+y`) in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub range0_m: f64,
    pub yaw0_deg: f64,
    pub speed_mps: f64,
    /// Unit ground-plane direction of travel; equal to the yaw direction.
    pub heading: [f64; 2],
    pub azimuth0_deg: f64,
    pub frames: usize,
    pub frame_interval_s: f64,
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// Builds a scenario whose heading follows the yaw.
    pub fn new(range0_m: f64, yaw0_deg: f64, speed_mps: f64, azimuth0_deg: f64, frames: usize, frame_interval_s: f64) -> Self {
        let yaw = yaw0_deg.to_radians();
        Self {
            range0_m,
            yaw0_deg,
            speed_mps,
            heading: [yaw.cos(), yaw.sin()],
            azimuth0_deg,
            frames,
            frame_interval_s,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("scenario {what}: {self:?}")));
        if !(5.0..=50.0).contains(&self.range0_m) {
            return bad("range0 outside [5, 50] m");
        }
        if !(-180.0..=180.0).contains(&self.yaw0_deg) {
            return bad("yaw outside [-180, 180] deg");
        }
        if !(0.0..=15.0).contains(&self.speed_mps) {
            return bad("speed outside [0, 15] m/s");
        }
        if !(-60.0..=60.0).contains(&self.azimuth0_deg) {
            return bad("initial azimuth outside +-60 deg");
        }
        let hn = (self.heading[0].powi(2) + self.heading[1].powi(2)).sqrt();
        if (hn - 1.0).abs() > 1e-9 {
            return bad("heading is not a unit vector");
        }
        if self.frames == 0 || !(self.frame_interval_s > 0.0) {
            return bad("needs at least one frame and a positive frame interval");
        }
        Ok(())
    }

    pub fn initial_position(&self) -> Position {
        let az = self.azimuth0_deg.to_radians();
        Position::new(az.cos(), az.sin(), 0.0) * self.range0_m
    }

    /// Target reference point at frame `m`.
    pub fn position_at(&self, m: usize) -> Position {
        let travelled = self.speed_mps * (m as f64 * self.frame_interval_s);
        self.initial_position() + Position::new(self.heading[0], self.heading[1], 0.0) * travelled
    }
}

/// Draws scenarios from the uniform laws on range, yaw and speed, with the
/// initial azimuth rejection-sampled into the ±60° field of view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSampler {
    pub frames: usize,
    pub frame_interval_s: f64,
}

impl ScenarioSampler {
    pub fn sample(&self, rng_seed: u64) -> ScenarioConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let range0 = rng.random_range(5.0..=50.0);
        let yaw = rng.random_range(-180.0..=180.0);
        let speed = rng.random_range(0.0..=15.0);
        let azimuth = loop {
            let a: f64 = rng.random_range(-180.0..180.0);
            if a.abs() <= 60.0 {
                break a;
            }
        };
        ScenarioConfig {
            rng_seed,
            ..ScenarioConfig::new(range0, yaw, speed, azimuth, self.frames, self.frame_interval_s)
        }
    }
}

/// Places the template at frame `m`: body cells move rigidly (yaw, then
/// translation along the heading), wheel cells additionally turn about their
/// axle by `θ_m = (v / r_wheel) · m · dt`.
pub fn animate(model: &TargetModel, cfg: &ScenarioConfig, m: usize) -> Result<ScattererSnapshot> {
    if m >= cfg.frames {
        return Err(Error::InvalidConfig(format!("frame {m} outside dwell of {} frames", cfg.frames)));
    }
    let origin = cfg.position_at(m);
    let range = origin.norm();
    if range < 1.0 {
        return Err(Error::Trajectory { frame: m, reason: format!("range {range:.3} m below 1 m") });
    }
    if origin.x <= 0.0 {
        return Err(Error::Trajectory { frame: m, reason: "target behind the array plane".into() });
    }
    let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), cfg.yaw0_deg.to_radians());
    let dt = m as f64 * cfg.frame_interval_s;
    let spins: Vec<Option<Rotation3<f64>>> = model
        .wheels
        .iter()
        .map(|w| {
            let theta = cfg.speed_mps / w.radius * dt;
            (theta != 0.0).then(|| Rotation3::from_axis_angle(&Unit::new_normalize(w.axis), theta))
        })
        .collect();

    let axes = *yaw.matrix();
    let mut centers = Vec::with_capacity(model.voxels.len());
    let mut indices = Vec::with_capacity(model.voxels.len());
    for v in &model.voxels {
        let turned = v.wheel.and_then(|w| spins[w].map(|rot| (w, rot)));
        match turned {
            Some((w, rot)) if v.position != model.wheels[w].center => {
                let hub = model.wheels[w].center;
                let local = hub + rot * (v.position - hub);
                centers.push(origin + axes * local);
                indices.push(None);
            }
            _ => {
                let idx = v.lattice;
                let local = Position::new(idx[0] as f64, idx[1] as f64, idx[2] as f64) * model.pitch;
                centers.push(origin + axes * local);
                indices.push(Some(idx));
            }
        }
    }
    Ok(ScattererSnapshot {
        centers,
        delta_v: model.pitch.powi(3),
        materials: model.voxels.iter().map(|v| v.material).collect(),
        frame_index: m,
        lattice: Some(LatticeFrame { origin, axes, pitch: model.pitch, indices }),
    })
}
