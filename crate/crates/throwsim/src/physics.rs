//! Gripper release model and ballistic flight.
//!
//! A throw works like this: the robot runs a linear move from the pick point
//! toward a target point short of (or above) the bin. Somewhere along that
//! line the gripper-open signal is issued. The jaws take time to open — a
//! fixed reaction delay plus an opening sweep proportional to the object
//! width — so the object actually separates later, wherever the robot happens
//! to be by then (possibly decelerating, possibly already stopped: that lag
//! is exactly what the analytic competitor ignores and what the learned
//! policies must absorb). From separation the object is a drag-free
//! projectile; it scores if it crosses the bin-opening rectangle at rim
//! height.

use crate::error::Error;
use crate::geom::{Rect, Vec3};
use crate::motion::{self, MotionProfile, RobotSpec};
use crate::Result;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;

/// Parallel-jaw gripper timing and geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperSpec {
    /// Reaction delay before the jaws start to move, s (d₁).
    pub pre_open_delay: f64,
    /// Time for the jaws to sweep the full stroke, s (d₂).
    pub full_open_delay: f64,
    /// Full jaw stroke, m.
    pub stroke: f64,
}

impl Default for GripperSpec {
    fn default() -> Self {
        GripperSpec { pre_open_delay: 0.010, full_open_delay: 0.171, stroke: 0.040 }
    }
}

impl GripperSpec {
    pub fn validate(&self) -> Result<()> {
        if self.pre_open_delay < 0.0 || self.full_open_delay < 0.0 || self.stroke < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "gripper delays/stroke must be ≥ 0, got {:?}",
                self
            )));
        }
        Ok(())
    }
}

/// The grasped object: a small cube with a possibly off-center mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    /// Mass, kg.
    pub mass: f64,
    /// Cube edge length, m.
    pub side: f64,
    /// Horizontal center-of-mass offset from the geometric center, m.
    pub com_offset: [f64; 2],
}

impl ObjectSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || !(self.side > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "object mass/side must be positive, got mass {} side {}",
                self.mass, self.side
            )));
        }
        let lim = self.side / 4.0 + 1e-12;
        if self.com_offset[0].abs() > lim || self.com_offset[1].abs() > lim {
            return Err(Error::InvalidConfig(format!(
                "object com_offset {:?} exceeds ±side/4 = ±{}",
                self.com_offset,
                self.side / 4.0
            )));
        }
        Ok(())
    }
}

/// Bin geometry: an open rectangle at rim height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    /// Bin center in the horizontal plane, m.
    pub center: [f64; 2],
    /// Height of the bin opening above the conveyor plane, m.
    pub rim_height: f64,
    pub half_extent_x: f64,
    pub half_extent_y: f64,
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec { center: [0.0, 0.0], rim_height: 0.10, half_extent_x: 0.10, half_extent_y: 0.10 }
    }
}

impl BinSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_extent_x > 0.0) || !(self.half_extent_y > 0.0) || self.rim_height < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "bin extents must be positive and rim ≥ 0, got {:?}",
                self
            )));
        }
        Ok(())
    }

    pub fn opening(&self) -> Rect {
        Rect::new(self.center[0], self.center[1], self.half_extent_x, self.half_extent_y)
    }
}

/// Release-noise magnitudes; scaled per throw by how off-center the object's
/// mass sits in the jaws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Relative speed-scale standard deviation at full center-of-mass offset.
    pub speed_sigma: f64,
    /// Direction-rotation standard deviation at full offset, degrees.
    pub angle_sigma_deg: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { speed_sigma: 0.05, angle_sigma_deg: 3.0 }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.speed_sigma < 0.0 || self.angle_sigma_deg < 0.0 {
            return Err(Error::InvalidConfig(format!("noise sigmas must be ≥ 0, got {:?}", self)));
        }
        Ok(())
    }

    pub fn is_disabled(&self) -> bool {
        self.speed_sigma == 0.0 && self.angle_sigma_deg == 0.0
    }
}

/// One episode's hidden nuisance state: the object in the jaws, that
/// episode's sampled gripper delays, and the bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub object: ObjectSpec,
    pub gripper: GripperSpec,
    pub bin: BinSpec,
}

/// Decoded throw action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrowCommand {
    /// Where along the pick→target line the open signal is issued, ∈ [0, 1].
    pub release_fraction: f64,
    /// Peak-speed cap for the move, m/s.
    pub speed: f64,
    /// Height of the target point, m.
    pub target_height: f64,
    /// Horizontal travel as a fraction of the pick→bin distance, ∈ [0.05, 1].
    pub target_reach: f64,
}

/// Everything observable about one simulated throw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrowOutcome {
    pub success: bool,
    /// Where the object crossed rim height, m (xy).
    pub landing: [f64; 2],
    /// Robot motion duration (pick to full stop), s.
    pub action_time: f64,
    /// Object position at jaw separation, m.
    pub release_point: Vec3,
    /// Object velocity just after separation (noise applied), m/s.
    pub release_velocity: Vec3,
}

/// Time between the open signal and the object leaving the jaws: the fixed
/// reaction delay plus the share of the opening sweep needed for the jaws to
/// clear the object's width.
pub fn separation_delay(object: &ObjectSpec, gripper: &GripperSpec) -> f64 {
    let frac = if gripper.stroke > 0.0 { (object.side / gripper.stroke).min(1.0) } else { 1.0 };
    gripper.pre_open_delay + gripper.full_open_delay * frac
}

/// Drag-free projectile flight from `release_point` with `release_velocity`
/// down to the horizontal plane `floor_z`; returns the crossing point and the
/// flight time (the positive root of the height equation).
pub fn ballistic_land(
    release_point: Vec3,
    release_velocity: Vec3,
    floor_z: f64,
) -> Result<([f64; 2], f64)> {
    let dz = release_point.z - floor_z;
    let vz = release_velocity.z;
    let disc = vz * vz + 2.0 * GRAVITY * dz;
    if disc < 0.0 {
        return Err(Error::DegenerateThrow(format!(
            "released {:.3} m below the floor with insufficient upward speed {:.3} m/s",
            -dz, vz
        )));
    }
    let t = (vz + disc.sqrt()) / GRAVITY;
    if t <= 0.0 {
        return Err(Error::DegenerateThrow(
            "object starts at or below the floor and never rises above it".into(),
        ));
    }
    let landing = [
        release_point.x + release_velocity.x * t,
        release_point.y + release_velocity.y * t,
    ];
    Ok((landing, t))
}

/// Applies grasp-quality release noise: the farther the object's mass sits
/// from the jaw center, the more the separation scatters the velocity. Speed
/// is rescaled by Normal(1, σ_v·k) and the direction is rotated by
/// Normal(0, σ_θ·k) about a random horizontal axis, with k = |com| / (side/4).
pub fn perturb_release<R: Rng + ?Sized>(
    velocity: Vec3,
    object: &ObjectSpec,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Vec3 {
    let k = (object.com_offset[0].hypot(object.com_offset[1])) / (object.side / 4.0);
    if k == 0.0 || noise.is_disabled() {
        return velocity;
    }
    let speed = velocity.norm();
    if speed < 1e-12 {
        return velocity;
    }
    let scale_sigma = noise.speed_sigma * k;
    let factor = if scale_sigma > 0.0 {
        Normal::new(1.0, scale_sigma).expect("finite sigma").sample(rng).max(0.0)
    } else {
        1.0
    };
    let angle_sigma = noise.angle_sigma_deg.to_radians() * k;
    let angle = if angle_sigma > 0.0 {
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let axis = Vec3::new(phi.cos(), phi.sin(), 0.0);
        let alpha: f64 = Normal::new(0.0, angle_sigma).expect("finite sigma").sample(rng);
        Some((axis, alpha))
    } else {
        None
    };
    let mut v = velocity * factor;
    if let Some((axis, alpha)) = angle {
        // Rodrigues rotation about the unit horizontal axis.
        let (sin_a, cos_a) = alpha.sin_cos();
        v = v * cos_a + axis.cross(v) * sin_a + axis * (axis.dot(v) * (1.0 - cos_a));
    }
    v
}

/// Runs one throw end to end and scores it against the bin.
///
/// `object_xy` is the pick position (the policy-visible object position); the
/// bin comes from the scene. The returned outcome never propagates a
/// degenerate-flight error: a throw with no ballistic solution is simply a
/// failure landing at the release point.
pub fn simulate_throw<R: Rng + ?Sized>(
    object_xy: [f64; 2],
    command: &ThrowCommand,
    scene: &Scene,
    robot: &RobotSpec,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<ThrowOutcome> {
    let pick = Vec3::new(object_xy[0], object_xy[1], robot.pick_height);
    let to_bin = [scene.bin.center[0] - object_xy[0], scene.bin.center[1] - object_xy[1]];
    let target = Vec3::new(
        object_xy[0] + command.target_reach * to_bin[0],
        object_xy[1] + command.target_reach * to_bin[1],
        command.target_height,
    );
    let profile = motion::plan_linear_move(pick, target, command.speed, robot)?;

    // Open signal fires when the robot passes the release point; the object
    // separates a delay later, wherever the robot is by then.
    let t_signal = time_at_distance(&profile, command.release_fraction * profile.distance());
    let t_sep = t_signal + separation_delay(&scene.object, &scene.gripper);
    let (sep_pos, sep_vel) = motion::state_at(&profile, t_sep);
    let released = perturb_release(sep_vel, &scene.object, noise, rng);

    let (landing, success) = match ballistic_land(sep_pos, released, scene.bin.rim_height) {
        Ok((landing, _flight)) => {
            let in_bin = scene.bin.opening().contains(landing[0], landing[1]);
            // A release already past the far bin wall would hit the outside
            // of the bin in flight; count it as a miss.
            let dir = Vec3::new(to_bin[0], to_bin[1], 0.0).unit().unwrap_or(Vec3::ZERO);
            let rel = [sep_pos.x - scene.bin.center[0], sep_pos.y - scene.bin.center[1]];
            let along = rel[0] * dir.x + rel[1] * dir.y;
            let past_far_wall = along > scene.bin.opening().support(dir.x, dir.y);
            (landing, in_bin && !past_far_wall)
        }
        Err(_) => ([sep_pos.x, sep_pos.y], false),
    };

    Ok(ThrowOutcome {
        success,
        landing,
        action_time: motion::move_time(&profile),
        release_point: sep_pos,
        release_velocity: released,
    })
}

/// Time at which the profile first covers distance `s` along the line
/// (clamped to the move's span).
pub fn time_at_distance(profile: &MotionProfile, s: f64) -> f64 {
    let d = profile.distance();
    let total = motion::move_time(profile);
    if s <= 0.0 || d <= 0.0 {
        return 0.0;
    }
    if s >= d {
        return total;
    }
    let a = profile.accel;
    let v = profile.peak_speed;
    let d_accel = 0.5 * a * profile.t_accel * profile.t_accel;
    let d_cruise_end = d_accel + v * profile.t_cruise;
    if s <= d_accel {
        (2.0 * s / a).sqrt()
    } else if s <= d_cruise_end {
        profile.t_accel + (s - d_accel) / v
    } else {
        total - (2.0 * (d - s) / a).sqrt()
    }
}
