//! Closed-form linear-move kinematics for the delta robot.
//!
//! Every robot move is a straight line driven by a symmetric
//! accelerate–cruise–decelerate speed profile (triangular when the speed cap
//! is never reached). The pick-and-place reference time — one linear move
//! from the pick point to a hover point above the bin — is defined here too,
//! since it is pure kinematics; it is both the competing policy's cost and
//! the training signal for the learned reward baseline.

use crate::error::Error;
use crate::geom::Vec3;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Kinematic limits and fixed grasp heights of the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotSpec {
    /// Top translational speed, m/s.
    pub max_speed: f64,
    /// Constant acceleration/deceleration magnitude, m/s².
    pub max_accel: f64,
    /// Grasp height above the conveyor, m.
    pub pick_height: f64,
    /// Drop height above the bin rim used by pick-and-place, m.
    pub place_height: f64,
}

impl Default for RobotSpec {
    fn default() -> Self {
        RobotSpec {
            max_speed: 10.0,
            max_accel: 100.0,
            pick_height: 0.05,
            place_height: 0.05,
        }
    }
}

impl RobotSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_speed > 0.0) || !self.max_speed.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "robot.max_speed must be positive and finite, got {}",
                self.max_speed
            )));
        }
        if !(self.max_accel > 0.0) || !self.max_accel.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "robot.max_accel must be positive and finite, got {}",
                self.max_accel
            )));
        }
        if !(self.pick_height >= 0.0) || !(self.place_height >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "robot heights must be ≥ 0, got pick {} place {}",
                self.pick_height, self.place_height
            )));
        }
        Ok(())
    }
}

/// Symmetric trapezoidal/triangular velocity profile of one linear move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    pub start: Vec3,
    pub end: Vec3,
    /// Speed actually reached at the top of the profile, m/s.
    pub peak_speed: f64,
    /// Acceleration magnitude used by the profile, m/s².
    pub accel: f64,
    pub t_accel: f64,
    pub t_cruise: f64,
    pub t_decel: f64,
}

impl MotionProfile {
    /// Straight-line distance covered by the move.
    pub fn distance(&self) -> f64 {
        (self.end - self.start).norm()
    }

    /// Unit direction of travel; zero vector for a degenerate (d=0) move.
    pub fn direction(&self) -> Vec3 {
        (self.end - self.start).unit().unwrap_or(Vec3::ZERO)
    }

    /// True when the speed cap was never reached.
    pub fn is_triangular(&self) -> bool {
        self.t_cruise == 0.0
    }
}

/// Plans the time-minimal symmetric profile for the line `start → end`
/// under the robot's acceleration bound and the given speed cap.
pub fn plan_linear_move(
    start: Vec3,
    end: Vec3,
    speed_cap: f64,
    robot: &RobotSpec,
) -> Result<MotionProfile> {
    if !start.is_finite() || !end.is_finite() || !speed_cap.is_finite() {
        return Err(Error::InvalidArgument(
            "plan_linear_move: non-finite start/end/speed_cap".into(),
        ));
    }
    if !(speed_cap > 0.0 && speed_cap <= robot.max_speed) {
        return Err(Error::InvalidArgument(format!(
            "speed cap {} outside (0, {}]",
            speed_cap, robot.max_speed
        )));
    }
    let a = robot.max_accel;
    let d = (end - start).norm();
    if d <= 0.0 {
        return Ok(MotionProfile {
            start,
            end,
            peak_speed: 0.0,
            accel: a,
            t_accel: 0.0,
            t_cruise: 0.0,
            t_decel: 0.0,
        });
    }
    let v_tri = (a * d).sqrt();
    let profile = if v_tri < speed_cap {
        // Speed cap never reached: accelerate to √(a·d) and brake.
        let t_half = (d / a).sqrt();
        MotionProfile {
            start,
            end,
            peak_speed: v_tri,
            accel: a,
            t_accel: t_half,
            t_cruise: 0.0,
            t_decel: t_half,
        }
    } else {
        let v = speed_cap;
        MotionProfile {
            start,
            end,
            peak_speed: v,
            accel: a,
            t_accel: v / a,
            t_cruise: (d - v * v / a) / v,
            t_decel: v / a,
        }
    };
    Ok(profile)
}

/// Total duration of the move.
pub fn move_time(profile: &MotionProfile) -> f64 {
    profile.t_accel + profile.t_cruise + profile.t_decel
}

/// Robot position and velocity at time `t` from motion start.
///
/// Negative times clamp to the start state; times past the end of the move
/// return the end point at rest.
pub fn state_at(profile: &MotionProfile, t: f64) -> (Vec3, Vec3) {
    let dir = profile.direction();
    let total = move_time(profile);
    if t <= 0.0 {
        return (profile.start, Vec3::ZERO);
    }
    if t >= total {
        return (profile.end, Vec3::ZERO);
    }
    let a = profile.accel;
    let v = profile.peak_speed;
    let d_accel = 0.5 * a * profile.t_accel * profile.t_accel;
    let (s, speed) = if t < profile.t_accel {
        (0.5 * a * t * t, a * t)
    } else if t < profile.t_accel + profile.t_cruise {
        let tc = t - profile.t_accel;
        (d_accel + v * tc, v)
    } else {
        let remaining = total - t;
        (profile.distance() - 0.5 * a * remaining * remaining, a * remaining)
    };
    (profile.start + dir * s, dir * speed)
}

/// Duration of the reference pick-and-place move for one context: a single
/// linear move from the pick point (object position at pick height) to the
/// hover point above the bin center (rim height + place height), planned at
/// the robot's top speed.
///
/// Takes raw coordinates rather than an environment context so the motion
/// layer stays free of environment types.
pub fn pap_time(object_xy: [f64; 2], bin_xy: [f64; 2], robot: &RobotSpec, rim_height: f64) -> f64 {
    let pick = Vec3::new(object_xy[0], object_xy[1], robot.pick_height);
    let place = Vec3::new(bin_xy[0], bin_xy[1], rim_height + robot.place_height);
    let profile = plan_linear_move(pick, place, robot.max_speed, robot)
        .expect("pap_time: finite inputs and positive max speed");
    move_time(&profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn default_robot() -> RobotSpec {
        RobotSpec::default()
    }

    #[test]
    fn triangular_move_matches_closed_form() {
        // d = 0.5 m at v=10, a=100: cap unreached, total 2·√(d/a).
        let p = plan_linear_move(
            Vec3::ZERO,
            Vec3::new(0.5, 0.0, 0.0),
            10.0,
            &default_robot(),
        )
        .unwrap();
        assert!(p.is_triangular());
        assert!((move_time(&p) - 0.141_421_356_237_309_5).abs() < 1e-9);
        assert!((p.peak_speed - 50f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn trapezoidal_move_matches_closed_form() {
        // d = 2.0 m at v=10, a=100: 0.1 s accel + 0.1 s cruise·(d−v²/a)/v + 0.1 s decel.
        let p = plan_linear_move(
            Vec3::ZERO,
            Vec3::new(0.0, 2.0, 0.0),
            10.0,
            &default_robot(),
        )
        .unwrap();
        assert!(!p.is_triangular());
        assert!((move_time(&p) - 0.300_000_000_0).abs() < 1e-9);
        assert!((p.t_cruise - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_distance_is_degenerate() {
        let p = plan_linear_move(
            Vec3::new(1.0, 2.0, 3.0),
            Vec3::new(1.0, 2.0, 3.0),
            10.0,
            &default_robot(),
        )
        .unwrap();
        assert_eq!(move_time(&p), 0.0);
        let (pos, vel) = state_at(&p, 0.5);
        assert_eq!(pos, Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(vel, Vec3::ZERO);
    }

    #[test]
    fn rejects_bad_inputs() {
        let r = default_robot();
        assert!(plan_linear_move(Vec3::ZERO, Vec3::new(f64::NAN, 0.0, 0.0), 10.0, &r).is_err());
        assert!(plan_linear_move(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), 0.0, &r).is_err());
        assert!(plan_linear_move(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), 10.1, &r).is_err());
        assert!(plan_linear_move(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), f64::INFINITY, &r).is_err());
    }

    #[test]
    fn state_at_frozen_points() {
        let r = default_robot();
        let p2 = plan_linear_move(Vec3::ZERO, Vec3::new(0.0, 2.0, 0.0), 10.0, &r).unwrap();
        // End of the acceleration phase of the 2 m move: ½·100·0.1² = 0.5 m, 10 m/s.
        let (pos, vel) = state_at(&p2, 0.1);
        assert!((pos.y - 0.5).abs() < 1e-12);
        assert!((vel.y - 10.0).abs() < 1e-12);
        // Initial condition.
        let (pos0, vel0) = state_at(&p2, 0.0);
        assert_eq!(pos0, Vec3::ZERO);
        assert_eq!(vel0, Vec3::ZERO);
        // Clamp past the end.
        let p05 = plan_linear_move(Vec3::ZERO, Vec3::new(0.5, 0.0, 0.0), 10.0, &r).unwrap();
        let (pos_end, vel_end) = state_at(&p05, 1.0);
        assert_eq!(pos_end, Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(vel_end, Vec3::ZERO);
    }

    #[test]
    fn pap_time_frozen_example() {
        // Geometry chosen so the 3D pick→place distance is exactly 0.9 m:
        // horizontal √0.8, vertical 0.15 − 0.05 = 0.1.
        let robot = default_robot();
        let dxy = 0.8f64.sqrt();
        let t = pap_time([0.0, 0.0], [0.0, dxy], &robot, 0.10);
        assert!((t - 0.189_736_659_610_102_9).abs() < 1e-9);
    }

    #[test]
    fn pap_time_goes_to_zero_with_distance() {
        // With rim at conveyor level and place height = pick height the move
        // degenerates when the bin sits directly under the object.
        let robot = RobotSpec { place_height: 0.05, pick_height: 0.05, ..default_robot() };
        let t = pap_time([0.3, 0.2], [0.3, 0.2], &robot, 0.0);
        assert_eq!(t, 0.0);
    }

    /// Independent 1 kHz bang-bang simulation: accelerate while braking room
    /// remains, then brake; time until the controller is at the goal and at
    /// rest. Trapezoidal integration is exact for piecewise-linear speed.
    fn simulate_bang_bang(d: f64, v_cap: f64, a: f64, dt: f64) -> f64 {
        let (mut x, mut v, mut t) = (0.0f64, 0.0f64, 0.0f64);
        let rest = 1.5 * a * dt;
        while !(x >= d && v <= rest) {
            let braking = v * v / (2.0 * a);
            let v_next = if d - x > braking + v * dt {
                (v + a * dt).min(v_cap)
            } else {
                (v - a * dt).max(0.0)
            };
            x += 0.5 * (v + v_next) * dt;
            v = v_next;
            t += dt;
            assert!(t < 60.0, "bang-bang controller failed to settle");
        }
        t
    }

    #[test]
    fn time_optimality_against_simulated_bang_bang() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..100 {
            let d = rng.gen_range(0.05..3.0);
            let a = rng.gen_range(20.0..200.0);
            let v = rng.gen_range(1.0..12.0);
            let robot = RobotSpec { max_speed: v, max_accel: a, ..default_robot() };
            let p = plan_linear_move(Vec3::ZERO, Vec3::new(d, 0.0, 0.0), v, &robot).unwrap();
            let t_formula = move_time(&p);
            let t_sim = simulate_bang_bang(d, v, a, 1e-3);
            // The discretized controller stops at the goal too; it can only
            // be slower than the optimum, up to grid slop at the two phase
            // switches plus a possible stall-recovery hop near the goal.
            assert!(
                t_sim >= t_formula - 2e-3,
                "bang-bang beat the closed form: d={d} v={v} a={a} sim={t_sim} formula={t_formula}"
            );
            assert!(
                t_sim - t_formula < 0.05 * t_formula + 20e-3,
                "bang-bang much slower than closed form: d={d} v={v} a={a} sim={t_sim} formula={t_formula}"
            );
        }
    }

    #[test]
    fn no_feasible_profile_beats_the_planner() {
        // The planned time is the minimum over every symmetric profile that
        // respects the bounds: any weaker acceleration or lower peak speed
        // covering the same distance takes at least as long.
        let mut rng = StdRng::seed_from_u64(19);
        for _ in 0..100 {
            let d = rng.gen_range(0.05..3.0);
            let a = rng.gen_range(20.0..200.0);
            let v = rng.gen_range(1.0..12.0);
            let robot = RobotSpec { max_speed: v, max_accel: a, ..default_robot() };
            let p = plan_linear_move(Vec3::ZERO, Vec3::new(d, 0.0, 0.0), v, &robot).unwrap();
            let t_star = move_time(&p);
            for _ in 0..20 {
                let a_sub = rng.gen_range(0.1..=1.0) * a;
                let peak_max = (a_sub * d).sqrt().min(v);
                let v_peak = rng.gen_range(0.05..=1.0) * peak_max;
                // Symmetric profile at accel a_sub with peak v_peak: cruise
                // length follows from the distance budget.
                let t_candidate = v_peak / a_sub + d / v_peak;
                assert!(
                    t_candidate >= t_star - 1e-9,
                    "feasible profile beat the planner: d={d} v={v} a={a} \
                     a_sub={a_sub} v_peak={v_peak} t={t_candidate} t*={t_star}"
                );
            }
        }
    }

    #[test]
    fn position_and_speed_are_continuous() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let end = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-0.5..0.5),
            );
            let v = rng.gen_range(0.5..10.0);
            let robot = default_robot();
            let p = plan_linear_move(Vec3::ZERO, end, v, &robot).unwrap();
            let total = move_time(&p);
            let dt = 1e-3;
            let mut t = 0.0;
            let (mut prev_pos, mut prev_vel) = state_at(&p, 0.0);
            while t < total + 5.0 * dt {
                t += dt;
                let (pos, vel) = state_at(&p, t);
                let dpos = (pos - prev_pos).norm();
                let dvel = (vel - prev_vel).norm();
                assert!(dpos <= robot.max_speed * dt + 0.5 * robot.max_accel * dt * dt + 1e-9);
                assert!(dvel <= robot.max_accel * dt + 1e-9);
                prev_pos = pos;
                prev_vel = vel;
            }
        }
    }

    #[test]
    fn reverse_move_has_equal_duration() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..50 {
            let a = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0);
            let b = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.4);
            let v = rng.gen_range(0.5..10.0);
            let robot = default_robot();
            let fwd = plan_linear_move(a, b, v, &robot).unwrap();
            let back = plan_linear_move(b, a, v, &robot).unwrap();
            assert!((move_time(&fwd) - move_time(&back)).abs() < 1e-12);
        }
    }

    #[test]
    fn pap_time_monotonic_in_distance() {
        let robot = default_robot();
        let mut prev = 0.0;
        for i in 0..200 {
            let dist = 0.01 + i as f64 * 0.01;
            let t = pap_time([0.0, 0.0], [0.0, dist], &robot, 0.10);
            assert!(t >= prev - 1e-12, "pap_time not monotone at d={dist}");
            prev = t;
        }
    }

    #[test]
    fn profile_covers_exact_distance() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..100 {
            let end = Vec3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-1.0..1.0),
            );
            let v = rng.gen_range(0.5..10.0);
            let p = plan_linear_move(Vec3::ZERO, end, v, &default_robot()).unwrap();
            // Distance implied by the phase times matches |end − start|.
            let d_implied = 0.5 * p.accel * p.t_accel * p.t_accel
                + p.peak_speed * p.t_cruise
                + 0.5 * p.accel * p.t_decel * p.t_decel;
            assert!((d_implied - p.distance()).abs() < 1e-9);
        }
    }
}
