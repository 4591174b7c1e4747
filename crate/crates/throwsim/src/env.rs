//! The contextual-bandit environment: per-episode scene randomization,
//! action decoding, the time-saved reward, and batched seeded rollouts.
//!
//! Every episode is one decision. A context (object and bin positions) is
//! revealed, the policy emits a raw action in [−1, 1]⁴, the throw plays out,
//! and the reward is the pick-and-place time estimate minus the robot's
//! motion time on success, or minus the motion time on failure. Episode
//! randomness is keyed by (seed, episode index) through independent ChaCha
//! streams, so rollouts are reproducible no matter how they are scheduled.

use crate::baseline::BaselinePredictor;
use crate::error::Error;
use crate::motion::{self, RobotSpec};
use crate::physics::{
    simulate_throw, BinSpec, GripperSpec, NoiseSpec, ObjectSpec, Scene, ThrowCommand, ThrowOutcome,
};
use crate::Result;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Release-fraction bounds of the action space.
pub const RELEASE_BOUNDS: [f64; 2] = [0.0, 1.0];
/// Target-reach bounds of the action space (fraction of pick→bin distance).
pub const REACH_BOUNDS: [f64; 2] = [0.05, 1.0];

/// RNG stream offset for held-out evaluation episodes (keeps them disjoint
/// from training episode streams under the same seed).
pub const EVAL_STREAM_BASE: u64 = 1 << 62;
/// RNG stream reserved for trainer internals (init, minibatch sampling).
pub const TRAINER_STREAM: u64 = 1 << 63;

/// Policy-visible episode summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub object_xy: [f64; 2],
    pub bin_xy: [f64; 2],
}

impl Context {
    pub fn features(&self) -> [f64; 4] {
        [self.object_xy[0], self.object_xy[1], self.bin_xy[0], self.bin_xy[1]]
    }

    /// Horizontal pick→bin distance.
    pub fn throw_distance(&self) -> f64 {
        (self.bin_xy[0] - self.object_xy[0]).hypot(self.bin_xy[1] - self.object_xy[1])
    }
}

/// Randomization ranges and action bounds of the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Center of the bin placement area, m.
    pub bin_area_center: [f64; 2],
    /// Bin area spans: x width and y length, m.
    pub bin_area_width: f64,
    pub bin_area_length: f64,
    /// Center of the conveyor pick window, m.
    pub pick_window_center: [f64; 2],
    pub pick_window_width: f64,
    pub pick_window_length: f64,
    /// Gripper reaction-delay distribution Normal(mean, std), s.
    pub d1_mean: f64,
    pub d1_std: f64,
    /// Gripper opening-sweep distribution Normal(mean, std), s.
    pub d2_mean: f64,
    pub d2_std: f64,
    pub gripper_stroke: f64,
    /// Object mass range, kg.
    pub mass_range: [f64; 2],
    /// Object side range, m.
    pub side_range: [f64; 2],
    /// Decoded speed bounds, m/s.
    pub speed_bounds: [f64; 2],
    /// Decoded target-height bounds, m.
    pub height_bounds: [f64; 2],
    pub bin_rim_height: f64,
    pub bin_half_extents: [f64; 2],
    pub noise: NoiseSpec,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            bin_area_center: [0.0, 0.85],
            bin_area_width: 0.6,
            bin_area_length: 0.7,
            pick_window_center: [0.0, 0.0],
            pick_window_width: 0.5,
            pick_window_length: 0.3,
            d1_mean: 0.010,
            d1_std: 0.002,
            d2_mean: 0.171,
            d2_std: 0.005,
            gripper_stroke: 0.040,
            mass_range: [0.01, 0.05],
            side_range: [0.03, 0.06],
            speed_bounds: [0.5, 10.0],
            height_bounds: [0.02, 0.5],
            bin_rim_height: 0.10,
            bin_half_extents: [0.10, 0.10],
            noise: NoiseSpec::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let ordered = |name: &str, r: [f64; 2]| -> Result<()> {
            if !(r[0] <= r[1]) || !r[0].is_finite() || !r[1].is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} range {:?} must be ordered and finite",
                    r
                )));
            }
            Ok(())
        };
        ordered("mass", self.mass_range)?;
        ordered("side", self.side_range)?;
        ordered("speed", self.speed_bounds)?;
        ordered("height", self.height_bounds)?;
        if !(self.mass_range[0] > 0.0) {
            return Err(Error::InvalidConfig("mass range must be positive".into()));
        }
        if !(self.side_range[0] > 0.0) {
            return Err(Error::InvalidConfig("side range must be positive".into()));
        }
        if !(self.speed_bounds[0] > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "speed lower bound must be positive, got {}",
                self.speed_bounds[0]
            )));
        }
        if self.bin_area_width < 0.0
            || self.bin_area_length < 0.0
            || self.pick_window_width < 0.0
            || self.pick_window_length < 0.0
        {
            return Err(Error::InvalidConfig("area spans must be ≥ 0".into()));
        }
        if self.d1_std < 0.0 || self.d2_std < 0.0 || self.d1_mean < 0.0 || self.d2_mean < 0.0 {
            return Err(Error::InvalidConfig("delay distributions must be ≥ 0".into()));
        }
        if self.gripper_stroke < 0.0 {
            return Err(Error::InvalidConfig("gripper stroke must be ≥ 0".into()));
        }
        if !(self.bin_half_extents[0] > 0.0) || !(self.bin_half_extents[1] > 0.0) {
            return Err(Error::InvalidConfig("bin half extents must be positive".into()));
        }
        if self.bin_rim_height < 0.0 {
            return Err(Error::InvalidConfig("bin rim height must be ≥ 0".into()));
        }
        self.noise.validate()?;
        Ok(())
    }
}

/// Independent RNG stream for one episode of one seed.
pub fn episode_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws one episode's context and hidden scene.
///
/// Draw order is part of the determinism contract: object xy, bin xy, d₁,
/// d₂ (each resampled while negative), mass, side, com offsets.
pub fn sample_scene<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> (Context, Scene) {
    let half = |span: f64| span * 0.5;
    let object_xy = [
        rng.gen_range(
            config.pick_window_center[0] - half(config.pick_window_width)
                ..=config.pick_window_center[0] + half(config.pick_window_width),
        ),
        rng.gen_range(
            config.pick_window_center[1] - half(config.pick_window_length)
                ..=config.pick_window_center[1] + half(config.pick_window_length),
        ),
    ];
    let bin_xy = [
        rng.gen_range(
            config.bin_area_center[0] - half(config.bin_area_width)
                ..=config.bin_area_center[0] + half(config.bin_area_width),
        ),
        rng.gen_range(
            config.bin_area_center[1] - half(config.bin_area_length)
                ..=config.bin_area_center[1] + half(config.bin_area_length),
        ),
    ];
    let truncated_normal = |rng: &mut R, mean: f64, std: f64| -> f64 {
        if std == 0.0 {
            return mean.max(0.0);
        }
        loop {
            let x: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * std + mean;
            if x >= 0.0 {
                return x;
            }
        }
    };
    let d1 = truncated_normal(rng, config.d1_mean, config.d1_std);
    let d2 = truncated_normal(rng, config.d2_mean, config.d2_std);
    let mass = rng.gen_range(config.mass_range[0]..=config.mass_range[1]);
    let side = rng.gen_range(config.side_range[0]..=config.side_range[1]);
    let lim = side / 4.0;
    let com = [rng.gen_range(-lim..=lim), rng.gen_range(-lim..=lim)];
    let context = Context { object_xy, bin_xy };
    let scene = Scene {
        object: ObjectSpec { mass, side, com_offset: com },
        gripper: GripperSpec {
            pre_open_delay: d1,
            full_open_delay: d2,
            stroke: config.gripper_stroke,
        },
        bin: BinSpec {
            center: bin_xy,
            rim_height: config.bin_rim_height,
            half_extent_x: config.bin_half_extents[0],
            half_extent_y: config.bin_half_extents[1],
        },
    };
    (context, scene)
}

/// Maps a raw policy output in [−1, 1]⁴ onto the bounded command space
/// (clamping first, so any finite vector is safe).
pub fn decode_action(raw: &[f64; 4], config: &EnvConfig) -> ThrowCommand {
    let affine = |r: f64, lo: f64, hi: f64| {
        let r = r.clamp(-1.0, 1.0);
        lo + (r + 1.0) * 0.5 * (hi - lo)
    };
    ThrowCommand {
        release_fraction: affine(raw[0], RELEASE_BOUNDS[0], RELEASE_BOUNDS[1]),
        speed: affine(raw[1], config.speed_bounds[0], config.speed_bounds[1]),
        target_height: affine(raw[2], config.height_bounds[0], config.height_bounds[1]),
        target_reach: affine(raw[3], REACH_BOUNDS[0], REACH_BOUNDS[1]),
    }
}

/// Time-saved reward: `b̂(c) − t` for a successful throw, `−t` otherwise,
/// with `t` the robot's motion time. Positive means beating pick-and-place.
pub fn compute_reward(
    outcome: &ThrowOutcome,
    context: &Context,
    baseline: &BaselinePredictor,
) -> f64 {
    if outcome.success {
        baseline.predict(context.features()) - outcome.action_time
    } else {
        -outcome.action_time
    }
}

/// One episode's record, in CSV column order.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub episode: u64,
    pub context: Context,
    pub command: ThrowCommand,
    pub outcome: ThrowOutcome,
    pub reward: f64,
}

/// What a policy wants to do this episode: either a raw action that decodes
/// through the action bounds, or (for scripted policies) a ready command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    Raw([f64; 4]),
    Command(ThrowCommand),
}

/// Anything that can drive throw episodes.
pub trait ThrowPolicy {
    fn decide(&self, context: &Context, env: &ThrowEnv, rng: &mut ChaCha8Rng) -> Decision;
    /// Stable label for tables and file names.
    fn name(&self) -> &str;
}

/// The fully assembled throw environment.
#[derive(Debug, Clone)]
pub struct ThrowEnv {
    pub config: EnvConfig,
    pub robot: RobotSpec,
    pub baseline: BaselinePredictor,
}

impl ThrowEnv {
    pub fn new(config: EnvConfig, robot: RobotSpec, baseline: BaselinePredictor) -> Result<ThrowEnv> {
        config.validate()?;
        robot.validate()?;
        if config.speed_bounds[1] > robot.max_speed {
            return Err(Error::InvalidConfig(format!(
                "speed upper bound {} exceeds robot max speed {}",
                config.speed_bounds[1], robot.max_speed
            )));
        }
        Ok(ThrowEnv { config, robot, baseline })
    }

    /// Runs a decoded command and scores it.
    pub fn execute<R: Rng + ?Sized>(
        &self,
        context: &Context,
        scene: &Scene,
        command: &ThrowCommand,
        rng: &mut R,
    ) -> Result<(f64, ThrowOutcome)> {
        let outcome = simulate_throw(
            context.object_xy,
            command,
            scene,
            &self.robot,
            &self.config.noise,
            rng,
        )?;
        let reward = compute_reward(&outcome, context, &self.baseline);
        Ok((reward, outcome))
    }

    /// Decodes a raw action and runs it: one full bandit step.
    pub fn step<R: Rng + ?Sized>(
        &self,
        context: &Context,
        scene: &Scene,
        raw_action: &[f64; 4],
        rng: &mut R,
    ) -> Result<(f64, ThrowOutcome)> {
        let command = decode_action(raw_action, &self.config);
        self.execute(context, scene, &command, rng)
    }

    /// Mean pick-and-place time over `n` sampled contexts (diagnostic; the
    /// reward uses the learned estimate, not this).
    pub fn mean_pap_time(&self, n: usize, seed: u64) -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            let mut rng = episode_rng(seed, i as u64);
            let (ctx, _) = sample_scene(&self.config, &mut rng);
            acc += motion::pap_time(ctx.object_xy, ctx.bin_xy, &self.robot, self.config.bin_rim_height);
        }
        acc / n as f64
    }

    /// Rolls out `n` episodes under a policy, one independent RNG stream per
    /// episode.
    pub fn run_episodes(
        &self,
        policy: &dyn ThrowPolicy,
        n: u64,
        seed: u64,
    ) -> Result<Vec<EpisodeRecord>> {
        if n == 0 {
            return Err(Error::InvalidArgument("run_episodes: n must be ≥ 1".into()));
        }
        let mut records = Vec::with_capacity(n as usize);
        for episode in 0..n {
            let mut rng = episode_rng(seed, episode);
            let (context, scene) = sample_scene(&self.config, &mut rng);
            let command = match policy.decide(&context, self, &mut rng) {
                Decision::Raw(raw) => decode_action(&raw, &self.config),
                Decision::Command(c) => c,
            };
            let (reward, outcome) = self.execute(&context, &scene, &command, &mut rng)?;
            records.push(EpisodeRecord { seed, episode, context, command, outcome, reward });
        }
        Ok(records)
    }
}

/// CSV export of an episode stream (full-precision floats so metrics can be
/// recomputed bit-exactly from the file).
pub fn episodes_to_csv(records: &[EpisodeRecord]) -> String {
    let mut out = String::from(
        "seed,episode,object_x,object_y,bin_x,bin_y,release_fraction,speed,target_height,target_reach,success,time_s,landing_x,landing_y,reward\n",
    );
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.episode,
            r.context.object_xy[0],
            r.context.object_xy[1],
            r.context.bin_xy[0],
            r.context.bin_xy[1],
            r.command.release_fraction,
            r.command.speed,
            r.command.target_height,
            r.command.target_reach,
            r.outcome.success as u8,
            r.outcome.action_time,
            r.outcome.landing[0],
            r.outcome.landing[1],
            r.reward
        )
        .expect("string write");
    }
    out
}

/// One (context, action, reward) interaction, the unit trainers consume.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub context: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub success: bool,
}

/// A one-step environment trainers can interact with: the throw environment
/// or a synthetic test bandit.
pub trait BanditEnv {
    fn context_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Plays episode `stream` of `seed`: samples a context, queries the
    /// actor (which may use the episode RNG for exploration), and scores.
    fn play(
        &self,
        seed: u64,
        stream: u64,
        actor: &mut dyn FnMut(&[f64], &mut ChaCha8Rng) -> Vec<f64>,
    ) -> Transition;
}

impl BanditEnv for ThrowEnv {
    fn context_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        4
    }

    fn play(
        &self,
        seed: u64,
        stream: u64,
        actor: &mut dyn FnMut(&[f64], &mut ChaCha8Rng) -> Vec<f64>,
    ) -> Transition {
        let mut rng = episode_rng(seed, stream);
        let (context, scene) = sample_scene(&self.config, &mut rng);
        let features = context.features();
        let action = actor(&features, &mut rng);
        debug_assert_eq!(action.len(), 4);
        let raw = [action[0], action[1], action[2], action[3]];
        let (reward, outcome) = self
            .step(&context, &scene, &raw, &mut rng)
            .expect("bounded decoded command is always simulable");
        Transition { context: features.to_vec(), action, reward, success: outcome.success }
    }
}

/// Known-optimum 1-D synthetic bandit for validating trainers: the reward is
/// −(a − a*(c))² with an analytically known best action a*(c).
#[derive(Debug, Clone, Copy)]
pub struct SyntheticBandit {
    pub kind: SyntheticKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticKind {
    /// a* is the same constant everywhere.
    Constant(f64),
    /// a* = sin(c) with c uniform in [−π, π].
    Sine,
    /// Degenerate bandit: reward 0 no matter what (every policy ties).
    Flat,
}

impl SyntheticBandit {
    pub fn optimal_action(&self, context: f64) -> f64 {
        match self.kind {
            SyntheticKind::Constant(a) => a,
            SyntheticKind::Sine => context.sin(),
            SyntheticKind::Flat => 0.0,
        }
    }
}

impl BanditEnv for SyntheticBandit {
    fn context_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn play(
        &self,
        seed: u64,
        stream: u64,
        actor: &mut dyn FnMut(&[f64], &mut ChaCha8Rng) -> Vec<f64>,
    ) -> Transition {
        let mut rng = episode_rng(seed, stream);
        let c = match self.kind {
            SyntheticKind::Constant(_) | SyntheticKind::Flat => rng.gen_range(-1.0..=1.0),
            SyntheticKind::Sine => rng.gen_range(-std::f64::consts::PI..=std::f64::consts::PI),
        };
        let action = actor(&[c], &mut rng);
        debug_assert_eq!(action.len(), 1);
        if self.kind == SyntheticKind::Flat {
            return Transition { context: vec![c], action, reward: 0.0, success: true };
        }
        let a_star = self.optimal_action(c);
        let err = action[0] - a_star;
        Transition {
            context: vec![c],
            action,
            reward: -err * err,
            success: err.abs() < 0.1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::BaselinePredictor;

    fn test_env() -> ThrowEnv {
        ThrowEnv::new(
            EnvConfig::default(),
            RobotSpec::default(),
            BaselinePredictor::constant(0.18),
        )
        .unwrap()
    }

    #[test]
    fn scene_sampling_covers_the_bin_area() {
        let config = EnvConfig::default();
        let mut rng = episode_rng(3, 0);
        let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut d2_acc = 0.0;
        let n = 10_000;
        for _ in 0..n {
            let (ctx, scene) = sample_scene(&config, &mut rng);
            min_x = min_x.min(ctx.bin_xy[0]);
            max_x = max_x.max(ctx.bin_xy[0]);
            min_y = min_y.min(ctx.bin_xy[1]);
            max_y = max_y.max(ctx.bin_xy[1]);
            d2_acc += scene.gripper.full_open_delay;
            assert_eq!(ctx.bin_xy, scene.bin.center);
        }
        assert!(max_x - min_x >= 0.95 * config.bin_area_width, "x span {}", max_x - min_x);
        assert!(max_y - min_y >= 0.95 * config.bin_area_length, "y span {}", max_y - min_y);
        let d2_mean = d2_acc / n as f64;
        assert!((d2_mean - config.d2_mean).abs() < 0.001, "mean d2 {d2_mean}");
    }

    #[test]
    fn degenerate_config_yields_identical_samples() {
        let config = EnvConfig {
            bin_area_width: 0.0,
            bin_area_length: 0.0,
            pick_window_width: 0.0,
            pick_window_length: 0.0,
            d1_std: 0.0,
            d2_std: 0.0,
            mass_range: [0.02, 0.02],
            side_range: [0.04, 0.04],
            ..EnvConfig::default()
        };
        // Center-of-mass offsets still vary; pin them by checking everything else.
        let mut rng = episode_rng(1, 0);
        let (c0, s0) = sample_scene(&config, &mut rng);
        for _ in 0..100 {
            let (c, s) = sample_scene(&config, &mut rng);
            assert_eq!(c, c0);
            assert_eq!(s.gripper, s0.gripper);
            assert_eq!(s.bin, s0.bin);
            assert_eq!(s.object.mass, s0.object.mass);
            assert_eq!(s.object.side, s0.object.side);
        }
    }

    #[test]
    fn decode_endpoints_and_midpoints() {
        let config = EnvConfig::default();
        let lo = decode_action(&[-1.0, -1.0, -1.0, -1.0], &config);
        assert_eq!(
            (lo.release_fraction, lo.speed, lo.target_height, lo.target_reach),
            (0.0, 0.5, 0.02, 0.05)
        );
        let hi = decode_action(&[1.0, 1.0, 1.0, 1.0], &config);
        assert_eq!(
            (hi.release_fraction, hi.speed, hi.target_height, hi.target_reach),
            (1.0, 10.0, 0.5, 1.0)
        );
        let mid = decode_action(&[0.0, 0.0, 0.0, 0.0], &config);
        assert!((mid.release_fraction - 0.5).abs() < 1e-12);
        assert!((mid.speed - 5.25).abs() < 1e-12);
        assert!((mid.target_height - 0.26).abs() < 1e-12);
        assert!((mid.target_reach - 0.525).abs() < 1e-12);
    }

    #[test]
    fn decode_clamps_wild_inputs() {
        let config = EnvConfig::default();
        let cmd = decode_action(&[-1e9, 1e9, f64::MAX, -2.0], &config);
        assert_eq!(cmd.release_fraction, 0.0);
        assert_eq!(cmd.speed, 10.0);
        assert_eq!(cmd.target_height, 0.5);
        assert_eq!(cmd.target_reach, 0.05);
    }

    #[test]
    fn reward_frozen_cases() {
        use crate::geom::Vec3;
        let baseline = BaselinePredictor::constant(0.180);
        let ctx = Context { object_xy: [0.0, 0.0], bin_xy: [0.0, 0.9] };
        let mut outcome = ThrowOutcome {
            success: true,
            landing: [0.0, 0.9],
            action_time: 0.107,
            release_point: Vec3::ZERO,
            release_velocity: Vec3::ZERO,
        };
        assert!((compute_reward(&outcome, &ctx, &baseline) - 0.073).abs() < 1e-12);
        outcome.success = false;
        outcome.action_time = 0.100;
        assert!((compute_reward(&outcome, &ctx, &baseline) + 0.100).abs() < 1e-12);
        outcome.success = true;
        outcome.action_time = 0.180;
        assert!(compute_reward(&outcome, &ctx, &baseline).abs() < 1e-12);
    }

    #[test]
    fn reward_bounded_by_baseline_and_negative_on_failure() {
        let env = test_env();
        let mut rng = episode_rng(5, 9);
        for i in 0..500 {
            let mut ep_rng = episode_rng(5, i);
            let (ctx, scene) = sample_scene(&env.config, &mut ep_rng);
            let raw = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let (reward, outcome) = env.step(&ctx, &scene, &raw, &mut ep_rng).unwrap();
            assert!(reward <= env.baseline.predict(ctx.features()) + 1e-12);
            if !outcome.success {
                assert!(reward < 0.0);
            }
        }
    }

    #[test]
    fn step_is_idempotent_per_seed() {
        let env = test_env();
        let run = || {
            let mut rng = episode_rng(11, 3);
            let (ctx, scene) = sample_scene(&env.config, &mut rng);
            env.step(&ctx, &scene, &[0.2, -0.3, 0.5, 0.9], &mut rng).unwrap()
        };
        let (r1, o1) = run();
        let (r2, o2) = run();
        assert_eq!(r1, r2);
        assert_eq!(o1, o2);
    }

    struct FixedPolicy([f64; 4]);
    impl ThrowPolicy for FixedPolicy {
        fn decide(&self, _: &Context, _: &ThrowEnv, _: &mut ChaCha8Rng) -> Decision {
            Decision::Raw(self.0)
        }
        fn name(&self) -> &str {
            "fixed"
        }
    }

    #[test]
    fn run_episodes_rejects_zero_and_is_deterministic() {
        let env = test_env();
        let policy = FixedPolicy([0.0, 0.0, 0.0, 0.0]);
        assert!(env.run_episodes(&policy, 0, 1).is_err());
        let a = env.run_episodes(&policy, 50, 1).unwrap();
        let b = env.run_episodes(&policy, 50, 1).unwrap();
        assert_eq!(a, b);
        let csv_a = episodes_to_csv(&a);
        let csv_b = episodes_to_csv(&b);
        assert_eq!(csv_a, csv_b);
        assert_eq!(csv_a.lines().count(), 51); // header + 50 rows
    }

    #[test]
    fn mean_pap_time_within_sanity_envelope() {
        let env = test_env();
        let mean = env.mean_pap_time(10_000, 42);
        assert!(
            (0.12..=0.25).contains(&mean),
            "mean pick-and-place time {mean} outside [0.12, 0.25]"
        );
    }

    #[test]
    fn synthetic_bandit_scores_known_optimum() {
        let bandit = SyntheticBandit { kind: SyntheticKind::Sine };
        let mut perfect = |c: &[f64], _rng: &mut ChaCha8Rng| vec![c[0].sin()];
        for i in 0..100 {
            let t = bandit.play(7, i, &mut perfect);
            assert!(t.reward.abs() < 1e-12);
            assert!(t.success);
        }
        let mut bad = |_c: &[f64], _rng: &mut ChaCha8Rng| vec![2.0];
        let t = bandit.play(7, 0, &mut bad);
        assert!(t.reward < 0.0);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut config = EnvConfig::default();
        config.speed_bounds = [0.0, 10.0];
        assert!(config.validate().is_err());
        let mut config = EnvConfig::default();
        config.mass_range = [0.05, 0.01];
        assert!(config.validate().is_err());
        let config = EnvConfig { speed_bounds: [0.5, 12.0], ..EnvConfig::default() };
        assert!(ThrowEnv::new(config, RobotSpec::default(), BaselinePredictor::constant(0.18))
            .is_err());
    }
}
