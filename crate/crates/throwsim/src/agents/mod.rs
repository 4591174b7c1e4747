//! Policies: one-step adaptations of TD3, SAC, and PPO, plus the scripted
//! pick-and-place policy and the analytical time-optimal throw competitor.
//!
//! The learners are faithful specializations of the usual episodic
//! algorithms to a contextual bandit: every episode is terminal, so critic
//! targets are the observed reward (no bootstrap term and no discount) and
//! PPO's advantage degenerates to `r − V(c)`. Machinery that the one-step
//! case makes inert (target networks, GAE λ) is kept and documented so the
//! correspondence with the full algorithms stays visible.

mod hassan;
mod ppo;
mod sac;
mod td3;

pub use hassan::{hassan_solve, HassanPolicy};
pub use ppo::ppo_train;
pub use sac::sac_train;
pub use td3::td3_train;

use crate::env::{BanditEnv, Context, Decision, ThrowEnv, ThrowPolicy, EVAL_STREAM_BASE};
use crate::error::Error;
use crate::motion::{pap_time, RobotSpec};
use crate::nn::{Activation, Mlp, LOG_STD_MAX, LOG_STD_MIN};
use crate::physics::{separation_delay, Scene, ThrowCommand};
use crate::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

/// Number of held-out deterministic episodes behind each learning-curve point.
pub const EVAL_EPISODES: u64 = 200;
/// Learning-curve sampling interval, episodes.
pub const CURVE_INTERVAL: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoTag {
    Td3,
    Sac,
    Ppo,
}

impl fmt::Display for AlgoTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlgoTag::Td3 => "td3",
            AlgoTag::Sac => "sac",
            AlgoTag::Ppo => "ppo",
        })
    }
}

impl FromStr for AlgoTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<AlgoTag> {
        match s {
            "td3" => Ok(AlgoTag::Td3),
            "sac" => Ok(AlgoTag::Sac),
            "ppo" => Ok(AlgoTag::Ppo),
            other => Err(Error::InvalidArgument(format!(
                "unknown algorithm '{other}' (expected td3|sac|ppo)"
            ))),
        }
    }
}

/// One learning-curve sample: held-out evaluation after `episode` episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub episode: u64,
    pub mean_eval_reward: f64,
    pub success_rate: f64,
}

pub fn curve_to_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("episode,mean_eval_reward,success_rate\n");
    for p in curve {
        writeln!(out, "{},{},{}", p.episode, p.mean_eval_reward, p.success_rate)
            .expect("string write");
    }
    out
}

/// A trained policy: the actor network plus whatever the algorithm needs to
/// act (PPO carries its state-independent log σ).
#[derive(Debug, Clone)]
pub struct LearnedPolicy {
    pub algo: AlgoTag,
    pub actor: Mlp,
    /// PPO's state-independent log standard deviations (empty otherwise).
    pub log_std: Vec<f64>,
}

impl LearnedPolicy {
    pub fn context_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        match self.algo {
            AlgoTag::Sac => self.actor.output_dim() / 2,
            _ => self.actor.output_dim(),
        }
    }

    /// Raw action in [−1, 1]^dim. Deterministic mode returns the policy
    /// mean (TD3 is deterministic either way; its exploration noise is a
    /// training-loop concern).
    pub fn act(&self, context: &[f64], deterministic: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let out = self.actor.forward(context).expect("shape fixed at construction");
        match self.algo {
            AlgoTag::Td3 => out, // final tanh layer keeps it in bounds
            AlgoTag::Sac => {
                let dim = out.len() / 2;
                if deterministic {
                    out[..dim].iter().map(|m| m.tanh()).collect()
                } else {
                    let log_std: Vec<f64> =
                        out[dim..].iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
                    let (u, _eps) = crate::nn::gaussian_sample(&out[..dim], &log_std, rng);
                    u.iter().map(|v| v.tanh()).collect()
                }
            }
            AlgoTag::Ppo => {
                if deterministic {
                    out.iter().map(|v| v.clamp(-1.0, 1.0)).collect()
                } else {
                    let log_std: Vec<f64> = self
                        .log_std
                        .iter()
                        .map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX))
                        .collect();
                    let (u, _eps) = crate::nn::gaussian_sample(&out, &log_std, rng);
                    u.iter().map(|v| v.clamp(-1.0, 1.0)).collect()
                }
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.actor.all_finite() && self.log_std.iter().all(|v| v.is_finite())
    }
}

/// Training output: the policy and its learning curve.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub policy: LearnedPolicy,
    pub curve: Vec<CurvePoint>,
}

/// Mean held-out reward and success rate of the deterministic policy.
pub fn evaluate_policy(env: &dyn BanditEnv, policy: &LearnedPolicy, seed: u64, n: u64) -> (f64, f64) {
    let mut reward = 0.0;
    let mut successes = 0u64;
    for i in 0..n {
        let t = env.play(seed, EVAL_STREAM_BASE + i, &mut |c, erng| policy.act(c, true, erng));
        reward += t.reward;
        successes += t.success as u64;
    }
    (reward / n as f64, successes as f64 / n as f64)
}

/// Uniform-sampling ring buffer of (context, raw action, reward) triples.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    cdim: usize,
    adim: usize,
    capacity: usize,
    len: usize,
    next: usize,
    contexts: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, cdim: usize, adim: usize) -> ReplayBuffer {
        assert!(capacity > 0 && cdim > 0 && adim > 0);
        ReplayBuffer {
            cdim,
            adim,
            capacity,
            len: 0,
            next: 0,
            contexts: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, context: &[f64], action: &[f64], reward: f64) {
        assert_eq!(context.len(), self.cdim);
        assert_eq!(action.len(), self.adim);
        if self.len < self.capacity {
            self.contexts.extend_from_slice(context);
            self.actions.extend_from_slice(action);
            self.rewards.push(reward);
            self.len += 1;
        } else {
            let i = self.next;
            self.contexts[i * self.cdim..(i + 1) * self.cdim].copy_from_slice(context);
            self.actions[i * self.adim..(i + 1) * self.adim].copy_from_slice(action);
            self.rewards[i] = reward;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn context(&self, i: usize) -> &[f64] {
        &self.contexts[i * self.cdim..(i + 1) * self.cdim]
    }

    pub fn action(&self, i: usize) -> &[f64] {
        &self.actions[i * self.adim..(i + 1) * self.adim]
    }

    pub fn reward(&self, i: usize) -> f64 {
        self.rewards[i]
    }

    /// Uniform independent indices (with replacement, standard replay).
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R, out: &mut Vec<usize>) {
        out.clear();
        for _ in 0..batch {
            out.push(rng.gen_range(0..self.len));
        }
    }
}

/// TD3 exploration-noise family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    None,
    Normal,
    OrnsteinUhlenbeck,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::None => "none",
            NoiseKind::Normal => "normal",
            NoiseKind::OrnsteinUhlenbeck => "ornstein-uhlenbeck",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Td3Hp {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub tau: f64,
    pub train_freq: u64,
    pub noise: NoiseKind,
    pub noise_sigma: f64,
    pub net_arch: Vec<usize>,
    pub learning_starts: u64,
    pub buffer_capacity: usize,
    pub policy_delay: u64,
}

impl Default for Td3Hp {
    fn default() -> Self {
        Td3Hp {
            learning_rate: 1e-3,
            batch_size: 100,
            tau: 0.005,
            train_freq: 1,
            noise: NoiseKind::None,
            noise_sigma: 0.0,
            net_arch: vec![400, 300],
            learning_starts: 100,
            buffer_capacity: 1_000_000,
            policy_delay: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacHp {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub learning_starts: u64,
    pub train_freq: u64,
    pub tau: f64,
    pub init_log_std: f64,
    /// Kept for preset fidelity; state-dependent-exploration resampling is
    /// out of scope, so this field is inert.
    pub sde_sample_freq: i64,
    pub net_arch: Vec<usize>,
    pub buffer_capacity: usize,
}

impl Default for SacHp {
    fn default() -> Self {
        SacHp {
            learning_rate: 3e-4,
            batch_size: 256,
            learning_starts: 100,
            train_freq: 1,
            tau: 0.005,
            init_log_std: -3.0,
            sde_sample_freq: -1,
            net_arch: vec![256, 256],
            buffer_capacity: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoHp {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub ent_coef: f64,
    pub clip_range: f64,
    pub n_steps: u64,
    pub n_epochs: usize,
    /// Inert at episode length 1 (the advantage is exactly r − V(c));
    /// kept as a field for preset fidelity.
    pub gae_lambda: f64,
    pub max_grad_norm: f64,
    pub vf_coef: f64,
    pub init_log_std: f64,
    /// Inert; see SacHp.
    pub sde_sample_freq: i64,
    pub net_arch: Vec<usize>,
    pub activation: Activation,
}

impl Default for PpoHp {
    fn default() -> Self {
        PpoHp {
            learning_rate: 3e-4,
            batch_size: 64,
            ent_coef: 0.0,
            clip_range: 0.2,
            n_steps: 2048,
            n_epochs: 10,
            gae_lambda: 0.95,
            max_grad_norm: 0.5,
            vf_coef: 0.5,
            init_log_std: 0.0,
            sde_sample_freq: -1,
            net_arch: vec![64, 64],
            activation: Activation::Tanh,
        }
    }
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("hyperparameters: {msg}")))
    }
}

impl Td3Hp {
    pub fn validate(&self) -> Result<()> {
        check(self.learning_rate.is_finite() && self.learning_rate >= 0.0, "learning rate ≥ 0")?;
        check(self.batch_size >= 1, "batch size ≥ 1")?;
        check((0.0..=1.0).contains(&self.tau), "τ in [0,1]")?;
        check(self.train_freq >= 1, "train frequency ≥ 1")?;
        check(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite(), "noise σ ≥ 0")?;
        check(!self.net_arch.is_empty() && self.net_arch.iter().all(|&n| n > 0), "non-empty arch")?;
        check(self.buffer_capacity >= self.batch_size, "buffer ≥ batch")?;
        check(self.policy_delay >= 1, "policy delay ≥ 1")
    }
}

impl SacHp {
    pub fn validate(&self) -> Result<()> {
        check(self.learning_rate.is_finite() && self.learning_rate >= 0.0, "learning rate ≥ 0")?;
        check(self.batch_size >= 1, "batch size ≥ 1")?;
        check((0.0..=1.0).contains(&self.tau), "τ in [0,1]")?;
        check(self.train_freq >= 1, "train frequency ≥ 1")?;
        check(self.init_log_std.is_finite(), "finite initial log σ")?;
        check(!self.net_arch.is_empty() && self.net_arch.iter().all(|&n| n > 0), "non-empty arch")?;
        check(self.buffer_capacity >= self.batch_size, "buffer ≥ batch")
    }
}

impl PpoHp {
    pub fn validate(&self) -> Result<()> {
        check(self.learning_rate.is_finite() && self.learning_rate >= 0.0, "learning rate ≥ 0")?;
        check(self.batch_size >= 1, "batch size ≥ 1")?;
        check(self.ent_coef >= 0.0 && self.ent_coef.is_finite(), "entropy coefficient ≥ 0")?;
        check(self.clip_range > 0.0 && self.clip_range.is_finite(), "clip range > 0")?;
        check(self.n_steps >= 1, "rollout steps ≥ 1")?;
        check(self.n_epochs >= 1, "epochs ≥ 1")?;
        check((0.0..=1.0).contains(&self.gae_lambda), "λ in [0,1]")?;
        check(self.max_grad_norm > 0.0, "max gradient norm > 0")?;
        check(self.vf_coef >= 0.0 && self.vf_coef.is_finite(), "value coefficient ≥ 0")?;
        check(self.init_log_std.is_finite(), "finite initial log σ")?;
        check(!self.net_arch.is_empty() && self.net_arch.iter().all(|&n| n > 0), "non-empty arch")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "lowercase")]
pub enum Hyperparams {
    Td3(Td3Hp),
    Sac(SacHp),
    Ppo(PpoHp),
}

impl Hyperparams {
    pub fn algo(&self) -> AlgoTag {
        match self {
            Hyperparams::Td3(_) => AlgoTag::Td3,
            Hyperparams::Sac(_) => AlgoTag::Sac,
            Hyperparams::Ppo(_) => AlgoTag::Ppo,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Hyperparams::Td3(hp) => hp.validate(),
            Hyperparams::Sac(hp) => hp.validate(),
            Hyperparams::Ppo(hp) => hp.validate(),
        }
    }
}

/// Callback invoked at training checkpoints with (episodes done, snapshot).
/// Returning false stops the run early.
pub(crate) type Monitor<'a> = &'a mut dyn FnMut(u64, &LearnedPolicy) -> bool;

/// Trains whichever algorithm the hyperparameters select.
pub fn train_policy(
    env: &dyn BanditEnv,
    hp: &Hyperparams,
    episodes: u64,
    seed: u64,
) -> Result<TrainResult> {
    train_policy_monitored(env, hp, episodes, seed, 0, &mut |_, _| true).map(|(result, _)| result)
}

/// As `train_policy`, with a checkpoint monitor that can stop the run early;
/// the returned flag is true when training ran to completion.
pub(crate) fn train_policy_monitored(
    env: &dyn BanditEnv,
    hp: &Hyperparams,
    episodes: u64,
    seed: u64,
    checkpoint_every: u64,
    monitor: Monitor<'_>,
) -> Result<(TrainResult, bool)> {
    match hp {
        Hyperparams::Td3(hp) => {
            td3::td3_train_full(env, hp, episodes, seed, checkpoint_every, monitor)
                .map(|(result, _, _, completed)| (result, completed))
        }
        Hyperparams::Sac(hp) => {
            sac::sac_train_full(env, hp, episodes, seed, checkpoint_every, monitor)
                .map(|(result, _, _, _, completed)| (result, completed))
        }
        Hyperparams::Ppo(hp) => {
            ppo::ppo_train_monitored(env, hp, episodes, seed, checkpoint_every, monitor)
        }
    }
}

/// Published hyperparameter presets: per algorithm, both the library
/// defaults ("sb3") and the tuned study winners ("optuna").
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Td3Sb3,
    Td3Optuna,
    SacSb3,
    SacOptuna,
    PpoSb3,
    PpoOptuna,
}

pub const ALL_PRESETS: [Preset; 6] = [
    Preset::Td3Sb3,
    Preset::Td3Optuna,
    Preset::SacSb3,
    Preset::SacOptuna,
    Preset::PpoSb3,
    Preset::PpoOptuna,
];

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Td3Sb3 => "td3-sb3",
            Preset::Td3Optuna => "td3-optuna",
            Preset::SacSb3 => "sac-sb3",
            Preset::SacOptuna => "sac-optuna",
            Preset::PpoSb3 => "ppo-sb3",
            Preset::PpoOptuna => "ppo-optuna",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Preset> {
        match s {
            "td3-sb3" => Ok(Preset::Td3Sb3),
            "td3-optuna" => Ok(Preset::Td3Optuna),
            "sac-sb3" => Ok(Preset::SacSb3),
            "sac-optuna" => Ok(Preset::SacOptuna),
            "ppo-sb3" => Ok(Preset::PpoSb3),
            "ppo-optuna" => Ok(Preset::PpoOptuna),
            other => Err(Error::InvalidArgument(format!(
                "unknown preset '{other}' (expected <algo>-sb3 or <algo>-optuna)"
            ))),
        }
    }
}

impl Preset {
    pub fn hyperparams(self) -> Hyperparams {
        match self {
            Preset::Td3Sb3 => Hyperparams::Td3(Td3Hp::default()),
            Preset::Td3Optuna => Hyperparams::Td3(Td3Hp {
                learning_rate: 0.0066,
                batch_size: 512,
                tau: 0.02,
                train_freq: 8,
                noise: NoiseKind::OrnsteinUhlenbeck,
                noise_sigma: 0.673,
                net_arch: vec![256, 256],
                ..Td3Hp::default()
            }),
            Preset::SacSb3 => Hyperparams::Sac(SacHp::default()),
            Preset::SacOptuna => Hyperparams::Sac(SacHp {
                learning_rate: 0.0016,
                batch_size: 16,
                learning_starts: 100,
                train_freq: 4,
                tau: 0.005,
                init_log_std: -0.075,
                sde_sample_freq: 8,
                net_arch: vec![256, 256],
                ..SacHp::default()
            }),
            Preset::PpoSb3 => Hyperparams::Ppo(PpoHp::default()),
            Preset::PpoOptuna => Hyperparams::Ppo(PpoHp {
                learning_rate: 0.0067,
                batch_size: 32,
                ent_coef: 6.92e-8,
                clip_range: 0.4,
                n_steps: 256,
                n_epochs: 5,
                gae_lambda: 0.95,
                max_grad_norm: 0.8,
                vf_coef: 0.49,
                init_log_std: -0.52,
                sde_sample_freq: 16,
                net_arch: vec![400, 300],
                activation: Activation::Tanh,
            }),
        }
    }
}

/// Wraps a learned policy as a throw-episode driver.
pub struct LearnedThrowPolicy {
    pub policy: LearnedPolicy,
    pub deterministic: bool,
    pub label: String,
}

impl ThrowPolicy for LearnedThrowPolicy {
    fn decide(&self, context: &Context, _env: &ThrowEnv, rng: &mut ChaCha8Rng) -> Decision {
        let a = self.policy.act(&context.features(), self.deterministic, rng);
        Decision::Raw([a[0], a[1], a[2], a[3]])
    }

    fn name(&self) -> &str {
        &self.label
    }
}

/// The carry command: drive to the bin center at full speed, stop above it
/// at placing height, and signal release on arrival so the object settles
/// in from rest.
pub fn pap_command(robot: &RobotSpec, bin_rim_height: f64, speed_cap: f64) -> ThrowCommand {
    ThrowCommand {
        release_fraction: 1.0,
        speed: robot.max_speed.min(speed_cap),
        target_height: bin_rim_height + robot.place_height,
        target_reach: 1.0,
    }
}

/// Motion time and post-arrival separation delay of the carry policy for one
/// episode; the two components of its wall-clock cycle, reported separately
/// because the reward compares motion time only.
pub fn pap_breakdown(context: &Context, scene: &Scene, robot: &RobotSpec) -> (f64, f64) {
    let move_s = pap_time(context.object_xy, context.bin_xy, robot, scene.bin.rim_height);
    let delay_s = separation_delay(&scene.object, &scene.gripper);
    (move_s, delay_s)
}

/// Scripted pick-and-place policy (the baseline strategy the reward is
/// measured against).
pub struct PapPolicy;

impl ThrowPolicy for PapPolicy {
    fn decide(&self, _context: &Context, env: &ThrowEnv, _rng: &mut ChaCha8Rng) -> Decision {
        Decision::Command(pap_command(&env.robot, env.config.bin_rim_height, env.config.speed_bounds[1]))
    }

    fn name(&self) -> &str {
        "pap"
    }
}

pub(crate) fn finite_check(label: &str, nets: &[&Mlp]) -> Result<()> {
    for net in nets {
        if !net.all_finite() {
            return Err(Error::Diverged(format!("{label}: non-finite network parameters")));
        }
    }
    Ok(())
}

/// Mean |a − a*| of the deterministic policy on held-out synthetic episodes.
/// Test/diagnostic helper for environments with a known optimum.
pub fn mean_abs_action_error(
    env: &crate::env::SyntheticBandit,
    policy: &LearnedPolicy,
    seed: u64,
    n: u64,
) -> f64 {
    let mut total = 0.0;
    for i in 0..n {
        let t = env.play(seed, EVAL_STREAM_BASE + i, &mut |c, erng| policy.act(c, true, erng));
        let a_star = env.optimal_action(t.context[0]);
        total += (t.action[0] - a_star).abs();
    }
    total / n as f64
}
