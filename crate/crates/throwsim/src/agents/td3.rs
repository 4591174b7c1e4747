//! One-step TD3: twin critics regress the observed reward (every episode is
//! terminal, so there is no bootstrap target), and a delayed deterministic
//! actor ascends Q₁. Target networks are maintained by Polyak averaging for
//! protocol fidelity even though the one-step target never reads them.

use super::{
    evaluate_policy, finite_check, AlgoTag, CurvePoint, LearnedPolicy, NoiseKind, ReplayBuffer,
    Td3Hp, TrainResult, CURVE_INTERVAL, EVAL_EPISODES,
};
use crate::env::{episode_rng, BanditEnv, TRAINER_STREAM};
use crate::nn::{Activation, AdamState, Mlp, Workspace};
use crate::Result;
use rand::Rng;
use rand_distr::StandardNormal;

/// Ornstein-Uhlenbeck mean-reversion rate and step, fixed to the cited
/// implementation's defaults. An episode is a single step and the process
/// state resets with each episode, so one draw is θ·(0−0)·dt + σ·√dt·ε.
const OU_DT: f64 = 0.01;

pub fn td3_train(env: &dyn BanditEnv, hp: &Td3Hp, episodes: u64, seed: u64) -> Result<TrainResult> {
    td3_train_full(env, hp, episodes, seed, 0, &mut |_, _| true).map(|(result, _, _, _)| result)
}

/// As `td3_train`, also returning the trained twin critics (used by tests
/// that check the critic against the known reward function) and whether the
/// run completed. Every `checkpoint_every` episodes (0 = never) the monitor
/// receives a policy snapshot; returning false stops training early.
pub(crate) fn td3_train_full(
    env: &dyn BanditEnv,
    hp: &Td3Hp,
    episodes: u64,
    seed: u64,
    checkpoint_every: u64,
    monitor: super::Monitor<'_>,
) -> Result<(TrainResult, Mlp, Mlp, bool)> {
    hp.validate()?;
    let cdim = env.context_dim();
    let adim = env.action_dim();
    let mut rng = episode_rng(seed, TRAINER_STREAM);

    let mut actor_sizes = vec![cdim];
    actor_sizes.extend_from_slice(&hp.net_arch);
    actor_sizes.push(adim);
    let mut actor_acts = vec![Activation::Relu; hp.net_arch.len()];
    actor_acts.push(Activation::Tanh);
    let mut critic_sizes = vec![cdim + adim];
    critic_sizes.extend_from_slice(&hp.net_arch);
    critic_sizes.push(1);
    let mut critic_acts = vec![Activation::Relu; hp.net_arch.len()];
    critic_acts.push(Activation::Identity);

    let mut actor = Mlp::new(&actor_sizes, &actor_acts, &mut rng)?;
    let mut q1 = Mlp::new(&critic_sizes, &critic_acts, &mut rng)?;
    let mut q2 = Mlp::new(&critic_sizes, &critic_acts, &mut rng)?;
    let mut actor_target = actor.clone();
    let mut q1_target = q1.clone();
    let mut q2_target = q2.clone();

    let mut adam_actor = AdamState::new(actor.n_params());
    let mut adam_q1 = AdamState::new(q1.n_params());
    let mut adam_q2 = AdamState::new(q2.n_params());

    let mut buffer = ReplayBuffer::new(hp.buffer_capacity, cdim, adim);
    let mut curve = Vec::new();

    let mut ws_actor = Workspace::new();
    let mut ws_critic = Workspace::new();
    let mut grads = vec![0.0; q1.n_params().max(actor.n_params())];
    let mut idx = Vec::new();
    let mut qin = Vec::new();
    let mut cbuf = Vec::new();
    let mut rews = Vec::new();
    let mut upstream = Vec::new();
    let mut input_grads = Vec::new();
    let mut actor_upstream = Vec::new();
    let mut grad_steps: u64 = 0;

    for ep in 0..episodes {
        let warmup = ep < hp.learning_starts;
        let transition = {
            let actor_ref = &actor;
            let noise = hp.noise;
            let sigma = hp.noise_sigma;
            env.play(seed, ep, &mut |c, erng| {
                if warmup {
                    return (0..adim).map(|_| erng.gen_range(-1.0..=1.0)).collect();
                }
                let mut a = actor_ref.forward(c).expect("actor shape");
                match noise {
                    NoiseKind::None => {}
                    NoiseKind::Normal => {
                        for v in a.iter_mut() {
                            let eps: f64 = erng.sample(StandardNormal);
                            *v = (*v + sigma * eps).clamp(-1.0, 1.0);
                        }
                    }
                    NoiseKind::OrnsteinUhlenbeck => {
                        for v in a.iter_mut() {
                            let eps: f64 = erng.sample(StandardNormal);
                            *v = (*v + sigma * OU_DT.sqrt() * eps).clamp(-1.0, 1.0);
                        }
                    }
                }
                a
            })
        };
        buffer.push(&transition.context, &transition.action, transition.reward);

        if !warmup && (ep + 1) % hp.train_freq == 0 && buffer.len() >= hp.batch_size {
            for _ in 0..hp.train_freq {
                let batch = hp.batch_size;
                buffer.sample_indices(batch, &mut rng, &mut idx);
                qin.clear();
                cbuf.clear();
                rews.clear();
                for &i in &idx {
                    qin.extend_from_slice(buffer.context(i));
                    qin.extend_from_slice(buffer.action(i));
                    cbuf.extend_from_slice(buffer.context(i));
                    rews.push(buffer.reward(i));
                }

                // Twin critics regress toward the observed reward.
                for (critic, adam) in [(&mut q1, &mut adam_q1), (&mut q2, &mut adam_q2)] {
                    let preds = critic.forward_batch(&qin, batch, &mut ws_critic);
                    upstream.clear();
                    for (k, &r) in rews.iter().enumerate() {
                        upstream.push(2.0 * (preds[k] - r) / batch as f64);
                    }
                    let g = &mut grads[..critic.n_params()];
                    critic.backward_batch(&upstream, batch, &mut ws_critic, g);
                    adam.step(&mut critic.params, g, hp.learning_rate);
                }

                grad_steps += 1;
                if grad_steps % hp.policy_delay == 0 {
                    // Deterministic actor ascends Q₁ at its own actions.
                    let a_pi = actor.forward_batch(&cbuf, batch, &mut ws_actor).to_vec();
                    qin.clear();
                    for k in 0..batch {
                        qin.extend_from_slice(&cbuf[k * cdim..(k + 1) * cdim]);
                        qin.extend_from_slice(&a_pi[k * adim..(k + 1) * adim]);
                    }
                    q1.forward_batch(&qin, batch, &mut ws_critic);
                    upstream.clear();
                    upstream.resize(batch, -1.0 / batch as f64);
                    input_grads.clear();
                    input_grads.resize(batch * (cdim + adim), 0.0);
                    let g = &mut grads[..q1.n_params()];
                    q1.backward_batch_with_input_grads(
                        &upstream,
                        batch,
                        &mut ws_critic,
                        g,
                        &mut input_grads,
                    );
                    actor_upstream.clear();
                    for k in 0..batch {
                        let row = &input_grads[k * (cdim + adim) + cdim..(k + 1) * (cdim + adim)];
                        actor_upstream.extend_from_slice(row);
                    }
                    let g = &mut grads[..actor.n_params()];
                    actor.backward_batch(&actor_upstream, batch, &mut ws_actor, g);
                    adam_actor.step(&mut actor.params, g, hp.learning_rate);

                    // Inert at horizon 1 (the target never enters the
                    // one-step critic target) but kept for fidelity.
                    polyak(&mut actor_target.params, &actor.params, hp.tau);
                    polyak(&mut q1_target.params, &q1.params, hp.tau);
                    polyak(&mut q2_target.params, &q2.params, hp.tau);
                }
            }
        }

        if (ep + 1) % CURVE_INTERVAL == 0 {
            finite_check("td3", &[&actor, &q1, &q2])?;
            let snapshot =
                LearnedPolicy { algo: AlgoTag::Td3, actor: actor.clone(), log_std: Vec::new() };
            let (mean_eval_reward, success_rate) =
                evaluate_policy(env, &snapshot, seed, EVAL_EPISODES);
            curve.push(CurvePoint { episode: ep + 1, mean_eval_reward, success_rate });
        }

        if checkpoint_every != 0 && (ep + 1) % checkpoint_every == 0 {
            finite_check("td3", &[&actor, &q1, &q2])?;
            let snapshot =
                LearnedPolicy { algo: AlgoTag::Td3, actor: actor.clone(), log_std: Vec::new() };
            if !monitor(ep + 1, &snapshot) {
                return Ok((TrainResult { policy: snapshot, curve }, q1, q2, false));
            }
        }
    }
    finite_check("td3", &[&actor, &q1, &q2])?;

    let result = TrainResult {
        policy: LearnedPolicy { algo: AlgoTag::Td3, actor, log_std: Vec::new() },
        curve,
    };
    Ok((result, q1, q2, true))
}

pub(crate) fn polyak(target: &mut [f64], source: &[f64], tau: f64) {
    for (t, &s) in target.iter_mut().zip(source) {
        *t += tau * (s - *t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::mean_abs_action_error;
    use crate::env::{SyntheticBandit, SyntheticKind};

    fn oracle_hp() -> Td3Hp {
        Td3Hp {
            learning_rate: 2e-3,
            batch_size: 64,
            tau: 0.005,
            train_freq: 1,
            noise: NoiseKind::Normal,
            noise_sigma: 0.2,
            net_arch: vec![32, 32],
            learning_starts: 100,
            buffer_capacity: 100_000,
            policy_delay: 2,
        }
    }

    #[test]
    fn learns_constant_optimum() {
        let env = SyntheticBandit { kind: SyntheticKind::Constant(0.3) };
        let result = td3_train(&env, &oracle_hp(), 20_000, 1).unwrap();
        let mut rng = episode_rng(0, 0);
        for c in [-0.9, -0.3, 0.0, 0.4, 0.8] {
            let a = result.policy.act(&[c], true, &mut rng);
            assert!((a[0] - 0.3).abs() < 0.05, "action {} at context {c}", a[0]);
        }
    }

    #[test]
    fn learns_context_dependent_optimum() {
        let env = SyntheticBandit { kind: SyntheticKind::Sine };
        let result = td3_train(&env, &oracle_hp(), 50_000, 2).unwrap();
        let err = mean_abs_action_error(&env, &result.policy, 2, 500);
        assert!(err < 0.1, "mean |a - sin c| = {err}");
        let last = result.curve.last().unwrap();
        let first = result.curve.first().unwrap();
        assert!(last.mean_eval_reward > first.mean_eval_reward);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let env = SyntheticBandit { kind: SyntheticKind::Constant(0.3) };
        let hp = Td3Hp { learning_rate: 0.0, ..oracle_hp() };
        let result = td3_train(&env, &hp, 5_000, 3).unwrap();
        let first = result.curve.first().unwrap();
        for p in &result.curve {
            assert_eq!(p.mean_eval_reward, first.mean_eval_reward);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let env = SyntheticBandit { kind: SyntheticKind::Sine };
        let hp = oracle_hp();
        let a = td3_train(&env, &hp, 3_000, 7).unwrap();
        let b = td3_train(&env, &hp, 3_000, 7).unwrap();
        assert_eq!(a.policy.actor.params, b.policy.actor.params);
        assert_eq!(a.curve, b.curve);
        let c = td3_train(&env, &hp, 3_000, 8).unwrap();
        assert_ne!(a.policy.actor.params, c.policy.actor.params);
    }

    #[test]
    fn critic_converges_to_reward_on_support() {
        // On a deterministic bandit the optimal critic IS the reward
        // function; check Q₁ pointwise where exploration actually visited.
        let env = SyntheticBandit { kind: SyntheticKind::Constant(0.3) };
        let hp = Td3Hp { net_arch: vec![64, 64], batch_size: 128, ..oracle_hp() };
        let (result, q1, _q2, completed) =
            td3_train_full(&env, &hp, 20_000, 5, 0, &mut |_, _| true).unwrap();
        assert!(completed);
        let mut rng = episode_rng(5, 123);
        let probe = result.policy.act(&[0.0], true, &mut rng)[0];
        assert!((probe - 0.3).abs() < 0.05);
        let mut worst = 0.0f64;
        for c in [-0.8, -0.4, 0.0, 0.4, 0.8] {
            for a in [0.0, 0.15, 0.3, 0.45, 0.6] {
                let q = q1.forward(&[c, a]).unwrap()[0];
                let r = -(a - 0.3f64) * (a - 0.3);
                worst = worst.max((q - r).abs());
            }
        }
        assert!(worst < 0.02, "max |Q - r| on support = {worst}");
    }
}
