//! One-step PPO: a Gaussian actor with a state-independent log σ head and a
//! separate value network. Episodes are terminal, so the return is the raw
//! reward and the advantage collapses to r − V(c) (GAE λ never enters at
//! horizon 1). Rollouts of `n_steps` episodes are followed by several epochs
//! of shuffled minibatch updates on the clipped surrogate
//!
//!   L = −min(ρ·Â, clamp(ρ, 1−ε, 1+ε)·Â) − c_ent·H(π) + c_vf·(V − r)²
//!
//! with ρ the probability ratio against the behavior policy and Â the
//! per-minibatch-normalized advantage. Gradients are hand-derived
//! (∂log π/∂μ = (u−μ)/σ², ∂log π/∂log σ = z²−1) and pinned by a
//! finite-difference test; actor, log σ, and value gradients share a single
//! global norm clip, matching the cited implementation.

use super::{
    evaluate_policy, finite_check, AlgoTag, CurvePoint, LearnedPolicy, PpoHp, TrainResult,
    CURVE_INTERVAL, EVAL_EPISODES,
};
use crate::env::{episode_rng, BanditEnv, TRAINER_STREAM};
use crate::error::Error;
use crate::nn::{gaussian_logprob, Activation, AdamState, Mlp, Workspace, LOG_STD_MAX, LOG_STD_MIN};
use crate::Result;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn ppo_train(env: &dyn BanditEnv, hp: &PpoHp, episodes: u64, seed: u64) -> Result<TrainResult> {
    ppo_train_monitored(env, hp, episodes, seed, 0, &mut |_, _| true).map(|(result, _)| result)
}

/// As `ppo_train`, also returning whether the run completed. Every
/// `checkpoint_every` episodes (0 = never) the monitor receives a policy
/// snapshot; returning false stops training early. Checkpoints that fall
/// inside a rollout fire once the rollout's updates finish.
pub(crate) fn ppo_train_monitored(
    env: &dyn BanditEnv,
    hp: &PpoHp,
    episodes: u64,
    seed: u64,
    checkpoint_every: u64,
    monitor: super::Monitor<'_>,
) -> Result<(TrainResult, bool)> {
    hp.validate()?;
    let cdim = env.context_dim();
    let adim = env.action_dim();
    let mut rng = episode_rng(seed, TRAINER_STREAM);

    let mut actor_sizes = vec![cdim];
    actor_sizes.extend_from_slice(&hp.net_arch);
    actor_sizes.push(adim);
    let mut actor_acts = vec![hp.activation; hp.net_arch.len()];
    actor_acts.push(Activation::Identity);
    let mut value_sizes = vec![cdim];
    value_sizes.extend_from_slice(&hp.net_arch);
    value_sizes.push(1);
    let mut value_acts = vec![hp.activation; hp.net_arch.len()];
    value_acts.push(Activation::Identity);

    let mut actor = Mlp::new(&actor_sizes, &actor_acts, &mut rng)?;
    let mut value = Mlp::new(&value_sizes, &value_acts, &mut rng)?;
    let mut log_std = vec![hp.init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX); adim];

    let mut adam_actor = AdamState::new(actor.n_params());
    let mut adam_logstd = AdamState::new(adim);
    let mut adam_value = AdamState::new(value.n_params());

    let mut curve = Vec::new();
    let mut pads = PpoPads::default();
    let mut g_actor = vec![0.0; actor.n_params()];
    let mut g_logstd = vec![0.0; adim];
    let mut g_value = vec![0.0; value.n_params()];

    // Rollout storage.
    let mut ctxs: Vec<f64> = Vec::new();
    let mut us: Vec<f64> = Vec::new();
    let mut logps: Vec<f64> = Vec::new();
    let mut rews: Vec<f64> = Vec::new();
    let mut adv_raw: Vec<f64> = Vec::new();
    let mut perm: Vec<usize> = Vec::new();
    let mut ctx_mb = Vec::new();
    let mut u_mb = Vec::new();
    let mut lp_mb = Vec::new();
    let mut adv_mb = Vec::new();
    let mut r_mb = Vec::new();
    let mut ws_value = Workspace::new();

    let mut done: u64 = 0;
    let mut next_curve = CURVE_INTERVAL;
    let mut next_check = checkpoint_every;
    while done < episodes {
        let n = hp.n_steps.min(episodes - done) as usize;
        ctxs.clear();
        us.clear();
        logps.clear();
        rews.clear();
        for t in 0..n as u64 {
            let actor_ref = &actor;
            let log_std_ref = &log_std;
            let (ctxs, us, logps) = (&mut ctxs, &mut us, &mut logps);
            let transition = env.play(seed, done + t, &mut |c, erng| {
                let mean = actor_ref.forward(c).expect("actor shape");
                let mut u = Vec::with_capacity(adim);
                for j in 0..adim {
                    let e: f64 = erng.sample(StandardNormal);
                    u.push(mean[j] + log_std_ref[j].exp() * e);
                }
                ctxs.extend_from_slice(c);
                us.extend_from_slice(&u);
                logps.push(gaussian_logprob(&mean, log_std_ref, &u));
                // The environment sees the clipped action; the surrogate is
                // computed on the unclipped sample.
                u.iter().map(|v| v.clamp(-1.0, 1.0)).collect()
            });
            rews.push(transition.reward);
        }
        done += n as u64;

        // Fixed advantages for the whole update round (behavior value net).
        adv_raw.clear();
        let v = value.forward_batch(&ctxs, n, &mut ws_value);
        for i in 0..n {
            adv_raw.push(rews[i] - v[i]);
        }

        for _epoch in 0..hp.n_epochs {
            perm.clear();
            perm.extend(0..n);
            perm.shuffle(&mut rng);
            for mb in perm.chunks(hp.batch_size) {
                let m = mb.len();
                if m < 2 {
                    continue; // a lone sample cannot be advantage-normalized
                }
                ctx_mb.clear();
                u_mb.clear();
                lp_mb.clear();
                adv_mb.clear();
                r_mb.clear();
                for &i in mb {
                    ctx_mb.extend_from_slice(&ctxs[i * cdim..(i + 1) * cdim]);
                    u_mb.extend_from_slice(&us[i * adim..(i + 1) * adim]);
                    lp_mb.push(logps[i]);
                    adv_mb.push(adv_raw[i]);
                    r_mb.push(rews[i]);
                }
                normalize(&mut adv_mb);

                minibatch_gradients(
                    &actor, &log_std, &value, &ctx_mb, &u_mb, &lp_mb, &adv_mb, &r_mb, m, hp,
                    &mut pads, &mut g_actor, &mut g_logstd, &mut g_value,
                );
                clip_global_norm(
                    [&mut g_actor[..], &mut g_logstd[..], &mut g_value[..]],
                    hp.max_grad_norm,
                );
                adam_actor.step(&mut actor.params, &g_actor, hp.learning_rate);
                adam_logstd.step(&mut log_std, &g_logstd, hp.learning_rate);
                adam_value.step(&mut value.params, &g_value, hp.learning_rate);
                for ls in log_std.iter_mut() {
                    *ls = ls.clamp(LOG_STD_MIN, LOG_STD_MAX);
                }
            }
        }

        while next_curve <= done {
            finite_check("ppo", &[&actor, &value])?;
            if log_std.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged("ppo: non-finite log std".into()));
            }
            let snapshot = LearnedPolicy {
                algo: AlgoTag::Ppo,
                actor: actor.clone(),
                log_std: log_std.clone(),
            };
            let (mean_eval_reward, success_rate) =
                evaluate_policy(env, &snapshot, seed, EVAL_EPISODES);
            curve.push(CurvePoint { episode: next_curve, mean_eval_reward, success_rate });
            next_curve += CURVE_INTERVAL;
        }

        while checkpoint_every != 0 && next_check <= done {
            finite_check("ppo", &[&actor, &value])?;
            if log_std.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged("ppo: non-finite log std".into()));
            }
            let snapshot = LearnedPolicy {
                algo: AlgoTag::Ppo,
                actor: actor.clone(),
                log_std: log_std.clone(),
            };
            if !monitor(next_check, &snapshot) {
                return Ok((TrainResult { policy: snapshot, curve }, false));
            }
            next_check += checkpoint_every;
        }
    }
    finite_check("ppo", &[&actor, &value])?;
    if log_std.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged("ppo: non-finite log std".into()));
    }

    Ok((TrainResult { policy: LearnedPolicy { algo: AlgoTag::Ppo, actor, log_std }, curve }, true))
}

/// In-place per-minibatch advantage normalization (mean 0, sample std 1).
fn normalize(adv: &mut [f64]) {
    let m = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / m;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (m - 1.0);
    let std = var.sqrt();
    for a in adv.iter_mut() {
        *a = (*a - mean) / (std + 1e-8);
    }
}

/// Scales every gradient block so their joint Euclidean norm does not exceed
/// `max_norm` (the actor, log σ, and value parameters act as one vector).
fn clip_global_norm<const N: usize>(mut blocks: [&mut [f64]; N], max_norm: f64) {
    let sq: f64 = blocks.iter().flat_map(|b| b.iter()).map(|g| g * g).sum();
    let norm = sq.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for b in blocks.iter_mut() {
            for g in b.iter_mut() {
                *g *= scale;
            }
        }
    }
}

/// Reusable buffers for `minibatch_gradients`.
#[derive(Default)]
struct PpoPads {
    ws_actor: Workspace,
    ws_value: Workspace,
    means: Vec<f64>,
    upstream_a: Vec<f64>,
    upstream_v: Vec<f64>,
}

/// Gradients of the clipped-surrogate loss over one minibatch, written into
/// the three parameter blocks (overwriting them). `adv` must already be
/// normalized; `u` holds the unclipped behavior samples and `logp_old` their
/// behavior-policy log densities.
#[allow(clippy::too_many_arguments)]
fn minibatch_gradients(
    actor: &Mlp,
    log_std: &[f64],
    value: &Mlp,
    ctx: &[f64],
    u: &[f64],
    logp_old: &[f64],
    adv: &[f64],
    rewards: &[f64],
    m: usize,
    hp: &PpoHp,
    pads: &mut PpoPads,
    g_actor: &mut [f64],
    g_logstd: &mut [f64],
    g_value: &mut [f64],
) {
    let adim = log_std.len();
    pads.means.clear();
    let v = actor.forward_batch(ctx, m, &mut pads.ws_actor);
    pads.means.extend_from_slice(v);

    pads.upstream_a.clear();
    pads.upstream_a.resize(m * adim, 0.0);
    g_logstd.fill(0.0);
    for i in 0..m {
        let mean = &pads.means[i * adim..(i + 1) * adim];
        let urow = &u[i * adim..(i + 1) * adim];
        let logp_new = gaussian_logprob(mean, log_std, urow);
        let ratio = (logp_new - logp_old[i]).exp();
        let rclip = ratio.clamp(1.0 - hp.clip_range, 1.0 + hp.clip_range);
        let a = adv[i];
        // Only the unclipped branch of the min carries gradient.
        if ratio * a <= rclip * a {
            let factor = -a * ratio / m as f64;
            for j in 0..adim {
                let sigma = log_std[j].exp();
                let z = (urow[j] - mean[j]) / sigma;
                pads.upstream_a[i * adim + j] = factor * z / sigma;
                g_logstd[j] += factor * (z * z - 1.0);
            }
        }
    }
    // Entropy bonus: H = Σⱼ(log σⱼ + ½ln 2πe) is sample-independent, so the
    // bonus contributes a constant −c_ent to each log σ gradient.
    for g in g_logstd.iter_mut() {
        *g -= hp.ent_coef;
    }
    actor.backward_batch(&pads.upstream_a, m, &mut pads.ws_actor, g_actor);

    let v = value.forward_batch(ctx, m, &mut pads.ws_value);
    pads.upstream_v.clear();
    for i in 0..m {
        pads.upstream_v.push(2.0 * (v[i] - rewards[i]) * hp.vf_coef / m as f64);
    }
    value.backward_batch(&pads.upstream_v, m, &mut pads.ws_value, g_value);
}
