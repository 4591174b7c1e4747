//! One-step SAC: twin critics regress the observed reward (terminal
//! episodes leave no bootstrap or entropy term in the critic target), and a
//! squashed-Gaussian actor descends α·log π − min(Q₁, Q₂) through the
//! reparameterization trick. The temperature α is adapted automatically
//! toward a target entropy of −dim(action).
//!
//! The actor gradient is derived by hand. With a = tanh(u), u = μ + σ·ε and
//! ε held fixed, log π(a) = Σⱼ[−½ε² − ½ln 2π − log σⱼ] − Σⱼ ln(1 − aⱼ²), so
//!
//!   ∂log π/∂μⱼ        = 2aⱼ
//!   ∂log π/∂log σⱼ    = −1 + 2aⱼσⱼεⱼ
//!   ∂aⱼ/∂μⱼ           = 1 − aⱼ²,   ∂aⱼ/∂log σⱼ = (1 − aⱼ²)·σⱼεⱼ
//!
//! and the Q-path contribution arrives through the input gradients of the
//! minimizing critic. A finite-difference test pins every term.

use super::{
    evaluate_policy, finite_check, AlgoTag, CurvePoint, LearnedPolicy, ReplayBuffer, SacHp,
    TrainResult, CURVE_INTERVAL, EVAL_EPISODES,
};
use crate::env::{episode_rng, BanditEnv, TRAINER_STREAM};
use crate::error::Error;
use crate::nn::{
    gaussian_logprob, tanh_correction, Activation, AdamState, Mlp, Workspace, LOG_STD_MAX,
    LOG_STD_MIN,
};
use crate::Result;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn sac_train(env: &dyn BanditEnv, hp: &SacHp, episodes: u64, seed: u64) -> Result<TrainResult> {
    sac_train_full(env, hp, episodes, seed, 0, &mut |_, _| true).map(|(result, _, _, _, _)| result)
}

/// As `sac_train`, also returning the twin critics, the final log α, and
/// whether the run completed. Every `checkpoint_every` episodes (0 = never)
/// the monitor receives a policy snapshot; returning false stops training
/// early.
pub(crate) fn sac_train_full(
    env: &dyn BanditEnv,
    hp: &SacHp,
    episodes: u64,
    seed: u64,
    checkpoint_every: u64,
    monitor: super::Monitor<'_>,
) -> Result<(TrainResult, Mlp, Mlp, f64, bool)> {
    hp.validate()?;
    let cdim = env.context_dim();
    let adim = env.action_dim();
    let mut rng = episode_rng(seed, TRAINER_STREAM);

    let mut actor_sizes = vec![cdim];
    actor_sizes.extend_from_slice(&hp.net_arch);
    actor_sizes.push(2 * adim);
    let mut actor_acts = vec![Activation::Relu; hp.net_arch.len()];
    actor_acts.push(Activation::Identity);
    let mut critic_sizes = vec![cdim + adim];
    critic_sizes.extend_from_slice(&hp.net_arch);
    critic_sizes.push(1);
    let mut critic_acts = vec![Activation::Relu; hp.net_arch.len()];
    critic_acts.push(Activation::Identity);

    let mut actor = Mlp::new(&actor_sizes, &actor_acts, &mut rng)?;
    init_log_std_head(&mut actor, adim, hp.init_log_std);
    let mut q1 = Mlp::new(&critic_sizes, &critic_acts, &mut rng)?;
    let mut q2 = Mlp::new(&critic_sizes, &critic_acts, &mut rng)?;
    let mut q1_target = q1.clone();
    let mut q2_target = q2.clone();

    let mut adam_actor = AdamState::new(actor.n_params());
    let mut adam_q1 = AdamState::new(q1.n_params());
    let mut adam_q2 = AdamState::new(q2.n_params());
    let mut adam_alpha = AdamState::new(1);
    // log α starts at 0 (α = 1); the entropy target is the usual −dim(a).
    let mut log_alpha = [0.0f64];
    let target_entropy = -(adim as f64);

    let mut buffer = ReplayBuffer::new(hp.buffer_capacity, cdim, adim);
    let mut curve = Vec::new();

    let mut ws_critic = Workspace::new();
    let mut pads = ActorPads::default();
    let mut grads = vec![0.0; q1.n_params().max(actor.n_params())];
    let mut idx = Vec::new();
    let mut qin = Vec::new();
    let mut cbuf = Vec::new();
    let mut rews = Vec::new();
    let mut upstream = Vec::new();
    let mut eps = Vec::new();

    for ep in 0..episodes {
        let warmup = ep < hp.learning_starts;
        let transition = {
            let actor_ref = &actor;
            env.play(seed, ep, &mut |c, erng| {
                if warmup {
                    return (0..adim).map(|_| erng.gen_range(-1.0..=1.0)).collect();
                }
                let out = actor_ref.forward(c).expect("actor shape");
                (0..adim)
                    .map(|j| {
                        let sigma = out[adim + j].clamp(LOG_STD_MIN, LOG_STD_MAX).exp();
                        let e: f64 = erng.sample(StandardNormal);
                        (out[j] + sigma * e).tanh()
                    })
                    .collect()
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

                // Reparameterized actor step (every gradient step; SAC has
                // no policy delay), then the temperature step on the same
                // fresh log π estimates.
                eps.clear();
                for _ in 0..batch * adim {
                    eps.push(rng.sample::<f64, _>(StandardNormal));
                }
                let alpha = log_alpha[0].exp();
                let g = &mut grads[..actor.n_params()];
                let mean_logpi =
                    actor_gradient(&actor, &q1, &q2, &cbuf, &eps, batch, alpha, &mut pads, g);
                adam_actor.step(&mut actor.params, g, hp.learning_rate);

                let alpha_grad = [-(mean_logpi + target_entropy)];
                adam_alpha.step(&mut log_alpha, &alpha_grad, hp.learning_rate);

                // Inert at horizon 1 but kept for protocol fidelity.
                super::td3::polyak(&mut q1_target.params, &q1.params, hp.tau);
                super::td3::polyak(&mut q2_target.params, &q2.params, hp.tau);
            }
        }

        if (ep + 1) % CURVE_INTERVAL == 0 {
            finite_check("sac", &[&actor, &q1, &q2])?;
            if !log_alpha[0].is_finite() {
                return Err(Error::Diverged("sac: non-finite temperature".into()));
            }
            let snapshot =
                LearnedPolicy { algo: AlgoTag::Sac, actor: actor.clone(), log_std: Vec::new() };
            let (mean_eval_reward, success_rate) =
                evaluate_policy(env, &snapshot, seed, EVAL_EPISODES);
            curve.push(CurvePoint { episode: ep + 1, mean_eval_reward, success_rate });
        }

        if checkpoint_every != 0 && (ep + 1) % checkpoint_every == 0 {
            finite_check("sac", &[&actor, &q1, &q2])?;
            if !log_alpha[0].is_finite() {
                return Err(Error::Diverged("sac: non-finite temperature".into()));
            }
            let snapshot =
                LearnedPolicy { algo: AlgoTag::Sac, actor: actor.clone(), log_std: Vec::new() };
            if !monitor(ep + 1, &snapshot) {
                let result = TrainResult { policy: snapshot, curve };
                return Ok((result, q1, q2, log_alpha[0], false));
            }
        }
    }
    finite_check("sac", &[&actor, &q1, &q2])?;
    if !log_alpha[0].is_finite() {
        return Err(Error::Diverged("sac: non-finite temperature".into()));
    }

    let result = TrainResult {
        policy: LearnedPolicy { algo: AlgoTag::Sac, actor, log_std: Vec::new() },
        curve,
    };
    Ok((result, q1, q2, log_alpha[0], true))
}

/// Overwrites the log σ half of the output layer (rows `adim..2·adim`) so
/// the initial policy emits exactly `init` for every context: weights to
/// zero, biases to `init`.
fn init_log_std_head(actor: &mut Mlp, adim: usize, init: f64) {
    let last = actor.layers.last().expect("non-empty").clone();
    let start = actor.params.len() - last.out_dim * (last.in_dim + 1);
    for j in adim..2 * adim {
        let row = start + j * last.in_dim;
        actor.params[row..row + last.in_dim].fill(0.0);
        actor.params[start + last.out_dim * last.in_dim + j] = init;
    }
}

/// Reusable buffers for `actor_gradient`.
#[derive(Default)]
struct ActorPads {
    ws_actor: Workspace,
    ws_q1: Workspace,
    ws_q2: Workspace,
    out: Vec<f64>,
    u: Vec<f64>,
    a: Vec<f64>,
    se: Vec<f64>,
    ls: Vec<f64>,
    qin: Vec<f64>,
    q1v: Vec<f64>,
    q2v: Vec<f64>,
    up1: Vec<f64>,
    up2: Vec<f64>,
    ig1: Vec<f64>,
    ig2: Vec<f64>,
    critic_scratch: Vec<f64>,
    upstream: Vec<f64>,
}

/// Gradient of L = (1/B)·Σ (α·log π(a|c) − min(Q₁, Q₂)(c, a)) with respect
/// to the actor parameters, written into `grads`. Actions are resampled
/// from the current policy with the supplied noise matrix `eps` (batch ×
/// action rows). Returns the mean log π, which the temperature update needs.
fn actor_gradient(
    actor: &Mlp,
    q1: &Mlp,
    q2: &Mlp,
    contexts: &[f64],
    eps: &[f64],
    batch: usize,
    alpha: f64,
    pads: &mut ActorPads,
    grads: &mut [f64],
) -> f64 {
    let cdim = actor.input_dim();
    let adim = actor.output_dim() / 2;
    let odim = 2 * adim;
    debug_assert_eq!(contexts.len(), batch * cdim);
    debug_assert_eq!(eps.len(), batch * adim);

    pads.out.clear();
    let v = actor.forward_batch(contexts, batch, &mut pads.ws_actor);
    pads.out.extend_from_slice(v);

    pads.u.clear();
    pads.a.clear();
    pads.se.clear();
    pads.ls.clear();
    for k in 0..batch {
        for j in 0..adim {
            let mean = pads.out[k * odim + j];
            let ls = pads.out[k * odim + adim + j].clamp(LOG_STD_MIN, LOG_STD_MAX);
            let se = ls.exp() * eps[k * adim + j];
            let u = mean + se;
            pads.ls.push(ls);
            pads.se.push(se);
            pads.u.push(u);
            pads.a.push(u.tanh());
        }
    }

    let mut mean_logpi = 0.0;
    for k in 0..batch {
        let means = &pads.out[k * odim..k * odim + adim];
        let ls = &pads.ls[k * adim..(k + 1) * adim];
        let urow = &pads.u[k * adim..(k + 1) * adim];
        mean_logpi += gaussian_logprob(means, ls, urow) - tanh_correction(urow);
    }
    mean_logpi /= batch as f64;

    // min(Q₁, Q₂) path: only the minimizing critic back-propagates, so each
    // critic gets a per-sample mask of the shared −1/B upstream.
    pads.qin.clear();
    for k in 0..batch {
        pads.qin.extend_from_slice(&contexts[k * cdim..(k + 1) * cdim]);
        let arow = &pads.a[k * adim..(k + 1) * adim];
        pads.qin.extend_from_slice(arow);
    }
    pads.q1v.clear();
    let v = q1.forward_batch(&pads.qin, batch, &mut pads.ws_q1);
    pads.q1v.extend_from_slice(v);
    pads.q2v.clear();
    let v = q2.forward_batch(&pads.qin, batch, &mut pads.ws_q2);
    pads.q2v.extend_from_slice(v);

    let share = -1.0 / batch as f64;
    pads.up1.clear();
    pads.up2.clear();
    for k in 0..batch {
        let first = pads.q1v[k] <= pads.q2v[k];
        pads.up1.push(if first { share } else { 0.0 });
        pads.up2.push(if first { 0.0 } else { share });
    }
    let width = cdim + adim;
    pads.ig1.clear();
    pads.ig1.resize(batch * width, 0.0);
    pads.ig2.clear();
    pads.ig2.resize(batch * width, 0.0);
    pads.critic_scratch.resize(q1.n_params().max(q2.n_params()), 0.0);
    q1.backward_batch_with_input_grads(
        &pads.up1,
        batch,
        &mut pads.ws_q1,
        &mut pads.critic_scratch[..q1.n_params()],
        &mut pads.ig1,
    );
    q2.backward_batch_with_input_grads(
        &pads.up2,
        batch,
        &mut pads.ws_q2,
        &mut pads.critic_scratch[..q2.n_params()],
        &mut pads.ig2,
    );

    let scale = alpha / batch as f64;
    pads.upstream.clear();
    pads.upstream.resize(batch * odim, 0.0);
    for k in 0..batch {
        for j in 0..adim {
            let a = pads.a[k * adim + j];
            let se = pads.se[k * adim + j];
            let da = 1.0 - a * a;
            let iga = pads.ig1[k * width + cdim + j] + pads.ig2[k * width + cdim + j];
            pads.upstream[k * odim + j] = scale * 2.0 * a + iga * da;
            // The clamp gates the log σ path: saturated outputs get no
            // gradient.
            let ls_raw = pads.out[k * odim + adim + j];
            if ls_raw > LOG_STD_MIN && ls_raw < LOG_STD_MAX {
                pads.upstream[k * odim + adim + j] =
                    scale * (2.0 * a * se - 1.0) + iga * da * se;
            }
        }
    }
    actor.backward_batch(&pads.upstream, batch, &mut pads.ws_actor, grads);
    mean_logpi
}
