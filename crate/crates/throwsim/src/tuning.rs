//! Hyperparameter search: random sampling over the published per-algorithm
//! tuning domains, budgeted sequential trials, and median pruning of
//! laggards.
//!
//! Random search stands in for the tree-structured Parzen estimator used by
//! the original study: the domains, budgets, checkpoint schedule, and median
//! pruning rule are identical, and [`Trial`] leaves room for a smarter
//! sampler later.

use crate::agents::{
    evaluate_policy, train_policy_monitored, AlgoTag, Hyperparams, NoiseKind, PpoHp, Preset, SacHp,
    Td3Hp,
};
use crate::env::{episode_rng, BanditEnv};
use crate::error::Error;
use crate::nn::Activation;
use crate::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::fmt::Write as _;

/// Evaluation checkpoints per trial: one every `train_budget / 10` episodes.
pub const CHECKPOINTS: u64 = 10;
/// Completed trials required before the median rule may prune anyone.
pub const MIN_COMPLETED_FOR_PRUNING: usize = 5;
/// RNG stream that draws hyperparameter samples (disjoint from the episode,
/// evaluation, and trainer streams).
pub(crate) const SAMPLER_STREAM: u64 = (1 << 62) | (1 << 61);

/// One parameter's sampling domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Log-uniform over `[lo, hi]`, both positive. Used for scale parameters
    /// such as learning rates.
    LogUniform(f64, f64),
    /// Uniform over `[lo, hi]`.
    Uniform(f64, f64),
    /// One of a fixed set of numeric values.
    Choice(&'static [f64]),
    /// One of a fixed set of symbolic values.
    Labels(&'static [&'static str]),
}

/// A sampled or flattened hyperparameter value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Label(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => write!(f, "{v}"),
            Value::Label(s) => f.write_str(s),
        }
    }
}

impl Domain {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Value {
        match self {
            Domain::LogUniform(lo, hi) => {
                let v = rng.gen_range(lo.ln()..=hi.ln()).exp();
                Value::Num(v.clamp(*lo, *hi))
            }
            Domain::Uniform(lo, hi) => Value::Num(rng.gen_range(*lo..=*hi)),
            Domain::Choice(vals) => Value::Num(vals[rng.gen_range(0..vals.len())]),
            Domain::Labels(set) => Value::Label(set[rng.gen_range(0..set.len())].to_string()),
        }
    }

    pub fn contains(&self, value: &Value) -> bool {
        match (self, value) {
            (Domain::LogUniform(lo, hi), Value::Num(v)) => *lo <= *v && *v <= *hi,
            (Domain::Uniform(lo, hi), Value::Num(v)) => *lo <= *v && *v <= *hi,
            (Domain::Choice(vals), Value::Num(v)) => vals.contains(v),
            (Domain::Labels(set), Value::Label(s)) => set.contains(&s.as_str()),
            _ => false,
        }
    }
}

const LR: Domain = Domain::LogUniform(1e-5, 1e-2);
const BATCH: Domain = Domain::Choice(&[16.0, 32.0, 64.0, 100.0, 128.0, 256.0, 512.0]);
const TAU: Domain = Domain::Choice(&[0.001, 0.005, 0.01, 0.02]);
const TRAIN_FREQ: Domain = Domain::Choice(&[1.0, 4.0, 8.0, 16.0, 32.0, 64.0]);
const INIT_LOG_STD: Domain = Domain::Uniform(-4.0, 1.0);
const SDE_FREQ: Domain = Domain::Choice(&[-1.0, 8.0, 16.0, 32.0, 64.0]);
const ARCH: Domain = Domain::Labels(&["256-256", "400-300"]);

/// The published tuning domains for one algorithm, as an ordered
/// (name, domain) table. The order fixes the CSV column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub algo: AlgoTag,
    pub params: Vec<(&'static str, Domain)>,
}

impl SearchSpace {
    pub fn for_algo(algo: AlgoTag) -> SearchSpace {
        let params: Vec<(&'static str, Domain)> = match algo {
            AlgoTag::Td3 => vec![
                ("learning_rate", LR),
                ("batch_size", BATCH),
                ("tau", TAU),
                ("train_freq", TRAIN_FREQ),
                ("noise_type", Domain::Labels(&["ornstein-uhlenbeck", "normal", "none"])),
                ("noise_sigma", Domain::Uniform(0.0, 1.0)),
                ("net_arch", ARCH),
            ],
            AlgoTag::Sac => vec![
                ("learning_rate", LR),
                ("batch_size", BATCH),
                ("tau", TAU),
                ("train_freq", TRAIN_FREQ),
                ("learning_starts", Domain::Choice(&[0.0, 100.0, 500.0, 1000.0])),
                ("init_log_std", INIT_LOG_STD),
                ("sde_sample_freq", SDE_FREQ),
                ("net_arch", ARCH),
            ],
            AlgoTag::Ppo => vec![
                ("learning_rate", LR),
                ("batch_size", BATCH),
                ("ent_coef", Domain::LogUniform(1e-9, 0.05)),
                ("clip_range", Domain::Choice(&[0.1, 0.2, 0.3, 0.4])),
                (
                    "n_steps",
                    Domain::Choice(&[8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0, 2048.0]),
                ),
                ("n_epochs", Domain::Choice(&[1.0, 5.0, 10.0, 20.0])),
                // The published λ domain repeats the epoch set {1,5,10,20} —
                // an evident misprint for a fraction — so we expose the
                // natural [0,1] range instead.
                ("gae_lambda", Domain::Uniform(0.0, 1.0)),
                ("max_grad_norm", Domain::Choice(&[0.3, 0.5, 0.6, 0.7, 0.8])),
                ("vf_coef", Domain::Uniform(0.25, 0.75)),
                ("init_log_std", INIT_LOG_STD),
                ("sde_sample_freq", SDE_FREQ),
                ("net_arch", ARCH),
                ("activation", Domain::Labels(&["relu", "tanh"])),
            ],
        };
        SearchSpace { algo, params }
    }

    fn domain(&self, name: &str) -> Option<&Domain> {
        self.params.iter().find(|(n, _)| *n == name).map(|(_, d)| d)
    }
}

/// Draws one configuration: each parameter independently from its domain.
/// Unsearched fields (replay capacity, TD3 warmup and policy delay) keep the
/// library defaults.
pub fn sample_config(space: &SearchSpace, rng: &mut ChaCha8Rng) -> Hyperparams {
    let draws: Vec<(&'static str, Value)> =
        space.params.iter().map(|(name, domain)| (*name, domain.sample(rng))).collect();
    assemble(space.algo, &draws)
}

fn num(draws: &[(&'static str, Value)], name: &str) -> f64 {
    match draws.iter().find(|(n, _)| *n == name) {
        Some((_, Value::Num(v))) => *v,
        _ => panic!("missing numeric parameter '{name}'"),
    }
}

fn label<'d>(draws: &'d [(&'static str, Value)], name: &str) -> &'d str {
    match draws.iter().find(|(n, _)| *n == name) {
        Some((_, Value::Label(s))) => s,
        _ => panic!("missing symbolic parameter '{name}'"),
    }
}

fn parse_arch(label: &str) -> Vec<usize> {
    label.split('-').map(|w| w.parse().expect("arch label")).collect()
}

fn arch_label(arch: &[usize]) -> String {
    arch.iter().map(|w| w.to_string()).collect::<Vec<_>>().join("-")
}

fn assemble(algo: AlgoTag, draws: &[(&'static str, Value)]) -> Hyperparams {
    match algo {
        AlgoTag::Td3 => Hyperparams::Td3(Td3Hp {
            learning_rate: num(draws, "learning_rate"),
            batch_size: num(draws, "batch_size") as usize,
            tau: num(draws, "tau"),
            train_freq: num(draws, "train_freq") as u64,
            noise: match label(draws, "noise_type") {
                "ornstein-uhlenbeck" => NoiseKind::OrnsteinUhlenbeck,
                "normal" => NoiseKind::Normal,
                _ => NoiseKind::None,
            },
            noise_sigma: num(draws, "noise_sigma"),
            net_arch: parse_arch(label(draws, "net_arch")),
            ..Td3Hp::default()
        }),
        AlgoTag::Sac => Hyperparams::Sac(SacHp {
            learning_rate: num(draws, "learning_rate"),
            batch_size: num(draws, "batch_size") as usize,
            tau: num(draws, "tau"),
            train_freq: num(draws, "train_freq") as u64,
            learning_starts: num(draws, "learning_starts") as u64,
            init_log_std: num(draws, "init_log_std"),
            sde_sample_freq: num(draws, "sde_sample_freq") as i64,
            net_arch: parse_arch(label(draws, "net_arch")),
            ..SacHp::default()
        }),
        AlgoTag::Ppo => Hyperparams::Ppo(PpoHp {
            learning_rate: num(draws, "learning_rate"),
            batch_size: num(draws, "batch_size") as usize,
            ent_coef: num(draws, "ent_coef"),
            clip_range: num(draws, "clip_range"),
            n_steps: num(draws, "n_steps") as u64,
            n_epochs: num(draws, "n_epochs") as usize,
            gae_lambda: num(draws, "gae_lambda"),
            max_grad_norm: num(draws, "max_grad_norm"),
            vf_coef: num(draws, "vf_coef"),
            init_log_std: num(draws, "init_log_std"),
            sde_sample_freq: num(draws, "sde_sample_freq") as i64,
            net_arch: parse_arch(label(draws, "net_arch")),
            activation: match label(draws, "activation") {
                "relu" => Activation::Relu,
                _ => Activation::Tanh,
            },
        }),
    }
}

/// Flattens a configuration back into the (name, value) rows of its search
/// space, in the space's column order.
pub fn flatten(hp: &Hyperparams) -> Vec<(&'static str, Value)> {
    match hp {
        Hyperparams::Td3(hp) => vec![
            ("learning_rate", Value::Num(hp.learning_rate)),
            ("batch_size", Value::Num(hp.batch_size as f64)),
            ("tau", Value::Num(hp.tau)),
            ("train_freq", Value::Num(hp.train_freq as f64)),
            ("noise_type", Value::Label(hp.noise.to_string())),
            ("noise_sigma", Value::Num(hp.noise_sigma)),
            ("net_arch", Value::Label(arch_label(&hp.net_arch))),
        ],
        Hyperparams::Sac(hp) => vec![
            ("learning_rate", Value::Num(hp.learning_rate)),
            ("batch_size", Value::Num(hp.batch_size as f64)),
            ("tau", Value::Num(hp.tau)),
            ("train_freq", Value::Num(hp.train_freq as f64)),
            ("learning_starts", Value::Num(hp.learning_starts as f64)),
            ("init_log_std", Value::Num(hp.init_log_std)),
            ("sde_sample_freq", Value::Num(hp.sde_sample_freq as f64)),
            ("net_arch", Value::Label(arch_label(&hp.net_arch))),
        ],
        Hyperparams::Ppo(hp) => vec![
            ("learning_rate", Value::Num(hp.learning_rate)),
            ("batch_size", Value::Num(hp.batch_size as f64)),
            ("ent_coef", Value::Num(hp.ent_coef)),
            ("clip_range", Value::Num(hp.clip_range)),
            ("n_steps", Value::Num(hp.n_steps as f64)),
            ("n_epochs", Value::Num(hp.n_epochs as f64)),
            ("gae_lambda", Value::Num(hp.gae_lambda)),
            ("max_grad_norm", Value::Num(hp.max_grad_norm)),
            ("vf_coef", Value::Num(hp.vf_coef)),
            ("init_log_std", Value::Num(hp.init_log_std)),
            ("sde_sample_freq", Value::Num(hp.sde_sample_freq as f64)),
            ("net_arch", Value::Label(arch_label(&hp.net_arch))),
            ("activation", Value::Label(match hp.activation {
                Activation::Relu => "relu".into(),
                _ => "tanh".into(),
            })),
        ],
    }
}

/// Preset fields that sit outside the published tuning domains: the stock
/// PPO library defaults predate the tuned study, with an entropy coefficient
/// of 0 (below the searched floor of 1e-9) and a [64, 64] network that is
/// not among the searched architectures.
pub const PRESET_DOMAIN_EXEMPTIONS: &[(Preset, &str)] =
    &[(Preset::PpoSb3, "ent_coef"), (Preset::PpoSb3, "net_arch")];

/// Names of preset fields that fall outside their search-space domain.
pub fn preset_domain_violations(preset: Preset) -> Vec<&'static str> {
    let hp = preset.hyperparams();
    let space = SearchSpace::for_algo(hp.algo());
    flatten(&hp)
        .into_iter()
        .filter(|(name, value)| {
            space.domain(name).map_or(true, |domain| !domain.contains(value))
        })
        .map(|(name, _)| name)
        .collect()
}

/// One sampled configuration and its fate.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub id: u64,
    pub hyperparams: Hyperparams,
    /// (episodes trained, mean eval reward) at each checkpoint reached.
    pub checkpoints: Vec<(u64, f64)>,
    /// Mean eval reward over the full eval budget; `None` iff the trial was
    /// pruned or diverged.
    pub final_score: Option<f64>,
    pub pruned: bool,
    pub diverged: bool,
}

/// A finished study: every trial, in execution order, plus the winner.
#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub algo: AlgoTag,
    pub train_budget: u64,
    pub eval_budget: u64,
    pub seed: u64,
    pub trials: Vec<Trial>,
    /// Index into `trials` of the best completed trial.
    pub best: usize,
}

impl Study {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }
}

/// Runs `n_trials` sequential trials of random search over the published
/// domains for `algo`. Each trial trains on its own episode streams for
/// `train_budget` episodes; every `train_budget / 10` episodes it is scored
/// on a shared held-out evaluation stream (a tenth of the eval budget) and
/// pruned if it falls strictly below the median of completed trials at the
/// same checkpoint (once at least 5 have completed). Completed trials get a
/// final score over the full `eval_budget`.
pub fn run_study(
    env: &dyn BanditEnv,
    algo: AlgoTag,
    n_trials: u64,
    train_budget: u64,
    eval_budget: u64,
    seed: u64,
) -> Result<Study> {
    run_study_with_space(env, &SearchSpace::for_algo(algo), n_trials, train_budget, eval_budget, seed)
}

/// As `run_study`, over an explicit search space (tests use narrowed ones).
pub(crate) fn run_study_with_space(
    env: &dyn BanditEnv,
    space: &SearchSpace,
    n_trials: u64,
    train_budget: u64,
    eval_budget: u64,
    seed: u64,
) -> Result<Study> {
    if n_trials < 1 {
        return Err(Error::InvalidArgument("study needs at least one trial".into()));
    }
    if train_budget < 1000 || eval_budget < 1000 {
        return Err(Error::InvalidArgument(format!(
            "study budgets must be ≥ 1000 episodes (got train {train_budget}, eval {eval_budget})"
        )));
    }

    let checkpoint_every = train_budget / CHECKPOINTS;
    let intermediate_eval = eval_budget / CHECKPOINTS;
    let mut sampler = episode_rng(seed, SAMPLER_STREAM);
    // Scores of *completed* trials, per checkpoint index, for the median rule.
    let mut completed_scores: Vec<Vec<f64>> = Vec::new();
    let mut trials: Vec<Trial> = Vec::with_capacity(n_trials as usize);

    for id in 0..n_trials {
        let hyperparams = sample_config(space, &mut sampler);
        // Each trial trains on its own seed so its episode draws are
        // independent; evaluations all share the study seed, so scores are
        // directly comparable across trials.
        let train_seed = seed.wrapping_add(1 + id);
        let mut checkpoints: Vec<(u64, f64)> = Vec::new();
        let outcome = train_policy_monitored(
            env,
            &hyperparams,
            train_budget,
            train_seed,
            checkpoint_every,
            &mut |done, snapshot| {
                let (score, _) = evaluate_policy(env, snapshot, seed, intermediate_eval);
                checkpoints.push((done, score));
                let k = checkpoints.len() - 1;
                match completed_scores.get(k) {
                    Some(peers) if peers.len() >= MIN_COMPLETED_FOR_PRUNING => {
                        score >= median(peers)
                    }
                    _ => true,
                }
            },
        );

        // A run that blows up numerically is a failed trial, not a failed
        // study; anything else is a real error.
        let (result, completed) = match outcome {
            Err(Error::Diverged(_)) => {
                trials.push(Trial {
                    id,
                    hyperparams,
                    checkpoints,
                    final_score: None,
                    pruned: false,
                    diverged: true,
                });
                continue;
            }
            other => other?,
        };
        if !completed {
            trials.push(Trial {
                id,
                hyperparams,
                checkpoints,
                final_score: None,
                pruned: true,
                diverged: false,
            });
            continue;
        }

        let (final_score, _) = evaluate_policy(env, &result.policy, seed, eval_budget);
        for (k, &(_, score)) in checkpoints.iter().enumerate() {
            if completed_scores.len() <= k {
                completed_scores.push(Vec::new());
            }
            completed_scores[k].push(score);
        }
        trials.push(Trial {
            id,
            hyperparams,
            checkpoints,
            final_score: Some(final_score),
            pruned: false,
            diverged: false,
        });
    }

    let best = trials
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.final_score.map(|s| (i, s)))
        .max_by(|(_, a), (_, b)| a.partial_cmp(b).expect("finite scores"))
        .map(|(i, _)| i);
    match best {
        Some(best) => Ok(Study {
            algo: space.algo,
            train_budget,
            eval_budget,
            seed,
            trials,
            best,
        }),
        None => {
            let table = trial_table_csv(space.algo, &trials);
            Err(Error::StudyFailed(format!(
                "all {n_trials} trials were pruned or diverged\n{table}"
            )))
        }
    }
}

fn median(scores: &[f64]) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Renders the trial table as CSV: one row per trial with the flattened
/// hyperparameters, the ten checkpoint scores (blank once pruned), the final
/// score (blank unless completed), and the pruned/diverged flags.
pub fn study_to_csv(study: &Study) -> String {
    trial_table_csv(study.algo, &study.trials)
}

fn trial_table_csv(algo: AlgoTag, trials: &[Trial]) -> String {
    let space = SearchSpace::for_algo(algo);
    let mut out = String::from("trial,algo");
    for (name, _) in &space.params {
        let _ = write!(out, ",{name}");
    }
    for k in 1..=CHECKPOINTS {
        let _ = write!(out, ",checkpoint_{k}");
    }
    out.push_str(",final_score,pruned,diverged\n");

    for trial in trials {
        let _ = write!(out, "{},{algo}", trial.id);
        for (_, value) in flatten(&trial.hyperparams) {
            let _ = write!(out, ",{value}");
        }
        for k in 0..CHECKPOINTS as usize {
            match trial.checkpoints.get(k) {
                Some((_, score)) => {
                    let _ = write!(out, ",{score}");
                }
                None => out.push(','),
            }
        }
        match trial.final_score {
            Some(score) => {
                let _ = write!(out, ",{score}");
            }
            None => out.push(','),
        }
        let _ = writeln!(out, ",{},{}", trial.pruned, trial.diverged);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{train_policy, ALL_PRESETS};
    use crate::env::{SyntheticBandit, SyntheticKind};

    fn tiny_ppo_space(lr: Domain) -> SearchSpace {
        SearchSpace {
            algo: AlgoTag::Ppo,
            params: vec![
                ("learning_rate", lr),
                ("batch_size", Domain::Choice(&[16.0])),
                ("ent_coef", Domain::LogUniform(1e-9, 1e-9)),
                ("clip_range", Domain::Choice(&[0.2])),
                ("n_steps", Domain::Choice(&[64.0])),
                ("n_epochs", Domain::Choice(&[5.0])),
                ("gae_lambda", Domain::Uniform(0.95, 0.95)),
                ("max_grad_norm", Domain::Choice(&[0.5])),
                ("vf_coef", Domain::Uniform(0.5, 0.5)),
                ("init_log_std", Domain::Uniform(-0.5, -0.5)),
                ("sde_sample_freq", Domain::Choice(&[-1.0])),
                ("net_arch", Domain::Labels(&["32-32"])),
                ("activation", Domain::Labels(&["tanh"])),
            ],
        }
    }

    #[test]
    fn thousand_samples_stay_inside_their_domains() {
        for (algo, stream) in [(AlgoTag::Td3, 0), (AlgoTag::Sac, 1), (AlgoTag::Ppo, 2)] {
            let space = SearchSpace::for_algo(algo);
            let mut rng = episode_rng(3, stream);
            for _ in 0..1000 {
                let hp = sample_config(&space, &mut rng);
                hp.validate().unwrap();
                let flat = flatten(&hp);
                assert_eq!(flat.len(), space.params.len());
                for ((name, value), (spec_name, domain)) in flat.iter().zip(&space.params) {
                    assert_eq!(name, spec_name);
                    assert!(domain.contains(value), "{algo}: {name} = {value} out of domain");
                }
            }
        }
    }

    #[test]
    fn learning_rate_samples_span_two_decades() {
        let space = SearchSpace::for_algo(AlgoTag::Td3);
        let mut rng = episode_rng(11, 0);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for _ in 0..1000 {
            let Hyperparams::Td3(hp) = sample_config(&space, &mut rng) else { unreachable!() };
            lo = lo.min(hp.learning_rate);
            hi = hi.max(hp.learning_rate);
        }
        assert!((1e-5..=1e-2).contains(&lo) && (1e-5..=1e-2).contains(&hi));
        assert!(hi / lo >= 100.0, "1000 draws span only [{lo}, {hi}]");
    }

    #[test]
    fn presets_lie_inside_the_search_space_modulo_flags() {
        for preset in ALL_PRESETS {
            let mut expected: Vec<&str> = PRESET_DOMAIN_EXEMPTIONS
                .iter()
                .filter(|(p, _)| *p == preset)
                .map(|(_, name)| *name)
                .collect();
            expected.sort_unstable();
            let mut got = preset_domain_violations(preset);
            got.sort_unstable();
            assert_eq!(got, expected, "{preset}");
        }
    }

    #[test]
    fn single_trial_study_never_prunes_and_exports_csv() {
        let env = SyntheticBandit { kind: SyntheticKind::Constant(0.3) };
        let space = tiny_ppo_space(Domain::LogUniform(1e-3, 1e-3));
        let study = run_study_with_space(&env, &space, 1, 1000, 1000, 5).unwrap();
        assert_eq!(study.trials.len(), 1);
        let trial = study.best_trial();
        assert!(!trial.pruned && !trial.diverged);
        assert!(trial.final_score.is_some());
        assert_eq!(trial.checkpoints.len(), CHECKPOINTS as usize);
        for (i, (episodes, score)) in trial.checkpoints.iter().enumerate() {
            assert_eq!(*episodes, (i as u64 + 1) * 100);
            assert!(score.is_finite());
        }

        let csv = study_to_csv(&study);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        let header: Vec<&str> = lines[0].split(',').collect();
        // trial + algo + 13 ppo params + 10 checkpoints + final + 2 flags.
        assert_eq!(header.len(), 2 + 13 + 10 + 3);
        assert_eq!(header[0], "trial");
        assert_eq!(header[2], "learning_rate");
        assert_eq!(header[header.len() - 3], "final_score");
        let row: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(row.len(), header.len());
        assert_eq!(row[0], "0");
        assert_eq!(row[1], "ppo");
        assert_eq!(row[row.len() - 2], "false");
        assert_eq!(row[row.len() - 1], "false");
    }

    #[test]
    fn constant_score_objective_never_prunes() {
        // Every policy ties on the flat bandit, and the pruning rule is a
        // strict inequality, so even late trials survive.
        let env = SyntheticBandit { kind: SyntheticKind::Flat };
        let space = tiny_ppo_space(Domain::LogUniform(1e-5, 1e-2));
        let study = run_study_with_space(&env, &space, 7, 1000, 1000, 9).unwrap();
        assert_eq!(study.trials.len(), 7);
        for trial in &study.trials {
            assert!(!trial.pruned, "trial {} pruned on a constant objective", trial.id);
            assert_eq!(trial.final_score, Some(0.0));
        }
    }

    #[test]
    fn identical_seed_and_budgets_reproduce_the_table() {
        let env = SyntheticBandit { kind: SyntheticKind::Sine };
        let space = tiny_ppo_space(Domain::LogUniform(1e-5, 1e-2));
        let a = run_study_with_space(&env, &space, 5, 1000, 1000, 21).unwrap();
        let b = run_study_with_space(&env, &space, 5, 1000, 1000, 21).unwrap();
        assert_eq!(study_to_csv(&a), study_to_csv(&b));
        assert_eq!(a.best, b.best);
        let c = run_study_with_space(&env, &space, 5, 1000, 1000, 22).unwrap();
        assert_ne!(study_to_csv(&a), study_to_csv(&c));
    }

    #[test]
    fn pruned_trials_sit_strictly_below_the_median_of_completed_peers() {
        let env = SyntheticBandit { kind: SyntheticKind::Sine };
        let space = tiny_ppo_space(Domain::LogUniform(1e-5, 1e-2));
        let study = run_study_with_space(&env, &space, 14, 1000, 1000, 2).unwrap();

        // Replay the sequential pruning decisions from the recorded table.
        let mut completed_at: Vec<Vec<f64>> = Vec::new();
        for trial in &study.trials {
            if trial.pruned {
                assert!(trial.final_score.is_none());
                let (_, last) = *trial.checkpoints.last().unwrap();
                let k = trial.checkpoints.len() - 1;
                assert!(k < CHECKPOINTS as usize);
                let peers = &completed_at[k];
                assert!(peers.len() >= MIN_COMPLETED_FOR_PRUNING);
                assert!(
                    last < median(peers),
                    "trial {} pruned at {last} vs median {}",
                    trial.id,
                    median(peers)
                );
            } else if !trial.diverged {
                assert_eq!(trial.checkpoints.len(), CHECKPOINTS as usize);
                assert!(trial.final_score.is_some());
                for (k, &(_, score)) in trial.checkpoints.iter().enumerate() {
                    if completed_at.len() <= k {
                        completed_at.push(Vec::new());
                    }
                    completed_at[k].push(score);
                }
            }
        }
    }

    #[test]
    fn all_trials_diverging_fails_the_study_with_the_table() {
        let env = SyntheticBandit { kind: SyntheticKind::Constant(0.3) };
        // An absurd learning rate overflows the critics within a few
        // updates (TD3 has no gradient clipping to save it).
        let space = SearchSpace {
            algo: AlgoTag::Td3,
            params: vec![
                ("learning_rate", Domain::Uniform(1e308, 1e308)),
                ("batch_size", Domain::Choice(&[16.0])),
                ("tau", Domain::Choice(&[0.005])),
                ("train_freq", Domain::Choice(&[1.0])),
                ("noise_type", Domain::Labels(&["normal"])),
                ("noise_sigma", Domain::Uniform(0.1, 0.1)),
                ("net_arch", Domain::Labels(&["32-32"])),
            ],
        };
        let err = run_study_with_space(&env, &space, 2, 1000, 1000, 4).unwrap_err();
        match err {
            Error::StudyFailed(msg) => {
                assert!(msg.contains("trial,algo"), "table missing from: {msg}");
                assert!(msg.contains(",true"), "diverged flag missing from: {msg}");
            }
            other => panic!("expected StudyFailed, got {other}"),
        }
    }

    #[test]
    fn rejects_sub_minimum_budgets() {
        let env = SyntheticBandit { kind: SyntheticKind::Flat };
        assert!(run_study(&env, AlgoTag::Ppo, 1, 999, 1000, 0).is_err());
        assert!(run_study(&env, AlgoTag::Ppo, 1, 1000, 999, 0).is_err());
        assert!(run_study(&env, AlgoTag::Ppo, 0, 1000, 1000, 0).is_err());
    }

    #[test]
    fn random_search_matches_published_preset_on_the_bandit() {
        // Head-to-head at equal budgets on the 1-D bandit: the best of ten
        // random draws should do at least as well (within noise) as the
        // tuned preset.
        let env = SyntheticBandit { kind: SyntheticKind::Constant(0.3) };
        let seed = 17;
        let study = run_study(&env, AlgoTag::Ppo, 10, 1000, 1000, seed).unwrap();
        let best = study.best_trial().final_score.unwrap();

        let preset = Preset::PpoOptuna.hyperparams();
        let result = train_policy(&env, &preset, 1000, seed.wrapping_add(1)).unwrap();
        let (preset_score, _) = evaluate_policy(&env, &result.policy, seed, 1000);
        assert!(
            best >= preset_score - 0.02,
            "best of study {best} vs preset {preset_score}"
        );
    }
}
