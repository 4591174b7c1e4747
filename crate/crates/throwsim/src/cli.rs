//! Command-line front end: the whole pipeline as subcommands.
//!
//! The workflow is `gen-baseline` → `train-baseline` → `train` →
//! `eval`/`compare`, with `sweep` for hyperparameter search. Every command is
//! seed-deterministic and single-threaded, so re-running with identical flags
//! reproduces every output file byte for byte.
//!
//! Exit codes: 0 success (including `--help`/`--version`), 1 bad command-line
//! arguments, 2 invalid configuration, 3 runtime failures (I/O, malformed
//! artifacts, diverged or failed runs).

use crate::agents::{
    curve_to_csv, evaluate_policy, train_policy, AlgoTag, HassanPolicy, Hyperparams,
    LearnedThrowPolicy, PapPolicy, Preset,
};
use crate::baseline::{
    dataset_from_csv, dataset_to_csv, generate_dataset, BaselinePredictor, FitOptions,
};
use crate::config::ToolkitConfig;
use crate::env::{ThrowEnv, ThrowPolicy};
use crate::error::Error;
use crate::eval::{compare, comparison_to_csv, render_comparison};
use crate::persist::{load_baseline, load_policy, save_baseline, save_policy};
use crate::tuning::{run_study, study_to_csv};
use crate::Result;
use clap::{Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Parser)]
#[command(
    name = "throwsim",
    version,
    about = "Desk-scale pick-and-throw simulator: train, evaluate, and tune throwing policies"
)]
pub struct Cli {
    /// TOML configuration file (robot, environment, seed, paths).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker-count cap. Accepted for interface compatibility; execution is
    /// always sequential so outputs stay byte-identical for a given seed.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample labelled carry-time data for the reward baseline.
    ///
    /// Writes CSV with header `object_x,object_y,bin_x,bin_y,pap_time_s`.
    GenBaseline {
        /// Number of samples.
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        /// RNG seed (defaults to the config seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV path.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },

    /// Fit the carry-time baseline on a dataset and save the artifact.
    TrainBaseline {
        /// Dataset CSV written by gen-baseline.
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        /// Fit seed (defaults to the config seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Artifact path (defaults to the config baseline_path).
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },

    /// Train a throwing policy; writes a policy artifact and learning curve
    /// per seed.
    Train {
        /// Algorithm: td3, sac, or ppo.
        #[arg(long)]
        algo: String,
        /// Hyperparameters: "sb3" (library defaults), "optuna" (tuned), or a
        /// JSON file holding a tagged hyperparameter set.
        #[arg(long, default_value = "sb3")]
        preset: String,
        /// Training episodes per seed.
        #[arg(long)]
        episodes: u64,
        /// Training seed(s), comma separated (defaults to the config seed).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        seed: Option<Vec<u64>>,
        /// Output directory (defaults to the config out_dir).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },

    /// Evaluate one policy and print a metrics table.
    Eval {
        /// "pap", "hassan", or a policy artifact path.
        #[arg(long, value_name = "POLICY")]
        policy: String,
        /// Evaluation episodes.
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        /// Evaluation seed (defaults to the config seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the metrics as CSV.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },

    /// Evaluate several policies on the same episodes, side by side.
    Compare {
        /// Comma-separated mix of "pap", "hassan", and artifact paths.
        #[arg(long, value_delimiter = ',', num_args = 1.., value_name = "POLICIES")]
        policies: Vec<String>,
        /// Evaluation episodes (shared across policies).
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        /// Evaluation seed (defaults to the config seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the metrics as CSV.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },

    /// Random hyperparameter search with median pruning.
    Sweep {
        /// Algorithm: td3, sac, or ppo.
        #[arg(long)]
        algo: String,
        /// Number of sampled configurations.
        #[arg(long, default_value_t = 20)]
        trials: u64,
        /// Training episodes per trial.
        #[arg(long, default_value_t = 50_000)]
        train_budget: u64,
        /// Episodes behind each final score (checkpoints use a tenth).
        #[arg(long, default_value_t = 10_000)]
        eval_budget: u64,
        /// Study seed (defaults to the config seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Write the trial table CSV here instead of stdout.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

/// Parses `std::env::args`, runs the command, and returns the process exit
/// code. Clap's help/version output counts as success.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

/// Runs one parsed command against its configuration.
pub fn execute(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => ToolkitConfig::load(path)?,
        None => ToolkitConfig::default(),
    };
    if cli.jobs == 0 {
        return Err(Error::InvalidArgument("--jobs must be ≥ 1".into()));
    }
    if cli.jobs > 1 {
        eprintln!(
            "note: --jobs {} requested; running sequentially (outputs are identical either way)",
            cli.jobs
        );
    }
    match cli.command {
        Command::GenBaseline { n, seed, out } => gen_baseline(&config, n, seed, &out),
        Command::TrainBaseline { data, seed, out } => train_baseline(&config, &data, seed, out),
        Command::Train { algo, preset, episodes, seed, out } => {
            train(&config, &algo, &preset, episodes, seed, out)
        }
        Command::Eval { policy, n, seed, out } => {
            run_comparison(&config, &[policy], n, seed, out)
        }
        Command::Compare { policies, n, seed, out } => {
            run_comparison(&config, &policies, n, seed, out)
        }
        Command::Sweep { algo, trials, train_budget, eval_budget, seed, out } => {
            sweep(&config, &algo, trials, train_budget, eval_budget, seed, out)
        }
    }
}

fn gen_baseline(config: &ToolkitConfig, n: u64, seed: Option<u64>, out: &Path) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("gen-baseline: --n must be ≥ 1".into()));
    }
    let seed = seed.unwrap_or(config.seed);
    let data = generate_dataset(n as usize, &config.env, &config.robot, seed);
    write_file(out, dataset_to_csv(&data).as_bytes())?;
    println!("wrote {} samples to {}", data.len(), out.display());
    Ok(())
}

fn train_baseline(
    config: &ToolkitConfig,
    data: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let seed = seed.unwrap_or(config.seed);
    let samples = dataset_from_csv(&fs::read_to_string(data)?)?;
    let options = FitOptions { seed, ..FitOptions::default() };
    let predictor = BaselinePredictor::fit(&samples, &options)?;
    let out = out.unwrap_or_else(|| config.baseline_path.clone());
    write_parent_dir(&out)?;
    save_baseline(&out, &predictor, seed, &config.robot, &config.env)?;
    let (_, _, _, train_mae, val_mae) = predictor.parts();
    println!(
        "fitted on {} samples: train MAE {:.2} ms, validation MAE {:.2} ms -> {}",
        samples.len(),
        train_mae * 1e3,
        val_mae * 1e3,
        out.display()
    );
    Ok(())
}

fn train(
    config: &ToolkitConfig,
    algo: &str,
    preset: &str,
    episodes: u64,
    seeds: Option<Vec<u64>>,
    out: Option<PathBuf>,
) -> Result<()> {
    let algo = AlgoTag::from_str(algo)?;
    let (hp, preset_label) = resolve_hyperparams(algo, preset)?;
    let env = load_env(config)?;
    let out_dir = out.unwrap_or_else(|| config.out_dir.clone());
    fs::create_dir_all(&out_dir)?;
    let seeds = seeds.unwrap_or_else(|| vec![config.seed]);
    for &seed in &seeds {
        let result = train_policy(&env, &hp, episodes, seed)?;
        let stem = format!("{algo}-{preset_label}-seed{seed}");
        let policy_path = out_dir.join(format!("{stem}.throwsim"));
        save_policy(&policy_path, &result.policy, &hp, seed, &env.robot, &env.config)?;
        write_file(
            &out_dir.join(format!("{stem}-curve.csv")),
            curve_to_csv(&result.curve).as_bytes(),
        )?;
        let (reward, success) = evaluate_policy(&env, &result.policy, seed, 1000);
        println!(
            "{stem}: {episodes} episodes, held-out mean reward {:.1} ms, success {:.1}% -> {}",
            reward * 1e3,
            success * 100.0,
            policy_path.display()
        );
    }
    Ok(())
}

fn run_comparison(
    config: &ToolkitConfig,
    specs: &[String],
    n: u64,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let env = load_env(config)?;
    let seed = seed.unwrap_or(config.seed);
    let policies: Vec<Box<dyn ThrowPolicy>> = specs
        .iter()
        .map(|spec| build_policy(spec, &env))
        .collect::<Result<_>>()?;
    let refs: Vec<&dyn ThrowPolicy> = policies.iter().map(|b| b.as_ref()).collect();
    let rows = compare(&env, &refs, n, seed)?;
    print!("{}", render_comparison(&rows));
    if let Some(path) = out {
        write_file(&path, comparison_to_csv(&rows).as_bytes())?;
        println!("wrote metrics to {}", path.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    config: &ToolkitConfig,
    algo: &str,
    trials: u64,
    train_budget: u64,
    eval_budget: u64,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let algo = AlgoTag::from_str(algo)?;
    let env = load_env(config)?;
    let seed = seed.unwrap_or(config.seed);
    let study = run_study(&env, algo, trials, train_budget, eval_budget, seed)?;
    let csv = study_to_csv(&study);
    let best = study.best_trial();
    let summary = format!(
        "best of {} trials: trial {} with mean eval reward {:.1} ms over {} episodes\nhyperparameters: {}",
        study.trials.len(),
        best.id,
        best.final_score.unwrap_or(f64::NAN) * 1e3,
        eval_budget,
        serde_json::to_string(&best.hyperparams)?,
    );
    match out {
        Some(path) => {
            write_file(&path, csv.as_bytes())?;
            println!("{summary}");
            println!("wrote trial table to {}", path.display());
        }
        None => {
            print!("{csv}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

/// Loads the baseline artifact named by the config and assembles the
/// environment around it.
fn load_env(config: &ToolkitConfig) -> Result<ThrowEnv> {
    if !config.baseline_path.exists() {
        return Err(Error::InvalidConfig(format!(
            "baseline artifact {} not found; run gen-baseline and train-baseline first",
            config.baseline_path.display()
        )));
    }
    let (baseline, _) = load_baseline(&config.baseline_path, &config.robot, &config.env)?;
    ThrowEnv::new(config.env.clone(), config.robot.clone(), baseline)
}

/// Maps `--preset` to hyperparameters plus a label used in output filenames:
/// "sb3" and "optuna" name the built-in presets for `algo`; anything else is
/// read as a JSON hyperparameter file (labelled by its file stem).
fn resolve_hyperparams(algo: AlgoTag, preset: &str) -> Result<(Hyperparams, String)> {
    match preset {
        "sb3" | "optuna" => {
            let built_in = Preset::from_str(&format!("{algo}-{preset}"))?;
            Ok((built_in.hyperparams(), preset.to_string()))
        }
        path => {
            let text = fs::read_to_string(path).map_err(|err| {
                Error::InvalidArgument(format!(
                    "--preset must be \"sb3\", \"optuna\", or a readable JSON file ({path}: {err})"
                ))
            })?;
            let hp: Hyperparams = serde_json::from_str(&text)?;
            if hp.algo() != algo {
                return Err(Error::InvalidArgument(format!(
                    "preset file {path} holds {} hyperparameters but --algo is {algo}",
                    hp.algo()
                )));
            }
            hp.validate()?;
            Ok((hp, file_stem(Path::new(path), "custom")))
        }
    }
}

/// Maps a policy spec to a driver: the two scripted policies by name, or a
/// learned-policy artifact by path (run deterministically).
fn build_policy(spec: &str, env: &ThrowEnv) -> Result<Box<dyn ThrowPolicy>> {
    match spec {
        "pap" => Ok(Box::new(PapPolicy)),
        "hassan" => Ok(Box::new(HassanPolicy)),
        path => {
            if !Path::new(path).exists() {
                return Err(Error::InvalidArgument(format!(
                    "unknown policy {spec:?}: expected \"pap\", \"hassan\", or a policy artifact path"
                )));
            }
            let (policy, _, _) = load_policy(Path::new(path), &env.robot, &env.config)?;
            Ok(Box::new(LearnedThrowPolicy {
                policy,
                deterministic: true,
                label: file_stem(Path::new(path), "policy"),
            }))
        }
    }
}

fn file_stem(path: &Path, fallback: &str) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| fallback.to_string())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    write_parent_dir(path)?;
    fs::write(path, bytes)?;
    Ok(())
}

fn write_parent_dir(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}
