//! Versioned binary artifacts for trained policies and the reward baseline.
//!
//! Layout: the magic string `THROWSIM1`, a little-endian u32 header length,
//! a JSON header (artifact kind, hyperparameters, training seed, a digest of
//! the robot + environment configuration, and the layer descriptors), then
//! all 64-bit reals little-endian in row-major order. Loading validates the
//! magic, the digest, and every declared length, so any mismatch names what
//! disagreed instead of yielding garbage weights.

use crate::agents::{Hyperparams, LearnedPolicy};
use crate::baseline::BaselinePredictor;
use crate::env::EnvConfig;
use crate::error::Error;
use crate::motion::RobotSpec;
use crate::nn::{Activation, Layer, Mlp};
use crate::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

const MAGIC: &[u8] = b"THROWSIM1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Baseline,
    Policy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerDesc {
    in_dim: usize,
    out_dim: usize,
    act: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    kind: Kind,
    /// Absent for baseline artifacts.
    hyperparams: Option<Hyperparams>,
    seed: u64,
    env_digest: String,
    layers: Vec<LayerDesc>,
    n_params: usize,
    /// State-independent log-std vector length (PPO policies; 0 otherwise).
    log_std_len: usize,
    /// Trailing scalar block (baseline normalization constants; 0 otherwise).
    extra_len: usize,
}

/// Hex SHA-256 over the canonical JSON of the robot and environment
/// configuration; artifacts refuse to load against a different setup.
pub fn env_digest(robot: &RobotSpec, config: &EnvConfig) -> String {
    #[derive(Serialize)]
    struct Fingerprint<'a> {
        robot: &'a RobotSpec,
        config: &'a EnvConfig,
    }
    let json = serde_json::to_vec(&Fingerprint { robot, config }).expect("serializable config");
    let mut hasher = Sha256::new();
    hasher.update(&json);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write as _;
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

fn act_name(act: Activation) -> &'static str {
    match act {
        Activation::Relu => "relu",
        Activation::Tanh => "tanh",
        Activation::Identity => "identity",
    }
}

fn parse_act(name: &str) -> Result<Activation> {
    match name {
        "relu" => Ok(Activation::Relu),
        "tanh" => Ok(Activation::Tanh),
        "identity" => Ok(Activation::Identity),
        other => Err(Error::BadArtifact(format!("unknown activation '{other}'"))),
    }
}

fn describe(net: &Mlp) -> Vec<LayerDesc> {
    net.layers
        .iter()
        .map(|l| LayerDesc { in_dim: l.in_dim, out_dim: l.out_dim, act: act_name(l.act).into() })
        .collect()
}

fn encode(header: &Header, reals: &[&[f64]]) -> Result<Vec<u8>> {
    let header_json = serde_json::to_vec(header)?;
    let total: usize = reals.iter().map(|block| block.len()).sum();
    let mut out = Vec::with_capacity(MAGIC.len() + 4 + header_json.len() + total * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for block in reals {
        for v in *block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn decode(bytes: &[u8]) -> Result<(Header, Vec<f64>)> {
    let rest = bytes
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::BadArtifact("missing THROWSIM1 magic (wrong or older format)".into()))?;
    if rest.len() < 4 {
        return Err(Error::BadArtifact("truncated before header length".into()));
    }
    let header_len = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
    let rest = &rest[4..];
    if rest.len() < header_len {
        return Err(Error::BadArtifact(format!(
            "truncated header: declared {header_len} bytes, {} present",
            rest.len()
        )));
    }
    let header: Header = serde_json::from_slice(&rest[..header_len])
        .map_err(|e| Error::BadArtifact(format!("corrupt header: {e}")))?;
    let payload = &rest[header_len..];
    let expect = header.n_params + header.log_std_len + header.extra_len;
    if payload.len() != expect * 8 {
        return Err(Error::BadArtifact(format!(
            "payload length mismatch: header declares {expect} reals ({} bytes), file has {}",
            expect * 8,
            payload.len()
        )));
    }
    let reals = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header, reals))
}

fn rebuild_net(descs: &[LayerDesc], params: &[f64]) -> Result<Mlp> {
    if descs.is_empty() {
        return Err(Error::BadArtifact("artifact declares no layers".into()));
    }
    let mut layers = Vec::with_capacity(descs.len());
    let mut n = 0usize;
    for (i, d) in descs.iter().enumerate() {
        if d.in_dim == 0 || d.out_dim == 0 {
            return Err(Error::BadArtifact(format!("layer {i} has a zero dimension")));
        }
        if i > 0 && d.in_dim != descs[i - 1].out_dim {
            return Err(Error::BadArtifact(format!(
                "layer {i} input {} does not chain to previous output {}",
                d.in_dim,
                descs[i - 1].out_dim
            )));
        }
        n += d.out_dim * (d.in_dim + 1);
        layers.push(Layer { in_dim: d.in_dim, out_dim: d.out_dim, act: parse_act(&d.act)? });
    }
    if n != params.len() {
        return Err(Error::BadArtifact(format!(
            "layer shapes need {n} parameters, artifact carries {}",
            params.len()
        )));
    }
    Ok(Mlp { layers, params: params.to_vec() })
}

fn check_digest(header: &Header, robot: &RobotSpec, config: &EnvConfig) -> Result<()> {
    let current = env_digest(robot, config);
    if header.env_digest != current {
        return Err(Error::BadArtifact(format!(
            "environment digest mismatch: artifact was trained under {}, current setup is {}",
            header.env_digest, current
        )));
    }
    Ok(())
}

/// Serializes a trained policy (with the exact hyperparameters and seed that
/// produced it) against the given robot/environment setup.
pub fn policy_to_bytes(
    policy: &LearnedPolicy,
    hp: &Hyperparams,
    seed: u64,
    robot: &RobotSpec,
    config: &EnvConfig,
) -> Result<Vec<u8>> {
    if policy.algo != hp.algo() {
        return Err(Error::InvalidArgument(format!(
            "policy algorithm {} does not match hyperparameters {}",
            policy.algo,
            hp.algo()
        )));
    }
    let header = Header {
        kind: Kind::Policy,
        hyperparams: Some(hp.clone()),
        seed,
        env_digest: env_digest(robot, config),
        layers: describe(&policy.actor),
        n_params: policy.actor.params.len(),
        log_std_len: policy.log_std.len(),
        extra_len: 0,
    };
    encode(&header, &[&policy.actor.params, &policy.log_std])
}

/// Inverse of [`policy_to_bytes`]; validates magic, digest, and shapes.
pub fn policy_from_bytes(
    bytes: &[u8],
    robot: &RobotSpec,
    config: &EnvConfig,
) -> Result<(LearnedPolicy, Hyperparams, u64)> {
    let (header, reals) = decode(bytes)?;
    if header.kind != Kind::Policy {
        return Err(Error::BadArtifact("artifact is a baseline, not a policy".into()));
    }
    check_digest(&header, robot, config)?;
    let hp = header
        .hyperparams
        .ok_or_else(|| Error::BadArtifact("policy artifact without hyperparameters".into()))?;
    if header.extra_len != 0 {
        return Err(Error::BadArtifact("policy artifact with unexpected scalar block".into()));
    }
    let actor = rebuild_net(&header.layers, &reals[..header.n_params])?;
    let log_std = reals[header.n_params..].to_vec();
    Ok((LearnedPolicy { algo: hp.algo(), actor, log_std }, hp, header.seed))
}

pub fn save_policy(
    path: &Path,
    policy: &LearnedPolicy,
    hp: &Hyperparams,
    seed: u64,
    robot: &RobotSpec,
    config: &EnvConfig,
) -> Result<()> {
    fs::write(path, policy_to_bytes(policy, hp, seed, robot, config)?)?;
    Ok(())
}

pub fn load_policy(
    path: &Path,
    robot: &RobotSpec,
    config: &EnvConfig,
) -> Result<(LearnedPolicy, Hyperparams, u64)> {
    policy_from_bytes(&fs::read(path)?, robot, config)
}

/// Number of trailing scalars in a baseline artifact: 4 input means, 4 input
/// stds, train MAE, validation MAE.
const BASELINE_EXTRAS: usize = 10;

pub fn baseline_to_bytes(
    baseline: &BaselinePredictor,
    seed: u64,
    robot: &RobotSpec,
    config: &EnvConfig,
) -> Result<Vec<u8>> {
    let (net, input_mean, input_std, train_mae, val_mae) = baseline.parts();
    let mut extras = Vec::with_capacity(BASELINE_EXTRAS);
    extras.extend_from_slice(&input_mean);
    extras.extend_from_slice(&input_std);
    extras.push(train_mae);
    extras.push(val_mae);
    let header = Header {
        kind: Kind::Baseline,
        hyperparams: None,
        seed,
        env_digest: env_digest(robot, config),
        layers: describe(net),
        n_params: net.params.len(),
        log_std_len: 0,
        extra_len: BASELINE_EXTRAS,
    };
    encode(&header, &[&net.params, &extras])
}

pub fn baseline_from_bytes(
    bytes: &[u8],
    robot: &RobotSpec,
    config: &EnvConfig,
) -> Result<(BaselinePredictor, u64)> {
    let (header, reals) = decode(bytes)?;
    if header.kind != Kind::Baseline {
        return Err(Error::BadArtifact("artifact is a policy, not a baseline".into()));
    }
    check_digest(&header, robot, config)?;
    if header.log_std_len != 0 || header.extra_len != BASELINE_EXTRAS {
        return Err(Error::BadArtifact(format!(
            "baseline artifact must carry exactly {BASELINE_EXTRAS} trailing scalars"
        )));
    }
    let net = rebuild_net(&header.layers, &reals[..header.n_params])?;
    let extras = &reals[header.n_params..];
    let mut input_mean = [0.0; 4];
    let mut input_std = [0.0; 4];
    input_mean.copy_from_slice(&extras[..4]);
    input_std.copy_from_slice(&extras[4..8]);
    let baseline = BaselinePredictor::from_parts(net, input_mean, input_std, extras[8], extras[9])?;
    Ok((baseline, header.seed))
}

pub fn save_baseline(
    path: &Path,
    baseline: &BaselinePredictor,
    seed: u64,
    robot: &RobotSpec,
    config: &EnvConfig,
) -> Result<()> {
    fs::write(path, baseline_to_bytes(baseline, seed, robot, config)?)?;
    Ok(())
}

pub fn load_baseline(
    path: &Path,
    robot: &RobotSpec,
    config: &EnvConfig,
) -> Result<(BaselinePredictor, u64)> {
    baseline_from_bytes(&fs::read(path)?, robot, config)
}
