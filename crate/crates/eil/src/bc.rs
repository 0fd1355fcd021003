//! Behavior cloning: fit a policy network to (observation, action) pairs and
//! evaluate it closed-loop in the environment.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, Tape};
use crate::domain::{Action, ActionKind, Dataset};
use crate::encoder::{init_mlp, Mlp};
use crate::env::{self, EnvSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyArch {
    pub d_obs: usize,
    /// Output width: d_act for continuous actions, logits over categories
    /// for discrete ones.
    pub d_act: usize,
    pub hidden: usize,
    pub action_kind: ActionKind,
}

impl PolicyArch {
    pub fn new(d_obs: usize, d_act: usize, action_kind: ActionKind) -> Self {
        PolicyArch {
            d_obs,
            d_act,
            hidden: 64,
            action_kind,
        }
    }
}

/// Two tanh hidden layers, linear output head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub arch: PolicyArch,
    pub net: Mlp,
}

pub fn init_policy(arch: PolicyArch, seed: u64) -> PolicyParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PolicyParams {
        arch,
        net: init_mlp(&[arch.d_obs, arch.hidden, arch.hidden, arch.d_act], &mut rng),
    }
}

impl PolicyParams {
    pub fn n_params(&self) -> usize {
        self.net.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.net.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) {
        let mut i = 0;
        for l in &mut self.net.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&flat[i..i + nw]);
            i += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&flat[i..i + nb]);
            i += nb;
        }
        assert_eq!(i, flat.len(), "flat parameter length mismatch");
    }

    pub fn all_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

/// Pure forward pass: tanh on every layer but the last, which stays linear
/// (raw action values or class logits).
pub fn policy_forward(params: &PolicyParams, obs: &[f64]) -> Result<Vec<f64>> {
    if obs.len() != params.arch.d_obs {
        return Err(Error::DimensionMismatch(format!(
            "observation dim {} != policy d_obs {}",
            obs.len(),
            params.arch.d_obs
        )));
    }
    let mut x = obs.to_vec();
    let last = params.net.layers.len() - 1;
    for (li, layer) in params.net.layers.iter().enumerate() {
        let mut y = layer.b.clone();
        for r in 0..layer.rows {
            let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
            y[r] += row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            if li < last {
                y[r] = y[r].tanh();
            }
        }
        x = y;
    }
    Ok(x)
}

/// Closed-loop action: the raw output for continuous policies (the
/// environment clamps it), the argmax category for discrete ones.
pub fn policy_action(params: &PolicyParams, obs: &[f64]) -> Result<Action> {
    let out = policy_forward(params, obs)?;
    Ok(match params.arch.action_kind {
        ActionKind::Continuous => Action::Continuous(out),
        ActionKind::Discrete => {
            let mut best = 0;
            for (i, &v) in out.iter().enumerate() {
                if v > out[best] {
                    best = i;
                }
            }
            Action::Discrete(best)
        }
    })
}

fn policy_leaves(tape: &mut Tape, params: &PolicyParams) -> Vec<(NodeId, NodeId)> {
    params
        .net
        .layers
        .iter()
        .map(|l| {
            let w = tape.leaf(l.w.clone());
            let b = tape.leaf(l.b.clone());
            (w, b)
        })
        .collect()
}

fn policy_on_tape(tape: &mut Tape, leaves: &[(NodeId, NodeId)], obs: &[f64]) -> NodeId {
    let mut x = tape.leaf(obs.to_vec());
    let last = leaves.len() - 1;
    for (li, &(w, b)) in leaves.iter().enumerate() {
        x = tape.affine(w, b, x);
        if li < last {
            x = tape.tanh(x);
        }
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub n_steps: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            learning_rate: 0.02,
            momentum: 0.9,
            n_steps: 4000,
            batch_size: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcLogRow {
    pub step: usize,
    pub loss: f64,
}

struct Sample {
    obs: Vec<f64>,
    target: Action,
}

/// Squared-error (continuous) or cross-entropy (discrete) loss over a batch,
/// built on the tape.
fn batch_loss_on_tape(
    tape: &mut Tape,
    leaves: &[(NodeId, NodeId)],
    kind: ActionKind,
    batch: &[&Sample],
) -> NodeId {
    let mut per_sample = Vec::with_capacity(batch.len());
    for s in batch {
        let pred = policy_on_tape(tape, leaves, &s.obs);
        let l = match (kind, &s.target) {
            (ActionKind::Continuous, Action::Continuous(a)) => {
                let target = tape.leaf(a.clone());
                tape.sq_dist(pred, target)
            }
            (ActionKind::Discrete, Action::Discrete(i)) => {
                let probs = tape.softmax(pred);
                let n = tape.value(probs).len();
                let mut one_hot = vec![0.0; n];
                one_hot[*i] = 1.0;
                let p = tape.dot_const(probs, one_hot);
                let p = tape.clamp_min(p, 1e-12);
                let lp = tape.log(p);
                tape.scale(lp, -1.0)
            }
            _ => unreachable!("dataset validation guarantees matching action kinds"),
        };
        per_sample.push(l);
    }
    tape.mean(per_sample)
}

/// Minibatch gradient descent with momentum on the cloning loss.
pub fn train_bc(dataset: &Dataset, config: &BcConfig) -> Result<(PolicyParams, Vec<BcLogRow>)> {
    dataset.validate()?;
    if config.batch_size == 0 || config.n_steps == 0 {
        return Err(Error::Dataset("batch_size and n_steps must be > 0".into()));
    }
    let samples: Vec<Sample> = dataset
        .trajectories
        .iter()
        .flat_map(|t| t.frames.iter())
        .map(|f| Sample {
            obs: f.observation.clone(),
            target: f.action.clone(),
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::Dataset("no frames to clone from".into()));
    }

    let arch = PolicyArch::new(dataset.d_obs, dataset.d_act, dataset.action_kind);
    let mut params = init_policy(arch, config.seed);
    let mut flat = params.flatten();
    let mut velocity = vec![0.0; flat.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut log = Vec::new();

    for step in 0..config.n_steps {
        let batch: Vec<&Sample> = (0..config.batch_size.min(samples.len()))
            .map(|_| &samples[rng.gen_range(0..samples.len())])
            .collect();
        let mut tape = Tape::new();
        let leaves = policy_leaves(&mut tape, &params);
        let loss = batch_loss_on_tape(&mut tape, &leaves, dataset.action_kind, &batch);
        let loss_val = tape.scalar(loss);
        let grads = tape.backward(loss).map_err(|e| {
            Error::Numerical(format!("cloning loss diverged at step {step}: {e}"))
        })?;
        let mut g = Vec::with_capacity(flat.len());
        for &(w, b) in &leaves {
            g.extend_from_slice(grads.get(w));
            g.extend_from_slice(grads.get(b));
        }
        for i in 0..flat.len() {
            velocity[i] = config.momentum * velocity[i] + g[i];
            flat[i] -= config.learning_rate * velocity[i];
        }
        params.assign_flat(&flat);
        if !params.all_finite() {
            return Err(Error::Numerical(format!(
                "policy weights became non-finite at step {step}"
            )));
        }
        log.push(BcLogRow { step, loss: loss_val });
    }
    Ok((params, log))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub success: bool,
    /// Smallest task distance seen over the episode.
    pub min_distance: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub success_rate: f64,
    pub mean_min_distance: f64,
    pub trials: Vec<TrialOutcome>,
}

fn rollout(spec: &EnvSpec, params: &PolicyParams, seed: u64) -> Result<TrialOutcome> {
    let mut state = env::reset(spec, seed);
    let (mut ok, d0) = env::is_success(spec, &state);
    let mut min_distance = d0;
    while !ok && state.t < spec.max_steps {
        let obs = env::observation(spec, &state);
        let action = match policy_action(params, &obs)? {
            Action::Continuous(v) if v.len() == 2 => [v[0], v[1]],
            _ => {
                return Err(Error::Env(
                    "closed-loop evaluation needs a 2-d continuous policy".into(),
                ))
            }
        };
        state = env::step(spec, &state, action)?;
        let (s, d) = env::is_success(spec, &state);
        ok = s;
        min_distance = min_distance.min(d);
    }
    Ok(TrialOutcome {
        seed,
        success: ok,
        min_distance,
        steps: state.t,
    })
}

/// Closed-loop evaluation over the given episode seeds. Trials are
/// independent, so the parallel map is deterministic regardless of worker
/// count.
pub fn evaluate(spec: &EnvSpec, params: &PolicyParams, seeds: &[u64]) -> Result<EvalReport> {
    if seeds.is_empty() {
        return Err(Error::Env("no evaluation seeds".into()));
    }
    let trials: Vec<TrialOutcome> = seeds
        .par_iter()
        .map(|&s| rollout(spec, params, s))
        .collect::<Result<Vec<_>>>()?;
    let n = trials.len() as f64;
    let success_rate = trials.iter().filter(|t| t.success).count() as f64 / n;
    let mean_min_distance = trials.iter().map(|t| t.min_distance).sum::<f64>() / n;
    Ok(EvalReport {
        success_rate,
        mean_min_distance,
        trials,
    })
}

pub fn save_policy(params: &PolicyParams, path: &Path) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, params)
        .map_err(|e| Error::Numerical(format!("checkpoint serialization: {e}")))?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<PolicyParams> {
    let r = BufReader::new(File::open(path)?);
    let params: PolicyParams = serde_json::from_reader(r).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("checkpoint: {e}"),
    })?;
    if !params.all_finite() {
        return Err(Error::Numerical("checkpoint contains non-finite weights".into()));
    }
    Ok(params)
}
