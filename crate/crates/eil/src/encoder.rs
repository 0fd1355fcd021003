//! Small trainable networks producing per-frame embeddings: an observation
//! encoder and an action encoder whose outputs are concatenated into a joint
//! MLP. All layers are dense with tanh.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, NodeId, Tape};
use crate::domain::{EmbeddingSequence, Frame, Trajectory};
use crate::{Error, Result};

/// Fixed (non-learned) goal-centric input canonicalization.
///
/// Observations are read as a list of 2-D workspace points with the goal
/// last. Each non-goal point is expressed in the frame whose origin is the
/// workspace center and whose x-axis points from the center toward the goal;
/// the goal itself contributes only its distance from the center. Actions are
/// rotated into the same frame and rescaled to O(1). This gives frames at
/// similar task progress similar encoder inputs across episodes with
/// different goals, which is what the cycle-consistency signal needs to get
/// off the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameCanon {
    pub center: [f64; 2],
    /// Multiplier bringing per-step actions to O(1) (1 / max displacement).
    pub act_gain: f64,
    /// Rotate the action into the goal frame (continuous 2-D actions only).
    pub rotate_action: bool,
}

impl FrameCanon {
    /// Canonical obs/action inputs for one frame.
    pub fn apply(&self, obs: &[f64], act: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = obs.len() / 2;
        let goal = [obs[2 * m - 2], obs[2 * m - 1]];
        let axis = [goal[0] - self.center[0], goal[1] - self.center[1]];
        let n = (axis[0] * axis[0] + axis[1] * axis[1]).sqrt().max(1e-12);
        let (ca, sa) = (axis[0] / n, axis[1] / n);
        let rot = |p: [f64; 2]| [ca * p[0] + sa * p[1], -sa * p[0] + ca * p[1]];
        let mut o = Vec::with_capacity(obs.len() - 1);
        for i in 0..m - 1 {
            let p = rot([obs[2 * i] - self.center[0], obs[2 * i + 1] - self.center[1]]);
            o.push(p[0]);
            o.push(p[1]);
        }
        o.push(n);
        let a = if self.rotate_action && act.len() == 2 {
            let r = rot([act[0], act[1]]);
            vec![r[0] * self.act_gain, r[1] * self.act_gain]
        } else {
            act.iter().map(|&x| x * self.act_gain).collect()
        };
        (o, a)
    }

    /// Width of the canonical observation input for a raw `d_obs`.
    fn obs_width(d_obs: usize) -> usize {
        d_obs - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderArch {
    pub d_obs: usize,
    /// Action input width: d_act for continuous actions, the number of
    /// categories for one-hot discrete actions.
    pub d_act_in: usize,
    pub hidden: usize,
    pub e_obs: usize,
    pub e_act: usize,
    pub d_emb: usize,
    /// Optional goal-centric input canonicalization.
    pub canon: Option<FrameCanon>,
}

impl EncoderArch {
    pub fn new(d_obs: usize, d_act_in: usize) -> Self {
        EncoderArch {
            d_obs,
            d_act_in,
            hidden: 32,
            e_obs: 16,
            e_act: 16,
            d_emb: 8,
            canon: None,
        }
    }

    /// Architecture with goal-centric canonicalization derived from the
    /// environment: workspace-center origin, actions normalized by the
    /// per-step displacement bound. Requires an even `d_obs` ≥ 4 (a list of
    /// 2-D points, goal last).
    pub fn with_canon(d_obs: usize, d_act_in: usize, canon: FrameCanon) -> Result<Self> {
        if d_obs < 4 || d_obs % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "canonicalization needs an even d_obs >= 4 (2-D points, goal last), got {d_obs}"
            )));
        }
        Ok(EncoderArch {
            canon: Some(canon),
            ..Self::new(d_obs, d_act_in)
        })
    }

    /// Width of the observation vector fed to the observation MLP.
    pub fn obs_in(&self) -> usize {
        match self.canon {
            Some(_) => FrameCanon::obs_width(self.d_obs),
            None => self.d_obs,
        }
    }
}

/// One dense layer, weights row-major `rows x cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub arch: EncoderArch,
    pub obs_encoder: Mlp,
    pub act_encoder: Mlp,
    pub joint_encoder: Mlp,
}

pub(crate) fn init_dense(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Dense {
    // Glorot uniform with the usual tanh gain, so activation variance is
    // preserved through the stack instead of shrinking layer by layer.
    let gain = 5.0 / 3.0;
    let s = gain * (6.0 / (rows + cols) as f64).sqrt();
    Dense {
        rows,
        cols,
        w: (0..rows * cols).map(|_| rng.gen_range(-s..s)).collect(),
        b: vec![0.0; rows],
    }
}

pub(crate) fn init_mlp(dims: &[usize], rng: &mut ChaCha8Rng) -> Mlp {
    Mlp {
        layers: dims
            .windows(2)
            .map(|w| init_dense(w[1], w[0], rng))
            .collect(),
    }
}

/// Deterministic scaled-uniform initialization.
pub fn init_params(arch: EncoderArch, seed: u64) -> EncoderParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EncoderParams {
        arch,
        obs_encoder: init_mlp(&[arch.obs_in(), arch.hidden, arch.e_obs], &mut rng),
        act_encoder: init_mlp(&[arch.d_act_in, arch.hidden, arch.e_act], &mut rng),
        joint_encoder: init_mlp(&[arch.e_obs + arch.e_act, arch.hidden, arch.d_emb], &mut rng),
    }
}

fn mlp_forward(mlp: &Mlp, input: &[f64]) -> Vec<f64> {
    let mut x = input.to_vec();
    for layer in &mlp.layers {
        let mut y = layer.b.clone();
        for r in 0..layer.rows {
            let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
            y[r] += row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            y[r] = y[r].tanh();
        }
        x = y;
    }
    x
}

/// Pure forward pass on raw inputs.
pub fn encode(params: &EncoderParams, obs: &[f64], act_input: &[f64]) -> Result<Vec<f64>> {
    if obs.len() != params.arch.d_obs {
        return Err(Error::DimensionMismatch(format!(
            "observation dim {} != encoder d_obs {}",
            obs.len(),
            params.arch.d_obs
        )));
    }
    if act_input.len() != params.arch.d_act_in {
        return Err(Error::DimensionMismatch(format!(
            "action input dim {} != encoder d_act_in {}",
            act_input.len(),
            params.arch.d_act_in
        )));
    }
    let (obs, act_input) = match &params.arch.canon {
        Some(c) => c.apply(obs, act_input),
        None => (obs.to_vec(), act_input.to_vec()),
    };
    let eo = mlp_forward(&params.obs_encoder, &obs);
    let ea = mlp_forward(&params.act_encoder, &act_input);
    let mut joint = eo;
    joint.extend(ea);
    Ok(mlp_forward(&params.joint_encoder, &joint))
}

pub fn encode_frame(params: &EncoderParams, frame: &Frame) -> Result<Vec<f64>> {
    encode(
        params,
        &frame.observation,
        &frame.action.as_input(params.arch.d_act_in),
    )
}

pub fn encode_sequence(params: &EncoderParams, trajectory: &Trajectory) -> Result<EmbeddingSequence> {
    let vectors = trajectory
        .frames
        .iter()
        .map(|f| encode_frame(params, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(EmbeddingSequence {
        trajectory_id: trajectory.id.clone(),
        vectors,
    })
}

// ---------------------------------------------------------------------------
// Flat parameter vector (optimizer view)

impl EncoderParams {
    fn mlps(&self) -> [&Mlp; 3] {
        [&self.obs_encoder, &self.act_encoder, &self.joint_encoder]
    }

    fn mlps_mut(&mut self) -> [&mut Mlp; 3] {
        [
            &mut self.obs_encoder,
            &mut self.act_encoder,
            &mut self.joint_encoder,
        ]
    }

    pub fn n_params(&self) -> usize {
        self.mlps()
            .iter()
            .flat_map(|m| m.layers.iter())
            .map(|l| l.w.len() + l.b.len())
            .sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for m in self.mlps() {
            for l in &m.layers {
                out.extend_from_slice(&l.w);
                out.extend_from_slice(&l.b);
            }
        }
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) {
        let mut i = 0;
        for m in self.mlps_mut() {
            for l in &mut m.layers {
                let nw = l.w.len();
                l.w.copy_from_slice(&flat[i..i + nw]);
                i += nw;
                let nb = l.b.len();
                l.b.copy_from_slice(&flat[i..i + nb]);
                i += nb;
            }
        }
        assert_eq!(i, flat.len(), "flat parameter length mismatch");
    }

    pub fn all_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

// ---------------------------------------------------------------------------
// Tape integration

/// Leaf nodes of all encoder parameters on a tape, in `flatten()` order.
pub struct ParamLeaves {
    // (w, b) per layer per mlp
    layers: Vec<(NodeId, NodeId)>,
}

pub fn param_leaves(tape: &mut Tape, params: &EncoderParams) -> ParamLeaves {
    let mut layers = Vec::new();
    for m in params.mlps() {
        for l in &m.layers {
            let w = tape.leaf(l.w.clone());
            let b = tape.leaf(l.b.clone());
            layers.push((w, b));
        }
    }
    ParamLeaves { layers }
}

fn mlp_on_tape(tape: &mut Tape, leaves: &[(NodeId, NodeId)], input: NodeId) -> NodeId {
    let mut x = input;
    for &(w, b) in leaves {
        let y = tape.affine(w, b, x);
        x = tape.tanh(y);
    }
    x
}

/// Differentiable forward pass; mirrors [`encode`].
pub fn encode_on_tape(
    tape: &mut Tape,
    params: &EncoderParams,
    leaves: &ParamLeaves,
    obs: &[f64],
    act_input: &[f64],
) -> NodeId {
    let (obs, act_input) = match &params.arch.canon {
        Some(c) => c.apply(obs, act_input),
        None => (obs.to_vec(), act_input.to_vec()),
    };
    let n_obs = params.obs_encoder.layers.len();
    let n_act = params.act_encoder.layers.len();
    let obs_in = tape.leaf(obs);
    let act_in = tape.leaf(act_input);
    let eo = mlp_on_tape(tape, &leaves.layers[..n_obs], obs_in);
    let ea = mlp_on_tape(tape, &leaves.layers[n_obs..n_obs + n_act], act_in);
    let joint = tape.concat(eo, ea);
    mlp_on_tape(tape, &leaves.layers[n_obs + n_act..], joint)
}

/// Gradient of the given parameter leaves in `flatten()` order.
pub fn flat_grad(grads: &Gradients, leaves: &ParamLeaves) -> Vec<f64> {
    let mut out = Vec::new();
    for &(w, b) in &leaves.layers {
        out.extend_from_slice(grads.get(w));
        out.extend_from_slice(grads.get(b));
    }
    out
}

/// Reverse-mode gradient of an arbitrary scalar loss built on a fresh tape.
/// Returns the loss value and a gradient shaped like `params.flatten()`.
pub fn grad<F>(params: &EncoderParams, build_loss: F) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&mut Tape, &EncoderParams, &ParamLeaves) -> NodeId,
{
    let mut tape = Tape::new();
    let leaves = param_leaves(&mut tape, params);
    let loss = build_loss(&mut tape, params, &leaves);
    let value = tape.scalar(loss);
    let grads = tape.backward(loss)?;
    Ok((value, flat_grad(&grads, &leaves)))
}

// ---------------------------------------------------------------------------
// Checkpoint format (also used for policy weights)

pub fn save_params(params: &EncoderParams, path: &Path) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, params)
        .map_err(|e| Error::Numerical(format!("checkpoint serialization: {e}")))?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<EncoderParams> {
    let r = BufReader::new(File::open(path)?);
    let params: EncoderParams = serde_json::from_reader(r).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("checkpoint: {e}"),
    })?;
    if !params.all_finite() {
        return Err(Error::Numerical("checkpoint contains non-finite weights".into()));
    }
    Ok(params)
}
