//! Action-conditioned temporal cycle-consistency: the soft nearest neighbor,
//! the cycle-back statistics, the regression loss with variance
//! regularization, and its training loop.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{NodeId, Tape};
use crate::domain::{Dataset, EmbeddingSequence};
use crate::encoder::{self, EncoderParams, ParamLeaves};
use crate::{Error, Result};

/// Floor applied to sigma before both the division and the log; the loss is
/// undefined at sigma = 0.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Everything computed when cycling one anchor embedding through another
/// sequence and back.
#[derive(Debug, Clone)]
pub struct CycleBackResult {
    pub alphas: Vec<f64>,
    pub v_tilde: Vec<f64>,
    pub betas: Vec<f64>,
    /// Expected 0-based return index.
    pub i_hat: f64,
    /// Variance of the return distribution over indices.
    pub sigma: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Softmax of negative squared distances, computed with the usual
/// max-shift so weights sum to 1 even for far-apart embeddings.
fn soft_weights(query: &[f64], candidates: &[Vec<f64>]) -> Vec<f64> {
    let neg_d: Vec<f64> = candidates.iter().map(|c| -sq_dist(query, c)).collect();
    let m = neg_d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = neg_d.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// Soft nearest neighbor of `u` among the frames of `v_seq`:
/// the weighted average of candidates under softmax(-distance^2) weights.
pub fn soft_nearest_neighbor(u: &[f64], v_seq: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    if v_seq.is_empty() {
        return Err(Error::Numerical("soft nearest neighbor over empty sequence".into()));
    }
    let alphas = soft_weights(u, v_seq);
    let dim = v_seq[0].len();
    let mut v_tilde = vec![0.0; dim];
    for (a, v) in alphas.iter().zip(v_seq) {
        for (out, x) in v_tilde.iter_mut().zip(v) {
            *out += a * x;
        }
    }
    Ok((v_tilde, alphas))
}

/// Cycle-back statistics of `v_tilde` over `u_seq`: return weights, the
/// expected 0-based index, and the index variance.
pub fn cycle_back(v_tilde: &[f64], u_seq: &[Vec<f64>]) -> Result<(Vec<f64>, f64, f64)> {
    if u_seq.is_empty() {
        return Err(Error::Numerical("cycle back over empty sequence".into()));
    }
    let betas = soft_weights(v_tilde, u_seq);
    let i_hat: f64 = betas.iter().enumerate().map(|(k, b)| b * k as f64).sum();
    let sigma: f64 = betas
        .iter()
        .enumerate()
        .map(|(k, b)| b * (k as f64 - i_hat) * (k as f64 - i_hat))
        .sum();
    Ok((betas, i_hat, sigma))
}

/// Full cycle for one anchor index of `u_seq` through `v_seq` and back.
pub fn cycle(u_seq: &[Vec<f64>], v_seq: &[Vec<f64>], anchor: usize) -> Result<CycleBackResult> {
    let (v_tilde, alphas) = soft_nearest_neighbor(&u_seq[anchor], v_seq)?;
    let (betas, i_hat, sigma) = cycle_back(&v_tilde, u_seq)?;
    Ok(CycleBackResult {
        alphas,
        v_tilde,
        betas,
        i_hat,
        sigma,
    })
}

/// Cycle-back regression loss, mean over anchors:
/// |i - i_hat|^2 / max(sigma, eps)^p + lambda * log(max(sigma, eps)),
/// with p the variance exponent (2 as printed, 1 optional).
pub fn tcc_pair_loss(
    u_seq: &[Vec<f64>],
    v_seq: &[Vec<f64>],
    anchors: &[usize],
    lambda: f64,
    variance_exponent: u32,
) -> Result<f64> {
    assert!(matches!(variance_exponent, 1 | 2));
    let mut total = 0.0;
    for &i in anchors {
        let r = cycle(u_seq, v_seq, i)?;
        let s = r.sigma.max(SIGMA_FLOOR);
        let denom = if variance_exponent == 2 { s * s } else { s };
        let err = i as f64 - r.i_hat;
        total += err * err / denom + lambda * s.ln();
    }
    Ok(total / anchors.len() as f64)
}

/// Differentiable version of [`tcc_pair_loss`] over embedding nodes.
pub fn pair_loss_on_tape(
    tape: &mut Tape,
    u_nodes: &[NodeId],
    v_nodes: &[NodeId],
    anchors: &[usize],
    lambda: f64,
    variance_exponent: u32,
) -> NodeId {
    assert!(matches!(variance_exponent, 1 | 2));
    let n = u_nodes.len();
    let ks: Vec<f64> = (0..n).map(|k| k as f64).collect();
    let ks2: Vec<f64> = ks.iter().map(|k| k * k).collect();
    let ones = vec![1.0; n];
    let mut terms = Vec::with_capacity(anchors.len());
    for &i in anchors {
        let dists: Vec<NodeId> = v_nodes.iter().map(|&v| tape.sq_dist(u_nodes[i], v)).collect();
        let stacked = tape.stack(dists);
        let neg = tape.scale(stacked, -1.0);
        let alphas = tape.softmax(neg);
        let v_tilde = tape.weighted_sum(alphas, v_nodes.to_vec());
        let back: Vec<NodeId> = u_nodes.iter().map(|&u| tape.sq_dist(v_tilde, u)).collect();
        let bstack = tape.stack(back);
        let bneg = tape.scale(bstack, -1.0);
        let betas = tape.softmax(bneg);
        let i_hat = tape.dot_const(betas, ks.clone());
        // sigma = E[k^2] - 2*i_hat*E[k] + i_hat^2 * sum(betas)
        //       = s2 + i_hat^2 * (s0 - 2)   since i_hat = E[k]
        let s2 = tape.dot_const(betas, ks2.clone());
        let s0 = tape.dot_const(betas, ones.clone());
        let ih2 = tape.mul(i_hat, i_hat);
        let s0m2 = tape.add_const(s0, -2.0);
        let corr = tape.mul(ih2, s0m2);
        let sigma = tape.add(s2, corr);
        let sigma_f = tape.clamp_min(sigma, SIGMA_FLOOR);
        let err = tape.add_const(i_hat, -(i as f64));
        let num = tape.mul(err, err);
        let denom = if variance_exponent == 2 {
            tape.mul(sigma_f, sigma_f)
        } else {
            sigma_f
        };
        let reg_log = tape.log(sigma_f);
        let reg = tape.scale(reg_log, lambda);
        let frac = tape.div(num, denom);
        terms.push(tape.add(frac, reg));
    }
    tape.mean(terms)
}

/// Fraction of anchor indices that are hard-nearest-neighbor
/// cycle-consistent; ties broken toward the smaller index.
pub fn cycle_consistency_rate(u_seq: &[Vec<f64>], v_seq: &[Vec<f64>]) -> f64 {
    assert!(!u_seq.is_empty() && !v_seq.is_empty());
    let argmin = |q: &[f64], seq: &[Vec<f64>]| -> usize {
        let mut best = 0;
        let mut best_d = sq_dist(q, &seq[0]);
        for (j, c) in seq.iter().enumerate().skip(1) {
            let d = sq_dist(q, c);
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        best
    };
    let mut consistent = 0;
    for (i, u) in u_seq.iter().enumerate() {
        let j = argmin(u, v_seq);
        let k = argmin(&v_seq[j], u_seq);
        if k == i {
            consistent += 1;
        }
    }
    consistent as f64 / u_seq.len() as f64
}

// ---------------------------------------------------------------------------
// Training

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSampling {
    AllOrderedPairs,
    RandomPairsPerStep,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub n_steps: usize,
    pub pair_sampling: PairSampling,
    /// Anchor indices sampled per pair per step; `None` uses every index of
    /// the first sequence.
    pub frames_per_step: Option<usize>,
    /// 2 divides by sigma^2 (as printed), 1 by sigma.
    pub variance_exponent: u32,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1e-3,
            learning_rate: 0.02,
            momentum: 0.9,
            n_steps: 5000,
            pair_sampling: PairSampling::RandomPairsPerStep,
            frames_per_step: None,
            variance_exponent: 2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda <= 0.0 {
            return Err(Error::Numerical("lambda must be > 0".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Numerical("learning_rate must be > 0".into()));
        }
        if !matches!(self.variance_exponent, 1 | 2) {
            return Err(Error::Numerical("variance_exponent must be 1 or 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainLogRow {
    pub step: usize,
    pub loss: f64,
    pub holdout_cycle_rate: f64,
}

// Per-frame encoder inputs of one trajectory.
struct SeqInputs {
    obs: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
}

fn seq_inputs(dataset: &Dataset, idx: usize, d_act_in: usize) -> SeqInputs {
    let t = &dataset.trajectories[idx];
    SeqInputs {
        obs: t.frames.iter().map(|f| f.observation.clone()).collect(),
        act: t.frames.iter().map(|f| f.action.as_input(d_act_in)).collect(),
    }
}

fn encode_seq_on_tape(
    tape: &mut Tape,
    params: &EncoderParams,
    leaves: &ParamLeaves,
    seq: &SeqInputs,
) -> Vec<NodeId> {
    seq.obs
        .iter()
        .zip(&seq.act)
        .map(|(o, a)| encoder::encode_on_tape(tape, params, leaves, o, a))
        .collect()
}

fn plain_embeddings(params: &EncoderParams, seq: &SeqInputs) -> Result<Vec<Vec<f64>>> {
    seq.obs
        .iter()
        .zip(&seq.act)
        .map(|(o, a)| encoder::encode(params, o, a))
        .collect()
}

/// Gradient-descent-with-momentum training of the encoder on sampled
/// sequence pairs. The last two trajectories are held out for the logged
/// cycle-consistency rate and never sampled for training.
pub fn train(
    dataset: &Dataset,
    init: EncoderParams,
    cfg: &TrainConfig,
) -> Result<(EncoderParams, Vec<TrainLogRow>)> {
    cfg.validate()?;
    let k = dataset.trajectories.len();
    if k < 2 {
        return Err(Error::Dataset("training needs at least 2 trajectories".into()));
    }
    let d_act_in = init.arch.d_act_in;
    let inputs: Vec<SeqInputs> = (0..k).map(|i| seq_inputs(dataset, i, d_act_in)).collect();
    // Hold out a pair for the logged metric when there is room for one.
    let (n_train, holdout) = if k >= 4 { (k - 2, Some((k - 2, k - 1))) } else { (k, None) };

    let mut params = init;
    let mut flat = params.flatten();
    let mut velocity = vec![0.0; flat.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = Vec::with_capacity(cfg.n_steps);

    let ordered_pairs: Vec<(usize, usize)> = (0..n_train)
        .flat_map(|a| (0..n_train).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();

    for step in 0..cfg.n_steps {
        let (a, b) = match cfg.pair_sampling {
            PairSampling::AllOrderedPairs => ordered_pairs[step % ordered_pairs.len()],
            PairSampling::RandomPairsPerStep => {
                let a = rng.gen_range(0..n_train);
                let mut b = rng.gen_range(0..n_train - 1);
                if b >= a {
                    b += 1;
                }
                (a, b)
            }
        };
        let n = inputs[a].obs.len();
        let anchors: Vec<usize> = match cfg.frames_per_step {
            None => (0..n).collect(),
            Some(m) => (0..m.min(n)).map(|_| rng.gen_range(0..n)).collect(),
        };

        let mut tape = Tape::new();
        let leaves = encoder::param_leaves(&mut tape, &params);
        let u_nodes = encode_seq_on_tape(&mut tape, &params, &leaves, &inputs[a]);
        let v_nodes = encode_seq_on_tape(&mut tape, &params, &leaves, &inputs[b]);
        let loss_node = pair_loss_on_tape(
            &mut tape,
            &u_nodes,
            &v_nodes,
            &anchors,
            cfg.lambda,
            cfg.variance_exponent,
        );
        let loss = tape.scalar(loss_node);
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("training diverged at step {step}")));
        }
        let grads = tape.backward(loss_node)?;
        let g = encoder::flat_grad(&grads, &leaves);
        for ((p, v), gi) in flat.iter_mut().zip(&mut velocity).zip(&g) {
            *v = cfg.momentum * *v + gi;
            *p -= cfg.learning_rate * *v;
        }
        params.assign_flat(&flat);

        let holdout_rate = match holdout {
            Some((ha, hb)) => {
                let hu = plain_embeddings(&params, &inputs[ha])?;
                let hv = plain_embeddings(&params, &inputs[hb])?;
                cycle_consistency_rate(&hu, &hv)
            }
            None => f64::NAN,
        };
        log.push(TrainLogRow {
            step,
            loss,
            holdout_cycle_rate: holdout_rate,
        });
    }
    Ok((params, log))
}

/// Embed every trajectory of a dataset with the given encoder.
pub fn embed_dataset(params: &EncoderParams, dataset: &Dataset) -> Result<Vec<EmbeddingSequence>> {
    dataset
        .trajectories
        .iter()
        .map(|t| encoder::encode_sequence(params, t))
        .collect()
}
