//! Demonstration datasets with injected extraneous subsequences.
//!
//! Each noisy trajectory is an expert rollout with detour episodes spliced
//! in at random timesteps: the policy temporarily heads for a random detour
//! point, then the expert resumes from wherever that left the gripper.
//! Outbound detour frames and the return frames (until the rollout rejoins
//! its pre-detour progress) are labeled extraneous.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::{Action, ActionKind, Dataset, Frame, Trajectory};
use crate::env::{self, EnvSpec};
use crate::{Error, Result};

/// Extraneous-injection parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    /// Detour episodes per trajectory, sampled inclusive.
    pub n_spans: (usize, usize),
    /// Outbound detour length in steps, sampled inclusive.
    pub span_len: (usize, usize),
    /// Detour points are sampled uniformly in the workspace but at least
    /// this far from the current gripper position.
    pub min_detour_dist: f64,
    /// Desired labeled fraction of the whole dataset, in (0, 0.5).
    pub target_fraction: f64,
    /// Accepted deviation of each trajectory's labeled fraction from target.
    pub tolerance: f64,
}

impl NoiseSpec {
    pub fn with_target(target_fraction: f64) -> Self {
        NoiseSpec {
            n_spans: (1, 2),
            span_len: (8, 24),
            min_detour_dist: 0.25,
            target_fraction,
            tolerance: 0.03,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_fraction > 0.0 && self.target_fraction < 0.5) {
            return Err(Error::Generator(format!(
                "target_fraction {} not in (0, 0.5)",
                self.target_fraction
            )));
        }
        if self.n_spans.0 > self.n_spans.1 || self.span_len.0 > self.span_len.1 {
            return Err(Error::Generator("inverted n_spans or span_len range".into()));
        }
        Ok(())
    }
}

/// Return-path labeling rule: back on track once the gripper is within this
/// distance of its pre-detour position, or once the task distance drops
/// below its pre-detour value, whichever happens first.
const REJOIN_RADIUS: f64 = 0.02;

/// Expert rollouts shorter than this are resampled so every demonstration
/// has room for detours.
const MIN_EXPERT_LEN: usize = 15;

const MAX_ATTEMPTS: u64 = 200;

fn mix_seed(seed: u64, index: u64, attempt: u64) -> u64 {
    // splitmix64 over the packed inputs
    let mut z = seed
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(attempt.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Rollout {
    frames: Vec<Frame>,
    flags: Vec<bool>,
    goal: [f64; 2],
    success: bool,
}

/// Pure expert rollout from a fresh reset. Records (observation, action)
/// until success or the step budget runs out.
fn expert_rollout(spec: &EnvSpec, env_seed: u64) -> Result<Rollout> {
    let mut state = env::reset(spec, env_seed);
    let mut frames = Vec::new();
    while !env::is_success(spec, &state).0 && state.t < spec.max_steps {
        let action = env::expert_action(spec, &state);
        frames.push(Frame {
            observation: env::observation(spec, &state),
            action: Action::Continuous(action.to_vec()),
        });
        state = env::step(spec, &state, action)?;
    }
    let success = env::is_success(spec, &state).0;
    let n = frames.len();
    Ok(Rollout {
        frames,
        flags: vec![false; n],
        goal: state.goal,
        success,
    })
}

/// Expert rollout with `n_spans` detours spliced in. `insert_at` are
/// expert-progress step counts (sorted) at which a detour starts.
fn noisy_rollout(
    spec: &EnvSpec,
    env_seed: u64,
    insert_at: &[usize],
    span_lens: &[usize],
    rng: &mut ChaCha8Rng,
    min_detour_dist: f64,
) -> Result<Rollout> {
    let mut state = env::reset(spec, env_seed);
    let mut frames = Vec::new();
    let mut flags = Vec::new();
    let mut expert_steps = 0usize;
    let mut next_span = 0usize;
    // Pre-detour reference for the return-labeling rule; Some while the
    // rollout is off track.
    let mut rejoin: Option<([f64; 2], f64)> = None;

    while state.t < spec.max_steps {
        if rejoin.is_none() && env::is_success(spec, &state).0 {
            break;
        }
        if let Some((pos, d0)) = rejoin {
            if env::dist(state.gripper, pos) <= REJOIN_RADIUS
                || env::task_distance(spec, &state) < d0
            {
                rejoin = None;
                if env::is_success(spec, &state).0 {
                    break;
                }
            }
        }
        if rejoin.is_none() && next_span < insert_at.len() && expert_steps >= insert_at[next_span] {
            // Detour episode: fix a target and head for it span_len steps.
            let span_len = span_lens[next_span];
            next_span += 1;
            let detour = sample_detour(spec, state.gripper, min_detour_dist, rng);
            let pre = (state.gripper, env::task_distance(spec, &state));
            for _ in 0..span_len {
                if state.t >= spec.max_steps {
                    break;
                }
                let action = env::extraneous_action(spec, &state, detour);
                frames.push(Frame {
                    observation: env::observation(spec, &state),
                    action: Action::Continuous(action.to_vec()),
                });
                flags.push(true);
                state = env::step(spec, &state, action)?;
            }
            rejoin = Some(pre);
            continue;
        }
        let action = env::expert_action(spec, &state);
        frames.push(Frame {
            observation: env::observation(spec, &state),
            action: Action::Continuous(action.to_vec()),
        });
        flags.push(rejoin.is_some());
        if rejoin.is_none() {
            expert_steps += 1;
        }
        state = env::step(spec, &state, action)?;
    }
    let success = env::is_success(spec, &state).0;
    let n = frames.len();
    debug_assert_eq!(flags.len(), n);
    Ok(Rollout {
        frames,
        flags,
        goal: state.goal,
        success,
    })
}

fn sample_detour(
    spec: &EnvSpec,
    from: [f64; 2],
    min_dist: f64,
    rng: &mut ChaCha8Rng,
) -> [f64; 2] {
    loop {
        let p = [
            rng.gen_range(spec.workspace.min[0]..spec.workspace.max[0]),
            rng.gen_range(spec.workspace.min[1]..spec.workspace.max[1]),
        ];
        if env::dist(p, from) >= min_dist {
            return p;
        }
    }
}

/// k expert rollouts with zero extraneous frames, all successful.
pub fn generate_perfect(spec: &EnvSpec, k: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if k < 2 {
        return Err(Error::Generator(format!("k must be >= 2, got {k}")));
    }
    let trajectories: Vec<Result<Trajectory>> = (0..k as u64)
        .into_par_iter()
        .map(|i| {
            for attempt in 0..MAX_ATTEMPTS {
                let env_seed = mix_seed(seed, i, attempt);
                let r = expert_rollout(spec, env_seed)?;
                if !r.success {
                    return Err(Error::Generator(format!(
                        "expert failed on trajectory {i} (env seed {env_seed}); \
                         this indicates an environment bug"
                    )));
                }
                if r.frames.len() < MIN_EXPERT_LEN {
                    continue;
                }
                return Trajectory::new(format!("perfect-{i:03}"), r.frames, r.goal.to_vec(), r.flags);
            }
            Err(Error::Generator(format!(
                "could not generate trajectory {i} within {MAX_ATTEMPTS} attempts"
            )))
        })
        .collect();
    let trajectories = trajectories.into_iter().collect::<Result<Vec<_>>>()?;
    Dataset::new(
        trajectories,
        spec.name.as_str().into(),
        spec.d_obs(),
        spec.d_act(),
        ActionKind::Continuous,
    )
}

/// k noisy rollouts. Each trajectory is resampled (bounded attempts) until
/// its labeled fraction lands within `noise.tolerance` of the target, the
/// <50% constraint holds, and the rollout still ends in success.
pub fn generate_extraneous(spec: &EnvSpec, noise: &NoiseSpec, k: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    noise.validate()?;
    if k < 2 {
        return Err(Error::Generator(format!("k must be >= 2, got {k}")));
    }
    let trajectories: Vec<Result<Trajectory>> = (0..k as u64)
        .into_par_iter()
        .map(|i| generate_one_noisy(spec, noise, seed, i))
        .collect();
    let trajectories = trajectories.into_iter().collect::<Result<Vec<_>>>()?;
    Dataset::new(
        trajectories,
        spec.name.as_str().into(),
        spec.d_obs(),
        spec.d_act(),
        ActionKind::Continuous,
    )
}

fn generate_one_noisy(spec: &EnvSpec, noise: &NoiseSpec, seed: u64, i: u64) -> Result<Trajectory> {
    let mut last_seed = 0;
    for attempt in 0..MAX_ATTEMPTS {
        let env_seed = mix_seed(seed, i, attempt);
        last_seed = env_seed;
        let base = expert_rollout(spec, env_seed)?;
        if !base.success || base.frames.len() < MIN_EXPERT_LEN {
            continue;
        }
        let t0 = base.frames.len();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed ^ 0xA5A5, i, attempt));
        let n_spans = if noise.n_spans.0 == 0 && noise.n_spans.1 == 0 {
            0
        } else {
            rng.gen_range(noise.n_spans.0..=noise.n_spans.1)
        };
        if n_spans == 0 {
            return Trajectory::new(format!("noisy-{i:03}"), base.frames, base.goal.to_vec(), base.flags);
        }
        let mut insert_at: Vec<usize> = (0..n_spans)
            .map(|_| rng.gen_range(2..t0.saturating_sub(3).max(3)))
            .collect();
        insert_at.sort_unstable();
        insert_at.dedup();
        let span_lens: Vec<usize> = insert_at
            .iter()
            .map(|_| rng.gen_range(noise.span_len.0..=noise.span_len.1))
            .collect();
        let r = noisy_rollout(spec, env_seed, &insert_at, &span_lens, &mut rng, noise.min_detour_dist)?;
        if !r.success {
            continue;
        }
        // The trajectory must finish on task-relevant frames so that the
        // non-extraneous subsequence itself ends in success.
        if r.flags.last().copied().unwrap_or(true) {
            continue;
        }
        let total = r.frames.len();
        let ext = r.flags.iter().filter(|&&b| b).count();
        let frac = ext as f64 / total as f64;
        if (frac - noise.target_fraction).abs() > noise.tolerance || 2 * ext >= total {
            continue;
        }
        return Trajectory::new(format!("noisy-{i:03}"), r.frames, r.goal.to_vec(), r.flags);
    }
    Err(Error::Generator(format!(
        "could not meet noise constraints for trajectory {i} within {MAX_ATTEMPTS} attempts \
         (last env seed {last_seed})"
    )))
}

/// Labeled fraction of the whole dataset.
pub fn extraneous_fraction(dataset: &Dataset) -> f64 {
    let total: usize = dataset.total_frames();
    if total == 0 {
        return 0.0;
    }
    let ext: usize = dataset
        .trajectories
        .iter()
        .map(|t| t.ground_truth().extraneous_count())
        .sum();
    ext as f64 / total as f64
}
