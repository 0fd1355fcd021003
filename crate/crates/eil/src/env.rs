//! Deterministic toy 2D control environments with scripted expert and
//! detour policies.
//!
//! `reach2d` moves a point gripper to a goal; `push2d` additionally has an
//! object that is rigidly dragged while the gripper is within a contact
//! radius. There is no physics beyond that: these environments exist so that
//! demonstrations, extraneous detours, and closed-loop evaluation are cheap
//! and fully reproducible.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvName {
    Reach2d,
    Push2d,
}

impl EnvName {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "reach2d" => Ok(EnvName::Reach2d),
            "push2d" => Ok(EnvName::Push2d),
            other => Err(Error::Env(format!("unknown environment '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            EnvName::Reach2d => "reach2d",
            EnvName::Push2d => "push2d",
        }
    }
}

/// Axis-aligned workspace bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Workspace {
    pub fn unit() -> Self {
        Workspace {
            min: [0.0, 0.0],
            max: [1.0, 1.0],
        }
    }

    pub fn center(&self) -> [f64; 2] {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
        ]
    }

    pub fn clip(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(self.min[0], self.max[0]),
            p[1].clamp(self.min[1], self.max[1]),
        ]
    }

    fn sample(&self, rng: &mut impl Rng) -> [f64; 2] {
        [
            rng.gen_range(self.min[0]..self.max[0]),
            rng.gen_range(self.min[1]..self.max[1]),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: EnvName,
    pub workspace: Workspace,
    /// Success when the task distance is strictly below this.
    pub success_threshold: f64,
    pub max_steps: usize,
    /// Maximum per-step displacement norm.
    pub action_scale: f64,
    /// push2d: the object moves rigidly with the gripper within this radius.
    pub contact_radius: f64,
}

/// Proportional gain of the scripted controllers. With action_scale 0.012
/// the expert covers the worst-case center-to-corner distance in 55 steps,
/// leaving headroom for detours under max_steps = 100.
const EXPERT_GAIN: f64 = 5.0;

impl EnvSpec {
    pub fn new(name: EnvName) -> Self {
        EnvSpec {
            name,
            workspace: Workspace::unit(),
            success_threshold: 0.05,
            max_steps: 100,
            action_scale: 0.012,
            contact_radius: 0.03,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.success_threshold <= 0.0 {
            return Err(Error::Env("success_threshold must be > 0".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Env("max_steps must be > 0".into()));
        }
        if self.action_scale <= 0.0 {
            return Err(Error::Env("action_scale must be > 0".into()));
        }
        let w = self.workspace;
        if w.min[0] >= w.max[0] || w.min[1] >= w.max[1] {
            return Err(Error::Env("degenerate workspace".into()));
        }
        Ok(())
    }

    pub fn d_obs(&self) -> usize {
        match self.name {
            EnvName::Reach2d => 4,
            EnvName::Push2d => 6,
        }
    }

    pub fn d_act(&self) -> usize {
        2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub gripper: [f64; 2],
    pub object: Option<[f64; 2]>,
    pub goal: [f64; 2],
    pub t: usize,
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn add(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn norm(v: [f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    norm(sub(a, b))
}

/// Clamp a displacement to norm <= `limit`.
pub fn clamp_norm(v: [f64; 2], limit: f64) -> [f64; 2] {
    let n = norm(v);
    if n > limit {
        let s = limit / n;
        [v[0] * s, v[1] * s]
    } else {
        v
    }
}

/// Deterministic initial state. The gripper starts at the workspace center;
/// goal (and object for push2d) are sampled uniformly from the seed. In
/// push2d the object is rejection-sampled until it is at least
/// success_threshold away from the goal, so a fresh episode is never already
/// solved.
pub fn reset(spec: &EnvSpec, seed: u64) -> EnvState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let goal = spec.workspace.sample(&mut rng);
    let object = match spec.name {
        EnvName::Reach2d => None,
        EnvName::Push2d => {
            // Also bound the total center->object->goal path so the expert
            // (and detoured demonstrations) fit in the step budget.
            let center = spec.workspace.center();
            let path_budget = 0.75;
            let mut obj = spec.workspace.sample(&mut rng);
            while dist(obj, goal) < spec.success_threshold
                || dist(center, obj) + dist(obj, goal) > path_budget
            {
                obj = spec.workspace.sample(&mut rng);
            }
            Some(obj)
        }
    };
    EnvState {
        gripper: spec.workspace.center(),
        object,
        goal,
        t: 0,
    }
}

/// Advance one step. The action is clamped to action_scale; the gripper
/// (and, in push2d, an object in contact) moves by the clamped displacement
/// and is clipped to the workspace.
pub fn step(spec: &EnvSpec, state: &EnvState, action: [f64; 2]) -> Result<EnvState> {
    if state.t >= spec.max_steps {
        return Err(Error::Env(format!(
            "step at t={} but max_steps={}",
            state.t, spec.max_steps
        )));
    }
    let a = clamp_norm(action, spec.action_scale);
    let gripper = spec.workspace.clip(add(state.gripper, a));
    let object = state.object.map(|obj| {
        if dist(state.gripper, obj) <= spec.contact_radius {
            spec.workspace.clip(add(obj, sub(gripper, state.gripper)))
        } else {
            obj
        }
    });
    Ok(EnvState {
        gripper,
        object,
        goal: state.goal,
        t: state.t + 1,
    })
}

/// Task distance: gripper-to-goal for reach2d, object-to-goal for push2d.
pub fn task_distance(spec: &EnvSpec, state: &EnvState) -> f64 {
    match spec.name {
        EnvName::Reach2d => dist(state.gripper, state.goal),
        EnvName::Push2d => dist(state.object.expect("push2d state has an object"), state.goal),
    }
}

/// Strict `<` at the threshold.
pub fn is_success(spec: &EnvSpec, state: &EnvState) -> (bool, f64) {
    let d = task_distance(spec, state);
    (d < spec.success_threshold, d)
}

/// Observation vector fed to encoders and policies:
/// `[gripper, goal]` for reach2d, `[gripper, object, goal]` for push2d.
pub fn observation(spec: &EnvSpec, state: &EnvState) -> Vec<f64> {
    match spec.name {
        EnvName::Reach2d => vec![state.gripper[0], state.gripper[1], state.goal[0], state.goal[1]],
        EnvName::Push2d => {
            let obj = state.object.expect("push2d state has an object");
            vec![
                state.gripper[0],
                state.gripper[1],
                obj[0],
                obj[1],
                state.goal[0],
                state.goal[1],
            ]
        }
    }
}

fn toward(from: [f64; 2], to: [f64; 2], scale: f64) -> [f64; 2] {
    // cap at the remaining distance so the controller lands on the target
    // instead of overshooting and oscillating
    let limit = scale.min(dist(from, to));
    clamp_norm(
        [(to[0] - from[0]) * EXPERT_GAIN, (to[1] - from[1]) * EXPERT_GAIN],
        limit,
    )
}

/// Greedy proportional controller. For reach2d it heads straight for the
/// goal. For push2d it closes to contact range and then drags the object
/// toward the goal.
pub fn expert_action(spec: &EnvSpec, state: &EnvState) -> [f64; 2] {
    match spec.name {
        EnvName::Reach2d => {
            if state.gripper == state.goal {
                [0.0, 0.0]
            } else {
                toward(state.gripper, state.goal, spec.action_scale)
            }
        }
        EnvName::Push2d => {
            let obj = state.object.expect("push2d state has an object");
            if dist(obj, state.goal) < spec.success_threshold {
                return [0.0, 0.0];
            }
            // Contact drag is rigid in any direction, so the expert just
            // closes to contact range and then drags the object goalward.
            // The residual gripper-object offset is at most contact_radius,
            // which is below the success threshold.
            if dist(state.gripper, obj) > spec.contact_radius {
                toward(state.gripper, obj, spec.action_scale)
            } else {
                toward(state.gripper, state.goal, spec.action_scale)
            }
        }
    }
}

/// Greedy motion toward an arbitrary detour point instead of the goal.
pub fn extraneous_action(spec: &EnvSpec, state: &EnvState, detour_target: [f64; 2]) -> [f64; 2] {
    if state.gripper == detour_target {
        [0.0, 0.0]
    } else {
        toward(state.gripper, detour_target, spec.action_scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_is_deterministic() {
        let spec = EnvSpec::new(EnvName::Push2d);
        assert_eq!(reset(&spec, 7), reset(&spec, 7));
        assert_ne!(reset(&spec, 7).goal, reset(&spec, 8).goal);
    }

    #[test]
    fn push2d_reset_separates_object_and_goal() {
        let spec = EnvSpec::new(EnvName::Push2d);
        for seed in 0..200 {
            let s = reset(&spec, seed);
            assert!(dist(s.object.unwrap(), s.goal) >= spec.success_threshold);
        }
    }

    #[test]
    fn zero_action_only_increments_t() {
        let spec = EnvSpec::new(EnvName::Reach2d);
        let s0 = reset(&spec, 3);
        let s1 = step(&spec, &s0, [0.0, 0.0]).unwrap();
        assert_eq!(s1.gripper, s0.gripper);
        assert_eq!(s1.goal, s0.goal);
        assert_eq!(s1.t, s0.t + 1);
    }

    #[test]
    fn over_length_action_clamped_to_action_scale() {
        let spec = EnvSpec::new(EnvName::Reach2d);
        let mut s = reset(&spec, 5);
        s.gripper = [0.5, 0.5];
        let s1 = step(&spec, &s, [10.0, -4.0]).unwrap();
        let moved = dist(s1.gripper, s.gripper);
        assert!((moved - spec.action_scale).abs() < 1e-12);
    }

    #[test]
    fn step_past_max_steps_errors() {
        let spec = EnvSpec {
            max_steps: 1,
            ..EnvSpec::new(EnvName::Reach2d)
        };
        let s0 = reset(&spec, 0);
        let s1 = step(&spec, &s0, [0.0, 0.0]).unwrap();
        assert!(step(&spec, &s1, [0.0, 0.0]).is_err());
    }

    #[test]
    fn success_is_strict_at_threshold() {
        let spec = EnvSpec::new(EnvName::Reach2d);
        let mut s = reset(&spec, 0);
        s.goal = [0.5, 0.5];
        s.gripper = [0.5, 0.5];
        assert_eq!(is_success(&spec, &s), (true, 0.0));
        s.gripper = [0.5 + spec.success_threshold, 0.5];
        let (ok, d) = is_success(&spec, &s);
        assert!(!ok);
        assert!((d - spec.success_threshold).abs() < 1e-12);
        s.gripper = [0.549, 0.5];
        let (ok, _) = is_success(&spec, &s);
        assert!(ok); // 0.049 < 0.05
    }

    #[test]
    fn expert_at_goal_is_zero() {
        let spec = EnvSpec::new(EnvName::Reach2d);
        let mut s = reset(&spec, 0);
        s.gripper = s.goal;
        assert_eq!(expert_action(&spec, &s), [0.0, 0.0]);
    }

    #[test]
    fn expert_points_at_goal_in_reach2d() {
        let spec = EnvSpec::new(EnvName::Reach2d);
        for seed in 0..50 {
            let s = reset(&spec, seed);
            let a = expert_action(&spec, &s);
            let to_goal = [s.goal[0] - s.gripper[0], s.goal[1] - s.gripper[1]];
            assert!(a[0] * to_goal[0] + a[1] * to_goal[1] >= 0.0);
        }
    }

    // Exhaustive rollout oracle: the expert succeeds from a 10x10 grid of
    // seeds within the step budget, in both environments.
    #[test]
    fn expert_rollouts_always_succeed() {
        for name in [EnvName::Reach2d, EnvName::Push2d] {
            let spec = EnvSpec::new(name);
            for seed in 0..100u64 {
                let mut s = reset(&spec, seed);
                let mut ok = is_success(&spec, &s).0;
                while !ok && s.t < spec.max_steps {
                    s = step(&spec, &s, expert_action(&spec, &s)).unwrap();
                    ok = is_success(&spec, &s).0;
                }
                assert!(ok, "{} expert failed on seed {seed}", name.as_str());
            }
        }
    }

    #[test]
    fn extraneous_equals_expert_on_goal_detour() {
        let spec = EnvSpec::new(EnvName::Reach2d);
        let s = reset(&spec, 11);
        assert_eq!(extraneous_action(&spec, &s, s.goal), expert_action(&spec, &s));
    }

    #[test]
    fn extraneous_opposite_goal_moves_away() {
        let spec = EnvSpec::new(EnvName::Reach2d);
        let mut s = reset(&spec, 11);
        s.gripper = [0.5, 0.5];
        s.goal = [0.8, 0.5];
        let a = extraneous_action(&spec, &s, [0.2, 0.5]);
        let to_goal = [s.goal[0] - s.gripper[0], s.goal[1] - s.gripper[1]];
        assert!(a[0] * to_goal[0] + a[1] * to_goal[1] < 0.0);
    }

    // Fixed-point oracle: repeatedly applying the detour controller
    // converges to the detour target.
    #[test]
    fn extraneous_converges_to_detour_target() {
        let spec = EnvSpec::new(EnvName::Reach2d);
        let mut s = reset(&spec, 2);
        let target = [0.9, 0.1];
        for _ in 0..spec.max_steps {
            if dist(s.gripper, target) < 1e-9 {
                break;
            }
            s = step(&spec, &s, extraneous_action(&spec, &s, target)).unwrap();
        }
        assert!(dist(s.gripper, target) < 1e-9);
    }
}
