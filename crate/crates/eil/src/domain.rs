//! Shared data types for demonstrations, embeddings, and frame selections,
//! plus the line-delimited file format used by every pipeline stage.
//!
//! Ground-truth extraneousness labels travel with the data but live in a
//! [`GroundTruth`] struct with private fields: generation and scoring code
//! reach them through [`Trajectory::ground_truth`], while learning and
//! alignment code only ever sees observations and actions.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Continuous,
    Discrete,
}

/// A per-frame action: a real vector for continuous tasks or a category
/// index for discrete ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    /// Encoder/policy input representation: the raw vector for continuous
    /// actions, one-hot over `d_act` categories for discrete ones.
    pub fn as_input(&self, d_act: usize) -> Vec<f64> {
        match self {
            Action::Continuous(v) => v.clone(),
            Action::Discrete(i) => {
                let mut v = vec![0.0; d_act];
                if *i < d_act {
                    v[*i] = 1.0;
                }
                v
            }
        }
    }
}

/// One observation-action pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub observation: Vec<f64>,
    pub action: Action,
}

/// Generator-only metadata: per-frame extraneousness flags and the
/// equivalent span representation. Fields are private so only code that is
/// explicitly handed this struct (the generator and the metrics module) can
/// read labels.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    extraneous: Vec<bool>,
    spans: Vec<(usize, usize)>,
}

impl GroundTruth {
    pub fn flags(&self) -> &[bool] {
        &self.extraneous
    }

    /// Half-open `[start, end)` intervals, disjoint and sorted.
    pub fn spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    pub fn extraneous_count(&self) -> usize {
        self.extraneous.iter().filter(|&&b| b).count()
    }
}

/// Maximal runs of `true` as half-open `[start, end)` intervals.
pub fn spans_from_flags(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, flags.len()));
    }
    spans
}

/// Expand spans back to per-frame flags, validating bounds, order, and
/// disjointness.
pub fn flags_from_spans(len: usize, spans: &[(usize, usize)]) -> std::result::Result<Vec<bool>, String> {
    let mut flags = vec![false; len];
    let mut prev_end = 0usize;
    for &(s, e) in spans {
        if s >= e {
            return Err(format!("empty or inverted span ({s}, {e})"));
        }
        if e > len {
            return Err(format!("span ({s}, {e}) out of bounds for length {len}"));
        }
        if s < prev_end {
            return Err(format!("span ({s}, {e}) overlaps or is out of order"));
        }
        for f in &mut flags[s..e] {
            *f = true;
        }
        prev_end = e;
    }
    Ok(flags)
}

/// One demonstration: an ordered frame sequence plus generator metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: String,
    pub frames: Vec<Frame>,
    pub goal: Vec<f64>,
    ground_truth: GroundTruth,
}

impl Trajectory {
    /// Build from per-frame flags; spans are derived. Enforces the
    /// "<50% extraneous" source-data assumption.
    pub fn new(id: String, frames: Vec<Frame>, goal: Vec<f64>, extraneous: Vec<bool>) -> Result<Self> {
        let spans = spans_from_flags(&extraneous);
        Self::from_parts(id, frames, goal, extraneous, spans)
    }

    /// Build from flags and spans (as read from a file), checking mutual
    /// consistency and all type invariants.
    pub fn from_parts(
        id: String,
        frames: Vec<Frame>,
        goal: Vec<f64>,
        extraneous: Vec<bool>,
        spans: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let t = Self::from_parts_unchecked_fraction(id, frames, goal, extraneous, spans)?;
        let n = t.len();
        let ext = t.ground_truth.extraneous_count();
        if n > 0 && 2 * ext >= n {
            return Err(Error::Invariant {
                id: t.id,
                msg: format!("extraneous frames ({ext}) must be < 50% of total ({n})"),
            });
        }
        Ok(t)
    }

    // Same checks minus the <50% rule, which only applies to source
    // demonstrations, not to filtered subsets.
    fn from_parts_unchecked_fraction(
        id: String,
        frames: Vec<Frame>,
        goal: Vec<f64>,
        extraneous: Vec<bool>,
        spans: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if extraneous.len() != frames.len() {
            return Err(Error::Invariant {
                id,
                msg: format!(
                    "{} extraneous flags for {} frames",
                    extraneous.len(),
                    frames.len()
                ),
            });
        }
        let derived = flags_from_spans(frames.len(), &spans).map_err(|msg| Error::Invariant {
            id: id.clone(),
            msg,
        })?;
        if derived != extraneous {
            return Err(Error::Invariant {
                id,
                msg: "per-frame extraneous flags inconsistent with spans".into(),
            });
        }
        Ok(Self {
            id,
            frames,
            goal,
            ground_truth: GroundTruth { extraneous, spans },
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Generator/metrics-only access to labels.
    pub fn ground_truth(&self) -> &GroundTruth {
        &self.ground_truth
    }

    /// Restrict to the given strictly increasing, non-empty frame indices.
    /// Labels are carried over and spans recomputed.
    pub fn subset(&self, kept: &[usize]) -> Result<Trajectory> {
        if kept.is_empty() {
            return Err(Error::Invariant {
                id: self.id.clone(),
                msg: "selection is empty".into(),
            });
        }
        if !kept.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Invariant {
                id: self.id.clone(),
                msg: "selection indices not strictly increasing".into(),
            });
        }
        if *kept.last().unwrap() >= self.len() {
            return Err(Error::Invariant {
                id: self.id.clone(),
                msg: format!(
                    "selection index {} out of range for length {}",
                    kept.last().unwrap(),
                    self.len()
                ),
            });
        }
        let frames = kept.iter().map(|&i| self.frames[i].clone()).collect();
        let flags: Vec<bool> = kept.iter().map(|&i| self.ground_truth.extraneous[i]).collect();
        let spans = spans_from_flags(&flags);
        Self::from_parts_unchecked_fraction(self.id.clone(), frames, self.goal.clone(), flags, spans)
    }
}

/// A set of demonstrations sharing one environment and dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    pub env_name: String,
    pub d_obs: usize,
    pub d_act: usize,
    pub action_kind: ActionKind,
}

impl Dataset {
    pub fn new(
        trajectories: Vec<Trajectory>,
        env_name: String,
        d_obs: usize,
        d_act: usize,
        action_kind: ActionKind,
    ) -> Result<Self> {
        let d = Self {
            trajectories,
            env_name,
            d_obs,
            d_act,
            action_kind,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectories.len() < 2 {
            return Err(Error::Dataset(format!(
                "need at least 2 trajectories, got {}",
                self.trajectories.len()
            )));
        }
        for t in &self.trajectories {
            for f in &t.frames {
                if f.observation.len() != self.d_obs {
                    return Err(Error::DimensionMismatch(format!(
                        "trajectory '{}': observation dim {} != d_obs {}",
                        t.id,
                        f.observation.len(),
                        self.d_obs
                    )));
                }
                match (&f.action, self.action_kind) {
                    (Action::Continuous(v), ActionKind::Continuous) => {
                        if v.len() != self.d_act {
                            return Err(Error::DimensionMismatch(format!(
                                "trajectory '{}': action dim {} != d_act {}",
                                t.id,
                                v.len(),
                                self.d_act
                            )));
                        }
                    }
                    (Action::Discrete(i), ActionKind::Discrete) => {
                        if *i >= self.d_act {
                            return Err(Error::DimensionMismatch(format!(
                                "trajectory '{}': action index {} >= n_actions {}",
                                t.id, i, self.d_act
                            )));
                        }
                    }
                    _ => {
                        return Err(Error::DimensionMismatch(format!(
                            "trajectory '{}': action variant does not match dataset action_kind",
                            t.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn total_frames(&self) -> usize {
        self.trajectories.iter().map(|t| t.len()).sum()
    }

    pub fn find(&self, id: &str) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.id == id)
    }
}

/// Per-frame embeddings of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    pub trajectory_id: String,
    pub vectors: Vec<Vec<f64>>,
}

/// Kept frame indices of one trajectory, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub trajectory_id: String,
    pub kept: Vec<usize>,
}

impl Selection {
    pub fn validate(&self, trajectory_len: usize) -> Result<()> {
        if self.kept.is_empty() {
            return Err(Error::Invariant {
                id: self.trajectory_id.clone(),
                msg: "selection is empty".into(),
            });
        }
        if !self.kept.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Invariant {
                id: self.trajectory_id.clone(),
                msg: "selection indices not strictly increasing".into(),
            });
        }
        if *self.kept.last().unwrap() >= trajectory_len {
            return Err(Error::Invariant {
                id: self.trajectory_id.clone(),
                msg: format!(
                    "selection index {} out of range for length {}",
                    self.kept.last().unwrap(),
                    trajectory_len
                ),
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// File format: line-delimited JSON. First line is a header record, every
// following line one trajectory. serde_json's f64 formatting is shortest
// round-trip, so numeric fields survive save/load bit-for-bit.

#[derive(Serialize, Deserialize)]
struct HeaderRecord {
    env_name: String,
    d_obs: usize,
    d_act: usize,
    action_kind: ActionKind,
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    obs: Vec<f64>,
    act: Action,
    ext: bool,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRecord {
    id: String,
    goal: Vec<f64>,
    frames: Vec<FrameRecord>,
    spans: Vec<(usize, usize)>,
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    dataset.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    let header = HeaderRecord {
        env_name: dataset.env_name.clone(),
        d_obs: dataset.d_obs,
        d_act: dataset.d_act,
        action_kind: dataset.action_kind,
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serialization"))?;
    for t in &dataset.trajectories {
        let rec = TrajectoryRecord {
            id: t.id.clone(),
            goal: t.goal.clone(),
            frames: t
                .frames
                .iter()
                .zip(t.ground_truth().flags())
                .map(|(f, &ext)| FrameRecord {
                    obs: f.observation.clone(),
                    act: f.action.clone(),
                    ext,
                })
                .collect(),
            spans: t.ground_truth().spans().to_vec(),
        };
        writeln!(w, "{}", serde_json::to_string(&rec).expect("record serialization"))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let header: HeaderRecord = serde_json::from_str(&first?).map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    let mut trajectories = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrajectoryRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        let mut frames = Vec::with_capacity(rec.frames.len());
        let mut flags = Vec::with_capacity(rec.frames.len());
        for f in rec.frames {
            frames.push(Frame {
                observation: f.obs,
                action: f.act,
            });
            flags.push(f.ext);
        }
        trajectories.push(Trajectory::from_parts(rec.id, frames, rec.goal, flags, rec.spans)?);
    }
    Dataset::new(
        trajectories,
        header.env_name,
        header.d_obs,
        header.d_act,
        header.action_kind,
    )
}

pub fn save_selections(selections: &[Selection], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in selections {
        writeln!(w, "{}", serde_json::to_string(s).expect("selection serialization"))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_selections(path: &Path) -> Result<Vec<Selection>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}
