//! Frame filtering: unsupervised voting-based alignment across videos, the
//! degenerate perfect-reference nearest-neighbor matcher, and the dynamic
//! time warping baseline. All operate purely on embeddings; ground-truth
//! labels are never consulted here.

use crate::domain::{EmbeddingSequence, Selection, Trajectory};
use crate::{Error, Result};

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// argmin of distance, ties toward the smaller index.
fn nearest(query: &[f64], seq: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = sq_dist(query, &seq[0]);
    for (j, c) in seq.iter().enumerate().skip(1) {
        let d = sq_dist(query, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

fn check_embeddings(seqs: &[EmbeddingSequence]) -> Result<usize> {
    if seqs.is_empty() {
        return Err(Error::Dataset("no embedding sequences".into()));
    }
    let d = seqs
        .first()
        .and_then(|s| s.vectors.first())
        .map(|v| v.len())
        .ok_or_else(|| Error::Dataset("empty embedding sequence".into()))?;
    for s in seqs {
        if s.vectors.is_empty() {
            return Err(Error::Dataset(format!("empty embedding sequence '{}'", s.trajectory_id)));
        }
        if s.vectors.iter().any(|v| v.len() != d) {
            return Err(Error::DimensionMismatch(format!(
                "embedding dim mismatch in '{}'",
                s.trajectory_id
            )));
        }
    }
    Ok(d)
}

/// Mean of the given embeddings, summed in a canonical order so the result
/// does not depend on how the input videos were permuted.
fn mean_embedding(mut vs: Vec<&[f64]>) -> Vec<f64> {
    vs.sort_by(|a, b| a.partial_cmp(b).expect("finite embeddings"));
    let d = vs[0].len();
    let mut out = vec![0.0; d];
    for v in &vs {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += x;
        }
    }
    let n = vs.len() as f64;
    for o in &mut out {
        *o /= n;
    }
    out
}

/// Unsupervised voting-based alignment over K >= 2 videos.
///
/// Each round runs three stages over the videos that still have frames left:
/// every video's voting frame proposes its nearest neighbor in each other
/// video (one ballot per other video); each video's most-balloted frame
/// (ties toward the smaller index) becomes its voting-stage frame, and the
/// mean of those embeddings is the round's virtual reference; finally each
/// video selects the nearest neighbor of the virtual reference among frames
/// strictly after its current voting frame, which becomes the new voting
/// frame and is appended to that video's selection. Videos with no frames
/// after their voting frame are done. Frame 0 of every video is always
/// included.
///
/// With `include_voting_frames` the voting-stage frames are merged into the
/// output as well (off by default; the printed stage order emits only
/// selection-stage frames).
pub fn uva(seqs: &[EmbeddingSequence], include_voting_frames: bool) -> Result<Vec<Selection>> {
    check_embeddings(seqs)?;
    let k = seqs.len();
    if k < 2 {
        return Err(Error::Dataset(format!("uva needs at least 2 videos, got {k}")));
    }
    let mut voting_frame: Vec<usize> = vec![0; k];
    let mut done: Vec<bool> = seqs.iter().map(|s| s.vectors.len() <= 1).collect();
    let mut kept: Vec<Vec<usize>> = vec![vec![0]; k];

    while done.iter().any(|d| !d) {
        let active: Vec<usize> = (0..k).filter(|&v| !done[v]).collect();

        // Proposal: one ballot per (video, other video) pair.
        let mut ballots: Vec<Vec<usize>> = seqs.iter().map(|s| vec![0; s.vectors.len()]).collect();
        for &v in &active {
            let q = &seqs[v].vectors[voting_frame[v]];
            for &w in &active {
                if w == v {
                    continue;
                }
                let j = nearest(q, &seqs[w].vectors);
                ballots[w][j] += 1;
            }
        }

        // Voting: the most-balloted frame in each video becomes its new
        // voting frame (falling back to the current one when no ballots were
        // cast, i.e. a single active video). The pointer never moves
        // backwards so that selections stay strictly increasing.
        let mut voting_stage: Vec<usize> = vec![0; k];
        for &v in &active {
            let any = ballots[v].iter().any(|&c| c > 0);
            voting_stage[v] = if any {
                let mut best = 0;
                for (j, &c) in ballots[v].iter().enumerate() {
                    if c > ballots[v][best] {
                        best = j;
                    }
                }
                best
            } else {
                voting_frame[v]
            };
            if include_voting_frames {
                kept[v].push(voting_stage[v]);
            }
            voting_frame[v] = voting_frame[v].max(voting_stage[v]);
        }
        let reference = mean_embedding(
            active
                .iter()
                .map(|&v| seqs[v].vectors[voting_stage[v]].as_slice())
                .collect(),
        );

        // Selection: nearest neighbor of the virtual reference strictly
        // after the current voting frame.
        for &v in &active {
            let start = voting_frame[v] + 1;
            if start >= seqs[v].vectors.len() {
                done[v] = true;
                continue;
            }
            let j = start + nearest(&reference, &seqs[v].vectors[start..]);
            voting_frame[v] = j;
            kept[v].push(j);
            if j + 1 >= seqs[v].vectors.len() {
                done[v] = true;
            }
        }
    }

    Ok(seqs
        .iter()
        .zip(kept)
        .map(|(s, mut ks)| {
            ks.sort_unstable();
            ks.dedup();
            Selection {
                trajectory_id: s.trajectory_id.clone(),
                kept: ks,
            }
        })
        .collect())
}

/// Perfect-reference matcher: every reference frame picks its nearest
/// neighbor in each video. Chronological order is not enforced; the kept
/// set is deduplicated and sorted only for the output format.
pub fn reference_nn_filter(
    reference: &EmbeddingSequence,
    videos: &[EmbeddingSequence],
) -> Result<Vec<Selection>> {
    if reference.vectors.is_empty() {
        return Err(Error::Dataset("empty reference sequence".into()));
    }
    check_embeddings(videos)?;
    Ok(videos
        .iter()
        .map(|v| {
            let mut ks: Vec<usize> = reference
                .vectors
                .iter()
                .map(|r| nearest(r, &v.vectors))
                .collect();
            ks.sort_unstable();
            ks.dedup();
            Selection {
                trajectory_id: v.trajectory_id.clone(),
                kept: ks,
            }
        })
        .collect())
}

/// Classic dynamic time warping between two sequences with steps
/// (i+1,j), (i,j+1), (i+1,j+1), matching (0,0) to (N-1,M-1). Cost is the
/// sum of Euclidean frame distances along the path. Traceback ties prefer
/// the diagonal, then the (i,j+1) step.
pub fn dtw_align(
    reference: &EmbeddingSequence,
    video: &EmbeddingSequence,
) -> Result<(Vec<(usize, usize)>, f64)> {
    let a = &reference.vectors;
    let b = &video.vectors;
    if a.is_empty() || b.is_empty() {
        return Err(Error::Dataset("dtw over empty sequence".into()));
    }
    let (n, m) = (a.len(), b.len());
    let mut acc = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            let d = euclid(&a[i], &b[j]);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let mut best = f64::INFINITY;
                if i > 0 && j > 0 {
                    best = best.min(acc[(i - 1) * m + (j - 1)]);
                }
                if j > 0 {
                    best = best.min(acc[i * m + (j - 1)]);
                }
                if i > 0 {
                    best = best.min(acc[(i - 1) * m + j]);
                }
                best
            };
            acc[i * m + j] = d + best;
        }
    }
    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let diag = acc[(i - 1) * m + (j - 1)];
            let left = acc[i * m + (j - 1)];
            let up = acc[(i - 1) * m + j];
            if diag <= left && diag <= up {
                i -= 1;
                j -= 1;
            } else if left <= up {
                j -= 1;
            } else {
                i -= 1;
            }
        } else if j > 0 {
            j -= 1;
        } else {
            i -= 1;
        }
        path.push((i, j));
    }
    path.reverse();
    Ok((path, acc[n * m - 1]))
}

/// Selection induced by a DTW path: the video indices it touches.
pub fn dtw_selection(video: &EmbeddingSequence, path: &[(usize, usize)]) -> Selection {
    let mut ks: Vec<usize> = path.iter().map(|&(_, j)| j).collect();
    ks.sort_unstable();
    ks.dedup();
    Selection {
        trajectory_id: video.trajectory_id.clone(),
        kept: ks,
    }
}

/// Materialize a selection as a new trajectory.
pub fn apply_selection(trajectory: &Trajectory, selection: &Selection) -> Result<Trajectory> {
    selection.validate(trajectory.len())?;
    trajectory.subset(&selection.kept)
}
