//! Ground-truth-aware scoring of filters. This is the only module (besides
//! the generator) that reads extraneousness labels.

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Selection};
use crate::{Error, Result};

/// One row of a filtering report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRow {
    pub label: String,
    pub extraneous_kept: usize,
    pub total_kept: usize,
}

impl FilterRow {
    pub fn fraction(&self) -> f64 {
        if self.total_kept == 0 {
            0.0
        } else {
            self.extraneous_kept as f64 / self.total_kept as f64
        }
    }

    /// One-decimal percentage, the table formatting.
    pub fn percent_str(&self) -> String {
        format!("{:.1}%", 100.0 * self.fraction())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    /// Unfiltered baseline row followed by the filtered row.
    pub rows: Vec<FilterRow>,
}

impl FilterReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:>12} {:>12} {:>14}\n",
            "row", "extraneous", "total", "extraneous %"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<12} {:>12} {:>12} {:>14}\n",
                r.label,
                r.extraneous_kept,
                r.total_kept,
                r.percent_str()
            ));
        }
        out
    }
}

/// Count extraneous-labeled frames among kept frames, next to the
/// unfiltered baseline. Every trajectory must have a selection.
pub fn filter_report(dataset: &Dataset, selections: &[Selection]) -> Result<FilterReport> {
    let mut extraneous_total = 0usize;
    let mut frames_total = 0usize;
    let mut extraneous_kept = 0usize;
    let mut total_kept = 0usize;
    for t in &dataset.trajectories {
        let flags = t.ground_truth().flags();
        extraneous_total += t.ground_truth().extraneous_count();
        frames_total += t.len();
        let sel = selections
            .iter()
            .find(|s| s.trajectory_id == t.id)
            .ok_or_else(|| Error::Dataset(format!("no selection for trajectory '{}'", t.id)))?;
        sel.validate(t.len())?;
        total_kept += sel.kept.len();
        extraneous_kept += sel.kept.iter().filter(|&&i| flags[i]).count();
    }
    Ok(FilterReport {
        rows: vec![
            FilterRow {
                label: "original".into(),
                extraneous_kept: extraneous_total,
                total_kept: frames_total,
            },
            FilterRow {
                label: "filtered".into(),
                extraneous_kept,
                total_kept,
            },
        ],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    /// kept task-relevant / total task-relevant
    pub task_relevant_recall: f64,
    /// dropped extraneous / total extraneous
    pub extraneous_rejection: f64,
}

pub fn precision_recall(dataset: &Dataset, selections: &[Selection]) -> Result<PrecisionRecall> {
    let mut relevant_total = 0usize;
    let mut relevant_kept = 0usize;
    let mut ext_total = 0usize;
    let mut ext_kept = 0usize;
    for t in &dataset.trajectories {
        let flags = t.ground_truth().flags();
        let sel = selections
            .iter()
            .find(|s| s.trajectory_id == t.id)
            .ok_or_else(|| Error::Dataset(format!("no selection for trajectory '{}'", t.id)))?;
        for (i, &f) in flags.iter().enumerate() {
            let kept = sel.kept.binary_search(&i).is_ok();
            if f {
                ext_total += 1;
                if kept {
                    ext_kept += 1;
                }
            } else {
                relevant_total += 1;
                if kept {
                    relevant_kept += 1;
                }
            }
        }
    }
    Ok(PrecisionRecall {
        task_relevant_recall: if relevant_total == 0 {
            1.0
        } else {
            relevant_kept as f64 / relevant_total as f64
        },
        extraneous_rejection: if ext_total == 0 {
            0.0
        } else {
            (ext_total - ext_kept) as f64 / ext_total as f64
        },
    })
}
