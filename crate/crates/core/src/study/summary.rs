//! Report-time aggregation.
//!
//! Order of operations, fixed:
//! 1. each volunteer's durations (all datasets together) are min–max
//!    normalised; volunteers that cannot be normalised are excluded;
//! 2. per volunteer and dataset, the normalised times are averaged;
//! 3. per dataset and condition, those volunteer means are averaged;
//! 4. the improvement is computed from the two condition means.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::{compute_improvement, normalize_times};
use super::{Condition, StudyError, StudyPlan, TrialRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryOptions {
    /// Drop trials whose Found click missed the target box.
    #[serde(default)]
    pub only_hits: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub dataset: String,
    pub mean_original: f64,
    pub mean_inpainted: f64,
    pub volunteers_original: usize,
    pub volunteers_inpainted: usize,
    pub improvement_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedVolunteer {
    pub volunteer_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub datasets: Vec<DatasetSummary>,
    pub excluded: Vec<ExcludedVolunteer>,
    pub trials_used: usize,
    pub only_hits: bool,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Summarises the records of one study, dataset by dataset in plan order.
pub fn summarize(
    plan: &StudyPlan,
    records: &[TrialRecord],
    options: SummaryOptions,
) -> Result<StudySummary, StudyError> {
    let mut by_volunteer: BTreeMap<&str, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.hit || !options.only_hits) {
        by_volunteer.entry(r.volunteer_id.as_str()).or_default().push(r);
    }

    let mut excluded = Vec::new();
    let mut trials_used = 0;
    // (dataset, condition) → one mean per volunteer
    let mut cells: BTreeMap<(&str, Condition), Vec<f64>> = BTreeMap::new();
    for (volunteer, trials) in &by_volunteer {
        let durations: Vec<f64> = trials.iter().map(|r| r.duration_ms as f64).collect();
        let normalized = match normalize_times(&durations) {
            Ok(n) => n,
            Err(e) => {
                log::warn!("volunteer {volunteer} excluded from summary: {e}");
                excluded.push(ExcludedVolunteer {
                    volunteer_id: volunteer.to_string(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        trials_used += trials.len();
        let mut per_cell: BTreeMap<(&str, Condition), Vec<f64>> = BTreeMap::new();
        for (r, n) in trials.iter().zip(normalized) {
            per_cell.entry((r.dataset.as_str(), r.condition)).or_default().push(n);
        }
        for (key, values) in per_cell {
            cells.entry(key).or_default().push(mean(&values));
        }
    }

    let mut datasets = Vec::with_capacity(plan.datasets.len());
    for ds in &plan.datasets {
        let original = cells.get(&(ds.name.as_str(), Condition::Original));
        let inpainted = cells.get(&(ds.name.as_str(), Condition::Inpainted));
        let (Some(original), Some(inpainted)) = (original, inpainted) else {
            return Err(StudyError::InsufficientData(format!(
                "dataset `{}` needs at least one normalizable volunteer under each condition",
                ds.name
            )));
        };
        let mean_original = mean(original);
        let mean_inpainted = mean(inpainted);
        datasets.push(DatasetSummary {
            dataset: ds.name.clone(),
            mean_original,
            mean_inpainted,
            volunteers_original: original.len(),
            volunteers_inpainted: inpainted.len(),
            improvement_percent: compute_improvement(mean_original, mean_inpainted)?,
        });
    }

    Ok(StudySummary {
        datasets,
        excluded,
        trials_used,
        only_hits: options.only_hits,
    })
}
