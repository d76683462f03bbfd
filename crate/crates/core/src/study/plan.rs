use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::StudyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Original,
    Inpainted,
}

impl Condition {
    pub fn opposite(self) -> Self {
        match self {
            Condition::Original => Condition::Inpainted,
            Condition::Inpainted => Condition::Original,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Original => "original",
            Condition::Inpainted => "inpainted",
        }
    }
}

/// Axis-aligned target rectangle in image pixels; `x..x+width` × `y..y+height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetBox {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl TargetBox {
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x as f64
            && py >= self.y as f64
            && px < (self.x + self.width) as f64
            && py < (self.y + self.height) as f64
    }
}

/// An original street view image and its inpainted counterpart showing
/// the same destination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImagePair {
    pub pair_id: String,
    /// Image paths, relative to the image root.
    pub original: String,
    pub inpainted: String,
    pub width: u32,
    pub height: u32,
    pub target: TargetBox,
    #[serde(default)]
    pub target_name: String,
}

impl ImagePair {
    pub fn image_path(&self, condition: Condition) -> &str {
        match condition {
            Condition::Original => &self.original,
            Condition::Inpainted => &self.inpainted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub pairs: Vec<ImagePair>,
}

/// Image datasets, volunteer groups, and the (group, dataset) → condition
/// table of a crossover study.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyPlan {
    #[serde(default)]
    pub name: String,
    /// Seeds each volunteer's trial order.
    #[serde(default)]
    pub seed: u64,
    pub datasets: Vec<Dataset>,
    pub groups: Vec<String>,
    /// group → dataset → condition.
    pub assignment: BTreeMap<String, BTreeMap<String, Condition>>,
}

/// One scheduled trial of a volunteer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledTrial {
    pub dataset: String,
    pub pair_id: String,
    pub condition: Condition,
}

impl StudyPlan {
    /// Two groups over the given datasets: `Group_1` sees dataset 0 original,
    /// dataset 1 inpainted, and so on alternately; `Group_2` the opposite.
    pub fn crossover(name: impl Into<String>, seed: u64, datasets: Vec<Dataset>) -> Self {
        let groups = vec!["Group_1".to_string(), "Group_2".to_string()];
        let mut assignment = BTreeMap::new();
        for (g, group) in groups.iter().enumerate() {
            let row: BTreeMap<String, Condition> = datasets
                .iter()
                .enumerate()
                .map(|(d, ds)| {
                    let first = if d % 2 == 0 { Condition::Original } else { Condition::Inpainted };
                    (ds.name.clone(), if g == 0 { first } else { first.opposite() })
                })
                .collect();
            assignment.insert(group.clone(), row);
        }
        StudyPlan {
            name: name.into(),
            seed,
            datasets,
            groups,
            assignment,
        }
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        let invalid = |m: String| Err(StudyError::InvalidPlan(m));
        if self.datasets.is_empty() {
            return invalid("plan has no datasets".into());
        }
        if self.groups.len() < 2 {
            return invalid("a crossover needs at least two volunteer groups".into());
        }
        let groups: BTreeSet<&str> = self.groups.iter().map(String::as_str).collect();
        if groups.len() != self.groups.len() {
            return invalid("duplicate group name".into());
        }
        let mut seen_datasets = BTreeSet::new();
        let mut seen_pairs = BTreeSet::new();
        for ds in &self.datasets {
            if !seen_datasets.insert(ds.name.as_str()) {
                return invalid(format!("duplicate dataset `{}`", ds.name));
            }
            if ds.pairs.is_empty() {
                return invalid(format!("dataset `{}` has no image pairs", ds.name));
            }
            for p in &ds.pairs {
                if !seen_pairs.insert(p.pair_id.as_str()) {
                    return invalid(format!("duplicate pair id `{}`", p.pair_id));
                }
                let t = p.target;
                if t.width == 0 || t.height == 0 {
                    return invalid(format!("pair `{}` has an empty target box", p.pair_id));
                }
                if t.x as u64 + t.width as u64 > p.width as u64 || t.y as u64 + t.height as u64 > p.height as u64 {
                    return invalid(format!("pair `{}` target box leaves the image", p.pair_id));
                }
            }
        }
        for group in self.assignment.keys() {
            if !groups.contains(group.as_str()) {
                return Err(StudyError::UnknownGroup(group.clone()));
            }
        }
        for ds in &self.datasets {
            let mut conditions = BTreeSet::new();
            for group in &self.groups {
                let c = self
                    .assignment
                    .get(group)
                    .and_then(|row| row.get(&ds.name))
                    .ok_or_else(|| {
                        StudyError::InvalidPlan(format!("no condition for ({group}, {})", ds.name))
                    })?;
                conditions.insert(*c);
            }
            if conditions.len() < 2 {
                return Err(StudyError::NotCrossover(ds.name.clone()));
            }
        }
        for row in self.assignment.values() {
            if let Some(d) = row.keys().find(|d| !seen_datasets.contains(d.as_str())) {
                return Err(StudyError::UnknownDataset(d.clone()));
            }
        }
        Ok(())
    }

    pub fn assign_condition(&self, group: &str, dataset: &str) -> Result<Condition, StudyError> {
        if !self.datasets.iter().any(|d| d.name == dataset) {
            return Err(StudyError::UnknownDataset(dataset.to_string()));
        }
        self.assignment
            .get(group)
            .filter(|_| self.groups.iter().any(|g| g == group))
            .ok_or_else(|| StudyError::UnknownGroup(group.to_string()))?
            .get(dataset)
            .copied()
            .ok_or_else(|| StudyError::UnknownDataset(dataset.to_string()))
    }

    pub fn find_pair(&self, pair_id: &str) -> Option<(&Dataset, &ImagePair)> {
        self.datasets
            .iter()
            .find_map(|d| d.pairs.iter().find(|p| p.pair_id == pair_id).map(|p| (d, p)))
    }

    pub fn pair_count(&self) -> usize {
        self.datasets.iter().map(|d| d.pairs.len()).sum()
    }

    /// Every pair once, in a per-volunteer seeded shuffle across datasets,
    /// each under the condition of the volunteer's group.
    pub fn trial_order(&self, volunteer_id: &str, group: &str) -> Result<Vec<ScheduledTrial>, StudyError> {
        let mut trials = Vec::with_capacity(self.pair_count());
        for ds in &self.datasets {
            let condition = self.assign_condition(group, &ds.name)?;
            for p in &ds.pairs {
                trials.push(ScheduledTrial {
                    dataset: ds.name.clone(),
                    pair_id: p.pair_id.clone(),
                    condition,
                });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(volunteer_id.as_bytes()));
        trials.shuffle(&mut rng);
        Ok(trials)
    }
}

/// 64-bit FNV-1a; stable across platforms and releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}
