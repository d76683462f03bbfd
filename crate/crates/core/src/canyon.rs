//! Street aspect ratio (canyon height over canyon width) and its
//! urban-morphology buckets.
//!
//! The estimator is a geometric heuristic over a label map:
//!
//! * height: median, over image columns with at least one building pixel,
//!   of the column's building-pixel count;
//! * width: longest contiguous run of road pixels in the row at the
//!   vertical centroid of the road region.
//!
//! Images with several street canyons still yield a single scalar.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagery::{LabelMap, Raster};
use crate::mask::SemanticLevelSpec;

/// Version of the heuristic in [`estimate_aspect_ratio`].
pub const ESTIMATOR_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CanyonBucket {
    NonCanyon,
    Low,
    Mid,
    High,
}

impl CanyonBucket {
    pub const ALL: [CanyonBucket; 4] = [
        CanyonBucket::NonCanyon,
        CanyonBucket::Low,
        CanyonBucket::Mid,
        CanyonBucket::High,
    ];

    /// The α interval of the bucket.
    pub fn range_label(self) -> &'static str {
        match self {
            CanyonBucket::NonCanyon => "α=0",
            CanyonBucket::Low => "0<α≤1",
            CanyonBucket::Mid => "1<α≤2",
            CanyonBucket::High => "α>2",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CanyonBucket::NonCanyon => "non_canyon",
            CanyonBucket::Low => "low",
            CanyonBucket::Mid => "mid",
            CanyonBucket::High => "high",
        }
    }
}

impl fmt::Display for CanyonBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.range_label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanyonClass {
    pub bucket: CanyonBucket,
    pub alpha: f64,
}

pub fn classify_canyon(alpha: f64) -> Result<CanyonClass> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::InvalidValue(format!("aspect ratio {alpha} must be non-negative")));
    }
    let bucket = if alpha == 0.0 {
        CanyonBucket::NonCanyon
    } else if alpha <= 1.0 {
        CanyonBucket::Low
    } else if alpha <= 2.0 {
        CanyonBucket::Mid
    } else {
        CanyonBucket::High
    };
    Ok(CanyonClass { bucket, alpha })
}

fn median(values: &mut [usize]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}

/// Estimates α from a label map. Building classes come from level 0 of
/// `spec`; `road_ids` name the road classes. Degenerate maps give 0.
pub fn estimate_aspect_ratio(labels: &LabelMap, spec: &SemanticLevelSpec, road_ids: &[u8]) -> f64 {
    let (w, h) = labels.dims();
    let building = spec.level_ids(0);
    let classes = labels.classes();

    let mut column_heights: Vec<usize> = (0..w)
        .map(|x| (0..h).filter(|&y| building.contains(&classes[y * w + x])).count())
        .filter(|&n| n > 0)
        .collect();
    if column_heights.is_empty() {
        return 0.0;
    }
    let height = median(&mut column_heights);

    let (row_sum, road_pixels) = classes
        .iter()
        .enumerate()
        .filter(|(_, c)| road_ids.contains(c))
        .fold((0usize, 0usize), |(s, n), (i, _)| (s + i / w, n + 1));
    if road_pixels == 0 {
        return 0.0;
    }
    let centroid_row = ((row_sum as f64 / road_pixels as f64).round() as usize).min(h - 1);
    let row = &classes[centroid_row * w..(centroid_row + 1) * w];
    let mut longest = 0;
    let mut run = 0;
    for c in row {
        if road_ids.contains(c) {
            run += 1;
            longest = longest.max(run);
        } else {
            run = 0;
        }
    }
    if longest == 0 {
        return 0.0;
    }
    height / longest as f64
}
