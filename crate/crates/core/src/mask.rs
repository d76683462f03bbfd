//! Hierarchical salient object selection.
//!
//! A thresholded saliency map marks salient *instances*. Masking only those
//! would leave other objects of the same kind pulling attention, so the
//! salient mask is lifted to the semantic level: every distracting level
//! (human, vehicle, sign) touched by at least one salient pixel is masked
//! in full. The building level is the objects of interest and is never
//! masked.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagery::{InpaintMask, LabelMap, Raster, ScalarMap};

/// Number of semantic levels: building, human, vehicle, sign.
pub const LEVEL_COUNT: usize = 4;

pub const LEVEL_NAMES: [&str; LEVEL_COUNT] = ["building", "human", "vehicle", "sign"];

const DEFAULT_SPEC: &str = include_str!("../assets/cityscapes_levels.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelIds {
    pub building: Vec<u8>,
    pub human: Vec<u8>,
    pub vehicle: Vec<u8>,
    pub sign: Vec<u8>,
}

impl LevelIds {
    fn as_array(&self) -> [&[u8]; LEVEL_COUNT] {
        [&self.building, &self.human, &self.vehicle, &self.sign]
    }
}

/// Class-ID groups for the four semantic levels, plus the road classes
/// used by the canyon estimator.
///
/// Serialised as
/// `{"version": 1, "levels": {"building": [..], "human": [..], "vehicle": [..], "sign": [..]}, "road_ids": [..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticLevelSpec {
    #[serde(default = "default_version")]
    pub version: u32,
    pub levels: LevelIds,
    #[serde(default)]
    pub class_names: BTreeMap<String, String>,
    #[serde(default = "default_road_ids")]
    pub road_ids: Vec<u8>,
}

fn default_version() -> u32 {
    1
}

fn default_road_ids() -> Vec<u8> {
    vec![7]
}

impl Default for SemanticLevelSpec {
    /// Cityscapes `labelIds` grouping.
    fn default() -> Self {
        Self::from_json(DEFAULT_SPEC).expect("bundled level spec is valid")
    }
}

impl SemanticLevelSpec {
    pub fn new(levels: LevelIds) -> Result<Self> {
        let spec = SemanticLevelSpec {
            version: 1,
            levels,
            class_names: BTreeMap::new(),
            road_ids: default_road_ids(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SemanticLevelSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialises")
    }

    /// Rejects specs whose level ID sets overlap.
    pub fn validate(&self) -> Result<()> {
        let mut owner: [Option<usize>; 256] = [None; 256];
        for (level, ids) in self.levels.as_array().into_iter().enumerate() {
            for &id in ids {
                match owner[id as usize] {
                    Some(first) if first != level => {
                        return Err(Error::OverlappingLevels {
                            class_id: id,
                            first,
                            second: level,
                        })
                    }
                    _ => owner[id as usize] = Some(level),
                }
            }
        }
        Ok(())
    }

    pub fn level_ids(&self, level: usize) -> &[u8] {
        self.levels.as_array()[level]
    }

    /// Level of a class ID, `None` for neutral classes.
    pub fn level_of(&self, class: u8) -> Option<usize> {
        self.levels
            .as_array()
            .iter()
            .position(|ids| ids.contains(&class))
    }

    pub fn class_name(&self, class: u8) -> Option<&str> {
        self.class_names.get(&class.to_string()).map(String::as_str)
    }

    fn lookup(&self) -> [Option<u8>; 256] {
        let mut table = [None; 256];
        for (level, ids) in self.levels.as_array().into_iter().enumerate() {
            for &id in ids {
                table[id as usize] = Some(level as u8);
            }
        }
        table
    }
}

/// One pixel set per semantic level, aligned to the label map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelPartition {
    regions: [InpaintMask; LEVEL_COUNT],
}

impl LevelPartition {
    pub fn region(&self, level: usize) -> &InpaintMask {
        &self.regions[level]
    }

    /// Objects of interest (the building level).
    pub fn objects_of_interest(&self) -> &InpaintMask {
        &self.regions[0]
    }

    /// Union of the human, vehicle and sign levels.
    pub fn distracting(&self) -> InpaintMask {
        let mut out = self.regions[1].clone();
        out.union_with(&self.regions[2]);
        out.union_with(&self.regions[3]);
        out
    }

    pub fn dims(&self) -> (usize, usize) {
        self.regions[0].dims()
    }
}

/// Marks pixels strictly above `gamma` times the map maximum.
pub fn binarize_saliency(saliency: &ScalarMap, gamma: f64) -> Result<InpaintMask> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidValue(format!("gamma {gamma} outside (0, 1]")));
    }
    let max = saliency.max();
    let threshold = gamma * max;
    let bits = saliency
        .values()
        .iter()
        .map(|&v| max > 0.0 && v > threshold)
        .collect();
    InpaintMask::new(saliency.width(), saliency.height(), bits)
}

/// Splits a label map into the four level regions. Unlisted classes are
/// neutral and land in no region.
pub fn classify_levels(labels: &LabelMap, spec: &SemanticLevelSpec) -> Result<LevelPartition> {
    spec.validate()?;
    let table = spec.lookup();
    let (w, h) = labels.dims();
    let mut bits: [Vec<bool>; LEVEL_COUNT] = std::array::from_fn(|_| vec![false; w * h]);
    for (i, &class) in labels.classes().iter().enumerate() {
        if let Some(level) = table[class as usize] {
            bits[level as usize][i] = true;
        }
    }
    let regions = bits.map(|b| InpaintMask::new(w, h, b).expect("dimensions already validated"));
    Ok(LevelPartition { regions })
}

/// Union of every distracting level region that shares at least one pixel
/// with the salient mask.
pub fn compose_inpaint_mask(salient: &InpaintMask, part: &LevelPartition) -> Result<InpaintMask> {
    salient.ensure_same_dims(part.region(0))?;
    let (w, h) = salient.dims();
    let mut out = InpaintMask::empty(w, h)?;
    for region in &part.regions[1..] {
        if salient.intersects(region) {
            out.union_with(region);
        }
    }
    Ok(out)
}

/// Dilation by a (2r+1)-sided square, clipped at the borders.
pub fn dilate_mask(mask: &InpaintMask, radius: usize) -> InpaintMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let src = mask.bits();
    let mut horizontal = vec![false; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        // Distance to the most recent set pixel seen from the left and right
        // bounds each sweep to O(w).
        let mut last: Option<usize> = None;
        for x in 0..w {
            if row[x] {
                last = Some(x);
            }
            if last.is_some_and(|l| x - l <= radius) {
                horizontal[y * w + x] = true;
            }
        }
        last = None;
        for x in (0..w).rev() {
            if row[x] {
                last = Some(x);
            }
            if last.is_some_and(|l| l - x <= radius) {
                horizontal[y * w + x] = true;
            }
        }
    }
    let mut out = vec![false; w * h];
    for x in 0..w {
        let mut last: Option<usize> = None;
        for y in 0..h {
            if horizontal[y * w + x] {
                last = Some(y);
            }
            if last.is_some_and(|l| y - l <= radius) {
                out[y * w + x] = true;
            }
        }
        last = None;
        for y in (0..h).rev() {
            if horizontal[y * w + x] {
                last = Some(y);
            }
            if last.is_some_and(|l| l - y <= radius) {
                out[y * w + x] = true;
            }
        }
    }
    InpaintMask::new(w, h, out).expect("same dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const BUILDING: u8 = 11;
    const PERSON: u8 = 24;
    const RIDER: u8 = 25;
    const CAR: u8 = 26;
    const POLE: u8 = 17;
    const SKY: u8 = 23;
    const VEGETATION: u8 = 21;

    fn mask_from(w: usize, h: usize, set: &[(usize, usize)]) -> InpaintMask {
        InpaintMask::from_fn(w, h, |x, y| set.contains(&(x, y))).unwrap()
    }

    #[test]
    fn default_spec_matches_level_table() {
        let spec = SemanticLevelSpec::default();
        assert_eq!(spec.levels.building, vec![11]);
        assert_eq!(spec.levels.human, vec![24, 25]);
        assert_eq!(spec.levels.vehicle, vec![26, 27, 28, 31, 32, 33]);
        assert_eq!(spec.levels.sign, vec![19, 20, 13, 17]);
        assert_eq!(spec.road_ids, vec![7]);
        assert_eq!(spec.class_name(25), Some("rider"));
        let back = SemanticLevelSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn overlapping_spec_rejected() {
        let ids = LevelIds {
            building: vec![11],
            human: vec![24],
            vehicle: vec![26, 24],
            sign: vec![17],
        };
        assert!(matches!(
            SemanticLevelSpec::new(ids),
            Err(Error::OverlappingLevels { class_id: 24, first: 1, second: 2 })
        ));
    }

    #[test]
    fn binarize_relative_to_max() {
        let raw: Vec<u8> = (0..=200).collect();
        let map =
            ScalarMap::new(raw.len(), 1, raw.iter().map(|&b| b as f64 / 255.0).collect()).unwrap();
        let mask = binarize_saliency(&map, 0.8).unwrap();
        for (i, &bit) in mask.bits().iter().enumerate() {
            assert_eq!(bit, raw[i] > 160, "raw {}", raw[i]);
        }
    }

    #[test]
    fn binarize_degenerate_maps() {
        let zero = ScalarMap::filled(4, 4, 0.0).unwrap();
        assert!(binarize_saliency(&zero, 0.8).unwrap().is_clear());
        let constant = ScalarMap::filled(4, 4, 0.3).unwrap();
        assert!(binarize_saliency(&constant, 0.8).unwrap().is_full());
        assert!(binarize_saliency(&constant, 0.0).is_err());
        assert!(binarize_saliency(&constant, 1.5).is_err());
        assert!(binarize_saliency(&constant, f64::NAN).is_err());
        // gamma = 1 keeps nothing: no pixel is strictly above the maximum.
        assert!(binarize_saliency(&constant, 1.0).unwrap().is_clear());
    }

    #[test]
    fn classify_person_and_car() {
        let classes = vec![PERSON, CAR, CAR, SKY, PERSON, BUILDING - 1];
        let labels = LabelMap::new(3, 2, classes.clone()).unwrap();
        let part = classify_levels(&labels, &SemanticLevelSpec::default()).unwrap();
        for (i, &c) in classes.iter().enumerate() {
            assert_eq!(part.region(1).bits()[i], c == PERSON);
            assert_eq!(part.region(2).bits()[i], c == CAR);
            assert!(!part.region(0).bits()[i]);
            assert!(!part.region(3).bits()[i]);
        }
    }

    #[test]
    fn neutral_only_map_has_empty_regions() {
        let labels = LabelMap::new(2, 2, vec![SKY, VEGETATION, SKY, VEGETATION]).unwrap();
        let part = classify_levels(&labels, &SemanticLevelSpec::default()).unwrap();
        for k in 0..LEVEL_COUNT {
            assert!(part.region(k).is_clear());
        }
    }

    #[test]
    fn rider_is_human() {
        let labels = LabelMap::filled(1, 1, RIDER).unwrap();
        let part = classify_levels(&labels, &SemanticLevelSpec::default()).unwrap();
        assert!(part.region(1).get(0, 0));
    }

    #[test]
    fn one_salient_pixel_selects_every_vehicle() {
        // Two separate cars on a road strip.
        let mut labels = LabelMap::filled(8, 3, 7).unwrap();
        for x in [1, 2, 5, 6] {
            labels.set(x, 1, CAR);
        }
        let part = classify_levels(&labels, &SemanticLevelSpec::default()).unwrap();
        let salient = mask_from(8, 3, &[(1, 1)]);
        let out = compose_inpaint_mask(&salient, &part).unwrap();
        assert_eq!(out, *part.region(2));
        assert_eq!(out.count(), 4);
    }

    #[test]
    fn building_saliency_masks_nothing() {
        let labels = LabelMap::new(2, 1, vec![BUILDING, CAR]).unwrap();
        let part = classify_levels(&labels, &SemanticLevelSpec::default()).unwrap();
        let out = compose_inpaint_mask(&mask_from(2, 1, &[(0, 0)]), &part).unwrap();
        assert!(out.is_clear());
    }

    #[test]
    fn person_and_pole_select_both_levels() {
        let labels = LabelMap::new(4, 1, vec![PERSON, POLE, CAR, PERSON]).unwrap();
        let part = classify_levels(&labels, &SemanticLevelSpec::default()).unwrap();
        let out = compose_inpaint_mask(&mask_from(4, 1, &[(0, 0), (1, 0)]), &part).unwrap();
        assert_eq!(out.bits(), &[true, true, false, true]);
    }

    #[test]
    fn compose_dimension_mismatch() {
        let labels = LabelMap::filled(2, 2, CAR).unwrap();
        let part = classify_levels(&labels, &SemanticLevelSpec::default()).unwrap();
        let salient = InpaintMask::empty(3, 2).unwrap();
        assert!(matches!(
            compose_inpaint_mask(&salient, &part),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dilation_cases() {
        let single = mask_from(5, 5, &[(0, 0)]);
        assert_eq!(dilate_mask(&single, 0), single);
        let grown = dilate_mask(&single, 1);
        assert_eq!(grown, mask_from(5, 5, &[(0, 0), (1, 0), (0, 1), (1, 1)]));

        let centre = dilate_mask(&mask_from(5, 5, &[(2, 2)]), 1);
        assert_eq!(centre.count(), 9);

        let pair = dilate_mask(&mask_from(9, 3, &[(1, 1), (4, 1)]), 1);
        let expected = InpaintMask::from_fn(9, 3, |x, _| (x <= 2) || (3..=5).contains(&x)).unwrap();
        assert_eq!(pair, expected);
        let far = dilate_mask(&mask_from(9, 3, &[(1, 1), (5, 1)]), 1);
        let expected = InpaintMask::from_fn(9, 3, |x, _| x <= 2 || (4..=6).contains(&x)).unwrap();
        assert_eq!(far, expected);
    }

    fn brute_dilate(mask: &InpaintMask, r: usize) -> InpaintMask {
        let (w, h) = mask.dims();
        InpaintMask::from_fn(w, h, |x, y| {
            let r = r as isize;
            (-r..=r).any(|dy| {
                (-r..=r).any(|dx| {
                    let (sx, sy) = (x as isize + dx, y as isize + dy);
                    sx >= 0
                        && sy >= 0
                        && (sx as usize) < w
                        && (sy as usize) < h
                        && mask.get(sx as usize, sy as usize)
                })
            })
        })
        .unwrap()
    }

    fn arb_scene() -> impl Strategy<Value = (LabelMap, InpaintMask, InpaintMask)> {
        let palette = [BUILDING, PERSON, CAR, POLE, SKY, RIDER];
        (1usize..10, 1usize..10).prop_flat_map(move |(w, h)| {
            (
                proptest::collection::vec(0usize..palette.len(), w * h),
                proptest::collection::vec(any::<bool>(), w * h),
                proptest::collection::vec(any::<bool>(), w * h),
            )
                .prop_map(move |(c, s, extra)| {
                    let labels = LabelMap::new(w, h, c.into_iter().map(|i| palette[i]).collect()).unwrap();
                    (
                        labels,
                        InpaintMask::new(w, h, s).unwrap(),
                        InpaintMask::new(w, h, extra).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn composed_mask_properties((labels, salient, extra) in arb_scene()) {
            let part = classify_levels(&labels, &SemanticLevelSpec::default()).unwrap();
            let out = compose_inpaint_mask(&salient, &part).unwrap();
            prop_assert!(!out.intersects(part.objects_of_interest()));
            for k in 1..LEVEL_COUNT {
                let region = part.region(k);
                prop_assert!(region.is_subset_of(&out) || !region.intersects(&out));
            }
            let mut bigger = salient.clone();
            bigger.union_with(&extra);
            prop_assert!(out.is_subset_of(&compose_inpaint_mask(&bigger, &part).unwrap()));
            prop_assert_eq!(compose_inpaint_mask(&out, &part).unwrap(), out);
        }

        #[test]
        fn binarize_scale_invariant(values in proptest::collection::vec(0.0f64..=0.5, 1..64), scale in 0.1f64..2.0) {
            let n = values.len();
            let a = ScalarMap::new(n, 1, values.clone()).unwrap();
            let b = ScalarMap::new(n, 1, values.iter().map(|v| v * scale).collect()).unwrap();
            let ma = binarize_saliency(&a, 0.8).unwrap();
            let mb = binarize_saliency(&b, 0.8).unwrap();
            // Products can round across the threshold only for values within
            // a few ulps of it.
            let max = a.max();
            for i in 0..n {
                if (values[i] - 0.8 * max).abs() > 1e-12 {
                    prop_assert_eq!(ma.bits()[i], mb.bits()[i]);
                }
            }
        }

        #[test]
        fn dilation_matches_brute_force(bits in proptest::collection::vec(proptest::bool::weighted(0.15), 42), r in 0usize..4) {
            let m = InpaintMask::new(7, 6, bits).unwrap();
            prop_assert_eq!(dilate_mask(&m, r), brute_dilate(&m, r));
        }
    }
}
