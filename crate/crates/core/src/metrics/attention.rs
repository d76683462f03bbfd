use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagery::{InpaintMask, Raster, ScalarMap};

/// Relative attention change between the attention maps of the original
/// and the inpainted image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionDelta {
    /// Relative increase on objects of interest.
    pub v_o: f64,
    /// Relative reduction on distracting objects.
    pub v_d: f64,
}

/// (Σ_R after − Σ_R before, Σ_R before)
fn region_sums(before: &[f64], after: &[f64], region: &InpaintMask) -> Result<(f64, f64)> {
    if before.len() != region.len() || after.len() != region.len() {
        return Err(Error::InvalidValue(format!(
            "attention buffers of {} and {} values for a {}-pixel region mask",
            before.len(),
            after.len(),
            region.len()
        )));
    }
    if region.is_clear() {
        return Err(Error::UndefinedRatio("region is empty"));
    }
    let mut diff = 0.0;
    let mut mass = 0.0;
    for i in region.indices() {
        diff += after[i] - before[i];
        mass += before[i];
    }
    if mass <= 0.0 {
        return Err(Error::UndefinedRatio("region carries no attention before inpainting"));
    }
    Ok((diff, mass))
}

/// Relative attention increase over `region` on raw (unbounded) attention
/// values laid out like the region mask.
pub fn vo_from_values(before: &[f64], after: &[f64], region: &InpaintMask) -> Result<f64> {
    let (diff, mass) = region_sums(before, after, region)?;
    Ok(diff / mass)
}

/// Relative attention reduction over `region` on raw attention values.
pub fn vd_from_values(before: &[f64], after: &[f64], region: &InpaintMask) -> Result<f64> {
    let (diff, mass) = region_sums(before, after, region)?;
    Ok(-diff / mass)
}

/// `Σ_{i∈R} (after(i) − before(i)) / Σ_{i∈R} before(i)` over the objects of interest.
pub fn compute_vo(before: &ScalarMap, after: &ScalarMap, region_o: &InpaintMask) -> Result<f64> {
    before.ensure_same_dims(after)?;
    before.ensure_same_dims(region_o)?;
    vo_from_values(before.values(), after.values(), region_o)
}

/// `Σ_{i∈R} (before(i) − after(i)) / Σ_{i∈R} before(i)` over the distracting objects.
pub fn compute_vd(before: &ScalarMap, after: &ScalarMap, region_d: &InpaintMask) -> Result<f64> {
    before.ensure_same_dims(after)?;
    before.ensure_same_dims(region_d)?;
    vd_from_values(before.values(), after.values(), region_d)
}

pub fn compute_attention_delta(
    before: &ScalarMap,
    after: &ScalarMap,
    region_o: &InpaintMask,
    region_d: &InpaintMask,
) -> Result<AttentionDelta> {
    Ok(AttentionDelta {
        v_o: compute_vo(before, after, region_o)?,
        v_d: compute_vd(before, after, region_d)?,
    })
}
