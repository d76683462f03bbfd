use crate::error::{Error, Result};
use crate::imagery::{InpaintMask, Raster, RgbImage};

/// An object patch to paste: colour pixels, their footprint, and the
/// top-left placement in the base image.
#[derive(Debug, Clone, PartialEq)]
pub struct Cutout {
    pub image: RgbImage,
    pub mask: InpaintMask,
    pub x: usize,
    pub y: usize,
}

/// Pastes each cutout where its footprint is set and returns the
/// composite together with the union of the placed footprints, which is the
/// inpainting mask for ground-truth evaluation against `base`.
pub fn insert_objects(base: &RgbImage, cutouts: &[Cutout]) -> Result<(RgbImage, InpaintMask)> {
    let (bw, bh) = base.dims();
    for c in cutouts {
        c.image.ensure_same_dims(&c.mask)?;
        let (w, h) = c.image.dims();
        if c.x + w > bw || c.y + h > bh {
            return Err(Error::OutOfBounds {
                x: c.x,
                y: c.y,
                w,
                h,
                base_w: bw,
                base_h: bh,
            });
        }
    }
    let mut out = base.clone();
    let mut footprint = InpaintMask::empty(bw, bh)?;
    for c in cutouts {
        let (w, h) = c.image.dims();
        for y in 0..h {
            for x in 0..w {
                if c.mask.get(x, y) {
                    out.set_pixel(c.x + x, c.y + y, c.image.pixel(x, y));
                    footprint.set(c.x + x, c.y + y, true);
                }
            }
        }
    }
    Ok((out, footprint))
}
