use crate::error::{Error, Result};
use crate::imagery::{InpaintMask, Raster, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionOptions {
    /// Stop once the largest per-sweep update falls below this.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for DiffusionOptions {
    fn default() -> Self {
        DiffusionOptions {
            tol: 1e-7,
            max_iters: 50_000,
        }
    }
}

/// Fills the masked pixels with the discrete harmonic interpolant of the
/// surrounding pixels (Jacobi sweeps over in-bounds 4-neighbours).
///
/// Pixels outside the mask are copied verbatim.
pub fn diffusion_inpaint(img: &RgbImage, mask: &InpaintMask, opts: DiffusionOptions) -> Result<RgbImage> {
    img.ensure_same_dims(mask)?;
    if mask.is_clear() {
        return Ok(img.clone());
    }
    if mask.is_full() {
        return Err(Error::FullMask);
    }
    let (w, h) = img.dims();
    let holes: Vec<usize> = mask.indices().collect();
    let neighbours: Vec<[Option<usize>; 4]> = holes
        .iter()
        .map(|&i| {
            let (x, y) = (i % w, i / w);
            [
                (x > 0).then(|| i - 1),
                (x + 1 < w).then(|| i + 1),
                (y > 0).then(|| i - w),
                (y + 1 < h).then(|| i + w),
            ]
        })
        .collect();

    let mut out = img.clone();
    let src = img.data();
    for c in 0..3 {
        let mut field: Vec<f64> = src.iter().skip(c).step_by(3).map(|&v| v as f64).collect();

        // Start from the mean of the known pixels bordering the hole so the
        // iterate stays inside the boundary value range.
        let (sum, n) = holes
            .iter()
            .zip(&neighbours)
            .flat_map(|(_, nb)| nb.iter().flatten())
            .filter(|&&j| !mask.bits()[j])
            .fold((0.0, 0usize), |(s, n), &j| (s + field[j], n + 1));
        let start = if n > 0 { sum / n as f64 } else { 0.0 };
        for &i in &holes {
            field[i] = start;
        }

        let mut next = vec![0.0; holes.len()];
        for _ in 0..opts.max_iters {
            let mut delta: f64 = 0.0;
            for (k, nb) in neighbours.iter().enumerate() {
                let (s, n) = nb
                    .iter()
                    .flatten()
                    .fold((0.0, 0usize), |(s, n), &j| (s + field[j], n + 1));
                next[k] = s / n as f64;
                delta = delta.max((next[k] - field[holes[k]]).abs());
            }
            for (k, &i) in holes.iter().enumerate() {
                field[i] = next[k];
            }
            if delta < opts.tol {
                break;
            }
        }

        let data = out.data_mut();
        for &i in &holes {
            data[3 * i + c] = (field[i] as f32).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}
