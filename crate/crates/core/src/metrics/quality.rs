//! Full-reference quality between a ground-truth image and an inpainted
//! candidate: mean l1, PSNR and SSIM.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imagery::{Raster, RgbImage};

/// Returned for (near-)identical images instead of infinity.
pub const PSNR_CAP_DB: f64 = 100.0;
const MSE_FLOOR: f64 = 1e-10;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub l1: f64,
    pub psnr: f64,
    pub ssim: f64,
}

pub fn compute_quality(reference: &RgbImage, candidate: &RgbImage) -> Result<QualityReport> {
    reference.ensure_same_dims(candidate)?;
    Ok(QualityReport {
        l1: l1_error(reference, candidate)?,
        psnr: psnr(reference, candidate)?,
        ssim: ssim(reference, candidate)?,
    })
}

/// Mean absolute difference over every channel of every pixel.
pub fn l1_error(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum();
    Ok(sum / a.data().len() as f64)
}

pub fn mse(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// `10·log10(1 / MSE)` for unit peak, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    let e = mse(a, b)?;
    if e < MSE_FLOOR {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / e).log10()).min(PSNR_CAP_DB))
}

/// Normalised Gaussian taps; the window shrinks to `len` when the image is
/// narrower than the nominal 11 pixels.
fn gaussian_taps(len: usize) -> Vec<f64> {
    let centre = (len as f64 - 1.0) / 2.0;
    let taps: Vec<f64> = (0..len)
        .map(|i| (-((i as f64 - centre).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Valid-mode separable filtering of a `w`×`h` plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, kx: &[f64], ky: &[f64]) -> (Vec<f64>, usize, usize) {
    let ow = w - kx.len() + 1;
    let oh = h - ky.len() + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = kx.iter().enumerate().map(|(i, t)| t * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = ky.iter().enumerate().map(|(i, t)| t * rows[(y + i) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Mean SSIM over all 11×11 Gaussian windows (σ = 1.5) of the luma planes.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let (w, h) = a.dims();
    Ok(ssim_planes(&a.luminance(), &b.luminance(), w, h))
}

pub(crate) fn ssim_planes(x: &[f64], y: &[f64], w: usize, h: usize) -> f64 {
    let kx = gaussian_taps(SSIM_WINDOW.min(w));
    let ky = gaussian_taps(SSIM_WINDOW.min(h));
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;

    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let (mx, ow, oh) = filter_valid(x, w, h, &kx, &ky);
    let (my, ..) = filter_valid(y, w, h, &kx, &ky);
    let (sxx, ..) = filter_valid(&xx, w, h, &kx, &ky);
    let (syy, ..) = filter_valid(&yy, w, h, &kx, &ky);
    let (sxy, ..) = filter_valid(&xy, w, h, &kx, &ky);

    let mut total = 0.0;
    for i in 0..ow * oh {
        let (ma, mb) = (mx[i], my[i]);
        let va = sxx[i] - ma * ma;
        let vb = syy[i] - mb * mb;
        let cov = sxy[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    total / (ow * oh) as f64
}
