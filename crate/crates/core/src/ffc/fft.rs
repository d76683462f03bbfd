//! Real 2-D FFT over each channel of a [`Tensor`].
//!
//! Forward transforms are unnormalised; the inverse divides by H·W. The
//! spectrum keeps the non-redundant half along the width axis, so each
//! channel holds H × (W/2 + 1) complex bins.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Half-spectrum of a real tensor, channel-major, row-major within a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    channels: usize,
    height: usize,
    width: usize,
    bins: Vec<Complex<f64>>,
}

impl Spectrum {
    pub fn new(channels: usize, height: usize, width: usize, bins: Vec<Complex<f64>>) -> Result<Self> {
        let expected = channels * height * (width / 2 + 1);
        if bins.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} bins, expected {expected} for {channels}x{height}x{width}",
                bins.len()
            )));
        }
        Ok(Spectrum {
            channels,
            height,
            width,
            bins,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Spatial width of the signal (not the number of stored columns).
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn half_width(&self) -> usize {
        self.width / 2 + 1
    }

    pub fn bins(&self) -> &[Complex<f64>] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [Complex<f64>] {
        &mut self.bins
    }

    pub fn get(&self, c: usize, ky: usize, kx: usize) -> Complex<f64> {
        self.bins[(c * self.height + ky) * self.half_width() + kx]
    }

    /// Σ|X̂|² over the full (Hermitian-extended) spectrum.
    pub fn full_energy(&self) -> f64 {
        let hw = self.half_width();
        let mut total = 0.0;
        for (i, b) in self.bins.iter().enumerate() {
            let kx = i % hw;
            // Columns 1..ceil(W/2) stand in for their mirrored partners too.
            let mirrored = kx != 0 && !(self.width.is_multiple_of(2) && kx == self.width / 2);
            let weight = if mirrored { 2.0 } else { 1.0 };
            total += weight * b.norm_sqr();
        }
        total
    }
}

/// Forward real 2-D DFT of every channel.
pub fn rfft2(t: &Tensor) -> Spectrum {
    let (channels, h, w) = t.shape();
    let hw = w / 2 + 1;
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(w);
    let col_fft = planner.plan_fft_forward(h);

    let mut bins = vec![Complex::new(0.0, 0.0); channels * h * hw];
    let mut row = vec![Complex::new(0.0, 0.0); w];
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for c in 0..channels {
        let plane = t.plane(c);
        let out = &mut bins[c * h * hw..(c + 1) * h * hw];
        for y in 0..h {
            for (dst, &v) in row.iter_mut().zip(&plane[y * w..(y + 1) * w]) {
                *dst = Complex::new(v as f64, 0.0);
            }
            row_fft.process(&mut row);
            out[y * hw..(y + 1) * hw].copy_from_slice(&row[..hw]);
        }
        for kx in 0..hw {
            for y in 0..h {
                col[y] = out[y * hw + kx];
            }
            col_fft.process(&mut col);
            for y in 0..h {
                out[y * hw + kx] = col[y];
            }
        }
    }
    Spectrum {
        channels,
        height: h,
        width: w,
        bins,
    }
}

/// Inverse of [`rfft2`], scaled by 1/(H·W). The spectrum is treated as
/// Hermitian; imaginary parts that a real signal cannot carry are dropped.
pub fn irfft2(s: &Spectrum) -> Tensor {
    let (channels, h, w) = (s.channels, s.height, s.width);
    let hw = s.half_width();
    let mut planner = FftPlanner::<f64>::new();
    let row_ifft = planner.plan_fft_inverse(w);
    let col_ifft = planner.plan_fft_inverse(h);
    let scale = 1.0 / (h * w) as f64;

    let mut data = vec![0f32; channels * h * w];
    let mut work = vec![Complex::new(0.0, 0.0); h * hw];
    let mut row = vec![Complex::new(0.0, 0.0); w];
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for c in 0..channels {
        work.copy_from_slice(&s.bins[c * h * hw..(c + 1) * h * hw]);
        for kx in 0..hw {
            for y in 0..h {
                col[y] = work[y * hw + kx];
            }
            col_ifft.process(&mut col);
            for y in 0..h {
                work[y * hw + kx] = col[y];
            }
        }
        let plane = &mut data[c * h * w..(c + 1) * h * w];
        for y in 0..h {
            let half = &work[y * hw..(y + 1) * hw];
            row[..hw].copy_from_slice(half);
            for k in hw..w {
                row[k] = half[w - k].conj();
            }
            row_ifft.process(&mut row);
            for (dst, v) in plane[y * w..(y + 1) * w].iter_mut().zip(&row) {
                *dst = (v.re * scale) as f32;
            }
        }
    }
    Tensor::new(channels, h, w, data).expect("spectrum of a finite tensor is finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(c: usize, h: usize, w: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(c, h, w, |_, _, _| rng.random_range(-1.0..1.0))
    }

    /// O(N²) DFT straight from the definition, full spectrum.
    fn naive_dft(plane: &[f32], h: usize, w: usize) -> Vec<Complex<f64>> {
        let mut out = vec![Complex::new(0.0, 0.0); h * w];
        for ky in 0..h {
            for kx in 0..w {
                let mut acc = Complex::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * ((ky * y) as f64 / h as f64 + (kx * x) as f64 / w as f64);
                        acc += Complex::from_polar(plane[y * w + x] as f64, phase);
                    }
                }
                out[ky * w + kx] = acc;
            }
        }
        out
    }

    #[test]
    fn constant_goes_to_dc() {
        let t = Tensor::from_fn(1, 4, 6, |_, _, _| 0.75);
        let s = rfft2(&t);
        for ky in 0..4 {
            for kx in 0..4 {
                let v = s.get(0, ky, kx);
                let expected = if ky == 0 && kx == 0 { 0.75 * 24.0 } else { 0.0 };
                assert!((v.re - expected).abs() < 1e-6 && v.im.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn impulse_is_flat() {
        let mut t = Tensor::zeros(1, 5, 8);
        t.set(0, 0, 0, 1.0);
        for b in rfft2(&t).bins() {
            assert!((b.re - 1.0).abs() < 1e-12 && b.im.abs() < 1e-12);
        }
    }

    #[test]
    fn matches_naive_dft() {
        for (h, w) in [(8, 8), (5, 7), (6, 3), (1, 4)] {
            let t = random_tensor(2, h, w, (h * 31 + w) as u64);
            let s = rfft2(&t);
            for c in 0..2 {
                let full = naive_dft(t.plane(c), h, w);
                for ky in 0..h {
                    for kx in 0..w / 2 + 1 {
                        let d = s.get(c, ky, kx) - full[ky * w + kx];
                        assert!(d.norm() < 1e-5, "{h}x{w} bin ({ky},{kx})");
                    }
                }
            }
        }
    }

    #[test]
    fn roundtrip_and_parseval() {
        for (h, w) in [(1, 1), (2, 3), (7, 9), (16, 16), (33, 20), (128, 128)] {
            let t = random_tensor(2, h, w, 9);
            let s = rfft2(&t);
            let back = irfft2(&s);
            assert!(back.max_abs_diff(&t) <= 1e-6, "{h}x{w}");
            let energy: f64 = t.data().iter().map(|&v| (v as f64).powi(2)).sum();
            let spectral = s.full_energy() / (h * w) as f64;
            assert!((energy - spectral).abs() <= 1e-4 * energy, "{h}x{w}");
        }
    }
}
