use rand::Rng;
use rayon::prelude::*;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Reflect an out-of-range index back into `0..n` (mirror without
/// repeating the edge sample). A length-one axis maps everything to 0.
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Per-channel affine map `scale * x + shift` applied after a convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub scale: Vec<f32>,
    pub shift: Vec<f32>,
}

impl Affine {
    pub fn identity(channels: usize) -> Self {
        Affine {
            scale: vec![1.0; channels],
            shift: vec![0.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.scale.len()
    }

    pub fn apply(&self, t: &mut Tensor) {
        let n = t.plane_len();
        for (c, plane) in t.data_mut().chunks_mut(n.max(1)).enumerate() {
            let (s, b) = (self.scale[c], self.shift[c]);
            for v in plane {
                *v = s * *v + b;
            }
        }
    }
}

/// Square-kernel 2-D convolution with reflect padding of `kernel / 2`.
///
/// `weight` is laid out `[out][in][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        weight: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        if kernel.is_multiple_of(2) || stride == 0 {
            return Err(Error::ShapeMismatch(format!(
                "kernel {kernel} must be odd and stride {stride} positive"
            )));
        }
        if weight.len() != out_channels * in_channels * kernel * kernel || bias.len() != out_channels {
            return Err(Error::ShapeMismatch(format!(
                "conv {in_channels}->{out_channels} k{kernel}: {} weights, {} biases",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            weight,
            bias,
        })
    }

    /// Uniform init in ±1/√fan_in for weights and biases.
    pub fn random(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = (in_channels * kernel * kernel).max(1);
        let bound = 1.0 / (fan_in as f32).sqrt();
        let mut draw = |n: usize| -> Vec<f32> { (0..n).map(|_| rng.random_range(-bound..=bound)).collect() };
        let weight = draw(out_channels * in_channels * kernel * kernel);
        let bias = draw(out_channels);
        Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            weight,
            bias,
        }
    }

    /// 1×1 identity mapping (zero bias).
    pub fn identity(channels: usize) -> Self {
        let mut weight = vec![0.0; channels * channels];
        for c in 0..channels {
            weight[c * channels + c] = 1.0;
        }
        Conv2d {
            in_channels: channels,
            out_channels: channels,
            kernel: 1,
            stride: 1,
            weight,
            bias: vec![0.0; channels],
        }
    }

    pub fn zero_bias(mut self) -> Self {
        self.bias.iter_mut().for_each(|b| *b = 0.0);
        self
    }

    pub fn output_size(&self, n: usize) -> usize {
        n.div_ceil(self.stride)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.channels() != self.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "conv expects {} input channels, got {}",
                self.in_channels,
                x.channels()
            )));
        }
        let (h, w) = (x.height(), x.width());
        let (oh, ow) = (self.output_size(h), self.output_size(w));
        let k = self.kernel;
        let pad = (k / 2) as isize;
        let s = self.stride as isize;
        let rows: Vec<usize> = (0..oh as isize)
            .flat_map(|oy| (0..k as isize).map(move |ky| (oy, ky)))
            .map(|(oy, ky)| reflect(oy * s + ky - pad, h))
            .collect();
        let cols: Vec<usize> = (0..ow as isize)
            .flat_map(|ox| (0..k as isize).map(move |kx| (ox, kx)))
            .map(|(ox, kx)| reflect(ox * s + kx - pad, w))
            .collect();

        let plane = oh * ow;
        let mut data = vec![0f32; self.out_channels * plane];
        if plane == 0 {
            return Tensor::new(self.out_channels, oh, ow, data);
        }
        data.par_chunks_mut(plane).enumerate().for_each(|(o, out)| {
            out.iter_mut().for_each(|v| *v = self.bias[o]);
            for i in 0..self.in_channels {
                let src = x.plane(i);
                let kernel = &self.weight[(o * self.in_channels + i) * k * k..][..k * k];
                for oy in 0..oh {
                    let row_idx = &rows[oy * k..(oy + 1) * k];
                    let dst = &mut out[oy * ow..(oy + 1) * ow];
                    for (ky, &sy) in row_idx.iter().enumerate() {
                        let src_row = &src[sy * w..(sy + 1) * w];
                        for (kx, &wt) in kernel[ky * k..(ky + 1) * k].iter().enumerate() {
                            if wt == 0.0 {
                                continue;
                            }
                            for (ox, d) in dst.iter_mut().enumerate() {
                                *d += wt * src_row[cols[ox * k + kx]];
                            }
                        }
                    }
                }
            }
        });
        Tensor::new(self.out_channels, oh, ow, data)
    }
}
