use rand::Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::conv::{Affine, Conv2d};
use super::fft::{irfft2, rfft2};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    /// Linear end to end; used to probe the blocks analytically.
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f32) -> f32 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    #[inline]
    fn apply64(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    fn apply_tensor(self, t: &mut Tensor) {
        if self == Activation::Relu {
            t.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }
}

/// Weights of one Fourier convolution unit.
///
/// Channels `[0, local)` form the local path and `[local, local + global)`
/// the global path; input and output use the same split.
#[derive(Debug, Clone, PartialEq)]
pub struct FfcBlockWeights {
    pub local_channels: usize,
    pub global_channels: usize,
    /// local → local, spatial.
    pub l2l: Conv2d,
    /// local → global, spatial.
    pub l2g: Conv2d,
    /// global → local, spatial.
    pub g2l: Conv2d,
    /// Pointwise convolution over the stacked real/imaginary spectrum
    /// channels (`2·global` in and out, interleaved re, im per channel).
    pub spectral: Conv2d,
    pub spectral_norm: Affine,
    pub norm_local: Affine,
    pub norm_global: Affine,
    pub activation: Activation,
}

/// Splits `channels` into (local, global) parts; the global share must be
/// a whole number of channels.
pub fn split_channels(channels: usize, global_ratio: f64) -> Result<(usize, usize)> {
    if !(0.0..=1.0).contains(&global_ratio) {
        return Err(Error::InvalidValue(format!("global_ratio {global_ratio} outside [0, 1]")));
    }
    let global = global_ratio * channels as f64;
    if (global - global.round()).abs() > 1e-9 {
        return Err(Error::ShapeMismatch(format!(
            "global_ratio {global_ratio} of {channels} channels is not a whole channel count"
        )));
    }
    let global = global.round() as usize;
    Ok((channels - global, global))
}

impl FfcBlockWeights {
    pub fn random(
        channels: usize,
        global_ratio: f64,
        kernel: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let (local, global) = split_channels(channels, global_ratio)?;
        Ok(FfcBlockWeights {
            local_channels: local,
            global_channels: global,
            l2l: Conv2d::random(local, local, kernel, 1, rng),
            l2g: Conv2d::random(local, global, kernel, 1, rng),
            g2l: Conv2d::random(global, local, kernel, 1, rng),
            spectral: Conv2d::random(2 * global, 2 * global, 1, 1, rng),
            spectral_norm: Affine::identity(2 * global),
            norm_local: Affine::identity(local),
            norm_global: Affine::identity(global),
            activation,
        })
    }

    /// Same weights with every bias and shift zeroed, which makes the
    /// identity-activation unit exactly linear.
    pub fn without_offsets(mut self) -> Self {
        self.l2l = self.l2l.zero_bias();
        self.l2g = self.l2g.zero_bias();
        self.g2l = self.g2l.zero_bias();
        self.spectral = self.spectral.zero_bias();
        for norm in [&mut self.spectral_norm, &mut self.norm_local, &mut self.norm_global] {
            norm.shift.iter_mut().for_each(|s| *s = 0.0);
        }
        self
    }

    pub fn channels(&self) -> usize {
        self.local_channels + self.global_channels
    }

    pub fn global_ratio(&self) -> f64 {
        if self.channels() == 0 {
            0.0
        } else {
            self.global_channels as f64 / self.channels() as f64
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (l, g) = (self.local_channels, self.global_channels);
        let check = |name: &str, conv: &Conv2d, i: usize, o: usize| {
            if conv.in_channels != i || conv.out_channels != o || conv.stride != 1 {
                Err(Error::ShapeMismatch(format!(
                    "{name}: expected {i}->{o} stride 1, found {}->{} stride {}",
                    conv.in_channels, conv.out_channels, conv.stride
                )))
            } else {
                Ok(())
            }
        };
        check("l2l", &self.l2l, l, l)?;
        check("l2g", &self.l2g, l, g)?;
        check("g2l", &self.g2l, g, l)?;
        check("spectral", &self.spectral, 2 * g, 2 * g)?;
        if self.spectral.kernel != 1 {
            return Err(Error::ShapeMismatch("spectral convolution must be 1x1".into()));
        }
        for (name, norm, n) in [
            ("spectral_norm", &self.spectral_norm, 2 * g),
            ("norm_local", &self.norm_local, l),
            ("norm_global", &self.norm_global, g),
        ] {
            if norm.scale.len() != n || norm.shift.len() != n {
                return Err(Error::ShapeMismatch(format!("{name}: expected {n} channels")));
            }
        }
        Ok(())
    }
}

/// Global path: FFT, pointwise mixing of the real/imaginary channels with
/// normalisation and activation, inverse FFT. Output shape equals input.
pub fn spectral_transform(xg: &Tensor, w: &FfcBlockWeights) -> Result<Tensor> {
    let g = w.global_channels;
    if xg.channels() != g {
        return Err(Error::ShapeMismatch(format!(
            "spectral transform expects {g} channels, got {}",
            xg.channels()
        )));
    }
    if g == 0 {
        return Ok(xg.clone());
    }
    let mut spectrum = rfft2(xg);
    let bins_per_channel = spectrum.height() * spectrum.half_width();
    let src: Vec<Complex<f64>> = spectrum.bins().to_vec();
    let conv = &w.spectral;
    let norm = &w.spectral_norm;
    let act = w.activation;
    let stacked = 2 * g;

    spectrum
        .bins_mut()
        .par_chunks_mut(bins_per_channel)
        .enumerate()
        .for_each(|(c, out)| {
            for (b, dst) in out.iter_mut().enumerate() {
                let mut parts = [0f64; 2];
                for (part, value) in parts.iter_mut().enumerate() {
                    let o = 2 * c + part;
                    let row = &conv.weight[o * stacked..(o + 1) * stacked];
                    let mut acc = conv.bias[o] as f64;
                    for i in 0..g {
                        let z = src[i * bins_per_channel + b];
                        acc += row[2 * i] as f64 * z.re + row[2 * i + 1] as f64 * z.im;
                    }
                    *value = act.apply64(norm.scale[o] as f64 * acc + norm.shift[o] as f64);
                }
                *dst = Complex::new(parts[0], parts[1]);
            }
        });
    Ok(irfft2(&spectrum))
}

/// One Fourier convolution: `Y^l = f_l(X^l) + f_{g→l}(X^g)`,
/// `Y^g = f_g(X^g) + f_{l→g}(X^l)`, each followed by its affine
/// normalisation and the activation.
pub fn ffc_forward(x: &Tensor, w: &FfcBlockWeights) -> Result<Tensor> {
    w.validate()?;
    if x.channels() != w.channels() {
        return Err(Error::ShapeMismatch(format!(
            "FFC expects {} channels, got {}",
            w.channels(),
            x.channels()
        )));
    }
    let l = w.local_channels;
    let xl = x.slice_channels(0, l);
    let xg = x.slice_channels(l, x.channels());

    // Cross paths from an empty branch are vacuous, including their biases.
    let mut yl = w.l2l.forward(&xl)?;
    if w.global_channels > 0 {
        yl.add_assign(&w.g2l.forward(&xg)?)?;
    }
    w.norm_local.apply(&mut yl);
    w.activation.apply_tensor(&mut yl);

    let mut yg = spectral_transform(&xg, w)?;
    if w.local_channels > 0 {
        yg.add_assign(&w.l2g.forward(&xl)?)?;
    }
    w.norm_global.apply(&mut yg);
    w.activation.apply_tensor(&mut yg);

    Tensor::concat(&yl, &yg)
}

/// Two Fourier convolutions with an identity skip: `x + f2(f1(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub first: FfcBlockWeights,
    pub second: FfcBlockWeights,
}

impl ResidualBlock {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut out = ffc_forward(&ffc_forward(x, &self.first)?, &self.second)?;
        out.add_assign(x)?;
        Ok(out)
    }
}
