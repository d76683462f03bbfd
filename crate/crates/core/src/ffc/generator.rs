use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::block::{Activation, FfcBlockWeights, ResidualBlock};
use super::conv::{reflect, Affine, Conv2d};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::imagery::{InpaintMask, Raster, RgbImage};

/// Residual Fourier blocks between the downsampling and upsampling stages.
pub const BLOCK_COUNT: usize = 18;
/// Masked RGB stacked with the mask.
pub const INPUT_CHANNELS: usize = 4;
/// Spatial dimensions are padded up to a multiple of this (three stride-2 stages).
const ALIGN: usize = 8;

/// Convolution followed by per-channel affine normalisation and the
/// activation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub conv: Conv2d,
    pub norm: Affine,
}

impl ConvLayer {
    fn random(i: usize, o: usize, k: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        ConvLayer {
            conv: Conv2d::random(i, o, k, stride, rng),
            norm: Affine::identity(o),
        }
    }

    fn forward(&self, x: &Tensor, act: Activation) -> Result<Tensor> {
        let mut y = self.conv.forward(x)?;
        self.norm.apply(&mut y);
        if act == Activation::Relu {
            y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Ok(y)
    }
}

/// Complete generator: stem, three stride-2 downsampling layers, 18
/// residual Fourier blocks, three ×2 upsampling layers (nearest neighbour
/// then convolution) and a 3-channel output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorWeights {
    pub stem: ConvLayer,
    pub down: [ConvLayer; 3],
    pub blocks: Vec<ResidualBlock>,
    pub up: [ConvLayer; 3],
    pub head: Conv2d,
    pub activation: Activation,
}

impl GeneratorWeights {
    /// Seeded random generator; widths double at each downsampling stage
    /// starting from `base_width`.
    pub fn random(base_width: usize, global_ratio: f64, activation: Activation, seed: u64) -> Result<Self> {
        if base_width == 0 {
            return Err(Error::InvalidValue("base_width must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = base_width;
        let stem = ConvLayer::random(INPUT_CHANNELS, b, 7, 1, &mut rng);
        let down = [
            ConvLayer::random(b, 2 * b, 3, 2, &mut rng),
            ConvLayer::random(2 * b, 4 * b, 3, 2, &mut rng),
            ConvLayer::random(4 * b, 8 * b, 3, 2, &mut rng),
        ];
        let mut blocks = Vec::with_capacity(BLOCK_COUNT);
        for _ in 0..BLOCK_COUNT {
            blocks.push(ResidualBlock {
                first: FfcBlockWeights::random(8 * b, global_ratio, 3, activation, &mut rng)?,
                second: FfcBlockWeights::random(8 * b, global_ratio, 3, activation, &mut rng)?,
            });
        }
        let up = [
            ConvLayer::random(8 * b, 4 * b, 3, 1, &mut rng),
            ConvLayer::random(4 * b, 2 * b, 3, 1, &mut rng),
            ConvLayer::random(2 * b, b, 3, 1, &mut rng),
        ];
        let head = Conv2d::random(b, 3, 7, 1, &mut rng);
        let weights = GeneratorWeights {
            stem,
            down,
            blocks,
            up,
            head,
            activation,
        };
        weights.validate()?;
        Ok(weights)
    }

    pub fn base_width(&self) -> usize {
        self.stem.conv.out_channels
    }

    pub fn global_ratio(&self) -> f64 {
        self.blocks.first().map_or(0.0, |b| b.first.global_ratio())
    }

    /// Checks the architecture: block count, strides and that every
    /// layer's input width matches its predecessor's output.
    pub fn validate(&self) -> Result<()> {
        if self.blocks.len() != BLOCK_COUNT {
            return Err(Error::ShapeMismatch(format!(
                "generator needs {BLOCK_COUNT} residual blocks, found {}",
                self.blocks.len()
            )));
        }
        if self.stem.conv.in_channels != INPUT_CHANNELS {
            return Err(Error::ShapeMismatch(format!(
                "stem must take {INPUT_CHANNELS} channels, takes {}",
                self.stem.conv.in_channels
            )));
        }
        let mut width = self.stem.conv.out_channels;
        let layer = |name: String, l: &ConvLayer, width: usize, stride: usize| -> Result<usize> {
            if l.conv.in_channels != width || l.conv.stride != stride || l.norm.channels() != l.conv.out_channels {
                return Err(Error::ShapeMismatch(format!(
                    "{name}: expected {width} input channels at stride {stride}"
                )));
            }
            Ok(l.conv.out_channels)
        };
        layer("stem".into(), &self.stem, INPUT_CHANNELS, 1)?;
        for (i, d) in self.down.iter().enumerate() {
            width = layer(format!("down.{i}"), d, width, 2)?;
        }
        for (i, block) in self.blocks.iter().enumerate() {
            for (j, ffc) in [&block.first, &block.second].into_iter().enumerate() {
                ffc.validate()
                    .map_err(|e| Error::ShapeMismatch(format!("blocks.{i}.ffc{j}: {e}")))?;
                if ffc.channels() != width {
                    return Err(Error::ShapeMismatch(format!(
                        "blocks.{i}.ffc{j}: expected {width} channels, found {}",
                        ffc.channels()
                    )));
                }
            }
        }
        for (i, u) in self.up.iter().enumerate() {
            width = layer(format!("up.{i}"), u, width, 1)?;
        }
        if self.head.in_channels != width || self.head.out_channels != 3 || self.head.stride != 1 {
            return Err(Error::ShapeMismatch(format!(
                "head: expected {width} -> 3 channels, found {} -> {}",
                self.head.in_channels, self.head.out_channels
            )));
        }
        Ok(())
    }

    /// Raw network output (before clamping and compositing) on an aligned input.
    fn network(&self, input: &Tensor) -> Result<Tensor> {
        let act = self.activation;
        let mut x = self.stem.forward(input, act)?;
        for d in &self.down {
            x = d.forward(&x, act)?;
        }
        for block in &self.blocks {
            x = block.forward(&x)?;
        }
        for u in &self.up {
            x = u.forward(&x.upsample2(), act)?;
        }
        self.head.forward(&x)
    }
}

fn aligned(n: usize) -> usize {
    n.div_ceil(ALIGN) * ALIGN
}

/// Runs the generator on `img` with the region `mask` blanked and
/// composites the synthesis back: pixels outside the mask are returned
/// untouched.
pub fn generator_forward(img: &RgbImage, mask: &InpaintMask, weights: &GeneratorWeights) -> Result<RgbImage> {
    img.ensure_same_dims(mask)?;
    weights.validate()?;
    if mask.is_clear() {
        return Ok(img.clone());
    }
    let (w, h) = img.dims();
    let (pw, ph) = (aligned(w), aligned(h));
    let input = Tensor::from_fn(INPUT_CHANNELS, ph, pw, |c, y, x| {
        let sy = reflect(y as isize, h);
        let sx = reflect(x as isize, w);
        let m = if mask.get(sx, sy) { 1.0 } else { 0.0 };
        if c == 3 {
            m
        } else {
            img.pixel(sx, sy)[c] * (1.0 - m)
        }
    });
    let out = weights.network(&input)?;
    if !out.is_finite() {
        return Err(Error::InvalidValue("generator produced non-finite values".into()));
    }

    let mut result = img.clone();
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                let rgb = [out.get(0, y, x), out.get(1, y, x), out.get(2, y, x)];
                result.set_pixel(x, y, rgb);
            }
        }
    }
    Ok(result)
}
