//! Fourier-convolution inpainting engine (inference only) and a
//! weight-free harmonic fallback.

mod block;
mod conv;
mod diffusion;
mod fft;
mod generator;
mod tensor;
mod weights;

pub use block::{ffc_forward, spectral_transform, split_channels, Activation, FfcBlockWeights, ResidualBlock};
pub use conv::{Affine, Conv2d};
pub use diffusion::{diffusion_inpaint, DiffusionOptions};
pub use fft::{irfft2, rfft2, Spectrum};
pub use generator::{generator_forward, ConvLayer, GeneratorWeights, BLOCK_COUNT, INPUT_CHANNELS};
pub use tensor::Tensor;
pub use weights::{load_weights, TensorEntry, WeightManifest, FORMAT_VERSION};
