//! Saliency-guided removal of distracting objects from street-view imagery.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`imagery`] raster types and PNG interchange,
//! * [`mask`] semantic-level inpainting mask composition,
//! * [`ffc`] the Fourier-convolution generator and a diffusion fallback,
//! * [`metrics`] attention redirection and image quality measures,
//! * [`canyon`] street aspect ratio buckets,
//! * [`pipeline`] the end-to-end removal flow,
//! * [`study`] the wayfinding study engine (crossover plans, timed trials,
//!   normalisation and improvement statistics).

pub mod canyon;
pub mod error;
pub mod ffc;
pub mod imagery;
pub mod mask;
pub mod metrics;
pub mod pipeline;
pub mod study;

pub use error::{Error, Result};
pub use imagery::{InpaintMask, LabelMap, Raster, RasterKind, RgbImage, ScalarMap};
