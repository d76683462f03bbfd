//! Raster data model and 8-bit PNG interchange.
//!
//! Every raster is row-major with the origin at the top-left pixel. Label,
//! saliency, attention and mask rasters travel as single-channel 8-bit PNG;
//! colour images as 8-bit RGB.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};

/// Common view over the raster types.
pub trait Raster {
    fn width(&self) -> usize;
    fn height(&self) -> usize;

    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }

    fn len(&self) -> usize {
        self.width() * self.height()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Errors unless `other` has the same width and height.
    fn ensure_same_dims<R: Raster + ?Sized>(&self, other: &R) -> Result<()> {
        if self.dims() == other.dims() {
            Ok(())
        } else {
            Err(Error::dims(self.dims(), other.dims()))
        }
    }

    /// Encodes the raster as an 8-bit PNG.
    fn to_png(&self) -> Vec<u8>;
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        Err(Error::ZeroDimensions)
    } else {
        Ok(())
    }
}

/// Round-half-up quantisation of a value in [0, 1] to a byte.
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Which raster type a PNG should be decoded into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterKind {
    Rgb,
    Label,
    Scalar,
    Mask,
}

/// A decoded raster of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyRaster {
    Rgb(RgbImage),
    Label(LabelMap),
    Scalar(ScalarMap),
    Mask(InpaintMask),
}

/// Decodes an 8-bit PNG into the raster type named by `kind`.
pub fn decode_raster(bytes: &[u8], kind: RasterKind) -> Result<AnyRaster> {
    let channels = match kind {
        RasterKind::Rgb => 3,
        _ => 1,
    };
    let (width, height, raw) = decode_png(bytes, channels)?;
    Ok(match kind {
        RasterKind::Rgb => AnyRaster::Rgb(RgbImage {
            width,
            height,
            data: raw.iter().map(|&b| b as f32 / 255.0).collect(),
        }),
        RasterKind::Label => AnyRaster::Label(LabelMap {
            width,
            height,
            classes: raw,
        }),
        RasterKind::Scalar => AnyRaster::Scalar(ScalarMap {
            width,
            height,
            values: raw.iter().map(|&b| b as f64 / 255.0).collect(),
        }),
        RasterKind::Mask => AnyRaster::Mask(InpaintMask {
            width,
            height,
            bits: raw.iter().map(|&b| b >= 128).collect(),
        }),
    })
}

/// Encodes any raster as PNG.
pub fn encode_raster(raster: &AnyRaster) -> Vec<u8> {
    match raster {
        AnyRaster::Rgb(r) => r.to_png(),
        AnyRaster::Label(r) => r.to_png(),
        AnyRaster::Scalar(r) => r.to_png(),
        AnyRaster::Mask(r) => r.to_png(),
    }
}

fn decode_png(bytes: &[u8], channels: usize) -> Result<(usize, usize, Vec<u8>)> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::MalformedRaster(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::MalformedRaster("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::MalformedRaster(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::MalformedRaster(format!(
            "unsupported bit depth {:?}, only 8-bit rasters are accepted",
            info.bit_depth
        )));
    }
    let found = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(Error::MalformedRaster(
                "palette PNGs are not supported".into(),
            ))
        }
    };
    if found != channels {
        return Err(Error::ChannelMismatch {
            expected: channels,
            found,
        });
    }
    let (width, height) = (info.width as usize, info.height as usize);
    check_dims(width, height)?;
    let row = width * channels;
    let mut out = Vec::with_capacity(row * height);
    for y in 0..height {
        let start = y * info.line_size;
        out.extend_from_slice(&buf[start..start + row]);
    }
    Ok((width, height, out))
}

fn encode_png(width: usize, height: usize, color: png::ColorType, raw: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
        encoder.set_color(color);
        encoder.set_depth(png::BitDepth::Eight);
        // Writing to a Vec cannot fail short of allocation failure.
        let mut writer = encoder.write_header().expect("png header");
        writer.write_image_data(raw).expect("png data");
        writer.finish().expect("png finish");
    }
    out
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(Error::from)
}

macro_rules! png_io {
    ($ty:ident, $kind:ident) => {
        impl $ty {
            pub fn from_png(bytes: &[u8]) -> Result<Self> {
                match decode_raster(bytes, RasterKind::$kind)? {
                    AnyRaster::$kind(r) => Ok(r),
                    _ => unreachable!(),
                }
            }

            pub fn load(path: impl AsRef<Path>) -> Result<Self> {
                Self::from_png(&read_file(path.as_ref())?)
            }
        }
    };
}

/// Colour image with channel values in [0, 1], interleaved RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

png_io!(RgbImage, Rgb);

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != 3 * width * height {
            return Err(Error::InvalidValue(format!(
                "rgb buffer holds {} values, expected {}",
                data.len(),
                3 * width * height
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidValue(format!(
                "channel value {v} outside [0, 1]"
            )));
        }
        Ok(RgbImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Result<Self> {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Self::new(width, height, data)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(3 * width * height);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Mutable channel buffer. Writers must keep values in [0, 1].
    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = 3 * (y * self.width + x);
        for (c, v) in rgb.into_iter().enumerate() {
            self.data[i + c] = v.clamp(0.0, 1.0);
        }
    }

    /// Rec. 601 luma per pixel.
    pub fn luminance(&self) -> Vec<f64> {
        self.data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect()
    }
}

impl Raster for RgbImage {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn to_png(&self) -> Vec<u8> {
        let raw: Vec<u8> = self.data.iter().map(|&v| quantize(v as f64)).collect();
        encode_png(self.width, self.height, png::ColorType::Rgb, &raw)
    }
}

/// Per-pixel semantic class IDs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    classes: Vec<u8>,
}

png_io!(LabelMap, Label);

impl LabelMap {
    pub fn new(width: usize, height: usize, classes: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if classes.len() != width * height {
            return Err(Error::InvalidValue(format!(
                "label buffer holds {} values, expected {}",
                classes.len(),
                width * height
            )));
        }
        Ok(LabelMap {
            width,
            height,
            classes,
        })
    }

    pub fn filled(width: usize, height: usize, class: u8) -> Result<Self> {
        Self::new(width, height, vec![class; width * height])
    }

    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.classes[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, class: u8) {
        self.classes[y * self.width + x] = class;
    }

    /// Left-right mirror image.
    pub fn mirrored(&self) -> Self {
        let mut classes = Vec::with_capacity(self.classes.len());
        for row in self.classes.chunks_exact(self.width) {
            classes.extend(row.iter().rev());
        }
        LabelMap {
            classes,
            ..*self
        }
    }
}

impl Raster for LabelMap {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn to_png(&self) -> Vec<u8> {
        encode_png(self.width, self.height, png::ColorType::Grayscale, &self.classes)
    }
}

/// Per-pixel real values in [0, 1]: saliency or attention.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

png_io!(ScalarMap, Scalar);

impl ScalarMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if values.len() != width * height {
            return Err(Error::InvalidValue(format!(
                "scalar buffer holds {} values, expected {}",
                values.len(),
                width * height
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidValue(format!("scalar value {v} outside [0, 1]")));
        }
        Ok(ScalarMap {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

impl Raster for ScalarMap {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn to_png(&self) -> Vec<u8> {
        let raw: Vec<u8> = self.values.iter().map(|&v| quantize(v)).collect();
        encode_png(self.width, self.height, png::ColorType::Grayscale, &raw)
    }
}

/// Binary mask; `true` marks pixels to be synthesised.
///
/// Also serves as a plain pixel set (regions, footprints).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InpaintMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

png_io!(InpaintMask, Mask);

impl InpaintMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        if bits.len() != width * height {
            return Err(Error::InvalidValue(format!(
                "mask buffer holds {} values, expected {}",
                bits.len(),
                width * height
            )));
        }
        Ok(InpaintMask {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_clear(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    /// Linear indices of the set pixels.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn intersects(&self, other: &InpaintMask) -> bool {
        self.bits.iter().zip(&other.bits).any(|(&a, &b)| a && b)
    }

    pub fn union_with(&mut self, other: &InpaintMask) {
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &InpaintMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

impl Raster for InpaintMask {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn to_png(&self) -> Vec<u8> {
        let raw: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        encode_png(self.width, self.height, png::ColorType::Grayscale, &raw)
    }
}
