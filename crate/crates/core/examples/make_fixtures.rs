//! Regenerates the shipped fixture set and toy generator weights:
//!
//!     cargo run -p streetclear --example make_fixtures -- crates/core/assets
//!
//! Every output is a deterministic function of this file.

use std::path::PathBuf;

use streetclear::ffc::{Activation, GeneratorWeights};
use streetclear::{InpaintMask, LabelMap, Raster, RgbImage, ScalarMap};

const W: usize = 64;
const H: usize = 48;

const ROAD: u8 = 7;
const SIDEWALK: u8 = 8;
const BUILDING: u8 = 11;
const POLE: u8 = 17;
const TRAFFIC_SIGN: u8 = 20;
const SKY: u8 = 23;
const PERSON: u8 = 24;
const CAR: u8 = 26;

fn in_rect(x: usize, y: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> bool {
    (x0..x1).contains(&x) && (y0..y1).contains(&y)
}

fn label_at(x: usize, y: usize) -> u8 {
    if in_rect(x, y, 24, 28, 40, 38) {
        CAR
    } else if in_rect(x, y, 46, 26, 49, 38) {
        PERSON
    } else if in_rect(x, y, 52, 14, 57, 18) {
        TRAFFIC_SIGN
    } else if in_rect(x, y, 54, 18, 55, 36) {
        POLE
    } else if y >= 36 {
        if (16..48).contains(&x) {
            ROAD
        } else {
            SIDEWALK
        }
    } else if !(18..50).contains(&x) {
        if y >= 6 {
            BUILDING
        } else {
            SKY
        }
    } else if y < 20 {
        SKY
    } else {
        ROAD
    }
}

fn colour_of(label: u8, x: usize, y: usize) -> [f32; 3] {
    let t = ((x * 7 + y * 3) % 11) as f32 / 40.0;
    match label {
        CAR => [0.75 + t * 0.5, 0.12, 0.1],
        PERSON => [0.2, 0.25 + t, 0.6],
        TRAFFIC_SIGN => [0.9, 0.85, 0.1],
        POLE => [0.4, 0.4, 0.42],
        ROAD => [0.3 + t * 0.3, 0.3 + t * 0.3, 0.32],
        SIDEWALK => [0.55, 0.52, 0.5],
        BUILDING => {
            let window = x % 6 < 3 && y % 7 < 3;
            if window {
                [0.2, 0.3, 0.45]
            } else {
                [0.62 + t * 0.3, 0.5, 0.38]
            }
        }
        _ => [0.55, 0.7, 0.92 - y as f32 * 0.004],
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "assets".into());
    let fixtures = out.join("fixtures");
    std::fs::create_dir_all(&fixtures)?;

    let labels = LabelMap::new(W, H, (0..W * H).map(|i| label_at(i % W, i / W)).collect())?;
    let image = RgbImage::from_fn(W, H, |x, y| colour_of(labels.get(x, y), x, y))?;

    // The salient-object model finds the car; the person and the sign stay
    // below the γ threshold, the building is salient but never masked.
    let saliency = ScalarMap::new(
        W,
        H,
        (0..W * H)
            .map(|i| match labels.classes()[i] {
                CAR => 0.96,
                BUILDING => 0.9,
                PERSON => 0.5,
                TRAFFIC_SIGN => 0.4,
                _ => 0.02,
            })
            .collect(),
    )?;

    // Attention maps of the original and the inpainted image.
    let before = ScalarMap::new(
        W,
        H,
        (0..W * H)
            .map(|i| match labels.classes()[i] {
                CAR => 0.8,
                BUILDING => 0.3,
                PERSON => 0.4,
                _ => 0.1,
            })
            .collect(),
    )?;
    let after = ScalarMap::new(
        W,
        H,
        (0..W * H)
            .map(|i| match labels.classes()[i] {
                CAR => 0.2,
                BUILDING => 0.45,
                PERSON => 0.4,
                _ => 0.1,
            })
            .collect(),
    )?;

    let expected = InpaintMask::new(W, H, labels.classes().iter().map(|&c| c == CAR).collect())?;

    std::fs::write(fixtures.join("street.png"), image.to_png())?;
    std::fs::write(fixtures.join("street_labels.png"), labels.to_png())?;
    std::fs::write(fixtures.join("street_saliency.png"), saliency.to_png())?;
    std::fs::write(fixtures.join("street_attention_before.png"), before.to_png())?;
    std::fs::write(fixtures.join("street_attention_after.png"), after.to_png())?;
    std::fs::write(fixtures.join("street_expected_mask.png"), expected.to_png())?;

    let weights = GeneratorWeights::random(1, 0.5, Activation::Relu, 2024)?;
    weights.save(out.join("toy_weights.json"))?;
    println!("wrote fixtures to {}", fixtures.display());
    Ok(())
}
