//! The end-to-end flow: binarize saliency, split the label map into
//! semantic levels, compose the mask, optionally dilate it, inpaint, and
//! measure the attention change when attention maps are supplied.

use crate::error::{Error, Result};
use crate::ffc::{diffusion_inpaint, generator_forward, DiffusionOptions, GeneratorWeights};
use crate::imagery::{InpaintMask, LabelMap, Raster, RgbImage, ScalarMap};
use crate::mask::{binarize_saliency, classify_levels, compose_inpaint_mask, dilate_mask, SemanticLevelSpec};
use crate::metrics::{compute_vd, compute_vo, MetricRecord};

pub const DEFAULT_GAMMA: f64 = 0.8;

#[derive(Debug, Clone)]
pub enum Inpainter {
    Generator(Box<GeneratorWeights>),
    Diffusion(DiffusionOptions),
}

impl Inpainter {
    pub fn name(&self) -> &'static str {
        match self {
            Inpainter::Generator(_) => "ffc",
            Inpainter::Diffusion(_) => "diffusion",
        }
    }

    pub fn inpaint(&self, img: &RgbImage, mask: &InpaintMask) -> Result<RgbImage> {
        match self {
            Inpainter::Generator(w) => generator_forward(img, mask, w),
            Inpainter::Diffusion(opts) => diffusion_inpaint(img, mask, *opts),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub gamma: f64,
    pub dilation: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            gamma: DEFAULT_GAMMA,
            dilation: 0,
        }
    }
}

pub struct PipelineInputs<'a> {
    pub image_id: &'a str,
    pub image: &'a RgbImage,
    pub labels: &'a LabelMap,
    pub saliency: &'a ScalarMap,
    /// Attention maps of the original and the inpainted image.
    pub attention: Option<(&'a ScalarMap, &'a ScalarMap)>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Mask before dilation.
    pub composed: InpaintMask,
    /// Mask handed to the inpainter.
    pub mask: InpaintMask,
    pub image: RgbImage,
    pub record: MetricRecord,
}

pub fn run_pipeline(
    inputs: &PipelineInputs<'_>,
    spec: &SemanticLevelSpec,
    options: PipelineOptions,
    inpainter: &Inpainter,
) -> Result<PipelineOutput> {
    let img = inputs.image;
    img.ensure_same_dims(inputs.labels)?;
    img.ensure_same_dims(inputs.saliency)?;
    if let Some((before, after)) = inputs.attention {
        img.ensure_same_dims(before)?;
        img.ensure_same_dims(after)?;
    }

    let salient = binarize_saliency(inputs.saliency, options.gamma)?;
    let partition = classify_levels(inputs.labels, spec)?;
    let composed = compose_inpaint_mask(&salient, &partition)?;
    let mask = dilate_mask(&composed, options.dilation);

    let mut record = MetricRecord {
        image_id: inputs.image_id.to_string(),
        ..Default::default()
    };
    let image = if mask.is_clear() {
        record.note = Some("no-op: no salient distracting object".into());
        img.clone()
    } else if mask.is_full() {
        return Err(Error::FullMask);
    } else {
        inpainter.inpaint(img, &mask)?
    };

    if let Some((before, after)) = inputs.attention {
        let mut notes: Vec<String> = record.note.take().into_iter().collect();
        match compute_vo(before, after, partition.objects_of_interest()) {
            Ok(v) => record.v_o = Some(v),
            Err(e) => notes.push(format!("v_o: {e}")),
        }
        match compute_vd(before, after, &composed) {
            Ok(v) => record.v_d = Some(v),
            Err(e) => notes.push(format!("v_d: {e}")),
        }
        record.note = (!notes.is_empty()).then(|| notes.join("; "));
    }

    Ok(PipelineOutput {
        composed,
        mask,
        image,
        record,
    })
}
