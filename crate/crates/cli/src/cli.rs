use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::parse_gamma;

pub const DATA_ROOT_ENV: &str = "STREETCLEAR_DATA_ROOT";

#[derive(Debug, Parser)]
#[command(name = "streetclear", version, about = "Remove distracting objects from street-view imagery")]
pub struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compose the inpainting mask from a label map and a saliency map.
    ComposeMask(ComposeMaskArgs),
    /// Fill the masked region of an image.
    Inpaint(InpaintArgs),
    /// Full-reference quality of a candidate against a reference image.
    Metrics(MetricsArgs),
    /// Attention change between attention maps of original and inpainted images.
    AttentionDelta(AttentionArgs),
    /// Street aspect ratio bucket, from a value or estimated from a label map.
    ClassifyCanyon(CanyonArgs),
    /// Paste object cutouts onto a clean image for ground-truth evaluation.
    InsertObjects(InsertArgs),
    /// Run the wayfinding study HTTP service.
    Serve(ServeArgs),
    /// Summarise metric records or a study log.
    Report(ReportArgs),
    /// Mask composition, inpainting and attention metrics in one run.
    Pipeline(PipelineArgs),
}

/// Mask and inpainting settings shared by several commands.
#[derive(Debug, Clone, Default, Args)]
pub struct StageFlags {
    /// Saliency binarization threshold relative to the map maximum.
    #[arg(long, value_parser = parse_gamma)]
    pub gamma: Option<f64>,
    /// Square dilation radius applied to the composed mask.
    #[arg(long)]
    pub dilation: Option<usize>,
    /// Semantic level spec (JSON); the bundled Cityscapes table otherwise.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Generator weight manifest, or `fallback` for harmonic diffusion.
    #[arg(long, value_name = "FILE|fallback")]
    pub weights: Option<String>,
    /// Use diffusion when the weight manifest does not exist.
    #[arg(long)]
    pub fallback_on_missing: bool,
}

#[derive(Debug, Args)]
pub struct ComposeMaskArgs {
    #[arg(long, value_name = "PNG")]
    pub labels: PathBuf,
    #[arg(long, value_name = "PNG")]
    pub saliency: PathBuf,
    #[arg(long, value_name = "PNG")]
    pub out: PathBuf,
    #[command(flatten)]
    pub stage: StageFlags,
}

#[derive(Debug, Args)]
pub struct InpaintArgs {
    #[arg(long, value_name = "PNG")]
    pub image: PathBuf,
    #[arg(long, value_name = "PNG")]
    pub mask: PathBuf,
    #[arg(long, value_name = "PNG")]
    pub out: PathBuf,
    #[command(flatten)]
    pub stage: StageFlags,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Ground-truth image.
    #[arg(long = "ref", value_name = "PNG")]
    pub reference: PathBuf,
    /// Inpainted candidate.
    #[arg(long = "cand", value_name = "PNG")]
    pub candidate: PathBuf,
    #[arg(long)]
    pub image_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct AttentionArgs {
    /// Attention map of the original image.
    #[arg(long, value_name = "PNG")]
    pub before: PathBuf,
    /// Attention map of the inpainted image.
    #[arg(long, value_name = "PNG")]
    pub after: PathBuf,
    /// Objects-of-interest mask; derived from `--labels` when omitted.
    #[arg(long, value_name = "PNG", required_unless_present = "labels")]
    pub objects: Option<PathBuf>,
    /// Label map whose building level gives the objects of interest.
    #[arg(long, value_name = "PNG")]
    pub labels: Option<PathBuf>,
    /// Distracting-object mask (usually the composed inpainting mask).
    #[arg(long, value_name = "PNG")]
    pub distracting: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub image_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct CanyonArgs {
    #[arg(long, conflicts_with = "labels", required_unless_present = "labels")]
    pub alpha: Option<f64>,
    #[arg(long, value_name = "PNG")]
    pub labels: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InsertArgs {
    #[arg(long, value_name = "PNG")]
    pub base: PathBuf,
    /// `IMAGE.png:MASK.png` or `IMAGE.png:MASK.png@X,Y`; random placement
    /// without a position.
    #[arg(long = "cutout", value_name = "SPEC", required = true)]
    pub cutouts: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "PNG")]
    pub out: PathBuf,
    /// Where to write the union footprint mask.
    #[arg(long, value_name = "PNG")]
    pub mask_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Directory holding the study logs.
    #[arg(long, env = DATA_ROOT_ENV, value_name = "DIR")]
    pub data_dir: PathBuf,
    /// Root of the trial images; `<data-dir>/images` by default.
    #[arg(long, value_name = "DIR")]
    pub images: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON or JSONL outputs of other subcommands.
    #[arg(value_name = "FILE", required_unless_present_any = ["study_log", "study"])]
    pub inputs: Vec<PathBuf>,
    /// Summarise a study log file instead.
    #[arg(long, value_name = "JSONL", conflicts_with_all = ["inputs", "study"])]
    pub study_log: Option<PathBuf>,
    /// Study id under the data root.
    #[arg(long, conflicts_with = "inputs")]
    pub study: Option<String>,
    #[arg(long, env = DATA_ROOT_ENV, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Count only trials whose click hit the target.
    #[arg(long)]
    pub only_hits: bool,
    /// Also write the report atomically to this file.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, value_name = "PNG", required_unless_present = "batch")]
    pub image: Option<PathBuf>,
    #[arg(long, value_name = "PNG", required_unless_present = "batch")]
    pub labels: Option<PathBuf>,
    #[arg(long, value_name = "PNG", required_unless_present = "batch")]
    pub saliency: Option<PathBuf>,
    #[arg(long, value_name = "PNG", requires = "attention_after")]
    pub attention_before: Option<PathBuf>,
    #[arg(long, value_name = "PNG", requires = "attention_before")]
    pub attention_after: Option<PathBuf>,
    #[arg(long)]
    pub image_id: Option<String>,
    /// JSON list of items `{image_id, image, labels, saliency,
    /// attention_before?, attention_after?}`, paths relative to the file.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["image", "labels", "saliency"])]
    pub batch: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// JSONL metrics report path.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub stage: StageFlags,
}
