use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use streetclear::canyon::{classify_canyon, estimate_aspect_ratio, ESTIMATOR_VERSION};
use streetclear::ffc::{DiffusionOptions, GeneratorWeights};
use streetclear::mask::{binarize_saliency, classify_levels, compose_inpaint_mask, dilate_mask, SemanticLevelSpec};
use streetclear::metrics::{
    compute_quality, compute_vd, compute_vo, insert_objects, summarize_records, Cutout, MetricRecord,
};
use streetclear::pipeline::{run_pipeline, Inpainter, PipelineInputs, PipelineOptions};
use streetclear::study::{summarize, LogLine, StudyLog, SummaryOptions};
use streetclear::{InpaintMask, LabelMap, Raster, RgbImage, ScalarMap};

use crate::cli::*;
use crate::config::{FileConfig, PipelineConfig};
use crate::fsutil::{write_atomic, write_json_line};
use crate::CliError;

fn load_spec(path: Option<&Path>) -> anyhow::Result<SemanticLevelSpec> {
    match path {
        Some(p) => SemanticLevelSpec::load(p).with_context(|| format!("loading level spec {}", p.display())),
        None => Ok(SemanticLevelSpec::default()),
    }
}

fn ctx(path: &Path) -> impl Fn() -> String + '_ {
    move || format!("reading {}", path.display())
}

fn inpainter(cfg: &PipelineConfig) -> anyhow::Result<Inpainter> {
    if cfg.weights == "fallback" {
        return Ok(Inpainter::Diffusion(DiffusionOptions::default()));
    }
    let path = PathBuf::from(&cfg.weights);
    if !path.exists() {
        if cfg.fallback_on_missing {
            log::warn!("weights {} not found; using diffusion fallback", path.display());
            return Ok(Inpainter::Diffusion(DiffusionOptions::default()));
        }
        return Err(CliError::MissingWeights(path).into());
    }
    let weights = GeneratorWeights::load(&path).with_context(|| format!("loading weights {}", path.display()))?;
    Ok(Inpainter::Generator(Box::new(weights)))
}

pub fn compose_mask(args: &ComposeMaskArgs, file: &FileConfig) -> anyhow::Result<()> {
    let cfg = PipelineConfig::merge(file, &args.stage);
    let spec = load_spec(cfg.spec.as_deref())?;
    let labels = LabelMap::load(&args.labels).with_context(ctx(&args.labels))?;
    let saliency = ScalarMap::load(&args.saliency).with_context(ctx(&args.saliency))?;
    labels.ensure_same_dims(&saliency)?;
    let salient = binarize_saliency(&saliency, cfg.gamma)?;
    let partition = classify_levels(&labels, &spec)?;
    let composed = compose_inpaint_mask(&salient, &partition)?;
    let mask = dilate_mask(&composed, cfg.dilation);
    write_atomic(&args.out, &mask.to_png())?;
    let levels: Vec<usize> = (0..4).map(|k| partition.region(k).count()).collect();
    write_json_line(&json!({
        "mask": args.out,
        "width": mask.width(),
        "height": mask.height(),
        "gamma": cfg.gamma,
        "dilation": cfg.dilation,
        "salient_pixels": salient.count(),
        "level_pixels": levels,
        "masked_pixels": mask.count(),
    }))
}

pub fn inpaint(args: &InpaintArgs, file: &FileConfig) -> anyhow::Result<()> {
    let cfg = PipelineConfig::merge(file, &args.stage);
    let engine = inpainter(&cfg)?;
    let image = RgbImage::load(&args.image).with_context(ctx(&args.image))?;
    let mask = InpaintMask::load(&args.mask).with_context(ctx(&args.mask))?;
    image.ensure_same_dims(&mask)?;
    let out = engine.inpaint(&image, &mask)?;
    write_atomic(&args.out, &out.to_png())?;
    write_json_line(&json!({
        "output": args.out,
        "method": engine.name(),
        "masked_pixels": mask.count(),
    }))
}

fn image_id_of(explicit: Option<&str>, path: &Path) -> String {
    explicit
        .map(str::to_string)
        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_default()
}

pub fn metrics(args: &MetricsArgs) -> anyhow::Result<()> {
    let reference = RgbImage::load(&args.reference).with_context(ctx(&args.reference))?;
    let candidate = RgbImage::load(&args.candidate).with_context(ctx(&args.candidate))?;
    let q = compute_quality(&reference, &candidate)?;
    let record = MetricRecord {
        image_id: image_id_of(args.image_id.as_deref(), &args.candidate),
        ..Default::default()
    }
    .with_quality(&q);
    write_json_line(&record)
}

pub fn attention_delta(args: &AttentionArgs) -> anyhow::Result<()> {
    let before = ScalarMap::load(&args.before).with_context(ctx(&args.before))?;
    let after = ScalarMap::load(&args.after).with_context(ctx(&args.after))?;
    let distracting = InpaintMask::load(&args.distracting).with_context(ctx(&args.distracting))?;
    let objects = match (&args.objects, &args.labels) {
        (Some(p), _) => InpaintMask::load(p).with_context(ctx(p))?,
        (None, Some(p)) => {
            let labels = LabelMap::load(p).with_context(ctx(p))?;
            before.ensure_same_dims(&labels)?;
            let spec = load_spec(args.spec.as_deref())?;
            classify_levels(&labels, &spec)?.objects_of_interest().clone()
        }
        (None, None) => unreachable!("clap requires one of --objects and --labels"),
    };
    let record = MetricRecord {
        image_id: image_id_of(args.image_id.as_deref(), &args.after),
        v_o: Some(compute_vo(&before, &after, &objects)?),
        v_d: Some(compute_vd(&before, &after, &distracting)?),
        ..Default::default()
    };
    write_json_line(&record)
}

pub fn classify(args: &CanyonArgs) -> anyhow::Result<()> {
    let (alpha, source) = match (args.alpha, &args.labels) {
        (Some(a), _) => (a, "given"),
        (None, Some(p)) => {
            let labels = LabelMap::load(p).with_context(ctx(p))?;
            let spec = load_spec(args.spec.as_deref())?;
            (estimate_aspect_ratio(&labels, &spec, &spec.road_ids), "estimated")
        }
        (None, None) => unreachable!("clap requires one of --alpha and --labels"),
    };
    let class = classify_canyon(alpha).map_err(|e| CliError::Usage(e.to_string()))?;
    write_json_line(&json!({
        "alpha": class.alpha,
        "bucket": class.bucket.range_label(),
        "name": class.bucket.name(),
        "source": source,
        "estimator_version": ESTIMATOR_VERSION,
    }))
}

type CutoutSpec = (PathBuf, PathBuf, Option<(usize, usize)>);

fn parse_cutout(spec: &str) -> anyhow::Result<CutoutSpec> {
    let usage = || CliError::Usage(format!("cutout `{spec}` is not IMAGE:MASK[@X,Y]"));
    let (paths, pos) = match spec.rsplit_once('@') {
        Some((p, xy)) => {
            let (x, y) = xy.split_once(',').ok_or_else(usage)?;
            (p, Some((x.trim().parse().map_err(|_| usage())?, y.trim().parse().map_err(|_| usage())?)))
        }
        None => (spec, None),
    };
    let (img, mask) = paths.split_once(':').ok_or_else(usage)?;
    Ok((img.into(), mask.into(), pos))
}

pub fn insert(args: &InsertArgs) -> anyhow::Result<()> {
    let base = RgbImage::load(&args.base).with_context(ctx(&args.base))?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut cutouts = Vec::with_capacity(args.cutouts.len());
    for spec in &args.cutouts {
        let (img_path, mask_path, pos) = parse_cutout(spec)?;
        let image = RgbImage::load(&img_path).with_context(ctx(&img_path))?;
        let mask = InpaintMask::load(&mask_path).with_context(ctx(&mask_path))?;
        image.ensure_same_dims(&mask)?;
        let (w, h) = image.dims();
        if w > base.width() || h > base.height() {
            bail!(CliError::Usage(format!(
                "cutout {}x{} is larger than the {}x{} base",
                w,
                h,
                base.width(),
                base.height()
            )));
        }
        let (x, y) = pos.unwrap_or_else(|| {
            (
                rng.random_range(0..=base.width() - w),
                rng.random_range(0..=base.height() - h),
            )
        });
        cutouts.push(Cutout { image, mask, x, y });
    }
    let (composite, footprint) = insert_objects(&base, &cutouts)?;
    write_atomic(&args.out, &composite.to_png())?;
    write_atomic(&args.mask_out, &footprint.to_png())?;
    let placements: Vec<Value> = cutouts.iter().map(|c| json!({"x": c.x, "y": c.y})).collect();
    write_json_line(&json!({
        "output": args.out,
        "mask": args.mask_out,
        "seed": args.seed,
        "placements": placements,
        "masked_pixels": footprint.count(),
    }))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchItem {
    image_id: String,
    image: PathBuf,
    labels: PathBuf,
    saliency: PathBuf,
    #[serde(default)]
    attention_before: Option<PathBuf>,
    #[serde(default)]
    attention_after: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct PipelineResult {
    image_id: String,
    method: &'static str,
    mask: PathBuf,
    inpainted: PathBuf,
    masked_pixels: usize,
    record: MetricRecord,
}

fn run_item(
    item: &BatchItem,
    spec: &SemanticLevelSpec,
    options: PipelineOptions,
    engine: &Inpainter,
    out_dir: &Path,
) -> anyhow::Result<PipelineResult> {
    let image = RgbImage::load(&item.image).with_context(ctx(&item.image))?;
    let labels = LabelMap::load(&item.labels).with_context(ctx(&item.labels))?;
    let saliency = ScalarMap::load(&item.saliency).with_context(ctx(&item.saliency))?;
    let attention = match (&item.attention_before, &item.attention_after) {
        (Some(b), Some(a)) => Some((
            ScalarMap::load(b).with_context(ctx(b))?,
            ScalarMap::load(a).with_context(ctx(a))?,
        )),
        _ => None,
    };
    let inputs = PipelineInputs {
        image_id: &item.image_id,
        image: &image,
        labels: &labels,
        saliency: &saliency,
        attention: attention.as_ref().map(|(b, a)| (b, a)),
    };
    let out = run_pipeline(&inputs, spec, options, engine)
        .with_context(|| format!("processing `{}`", item.image_id))?;
    let mask_path = out_dir.join(format!("{}_mask.png", item.image_id));
    let image_path = out_dir.join(format!("{}_inpainted.png", item.image_id));
    write_atomic(&mask_path, &out.mask.to_png())?;
    write_atomic(&image_path, &out.image.to_png())?;
    Ok(PipelineResult {
        image_id: item.image_id.clone(),
        method: engine.name(),
        mask: mask_path,
        inpainted: image_path,
        masked_pixels: out.mask.count(),
        record: out.record,
    })
}

pub fn pipeline(args: &PipelineArgs, file: &FileConfig) -> anyhow::Result<()> {
    let mut cfg = PipelineConfig::merge(file, &args.stage);
    if args.out_dir.is_some() {
        cfg.out_dir = args.out_dir.clone();
    }
    if args.report.is_some() {
        cfg.report = args.report.clone();
    }
    let out_dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let spec = load_spec(cfg.spec.as_deref())?;
    let engine = inpainter(&cfg)?;
    let options = PipelineOptions {
        gamma: cfg.gamma,
        dilation: cfg.dilation,
    };

    let items: Vec<BatchItem> = match &args.batch {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(ctx(path))?;
            let base = path.parent().unwrap_or(Path::new("."));
            let mut items: Vec<BatchItem> =
                serde_json::from_str(&text).with_context(|| format!("parsing batch {}", path.display()))?;
            for it in &mut items {
                for p in [&mut it.image, &mut it.labels, &mut it.saliency] {
                    *p = base.join(&*p);
                }
                for p in [&mut it.attention_before, &mut it.attention_after].into_iter().flatten() {
                    *p = base.join(&*p);
                }
            }
            items
        }
        None => {
            let image = args.image.clone().expect("clap enforces --image");
            vec![BatchItem {
                image_id: image_id_of(args.image_id.as_deref(), &image),
                image,
                labels: args.labels.clone().expect("clap enforces --labels"),
                saliency: args.saliency.clone().expect("clap enforces --saliency"),
                attention_before: args.attention_before.clone(),
                attention_after: args.attention_after.clone(),
            }]
        }
    };
    let mut ids: Vec<&str> = items.iter().map(|i| i.image_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        bail!(CliError::Usage(format!("duplicate image_id `{}` in batch", w[0])));
    }

    let results: Vec<anyhow::Result<PipelineResult>> = items
        .par_iter()
        .map(|item| run_item(item, &spec, options, &engine, &out_dir))
        .collect();
    let results: Vec<PipelineResult> = results.into_iter().collect::<anyhow::Result<_>>()?;

    if let Some(report) = &cfg.report {
        let mut buf = Vec::new();
        for r in &results {
            serde_json::to_writer(&mut buf, &r.record)?;
            buf.push(b'\n');
        }
        write_atomic(report, &buf)?;
    }
    for r in &results {
        write_json_line(r)?;
    }
    Ok(())
}

/// Every JSON document in a file: a single (possibly pretty-printed)
/// document, or one per line.
fn documents(path: &Path) -> anyhow::Result<Vec<Value>> {
    let text = std::fs::read_to_string(path).with_context(ctx(path))?;
    if let Ok(v) = serde_json::from_str::<Value>(&text) {
        return Ok(match v {
            Value::Array(items) => items,
            other => vec![other],
        });
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}: not JSON", path.display(), i + 1)))
        .collect()
}

fn study_report(path: &Path, options: SummaryOptions) -> anyhow::Result<Value> {
    let lines = StudyLog::read(path)?;
    let mut study_id = String::new();
    let mut plan = None;
    let mut records = Vec::new();
    for line in lines {
        match line {
            LogLine::Plan { study_id: id, plan: p, .. } => {
                study_id = id;
                plan = Some(p);
            }
            LogLine::Trial(r) => records.push(r),
            LogLine::Session { .. } => {}
        }
    }
    let plan = plan.context("study log has no plan")?;
    let summary = summarize(&plan, &records, options)?;
    Ok(json!({"study_id": study_id, "trials": records.len(), "summary": summary}))
}

pub fn report(args: &ReportArgs) -> anyhow::Result<()> {
    let options = SummaryOptions {
        only_hits: args.only_hits,
    };
    let value = if let Some(log) = &args.study_log {
        study_report(log, options)?
    } else if let Some(id) = &args.study {
        let root = args
            .data_dir
            .clone()
            .ok_or_else(|| CliError::Usage(format!("--study needs --data-dir or ${DATA_ROOT_ENV}")))?;
        study_report(&root.join("studies").join(format!("{id}.jsonl")), options)?
    } else {
        let mut records = Vec::new();
        let mut documents_seen = 0;
        for path in &args.inputs {
            for doc in documents(path)? {
                documents_seen += 1;
                let candidate = match doc.get("record") {
                    Some(r) => r.clone(),
                    None => doc,
                };
                if candidate.get("image_id").is_some() {
                    records.push(serde_json::from_value::<MetricRecord>(candidate)?);
                }
            }
        }
        json!({
            "documents": documents_seen,
            "records": records.len(),
            "summary": summarize_records(&records),
        })
    };
    if let Some(out) = &args.out {
        let mut bytes = serde_json::to_vec_pretty(&value)?;
        bytes.push(b'\n');
        write_atomic(out, &bytes)?;
    }
    write_json_line(&value)
}
