//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p streetclear-cli --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use streetclear::canyon::classify_canyon;
use streetclear::ffc::{
    diffusion_inpaint, ffc_forward, generator_forward, irfft2, rfft2, Activation, DiffusionOptions, FfcBlockWeights,
    GeneratorWeights, Tensor,
};
use streetclear::mask::{binarize_saliency, classify_levels, compose_inpaint_mask, SemanticLevelSpec};
use streetclear::metrics::{l1_error, psnr, ssim, vd_from_values, vo_from_values, PSNR_CAP_DB};
use streetclear::study::{
    compute_improvement, summarize, Click, Condition, ManualClock, StudyService, SummaryOptions,
    TrialRecord, TrialSubmission,
};
use streetclear::{InpaintMask, LabelMap, Raster, RgbImage, ScalarMap};

use common::{client, do_trial, fixtures, run, study_plan, toy_weights, Server};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

// ---------------------------------------------------------------- masks

struct MaskCase {
    labels: LabelMap,
    saliency: ScalarMap,
    gamma: f64,
}

fn mask_corpus() -> Vec<MaskCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    (0..1000)
        .map(|_| {
            let (w, h) = (rng.random_range(1..=16), rng.random_range(1..=16));
            let k = rng.random_range(1..=6);
            let palette: Vec<u8> = (0..k).map(|_| rng.random_range(0..34)).collect();
            let classes = (0..w * h).map(|_| palette[rng.random_range(0..k)]).collect();
            let quantised = rng.random_bool(0.5);
            let silent = rng.random_bool(0.05);
            let values = (0..w * h)
                .map(|_| {
                    if silent {
                        0.0
                    } else if quantised {
                        rng.random_range(0..=4) as f64 / 4.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect();
            let gamma = match rng.random_range(0..3) {
                0 => [0.25, 0.5, 0.75, 1.0][rng.random_range(0..4)],
                _ => rng.random_range(0.01..=1.0),
            };
            MaskCase {
                labels: LabelMap::new(w, h, classes).unwrap(),
                saliency: ScalarMap::new(w, h, values).unwrap(),
                gamma,
            }
        })
        .collect()
}

/// Per-pixel restatement: a pixel is masked when its class sits in a
/// distracting level and some salient pixel shares that level.
fn oracle_mask(case: &MaskCase, spec: &SemanticLevelSpec) -> Vec<bool> {
    let s = case.saliency.values();
    let peak = s.iter().cloned().fold(0.0_f64, f64::max);
    let salient: Vec<bool> = s.iter().map(|&v| peak > 0.0 && v > case.gamma * peak).collect();
    let level: Vec<Option<usize>> = case.labels.classes().iter().map(|&c| spec.level_of(c)).collect();
    (0..s.len())
        .map(|p| match level[p] {
            Some(l) if l >= 1 => (0..s.len()).any(|q| salient[q] && level[q] == Some(l)),
            _ => false,
        })
        .collect()
}

fn compose(case: &MaskCase, spec: &SemanticLevelSpec) -> Result<InpaintMask, String> {
    let salient = binarize_saliency(&case.saliency, case.gamma).map_err(|e| e.to_string())?;
    let part = classify_levels(&case.labels, spec).map_err(|e| e.to_string())?;
    compose_inpaint_mask(&salient, &part).map_err(|e| e.to_string())
}

fn mask_oracle() -> Outcome {
    let spec = SemanticLevelSpec::default();
    let corpus = mask_corpus();
    let start = Instant::now();
    let mut nonempty = 0;
    for (i, case) in corpus.iter().enumerate() {
        let got = compose(case, &spec)?;
        let want = oracle_mask(case, &spec);
        ensure(got.bits() == want.as_slice(), || format!("instance {i} differs from oracle"))?;
        nonempty += usize::from(!got.is_clear());
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(10))?;
    Ok(format!("1000/1000 exact ({nonempty} non-empty) in {elapsed:.2?}"))
}

fn region0_exclusion() -> Outcome {
    let spec = SemanticLevelSpec::default();
    let mut violations = 0;
    let mut building_pixels = 0;
    for case in mask_corpus() {
        let got = compose(&case, &spec)?;
        for (i, &c) in case.labels.classes().iter().enumerate() {
            if spec.level_of(c) == Some(0) {
                building_pixels += 1;
                violations += usize::from(got.bits()[i]);
            }
        }
    }
    ensure(violations == 0, || format!("{violations} building pixels masked"))?;
    Ok(format!("0 violations over {building_pixels} building pixels"))
}

// ---------------------------------------------------------------- FFT / FFC

fn random_tensor(c: usize, h: usize, w: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(c, h, w, |_, _, _| rng.random_range(-1.0..1.0))
}

fn fft_ffc_numerics() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    let mut worst_roundtrip = 0.0_f32;
    let mut worst_parseval = 0.0_f64;
    for &(h, w) in &[(1, 1), (1, 7), (3, 5), (8, 8), (17, 32), (64, 63), (128, 128)] {
        let t = random_tensor(2, h, w, &mut rng);
        let spec = rfft2(&t);
        worst_roundtrip = worst_roundtrip.max(irfft2(&spec).max_abs_diff(&t));
        let spatial: f64 = t.data().iter().map(|&v| (v as f64) * (v as f64)).sum();
        let spectral = spec.full_energy() / (h * w) as f64;
        worst_parseval = worst_parseval.max((spectral - spatial).abs() / spatial);
    }
    ensure(worst_roundtrip <= 1e-6, || format!("roundtrip error {worst_roundtrip:e}"))?;
    ensure(worst_parseval <= 1e-4, || format!("Parseval error {worst_parseval:e}"))?;

    let mut worst_linear = 0.0_f32;
    for &ratio in &[0.0, 0.25, 0.5, 0.75, 1.0] {
        let w = FfcBlockWeights::random(8, ratio, 3, Activation::Identity, &mut rng)
            .map_err(|e| e.to_string())?
            .without_offsets();
        let (x, y) = (random_tensor(8, 16, 16, &mut rng), random_tensor(8, 16, 16, &mut rng));
        let (a, b) = (0.7_f32, -1.3_f32);
        let mut mix = x.scaled(a);
        mix.add_assign(&y.scaled(b)).unwrap();
        let lhs = ffc_forward(&mix, &w).map_err(|e| e.to_string())?;
        let mut rhs = ffc_forward(&x, &w).unwrap().scaled(a);
        rhs.add_assign(&ffc_forward(&y, &w).unwrap().scaled(b)).unwrap();
        worst_linear = worst_linear.max(lhs.max_abs_diff(&rhs));
    }
    ensure(worst_linear <= 1e-5, || format!("linearity error {worst_linear:e}"))?;

    // Perturb one corner pixel and look at the far corner of the output.
    let far_change = |ratio: f64, rng: &mut ChaCha8Rng| -> Result<(f32, f32), String> {
        let w = FfcBlockWeights::random(8, ratio, 3, Activation::Relu, rng).map_err(|e| e.to_string())?;
        let x = random_tensor(8, 32, 32, rng);
        let mut x2 = x.clone();
        for c in 0..8 {
            x2.set(c, 0, 0, x.get(c, 0, 0) + 1.0);
        }
        let (y, y2) = (ffc_forward(&x, &w).unwrap(), ffc_forward(&x2, &w).unwrap());
        let (mut far, mut outside) = (0.0_f32, 0.0_f32);
        for c in 0..8 {
            for yy in 0..32 {
                for xx in 0..32 {
                    let d = (y.get(c, yy, xx) - y2.get(c, yy, xx)).abs();
                    if yy.max(xx) > 1 {
                        outside = outside.max(d);
                    }
                    if yy >= 20 && xx >= 20 {
                        far = far.max(d);
                    }
                }
            }
        }
        Ok((far, outside))
    };
    for &ratio in &[0.25, 0.5, 0.75] {
        let (far, _) = far_change(ratio, &mut rng)?;
        ensure(far > 1e-4, || format!("global_ratio {ratio}: far output unchanged ({far:e})"))?;
    }
    let (_, outside) = far_change(0.0, &mut rng)?;
    ensure(outside == 0.0, || format!("global_ratio 0: change {outside:e} beyond the kernel footprint"))?;

    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!(
        "roundtrip {worst_roundtrip:.1e}, Parseval {worst_parseval:.1e}, linearity {worst_linear:.1e}, \
         global field for 0.25/0.5/0.75, local for 0, {elapsed:.2?}"
    ))
}

// ---------------------------------------------------------------- inpainting

fn random_fixture(rng: &mut ChaCha8Rng, w: usize, h: usize) -> (RgbImage, InpaintMask) {
    let img = RgbImage::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap();
    let (bw, bh) = (rng.random_range(1..=w.div_ceil(2)), rng.random_range(1..=h.div_ceil(2)));
    let (bx, by) = (rng.random_range(0..=w - bw), rng.random_range(0..=h - bh));
    let density = rng.random_range(0.0..0.15);
    let mut mask = InpaintMask::from_fn(w, h, |x, y| (bx..bx + bw).contains(&x) && (by..by + bh).contains(&y)).unwrap();
    for y in 0..h {
        for x in 0..w {
            if rng.random_bool(density) {
                mask.set(x, y, true);
            }
        }
    }
    if mask.is_full() {
        mask.set(0, 0, false);
    }
    (img, mask)
}

fn unmasked_identical(a: &RgbImage, b: &RgbImage, mask: &InpaintMask) -> bool {
    let (w, h) = a.dims();
    (0..h).all(|y| (0..w).all(|x| mask.get(x, y) || a.pixel(x, y).map(f32::to_bits) == b.pixel(x, y).map(f32::to_bits)))
}

/// Harmonic fill by Gaussian elimination on the in-bounds 4-neighbour
/// Laplacian, one channel at a time.
fn dense_laplace(img: &RgbImage, mask: &InpaintMask, channel: usize) -> Vec<f64> {
    let (w, h) = img.dims();
    let unknowns: Vec<usize> = mask.indices().collect();
    let index: BTreeMap<usize, usize> = unknowns.iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let n = unknowns.len();
    let mut a = vec![vec![0.0_f64; n + 1]; n];
    for (row, &p) in unknowns.iter().enumerate() {
        let (x, y) = ((p % w) as isize, (p / w) as isize);
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                continue;
            }
            let q = ny as usize * w + nx as usize;
            a[row][row] += 1.0;
            match index.get(&q) {
                Some(&col) => a[row][col] -= 1.0,
                None => a[row][n] += img.pixel(q % w, q / w)[channel] as f64,
            }
        }
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col && row[col] != 0.0 {
                let f = row[col] / pivot_row[col];
                for (v, p) in row.iter_mut().zip(&pivot_row).skip(col) {
                    *v -= f * p;
                }
            }
        }
    }
    let mut out: Vec<f64> = img.data().iter().skip(channel).step_by(3).map(|&v| v as f64).collect();
    for (k, &p) in unknowns.iter().enumerate() {
        out[p] = a[k][n] / a[k][k];
    }
    out
}

fn inpainting_contracts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let opts = DiffusionOptions::default();
    let mut worst_principle = 0.0_f64;
    for i in 0..100 {
        let (w, h) = (rng.random_range(4..=40), rng.random_range(4..=40));
        let (img, mask) = random_fixture(&mut rng, w, h);
        let weights = GeneratorWeights::random(1 + i % 2, 0.5, Activation::Relu, i as u64).map_err(|e| e.to_string())?;
        let g = generator_forward(&img, &mask, &weights).map_err(|e| e.to_string())?;
        ensure(unmasked_identical(&img, &g, &mask), || format!("fixture {i}: generator touched unmasked pixels"))?;
        let d = diffusion_inpaint(&img, &mask, opts).map_err(|e| e.to_string())?;
        ensure(unmasked_identical(&img, &d, &mask), || format!("fixture {i}: diffusion touched unmasked pixels"))?;

        // Filled values stay inside the range of the known pixels.
        for c in 0..3 {
            let known: Vec<f64> = (0..w * h)
                .filter(|&p| !mask.bits()[p])
                .map(|p| img.data()[3 * p + c] as f64)
                .collect();
            let lo = known.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = known.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for p in mask.indices() {
                let v = d.data()[3 * p + c] as f64;
                worst_principle = worst_principle.max(lo - v).max(v - hi);
            }
        }
    }
    ensure(worst_principle <= 1e-6, || format!("maximum principle violated by {worst_principle:e}"))?;

    let mut worst_laplace = 0.0_f64;
    for _ in 0..5 {
        let (img, mask) = random_fixture(&mut rng, 32, 32);
        let d = diffusion_inpaint(&img, &mask, opts).map_err(|e| e.to_string())?;
        for c in 0..3 {
            let exact = dense_laplace(&img, &mask, c);
            for p in mask.indices() {
                worst_laplace = worst_laplace.max((d.data()[3 * p + c] as f64 - exact[p]).abs());
            }
        }
    }
    ensure(worst_laplace <= 1e-3, || format!("dense Laplace mismatch {worst_laplace:e}"))?;
    Ok(format!(
        "100 fixtures bit-identical outside mask, max-principle slack {:.1e}, Laplace diff {worst_laplace:.1e}",
        worst_principle.max(0.0)
    ))
}

// ---------------------------------------------------------------- metrics

fn metric_closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let e = |r: streetclear::Result<f64>| r.map_err(|e| e.to_string());
    let img = RgbImage::from_fn(48, 40, |_, _| {
        let v: f32 = rng.random_range(0.0..0.9);
        [v, rng.random_range(0.0..0.9), rng.random_range(0.0..0.9)]
    })
    .unwrap();
    ensure(e(l1_error(&img, &img))? == 0.0, || "l1 of identical images is not 0".into())?;
    ensure(e(psnr(&img, &img))? == PSNR_CAP_DB, || "PSNR of identical images is not the cap".into())?;
    let s = e(ssim(&img, &img))?;
    ensure((s - 1.0).abs() < 1e-12, || format!("SSIM of identical images is {s}"))?;

    let shifted = RgbImage::from_fn(48, 40, |x, y| img.pixel(x, y).map(|v| v + 0.1)).unwrap();
    let p = e(psnr(&img, &shifted))?;
    ensure((p - 20.0).abs() <= 0.01, || format!("offset PSNR {p}"))?;

    let base = RgbImage::filled(48, 40, [0.5; 3]).unwrap();
    let mut last = f64::INFINITY;
    let mut levels = Vec::new();
    let noise: Vec<f32> = (0..48 * 40 * 3).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    for sigma in [0.01_f32, 0.02, 0.05, 0.1, 0.2] {
        let noisy = RgbImage::new(48, 40, noise.iter().map(|n| 0.5 + sigma * n).collect()).unwrap();
        let p = e(psnr(&base, &noisy))?;
        ensure(p < last, || format!("PSNR not decreasing at sigma {sigma}"))?;
        levels.push(format!("{p:.2}"));
        last = p;
    }

    // Region of three pixels out of six.
    let region = InpaintMask::new(3, 2, vec![true, true, false, true, false, false]).unwrap();
    let before = [0.2, 0.4, 0.9, 0.1, 0.5, 0.3];
    let after = [0.5, 0.4, 0.0, 0.3, 0.1, 0.3];
    let vo = e(vo_from_values(&before, &after, &region))?;
    let vd = e(vd_from_values(&before, &after, &region))?;
    // (0.3 + 0 + 0.2) / (0.2 + 0.4 + 0.1)
    ensure((vo - 5.0 / 7.0).abs() <= 1e-12, || format!("v_o hand sum {vo}"))?;
    ensure((vd + 5.0 / 7.0).abs() <= 1e-12, || format!("v_d hand sum {vd}"))?;
    let region_d = InpaintMask::new(3, 2, vec![false, false, true, false, true, false]).unwrap();
    // (0.9 + 0.4) / (0.9 + 0.5)
    let vd2 = e(vd_from_values(&before, &after, &region_d))?;
    ensure((vd2 - 13.0 / 14.0).abs() <= 1e-12, || format!("v_d hand sum {vd2}"))?;

    for k in [0.5, 2.0, 10.0] {
        let b: Vec<f64> = before.iter().map(|v| v * k).collect();
        let a: Vec<f64> = after.iter().map(|v| v * k).collect();
        let (svo, svd) = (e(vo_from_values(&b, &a, &region))?, e(vd_from_values(&b, &a, &region_d))?);
        ensure((svo - vo).abs() <= 1e-12 && (svd - vd2).abs() <= 1e-12, || format!("scale {k} changes v_o/v_d"))?;
    }
    Ok(format!("offset PSNR {p:.4} dB, noise PSNR [{}], v_o 5/7, v_d 13/14", levels.join(", ")))
}

// ---------------------------------------------------------------- study

fn study_arithmetic() -> Outcome {
    let cases = [
        (0.4165, 0.2547, 38.85),
        (0.4569, 0.2834, 37.97),
        (0.5059, 0.3707, 26.72),
        (0.4669, 0.3269, 29.99),
    ];
    let mut shown = Vec::new();
    for (o, i, want) in cases {
        let got = compute_improvement(o, i).map_err(|e| e.to_string())?;
        ensure((got - want).abs() <= 0.01, || format!("({o}, {i}) gave {got}, expected {want}"))?;
        shown.push(format!("{got:.2}"));
    }

    let scratch = tempfile::tempdir().map_err(|e| e.to_string())?;
    let plan = study_plan(scratch.path(), 4);
    let table = [
        ("Group_1", "Data_1", Condition::Original),
        ("Group_1", "Data_2", Condition::Inpainted),
        ("Group_2", "Data_1", Condition::Inpainted),
        ("Group_2", "Data_2", Condition::Original),
    ];
    for (g, d, want) in table {
        let got = plan.assign_condition(g, d).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("({g}, {d}) assigned {got:?}"))?;
    }

    let (service_pct, oracle_pct) = synthetic_study()?;
    for (label, pct) in service_pct.iter().chain(&oracle_pct) {
        ensure((pct - 40.0).abs() <= 1e-9, || format!("{label}: improvement {pct}"))?;
    }
    Ok(format!(
        "improvements [{}], crossover table exact, synthetic 40% via service {:?} and oracle {:?}",
        shown.join(", "),
        service_pct.iter().map(|(_, p)| format!("{p:.12}")).collect::<Vec<_>>(),
        oracle_pct.iter().map(|(_, p)| format!("{p:.12}")).collect::<Vec<_>>(),
    ))
}

type Improvements = Vec<(String, f64)>;

/// Drives the study service with a manual clock. Pair `i` of either dataset
/// takes `speed·BASE[i]` ms in the original condition and 0.6 of that when
/// inpainted.
fn synthetic_study() -> Result<(Improvements, Improvements), String> {
    const BASE: [u64; 4] = [0, 1000, 2500, 5000];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let plan = study_plan(dir.path(), BASE.len());
    let clock = Arc::new(ManualClock::new(1_000_000));
    let svc = StudyService::open(dir.path(), dir.path().join("images"), clock.clone()).map_err(|e| e.to_string())?;
    let id = svc.create_study(plan.clone()).map_err(|e| e.to_string())?;
    let err = |e: streetclear::study::StudyError| e.to_string();

    for v in 0..6_u64 {
        let group = if v % 2 == 0 { "Group_1" } else { "Group_2" };
        let speed = v + 1;
        let info = svc.open_session(&id, &format!("vol-{v}"), group).map_err(err)?;
        while let Some(next) = svc.next_trial(&info.session_id).map_err(err)? {
            let (dataset, index) = next.pair_id.split_once('-').unwrap();
            let base = speed * BASE[index.parse::<usize>().unwrap()];
            let ms = match plan.assign_condition(group, dataset).map_err(err)? {
                Condition::Original => base,
                Condition::Inpainted => base * 3 / 5,
            };
            svc.deliver_image(&info.session_id, &next.started_token).map_err(err)?;
            clock.advance(ms);
            svc.record_trial(
                &info.session_id,
                TrialSubmission {
                    pair_id: next.pair_id.clone(),
                    started_token: next.started_token.clone(),
                    click: Click { x: 8.0, y: 8.0 },
                    client_duration_ms: None,
                },
            )
            .map_err(err)?;
            clock.advance(777);
        }
    }

    let records = svc.records(&id).map_err(err)?;
    let summary = svc.report(&id, SummaryOptions::default()).map_err(err)?;
    let offline = summarize(&plan, &records, SummaryOptions::default()).map_err(err)?;
    ensure(summary.datasets.len() == 2 && offline == summary, || "service and offline summaries differ".into())?;
    let service = summary
        .datasets
        .iter()
        .map(|d| (format!("service {}", d.dataset), d.improvement_percent))
        .collect();
    Ok((service, oracle_improvement(&records)))
}

/// Independent recomputation of the aggregation from raw records.
fn oracle_improvement(records: &[TrialRecord]) -> Improvements {
    let mut by_volunteer: BTreeMap<&str, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        by_volunteer.entry(&r.volunteer_id).or_default().push(r);
    }
    // dataset -> condition -> per-volunteer means
    let mut cells: BTreeMap<String, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for trials in by_volunteer.values() {
        let lo = trials.iter().map(|t| t.duration_ms).min().unwrap() as f64;
        let hi = trials.iter().map(|t| t.duration_ms).max().unwrap() as f64;
        let mut per: BTreeMap<(String, &str), (f64, f64)> = BTreeMap::new();
        for t in trials {
            let e = per.entry((t.dataset.clone(), t.condition.as_str())).or_default();
            e.0 += (t.duration_ms as f64 - lo) / (hi - lo);
            e.1 += 1.0;
        }
        for ((dataset, cond), (sum, n)) in per {
            cells.entry(dataset).or_default().entry(cond).or_default().push(sum / n);
        }
    }
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    cells
        .into_iter()
        .map(|(dataset, c)| {
            let (o, i) = (mean(&c["original"]), mean(&c["inpainted"]));
            (format!("oracle {dataset}"), (o - i) / o * 100.0)
        })
        .collect()
}

// ---------------------------------------------------------------- canyon

fn canyon_buckets() -> Outcome {
    let expected = [
        (0.0, "non_canyon"),
        (0.5, "low"),
        (1.0, "low"),
        (1.5, "mid"),
        (2.0, "mid"),
        (2.5, "high"),
    ];
    for (alpha, want) in expected {
        let got = classify_canyon(alpha).map_err(|e| e.to_string())?.bucket.name();
        ensure(got == want, || format!("alpha {alpha} -> {got}, expected {want}"))?;
    }
    Ok("0→non_canyon, 0.5→low, 1→low, 1.5→mid, 2→mid, 2.5→high".into())
}

// ---------------------------------------------------------------- persistence

fn persistence() -> Outcome {
    const N: usize = 7;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let plan = study_plan(dir.path(), 4);
    let c = client();

    let mut server = Server::start(dir.path());
    let created: Value = c
        .post(server.url("/studies"))
        .json(&plan)
        .send()
        .and_then(|r| r.json())
        .map_err(|e| e.to_string())?;
    let study = created["study_id"].as_str().ok_or("no study id")?.to_string();
    let mut acked = 0;
    let mut last_session = String::new();
    for (v, group, quota) in [("alice", "Group_1", 5), ("bob", "Group_2", N - 5)] {
        let info: Value = c
            .post(server.url(&format!("/studies/{study}/sessions")))
            .json(&json!({"volunteer_id": v, "group": group}))
            .send()
            .and_then(|r| r.json())
            .map_err(|e| e.to_string())?;
        let session = info["session_id"].as_str().ok_or("no session id")?.to_string();
        for _ in 0..quota {
            do_trial(&c, &server, &session, (6.0, 6.0), Duration::ZERO).ok_or("session ran out of trials")?;
            acked += 1;
        }
        last_session = session;
    }
    ensure(acked == N, || format!("only {acked} trials acknowledged"))?;
    // One trial is shown but never answered when the process dies.
    let pending = c.get(server.url(&format!("/sessions/{last_session}/next"))).send();
    ensure(pending.is_ok_and(|r| r.status().is_success()), || "next trial not served".into())?;
    server.kill();

    let server = Server::start(dir.path());
    let records: Vec<Value> = c
        .get(server.url(&format!("/studies/{study}/records")))
        .send()
        .and_then(|r| r.json())
        .map_err(|e| e.to_string())?;
    ensure(records.len() == N, || format!("recovered {} records, expected {N}", records.len()))?;
    Ok(format!("SIGKILL after {N} acknowledged trials, {} recovered", records.len()))
}

// ---------------------------------------------------------------- CLI golden run

fn golden_run(out: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let fx = fixtures();
    let f = |name: &str| fx.join(name).to_string_lossy().into_owned();
    let o = |name: &str| out.join(name).to_string_lossy().into_owned();
    let weights = toy_weights().to_string_lossy().into_owned();
    let out_dir = out.to_string_lossy().into_owned();
    let steps: Vec<Vec<String>> = vec![
        vec![
            "pipeline", "--image", &f("street.png"), "--labels", &f("street_labels.png"),
            "--saliency", &f("street_saliency.png"), "--attention-before", &f("street_attention_before.png"),
            "--attention-after", &f("street_attention_after.png"), "--image-id", "street",
            "--weights", &weights, "--out-dir", &out_dir, "--report", &o("report.jsonl"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        vec![
            "inpaint", "--image", &f("street.png"), "--mask", &f("street_expected_mask.png"),
            "--out", &o("diffusion.png"), "--weights", "fallback",
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        vec![
            "insert-objects", "--base", &o("street_inpainted.png"),
            "--cutout", &format!("{}:{}", f("street.png"), f("street_expected_mask.png")),
            "--seed", "7", "--out", &o("inserted.png"), "--mask-out", &o("inserted_mask.png"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        vec!["metrics", "--ref", &f("street.png"), "--cand", &o("street_inpainted.png"), "--image-id", "street"]
            .into_iter()
            .map(String::from)
            .collect(),
        vec!["report", &o("report.jsonl")].into_iter().map(String::from).collect(),
    ];
    let mut artefacts = Vec::new();
    for (i, args) in steps.iter().enumerate() {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let res = run(&refs);
        ensure(res.status.success(), || {
            format!("{} failed: {}", args[0], String::from_utf8_lossy(&res.stderr))
        })?;
        let stdout = String::from_utf8_lossy(&res.stdout).replace(&out_dir, "<out>");
        artefacts.push((format!("stdout {i} {}", args[0]), stdout.into_bytes()));
    }
    let mut files: Vec<_> = std::fs::read_dir(out).map_err(|e| e.to_string())?.flatten().collect();
    files.sort_by_key(|e| e.file_name());
    for entry in files {
        let bytes = std::fs::read(entry.path()).map_err(|e| e.to_string())?;
        artefacts.push((entry.file_name().to_string_lossy().into_owned(), bytes));
    }
    Ok(artefacts)
}

fn cli_golden() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = golden_run(a.path())?;
    let second = golden_run(b.path())?;
    ensure(first.len() == second.len(), || "runs produced different artefact sets".into())?;
    for ((na, ba), (nb, bb)) in first.iter().zip(&second) {
        ensure(na == nb && ba == bb, || format!("artefact {na} differs between runs"))?;
    }
    let mask = std::fs::read(a.path().join("street_mask.png")).map_err(|e| e.to_string())?;
    let golden = std::fs::read(fixtures().join("street_expected_mask.png")).map_err(|e| e.to_string())?;
    ensure(mask == golden, || "pipeline mask differs from the shipped golden mask".into())?;
    Ok(format!("{} artefacts byte-identical across two runs, mask matches golden", first.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("mask composition matches brute-force oracle", mask_oracle),
        ("composed masks exclude building pixels", region0_exclusion),
        ("FFT/FFC numerics", fft_ffc_numerics),
        ("inpainting contracts", inpainting_contracts),
        ("metric closed forms", metric_closed_forms),
        ("study arithmetic", study_arithmetic),
        ("canyon buckets", canyon_buckets),
        ("persistence across SIGKILL", persistence),
        ("CLI golden run reproducible", cli_golden),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{:.2?}]", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", 9 - failed, 9);
    if failed > 0 {
        std::process::exit(1);
    }
}
