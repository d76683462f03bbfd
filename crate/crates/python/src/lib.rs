//! Python bindings for the `streetclear` core crate.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use streetclear::canyon;
use streetclear::ffc::{Activation, DiffusionOptions, GeneratorWeights};
use streetclear::mask::{self, SemanticLevelSpec};
use streetclear::metrics;
use streetclear::pipeline::{Inpainter, DEFAULT_GAMMA};
use streetclear::study::{self, StudyPlan, SummaryOptions, TrialRecord};
use streetclear::{InpaintMask, LabelMap, Raster, RgbImage, ScalarMap};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

macro_rules! raster_common {
    ($py_ty:ident, $inner:ty, { $($extra:tt)* }) => {
        #[pymethods]
        impl $py_ty {
            $($extra)*

            #[staticmethod]
            fn load(path: std::path::PathBuf) -> PyResult<Self> {
                Ok($py_ty(<$inner>::load(path).map_err(err)?))
            }

            #[staticmethod]
            fn from_png(bytes: &[u8]) -> PyResult<Self> {
                Ok($py_ty(<$inner>::from_png(bytes).map_err(err)?))
            }

            #[getter]
            fn width(&self) -> usize {
                self.0.width()
            }

            #[getter]
            fn height(&self) -> usize {
                self.0.height()
            }

            fn to_png<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
                PyBytes::new(py, &self.0.to_png())
            }

            fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
                std::fs::write(path, self.0.to_png()).map_err(err)
            }

            fn __repr__(&self) -> String {
                format!("{}({}x{})", stringify!($inner), self.0.width(), self.0.height())
            }

            fn __eq__(&self, other: PyRef<'_, Self>) -> bool {
                self.0 == other.0
            }
        }
    };
}

/// Colour image, interleaved RGB floats in [0, 1].
#[pyclass(name = "RgbImage", module = "pystreetclear")]
struct PyRgbImage(RgbImage);

raster_common!(PyRgbImage, RgbImage, {
    #[new]
    fn new(width: usize, height: usize, data: Vec<f32>) -> PyResult<Self> {
        Ok(PyRgbImage(RgbImage::new(width, height, data).map_err(err)?))
    }

    fn data(&self) -> Vec<f32> {
        self.0.data().to_vec()
    }

    fn pixel(&self, x: usize, y: usize) -> PyResult<(f32, f32, f32)> {
        if x >= self.0.width() || y >= self.0.height() {
            return Err(PyValueError::new_err("pixel out of range"));
        }
        let [r, g, b] = self.0.pixel(x, y);
        Ok((r, g, b))
    }
});

/// Per-pixel semantic class ids.
#[pyclass(name = "LabelMap", module = "pystreetclear")]
struct PyLabelMap(LabelMap);

raster_common!(PyLabelMap, LabelMap, {
    #[new]
    fn new(width: usize, height: usize, classes: Vec<u8>) -> PyResult<Self> {
        Ok(PyLabelMap(LabelMap::new(width, height, classes).map_err(err)?))
    }

    fn classes(&self) -> Vec<u8> {
        self.0.classes().to_vec()
    }
});

/// Scalar map in [0, 1] (saliency or attention).
#[pyclass(name = "ScalarMap", module = "pystreetclear")]
struct PyScalarMap(ScalarMap);

raster_common!(PyScalarMap, ScalarMap, {
    #[new]
    fn new(width: usize, height: usize, values: Vec<f64>) -> PyResult<Self> {
        Ok(PyScalarMap(ScalarMap::new(width, height, values).map_err(err)?))
    }

    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }
});

/// Binary inpainting mask.
#[pyclass(name = "InpaintMask", module = "pystreetclear")]
struct PyInpaintMask(InpaintMask);

raster_common!(PyInpaintMask, InpaintMask, {
    #[new]
    fn new(width: usize, height: usize, bits: Vec<bool>) -> PyResult<Self> {
        Ok(PyInpaintMask(InpaintMask::new(width, height, bits).map_err(err)?))
    }

    fn bits(&self) -> Vec<bool> {
        self.0.bits().to_vec()
    }

    fn count(&self) -> usize {
        self.0.count()
    }

    fn get(&self, x: usize, y: usize) -> bool {
        x < self.0.width() && y < self.0.height() && self.0.get(x, y)
    }
});

/// Class-id grouping into the four semantic levels.
#[pyclass(name = "LevelSpec", module = "pystreetclear")]
struct PyLevelSpec(SemanticLevelSpec);

#[pymethods]
impl PyLevelSpec {
    /// The bundled Cityscapes grouping.
    #[new]
    fn new() -> Self {
        PyLevelSpec(SemanticLevelSpec::default())
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyLevelSpec(SemanticLevelSpec::from_json(text).map_err(err)?))
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn level_of(&self, class_id: u8) -> Option<usize> {
        self.0.level_of(class_id)
    }
}

/// Fourier-convolution generator weights.
#[pyclass(name = "GeneratorWeights", module = "pystreetclear")]
struct PyWeights(GeneratorWeights);

#[pymethods]
impl PyWeights {
    #[staticmethod]
    #[pyo3(signature = (base_width, global_ratio=0.5, seed=0))]
    fn random(base_width: usize, global_ratio: f64, seed: u64) -> PyResult<Self> {
        Ok(PyWeights(
            GeneratorWeights::random(base_width, global_ratio, Activation::Relu, seed).map_err(err)?,
        ))
    }

    /// Loads a manifest and the `.bin` blob next to it.
    #[staticmethod]
    fn load(manifest: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyWeights(GeneratorWeights::load(manifest).map_err(err)?))
    }

    fn save(&self, manifest: std::path::PathBuf) -> PyResult<()> {
        self.0.save(manifest).map_err(err)
    }

    #[getter]
    fn base_width(&self) -> usize {
        self.0.base_width()
    }

    #[getter]
    fn global_ratio(&self) -> f64 {
        self.0.global_ratio()
    }
}

fn spec_or_default(spec: Option<PyRef<'_, PyLevelSpec>>) -> SemanticLevelSpec {
    spec.map(|s| s.0.clone()).unwrap_or_default()
}

#[pyfunction]
#[pyo3(signature = (saliency, gamma=DEFAULT_GAMMA))]
fn binarize_saliency(saliency: PyRef<'_, PyScalarMap>, gamma: f64) -> PyResult<PyInpaintMask> {
    Ok(PyInpaintMask(mask::binarize_saliency(&saliency.0, gamma).map_err(err)?))
}

/// Salient distracting objects of a scene, optionally dilated.
#[pyfunction]
#[pyo3(signature = (labels, saliency, gamma=DEFAULT_GAMMA, dilation=0, spec=None))]
fn compose_mask(
    labels: PyRef<'_, PyLabelMap>,
    saliency: PyRef<'_, PyScalarMap>,
    gamma: f64,
    dilation: usize,
    spec: Option<PyRef<'_, PyLevelSpec>>,
) -> PyResult<PyInpaintMask> {
    let spec = spec_or_default(spec);
    let salient = mask::binarize_saliency(&saliency.0, gamma).map_err(err)?;
    let partition = mask::classify_levels(&labels.0, &spec).map_err(err)?;
    let composed = mask::compose_inpaint_mask(&salient, &partition).map_err(err)?;
    Ok(PyInpaintMask(mask::dilate_mask(&composed, dilation)))
}

/// Objects-of-interest (building level) mask of a label map.
#[pyfunction]
#[pyo3(signature = (labels, spec=None))]
fn objects_of_interest(labels: PyRef<'_, PyLabelMap>, spec: Option<PyRef<'_, PyLevelSpec>>) -> PyResult<PyInpaintMask> {
    let spec = spec_or_default(spec);
    let partition = mask::classify_levels(&labels.0, &spec).map_err(err)?;
    Ok(PyInpaintMask(partition.objects_of_interest().clone()))
}

/// Fills the mask with the generator, or with harmonic diffusion when no
/// weights are given.
#[pyfunction]
#[pyo3(signature = (image, mask, weights=None))]
fn inpaint(
    py: Python<'_>,
    image: PyRef<'_, PyRgbImage>,
    mask: PyRef<'_, PyInpaintMask>,
    weights: Option<PyRef<'_, PyWeights>>,
) -> PyResult<PyRgbImage> {
    let engine = match weights {
        Some(w) => Inpainter::Generator(Box::new(w.0.clone())),
        None => Inpainter::Diffusion(DiffusionOptions::default()),
    };
    let (img, m) = (image.0.clone(), mask.0.clone());
    let out = py.detach(move || engine.inpaint(&img, &m)).map_err(err)?;
    Ok(PyRgbImage(out))
}

/// `{"l1", "psnr_db", "ssim"}` of a candidate against a reference.
#[pyfunction]
fn quality<'py>(
    py: Python<'py>,
    reference: PyRef<'_, PyRgbImage>,
    candidate: PyRef<'_, PyRgbImage>,
) -> PyResult<Bound<'py, PyDict>> {
    let q = metrics::compute_quality(&reference.0, &candidate.0).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("l1", q.l1)?;
    d.set_item("psnr_db", q.psnr)?;
    d.set_item("ssim", q.ssim)?;
    Ok(d)
}

/// `(v_o, v_d)` between attention maps of the original and inpainted image.
#[pyfunction]
fn attention_delta(
    before: PyRef<'_, PyScalarMap>,
    after: PyRef<'_, PyScalarMap>,
    objects: PyRef<'_, PyInpaintMask>,
    distracting: PyRef<'_, PyInpaintMask>,
) -> PyResult<(f64, f64)> {
    let d = metrics::compute_attention_delta(&before.0, &after.0, &objects.0, &distracting.0).map_err(err)?;
    Ok((d.v_o, d.v_d))
}

/// `(name, range)` of the street aspect ratio bucket.
#[pyfunction]
fn classify_canyon(alpha: f64) -> PyResult<(&'static str, &'static str)> {
    let c = canyon::classify_canyon(alpha).map_err(err)?;
    Ok((c.bucket.name(), c.bucket.range_label()))
}

#[pyfunction]
#[pyo3(signature = (labels, spec=None))]
fn estimate_aspect_ratio(labels: PyRef<'_, PyLabelMap>, spec: Option<PyRef<'_, PyLevelSpec>>) -> f64 {
    let spec = spec_or_default(spec);
    canyon::estimate_aspect_ratio(&labels.0, &spec, &spec.road_ids)
}

#[pyfunction]
fn normalize_times(durations: Vec<f64>) -> PyResult<Vec<f64>> {
    study::normalize_times(&durations).map_err(err)
}

#[pyfunction]
fn compute_improvement(mean_original: f64, mean_inpainted: f64) -> PyResult<f64> {
    study::compute_improvement(mean_original, mean_inpainted).map_err(err)
}

/// Validates a study plan given as JSON; returns it normalised.
#[pyfunction]
fn validate_plan(plan_json: &str) -> PyResult<String> {
    let plan: StudyPlan = serde_json::from_str(plan_json).map_err(err)?;
    plan.validate().map_err(err)?;
    serde_json::to_string(&plan).map_err(err)
}

/// Summary of a study (plan JSON, trial records JSON list) as JSON.
#[pyfunction]
#[pyo3(signature = (plan_json, records_json, only_hits=false))]
fn summarize_study(plan_json: &str, records_json: &str, only_hits: bool) -> PyResult<String> {
    let plan: StudyPlan = serde_json::from_str(plan_json).map_err(err)?;
    let records: Vec<TrialRecord> = serde_json::from_str(records_json).map_err(err)?;
    let summary = study::summarize(&plan, &records, SummaryOptions { only_hits }).map_err(err)?;
    serde_json::to_string(&summary).map_err(err)
}

#[pymodule]
fn pystreetclear(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRgbImage>()?;
    m.add_class::<PyLabelMap>()?;
    m.add_class::<PyScalarMap>()?;
    m.add_class::<PyInpaintMask>()?;
    m.add_class::<PyLevelSpec>()?;
    m.add_class::<PyWeights>()?;
    m.add_function(wrap_pyfunction!(binarize_saliency, m)?)?;
    m.add_function(wrap_pyfunction!(compose_mask, m)?)?;
    m.add_function(wrap_pyfunction!(objects_of_interest, m)?)?;
    m.add_function(wrap_pyfunction!(inpaint, m)?)?;
    m.add_function(wrap_pyfunction!(quality, m)?)?;
    m.add_function(wrap_pyfunction!(attention_delta, m)?)?;
    m.add_function(wrap_pyfunction!(classify_canyon, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_aspect_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_times, m)?)?;
    m.add_function(wrap_pyfunction!(compute_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(validate_plan, m)?)?;
    m.add_function(wrap_pyfunction!(summarize_study, m)?)?;
    m.add("DEFAULT_GAMMA", DEFAULT_GAMMA)?;
    Ok(())
}
