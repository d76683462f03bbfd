//! Attention redirection and inpainting quality measures.

mod attention;
mod insertion;
mod quality;

pub use attention::{compute_attention_delta, compute_vd, compute_vo, vd_from_values, vo_from_values, AttentionDelta};
pub use insertion::{insert_objects, Cutout};
pub use quality::{compute_quality, l1_error, mse, psnr, ssim, QualityReport, PSNR_CAP_DB};

use serde::{Deserialize, Serialize};

/// One line of a metric report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricRecord {
    pub image_id: String,
    pub l1: Option<f64>,
    pub psnr_db: Option<f64>,
    pub ssim: Option<f64>,
    pub v_o: Option<f64>,
    pub v_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MetricRecord {
    pub fn with_quality(mut self, q: &QualityReport) -> Self {
        self.l1 = Some(q.l1);
        self.psnr_db = Some(q.psnr);
        self.ssim = Some(q.ssim);
        self
    }
}

/// Arithmetic means of the per-image values; images lacking a field are
/// left out of that field's mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub aggregation: String,
    pub images: usize,
    pub mean_l1: Option<f64>,
    pub mean_psnr_db: Option<f64>,
    pub mean_ssim: Option<f64>,
    pub mean_v_o: Option<f64>,
    pub mean_v_d: Option<f64>,
}

pub fn summarize_records(records: &[MetricRecord]) -> MetricSummary {
    fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
        let (sum, n) = values
            .flatten()
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
    MetricSummary {
        aggregation: "arithmetic mean of per-image values".into(),
        images: records.len(),
        mean_l1: mean(records.iter().map(|r| r.l1)),
        mean_psnr_db: mean(records.iter().map(|r| r.psnr_db)),
        mean_ssim: mean(records.iter().map(|r| r.ssim)),
        mean_v_o: mean(records.iter().map(|r| r.v_o)),
        mean_v_d: mean(records.iter().map(|r| r.v_d)),
    }
}
