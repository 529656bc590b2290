//! Prediction files.
//!
//! Written as `{"header": {...}, "predictions": [...]}` where the header
//! echoes the effective configuration. A bare array of records is accepted
//! on load.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};
use ztm_core::{BBox, Detection, ScoringConfig};

use super::{read_text, write_json, MaskRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub image_id: String,
    /// Optional on load; files without it get positional ids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal_id: Option<String>,
    pub class_id: String,
    pub bbox: [f64; 4],
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub tool: String,
    pub config: ScoringConfig,
    pub aggregation: String,
}

impl Header {
    pub fn new(config: ScoringConfig, aggregation: String) -> Self {
        Self { tool: format!("ztm {}", env!("CARGO_PKG_VERSION")), config, aggregation }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<Header>,
    pub predictions: Vec<PredictionRecord>,
}

/// Canonical order: image, score descending, proposal, class.
pub fn canonical_order(a: &Detection, b: &Detection) -> Ordering {
    a.image_id
        .cmp(&b.image_id)
        .then_with(|| b.score.total_cmp(&a.score))
        .then_with(|| a.proposal_id.cmp(&b.proposal_id))
        .then_with(|| a.class_id.cmp(&b.class_id))
}

pub fn save_predictions(detections: &[Detection], header: Option<Header>, path: &Path) -> Result<()> {
    if let Some(index) = detections.iter().position(|d| !d.score.is_finite()) {
        return Err(Error::NonFinite { path: path.to_path_buf(), line: None, index });
    }
    let mut sorted: Vec<&Detection> = detections.iter().collect();
    sorted.sort_by(|a, b| canonical_order(a, b));
    let predictions = sorted
        .into_iter()
        .map(|d| PredictionRecord {
            image_id: d.image_id.clone(),
            proposal_id: Some(d.proposal_id.clone()),
            class_id: d.class_id.clone(),
            bbox: d.bbox.to_array(),
            score: d.score,
            mask: d.mask.as_ref().map(MaskRecord::from_rle),
        })
        .collect();
    write_json(path, &PredictionFile { header, predictions })
}

pub fn load_prediction_file(path: &Path) -> Result<PredictionFile> {
    let text = read_text(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, Some(e.line()), e.to_string()))?;
    let file = if value.is_array() {
        PredictionFile {
            header: None,
            predictions: serde_json::from_value(value).map_err(|e| Error::parse(path, None, e.to_string()))?,
        }
    } else {
        serde_json::from_value(value).map_err(|e| Error::parse(path, None, e.to_string()))?
    };
    Ok(file)
}

pub fn load_predictions(path: &Path) -> Result<Vec<Detection>> {
    let file = load_prediction_file(path)?;
    file.predictions
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            if !r.score.is_finite() {
                return Err(Error::NonFinite { path: path.to_path_buf(), line: None, index: i });
            }
            let bbox = BBox::from(r.bbox);
            if !bbox.is_valid() {
                return Err(Error::parse(path, None, format!("prediction {i}: invalid bbox {:?}", r.bbox)));
            }
            let mask = r
                .mask
                .map(|m| m.to_rle().map_err(|e| Error::parse(path, None, format!("prediction {i}: {e}"))))
                .transpose()?;
            Ok(Detection {
                image_id: r.image_id,
                proposal_id: r.proposal_id.unwrap_or_else(|| format!("#{i:08}")),
                class_id: r.class_id,
                score: r.score,
                bbox,
                mask,
            })
        })
        .collect()
}
