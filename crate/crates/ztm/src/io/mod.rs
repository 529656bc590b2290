//! File formats: bank archives, proposal lines, predictions, ground truth,
//! evaluation reports, stage dumps and synthetic world exports.

pub mod bank;
pub mod blob;
pub mod ground_truth;
pub mod predictions;
pub mod proposals;
pub mod report;
pub mod stages;
pub mod world;

use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use ztm_core::Rle;

use crate::error::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Resolves a file reference relative to `base`, refusing absolute paths
/// and parent-directory components.
pub(crate) fn resolve_ref(base: &Path, reference: &str, context: &Path, line: Option<usize>) -> Result<PathBuf> {
    let rel = Path::new(reference);
    if reference.is_empty() || !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return Err(Error::parse(context, line, format!("blob reference `{reference}` must be a plain relative path")));
    }
    Ok(base.join(rel))
}

pub(crate) fn parent_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// COCO-style mask record: `{"size": [h, w], "counts": "<compact RLE>"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskRecord {
    pub size: [u32; 2],
    pub counts: String,
}

impl MaskRecord {
    pub fn from_rle(rle: &Rle) -> Self {
        Self { size: [rle.h, rle.w], counts: rle.to_coco_string() }
    }

    pub fn to_rle(&self) -> ztm_core::Result<Rle> {
        Rle::from_coco_string(self.size[0], self.size[1], &self.counts)
    }
}
