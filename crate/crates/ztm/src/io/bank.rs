//! Bank archive ("MEB v1"): a directory with `manifest.json` and one raw
//! little-endian `f32` blob per embedding.
//!
//! ```text
//! bank/
//!   manifest.json
//!   blobs/c0_v0_cls.f32      dim floats
//!   blobs/c0_v0_patch.f32    tokens x dim floats, row-major (dim when pooled)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use ztm_core::similarity::gem_pool;
use ztm_core::{
    validate_bank, ClassTemplates, EmbeddingVector, Metric, PatchRepr, PatchTokenMatrix, TemplateBank, TemplateView,
};

use super::{blob, create_dir, read_text, resolve_ref, write_json};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u64 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u64,
    pub dim: usize,
    pub metric_hint: Option<Metric>,
    pub pooled: bool,
    pub pooled_exponent: Option<f64>,
    pub classes: Vec<ManifestClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestClass {
    pub class_id: String,
    pub views: Vec<ManifestView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestView {
    pub cls: String,
    pub patch: String,
    /// Token count of a raw view; absent in pooled banks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch_tokens: Option<usize>,
}

fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = read_text(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, Some(e.line()), e.to_string()))?;
    match value.get("format_version").map(serde_json::Value::as_u64) {
        Some(Some(FORMAT_VERSION)) => {}
        Some(Some(found)) => return Err(Error::UnknownVersion { path: path.to_path_buf(), found }),
        _ => return Err(Error::parse(path, None, "missing or non-integer format_version")),
    }
    serde_json::from_value(value).map_err(|e| Error::parse(path, None, e.to_string()))
}

/// Loads and fully validates a bank archive.
pub fn load_bank(dir: &Path) -> Result<TemplateBank> {
    let manifest_path = dir.join(MANIFEST);
    let m = read_manifest(&manifest_path)?;
    let bad = |msg: String| Error::parse(&manifest_path, None, msg);
    match (m.pooled, m.pooled_exponent) {
        (true, Some(e)) if e.is_finite() && e > 0.0 => {}
        (true, _) => return Err(bad("pooled bank needs a positive pooled_exponent".into())),
        (false, None) => {}
        (false, Some(_)) => return Err(bad("pooled_exponent given for a raw bank".into())),
    }

    let mut classes = Vec::with_capacity(m.classes.len());
    for c in &m.classes {
        let mut views = Vec::with_capacity(c.views.len());
        for (vi, v) in c.views.iter().enumerate() {
            let cls_path = resolve_ref(dir, &v.cls, &manifest_path, None)?;
            let cls = blob::read(&cls_path, &v.cls, m.dim)?;
            let patch_path = resolve_ref(dir, &v.patch, &manifest_path, None)?;
            let patch = match (m.pooled, v.patch_tokens) {
                (true, None) => PatchRepr::Pooled(EmbeddingVector(blob::read(&patch_path, &v.patch, m.dim)?)),
                (false, Some(l)) if l > 0 => {
                    let data = blob::read(&patch_path, &v.patch, l * m.dim)?;
                    PatchRepr::Tokens(PatchTokenMatrix::new(l, m.dim, data))
                }
                (true, Some(_)) => {
                    return Err(bad(format!("class `{}` view {vi}: patch_tokens in a pooled bank", c.class_id)))
                }
                (false, _) => {
                    return Err(bad(format!("class `{}` view {vi}: raw view needs patch_tokens >= 1", c.class_id)))
                }
            };
            views.push(TemplateView { cls: EmbeddingVector(cls), patch });
        }
        classes.push(ClassTemplates { class_id: c.class_id.clone(), views });
    }
    let bank = TemplateBank { dim: m.dim, metric_hint: m.metric_hint, pooled_exponent: m.pooled_exponent, classes };
    if let Some(v) = validate_bank(&bank).first() {
        return Err(bad(v.to_string()));
    }
    Ok(bank)
}

/// Writes `bank` under `dir` with canonical blob names.
pub fn save_bank(bank: &TemplateBank, dir: &Path) -> Result<()> {
    if let Some(v) = validate_bank(bank).first() {
        return Err(ztm_core::Error::InvalidBank(v.to_string()).into());
    }
    create_dir(&dir.join("blobs"))?;
    let mut classes = Vec::with_capacity(bank.classes.len());
    for (ci, c) in bank.classes.iter().enumerate() {
        let mut views = Vec::with_capacity(c.views.len());
        for (vi, v) in c.views.iter().enumerate() {
            let cls = format!("blobs/c{ci}_v{vi}_cls.f32");
            let patch = format!("blobs/c{ci}_v{vi}_patch.f32");
            blob::write(&dir.join(&cls), v.cls.as_slice())?;
            let patch_tokens = match &v.patch {
                PatchRepr::Pooled(d) => {
                    blob::write(&dir.join(&patch), d.as_slice())?;
                    None
                }
                PatchRepr::Tokens(t) => {
                    blob::write(&dir.join(&patch), &t.data)?;
                    Some(t.rows)
                }
            };
            views.push(ManifestView { cls, patch, patch_tokens });
        }
        classes.push(ManifestClass { class_id: c.class_id.clone(), views });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        dim: bank.dim,
        metric_hint: bank.metric_hint,
        pooled: bank.is_pooled(),
        pooled_exponent: bank.pooled_exponent,
        classes,
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

/// Patch storage before and after pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolReport {
    pub views: usize,
    pub raw_bytes: usize,
    pub pooled_bytes: usize,
    /// Raw bytes of one view when every view has the same token count.
    pub raw_bytes_per_view: Option<usize>,
    pub pooled_bytes_per_view: usize,
}

impl std::fmt::Display for PoolReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "views                  {}", self.views)?;
        match self.raw_bytes_per_view {
            Some(b) => writeln!(f, "patch bytes per view   {b} -> {}", self.pooled_bytes_per_view)?,
            None => writeln!(f, "patch bytes per view   mixed -> {}", self.pooled_bytes_per_view)?,
        }
        writeln!(f, "patch bytes total      {} -> {}", self.raw_bytes, self.pooled_bytes)?;
        let ratio = if self.pooled_bytes == 0 { 0.0 } else { self.raw_bytes as f64 / self.pooled_bytes as f64 };
        write!(f, "reduction              {ratio:.1}x")
    }
}

/// Replaces every view's patch tokens by its GeM descriptor.
pub fn pool_bank(bank: &TemplateBank, e: f64) -> Result<(TemplateBank, PoolReport)> {
    if let Some(stored) = bank.pooled_exponent {
        return Err(Error::AlreadyPooled(stored));
    }
    if !(e.is_finite() && e > 0.0) {
        return Err(ztm_core::Error::Config(format!("GeM exponent must be > 0, got {e}")).into());
    }
    if let Some(v) = validate_bank(bank).first() {
        return Err(ztm_core::Error::InvalidBank(v.to_string()).into());
    }
    let mut raw_sizes = Vec::new();
    let mut pooled = bank.clone();
    pooled.pooled_exponent = Some(e);
    for class in &mut pooled.classes {
        for view in &mut class.views {
            if let PatchRepr::Tokens(t) = &view.patch {
                raw_sizes.push(view.patch.byte_len());
                view.patch = PatchRepr::Pooled(gem_pool(t, e)?);
            }
        }
    }
    let per_view = bank.dim * 4;
    let report = PoolReport {
        views: raw_sizes.len(),
        raw_bytes: raw_sizes.iter().sum(),
        pooled_bytes: per_view * raw_sizes.len(),
        raw_bytes_per_view: raw_sizes.first().copied().filter(|&b| raw_sizes.iter().all(|&x| x == b)),
        pooled_bytes_per_view: per_view,
    };
    Ok((pooled, report))
}

/// Pools the archive at `input` into a new archive at `output`.
pub fn pool_bank_files(input: &Path, e: f64, output: &Path) -> Result<PoolReport> {
    let bank = load_bank(input)?;
    let (pooled, report) = pool_bank(&bank, e)?;
    save_bank(&pooled, output)?;
    Ok(report)
}
