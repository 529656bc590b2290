//! Proposal files: one JSON object per line.
//!
//! Embeddings are either inline (`{"b64": ...}`, base64 of little-endian
//! `f32`) or stored in a blob next to the file (`{"blob": "rel/path.f32"}`).
//! A patch with `"tokens": L` holds `L x dim` raw tokens; without it, a
//! pooled descriptor.

use std::collections::HashSet;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use ztm_core::{validate_proposal, BBox, EmbeddingVector, PatchRepr, PatchTokenMatrix, Proposal};

use super::{blob, parent_dir, read_text, resolve_ref, MaskRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blob: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalRecord {
    pub image_id: String,
    pub proposal_id: String,
    pub bbox: [f64; 4],
    pub objectness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskRecord>,
    pub cls: VectorRef,
    pub patch: VectorRef,
}

struct LineCtx<'a> {
    path: &'a Path,
    dir: &'a Path,
    line: usize,
}

impl LineCtx<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.path, Some(self.line), msg)
    }

    fn values(&self, r: &VectorRef, field: &str) -> Result<Vec<f32>> {
        match (&r.b64, &r.blob) {
            (Some(text), None) => {
                let bytes = STANDARD.decode(text).map_err(|e| self.err(format!("{field}: bad base64: {e}")))?;
                blob::decode(&bytes, self.path, field, None).map_err(|e| match e {
                    Error::NonFinite { path, index, .. } => Error::NonFinite { path, line: Some(self.line), index },
                    _ => self.err(format!("{field}: {} bytes is not a whole number of f32", bytes.len())),
                })
            }
            (None, Some(reference)) => {
                let path = resolve_ref(self.dir, reference, self.path, Some(self.line))?;
                let bytes = std::fs::read(&path).map_err(|e| match e.kind() {
                    std::io::ErrorKind::NotFound => Error::MissingBlob { path: path.clone(), blob: reference.clone() },
                    _ => Error::io(&path, e),
                })?;
                blob::decode(&bytes, &path, reference, None)
            }
            _ => Err(self.err(format!("{field}: exactly one of `b64` and `blob` is required"))),
        }
    }

    fn proposal(&self, r: ProposalRecord) -> Result<Proposal> {
        if r.cls.tokens.is_some() {
            return Err(self.err("cls: `tokens` only applies to patch"));
        }
        let cls = self.values(&r.cls, "cls")?;
        let data = self.values(&r.patch, "patch")?;
        let patch = match r.patch.tokens {
            None => PatchRepr::Pooled(EmbeddingVector(data)),
            Some(l) if l > 0 && data.len() % l == 0 => {
                PatchRepr::Tokens(PatchTokenMatrix::new(l, data.len() / l, data))
            }
            Some(l) => return Err(self.err(format!("patch: {} values do not split into {l} tokens", data.len()))),
        };
        let mask = r.mask.map(|m| m.to_rle().map_err(|e| self.err(format!("mask: {e}")))).transpose()?;
        Ok(Proposal {
            proposal_id: r.proposal_id,
            image_id: r.image_id,
            bbox: BBox::from(r.bbox),
            mask,
            objectness: r.objectness,
            cls: EmbeddingVector(cls),
            patch,
        })
    }
}

/// Loads a proposal file. With `dim` set, every embedding must have that
/// dimension; otherwise the first proposal fixes it.
pub fn load_proposals(path: &Path, dim: Option<usize>) -> Result<Vec<Proposal>> {
    let text = read_text(path)?;
    let dir = parent_dir(path);
    let mut dim = dim;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let ctx = LineCtx { path, dir: &dir, line: i + 1 };
        let record: ProposalRecord = serde_json::from_str(raw).map_err(|e| ctx.err(e.to_string()))?;
        let p = ctx.proposal(record)?;
        let d = *dim.get_or_insert(p.cls.dim());
        validate_proposal(&p, d).map_err(|e| ctx.err(e.to_string()))?;
        if !seen.insert(p.proposal_id.clone()) {
            return Err(ctx.err(format!("duplicate proposal_id `{}`", p.proposal_id)));
        }
        out.push(p);
    }
    Ok(out)
}

fn inline(values: &[f32], tokens: Option<usize>) -> VectorRef {
    VectorRef { b64: Some(STANDARD.encode(blob::encode(values))), blob: None, tokens }
}

pub fn to_record(p: &Proposal) -> ProposalRecord {
    let patch = match &p.patch {
        PatchRepr::Pooled(v) => inline(v.as_slice(), None),
        PatchRepr::Tokens(t) => inline(&t.data, Some(t.rows)),
    };
    ProposalRecord {
        image_id: p.image_id.clone(),
        proposal_id: p.proposal_id.clone(),
        bbox: p.bbox.to_array(),
        objectness: p.objectness,
        mask: p.mask.as_ref().map(MaskRecord::from_rle),
        cls: inline(p.cls.as_slice(), None),
        patch,
    }
}

/// Writes proposals with inline embeddings, one line each, in input order.
pub fn save_proposals(proposals: &[Proposal], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    for p in proposals {
        serde_json::to_writer(&mut buf, &to_record(p)).map_err(|e| Error::Internal(e.to_string()))?;
        buf.push(b'\n');
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}
