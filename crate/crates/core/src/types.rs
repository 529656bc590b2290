//! Domain records shared by every stage of the pipeline.
//!
//! These are plain data: constructors do not validate. Banks and proposals
//! coming from storage are checked with [`crate::validate`] before scoring.

use alloc::string::String;
use alloc::vec::Vec;

use crate::rle::Rle;

/// A dense feature vector (class embedding or pooled patch descriptor).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingVector(pub Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Self {
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }
}

impl From<Vec<f32>> for EmbeddingVector {
    fn from(v: Vec<f32>) -> Self {
        Self(v)
    }
}

/// Row-major `rows x dim` matrix of patch token embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchTokenMatrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl PatchTokenMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Self {
        Self { rows, dim, data }
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self { rows: rows.len(), dim, data }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.rows)
    }

    /// True when `data.len() == rows * dim`.
    pub fn is_well_formed(&self) -> bool {
        self.rows.checked_mul(self.dim) == Some(self.data.len())
    }
}

/// Patch-side representation of a view or proposal.
#[derive(Debug, Clone, PartialEq)]
pub enum PatchRepr {
    /// GeM-compressed descriptor.
    Pooled(EmbeddingVector),
    /// Raw tokens, pooled at match time.
    Tokens(PatchTokenMatrix),
}

impl PatchRepr {
    pub fn is_pooled(&self) -> bool {
        matches!(self, PatchRepr::Pooled(_))
    }

    pub fn dim(&self) -> usize {
        match self {
            PatchRepr::Pooled(v) => v.dim(),
            PatchRepr::Tokens(t) => t.dim,
        }
    }

    /// Bytes this representation occupies as little-endian f32.
    pub fn byte_len(&self) -> usize {
        4 * match self {
            PatchRepr::Pooled(v) => v.dim(),
            PatchRepr::Tokens(t) => t.data.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateView {
    pub cls: EmbeddingVector,
    pub patch: PatchRepr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassTemplates {
    pub class_id: String,
    pub views: Vec<TemplateView>,
}

/// Per-class multi-view template embeddings.
///
/// `pooled_exponent` is `Some(e)` iff every view carries a pooled descriptor
/// that was compressed with exponent `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateBank {
    pub dim: usize,
    pub metric_hint: Option<crate::Metric>,
    pub pooled_exponent: Option<f64>,
    pub classes: Vec<ClassTemplates>,
}

impl TemplateBank {
    pub fn is_pooled(&self) -> bool {
        self.pooled_exponent.is_some()
    }

    pub fn class_ids(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.class_id.clone()).collect()
    }

    pub fn view_count(&self) -> usize {
        self.classes.iter().map(|c| c.views.len()).sum()
    }
}

/// Axis-aligned box `(x, y, w, h)` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
            && self.w > 0.0
            && self.h > 0.0
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

impl From<[f64; 4]> for BBox {
    fn from(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// A candidate object region in a query image.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub proposal_id: String,
    pub image_id: String,
    pub bbox: BBox,
    pub mask: Option<Rle>,
    /// Proposal generator confidence in `[0, 1]`.
    pub objectness: f64,
    pub cls: EmbeddingVector,
    pub patch: PatchRepr,
}

/// One scored `(proposal, class)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: String,
    pub proposal_id: String,
    pub class_id: String,
    pub score: f64,
    pub bbox: BBox,
    pub mask: Option<Rle>,
}
