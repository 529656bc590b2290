//! Patch pooling and pairwise similarity kernels.
//!
//! Inputs are stored as `f32`; every reduction accumulates in `f64`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::config::{Metric, ScoringConfig};
use crate::error::{Error, Result};
use crate::types::{PatchRepr, PatchTokenMatrix, Proposal, TemplateBank, TemplateView};
use crate::validate::validate_bank;

/// How raw patch tokens are reduced to one descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoolingKind {
    /// Generalized mean with exponent `e > 0`.
    Gem(f64),
    Mean,
    Max,
}

/// Pooling family selected in [`ScoringConfig`]; GeM takes its exponent from
/// `ScoringConfig::e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Pooling {
    #[default]
    Gem,
    Mean,
    Max,
}

impl Pooling {
    pub fn with_exponent(self, e: f64) -> PoolingKind {
        match self {
            Pooling::Gem => PoolingKind::Gem(e),
            Pooling::Mean => PoolingKind::Mean,
            Pooling::Max => PoolingKind::Max,
        }
    }
}

impl core::str::FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gem" => Ok(Pooling::Gem),
            "mean" => Ok(Pooling::Mean),
            "max" => Ok(Pooling::Max),
            other => Err(Error::Config(format!("unknown pooling `{other}`"))),
        }
    }
}

/// `sign(x) * |x|^p`.
#[inline]
fn signed_pow(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x > 0.0 {
        libm::pow(x, p)
    } else {
        -libm::pow(-x, p)
    }
}

fn check_tokens(tokens: &PatchTokenMatrix) -> Result<()> {
    if tokens.rows == 0 || tokens.dim == 0 {
        return Err(Error::Degenerate("token matrix has no rows or no columns"));
    }
    if !tokens.is_well_formed() {
        return Err(Error::ShapeMismatch(format!(
            "token matrix declares {}x{} but holds {} values",
            tokens.rows,
            tokens.dim,
            tokens.data.len()
        )));
    }
    if let Some(i) = tokens.data.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { row: i / tokens.dim, col: i % tokens.dim });
    }
    Ok(())
}

/// Pools `tokens` column-wise at full precision.
///
/// GeM uses sign-preserving powers in both directions so that fractional
/// exponents stay defined for negative entries. Each column is scaled by its
/// largest magnitude first (GeM is positively homogeneous), which keeps large
/// exponents clear of overflow and underflow.
pub fn pool_f64(tokens: &PatchTokenMatrix, kind: PoolingKind) -> Result<Vec<f64>> {
    check_tokens(tokens)?;
    let (rows, dim) = (tokens.rows, tokens.dim);
    let column = |c: usize| (0..rows).map(move |r| f64::from(tokens.data[r * dim + c]));
    let out = match kind {
        PoolingKind::Gem(e) => {
            if !(e.is_finite() && e > 0.0) {
                return Err(Error::Config(format!("GeM exponent must be > 0, got {e}")));
            }
            (0..dim)
                .map(|c| {
                    let scale = column(c).fold(0.0_f64, |m, x| m.max(x.abs()));
                    if scale == 0.0 {
                        return 0.0;
                    }
                    let acc: f64 = column(c).map(|x| signed_pow(x / scale, e)).sum();
                    scale * signed_pow(acc / rows as f64, 1.0 / e)
                })
                .collect()
        }
        PoolingKind::Mean => (0..dim).map(|c| column(c).sum::<f64>() / rows as f64).collect(),
        PoolingKind::Max => (0..dim).map(|c| column(c).fold(f64::NEG_INFINITY, f64::max)).collect(),
    };
    Ok(out)
}

/// Pools `tokens` and rounds the descriptor to storage precision.
pub fn pool(tokens: &PatchTokenMatrix, kind: PoolingKind) -> Result<crate::EmbeddingVector> {
    let v = pool_f64(tokens, kind)?;
    Ok(crate::EmbeddingVector(v.into_iter().map(|x| x as f32).collect()))
}

pub fn gem_pool(tokens: &PatchTokenMatrix, e: f64) -> Result<crate::EmbeddingVector> {
    pool(tokens, PoolingKind::Gem(e))
}

pub fn mean_pool(tokens: &PatchTokenMatrix) -> Result<crate::EmbeddingVector> {
    pool(tokens, PoolingKind::Mean)
}

pub fn max_pool(tokens: &PatchTokenMatrix) -> Result<crate::EmbeddingVector> {
    pool(tokens, PoolingKind::Max)
}

/// Returns `(u.v, |u|^2, |v|^2)`.
fn moments(u: &[f32], v: &[f32]) -> Result<(f64, f64, f64)> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), found: v.len() });
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    Ok((dot, nu, nv))
}

/// Continuous Tanimoto coefficient `u.v / (|u|^2 + |v|^2 - u.v)`, in `[-1/3, 1]`.
pub fn tanimoto(u: &[f32], v: &[f32]) -> Result<f64> {
    let (dot, nu, nv) = moments(u, v)?;
    let denom = nu + nv - dot;
    if denom <= 0.0 {
        return Err(Error::Degenerate("tanimoto of two zero vectors"));
    }
    Ok(dot / denom)
}

pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    let (dot, nu, nv) = moments(u, v)?;
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Degenerate("cosine of a zero vector"));
    }
    Ok(dot / (libm::sqrt(nu) * libm::sqrt(nv)))
}

pub fn similarity(metric: Metric, u: &[f32], v: &[f32]) -> Result<f64> {
    match metric {
        Metric::Tanimoto => tanimoto(u, v),
        Metric::Cosine => cosine(u, v),
    }
}

/// Blend of class-embedding and patch-descriptor similarity:
/// `alpha * s_cls + (1 - alpha) * s_patch`.
#[inline]
pub fn blend(alpha: f64, s_cls: f64, s_patch: f64) -> f64 {
    alpha * s_cls + (1.0 - alpha) * s_patch
}

fn descriptor_of(patch: &PatchRepr, kind: PoolingKind) -> Result<Vec<f32>> {
    match patch {
        PatchRepr::Pooled(v) => Ok(v.0.clone()),
        PatchRepr::Tokens(t) => Ok(pool(t, kind)?.0),
    }
}

/// Integrated similarity of one proposal against one template view.
///
/// Raw tokens on either side are pooled with the configured pooling. A
/// pooled proposal cannot be compared against a raw template because the
/// proposal's exponent is unknown.
pub fn integrated_similarity(p: &Proposal, t: &TemplateView, cfg: &ScoringConfig) -> Result<f64> {
    if p.patch.is_pooled() && !t.patch.is_pooled() {
        return Err(Error::Representation(String::from("pooled proposal descriptor against raw template tokens")));
    }
    let kind = cfg.pooling.with_exponent(cfg.e);
    let s_cls = similarity(cfg.metric, p.cls.as_slice(), t.cls.as_slice())?;
    let s_patch = similarity(cfg.metric, &descriptor_of(&p.patch, kind)?, &descriptor_of(&t.patch, kind)?)?;
    Ok(blend(cfg.alpha, s_cls, s_patch))
}

/// A template view with its patch descriptor resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedView {
    pub cls: Vec<f32>,
    pub desc: Vec<f32>,
}

/// A validated bank with every patch descriptor pooled once.
///
/// Immutable after construction; share it across workers behind an `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedBank {
    pub dim: usize,
    pub pooling: PoolingKind,
    pub class_ids: Vec<String>,
    pub classes: Vec<Vec<PreparedView>>,
}

impl PreparedBank {
    pub fn new(bank: &TemplateBank, pooling: PoolingKind) -> Result<Self> {
        if let Some(v) = validate_bank(bank).first() {
            return Err(Error::InvalidBank(format!("{v}")));
        }
        if let Some(stored) = bank.pooled_exponent {
            if pooling != PoolingKind::Gem(stored) {
                return Err(Error::Representation(format!(
                    "bank was pooled with GeM e={stored}, configuration asks for {pooling:?}"
                )));
            }
        }
        let classes = bank
            .classes
            .iter()
            .map(|c| {
                c.views
                    .iter()
                    .map(|v| Ok(PreparedView { cls: v.cls.0.clone(), desc: descriptor_of(&v.patch, pooling)? }))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim: bank.dim, pooling, class_ids: bank.class_ids(), classes })
    }

    pub fn for_config(bank: &TemplateBank, cfg: &ScoringConfig) -> Result<Self> {
        Self::new(bank, cfg.pooling.with_exponent(cfg.e))
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }
}

/// A proposal with its patch descriptor resolved against a prepared bank.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedQuery<'a> {
    pub cls: &'a [f32],
    pub desc: Vec<f32>,
}

impl<'a> PreparedQuery<'a> {
    pub fn new(p: &'a Proposal, bank: &PreparedBank) -> Result<Self> {
        if p.patch.is_pooled() && !matches!(bank.pooling, PoolingKind::Gem(_)) {
            return Err(Error::Representation(String::from("pooled proposal descriptor with non-GeM pooling")));
        }
        Ok(Self { cls: p.cls.as_slice(), desc: descriptor_of(&p.patch, bank.pooling)? })
    }

    pub fn score(&self, view: &PreparedView, cfg: &ScoringConfig) -> Result<f64> {
        let s_cls = similarity(cfg.metric, self.cls, &view.cls)?;
        let s_patch = similarity(cfg.metric, &self.desc, &view.desc)?;
        Ok(blend(cfg.alpha, s_cls, s_patch))
    }
}
