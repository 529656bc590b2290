//! Deterministic synthetic embedding worlds.
//!
//! A world is a template bank plus a set of images whose proposals are noisy
//! copies of class prototypes. Hard negatives are prototype blends toward a
//! wrong class, clutter proposals are fresh random vectors without ground
//! truth, and objectness is drawn from a model that can be made informative
//! or constant. Boxes sit on a non-overlapping grid, so AP measures scoring
//! quality only.
//!
//! The Gaussian noise model is a stand-in; results on these worlds are only
//! meaningful as directions (does a component help or not).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::ScoringConfig;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvalParams, GroundTruth, GroundTruthSet};
use crate::rle::Rle;
use crate::scoring::{match_prepared, AggregationSpec};
use crate::similarity::{Pooling, PreparedBank};
use crate::types::{
    BBox, ClassTemplates, EmbeddingVector, PatchRepr, PatchTokenMatrix, Proposal, TemplateBank, TemplateView,
};
use crate::Metric;

/// Pixel pitch of the proposal grid.
const CELL: f64 = 64.0;
const MARGIN: f64 = 8.0;

/// How objectness confidences are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum ObjectnessModel {
    /// `clamp(mean + spread * N(0, 1), 0, 1)` with a per-kind mean.
    Informative { object_mean: f64, clutter_mean: f64, spread: f64 },
    /// Every proposal gets the same value.
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct WorldSpec {
    pub seed: u64,
    pub dim: usize,
    pub n_classes: usize,
    pub views_per_class: usize,
    /// Patch tokens per view and per proposal.
    pub tokens_per_view: usize,
    pub n_images: usize,
    pub proposals_per_image: usize,
    /// Per-component Gaussian noise on template views.
    pub view_noise: f64,
    /// Per-component Gaussian noise on proposals.
    pub proposal_noise: f64,
    /// Fraction of object proposals blended toward a wrong-class prototype.
    pub hard_negative_rate: f64,
    /// Weight of the wrong-class prototype in a hard negative.
    pub blend_factor: f64,
    /// Fraction of proposals that are background without ground truth.
    pub clutter_rate: f64,
    pub objectness: ObjectnessModel,
    /// Attach rectangular RLE masks to proposals and ground truth.
    pub masks: bool,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            dim: 64,
            n_classes: 8,
            views_per_class: 42,
            tokens_per_view: 4,
            n_images: 20,
            proposals_per_image: 12,
            view_noise: 0.05,
            proposal_noise: 0.6,
            hard_negative_rate: 0.0,
            blend_factor: 0.45,
            clutter_rate: 0.0,
            objectness: ObjectnessModel::Informative { object_mean: 0.45, clutter_mean: 0.25, spread: 0.12 },
            masks: false,
        }
    }
}

impl WorldSpec {
    /// World for the joint-score direction check.
    pub fn hard_negative_suite(seed: u64) -> Self {
        Self { seed, hard_negative_rate: 0.3, ..Self::default() }
    }

    /// World for the objectness-prior direction check.
    pub fn clutter_suite(seed: u64) -> Self {
        Self { seed, clutter_rate: 0.4, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidWorld(m));
        if self.dim == 0 || self.views_per_class == 0 || self.tokens_per_view == 0 {
            return bad("dim, views_per_class and tokens_per_view must be >= 1".into());
        }
        if self.n_classes < 2 {
            return bad(format!("n_classes must be >= 2, got {}", self.n_classes));
        }
        for (name, v) in [("hard_negative_rate", self.hard_negative_rate), ("clutter_rate", self.clutter_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if !(self.blend_factor > 0.0 && self.blend_factor < 1.0) {
            return bad(format!("blend_factor must be in (0, 1), got {}", self.blend_factor));
        }
        for (name, v) in [("view_noise", self.view_noise), ("proposal_noise", self.proposal_noise)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        match self.objectness {
            ObjectnessModel::Informative { object_mean, clutter_mean, spread } => {
                if !(0.0..=1.0).contains(&object_mean) || !(0.0..=1.0).contains(&clutter_mean) {
                    return bad("objectness means must be in [0, 1]".into());
                }
                if !(spread.is_finite() && spread >= 0.0) {
                    return bad(format!("objectness spread must be >= 0, got {spread}"));
                }
            }
            ObjectnessModel::Constant { value } => {
                if !(0.0..=1.0).contains(&value) {
                    return bad(format!("constant objectness must be in [0, 1], got {value}"));
                }
            }
        }
        Ok(())
    }
}

/// What a synthetic proposal really is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalKind {
    Object { class: usize },
    HardNegative { class: usize, confuser: usize },
    Clutter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image_id: String,
    pub proposals: Vec<Proposal>,
    pub kinds: Vec<ProposalKind>,
    pub ground_truth: Vec<GroundTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub bank: TemplateBank,
    pub scenes: Vec<Scene>,
}

impl World {
    pub fn proposals(&self) -> Vec<Proposal> {
        self.scenes.iter().flat_map(|s| s.proposals.iter().cloned()).collect()
    }

    /// All images (including ones without objects) and all bank classes.
    pub fn ground_truth(&self) -> GroundTruthSet {
        GroundTruthSet {
            images: self.scenes.iter().map(|s| s.image_id.clone()).collect(),
            classes: self.bank.class_ids(),
            annotations: self.scenes.iter().flat_map(|s| s.ground_truth.iter().cloned()).collect(),
        }
    }
}

struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    fn unit_vector(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| self.normal()).collect();
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
            if norm > 1e-12 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }

    fn noisy(&mut self, base: &[f64], sigma: f64) -> Vec<f32> {
        base.iter().map(|&x| (x + sigma * self.normal()) as f32).collect()
    }

    fn tokens(&mut self, base: &[f64], rows: usize, sigma: f64) -> PatchTokenMatrix {
        let data = (0..rows).flat_map(|_| self.noisy(base, sigma)).collect();
        PatchTokenMatrix::new(rows, base.len(), data)
    }

    fn pick_other(&mut self, n: usize, not: usize) -> usize {
        let k = self.rng.random_range(0..n - 1);
        if k >= not {
            k + 1
        } else {
            k
        }
    }

    fn objectness(&mut self, model: ObjectnessModel, is_object: bool) -> f64 {
        match model {
            ObjectnessModel::Constant { value } => value,
            ObjectnessModel::Informative { object_mean, clutter_mean, spread } => {
                let mean = if is_object { object_mean } else { clutter_mean };
                (mean + spread * self.normal()).clamp(0.0, 1.0)
            }
        }
    }
}

fn blend(a: &[f64], b: &[f64], weight: f64) -> Vec<f64> {
    let mixed: Vec<f64> = a.iter().zip(b).map(|(x, y)| (1.0 - weight) * x + weight * y).collect();
    let norm = libm::sqrt(mixed.iter().map(|x| x * x).sum::<f64>());
    mixed.into_iter().map(|x| x / norm).collect()
}

/// Generates the world described by `spec`. Identical specs give identical
/// worlds.
pub fn generate_world(spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let mut s = Sampler { rng: ChaCha8Rng::seed_from_u64(spec.seed) };
    let d = spec.dim;

    let cls_protos: Vec<Vec<f64>> = (0..spec.n_classes).map(|_| s.unit_vector(d)).collect();
    let patch_protos: Vec<Vec<f64>> = (0..spec.n_classes).map(|_| s.unit_vector(d)).collect();

    let classes = (0..spec.n_classes)
        .map(|c| ClassTemplates {
            class_id: format!("obj_{c:02}"),
            views: (0..spec.views_per_class)
                .map(|_| TemplateView {
                    cls: EmbeddingVector(s.noisy(&cls_protos[c], spec.view_noise)),
                    patch: PatchRepr::Tokens(s.tokens(&patch_protos[c], spec.tokens_per_view, spec.view_noise)),
                })
                .collect(),
        })
        .collect();
    let bank = TemplateBank { dim: d, metric_hint: Some(Metric::Tanimoto), pooled_exponent: None, classes };

    let grid_cols = (1..).find(|c| c * c >= spec.proposals_per_image).unwrap_or(1);
    let grid_rows = spec.proposals_per_image.div_ceil(grid_cols).max(1);
    let canvas = ((grid_rows as f64 * CELL) as u32, (grid_cols as f64 * CELL) as u32);

    let mut scenes = Vec::with_capacity(spec.n_images);
    for img in 0..spec.n_images {
        let image_id = format!("img_{img:04}");
        let mut proposals = Vec::with_capacity(spec.proposals_per_image);
        let mut kinds = Vec::with_capacity(spec.proposals_per_image);
        let mut ground_truth = Vec::new();
        for slot in 0..spec.proposals_per_image {
            let kind = if s.rng.random::<f64>() < spec.clutter_rate {
                ProposalKind::Clutter
            } else {
                let class = s.rng.random_range(0..spec.n_classes);
                if s.rng.random::<f64>() < spec.hard_negative_rate {
                    ProposalKind::HardNegative { class, confuser: s.pick_other(spec.n_classes, class) }
                } else {
                    ProposalKind::Object { class }
                }
            };
            let (cls_base, patch_base) = match kind {
                ProposalKind::Object { class } => (cls_protos[class].clone(), patch_protos[class].clone()),
                ProposalKind::HardNegative { class, confuser } => (
                    blend(&cls_protos[class], &cls_protos[confuser], spec.blend_factor),
                    blend(&patch_protos[class], &patch_protos[confuser], spec.blend_factor),
                ),
                ProposalKind::Clutter => (s.unit_vector(d), s.unit_vector(d)),
            };
            let cls = EmbeddingVector(s.noisy(&cls_base, spec.proposal_noise));
            let tokens = s.tokens(&patch_base, spec.tokens_per_view, spec.proposal_noise);
            let is_object = kind != ProposalKind::Clutter;
            let objectness = s.objectness(spec.objectness, is_object);

            let (row, col) = (slot / grid_cols, slot % grid_cols);
            let bbox = BBox::new(
                col as f64 * CELL + MARGIN,
                row as f64 * CELL + MARGIN,
                CELL - 2.0 * MARGIN,
                CELL - 2.0 * MARGIN,
            );
            let mask = spec.masks.then(|| {
                Rle::from_rect(canvas.0, canvas.1, bbox.x as u32, bbox.y as u32, bbox.w as u32, bbox.h as u32)
            });
            if let ProposalKind::Object { class } | ProposalKind::HardNegative { class, .. } = kind {
                ground_truth.push(GroundTruth {
                    image_id: image_id.clone(),
                    class_id: format!("obj_{class:02}"),
                    bbox,
                    mask: mask.clone(),
                    ignore: false,
                });
            }
            proposals.push(Proposal {
                proposal_id: format!("{image_id}_p{slot:03}"),
                image_id: image_id.clone(),
                bbox,
                mask,
                objectness,
                cls,
                patch: PatchRepr::Tokens(tokens),
            });
            kinds.push(kind);
        }
        scenes.push(Scene { image_id, proposals, kinds, ground_truth });
    }
    Ok(World { bank, scenes })
}

/// A named scoring configuration of an ablation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub config: ScoringConfig,
    pub aggregation: AggregationSpec,
}

impl Variant {
    pub fn new(name: &str, config: ScoringConfig) -> Self {
        Self { name: name.into(), config, aggregation: AggregationSpec::from_config(&config) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub name: String,
    pub map: f64,
}

/// Cumulative ladder: cosine on class embeddings only, then Tanimoto, then
/// GeM patch integration, then the joint score, then the objectness prior
/// (the last row is the default configuration).
pub fn component_ladder() -> Vec<Variant> {
    let full = crate::default_config();
    let base = ScoringConfig { metric: Metric::Cosine, alpha: 1.0, beta: 1.0, prior: false, ..full };
    let tanimoto = ScoringConfig { metric: Metric::Tanimoto, ..base };
    let integrated = ScoringConfig { alpha: full.alpha, ..tanimoto };
    let joint = ScoringConfig { beta: full.beta, ..integrated };
    alloc::vec![
        Variant::new("baseline (cosine, class embedding)", base),
        Variant::new("+ tanimoto similarity", tanimoto),
        Variant::new("+ feature integration (GeM)", integrated),
        Variant::new("+ joint similarity score", joint),
        Variant::new("+ objectness prior", full),
    ]
}

/// Absolute-only scoring against the joint score, both without prior.
pub fn joint_pair() -> Vec<Variant> {
    let full = crate::default_config();
    alloc::vec![
        Variant::new("absolute only (beta = 1)", ScoringConfig { beta: 1.0, prior: false, ..full }),
        Variant::new("joint (beta = 0.8)", ScoringConfig { prior: false, ..full }),
    ]
}

/// The default configuration with and without the objectness prior.
pub fn prior_pair() -> Vec<Variant> {
    let full = crate::default_config();
    alloc::vec![
        Variant::new("no prior", ScoringConfig { prior: false, ..full }),
        Variant::new("prior (gamma = 0.1)", full),
    ]
}

/// Class-only, patch-only and class+patch with mean / max / GeM pooling.
pub fn pooling_variants() -> Vec<Variant> {
    let full = crate::default_config();
    let plain = ScoringConfig { beta: 1.0, prior: false, ..full };
    alloc::vec![
        Variant::new("cls", ScoringConfig { alpha: 1.0, ..plain }),
        Variant::new("patch (GeM)", ScoringConfig { alpha: 0.0, ..plain }),
        Variant::new("cls + patch (mean)", ScoringConfig { pooling: Pooling::Mean, ..plain }),
        Variant::new("cls + patch (max)", ScoringConfig { pooling: Pooling::Max, ..plain }),
        Variant::new("cls + patch (GeM)", plain),
    ]
}

/// Detection mAP of one variant on a generated world.
pub fn evaluate_variant(world: &World, variant: &Variant) -> Result<f64> {
    evaluate_variant_prepared(world, &PreparedBank::for_config(&world.bank, &variant.config)?, variant)
}

/// Like [`evaluate_variant`], with the bank already prepared for the
/// variant's pooling.
pub fn evaluate_variant_prepared(world: &World, bank: &PreparedBank, variant: &Variant) -> Result<f64> {
    let mut detections = Vec::new();
    for scene in &world.scenes {
        let out = match_prepared(&scene.proposals, bank, &variant.config, variant.aggregation)?;
        detections.extend(out.detections);
    }
    Ok(evaluate(&detections, &world.ground_truth(), EvalParams::default())?.map)
}

/// Scores every variant on the same world.
pub fn run_ablation_suite(spec: &WorldSpec, variants: &[Variant]) -> Result<Vec<AblationRow>> {
    let world = generate_world(spec)?;
    variants.iter().map(|v| Ok(AblationRow { name: v.name.clone(), map: evaluate_variant(&world, v)? })).collect()
}
