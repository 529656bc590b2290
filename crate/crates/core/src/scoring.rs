//! The matching pipeline.
//!
//! Per proposal and class: view scores are reduced to an absolute score, a
//! temperature softmax across classes gives the relative score, the two are
//! blended into the joint score, and the joint row is multiplied by the
//! gamma-rescaled objectness of the proposal to give the final score.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::config::ScoringConfig;
use crate::error::{Error, Result};
use crate::similarity::{integrated_similarity, PreparedBank, PreparedQuery};
use crate::types::{Detection, Proposal, TemplateBank, TemplateView};
use crate::validate::validate_proposal;

/// How per-view scores of one class collapse into one class score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationSpec {
    /// Mean of the `K` largest view scores (`K` clamped to the view count).
    TopKMean(usize),
    Max,
    Mean,
}

impl AggregationSpec {
    pub fn from_config(cfg: &ScoringConfig) -> Self {
        AggregationSpec::TopKMean(cfg.top_k)
    }

    /// Reduces `scores` in place (they get sorted).
    pub fn reduce(self, scores: &mut [f64]) -> Result<f64> {
        if scores.is_empty() {
            return Err(Error::Config("aggregation over zero views".into()));
        }
        // Sorting first makes every reduction independent of view order.
        scores.sort_unstable_by(|a, b| b.total_cmp(a));
        let take = match self {
            AggregationSpec::TopKMean(0) => return Err(Error::Config("top-K aggregation needs K >= 1".into())),
            AggregationSpec::TopKMean(k) => k.min(scores.len()),
            AggregationSpec::Max => 1,
            AggregationSpec::Mean => scores.len(),
        };
        Ok(scores[..take].iter().sum::<f64>() / take as f64)
    }
}

impl core::fmt::Display for AggregationSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            AggregationSpec::TopKMean(k) => write!(f, "topk:{k}"),
            AggregationSpec::Max => f.write_str("max"),
            AggregationSpec::Mean => f.write_str("mean"),
        }
    }
}

impl core::str::FromStr for AggregationSpec {
    type Err = Error;

    /// Accepts `max`, `mean`, `topk` (K = 5) or `topk:<K>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(AggregationSpec::Max),
            "mean" => Ok(AggregationSpec::Mean),
            "topk" => Ok(AggregationSpec::TopKMean(crate::default_config().top_k)),
            _ => match s.strip_prefix("topk:").map(str::parse::<usize>) {
                Some(Ok(k)) if k >= 1 => Ok(AggregationSpec::TopKMean(k)),
                _ => Err(Error::Config(format!("unknown aggregation `{s}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Abs,
    Rel,
    Joint,
    Final,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Abs => "abs",
            Stage::Rel => "rel",
            Stage::Joint => "joint",
            Stage::Final => "final",
        }
    }
}

/// Proposals x classes score matrix for one pipeline stage (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTensor {
    pub stage: Stage,
    pub proposal_ids: Vec<String>,
    pub class_ids: Vec<String>,
    pub values: Vec<f64>,
}

impl ScoreTensor {
    pub fn rows(&self) -> usize {
        self.proposal_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.class_ids.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols() + c]
    }

    /// Column of the largest entry in row `r`; ties go to the lowest index.
    pub fn argmax(&self, r: usize) -> Option<usize> {
        argmax(self.row(r))
    }

    fn same_labels(&self, other: &ScoreTensor) -> Result<()> {
        if self.proposal_ids != other.proposal_ids || self.class_ids != other.class_ids {
            return Err(Error::ShapeMismatch(format!(
                "{} tensor is {}x{}, {} tensor is {}x{} or labelled differently",
                self.stage.as_str(),
                self.rows(),
                self.cols(),
                other.stage.as_str(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(())
    }
}

/// Index of the first maximum.
pub fn argmax(row: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in row.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Absolute score of proposal `p` for one class: integrated similarity
/// against every view, reduced by `agg`.
pub fn aggregate_class_score(
    p: &Proposal,
    views: &[TemplateView],
    cfg: &ScoringConfig,
    agg: AggregationSpec,
) -> Result<f64> {
    if views.is_empty() {
        return Err(Error::Config("class has no template views".into()));
    }
    let mut scores = views.iter().map(|v| integrated_similarity(p, v, cfg)).collect::<Result<Vec<_>>>()?;
    agg.reduce(&mut scores)
}

fn scoring_context(p: &Proposal, class_id: &str) -> impl FnOnce(Error) -> Error {
    let proposal_id = p.proposal_id.clone();
    let class_id = String::from(class_id);
    move |e| Error::Scoring { proposal_id, class_id, source: Box::new(e) }
}

/// Absolute-stage tensor against a bank whose descriptors are already pooled.
pub fn absolute_matrix_prepared(
    proposals: &[Proposal],
    bank: &PreparedBank,
    cfg: &ScoringConfig,
    agg: AggregationSpec,
) -> Result<ScoreTensor> {
    let n_classes = bank.n_classes();
    let mut values = Vec::with_capacity(proposals.len() * n_classes);
    let mut scratch = Vec::new();
    for p in proposals {
        let query = PreparedQuery::new(p, bank).map_err(scoring_context(p, "*"))?;
        for (class_id, views) in bank.class_ids.iter().zip(&bank.classes) {
            scratch.clear();
            for v in views {
                scratch.push(query.score(v, cfg).map_err(scoring_context(p, class_id))?);
            }
            values.push(agg.reduce(&mut scratch).map_err(scoring_context(p, class_id))?);
        }
    }
    Ok(ScoreTensor {
        stage: Stage::Abs,
        proposal_ids: proposals.iter().map(|p| p.proposal_id.clone()).collect(),
        class_ids: bank.class_ids.clone(),
        values,
    })
}

pub fn absolute_matrix(
    proposals: &[Proposal],
    bank: &TemplateBank,
    cfg: &ScoringConfig,
    agg: AggregationSpec,
) -> Result<ScoreTensor> {
    let prepared = PreparedBank::for_config(bank, cfg)?;
    absolute_matrix_prepared(proposals, &prepared, cfg, agg)
}

/// Row-wise softmax of `abs / tau` across classes.
pub fn relative_matrix(abs: &ScoreTensor, tau: f64) -> Result<ScoreTensor> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Config(format!("tau must be > 0, got {tau}")));
    }
    let cols = abs.cols();
    if cols == 0 {
        return Err(Error::Config("softmax over zero classes".into()));
    }
    if let Some(i) = abs.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: i / cols, col: i % cols });
    }
    let mut values = Vec::with_capacity(abs.values.len());
    for row in abs.values.chunks_exact(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = values.len();
        values.extend(row.iter().map(|&s| libm::exp((s - max) / tau)));
        let total: f64 = values[start..].iter().sum();
        values[start..].iter_mut().for_each(|v| *v /= total);
    }
    Ok(ScoreTensor { stage: Stage::Rel, values, ..abs.clone() })
}

/// `beta * abs + (1 - beta) * rel`, element-wise.
pub fn joint_matrix(abs: &ScoreTensor, rel: &ScoreTensor, beta: f64) -> Result<ScoreTensor> {
    abs.same_labels(rel)?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Config(format!("beta must be in [0, 1], got {beta}")));
    }
    let values = abs.values.iter().zip(&rel.values).map(|(&a, &r)| beta * a + (1.0 - beta) * r).collect();
    Ok(ScoreTensor { stage: Stage::Joint, values, ..abs.clone() })
}

/// `objectness ^ gamma`.
pub fn scaled_prior(objectness: f64, gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&objectness) {
        return Err(Error::Config(format!("objectness must be in [0, 1], got {objectness}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Config(format!("gamma must be in (0, 1], got {gamma}")));
    }
    Ok(libm::pow(objectness, gamma))
}

/// Multiplies row `p` of `joint` by the scaled prior of proposal `p`.
/// `gamma = None` disables the prior (final equals joint).
pub fn final_matrix(joint: &ScoreTensor, proposals: &[Proposal], gamma: Option<f64>) -> Result<ScoreTensor> {
    if proposals.len() != joint.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} proposals for a joint tensor with {} rows",
            proposals.len(),
            joint.rows()
        )));
    }
    let cols = joint.cols();
    let mut values = joint.values.clone();
    if let Some(gamma) = gamma {
        for (p, row) in proposals.iter().zip(values.chunks_exact_mut(cols.max(1))) {
            let prior = scaled_prior(p.objectness, gamma)?;
            row.iter_mut().for_each(|v| *v *= prior);
        }
    }
    Ok(ScoreTensor { stage: Stage::Final, values, ..joint.clone() })
}

/// All four stage tensors plus the emitted detections.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutput {
    pub abs: ScoreTensor,
    pub rel: ScoreTensor,
    pub joint: ScoreTensor,
    pub final_: ScoreTensor,
    /// In proposal order, then bank class order.
    pub detections: Vec<Detection>,
}

impl MatchOutput {
    pub fn stages(&self) -> [&ScoreTensor; 4] {
        [&self.abs, &self.rel, &self.joint, &self.final_]
    }
}

/// Runs the pipeline against a prepared bank.
pub fn match_prepared(
    proposals: &[Proposal],
    bank: &PreparedBank,
    cfg: &ScoringConfig,
    agg: AggregationSpec,
) -> Result<MatchOutput> {
    cfg.validate()?;
    for p in proposals {
        validate_proposal(p, bank.dim)?;
    }
    let abs = absolute_matrix_prepared(proposals, bank, cfg, agg)?;
    let rel = relative_matrix(&abs, cfg.tau)?;
    let joint = joint_matrix(&abs, &rel, cfg.beta)?;
    let final_ = final_matrix(&joint, proposals, cfg.prior.then_some(cfg.gamma))?;

    let mut detections = Vec::new();
    for (r, p) in proposals.iter().enumerate() {
        for (c, class_id) in final_.class_ids.iter().enumerate() {
            let score = final_.get(r, c);
            if cfg.score_floor.is_some_and(|floor| score < floor) {
                continue;
            }
            detections.push(Detection {
                image_id: p.image_id.clone(),
                proposal_id: p.proposal_id.clone(),
                class_id: class_id.clone(),
                score,
                bbox: p.bbox,
                mask: p.mask.clone(),
            });
        }
    }
    Ok(MatchOutput { abs, rel, joint, final_, detections })
}

/// Scores `proposals` against `bank`: abs, rel, joint, final, detections.
pub fn match_proposals(
    proposals: &[Proposal],
    bank: &TemplateBank,
    cfg: &ScoringConfig,
    agg: AggregationSpec,
) -> Result<MatchOutput> {
    cfg.validate()?;
    let prepared = PreparedBank::for_config(bank, cfg)?;
    match_prepared(proposals, &prepared, cfg, agg)
}
