//! COCO-style detection evaluation.
//!
//! For each class and each IoU threshold in `0.50:0.05:0.95`, detections are
//! matched greedily in descending score order to the unmatched ground truth
//! with the highest IoU at or above the threshold. Precision is made
//! monotone and sampled at 101 recall points `0.00:0.01:1.00`.
//!
//! Tie-breaks: equal IoU goes to the earliest ground truth of the image;
//! equal scores are ordered by `(proposal_id, image_id)`. Classes without
//! any non-ignored ground truth are left out of the mean.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::rle::Rle;
use crate::types::{BBox, Detection};

pub const N_IOU_THRESHOLDS: usize = 10;
pub const N_RECALL_POINTS: usize = 101;

/// `0.50, 0.55, ..., 0.95`.
pub fn iou_thresholds() -> [f64; N_IOU_THRESHOLDS] {
    core::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EvalMode {
    #[default]
    BBox,
    Mask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalParams {
    pub mode: EvalMode,
    /// Keep only the top-N detections per (image, class).
    pub max_dets: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub image_id: String,
    pub class_id: String,
    pub bbox: BBox,
    pub mask: Option<Rle>,
    /// Ignored regions absorb matching detections without counting them.
    pub ignore: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthSet {
    /// Every image of the evaluation, including images without objects.
    pub images: Vec<String>,
    /// Every class of the evaluation, in report order.
    pub classes: Vec<String>,
    pub annotations: Vec<GroundTruth>,
}

impl GroundTruthSet {
    /// Derives the image and class lists from the annotations, in order of
    /// first appearance.
    pub fn from_annotations(annotations: Vec<GroundTruth>) -> Self {
        let mut images = Vec::new();
        let mut classes = Vec::new();
        let mut seen_i = BTreeSet::new();
        let mut seen_c = BTreeSet::new();
        for a in &annotations {
            if seen_i.insert(a.image_id.clone()) {
                images.push(a.image_id.clone());
            }
            if seen_c.insert(a.class_id.clone()) {
                classes.push(a.class_id.clone());
            }
        }
        Self { images, classes, annotations }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub mode: EvalMode,
    pub iou_thresholds: Vec<f64>,
    pub class_ids: Vec<String>,
    /// `[class][threshold]`; `None` for classes without ground truth.
    pub ap_per_class_per_iou: Vec<Vec<Option<f64>>>,
    pub ap_per_class: Vec<Option<f64>>,
    /// Mean AP over classes with ground truth; 0 when there are none.
    pub map: f64,
    /// Non-ignored ground-truth instances per class.
    pub gt_counts: Vec<usize>,
}

impl EvalReport {
    /// Mean AP over classes at one threshold index.
    pub fn map_at(&self, t: usize) -> f64 {
        mean(self.ap_per_class_per_iou.iter().filter_map(|row| row[t]))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Intersection over union of two boxes.
pub fn iou_bbox(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Pixel-count IoU of two masks on the same canvas.
pub fn iou_mask(a: &Rle, b: &Rle) -> Result<f64> {
    a.iou(b)
}

/// Matching outcome of one detection at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    TruePositive,
    FalsePositive,
    /// Matched an ignored region.
    Ignored,
}

/// Greedy matching of score-sorted detections against one image's ground
/// truth for a single class. `ious[d][g]` is the overlap of detection `d`
/// (already in processing order) with ground truth `g`.
pub fn greedy_match(ious: &[Vec<f64>], ignore: &[bool], threshold: f64) -> Vec<Outcome> {
    let mut taken = alloc::vec![false; ignore.len()];
    let mut out = Vec::with_capacity(ious.len());
    for row in ious {
        let mut best: Option<(usize, f64)> = None;
        // Real objects first, ignored regions only as a fallback.
        for pass_ignored in [false, true] {
            for (g, &iou) in row.iter().enumerate() {
                if ignore[g] != pass_ignored || (taken[g] && !ignore[g]) || iou < threshold {
                    continue;
                }
                if best.is_none_or(|(_, b)| iou > b) {
                    best = Some((g, iou));
                }
            }
            if best.is_some() {
                break;
            }
        }
        out.push(match best {
            Some((g, _)) if ignore[g] => Outcome::Ignored,
            Some((g, _)) => {
                taken[g] = true;
                Outcome::TruePositive
            }
            None => Outcome::FalsePositive,
        });
    }
    out
}

/// Area under the monotone 101-point precision/recall curve for an ordered
/// TP/FP sequence with `n_pos` positives.
pub fn average_precision(is_tp: &[bool], n_pos: usize) -> f64 {
    if n_pos == 0 {
        return 0.0;
    }
    let mut recall = Vec::with_capacity(is_tp.len());
    let mut precision = Vec::with_capacity(is_tp.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &hit in is_tp {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / n_pos as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        if precision[i + 1] > precision[i] {
            precision[i] = precision[i + 1];
        }
    }
    let mut sum = 0.0;
    for r in 0..N_RECALL_POINTS {
        let target = r as f64 / (N_RECALL_POINTS - 1) as f64;
        let idx = recall.partition_point(|&x| x < target);
        if let Some(&p) = precision.get(idx) {
            sum += p;
        }
    }
    sum / N_RECALL_POINTS as f64
}

struct Scored<'a> {
    det: &'a Detection,
    outcomes: [Outcome; N_IOU_THRESHOLDS],
}

fn by_score(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.proposal_id.cmp(&b.proposal_id))
        .then_with(|| a.image_id.cmp(&b.image_id))
}

/// Evaluates `detections` against `gt`.
pub fn evaluate(detections: &[Detection], gt: &GroundTruthSet, params: EvalParams) -> Result<EvalReport> {
    let images: BTreeSet<&str> = gt.images.iter().map(String::as_str).collect();
    let class_index: BTreeMap<&str, usize> = gt.classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

    for a in &gt.annotations {
        if !images.contains(a.image_id.as_str()) {
            return Err(Error::UnknownImage(a.image_id.clone()));
        }
        if !class_index.contains_key(a.class_id.as_str()) {
            return Err(Error::UnknownClass(a.class_id.clone()));
        }
        if params.mode == EvalMode::Mask && a.mask.is_none() {
            return Err(Error::InvalidMask(alloc::format!(
                "ground truth of class `{}` in image `{}` has no mask",
                a.class_id,
                a.image_id
            )));
        }
    }
    for d in detections {
        if !images.contains(d.image_id.as_str()) {
            return Err(Error::UnknownImage(d.image_id.clone()));
        }
        if !class_index.contains_key(d.class_id.as_str()) {
            return Err(Error::UnknownClass(d.class_id.clone()));
        }
        if !d.score.is_finite() {
            return Err(Error::InvalidProposal {
                id: d.proposal_id.clone(),
                reason: "non-finite detection score".into(),
            });
        }
        if params.mode == EvalMode::Mask && d.mask.is_none() {
            return Err(Error::InvalidMask(alloc::format!("detection `{}` has no mask", d.proposal_id)));
        }
    }

    // (class, image) -> indices
    let mut gt_cells: BTreeMap<(usize, &str), Vec<&GroundTruth>> = BTreeMap::new();
    for a in &gt.annotations {
        gt_cells.entry((class_index[a.class_id.as_str()], a.image_id.as_str())).or_default().push(a);
    }
    let mut dt_cells: BTreeMap<(usize, &str), Vec<&Detection>> = BTreeMap::new();
    for d in detections {
        dt_cells.entry((class_index[d.class_id.as_str()], d.image_id.as_str())).or_default().push(d);
    }

    let thresholds = iou_thresholds();
    let n_classes = gt.classes.len();
    let mut per_class: Vec<Vec<Scored<'_>>> = (0..n_classes).map(|_| Vec::new()).collect();
    let mut gt_counts = alloc::vec![0usize; n_classes];
    for ((c, _), gts) in &gt_cells {
        gt_counts[*c] += gts.iter().filter(|g| !g.ignore).count();
    }

    for ((c, image), mut dets) in dt_cells {
        dets.sort_by(|a, b| by_score(a, b));
        if let Some(cap) = params.max_dets {
            dets.truncate(cap);
        }
        let gts = gt_cells.get(&(c, image)).map(Vec::as_slice).unwrap_or(&[]);
        let ignore: Vec<bool> = gts.iter().map(|g| g.ignore).collect();
        let ious = dets
            .iter()
            .map(|d| {
                gts.iter()
                    .map(|g| match params.mode {
                        EvalMode::BBox => Ok(iou_bbox(&d.bbox, &g.bbox)),
                        EvalMode::Mask => {
                            iou_mask(d.mask.as_ref().expect("checked above"), g.mask.as_ref().expect("checked above"))
                        }
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut outcomes = alloc::vec![[Outcome::FalsePositive; N_IOU_THRESHOLDS]; dets.len()];
        for (t, &thr) in thresholds.iter().enumerate() {
            for (d, o) in greedy_match(&ious, &ignore, thr).into_iter().enumerate() {
                outcomes[d][t] = o;
            }
        }
        per_class[c].extend(dets.into_iter().zip(outcomes).map(|(det, outcomes)| Scored { det, outcomes }));
    }

    let mut ap_per_class_per_iou = Vec::with_capacity(n_classes);
    for (c, mut scored) in per_class.into_iter().enumerate() {
        if gt_counts[c] == 0 {
            ap_per_class_per_iou.push(alloc::vec![None; N_IOU_THRESHOLDS]);
            continue;
        }
        scored.sort_by(|a, b| by_score(a.det, b.det));
        let row = (0..N_IOU_THRESHOLDS)
            .map(|t| {
                let seq: Vec<bool> = scored
                    .iter()
                    .filter(|s| s.outcomes[t] != Outcome::Ignored)
                    .map(|s| s.outcomes[t] == Outcome::TruePositive)
                    .collect();
                Some(average_precision(&seq, gt_counts[c]))
            })
            .collect();
        ap_per_class_per_iou.push(row);
    }
    let ap_per_class: Vec<Option<f64>> = ap_per_class_per_iou
        .iter()
        .map(|row: &Vec<Option<f64>>| row[0].map(|_| mean(row.iter().flatten().copied())))
        .collect();
    let map = mean(ap_per_class.iter().flatten().copied());
    Ok(EvalReport {
        mode: params.mode,
        iou_thresholds: thresholds.to_vec(),
        class_ids: gt.classes.clone(),
        ap_per_class_per_iou,
        ap_per_class,
        map,
        gt_counts,
    })
}
