//! Brute-force average precision for small single-class instances.

#![allow(dead_code)]

use ztm_core::evaluation::{iou_bbox, iou_thresholds};
use ztm_core::{evaluate, BBox, Detection, EvalParams, GroundTruth, GroundTruthSet};

fn det(id: usize, score: f64, bbox: BBox) -> Detection {
    Detection {
        image_id: "img".into(),
        proposal_id: format!("d{id:02}"),
        class_id: "obj".into(),
        score,
        bbox,
        mask: None,
    }
}

fn gt_set(boxes: &[BBox]) -> GroundTruthSet {
    GroundTruthSet {
        images: vec!["img".into()],
        classes: vec!["obj".into()],
        annotations: boxes
            .iter()
            .map(|&bbox| GroundTruth {
                image_id: "img".into(),
                class_id: "obj".into(),
                bbox,
                mask: None,
                ignore: false,
            })
            .collect(),
    }
}

/// Enumerates every valid one-to-one assignment of score-ordered detections
/// to ground truth and keeps the one that is lexicographically best when
/// detections are visited in score order: matched before unmatched, higher
/// IoU first, then the lower GT index.
pub fn brute_force_outcomes(ious: &[Vec<f64>], threshold: f64) -> Vec<bool> {
    type Key = Vec<(bool, f64, i64)>;
    fn rec(d: usize, ious: &[Vec<f64>], thr: f64, used: &mut Vec<bool>, cur: &mut Key, best: &mut Option<Key>) {
        if d == ious.len() {
            let better = match best {
                None => true,
                Some(b) => cur.iter().zip(b.iter()).find(|(x, y)| x != y).is_some_and(|(x, y)| {
                    (x.0, x.1, x.2).partial_cmp(&(y.0, y.1, y.2)) == Some(std::cmp::Ordering::Greater)
                }),
            };
            if better {
                *best = Some(cur.clone());
            }
            return;
        }
        cur.push((false, 0.0, 0));
        rec(d + 1, ious, thr, used, cur, best);
        cur.pop();
        for g in 0..used.len() {
            if !used[g] && ious[d][g] >= thr {
                used[g] = true;
                cur.push((true, ious[d][g], -(g as i64)));
                rec(d + 1, ious, thr, used, cur, best);
                cur.pop();
                used[g] = false;
            }
        }
    }
    let n_gt = ious.first().map_or(0, Vec::len);
    let mut best = None;
    rec(0, ious, threshold, &mut vec![false; n_gt], &mut Vec::new(), &mut best);
    best.unwrap().into_iter().map(|k| k.0).collect()
}

/// Precision at each recall point is the best precision at any rank whose
/// recall reaches it.
pub fn brute_force_ap(tp: &[bool], n_pos: usize) -> f64 {
    let mut points = Vec::new();
    let mut hits = 0usize;
    for (k, &t) in tp.iter().enumerate() {
        hits += usize::from(t);
        points.push((hits as f64 / n_pos as f64, hits as f64 / (k + 1) as f64));
    }
    let mut sum = 0.0;
    for r in 0..=100 {
        let target = r as f64 / 100.0;
        sum += points.iter().filter(|p| p.0 >= target).map(|p| p.1).fold(0.0, f64::max);
    }
    sum / 101.0
}

/// Every detection sequence of length 1 to 6 over five candidate boxes,
/// against one and two overlapping ground-truth boxes. Returns the number
/// of instances checked.
pub fn exhaustive_check() -> Result<usize, String> {
    let a = BBox::new(0.0, 0.0, 10.0, 10.0);
    let b = BBox::new(3.0, 0.0, 10.0, 10.0);
    let candidates =
        [a, b, BBox::new(1.5, 0.0, 10.0, 10.0), BBox::new(1.0, 0.0, 10.0, 10.0), BBox::new(50.0, 50.0, 5.0, 5.0)];
    let thresholds = iou_thresholds();
    let mut checked = 0;
    for gts in [vec![a], vec![a, b]] {
        let set = gt_set(&gts);
        for n in 1..=6u32 {
            for code in 0..5usize.pow(n) {
                let boxes: Vec<BBox> = (0..n).map(|i| candidates[code / 5usize.pow(i) % 5]).collect();
                let dets: Vec<Detection> =
                    boxes.iter().enumerate().map(|(i, &bx)| det(i, 1.0 - i as f64 / 10.0, bx)).collect();
                let report = evaluate(&dets, &set, EvalParams::default()).unwrap();
                let ious: Vec<Vec<f64>> = boxes.iter().map(|d| gts.iter().map(|g| iou_bbox(d, g)).collect()).collect();
                for (t, &thr) in thresholds.iter().enumerate() {
                    let expected = brute_force_ap(&brute_force_outcomes(&ious, thr), gts.len());
                    let got = report.ap_per_class_per_iou[0][t];
                    if got != Some(expected) {
                        return Err(format!("boxes {boxes:?} at IoU {thr}: {got:?} vs {expected}"));
                    }
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}
