//! Straight-line reference of the scoring pipeline.
//!
//! Written against the plain data types only, with loops instead of the
//! library's kernels, so it can serve as an independent oracle.

#![allow(dead_code)]

use ztm_core::{Metric, PatchRepr, Proposal, ScoringConfig, TemplateBank};

pub struct RefDetection {
    pub proposal_id: String,
    pub class_id: String,
    pub score: f64,
}

/// Power mean with sign-preserving powers; no rescaling tricks.
pub fn ref_gem(rows: &[&[f32]], e: f64) -> Vec<f64> {
    let n = rows.len() as f64;
    let dim = rows[0].len();
    let mut out = vec![0.0; dim];
    for (c, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for r in rows {
            let x = f64::from(r[c]);
            if x != 0.0 {
                acc += x.signum() * x.abs().powf(e);
            }
        }
        let m = acc / n;
        *slot = if m == 0.0 { 0.0 } else { m.signum() * m.abs().powf(1.0 / e) };
    }
    out
}

pub fn ref_mean(rows: &[&[f32]]) -> Vec<f64> {
    let dim = rows[0].len();
    (0..dim).map(|c| rows.iter().map(|r| f64::from(r[c])).sum::<f64>() / rows.len() as f64).collect()
}

pub fn ref_max(rows: &[&[f32]]) -> Vec<f64> {
    let dim = rows[0].len();
    (0..dim).map(|c| rows.iter().map(|r| f64::from(r[c])).fold(f64::MIN, f64::max)).collect()
}

fn descriptor(patch: &PatchRepr, cfg: &ScoringConfig) -> Vec<f32> {
    match patch {
        PatchRepr::Pooled(v) => v.0.clone(),
        PatchRepr::Tokens(t) => {
            let rows: Vec<&[f32]> = (0..t.rows).map(|r| &t.data[r * t.dim..(r + 1) * t.dim]).collect();
            let pooled = match cfg.pooling {
                ztm_core::Pooling::Gem => ref_gem(&rows, cfg.e),
                ztm_core::Pooling::Mean => ref_mean(&rows),
                ztm_core::Pooling::Max => ref_max(&rows),
            };
            pooled.into_iter().map(|x| x as f32).collect()
        }
    }
}

pub fn ref_kernel(metric: Metric, u: &[f32], v: &[f32]) -> f64 {
    let mut dot = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for i in 0..u.len() {
        dot += f64::from(u[i]) * f64::from(v[i]);
        uu += f64::from(u[i]) * f64::from(u[i]);
        vv += f64::from(v[i]) * f64::from(v[i]);
    }
    match metric {
        Metric::Tanimoto => dot / (uu + vv - dot),
        Metric::Cosine => dot / (uu.sqrt() * vv.sqrt()),
    }
}

/// Mean of the `k` best scores (selection by repeated extraction).
pub fn ref_top_k_mean(scores: &[f64], k: usize) -> f64 {
    let mut left = scores.to_vec();
    let take = k.min(left.len());
    let mut sum = 0.0;
    for _ in 0..take {
        let mut best = 0;
        for i in 1..left.len() {
            if left[i] > left[best] {
                best = i;
            }
        }
        sum += left.remove(best);
    }
    sum / take as f64
}

/// Final score of every (proposal, class) pair, in proposal then class order.
pub fn reference_pipeline(proposals: &[Proposal], bank: &TemplateBank, cfg: &ScoringConfig) -> Vec<RefDetection> {
    let mut out = Vec::new();
    for p in proposals {
        let p_desc = descriptor(&p.patch, cfg);
        let mut abs = Vec::new();
        for class in &bank.classes {
            let mut view_scores = Vec::new();
            for view in &class.views {
                let s_cls = ref_kernel(cfg.metric, &p.cls.0, &view.cls.0);
                let s_patch = ref_kernel(cfg.metric, &p_desc, &descriptor(&view.patch, cfg));
                view_scores.push(cfg.alpha * s_cls + (1.0 - cfg.alpha) * s_patch);
            }
            abs.push(ref_top_k_mean(&view_scores, cfg.top_k));
        }
        let mut denom = 0.0;
        let peak = abs.iter().cloned().fold(f64::MIN, f64::max);
        for a in &abs {
            denom += ((a - peak) / cfg.tau).exp();
        }
        let prior = if cfg.prior { p.objectness.powf(cfg.gamma) } else { 1.0 };
        for (c, class) in bank.classes.iter().enumerate() {
            let rel = ((abs[c] - peak) / cfg.tau).exp() / denom;
            let joint = cfg.beta * abs[c] + (1.0 - cfg.beta) * rel;
            out.push(RefDetection {
                proposal_id: p.proposal_id.clone(),
                class_id: class.class_id.clone(),
                score: prior * joint,
            });
        }
    }
    out
}
