//! Random small scoring instances for oracle comparisons.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ztm_core::{
    BBox, ClassTemplates, EmbeddingVector, Metric, PatchRepr, PatchTokenMatrix, Pooling, Proposal, ScoringConfig,
    TemplateBank, TemplateView,
};

pub struct Instance {
    pub proposals: Vec<Proposal>,
    pub bank: TemplateBank,
    pub cfg: ScoringConfig,
}

fn vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        if v.iter().any(|x| x.abs() > 1e-3) {
            return v;
        }
    }
}

fn patch(rng: &mut ChaCha8Rng, dim: usize, tokens: Option<usize>) -> PatchRepr {
    match tokens {
        None => PatchRepr::Pooled(EmbeddingVector(vector(rng, dim))),
        Some(l) => PatchRepr::Tokens(PatchTokenMatrix::new(l, dim, (0..l).flat_map(|_| vector(rng, dim)).collect())),
    }
}

/// Up to 10 proposals, 5 classes and 8 views per class, random configuration.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(2..=8);
    let pooled = rng.random_bool(0.3);
    let tokens = |rng: &mut ChaCha8Rng| if pooled { None } else { Some(rng.random_range(1..=4)) };
    let e = [1.0, 1.5, 3.0][rng.random_range(0..3)];
    let cfg = ScoringConfig {
        e,
        alpha: rng.random_range(0.0..=1.0),
        beta: rng.random_range(0.0..=1.0),
        tau: rng.random_range(0.02..1.0),
        gamma: rng.random_range(0.05..=1.0),
        prior: rng.random_bool(0.7),
        top_k: rng.random_range(1..=8),
        metric: if rng.random_bool(0.5) { Metric::Tanimoto } else { Metric::Cosine },
        pooling: if pooled {
            Pooling::Gem
        } else {
            [Pooling::Gem, Pooling::Mean, Pooling::Max][rng.random_range(0..3)]
        },
        score_floor: None,
    };
    let n_classes = rng.random_range(1..=5);
    let classes = (0..n_classes)
        .map(|c| {
            let n_views = rng.random_range(1..=8);
            let views = (0..n_views)
                .map(|_| {
                    let t = tokens(&mut rng);
                    TemplateView { cls: EmbeddingVector(vector(&mut rng, dim)), patch: patch(&mut rng, dim, t) }
                })
                .collect();
            ClassTemplates { class_id: format!("class_{c}"), views }
        })
        .collect();
    let bank = TemplateBank { dim, metric_hint: None, pooled_exponent: pooled.then_some(e), classes };
    let n_props = rng.random_range(0..=10);
    let proposals = (0..n_props)
        .map(|i| {
            let t = tokens(&mut rng);
            Proposal {
                proposal_id: format!("p{i:02}"),
                image_id: format!("img{}", i % 3),
                bbox: BBox::new(f64::from(i as u32) * 10.0, 0.0, 8.0, 8.0),
                mask: None,
                objectness: rng.random_range(0.0..=1.0),
                cls: EmbeddingVector(vector(&mut rng, dim)),
                patch: patch(&mut rng, dim, t),
            }
        })
        .collect();
    Instance { proposals, bank, cfg }
}
