//! Batch matching over images on a worker pool.

use ztm_core::{match_prepared, AggregationSpec, MatchOutput, PreparedBank, Proposal, ScoreTensor, ScoringConfig};

use crate::error::{Error, Result};

/// Number of available cores.
pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, usize::from)
}

/// Groups proposals by image, in order of first appearance.
fn by_image(proposals: &[Proposal]) -> Vec<Vec<Proposal>> {
    let mut index = std::collections::HashMap::new();
    let mut groups: Vec<Vec<Proposal>> = Vec::new();
    for p in proposals {
        let g = *index.entry(p.image_id.as_str()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(p.clone());
    }
    groups
}

fn concat(parts: &[&ScoreTensor], template: &ScoreTensor) -> ScoreTensor {
    ScoreTensor {
        stage: template.stage,
        proposal_ids: parts.iter().flat_map(|t| t.proposal_ids.iter().cloned()).collect(),
        class_ids: template.class_ids.clone(),
        values: parts.iter().flat_map(|t| t.values.iter().copied()).collect(),
    }
}

/// Runs the pipeline image by image on `jobs` workers.
///
/// Tensor rows come out grouped by image (images in order of first
/// appearance, proposals in input order within an image), whatever the
/// worker count.
pub fn run_match(
    proposals: &[Proposal],
    bank: &PreparedBank,
    cfg: &ScoringConfig,
    agg: AggregationSpec,
    jobs: usize,
) -> Result<MatchOutput> {
    use rayon::prelude::*;

    let empty = match_prepared(&[], bank, cfg, agg)?;
    let groups = by_image(proposals);
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| Error::Internal(e.to_string()))?;
    let parts: Vec<MatchOutput> =
        pool.install(|| groups.par_iter().map(|g| match_prepared(g, bank, cfg, agg)).collect::<ztm_core::Result<_>>())?;

    let stage =
        |pick: fn(&MatchOutput) -> &ScoreTensor| concat(&parts.iter().map(pick).collect::<Vec<_>>(), pick(&empty));
    Ok(MatchOutput {
        abs: stage(|o| &o.abs),
        rel: stage(|o| &o.rel),
        joint: stage(|o| &o.joint),
        final_: stage(|o| &o.final_),
        detections: parts.iter().flat_map(|o| o.detections.iter().cloned()).collect(),
    })
}
