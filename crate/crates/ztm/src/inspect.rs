//! Human-readable summaries of banks and proposal files.

use std::fmt;

use ztm_core::{PatchRepr, Proposal, TemplateBank};

/// Storage footprint of a bank.
#[derive(Debug, Clone, PartialEq)]
pub struct BankSummary {
    pub dim: usize,
    pub classes: usize,
    pub views: usize,
    pub pooled_exponent: Option<f64>,
    /// Token count when every view has the same one.
    pub tokens_per_view: Option<usize>,
    pub cls_bytes_per_view: usize,
    /// Patch bytes of one view when every view has the same size.
    pub patch_bytes_per_view: Option<usize>,
    /// `(class_id, bytes)` for every class.
    pub bytes_per_object: Vec<(String, usize)>,
    pub total_bytes: usize,
}

fn uniform(values: impl IntoIterator<Item = usize>) -> Option<usize> {
    let mut it = values.into_iter();
    let first = it.next()?;
    it.all(|v| v == first).then_some(first)
}

pub fn summarize_bank(bank: &TemplateBank) -> BankSummary {
    let views = || bank.classes.iter().flat_map(|c| c.views.iter());
    let cls_bytes = bank.dim * 4;
    let bytes_per_object: Vec<(String, usize)> = bank
        .classes
        .iter()
        .map(|c| (c.class_id.clone(), c.views.iter().map(|v| cls_bytes + v.patch.byte_len()).sum()))
        .collect();
    BankSummary {
        dim: bank.dim,
        classes: bank.classes.len(),
        views: bank.view_count(),
        pooled_exponent: bank.pooled_exponent,
        tokens_per_view: uniform(views().map(|v| match &v.patch {
            PatchRepr::Pooled(_) => 1,
            PatchRepr::Tokens(t) => t.rows,
        })),
        cls_bytes_per_view: cls_bytes,
        patch_bytes_per_view: uniform(views().map(|v| v.patch.byte_len())),
        total_bytes: bytes_per_object.iter().map(|(_, b)| b).sum(),
        bytes_per_object,
    }
}

impl fmt::Display for BankSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dim                   {}", self.dim)?;
        writeln!(f, "classes               {}", self.classes)?;
        writeln!(f, "views                 {}", self.views)?;
        match (self.pooled_exponent, self.tokens_per_view) {
            (Some(e), _) => writeln!(f, "patch                 pooled (GeM e = {e})")?,
            (None, Some(l)) => writeln!(f, "patch                 raw, {l} tokens per view")?,
            (None, None) => writeln!(f, "patch                 raw, mixed token counts")?,
        }
        writeln!(f, "cls bytes per view    {}", self.cls_bytes_per_view)?;
        match self.patch_bytes_per_view {
            Some(b) => writeln!(f, "patch bytes per view  {b}")?,
            None => writeln!(f, "patch bytes per view  mixed")?,
        }
        match uniform(self.bytes_per_object.iter().map(|(_, b)| *b)) {
            Some(b) => writeln!(f, "bytes per object      {b}")?,
            None => {
                for (id, b) in &self.bytes_per_object {
                    writeln!(f, "bytes for {id:<12}{b}")?;
                }
            }
        }
        write!(f, "bank bytes            {}", self.total_bytes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSummary {
    pub proposals: usize,
    pub images: usize,
    pub dim: Option<usize>,
    pub pooled: usize,
    pub with_mask: usize,
    pub objectness_range: Option<(f64, f64)>,
}

pub fn summarize_proposals(proposals: &[Proposal]) -> ProposalSummary {
    let images: std::collections::BTreeSet<&str> = proposals.iter().map(|p| p.image_id.as_str()).collect();
    let range = proposals
        .iter()
        .map(|p| p.objectness)
        .fold(None, |acc: Option<(f64, f64)>, q| Some(acc.map_or((q, q), |(lo, hi)| (lo.min(q), hi.max(q)))));
    ProposalSummary {
        proposals: proposals.len(),
        images: images.len(),
        dim: proposals.first().map(|p| p.cls.dim()),
        pooled: proposals.iter().filter(|p| p.patch.is_pooled()).count(),
        with_mask: proposals.iter().filter(|p| p.mask.is_some()).count(),
        objectness_range: range,
    }
}

impl fmt::Display for ProposalSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "proposals             {}", self.proposals)?;
        writeln!(f, "images                {}", self.images)?;
        match self.dim {
            Some(d) => writeln!(f, "dim                   {d}")?,
            None => writeln!(f, "dim                   -")?,
        }
        writeln!(f, "pooled patches        {}", self.pooled)?;
        writeln!(f, "with mask             {}", self.with_mask)?;
        match self.objectness_range {
            Some((lo, hi)) => write!(f, "objectness            {lo:.3} .. {hi:.3}"),
            None => write!(f, "objectness            -"),
        }
    }
}
