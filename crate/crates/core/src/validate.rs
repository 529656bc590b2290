//! Structural checks for banks and proposals loaded from storage.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::types::{PatchRepr, Proposal, TemplateBank};

/// Which vector of a view a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Cls,
    Patch,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Cls => "cls",
            Field::Patch => "patch",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoClasses,
    ZeroDim,
    DuplicateClass(String),
    EmptyClass(String),
    DimensionMismatch {
        class_id: String,
        view: usize,
        field: Field,
        expected: usize,
        found: usize,
    },
    NonFinite {
        class_id: String,
        view: usize,
        field: Field,
        index: usize,
    },
    MalformedTokens {
        class_id: String,
        view: usize,
    },
    /// View representation disagrees with the bank's pooled flag.
    MixedRepresentation {
        class_id: String,
        view: usize,
    },
    BadPooledExponent(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoClasses => write!(f, "bank has no classes"),
            Violation::ZeroDim => write!(f, "bank dimension is zero"),
            Violation::DuplicateClass(c) => write!(f, "duplicate class id `{c}`"),
            Violation::EmptyClass(c) => write!(f, "class `{c}` has no views"),
            Violation::DimensionMismatch { class_id, view, field, expected, found } => {
                write!(f, "class `{class_id}` view {view} {field}: dimension {found}, expected {expected}")
            }
            Violation::NonFinite { class_id, view, field, index } => {
                write!(f, "class `{class_id}` view {view} {field}: non-finite value at {index}")
            }
            Violation::MalformedTokens { class_id, view } => {
                write!(f, "class `{class_id}` view {view}: token matrix shape does not match data")
            }
            Violation::MixedRepresentation { class_id, view } => {
                write!(f, "class `{class_id}` view {view}: representation differs from bank")
            }
            Violation::BadPooledExponent(e) => write!(f, "pooled exponent {e} is not > 0"),
        }
    }
}

fn first_non_finite(xs: &[f32]) -> Option<usize> {
    xs.iter().position(|x| !x.is_finite())
}

/// Lists every structural problem of `bank`; an empty list means valid.
pub fn validate_bank(bank: &TemplateBank) -> Vec<Violation> {
    let mut out = Vec::new();
    if bank.classes.is_empty() {
        out.push(Violation::NoClasses);
    }
    if bank.dim == 0 {
        out.push(Violation::ZeroDim);
    }
    if let Some(e) = bank.pooled_exponent {
        if !(e.is_finite() && e > 0.0) {
            out.push(Violation::BadPooledExponent(e));
        }
    }
    let mut seen = BTreeSet::new();
    for class in &bank.classes {
        let cid = &class.class_id;
        if !seen.insert(cid.as_str()) {
            out.push(Violation::DuplicateClass(cid.clone()));
        }
        if class.views.is_empty() {
            out.push(Violation::EmptyClass(cid.clone()));
        }
        for (vi, view) in class.views.iter().enumerate() {
            let dim_check = |field, found, out: &mut Vec<Violation>| {
                if found != bank.dim {
                    out.push(Violation::DimensionMismatch {
                        class_id: cid.clone(),
                        view: vi,
                        field,
                        expected: bank.dim,
                        found,
                    });
                }
            };
            dim_check(Field::Cls, view.cls.dim(), &mut out);
            if let Some(index) = first_non_finite(view.cls.as_slice()) {
                out.push(Violation::NonFinite { class_id: cid.clone(), view: vi, field: Field::Cls, index });
            }
            if view.patch.is_pooled() != bank.is_pooled() {
                out.push(Violation::MixedRepresentation { class_id: cid.clone(), view: vi });
            }
            let data = match &view.patch {
                PatchRepr::Pooled(v) => v.as_slice(),
                PatchRepr::Tokens(t) => {
                    if !t.is_well_formed() || t.rows == 0 {
                        out.push(Violation::MalformedTokens { class_id: cid.clone(), view: vi });
                    }
                    &t.data
                }
            };
            dim_check(Field::Patch, view.patch.dim(), &mut out);
            if let Some(index) = first_non_finite(data) {
                out.push(Violation::NonFinite { class_id: cid.clone(), view: vi, field: Field::Patch, index });
            }
        }
    }
    out
}

/// Checks one proposal against the bank dimension.
pub fn validate_proposal(p: &Proposal, dim: usize) -> Result<()> {
    let fail = |reason: String| Err(Error::InvalidProposal { id: p.proposal_id.clone(), reason });
    if !(0.0..=1.0).contains(&p.objectness) {
        return fail(format!("objectness {} outside [0, 1]", p.objectness));
    }
    if !p.bbox.is_valid() {
        return fail("bbox must be finite with w > 0 and h > 0".to_string());
    }
    if p.cls.dim() != dim {
        return fail(format!("cls dimension {} != {dim}", p.cls.dim()));
    }
    if p.patch.dim() != dim {
        return fail(format!("patch dimension {} != {dim}", p.patch.dim()));
    }
    if let Some(i) = first_non_finite(p.cls.as_slice()) {
        return fail(format!("non-finite cls value at {i}"));
    }
    let data = match &p.patch {
        PatchRepr::Pooled(v) => v.as_slice(),
        PatchRepr::Tokens(t) => {
            if !t.is_well_formed() || t.rows == 0 {
                return fail("token matrix shape does not match data".to_string());
            }
            &t.data
        }
    };
    if let Some(i) = first_non_finite(data) {
        return fail(format!("non-finite patch value at {i}"));
    }
    Ok(())
}
