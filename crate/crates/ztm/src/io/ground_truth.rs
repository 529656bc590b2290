//! Ground-truth files: `{"images": [...], "classes": [...], "annotations":
//! [...]}`, or a bare array of annotations (images and classes are then
//! taken from the annotations).

use std::path::Path;

use serde::{Deserialize, Serialize};
use ztm_core::{BBox, GroundTruth, GroundTruthSet};

use super::{read_text, write_json, MaskRecord};
use crate::error::{Error, Result};

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub image_id: String,
    pub class_id: String,
    pub bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskRecord>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub ignore: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthFile {
    pub images: Vec<String>,
    pub classes: Vec<String>,
    pub annotations: Vec<AnnotationRecord>,
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruthSet> {
    let text = read_text(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, Some(e.line()), e.to_string()))?;
    let bare = value.is_array();
    let file: GroundTruthFile = if bare {
        let annotations = serde_json::from_value(value).map_err(|e| Error::parse(path, None, e.to_string()))?;
        GroundTruthFile { images: Vec::new(), classes: Vec::new(), annotations }
    } else {
        serde_json::from_value(value).map_err(|e| Error::parse(path, None, e.to_string()))?
    };
    let annotations = file
        .annotations
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            let bbox = BBox::from(a.bbox);
            if !bbox.is_valid() {
                return Err(Error::parse(path, None, format!("annotation {i}: invalid bbox {:?}", a.bbox)));
            }
            let mask = a
                .mask
                .map(|m| m.to_rle().map_err(|e| Error::parse(path, None, format!("annotation {i}: {e}"))))
                .transpose()?;
            Ok(GroundTruth { image_id: a.image_id, class_id: a.class_id, bbox, mask, ignore: a.ignore })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(if bare {
        GroundTruthSet::from_annotations(annotations)
    } else {
        GroundTruthSet { images: file.images, classes: file.classes, annotations }
    })
}

pub fn save_ground_truth(gt: &GroundTruthSet, path: &Path) -> Result<()> {
    let file = GroundTruthFile {
        images: gt.images.clone(),
        classes: gt.classes.clone(),
        annotations: gt
            .annotations
            .iter()
            .map(|a| AnnotationRecord {
                image_id: a.image_id.clone(),
                class_id: a.class_id.clone(),
                bbox: a.bbox.to_array(),
                mask: a.mask.as_ref().map(MaskRecord::from_rle),
                ignore: a.ignore,
            })
            .collect(),
    };
    write_json(path, &file)
}
