//! Score tensor dumps, one JSON file per stage (`abs.json`, `rel.json`,
//! `joint.json`, `final.json`).

use std::path::Path;

use serde::Serialize;
use ztm_core::ScoreTensor;

use super::{create_dir, write_json};
use crate::error::Result;

#[derive(Serialize)]
struct StageDump<'a> {
    stage: &'static str,
    class_ids: &'a [String],
    rows: Vec<StageRow<'a>>,
}

#[derive(Serialize)]
struct StageRow<'a> {
    proposal_id: &'a str,
    /// Best class of the row; ties go to the first class.
    argmax: Option<&'a str>,
    values: &'a [f64],
}

pub fn dump_stages(stages: &[&ScoreTensor], dir: &Path) -> Result<()> {
    create_dir(dir)?;
    for t in stages {
        let rows = (0..t.rows())
            .map(|r| StageRow {
                proposal_id: &t.proposal_ids[r],
                argmax: t.argmax(r).map(|c| t.class_ids[c].as_str()),
                values: t.row(r),
            })
            .collect();
        let dump = StageDump { stage: t.stage.as_str(), class_ids: &t.class_ids, rows };
        write_json(&dir.join(format!("{}.json", t.stage.as_str())), &dump)?;
    }
    Ok(())
}
