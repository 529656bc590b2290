use std::path::Path;

use ztm_core::EvalReport;

use super::{read_text, write_json};
use crate::error::{Error, Result};

pub fn save_report(report: &EvalReport, path: &Path) -> Result<()> {
    write_json(path, report)
}

pub fn load_report(path: &Path) -> Result<EvalReport> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path, Some(e.line()), e.to_string()))
}
