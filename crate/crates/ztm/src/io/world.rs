//! Synthetic worlds on disk, in the regular formats.
//!
//! ```text
//! out/
//!   world.json           the generating spec
//!   bank/                bank archive
//!   proposals.jsonl
//!   ground_truth.json
//! ```

use std::path::Path;

use ztm_core::synthbench::{World, WorldSpec};

use super::{bank::save_bank, create_dir, ground_truth::save_ground_truth, proposals::save_proposals, write_json};
use crate::error::Result;

pub fn export_world(spec: &WorldSpec, world: &World, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join("world.json"), spec)?;
    save_bank(&world.bank, &dir.join("bank"))?;
    save_proposals(&world.proposals(), &dir.join("proposals.jsonl"))?;
    save_ground_truth(&world.ground_truth(), &dir.join("ground_truth.json"))
}
