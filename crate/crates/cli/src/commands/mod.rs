pub mod gen;
pub mod shifts;
pub mod solve;
pub mod verify;

use std::path::Path;

use crate::failure::{Classify, CmdResult};

pub(crate) fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> CmdResult {
    let text = serde_json::to_string_pretty(value).runtime()?;
    std::fs::write(path, text + "\n").runtime()
}

pub(crate) fn create_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir)
        .map_err(|e| anyhow::anyhow!("creating {}: {e}", dir.display()))
        .runtime()
}
