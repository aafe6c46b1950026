//! Name-based mechanism lookup and script-file loading.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use schedcert_core::instances::Allocation;
use schedcert_core::mechanisms::{greedy_load, scripted, vcg, Mechanism, Scripted, TieBreak};

pub const MECHANISM_NAMES: &[&str] = &[
    "vcg",
    "vcg-lowest-index",
    "vcg-highest-index",
    "vcg-prefer-machine-2",
    "greedy-load",
];

pub fn resolve(name: &str) -> Result<Box<dyn Mechanism>> {
    Ok(match name {
        "vcg" | "vcg-lowest-index" => Box::new(vcg(TieBreak::LowestIndex)),
        "vcg-highest-index" => Box::new(vcg(TieBreak::HighestIndex)),
        "vcg-prefer-machine-2" => Box::new(vcg(TieBreak::PreferSecond)),
        "greedy-load" => Box::new(greedy_load()),
        other => bail!(
            "unknown mechanism {other:?}; available: {}",
            MECHANISM_NAMES.join(", ")
        ),
    })
}

/// Script file format: responses keyed by the digest of the materialized
/// instance the mechanism will be shown.
#[derive(Deserialize)]
struct ScriptFile {
    name: String,
    n: usize,
    responses: Vec<ScriptEntry>,
}

#[derive(Deserialize)]
struct ScriptEntry {
    digest: String,
    machine_for_task: Vec<usize>,
}

pub fn load_script(path: &Path) -> Result<Scripted> {
    let raw = fs::read_to_string(path)
        .with_context(|| format!("cannot read script file {}", path.display()))?;
    let file: ScriptFile = serde_json::from_str(&raw)
        .with_context(|| format!("cannot parse script file {}", path.display()))?;
    let mut responses = BTreeMap::new();
    for entry in file.responses {
        let alloc = Allocation::new(file.n, entry.machine_for_task)
            .with_context(|| format!("script entry {} is infeasible", entry.digest))?;
        responses.insert(entry.digest, alloc);
    }
    Ok(scripted(&file.name, responses))
}
