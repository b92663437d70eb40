use std::collections::{BTreeMap, BTreeSet};

use anyhow::Context;
use firmod_core::binary::{build_name_address_map, parse_elf, BinaryError};
use firmod_core::corpus::ManifestEntry;
use firmod_core::normalize::{extract_function_bodies, normalize_function};
use firmod_core::store::{atomic_write, sha256_hex, to_json_bytes, ProjectStore, Stage};
use serde::Serialize;
use tracing::warn;

use crate::artifacts::{path_component, upstream, NORMALIZED_MANIFEST};
use crate::config::Project;
use crate::error::CliError;

#[derive(Serialize)]
struct RenameSidecar<'a> {
    name: &'a str,
    source_file: &'a std::path::Path,
    rename_map: &'a BTreeMap<String, String>,
}

pub fn run(project: &Project, store: &ProjectStore) -> anyhow::Result<()> {
    let root = project.source_root()?;
    let bin = project.symbols_binary()?;
    let bytes = std::fs::read(&bin).with_context(|| format!("reading {}", bin.display()))?;
    let image = parse_elf(&bin, &bytes)?;
    let names = match build_name_address_map(&image) {
        Err(BinaryError::NoSymbolInformation) => {
            return Err(CliError::Config(format!(
                "{} has no symbols; set `symbols_binary` to a build with symbols",
                bin.display()
            ))
            .into())
        }
        r => r?,
    };

    let extracted = extract_function_bodies(&root, &names);
    let dir = store.dir(Stage::Normalized);
    let mut manifest = Vec::new();
    let mut used_files = BTreeSet::new();
    let mut seen_names = BTreeSet::new();
    let mut duplicates = 0usize;
    let mut hasher_input = String::new();
    for f in &extracted.functions {
        if !seen_names.insert(f.name.clone()) {
            duplicates += 1;
            continue;
        }
        let n = match normalize_function(f) {
            Ok(n) => n,
            Err(e) => {
                warn!(function = %f.name, error = %e, "skipping");
                continue;
            }
        };
        let stem = path_component(&f.name);
        let mut base = stem.clone();
        let mut i = 1;
        while !used_files.insert(base.clone()) {
            base = format!("{stem}_{i}");
            i += 1;
        }
        let file = format!("{base}.c");
        atomic_write(&dir.join(&file), n.normalized_text.as_bytes())?;
        let sidecar = RenameSidecar { name: &f.name, source_file: &f.file, rename_map: &n.rename_map };
        atomic_write(&dir.join(format!("{base}.map.json")), &to_json_bytes(&sidecar))?;
        hasher_input.push_str(&n.normalized_text);
        for addr in names.addresses_of(&f.name) {
            manifest.push(ManifestEntry { entry: addr.to_string(), file: file.clone().into() });
        }
    }
    manifest.sort_by(|a, b| a.entry.cmp(&b.entry));
    store.write_json(
        Stage::Normalized,
        NORMALIZED_MANIFEST,
        &manifest,
        upstream([("symbols", sha256_hex(&bytes)), ("sources", sha256_hex(hasher_input.as_bytes()))]),
    )?;
    println!(
        "normalized {} functions ({} names not found in sources, {} duplicate definitions skipped, {} unreadable files)",
        used_files.len(),
        extracted.not_found.len(),
        duplicates,
        extracted.unreadable.len()
    );
    Ok(())
}
