//! Decompiled-function corpus and ground-truth label loading.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::addr::Addr;
use crate::category::Category;

/// Minimum line count for a function to be summarized.
pub const DEFAULT_LENGTH_THRESHOLD: usize = 15;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path}: {source}")]
    MalformedJson {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("duplicate manifest entry {0}")]
    DuplicateEntry(Addr),
    #[error("manifest references missing file {0}")]
    MissingFile(PathBuf),
    #[error("bad hex address {0:?}")]
    BadHex(String),
    #[error("unknown category {category:?} for module {module}")]
    UnknownCategory { module: String, category: String },
    #[error("module {0} has an empty category set")]
    EmptyCategorySet(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompiledFunction {
    pub entry: Addr,
    pub text: String,
    pub line_count: usize,
}

impl DecompiledFunction {
    pub fn new(entry: Addr, text: String) -> Self {
        let line_count = count_lines(&text);
        DecompiledFunction { entry, text, line_count }
    }
}

/// Non-blank lines.
pub fn count_lines(text: &str) -> usize {
    text.lines().filter(|l| !l.trim().is_empty()).count()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub entry: String,
    pub file: PathBuf,
}

fn read(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, CorpusError> {
    serde_json::from_str(text).map_err(|source| CorpusError::MalformedJson { path: path.to_path_buf(), source })
}

fn parse_addr(s: &str) -> Result<Addr, CorpusError> {
    s.parse().map_err(|_| CorpusError::BadHex(s.to_string()))
}

/// Loads `[{entry, file}]`; file paths are relative to the manifest.
pub fn load_decompiled_corpus(manifest: &Path) -> Result<Vec<DecompiledFunction>, CorpusError> {
    let rows: Vec<ManifestEntry> = parse_json(manifest, &read(manifest)?)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let entry = parse_addr(&row.entry)?;
        if !seen.insert(entry) {
            return Err(CorpusError::DuplicateEntry(entry));
        }
        let path = base.join(&row.file);
        if !path.is_file() {
            return Err(CorpusError::MissingFile(path));
        }
        out.push(DecompiledFunction::new(entry, read(&path)?));
    }
    Ok(out)
}

/// Writes `functions` as a manifest plus one file per function under
/// `dir`, in the layout `load_decompiled_corpus` reads.
pub fn write_decompiled_corpus(dir: &Path, functions: &[DecompiledFunction]) -> Result<PathBuf, CorpusError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CorpusError::Io { path, source }
    };
    let funcs = dir.join("funcs");
    std::fs::create_dir_all(&funcs).map_err(io(&funcs))?;
    let mut rows = Vec::with_capacity(functions.len());
    for f in functions {
        let rel = PathBuf::from("funcs").join(format!("{:08x}.c", f.entry.0));
        let path = dir.join(&rel);
        std::fs::write(&path, &f.text).map_err(io(&path))?;
        rows.push(ManifestEntry { entry: f.entry.to_string(), file: rel });
    }
    let manifest = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&rows).expect("manifest serializes");
    std::fs::write(&manifest, body).map_err(io(&manifest))?;
    Ok(manifest)
}

pub fn filter_by_length(functions: Vec<DecompiledFunction>, threshold: usize) -> Vec<DecompiledFunction> {
    functions.into_iter().filter(|f| f.line_count >= threshold).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundTruthModules {
    pub mapping: BTreeMap<Addr, String>,
}

impl GroundTruthModules {
    pub fn modules(&self) -> BTreeMap<&str, Vec<Addr>> {
        let mut out: BTreeMap<&str, Vec<Addr>> = BTreeMap::new();
        for (a, m) in &self.mapping {
            out.entry(m.as_str()).or_default().push(*a);
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundTruthCategories {
    pub mapping: BTreeMap<String, BTreeSet<Category>>,
}

pub fn parse_ground_truth_modules(path: &Path, text: &str) -> Result<GroundTruthModules, CorpusError> {
    let raw: BTreeMap<String, String> = parse_json(path, text)?;
    let mut mapping = BTreeMap::new();
    for (k, v) in raw {
        mapping.insert(parse_addr(&k)?, v);
    }
    Ok(GroundTruthModules { mapping })
}

pub fn parse_ground_truth_categories(path: &Path, text: &str) -> Result<GroundTruthCategories, CorpusError> {
    let raw: BTreeMap<String, Vec<String>> = parse_json(path, text)?;
    let mut mapping = BTreeMap::new();
    for (module, cats) in raw {
        if cats.is_empty() {
            return Err(CorpusError::EmptyCategorySet(module));
        }
        let mut set = BTreeSet::new();
        for c in cats {
            let cat =
                c.parse().map_err(|_| CorpusError::UnknownCategory { module: module.clone(), category: c.clone() })?;
            set.insert(cat);
        }
        mapping.insert(module, set);
    }
    Ok(GroundTruthCategories { mapping })
}

pub fn load_ground_truth(
    modules_path: &Path,
    categories_path: &Path,
) -> Result<(GroundTruthModules, GroundTruthCategories), CorpusError> {
    let modules = parse_ground_truth_modules(modules_path, &read(modules_path)?)?;
    let categories = parse_ground_truth_categories(categories_path, &read(categories_path)?)?;
    Ok((modules, categories))
}
