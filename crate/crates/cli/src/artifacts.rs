//! Artifact names and the JSON documents stored between stages.

use std::collections::BTreeMap;

use firmod_core::community::Partition;
use firmod_core::evaluation::{CategoryReport, MatchMode, ModularizationReport, SimilarityStats};
use firmod_core::graph::{DrgWeighting, GraphWeights};
use firmod_core::store::{ProjectStore, Stage};
use firmod_core::Addr;
use serde::{Deserialize, Serialize};

pub const PARTITION: &str = "partition.json";
pub const EVALUATION: &str = "evaluation.json";
pub const TIMING: &str = "timing.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const NORMALIZED_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SourceKind {
    /// Decompiler output of the stripped binary.
    Decompiled,
    /// Comment-free, identifier-anonymized original source.
    Normalized,
}

impl SourceKind {
    fn suffix(self) -> &'static str {
        match self {
            SourceKind::Decompiled => "",
            SourceKind::Normalized => ".normalized",
        }
    }

    /// Timing ledger stage for summarization from this source.
    pub fn summarize_stage(self) -> &'static str {
        match self {
            SourceKind::Decompiled => "summarize",
            SourceKind::Normalized => "summarize-normalized",
        }
    }

    pub fn categorize_stage(self) -> &'static str {
        match self {
            SourceKind::Decompiled => "categorize",
            SourceKind::Normalized => "categorize-normalized",
        }
    }
}

/// Model names may carry `/` or `:`; keep them to one path component.
pub fn path_component(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

/// `<model>/<device>[.normalized].json`, under the summaries or rankings
/// stage.
pub fn per_model(model: &str, device: &str, source: SourceKind) -> String {
    format!("{}/{}{}.json", path_component(model), path_component(device), source.suffix())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionInfo {
    pub entry: Addr,
    pub end: Addr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionArtifact {
    pub device: String,
    pub weights: GraphWeights,
    pub drg_weighting: DrgWeighting,
    pub modularity: f64,
    pub merges: usize,
    pub call_sites: usize,
    pub data_refs: usize,
    pub functions: Vec<FunctionInfo>,
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryResults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decompiled: Option<CategoryReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<CategoryReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationArtifact {
    pub device: String,
    pub match_mode: MatchMode,
    pub modularization: ModularizationReport,
    pub categories: BTreeMap<String, CategoryResults>,
    pub similarity: BTreeMap<String, SimilarityStats>,
}

/// Hash of the stored artifact, as recorded in its sidecar.
pub fn content_hash(store: &ProjectStore, stage: Stage, name: &str) -> anyhow::Result<String> {
    Ok(store.meta(stage, name)?.content_sha256)
}

pub fn upstream<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_stay_inside_their_stage() {
        assert_eq!(
            per_model("mistralai/codestral:22b", "Quad Copter", SourceKind::Decompiled),
            "mistralai_codestral_22b/Quad_Copter.json"
        );
        assert_eq!(per_model("m", "d", SourceKind::Normalized), "m/d.normalized.json");
    }
}
