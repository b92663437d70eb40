use std::collections::{BTreeMap, BTreeSet};

use firmod_core::corpus::{filter_by_length, load_decompiled_corpus, DecompiledFunction};
use firmod_core::store::{sha256_hex, to_json_bytes, ProjectStore, Stage};
use firmod_llm::summarizer::{summarize_module, FunctionSummary, SummarizeOptions};
use firmod_llm::timing::with_timing;
use firmod_llm::Gateway;
use futures::stream::{self, StreamExt};
use tracing::{info, warn};

use crate::artifacts::{
    content_hash, per_model, upstream, PartitionArtifact, SourceKind, NORMALIZED_MANIFEST, PARTITION,
};
use crate::config::Project;
use crate::error::CliError;
use crate::timing;

/// The functions to summarize: decompiled functions that pass the length
/// filter, or for `Normalized` the same set with normalized source text.
pub fn select_functions(
    project: &Project,
    store: &ProjectStore,
    source: SourceKind,
) -> anyhow::Result<Vec<DecompiledFunction>> {
    let corpus = load_decompiled_corpus(&project.decompiled_manifest()?)?;
    let kept = filter_by_length(corpus, project.length_threshold());
    match source {
        SourceKind::Decompiled => Ok(kept),
        SourceKind::Normalized => {
            let manifest = store.path(Stage::Normalized, NORMALIZED_MANIFEST);
            if !manifest.is_file() {
                return Err(CliError::Missing {
                    what: "normalized corpus",
                    detail: format!("{} (run `firmod normalize`)", manifest.display()),
                }
                .into());
            }
            let normalized: BTreeMap<_, _> =
                load_decompiled_corpus(&manifest)?.into_iter().map(|f| (f.entry, f.text)).collect();
            Ok(kept
                .into_iter()
                .filter_map(|f| normalized.get(&f.entry).map(|t| DecompiledFunction::new(f.entry, t.clone())))
                .collect())
        }
    }
}

pub async fn run(
    project: &Project,
    store: &ProjectStore,
    gateway: &Gateway,
    models: &[String],
    source: SourceKind,
) -> anyhow::Result<()> {
    let partition: PartitionArtifact = store.read_json(Stage::Partitions, PARTITION)?;
    let partition_hash = content_hash(store, Stage::Partitions, PARTITION)?;
    let functions = select_functions(project, store, source)?;
    let lookup = partition.partition.lookup();
    let mut by_module: BTreeMap<usize, Vec<&DecompiledFunction>> = BTreeMap::new();
    let mut unassigned = 0usize;
    for f in &functions {
        match lookup.get(&f.entry) {
            Some(m) => by_module.entry(*m).or_default().push(f),
            None => unassigned += 1,
        }
    }
    if unassigned > 0 {
        warn!(unassigned, "functions not in the partition are not summarized");
    }
    let llm = &project.config.llm;
    let inputs_hash = sha256_hex(&to_json_bytes(&(
        functions.iter().map(|f| (f.entry, &f.text)).collect::<Vec<_>>(),
        llm.char_budget,
        llm.max_tokens,
    )));
    let device = project.device();
    let mut failed_total = 0usize;
    let mut total = 0usize;
    for model in models {
        let name = per_model(model, &device, source);
        let up = upstream([("partition", partition_hash.clone()), ("inputs", inputs_hash.clone())]);
        let mut records: Vec<FunctionSummary> = match store.meta(Stage::Summaries, &name) {
            Ok(meta) if meta.upstream == up => store.read_json(Stage::Summaries, &name)?,
            _ => Vec::new(),
        };
        let done: BTreeSet<usize> = by_module
            .iter()
            .filter(|(m, fs)| {
                fs.iter().all(|f| records.iter().any(|r| r.entry == f.entry && r.module == **m && r.text().is_some()))
            })
            .map(|(m, _)| *m)
            .collect();
        records.retain(|r| done.contains(&r.module));
        info!(model, reused = done.len(), todo = by_module.len() - done.len(), "summarizing");

        let opts = SummarizeOptions {
            char_budget: llm.char_budget,
            max_tokens: llm.max_tokens,
            ..SummarizeOptions::new(model.clone())
        };
        let todo: Vec<(usize, &Vec<&DecompiledFunction>)> =
            by_module.iter().filter(|(m, _)| !done.contains(m)).map(|(m, fs)| (*m, fs)).collect();
        let mut results = stream::iter(todo)
            .map(|(m, fs)| {
                let opts = &opts;
                async move { summarize_module(m, fs, gateway, opts).await }
            })
            .buffer_unordered(llm.concurrency.max(1));
        while let Some(batch) = results.next().await {
            records.extend(batch);
            records.sort_by_key(|r| (r.entry, r.module));
            store.write_json(Stage::Summaries, &name, &records, up.clone())?;
        }
        if records.is_empty() {
            store.write_json(Stage::Summaries, &name, &records, up.clone())?;
        }

        let t = with_timing(records.iter().map(|r| (r.latency_seconds, r.from_cache)));
        timing::record(store, source.summarize_stage(), model, &device, t)?;
        let failed = records.iter().filter(|r| r.text().is_none()).count();
        println!(
            "{model}: {} summaries for {} modules ({failed} failed, {} from cache), {:.1} s",
            records.len() - failed,
            by_module.len(),
            t.cache_hits,
            t.seconds
        );
        failed_total += failed;
        total += records.len();
    }
    if failed_total > 0 {
        return Err(CliError::EndpointFailures { failed: failed_total, total, unit: "summaries" }.into());
    }
    Ok(())
}
