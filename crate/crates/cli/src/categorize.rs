use std::collections::BTreeMap;

use firmod_core::store::{sha256_hex, to_json_bytes, ProjectStore, Stage};
use firmod_llm::categorizer::{categorize_module, ModuleRanking, RankingOutcome};
use firmod_llm::summarizer::FunctionSummary;
use firmod_llm::timing::with_timing;
use firmod_llm::Gateway;
use futures::stream::{self, StreamExt};

use crate::artifacts::{content_hash, per_model, upstream, PartitionArtifact, SourceKind, PARTITION};
use crate::config::{read_definitions, Project};
use crate::error::CliError;
use crate::timing;

/// Summaries for `model`, refusing ones built from another partition.
pub fn load_summaries(store: &ProjectStore, name: &str, partition_hash: &str) -> anyhow::Result<Vec<FunctionSummary>> {
    if !store.exists(Stage::Summaries, name) {
        return Err(CliError::Missing {
            what: "summaries",
            detail: format!("{} (run `firmod summarize`)", store.path(Stage::Summaries, name).display()),
        }
        .into());
    }
    store.check_upstream(Stage::Summaries, name, "partition", partition_hash)?;
    Ok(store.read_json(Stage::Summaries, name)?)
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
    let defs = read_definitions(project)?;
    let defs_hash = sha256_hex(&to_json_bytes(&defs));
    let device = project.device();
    let module_count = partition.partition.cluster_count();
    let mut failed_total = 0usize;
    for model in models {
        let summaries_name = per_model(model, &device, source);
        let summaries = load_summaries(store, &summaries_name, &partition_hash)?;
        let summaries_hash = content_hash(store, Stage::Summaries, &summaries_name)?;
        let mut by_module: BTreeMap<usize, Vec<FunctionSummary>> = BTreeMap::new();
        for s in summaries {
            by_module.entry(s.module).or_default().push(s);
        }

        let name = per_model(model, &device, source);
        let up = upstream([("summaries", summaries_hash), ("definitions", defs_hash.clone())]);
        let mut rankings: Vec<ModuleRanking> = match store.meta(Stage::Rankings, &name) {
            Ok(meta) if meta.upstream == up => store.read_json(Stage::Rankings, &name)?,
            _ => Vec::new(),
        };
        rankings.retain(|r| !matches!(r.outcome, RankingOutcome::Failed { .. }));
        let todo: Vec<usize> = (0..module_count).filter(|m| rankings.iter().all(|r| r.module != *m)).collect();

        let empty = Vec::new();
        let mut results = stream::iter(todo)
            .map(|m| {
                let summaries = by_module.get(&m).unwrap_or(&empty);
                let defs = &defs;
                async move {
                    categorize_module(m, summaries, defs, gateway, model).await.unwrap_or_else(|e| ModuleRanking {
                        module: m,
                        model: model.clone(),
                        outcome: RankingOutcome::Failed { error: e.to_string() },
                    })
                }
            })
            .buffer_unordered(project.config.llm.concurrency.max(1));
        while let Some(r) = results.next().await {
            rankings.push(r);
            rankings.sort_by_key(|r| r.module);
            store.write_json(Stage::Rankings, &name, &rankings, up.clone())?;
        }
        if module_count == 0 {
            store.write_json(Stage::Rankings, &name, &rankings, up.clone())?;
        }

        let t = with_timing(rankings.iter().filter_map(|r| match r.outcome {
            RankingOutcome::Ranked { latency_seconds, from_cache, .. } => Some((latency_seconds, from_cache)),
            _ => None,
        }));
        timing::record(store, source.categorize_stage(), model, &device, t)?;
        let count = |f: fn(&RankingOutcome) -> bool| rankings.iter().filter(|r| f(&r.outcome)).count();
        let failed = count(|o| matches!(o, RankingOutcome::Failed { .. }));
        println!(
            "{model}: {} modules ranked, {} skipped without summaries, {failed} failed, {:.1} s",
            count(|o| matches!(o, RankingOutcome::Ranked { .. })),
            count(|o| matches!(o, RankingOutcome::SkippedNoSummaries)),
            t.seconds
        );
        failed_total += failed;
    }
    if failed_total > 0 {
        return Err(CliError::EndpointFailures {
            failed: failed_total,
            total: module_count * models.len(),
            unit: "module rankings",
        }
        .into());
    }
    Ok(())
}
