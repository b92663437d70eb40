use std::collections::{BTreeMap, BTreeSet};

use firmod_core::category::{select_top_k, ModulePrediction};
use firmod_core::corpus::{load_ground_truth, GroundTruthCategories};
use firmod_core::evaluation::{
    category_metrics, match_clusters, weighted_metrics, MatchMode, ModularizationReport, ScoredPrediction,
};
use firmod_core::report::{category_table, modularization_summary, CategoryColumn};
use firmod_core::store::{sha256_hex, ProjectStore, Stage};
use firmod_llm::categorizer::ModuleRanking;
use firmod_llm::similarity::summary_similarity;
use firmod_llm::Gateway;

use crate::artifacts::{
    content_hash, per_model, upstream, CategoryResults, EvaluationArtifact, PartitionArtifact, SourceKind, EVALUATION,
    PARTITION,
};
use crate::categorize::load_summaries;
use crate::config::Project;

/// Each ground-truth module is scored on the ranking of the cluster it was
/// matched to, taking as many categories as it truly has. Modules without
/// a matched, ranked cluster predict nothing.
pub fn predictions(
    modularization: &ModularizationReport,
    rankings: &[ModuleRanking],
    gt: &GroundTruthCategories,
) -> (Vec<ScoredPrediction>, GroundTruthCategories) {
    let by_cluster: BTreeMap<usize, &ModuleRanking> = rankings.iter().map(|r| (r.module, r)).collect();
    let mut scored = Vec::new();
    let mut covered = GroundTruthCategories::default();
    for m in &modularization.matches {
        let Some(truth) = gt.mapping.get(&m.gt_module) else { continue };
        covered.mapping.insert(m.gt_module.clone(), truth.clone());
        let ranking = m.predicted_cluster.and_then(|c| by_cluster.get(&c)).and_then(|r| r.ranking());
        let prediction = match ranking {
            Some(r) => select_top_k(r, truth.len()).expect("ground-truth sets hold one to five categories"),
            None => ModulePrediction { module: m.predicted_cluster.unwrap_or(usize::MAX), selected: vec![], k: 0 },
        };
        scored.push(ScoredPrediction { gt_module: m.gt_module.clone(), prediction });
    }
    (scored, covered)
}

/// Models with a rankings artifact for this device and source.
fn ranked_models(store: &ProjectStore, device: &str, source: SourceKind) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let Ok(entries) = std::fs::read_dir(store.dir(Stage::Rankings)) else { return out };
    for e in entries.flatten() {
        let dir = e.file_name().to_string_lossy().to_string();
        let name = per_model(&dir, device, source);
        if let Ok(rs) = store.read_json::<Vec<ModuleRanking>>(Stage::Rankings, &name) {
            let model = rs.first().map_or(dir.clone(), |r| r.model.clone());
            out.insert(model, name);
        }
    }
    out
}

pub async fn run(
    project: &Project,
    store: &ProjectStore,
    gateway: Option<&Gateway>,
    mode: MatchMode,
) -> anyhow::Result<()> {
    let (mpath, cpath) = project.ground_truth()?;
    let (gt_modules, gt_categories) = load_ground_truth(&mpath, &cpath)?;
    let partition: PartitionArtifact = store.read_json(Stage::Partitions, PARTITION)?;
    let partition_hash = content_hash(store, Stage::Partitions, PARTITION)?;
    let device = project.device();

    let matches = match_clusters(&partition.partition, &gt_modules, mode)?;
    let modularization = weighted_metrics(&device, matches)?;

    let mut up = upstream([
        ("partition", partition_hash.clone()),
        ("ground_truth", sha256_hex(&[std::fs::read(&mpath)?, std::fs::read(&cpath)?].concat())),
    ]);
    let mut categories: BTreeMap<String, CategoryResults> = BTreeMap::new();
    for source in [SourceKind::Decompiled, SourceKind::Normalized] {
        for (model, name) in ranked_models(store, &device, source) {
            load_summaries(store, &name, &partition_hash)?;
            store.check_upstream(
                Stage::Rankings,
                &name,
                "summaries",
                &content_hash(store, Stage::Summaries, &name)?,
            )?;
            let rankings: Vec<ModuleRanking> = store.read_json(Stage::Rankings, &name)?;
            up.insert(format!("rankings:{name}"), content_hash(store, Stage::Rankings, &name)?);
            let (scored, covered) = predictions(&modularization, &rankings, &gt_categories);
            let report = category_metrics(&scored, &covered)?;
            let entry = categories.entry(model).or_insert(CategoryResults { decompiled: None, upper_bound: None });
            match source {
                SourceKind::Decompiled => entry.decompiled = Some(report),
                SourceKind::Normalized => entry.upper_bound = Some(report),
            }
        }
    }

    let mut similarity = BTreeMap::new();
    if let (Some(gw), Some(embed)) = (gateway, project.config.llm.embed_model.as_deref()) {
        for model in categories.keys() {
            let dec = per_model(model, &device, SourceKind::Decompiled);
            let norm = per_model(model, &device, SourceKind::Normalized);
            if !(store.exists(Stage::Summaries, &dec) && store.exists(Stage::Summaries, &norm)) {
                continue;
            }
            let a: BTreeMap<_, _> = load_summaries(store, &dec, &partition_hash)?
                .into_iter()
                .filter_map(|s| s.text().map(|t| (s.entry, t.to_string())))
                .collect();
            let pairs: Vec<(String, String)> = load_summaries(store, &norm, &partition_hash)?
                .into_iter()
                .filter_map(|s| Some((a.get(&s.entry)?.clone(), s.text()?.to_string())))
                .collect();
            if !pairs.is_empty() {
                similarity.insert(model.clone(), summary_similarity(&pairs, gw, embed).await?.stats);
            }
        }
    }

    let artifact =
        EvaluationArtifact { device: device.clone(), match_mode: mode, modularization, categories, similarity };
    store.write_json(Stage::Reports, EVALUATION, &artifact, up)?;
    print!("{}", render_summary(&artifact));
    Ok(())
}

pub fn render_summary(a: &EvaluationArtifact) -> String {
    let mut out = format!("{}: {}\n", a.device, modularization_summary(&a.modularization));
    let columns: Vec<CategoryColumn<'_>> = a
        .categories
        .iter()
        .filter_map(|(model, r)| {
            Some(CategoryColumn { model, decompiled: r.decompiled.as_ref()?, upper_bound: r.upper_bound.as_ref() })
        })
        .collect();
    if !columns.is_empty() {
        out.push('\n');
        out.push_str(&category_table(&a.device, &columns));
    }
    let unscored: BTreeSet<&str> =
        a.categories.iter().filter(|(_, r)| r.decompiled.is_none()).map(|(m, _)| m.as_str()).collect();
    for m in unscored {
        out.push_str(&format!("{m}: only normalized-source rankings are present\n"));
    }
    out
}
