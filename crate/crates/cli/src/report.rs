use std::collections::BTreeMap;
use std::path::PathBuf;

use firmod_core::evaluation::SimilarityReport;
use firmod_core::report::{category_table, modularization_table, similarity_table, timing_table, CategoryColumn};
use firmod_core::store::{ProjectStore, Stage};

use crate::artifacts::{EvaluationArtifact, EVALUATION, REPORT_TEXT};
use crate::timing;

/// Renders every table from stored evaluations; `also` adds other
/// projects as further device rows.
pub fn run(store: &ProjectStore, also: &[PathBuf]) -> anyhow::Result<()> {
    let mut stores = vec![store.clone()];
    for root in also {
        stores.push(ProjectStore::open(root)?);
    }
    let mut evaluations = Vec::new();
    let mut seconds: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for s in &stores {
        evaluations.push(s.read_json::<EvaluationArtifact>(Stage::Reports, EVALUATION)?);
        for (model, by_device) in timing::load(s)?.seconds("summarize") {
            seconds.entry(model).or_default().extend(by_device);
        }
    }
    let text = render(&evaluations, &seconds);
    print!("{text}");
    store.write_bytes(Stage::Reports, REPORT_TEXT, text.as_bytes(), Default::default())?;
    Ok(())
}

pub fn render(evaluations: &[EvaluationArtifact], seconds: &BTreeMap<String, BTreeMap<String, f64>>) -> String {
    let mut out = String::from("Modularization\n\n");
    out.push_str(&modularization_table(&evaluations.iter().map(|e| e.modularization.clone()).collect::<Vec<_>>()));

    let mut sim = SimilarityReport::default();
    for e in evaluations {
        if !e.similarity.is_empty() {
            sim.cells.insert(e.device.clone(), e.similarity.clone());
        }
    }
    if !sim.cells.is_empty() {
        out.push_str("\nSummary similarity (decompiled vs. normalized source)\n\n");
        out.push_str(&similarity_table(&sim));
    }

    for e in evaluations {
        let columns: Vec<CategoryColumn<'_>> = e
            .categories
            .iter()
            .filter_map(|(model, r)| {
                Some(CategoryColumn { model, decompiled: r.decompiled.as_ref()?, upper_bound: r.upper_bound.as_ref() })
            })
            .collect();
        if !columns.is_empty() {
            out.push_str("\nModule categories\n\n");
            out.push_str(&category_table(&e.device, &columns));
        }
    }

    if !seconds.is_empty() {
        out.push_str("\nSummarization time\n\n");
        out.push_str(&timing_table(seconds));
    }
    out
}
