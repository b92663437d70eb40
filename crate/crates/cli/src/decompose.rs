use std::collections::BTreeMap;

use anyhow::Context;
use firmod_core::binary::{build_name_address_map, parse_elf};
use firmod_core::pipeline::decompose;
use firmod_core::store::{sha256_hex, ProjectStore, Stage};

use crate::artifacts::{upstream, FunctionInfo, PartitionArtifact, PARTITION};
use crate::config::Project;

pub fn run(
    project: &Project,
    store: &ProjectStore,
    weights: Option<&str>,
    drg: Option<firmod_core::graph::DrgWeighting>,
) -> anyhow::Result<()> {
    let path = project.binary()?;
    let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    let binary_hash = sha256_hex(&bytes);
    let image = parse_elf(&path, &bytes)?;
    let weights = project.weights(weights)?;
    let drg = drg.or(project.config.graph.drg).unwrap_or_default();
    let d = decompose(&image, &project.seeds()?, weights, drg)?;
    let names = build_name_address_map(&image).unwrap_or_default();

    let up = upstream([("binary", binary_hash.clone()), ("weights", weights.to_string())]);
    for (name, g) in [("sg", &d.sg), ("drg", &d.drg), ("cg", &d.cg), ("combined", &d.combined)] {
        store.write_json(Stage::Graphs, &format!("{name}.json"), &g.to_json(), up.clone())?;
    }
    let artifact = PartitionArtifact {
        device: project.device(),
        weights,
        drg_weighting: drg,
        modularity: d.run.q,
        merges: d.run.merges.len(),
        call_sites: d.calls.sites.len(),
        data_refs: d.data_refs.len(),
        functions: d
            .functions
            .iter()
            .map(|f| FunctionInfo {
                entry: f.entry,
                end: f.end,
                name: f.name.clone().or_else(|| names.name_of(f.entry).map(str::to_string)),
            })
            .collect(),
        partition: d.run.partition.clone(),
    };
    store.write_json(Stage::Partitions, PARTITION, &artifact, up)?;

    let clusters = d.run.partition.clusters();
    println!(
        "{}: {} functions, {} call sites, {} data references -> {} modules (Q = {:.4}, weights {weights})",
        artifact.device,
        d.functions.len(),
        d.calls.sites.len(),
        d.data_refs.len(),
        clusters.len(),
        d.run.q
    );
    let mut histogram: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &clusters {
        let bucket = match c.len() {
            1 => "1",
            2..=5 => "2-5",
            6..=20 => "6-20",
            21..=100 => "21-100",
            _ => ">100",
        };
        *histogram.entry(bucket).or_default() += 1;
    }
    for bucket in ["1", "2-5", "6-20", "21-100", ">100"] {
        if let Some(n) = histogram.get(bucket) {
            println!("  size {bucket:>6}: {n}");
        }
    }
    Ok(())
}
