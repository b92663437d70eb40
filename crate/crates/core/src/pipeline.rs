//! The decomposition stage end to end: recover functions, build the three
//! graphs, combine and cluster.

use crate::addr::Addr;
use crate::arm::{
    extract_calls, extract_data_refs, recover_functions, AnalysisError, CallExtraction, DataRef, FunctionRecord,
};
use crate::binary::BinaryImage;
use crate::community::{cluster_newman_traced, ClusteringRun};
use crate::graph::{
    build_call_graph, build_data_reference_graph, build_sequence_graph, combine, DrgWeighting, FunctionGraph,
    GraphWeights,
};

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub functions: Vec<FunctionRecord>,
    pub calls: CallExtraction,
    pub data_refs: Vec<DataRef>,
    pub sg: FunctionGraph,
    pub drg: FunctionGraph,
    pub cg: FunctionGraph,
    pub combined: FunctionGraph,
    pub run: ClusteringRun,
}

pub fn decompose(
    image: &BinaryImage,
    seeds: &[Addr],
    weights: GraphWeights,
    drg_mode: DrgWeighting,
) -> Result<Decomposition, AnalysisError> {
    let functions = recover_functions(image, seeds)?;
    let calls = extract_calls(image, &functions);
    let data_refs = extract_data_refs(image, &functions);
    let nodes: Vec<Addr> = functions.iter().map(|f| f.entry).collect();
    let sg = build_sequence_graph(&functions, &image.executable_ranges());
    let drg = build_data_reference_graph(&nodes, &data_refs, drg_mode);
    let cg = build_call_graph(&nodes, &calls.sites);
    let combined = combine(&sg, &drg, &cg, weights).expect("graphs share the recovered node set");
    let run = cluster_newman_traced(&combined);
    Ok(Decomposition { functions, calls, data_refs, sg, drg, cg, combined, run })
}
