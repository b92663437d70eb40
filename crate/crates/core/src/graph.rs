//! Sequence, data-reference and call graphs over recovered functions, and
//! their linear combination into one undirected weighted graph.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::addr::Addr;
use crate::arm::{CallSite, DataRef, FunctionRecord};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GraphError {
    #[error("graphs do not share the same node set")]
    NodeSetMismatch,
    #[error("graph weights must be finite, non-negative and not all zero (got {0}, {1}, {2})")]
    InvalidWeights(f64, f64, f64),
    #[error("edge {0} -> {1} references a node outside the graph")]
    UnknownNode(Addr, Addr),
    #[error("edge {0} -> {1} has invalid weight {2}")]
    InvalidEdgeWeight(Addr, Addr, f64),
    #[error("self-loop on {0}")]
    SelfLoop(Addr),
    #[error("duplicate node {0}")]
    DuplicateNode(Addr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Sequence,
    DataReference,
    Call,
    Combined,
}

impl GraphKind {
    pub fn label(self) -> &'static str {
        match self {
            GraphKind::Sequence => "sg",
            GraphKind::DataReference => "drg",
            GraphKind::Call => "cg",
            GraphKind::Combined => "combined",
        }
    }

    fn from_label(s: &str) -> Option<Self> {
        Some(match s {
            "sg" => GraphKind::Sequence,
            "drg" => GraphKind::DataReference,
            "cg" => GraphKind::Call,
            "combined" => GraphKind::Combined,
            _ => return None,
        })
    }

    fn directed(self) -> bool {
        matches!(self, GraphKind::Sequence | GraphKind::Call)
    }
}

/// A weighted graph over function entries. Undirected graphs store each
/// edge once under `(min, max)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionGraph {
    pub kind: GraphKind,
    nodes: Vec<Addr>,
    edges: BTreeMap<(Addr, Addr), f64>,
}

impl FunctionGraph {
    pub fn new(kind: GraphKind, nodes: Vec<Addr>) -> Result<Self, GraphError> {
        let mut seen = BTreeSet::new();
        for n in &nodes {
            if !seen.insert(*n) {
                return Err(GraphError::DuplicateNode(*n));
            }
        }
        Ok(FunctionGraph { kind, nodes, edges: BTreeMap::new() })
    }

    pub fn directed(&self) -> bool {
        self.kind.directed()
    }

    pub fn nodes(&self) -> &[Addr] {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeMap<(Addr, Addr), f64> {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn weight(&self, u: Addr, v: Addr) -> f64 {
        self.edges.get(&self.key(u, v)).copied().unwrap_or(0.0)
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.values().sum()
    }

    fn key(&self, u: Addr, v: Addr) -> (Addr, Addr) {
        if self.directed() || u <= v {
            (u, v)
        } else {
            (v, u)
        }
    }

    /// Adds `w` to the edge weight. Self-loops and zero weights are ignored.
    pub fn add_weight(&mut self, u: Addr, v: Addr, w: f64) {
        if u == v || w == 0.0 {
            return;
        }
        *self.edges.entry(self.key(u, v)).or_insert(0.0) += w;
    }

    fn validate(&self) -> Result<(), GraphError> {
        let nodes: BTreeSet<Addr> = self.nodes.iter().copied().collect();
        if nodes.len() != self.nodes.len() {
            let mut seen = BTreeSet::new();
            let dup = self.nodes.iter().find(|n| !seen.insert(**n)).copied();
            return Err(GraphError::DuplicateNode(dup.unwrap_or_default()));
        }
        for (&(u, v), &w) in &self.edges {
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if !nodes.contains(&u) || !nodes.contains(&v) {
                return Err(GraphError::UnknownNode(u, v));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(GraphError::InvalidEdgeWeight(u, v, w));
            }
        }
        Ok(())
    }

    fn node_set(&self) -> BTreeSet<Addr> {
        self.nodes.iter().copied().collect()
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            kind: Some(self.kind),
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .map(|(&(u, v), &weight)| EdgeJson { u, v, weight, source: self.kind.label().to_string() })
                .collect(),
        }
    }

    pub fn from_json(doc: GraphJson) -> Result<Self, GraphError> {
        let kind = doc
            .kind
            .or_else(|| doc.edges.first().and_then(|e| GraphKind::from_label(&e.source)))
            .unwrap_or(GraphKind::Combined);
        let mut g = FunctionGraph::new(kind, doc.nodes)?;
        for e in doc.edges {
            let key = g.key(e.u, e.v);
            *g.edges.entry(key).or_insert(0.0) += e.weight;
        }
        g.validate()?;
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<GraphKind>,
    pub nodes: Vec<Addr>,
    pub edges: Vec<EdgeJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub u: Addr,
    pub v: Addr,
    pub weight: f64,
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl GraphWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, GraphError> {
        let ok = [alpha, beta, gamma].iter().all(|w| w.is_finite() && *w >= 0.0) && alpha + beta + gamma > 0.0;
        if !ok {
            return Err(GraphError::InvalidWeights(alpha, beta, gamma));
        }
        Ok(GraphWeights { alpha, beta, gamma })
    }
}

impl Default for GraphWeights {
    fn default() -> Self {
        GraphWeights { alpha: 1.0, beta: 1.0, gamma: 1.0 }
    }
}

/// `alpha,beta,gamma`, the form `FromStr` accepts.
impl std::fmt::Display for GraphWeights {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.alpha, self.beta, self.gamma)
    }
}

impl std::str::FromStr for GraphWeights {
    type Err = String;

    /// Parses `alpha,beta,gamma`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<Result<_, _>>()?;
        let [a, b, c] = parts[..] else {
            return Err(format!("expected three comma-separated weights, got {s:?}"));
        };
        GraphWeights::new(a, b, c).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrgWeighting {
    /// Number of distinct shared addresses.
    #[default]
    Count,
    /// 1 if any address is shared.
    Binary,
}

/// Weight-1 edges from each function to its address successor inside the
/// same executable range. Functions outside every range get no edges.
pub fn build_sequence_graph(functions: &[FunctionRecord], exec: &[Range<Addr>]) -> FunctionGraph {
    let mut entries: Vec<Addr> = functions.iter().map(|f| f.entry).collect();
    entries.sort();
    entries.dedup();
    let mut g = FunctionGraph { kind: GraphKind::Sequence, nodes: entries.clone(), edges: BTreeMap::new() };
    let section_of = |a: Addr| exec.iter().position(|r| r.contains(&a));
    for pair in entries.windows(2) {
        let (s0, s1) = (section_of(pair[0]), section_of(pair[1]));
        if s0.is_some() && s0 == s1 {
            g.add_weight(pair[0], pair[1], 1.0);
        }
    }
    g
}

/// Undirected edges between functions sharing data addresses. References
/// from functions outside `nodes` are ignored.
pub fn build_data_reference_graph(nodes: &[Addr], refs: &[DataRef], weighting: DrgWeighting) -> FunctionGraph {
    let node_set: BTreeSet<Addr> = nodes.iter().copied().collect();
    let mut by_addr: BTreeMap<Addr, BTreeSet<Addr>> = BTreeMap::new();
    for r in refs.iter().filter(|r| node_set.contains(&r.function)) {
        by_addr.entry(r.data_addr).or_default().insert(r.function);
    }
    let mut shared: BTreeMap<(Addr, Addr), f64> = BTreeMap::new();
    for users in by_addr.values() {
        let users: Vec<Addr> = users.iter().copied().collect();
        for (i, &u) in users.iter().enumerate() {
            for &v in &users[i + 1..] {
                *shared.entry((u, v)).or_insert(0.0) += 1.0;
            }
        }
    }
    if weighting == DrgWeighting::Binary {
        shared.values_mut().for_each(|w| *w = 1.0);
    }
    FunctionGraph { kind: GraphKind::DataReference, nodes: nodes.to_vec(), edges: shared }
}

/// Directed caller -> callee edges weighted by call-site count.
pub fn build_call_graph(nodes: &[Addr], sites: &[CallSite]) -> FunctionGraph {
    let node_set: BTreeSet<Addr> = nodes.iter().copied().collect();
    let mut g = FunctionGraph { kind: GraphKind::Call, nodes: nodes.to_vec(), edges: BTreeMap::new() };
    for s in sites {
        if node_set.contains(&s.caller) && node_set.contains(&s.callee) {
            g.add_weight(s.caller, s.callee, 1.0);
        }
    }
    g
}

/// Undirected `alpha*SG + beta*DRG + gamma*CG`, directions summed. The
/// result keeps the node order of `sg`.
pub fn combine(
    sg: &FunctionGraph,
    drg: &FunctionGraph,
    cg: &FunctionGraph,
    w: GraphWeights,
) -> Result<FunctionGraph, GraphError> {
    let nodes = sg.node_set();
    if drg.node_set() != nodes || cg.node_set() != nodes {
        return Err(GraphError::NodeSetMismatch);
    }
    let mut out = FunctionGraph { kind: GraphKind::Combined, nodes: sg.nodes.clone(), edges: BTreeMap::new() };
    for (g, coeff) in [(sg, w.alpha), (drg, w.beta), (cg, w.gamma)] {
        for (&(u, v), &weight) in &g.edges {
            out.add_weight(u, v, coeff * weight);
        }
    }
    out.edges.retain(|_, w| *w > 0.0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(entry: u64) -> FunctionRecord {
        FunctionRecord { entry: Addr(entry), end: Addr(entry + 2), name: None, thumb: true }
    }

    fn a(v: u64) -> Addr {
        Addr(v)
    }

    #[test]
    fn sequence_edges_follow_address_order() {
        let g = build_sequence_graph(&[f(0x10a0), f(0x1000), f(0x1040)], &[a(0x1000)..a(0x2000)]);
        assert!(g.directed());
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.weight(a(0x1000), a(0x1040)), 1.0);
        assert_eq!(g.weight(a(0x1040), a(0x10a0)), 1.0);
        assert_eq!(g.weight(a(0x1040), a(0x1000)), 0.0);
    }

    #[test]
    fn sequence_single_function_has_no_edges() {
        let g = build_sequence_graph(&[f(0x1000)], &[a(0x1000)..a(0x2000)]);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.nodes().len(), 1);
    }

    #[test]
    fn sequence_edges_do_not_cross_sections() {
        let fs = [f(0x1000), f(0x1010), f(0x8000), f(0x8010), f(0x8020)];
        let g = build_sequence_graph(&fs, &[a(0x1000)..a(0x2000), a(0x8000)..a(0x9000)]);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.weight(a(0x1010), a(0x8000)), 0.0);
    }

    fn dr(func: u64, data: u64) -> DataRef {
        DataRef { function: a(func), data_addr: a(data) }
    }

    #[test]
    fn drg_counts_shared_addresses() {
        let nodes = [a(1), a(2), a(3)];
        let refs = [dr(1, 0x20000), dr(2, 0x20000), dr(2, 0x20004), dr(3, 0x20008)];
        let g = build_data_reference_graph(&nodes, &refs, DrgWeighting::Count);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.weight(a(2), a(1)), 1.0);

        let refs = [dr(1, 0x20000), dr(2, 0x20000), dr(1, 0x20004), dr(2, 0x20004)];
        let g = build_data_reference_graph(&nodes, &refs, DrgWeighting::Count);
        assert_eq!(g.weight(a(1), a(2)), 2.0);
        let g = build_data_reference_graph(&nodes, &refs, DrgWeighting::Binary);
        assert_eq!(g.weight(a(1), a(2)), 1.0);

        let g = build_data_reference_graph(&nodes, &[dr(1, 4), dr(2, 8)], DrgWeighting::Count);
        assert_eq!(g.edge_count(), 0);
    }

    fn cs(caller: u64, callee: u64, site: u64) -> CallSite {
        CallSite { caller: a(caller), callee: a(callee), site: a(site) }
    }

    #[test]
    fn call_graph_counts_sites_and_drops_recursion() {
        let nodes = [a(1), a(2)];
        let g = build_call_graph(&nodes, &[cs(1, 2, 10), cs(1, 2, 12)]);
        assert_eq!(g.weight(a(1), a(2)), 2.0);
        let g = build_call_graph(&nodes, &[cs(1, 2, 10), cs(2, 1, 20)]);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.weight(a(2), a(1)), 1.0);
        let g = build_call_graph(&nodes, &[cs(1, 1, 10)]);
        assert_eq!(g.edge_count(), 0);
    }

    fn pair_graphs(sg_w: f64, cg_w: f64) -> (FunctionGraph, FunctionGraph, FunctionGraph) {
        let nodes = vec![a(1), a(2)];
        let mut sg = FunctionGraph::new(GraphKind::Sequence, nodes.clone()).unwrap();
        sg.add_weight(a(1), a(2), sg_w);
        let drg = FunctionGraph::new(GraphKind::DataReference, nodes.clone()).unwrap();
        let mut cg = FunctionGraph::new(GraphKind::Call, nodes).unwrap();
        cg.add_weight(a(1), a(2), cg_w - 1.0);
        cg.add_weight(a(2), a(1), 1.0);
        (sg, drg, cg)
    }

    #[test]
    fn combine_is_the_weighted_sum() {
        let (sg, drg, cg) = pair_graphs(1.0, 3.0);
        let g = combine(&sg, &drg, &cg, GraphWeights::default()).unwrap();
        assert!(!g.directed());
        assert_eq!(g.weight(a(2), a(1)), 4.0);
        let g = combine(&sg, &drg, &cg, GraphWeights::new(0.0, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!(g.weight(a(1), a(2)), 3.0);
        assert!(GraphWeights::new(0.0, 0.0, 0.0).is_err());
        assert!(GraphWeights::new(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn combine_rejects_mismatched_nodes() {
        let (sg, drg, _) = pair_graphs(1.0, 1.0);
        let cg = FunctionGraph::new(GraphKind::Call, vec![a(1)]).unwrap();
        assert_eq!(combine(&sg, &drg, &cg, GraphWeights::default()), Err(GraphError::NodeSetMismatch));
    }

    #[test]
    fn combine_preserves_isolated_nodes() {
        let nodes = vec![a(1), a(2), a(3)];
        let sg = build_sequence_graph(&[f(1)], &[]);
        let sg = FunctionGraph { nodes: nodes.clone(), ..sg };
        let drg = build_data_reference_graph(&nodes, &[], DrgWeighting::Count);
        let cg = build_call_graph(&nodes, &[cs(1, 2, 5)]);
        let g = combine(&sg, &drg, &cg, GraphWeights::default()).unwrap();
        assert_eq!(g.nodes(), &nodes[..]);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn weights_parse_from_cli_form() {
        let w: GraphWeights = "1, 0.5,2".parse().unwrap();
        assert_eq!(w, GraphWeights::new(1.0, 0.5, 2.0).unwrap());
        assert!("1,2".parse::<GraphWeights>().is_err());
        assert!("0,0,0".parse::<GraphWeights>().is_err());
        assert_eq!(w.to_string(), "1,0.5,2");
        assert_eq!(w.to_string().parse::<GraphWeights>().unwrap(), w);
    }

    #[test]
    fn json_round_trip() {
        let (sg, drg, cg) = pair_graphs(1.0, 3.0);
        let g = combine(&sg, &drg, &cg, GraphWeights::default()).unwrap();
        let text = serde_json::to_string(&g.to_json()).unwrap();
        assert!(text.contains("\"u\":\"0x00000001\""));
        let back = FunctionGraph::from_json(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn json_rejects_unknown_nodes() {
        let doc = GraphJson {
            kind: None,
            nodes: vec![a(1)],
            edges: vec![EdgeJson { u: a(1), v: a(2), weight: 1.0, source: "cg".into() }],
        };
        assert!(matches!(FunctionGraph::from_json(doc), Err(GraphError::UnknownNode(..))));
    }
}
