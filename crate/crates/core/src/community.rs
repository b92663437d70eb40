//! Modularity, greedy agglomerative clustering (the fast incremental
//! formulation) and an exhaustive oracle for small graphs.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use ordered_float::OrderedFloat;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::addr::Addr;
use crate::graph::FunctionGraph;

/// Largest node count the exhaustive oracle accepts.
pub const BRUTE_FORCE_LIMIT: usize = 10;

/// Merges with a gain at or below this are treated as non-positive.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CommunityError {
    #[error("partition does not cover node {0}")]
    IncompletePartition(Addr),
    #[error("brute force supports at most {BRUTE_FORCE_LIMIT} nodes, graph has {0}")]
    TooLarge(usize),
}

/// Assignment of nodes to dense cluster ids. Ids are numbered by first
/// appearance in node order, so equal groupings compare equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    nodes: Vec<Addr>,
    assignment: Vec<usize>,
}

impl Partition {
    pub fn from_assignment(nodes: Vec<Addr>, raw: &[usize]) -> Self {
        assert_eq!(nodes.len(), raw.len(), "one label per node");
        let mut relabel = HashMap::new();
        let assignment = raw
            .iter()
            .map(|r| {
                let next = relabel.len();
                *relabel.entry(*r).or_insert(next)
            })
            .collect();
        Partition { nodes, assignment }
    }

    pub fn singletons(nodes: Vec<Addr>) -> Self {
        let raw: Vec<usize> = (0..nodes.len()).collect();
        Partition::from_assignment(nodes, &raw)
    }

    pub fn from_clusters(clusters: &[Vec<Addr>]) -> Self {
        let mut pairs: Vec<(Addr, usize)> =
            clusters.iter().enumerate().flat_map(|(i, c)| c.iter().map(move |a| (*a, i))).collect();
        pairs.sort();
        let (nodes, raw): (Vec<Addr>, Vec<usize>) = pairs.into_iter().unzip();
        Partition::from_assignment(nodes, &raw)
    }

    pub fn nodes(&self) -> &[Addr] {
        &self.nodes
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_count(&self) -> usize {
        self.assignment.iter().max().map_or(0, |m| m + 1)
    }

    pub fn cluster_of(&self, node: Addr) -> Option<usize> {
        self.nodes.iter().position(|n| *n == node).map(|i| self.assignment[i])
    }

    pub fn clusters(&self) -> Vec<Vec<Addr>> {
        let mut out = vec![Vec::new(); self.cluster_count()];
        for (n, c) in self.nodes.iter().zip(&self.assignment) {
            out[*c].push(*n);
        }
        out
    }

    pub fn lookup(&self) -> HashMap<Addr, usize> {
        self.nodes.iter().copied().zip(self.assignment.iter().copied()).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct PartitionJson {
    clusters: BTreeMap<usize, Vec<Addr>>,
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let clusters = self.clusters().into_iter().enumerate().collect();
        PartitionJson { clusters }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = PartitionJson::deserialize(d)?;
        let clusters: Vec<Vec<Addr>> = doc.clusters.into_values().collect();
        let p = Partition::from_clusters(&clusters);
        if p.nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err(serde::de::Error::custom("node assigned to more than one cluster"));
        }
        Ok(p)
    }
}

/// Undirected weighted edge list over dense node indices.
struct Dense {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    degree: Vec<f64>,
    m: f64,
}

impl Dense {
    fn from_graph(g: &FunctionGraph) -> Self {
        let index: HashMap<Addr, usize> = g.nodes().iter().enumerate().map(|(i, a)| (*a, i)).collect();
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (&(u, v), &w) in g.edges() {
            let (i, j) = (index[&u], index[&v]);
            if i == j || w <= 0.0 {
                continue;
            }
            *merged.entry((i.min(j), i.max(j))).or_insert(0.0) += w;
        }
        let mut degree = vec![0.0; g.nodes().len()];
        let mut m = 0.0;
        let edges: Vec<_> = merged
            .into_iter()
            .map(|((i, j), w)| {
                degree[i] += w;
                degree[j] += w;
                m += w;
                (i, j, w)
            })
            .collect();
        Dense { n: g.nodes().len(), edges, degree, m }
    }

    fn modularity(&self, labels: &[usize], clusters: usize) -> f64 {
        if self.m <= 0.0 {
            return 0.0;
        }
        let mut internal = vec![0.0; clusters];
        let mut tot = vec![0.0; clusters];
        for &(i, j, w) in &self.edges {
            if labels[i] == labels[j] {
                internal[labels[i]] += w;
            }
        }
        for (i, d) in self.degree.iter().enumerate() {
            tot[labels[i]] += d;
        }
        let two_m = 2.0 * self.m;
        internal.iter().zip(&tot).map(|(l, d)| l / self.m - (d / two_m) * (d / two_m)).sum()
    }
}

/// Newman modularity of `p` on `g`; directed graphs are read with
/// directions summed. An edgeless graph scores 0.
pub fn modularity(g: &FunctionGraph, p: &Partition) -> Result<f64, CommunityError> {
    let lookup = p.lookup();
    let labels: Vec<usize> = g
        .nodes()
        .iter()
        .map(|n| lookup.get(n).copied().ok_or(CommunityError::IncompletePartition(*n)))
        .collect::<Result<_, _>>()?;
    Ok(Dense::from_graph(g).modularity(&labels, p.cluster_count()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    /// Surviving cluster (the lower id).
    pub into: usize,
    pub absorbed: usize,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringRun {
    pub partition: Partition,
    /// Modularity as accumulated by the merge sequence.
    pub q: f64,
    pub merges: Vec<Merge>,
}

pub fn cluster_newman(g: &FunctionGraph) -> Partition {
    cluster_newman_traced(g).partition
}

/// Greedy agglomeration from singletons, always taking the largest gain
/// `dQ = 2 (e_ij - a_i a_j)` and stopping when no merge has positive gain.
/// Equal gains go to the pair with the lowest smaller id, then the lowest
/// larger id; ids are node indices and a merged cluster keeps the lower one.
pub fn cluster_newman_traced(g: &FunctionGraph) -> ClusteringRun {
    let dense = Dense::from_graph(g);
    let n = dense.n;
    let mut labels: Vec<usize> = (0..n).collect();
    if dense.m <= 0.0 {
        return ClusteringRun {
            partition: Partition::from_assignment(g.nodes().to_vec(), &labels),
            q: 0.0,
            merges: Vec::new(),
        };
    }

    let two_m = 2.0 * dense.m;
    let mut a: Vec<f64> = dense.degree.iter().map(|d| d / two_m).collect();
    // e[i][j]: half the fraction of edge weight between clusters i and j.
    let mut e: Vec<HashMap<usize, f64>> = vec![HashMap::new(); n];
    for &(i, j, w) in &dense.edges {
        let x = w / two_m;
        *e[i].entry(j).or_insert(0.0) += x;
        *e[j].entry(i).or_insert(0.0) += x;
    }
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut alive = vec![true; n];
    let mut version = vec![0u32; n];

    type Entry = (OrderedFloat<f64>, Reverse<usize>, Reverse<usize>, u32, u32);
    let mut heap: BinaryHeap<Entry> = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<Entry>, i: usize, j: usize, eij: f64, a: &[f64], version: &[u32]| {
        let (lo, hi) = (i.min(j), i.max(j));
        let gain = 2.0 * (eij - a[lo] * a[hi]);
        heap.push((OrderedFloat(gain), Reverse(lo), Reverse(hi), version[lo], version[hi]));
    };
    for (i, row) in e.iter().enumerate() {
        for (&j, &eij) in row {
            if i < j {
                push(&mut heap, i, j, eij, &a, &version);
            }
        }
    }

    let mut q: f64 = -a.iter().map(|x| x * x).sum::<f64>();
    let mut merges = Vec::new();
    while let Some((OrderedFloat(gain), Reverse(lo), Reverse(hi), vlo, vhi)) = heap.pop() {
        if !alive[lo] || !alive[hi] || version[lo] != vlo || version[hi] != vhi {
            continue;
        }
        if gain <= MIN_GAIN {
            break;
        }
        let absorbed = std::mem::take(&mut e[hi]);
        let mut kept = std::mem::take(&mut e[lo]);
        kept.remove(&hi);
        for (k, x) in absorbed {
            if k == lo {
                continue;
            }
            *kept.entry(k).or_insert(0.0) += x;
            let ek = &mut e[k];
            ek.remove(&hi);
            *ek.entry(lo).or_insert(0.0) += x;
        }
        e[lo] = kept;
        a[lo] += a[hi];
        a[hi] = 0.0;
        alive[hi] = false;
        version[lo] += 1;
        let moved = std::mem::take(&mut members[hi]);
        members[lo].extend(moved);
        q += gain;
        merges.push(Merge { into: lo, absorbed: hi, gain });
        let neighbours: Vec<(usize, f64)> = e[lo].iter().map(|(k, x)| (*k, *x)).collect();
        for (k, x) in neighbours {
            push(&mut heap, lo, k, x, &a, &version);
        }
    }

    for (id, ms) in members.iter().enumerate() {
        for &m in ms {
            labels[m] = id;
        }
    }
    ClusteringRun { partition: Partition::from_assignment(g.nodes().to_vec(), &labels), q, merges }
}

/// Exhaustive search over all set partitions (restricted growth strings).
/// Ties go to fewer clusters, then the lexicographically first assignment.
pub fn brute_force_best_partition(g: &FunctionGraph) -> Result<Partition, CommunityError> {
    let n = g.nodes().len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(CommunityError::TooLarge(n));
    }
    let dense = Dense::from_graph(g);
    if n == 0 {
        return Ok(Partition::from_assignment(Vec::new(), &[]));
    }
    let mut rgs = vec![0usize; n];
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    loop {
        let k = rgs.iter().max().map_or(0, |m| m + 1);
        let q = dense.modularity(&rgs, k);
        let better = match &best {
            None => true,
            Some((bq, bk, _)) => q > bq + MIN_GAIN || ((q - bq).abs() <= MIN_GAIN && k < *bk),
        };
        if better {
            best = Some((q, k, rgs.clone()));
        }
        if !next_rgs(&mut rgs) {
            break;
        }
    }
    let (_, _, labels) = best.expect("at least one partition");
    Ok(Partition::from_assignment(g.nodes().to_vec(), &labels))
}

/// Advances a restricted growth string in lexicographic order.
fn next_rgs(rgs: &mut [usize]) -> bool {
    let n = rgs.len();
    for i in (1..n).rev() {
        let prefix_max = rgs[..i].iter().max().copied().unwrap_or(0);
        if rgs[i] <= prefix_max {
            rgs[i] += 1;
            rgs[i + 1..].iter_mut().for_each(|x| *x = 0);
            return true;
        }
    }
    false
}
