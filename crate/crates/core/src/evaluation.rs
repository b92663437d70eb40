//! Scoring against ground truth: size-weighted modularization metrics,
//! per-category retrieval metrics and summary cosine similarity.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::addr::Addr;
use crate::category::{Category, ModulePrediction};
use crate::community::Partition;
use crate::corpus::{GroundTruthCategories, GroundTruthModules};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("ground-truth function {0} is not in the partition")]
    UncoveredFunction(Addr),
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("no ground-truth categories for module {0}")]
    MissingGroundTruth(String),
    #[error("cosine of a zero vector")]
    ZeroVector,
    #[error("vector lengths differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Each ground-truth module takes the cluster it overlaps most; several
    /// modules may share a cluster.
    #[default]
    MaxOverlap,
    /// Greedy one-to-one assignment by descending overlap.
    OneToOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleMatch {
    pub gt_module: String,
    pub predicted_cluster: Option<usize>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
    pub n: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl ModuleMatch {
    /// Builds a match from raw counts; `n` is `tp + fn`.
    pub fn from_counts(
        gt_module: impl Into<String>,
        predicted_cluster: Option<usize>,
        tp: usize,
        fp: usize,
        fn_: usize,
    ) -> Self {
        let p = ratio(tp, tp + fp);
        let r = ratio(tp, tp + fn_);
        ModuleMatch {
            gt_module: gt_module.into(),
            predicted_cluster,
            tp,
            fp,
            fn_,
            p,
            r,
            f1: harmonic(p, r),
            n: tp + fn_,
        }
    }
}

/// Matches every ground-truth module to a predicted cluster. False
/// positives only count functions that carry a ground-truth label.
pub fn match_clusters(
    predicted: &Partition,
    gt: &GroundTruthModules,
    mode: MatchMode,
) -> Result<Vec<ModuleMatch>, EvalError> {
    let lookup = predicted.lookup();
    // cluster -> number of ground-truth-covered members
    let mut covered: BTreeMap<usize, usize> = BTreeMap::new();
    for a in gt.mapping.keys() {
        let c = *lookup.get(a).ok_or(EvalError::UncoveredFunction(*a))?;
        *covered.entry(c).or_default() += 1;
    }
    let modules = gt.modules();
    // module -> cluster -> overlap
    let overlaps: Vec<(&str, usize, BTreeMap<usize, usize>)> = modules
        .iter()
        .map(|(name, members)| {
            let mut o = BTreeMap::new();
            for a in members {
                *o.entry(lookup[a]).or_default() += 1;
            }
            (*name, members.len(), o)
        })
        .collect();

    let assigned: Vec<Option<usize>> = match mode {
        MatchMode::MaxOverlap => overlaps
            .iter()
            .map(|(_, _, o)| o.iter().max_by(|(ca, na), (cb, nb)| na.cmp(nb).then(cb.cmp(ca))).map(|(c, _)| *c))
            .collect(),
        MatchMode::OneToOne => {
            let mut pairs: Vec<(usize, usize, usize)> = overlaps
                .iter()
                .enumerate()
                .flat_map(|(mi, (_, _, o))| o.iter().map(move |(c, n)| (*n, mi, *c)))
                .collect();
            pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut out = vec![None; overlaps.len()];
            let mut used = BTreeSet::new();
            for (_, mi, c) in pairs {
                if out[mi].is_none() && !used.contains(&c) {
                    out[mi] = Some(c);
                    used.insert(c);
                }
            }
            out
        }
    };

    Ok(overlaps
        .iter()
        .zip(assigned)
        .map(|((name, n, o), cluster)| match cluster {
            Some(c) => {
                let tp = o[&c];
                let fp = covered[&c] - tp;
                ModuleMatch::from_counts(*name, Some(c), tp, fp, n - tp)
            }
            None => ModuleMatch::from_counts(*name, None, 0, 0, *n),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModularizationReport {
    pub device: String,
    /// Number of ground-truth modules.
    pub module_count: usize,
    /// Number of ground-truth functions.
    pub function_count: usize,
    pub p_w: f64,
    pub r_w: f64,
    pub f1_w: f64,
    pub matches: Vec<ModuleMatch>,
}

/// Size-weighted averages of per-module precision, recall and F1.
pub fn weighted_metrics(device: &str, matches: Vec<ModuleMatch>) -> Result<ModularizationReport, EvalError> {
    let n_f: usize = matches.iter().map(|m| m.n).sum();
    if n_f == 0 {
        return Err(EvalError::EmptyGroundTruth);
    }
    let total = n_f as f64;
    let weighted = |f: fn(&ModuleMatch) -> f64| matches.iter().map(|m| f(m) * m.n as f64).sum::<f64>() / total;
    Ok(ModularizationReport {
        device: device.to_string(),
        module_count: matches.len(),
        function_count: n_f,
        p_w: weighted(|m| m.p),
        r_w: weighted(|m| m.r),
        f1_w: weighted(|m| m.f1),
        matches,
    })
}

/// A prediction tied to the ground-truth module it is scored against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub gt_module: String,
    pub prediction: ModulePrediction,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub modules: usize,
    pub per_category: BTreeMap<Category, CategoryScore>,
}

pub fn category_metrics(
    predictions: &[ScoredPrediction],
    gt: &GroundTruthCategories,
) -> Result<CategoryReport, EvalError> {
    let mut counts: BTreeMap<Category, (usize, usize, usize)> = Category::ALL.iter().map(|c| (*c, (0, 0, 0))).collect();
    for sp in predictions {
        let truth = gt.mapping.get(&sp.gt_module).ok_or_else(|| EvalError::MissingGroundTruth(sp.gt_module.clone()))?;
        let selected: BTreeSet<Category> = sp.prediction.selected.iter().copied().collect();
        for c in Category::ALL {
            let e = counts.get_mut(&c).expect("all categories present");
            match (selected.contains(&c), truth.contains(&c)) {
                (true, true) => e.0 += 1,
                (true, false) => e.1 += 1,
                (false, true) => e.2 += 1,
                (false, false) => {}
            }
        }
    }
    let per_category = counts
        .into_iter()
        .map(|(c, (tp, fp, fn_))| {
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            (c, CategoryScore { tp, fp, fn_, precision, recall, f1: harmonic(precision, recall) })
        })
        .collect();
    Ok(CategoryReport { modules: predictions.len(), per_category })
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, EvalError> {
    if u.len() != v.len() {
        return Err(EvalError::DimensionMismatch(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(EvalError::ZeroVector);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilarityStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

impl SimilarityStats {
    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return SimilarityStats::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        SimilarityStats { count: values.len(), mean, std: var.sqrt() }
    }
}

/// Per device and model similarity cells.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub cells: BTreeMap<String, BTreeMap<String, SimilarityStats>>,
}
