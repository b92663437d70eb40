use std::collections::{BTreeMap, BTreeSet};

use approx::assert_abs_diff_eq;
use firmod_core::category::{Category, ModulePrediction};
use firmod_core::corpus::GroundTruthCategories;
use firmod_core::evaluation::{category_metrics, cosine, weighted_metrics, EvalError, ModuleMatch, ScoredPrediction};
use firmod_testkit::{random_match_counts, random_vector, rng};
use rand::seq::SliceRandom;
use rand::Rng;

fn matches(counts: &[(usize, usize, usize)]) -> Vec<ModuleMatch> {
    counts
        .iter()
        .enumerate()
        .map(|(i, &(tp, fp, fn_))| ModuleMatch::from_counts(format!("m{i}"), Some(i), tp, fp, fn_))
        .collect()
}

fn naive(counts: &[(usize, usize, usize)]) -> (f64, f64, f64) {
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let mut sums = (0.0, 0.0, 0.0);
    let mut total = 0.0;
    for &(tp, fp, fn_) in counts {
        let (tp, fp, fn_) = (tp as f64, fp as f64, fn_ as f64);
        let p = div(tp, tp + fp);
        let r = div(tp, tp + fn_);
        let f = div(2.0 * p * r, p + r);
        let n = tp + fn_;
        sums.0 += p * n;
        sums.1 += r * n;
        sums.2 += f * n;
        total += n;
    }
    (sums.0 / total, sums.1 / total, sums.2 / total)
}

#[test]
fn hand_example() {
    let r = weighted_metrics("d", matches(&[(2, 1, 1), (1, 1, 1)])).unwrap();
    assert_abs_diff_eq!(r.p_w, 0.6, epsilon = 1e-12);
    assert_eq!(r.function_count, 5);
    assert_eq!(r.module_count, 2);
}

#[test]
fn perfect_matches_score_one() {
    let r = weighted_metrics("d", matches(&[(4, 0, 0), (7, 0, 0)])).unwrap();
    assert_eq!((r.p_w, r.r_w, r.f1_w), (1.0, 1.0, 1.0));
}

#[test]
fn empty_ground_truth_is_an_error() {
    assert!(matches!(weighted_metrics("d", vec![]), Err(EvalError::EmptyGroundTruth)));
}

#[test]
fn agrees_with_naive_recomputation() {
    let mut r = rng(11);
    for _ in 0..1000 {
        let counts = random_match_counts(&mut r);
        let got = weighted_metrics("d", matches(&counts)).unwrap();
        let want = naive(&counts);
        assert_abs_diff_eq!(got.p_w, want.0, epsilon = 1e-9);
        assert_abs_diff_eq!(got.r_w, want.1, epsilon = 1e-9);
        assert_abs_diff_eq!(got.f1_w, want.2, epsilon = 1e-9);
    }
}

#[test]
fn order_of_matches_does_not_matter() {
    let mut r = rng(12);
    for _ in 0..200 {
        let mut counts = random_match_counts(&mut r);
        let a = weighted_metrics("d", matches(&counts)).unwrap();
        counts.shuffle(&mut r);
        let b = weighted_metrics("d", matches(&counts)).unwrap();
        assert_abs_diff_eq!(a.p_w, b.p_w, epsilon = 1e-12);
        assert_abs_diff_eq!(a.r_w, b.r_w, epsilon = 1e-12);
        assert_abs_diff_eq!(a.f1_w, b.f1_w, epsilon = 1e-12);
    }
}

#[test]
fn equal_precision_and_recall_give_equal_weighted_values() {
    let mut r = rng(13);
    for _ in 0..200 {
        let counts: Vec<_> = (0..r.gen_range(1..10))
            .map(|_| {
                let tp = r.gen_range(0..20);
                let e = r.gen_range(if tp == 0 { 1 } else { 0 }..20);
                (tp, e, e)
            })
            .collect();
        let rep = weighted_metrics("d", matches(&counts)).unwrap();
        assert_abs_diff_eq!(rep.p_w, rep.r_w, epsilon = 1e-12);
    }
}

#[test]
fn category_counts_are_conserved() {
    let mut r = rng(14);
    let mut gt = GroundTruthCategories::default();
    let mut preds = Vec::new();
    for i in 0..50 {
        let mut cats = Category::ALL.to_vec();
        cats.shuffle(&mut r);
        let truth: BTreeSet<Category> = cats[..r.gen_range(1..=3)].iter().copied().collect();
        cats.shuffle(&mut r);
        let k = r.gen_range(1..=5);
        let name = format!("m{i}");
        gt.mapping.insert(name.clone(), truth);
        preds.push(ScoredPrediction {
            gt_module: name,
            prediction: ModulePrediction { module: i, selected: cats[..k].to_vec(), k },
        });
    }
    let rep = category_metrics(&preds, &gt).unwrap();
    assert_eq!(rep.modules, 50);
    let selected: usize = preds.iter().map(|p| p.prediction.k).sum();
    let truths: usize = gt.mapping.values().map(BTreeSet::len).sum();
    assert_eq!(rep.per_category.values().map(|s| s.tp + s.fp).sum::<usize>(), selected);
    assert_eq!(rep.per_category.values().map(|s| s.tp + s.fn_).sum::<usize>(), truths);
    assert!(rep.per_category.values().all(|s| (0.0..=1.0).contains(&s.f1)));
}

#[test]
fn category_without_members_or_predictions_is_zero() {
    let gt =
        GroundTruthCategories { mapping: BTreeMap::from([("m".to_string(), BTreeSet::from([Category::Controller]))]) };
    let preds = [ScoredPrediction {
        gt_module: "m".into(),
        prediction: ModulePrediction { module: 0, selected: vec![Category::Controller], k: 1 },
    }];
    let rep = category_metrics(&preds, &gt).unwrap();
    let safety = rep.per_category[&Category::SafetyCheck];
    assert_eq!((safety.precision, safety.recall, safety.f1), (0.0, 0.0, 0.0));
    assert_eq!(rep.per_category[&Category::Controller].f1, 1.0);
}

#[test]
fn cosine_identity_orthogonality_and_scale() {
    let mut r = rng(15);
    for _ in 0..500 {
        let dim = r.gen_range(2..64);
        let u = random_vector(&mut r, dim);
        assert_abs_diff_eq!(cosine(&u, &u).unwrap(), 1.0, epsilon = 1e-9);
        let v = random_vector(&mut r, dim);
        let c = r.gen_range(0.001..1000.0);
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        assert_abs_diff_eq!(cosine(&u, &v).unwrap(), cosine(&u, &scaled).unwrap(), epsilon = 1e-9);
        assert_abs_diff_eq!(cosine(&u, &v).unwrap(), cosine(&v, &u).unwrap(), epsilon = 1e-12);
    }
    let mut e0 = vec![0.0; 8];
    let mut e1 = vec![0.0; 8];
    e0[2] = 3.5;
    e1[5] = -2.0;
    assert_eq!(cosine(&e0, &e1).unwrap(), 0.0);
    assert!(matches!(cosine(&e0, &[0.0; 8]), Err(EvalError::ZeroVector)));
    assert!(matches!(cosine(&e0, &[1.0]), Err(EvalError::DimensionMismatch(8, 1))));
}
