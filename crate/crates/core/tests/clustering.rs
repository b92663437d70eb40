use std::time::Instant;

use firmod_core::community::{
    brute_force_best_partition, cluster_newman, cluster_newman_traced, modularity, Partition,
};
use firmod_core::evaluation::{match_clusters, weighted_metrics, MatchMode};
use firmod_core::graph::{FunctionGraph, GraphKind};
use firmod_testkit::{node, planted_partition, random_small_graph, rng, scale_graph, PlantedSpec};
use proptest::prelude::*;

fn two_triangles() -> FunctionGraph {
    let mut g = FunctionGraph::new(GraphKind::Combined, (0..6).map(node).collect()).unwrap();
    for (u, v) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
        g.add_weight(node(u), node(v), 1.0);
    }
    g
}

#[test]
fn two_triangles_greedy_and_oracle_agree() {
    let g = two_triangles();
    let run = cluster_newman_traced(&g);
    let expected = Partition::from_clusters(&[(0..3).map(node).collect(), (3..6).map(node).collect()]);
    assert_eq!(run.partition, expected);
    assert!((run.q - 0.5).abs() < 1e-9);
    assert_eq!(brute_force_best_partition(&g).unwrap(), expected);
}

#[test]
fn greedy_never_beats_the_oracle() {
    let mut r = rng(7);
    let mut close = 0;
    for _ in 0..100 {
        let g = random_small_graph(&mut r, 8);
        let greedy = modularity(&g, &cluster_newman(&g)).unwrap();
        let best = modularity(&g, &brute_force_best_partition(&g).unwrap()).unwrap();
        assert!(greedy <= best + 1e-9, "greedy {greedy} > oracle {best}");
        if greedy >= 0.8 * best {
            close += 1;
        }
    }
    assert!(close >= 90, "only {close}/100 within 80% of optimum");
}

#[test]
fn planted_partition_is_recovered() {
    let (g, gt) = planted_partition(PlantedSpec::default());
    let p = cluster_newman(&g);
    let report = weighted_metrics("planted", match_clusters(&p, &gt, MatchMode::MaxOverlap).unwrap()).unwrap();
    assert!(report.f1_w >= 0.9, "F1_w = {}", report.f1_w);
}

#[test]
fn scale_graph_clusters_quickly() {
    let g = scale_graph(2024, 8_500, 40_000);
    assert_eq!(g.edge_count(), 40_000);
    let start = Instant::now();
    let run = cluster_newman_traced(&g);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}");
    let q = modularity(&g, &run.partition).unwrap();
    assert!((q - run.q).abs() < 1e-6);
    assert!(run.partition.cluster_count() > 1);
}

#[test]
fn clustering_is_deterministic() {
    let (g, _) = planted_partition(PlantedSpec { seed: 3, ..Default::default() });
    assert_eq!(cluster_newman_traced(&g), cluster_newman_traced(&g));
}

fn arb_graph() -> impl Strategy<Value = FunctionGraph> {
    (1usize..12).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        proptest::collection::vec(proptest::option::weighted(0.4, 0.01f64..5.0), pairs).prop_map(move |ws| {
            let mut g = FunctionGraph::new(GraphKind::Combined, (0..n).map(node).collect()).unwrap();
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if let Some(w) = ws[k] {
                        g.add_weight(node(i), node(j), w);
                    }
                    k += 1;
                }
            }
            g
        })
    })
}

proptest! {
    #[test]
    fn reported_q_is_the_partition_modularity(g in arb_graph()) {
        let run = cluster_newman_traced(&g);
        let q = modularity(&g, &run.partition).unwrap();
        prop_assert!((q - run.q).abs() < 1e-9);
        prop_assert!(run.merges.iter().all(|m| m.gain > 0.0));
        prop_assert!((-0.5 - 1e-12..=1.0).contains(&q));
    }

    #[test]
    fn partitions_cover_every_node_once(g in arb_graph()) {
        let p = cluster_newman(&g);
        prop_assert_eq!(p.nodes(), g.nodes());
        let clusters = p.clusters();
        prop_assert!(clusters.iter().all(|c| !c.is_empty()));
        prop_assert_eq!(clusters.iter().map(Vec::len).sum::<usize>(), g.nodes().len());
    }

    #[test]
    fn single_cluster_has_zero_modularity(g in arb_graph()) {
        let all = Partition::from_assignment(g.nodes().to_vec(), &vec![0; g.nodes().len()]);
        prop_assert!(modularity(&g, &all).unwrap().abs() < 1e-9);
    }
}

#[test]
fn isolated_nodes_stay_singletons() {
    let mut g = FunctionGraph::new(GraphKind::Combined, (0..5).map(node).collect()).unwrap();
    g.add_weight(node(0), node(1), 1.0);
    g.add_weight(node(1), node(2), 1.0);
    let p = cluster_newman(&g);
    let c3 = p.cluster_of(node(3)).unwrap();
    let c4 = p.cluster_of(node(4)).unwrap();
    assert_ne!(c3, c4);
    assert_eq!(p.clusters()[c3], vec![node(3)]);
}
