//! Graph-core properties over randomized instances: the partition
//! property, negative soundness, CSR round-trips, and pipeline
//! determinism.

use std::collections::HashSet;
use std::io::Cursor;

use mmvgae::graph::{
    build_csr, load_graph_from_reader, sample_negatives, split_edges, CorruptionSide, FeatureMap,
    MultimodalGraph, PairSet, Partition, RelationSpec, Schema, SplitRatios, TaskRole,
    DEFAULT_MAX_RETRIES,
};
use mmvgae::rng::SeedFan;
use proptest::prelude::*;

fn undirected_schema() -> Schema {
    Schema::new(vec![RelationSpec {
        name: "r".into(),
        src_type: "drug".into(),
        dst_type: "drug".into(),
        directed: false,
        role: TaskRole::Both,
    }])
    .unwrap()
}

fn graph_from_pairs(pairs: &[(u8, u8)]) -> MultimodalGraph {
    let mut text = String::new();
    for (a, b) in pairs {
        if a == b {
            continue;
        }
        text.push_str(&format!("drug\tn{a}\tr\tdrug\tn{b}\n"));
    }
    load_graph_from_reader(Cursor::new(text), "mem", &undirected_schema(), &FeatureMap::new(), false)
        .unwrap()
        .0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_every_relation(
        pairs in prop::collection::vec((0u8..40, 0u8..40), 4..150),
        seed in 0u64..1000,
    ) {
        let graph = graph_from_pairs(&pairs);
        prop_assume!(graph.edge_count() >= 4);
        let split = split_edges(&graph, &SplitRatios::default(), seed).unwrap();
        split.validate(&graph).unwrap();

        // No reverse orientation may land in another partition: storage
        // is canonical, so each undirected pair appears exactly once.
        let mut seen = HashSet::new();
        for p in Partition::ALL {
            for &e in split.per_relation[0].list(p) {
                let edge = graph.edges(0)[e];
                prop_assert!(seen.insert((edge.src.min(edge.dst), edge.src.max(edge.dst))));
            }
        }
    }

    #[test]
    fn negatives_never_hit_positives(
        pairs in prop::collection::vec((0u8..25, 0u8..25), 4..80),
        seed in 0u64..1000,
    ) {
        let graph = graph_from_pairs(&pairs);
        prop_assume!(graph.edge_count() >= 4);
        let all = PairSet::full(&graph, 0);
        let positives: Vec<(usize, usize)> =
            graph.edges(0).iter().map(|e| (e.src, e.dst)).collect();
        let negs = sample_negatives(
            "r",
            &positives,
            &all,
            graph.node_type(0).count(),
            2,
            CorruptionSide::Tail,
            &mut SeedFan::new(seed).stream("neg"),
            DEFAULT_MAX_RETRIES,
        );
        for &(s, d) in &negs {
            prop_assert!(!all.contains(s, d));
        }
    }

    #[test]
    fn csr_round_trip_and_normalization(
        pairs in prop::collection::vec((0u8..30, 0u8..30), 1..100),
    ) {
        let graph = graph_from_pairs(&pairs);
        prop_assume!(graph.edge_count() >= 1);
        let csr = build_csr(&graph, 0, graph.edges(0)).unwrap();
        csr.validate().unwrap();
        prop_assert!(csr.coeffs.iter().all(|&c| c > 0.0 && c <= 1.0));

        let mut recovered: Vec<(usize, usize)> = csr
            .message_arcs()
            .into_iter()
            .filter(|&(r, c)| r < c)
            .collect();
        recovered.sort_unstable();
        let mut expected: Vec<(usize, usize)> =
            graph.edges(0).iter().map(|e| (e.src, e.dst)).collect();
        expected.sort_unstable();
        prop_assert_eq!(recovered, expected);
    }
}

#[test]
fn load_split_sample_pipeline_is_a_pure_function_of_inputs() {
    let text = {
        let mut t = String::new();
        let mut rng = SeedFan::new(77).stream("edges");
        use rand::Rng;
        for _ in 0..60 {
            let a: u32 = rng.gen_range(0..30);
            let b: u32 = rng.gen_range(0..30);
            if a != b {
                t.push_str(&format!("drug\tn{a}\tr\tdrug\tn{b}\n"));
            }
        }
        t
    };
    let run = |seed: u64| {
        let graph = load_graph_from_reader(
            Cursor::new(text.clone()),
            "mem",
            &undirected_schema(),
            &FeatureMap::new(),
            false,
        )
        .unwrap()
        .0;
        let split = split_edges(&graph, &SplitRatios::default(), seed).unwrap();
        let positives: Vec<(usize, usize)> = split.per_relation[0]
            .train_supervision
            .iter()
            .map(|&e| {
                let ed = graph.edges(0)[e];
                (ed.src, ed.dst)
            })
            .collect();
        let negs = sample_negatives(
            "r",
            &positives,
            &PairSet::full(&graph, 0),
            graph.node_type(0).count(),
            1,
            CorruptionSide::Tail,
            &mut SeedFan::new(seed).stream("neg"),
            DEFAULT_MAX_RETRIES,
        );
        (split, negs)
    };
    let (s1, n1) = run(5);
    let (s2, n2) = run(5);
    assert_eq!(s1, s2);
    assert_eq!(n1, n2);
    let (s3, n3) = run(6);
    assert!(s1 != s3 || n1 != n3);
}
