//! Property-based invariants over graphs, canonicalization and metrics.

mod common;

use proptest::prelude::*;

use sgcanon::canon::{max_product_paths, sgc, FormulaSet};
use sgcanon::eval::iou;
use sgcanon::graph::{EdgeKey, Layout, SceneGraph, SceneObject, WeightedDigraph};
use sgcanon::jsonl;
use sgcanon::vocab::RelationVocab;

const N_REL: usize = 3;

fn vocab() -> RelationVocab {
    common::vocab_n(N_REL)
}

prop_compose! {
    fn arb_graph()(n in 2usize..8)(
        n in Just(n),
        edges in prop::collection::vec((0..n, 0..N_REL, 0..n), 0..24),
    ) -> SceneGraph {
        let v = vocab();
        let objects = (0..n).map(|_| SceneObject::new(0)).collect();
        let edges = edges
            .into_iter()
            .filter(|(i, _, j)| i != j)
            .map(|(i, r, j)| EdgeKey::new(i, r, j));
        SceneGraph::new(objects, edges, &v).unwrap()
    }
}

prop_compose! {
    fn arb_formulas()(
        transitive in prop::collection::btree_set(0..N_REL, 0..=N_REL),
        pair_flags in prop::collection::vec(any::<bool>(), N_REL * N_REL),
    ) -> FormulaSet {
        let mut converse = Vec::new();
        let mut k = 0;
        for r in 0..N_REL {
            for rc in 0..N_REL {
                if r != rc && pair_flags[k] {
                    converse.push((r, rc));
                }
                if r != rc {
                    k += 1;
                }
            }
        }
        FormulaSet::new(transitive, converse, N_REL).unwrap()
    }
}

proptest! {
    #[test]
    fn per_relation_subgraphs_partition_the_edge_set(g in arb_graph()) {
        let mut union = std::collections::BTreeSet::new();
        let mut total = 0usize;
        for r in 0..N_REL {
            let sub = g.per_relation_subgraph(r).unwrap();
            prop_assert_eq!(sub.n, g.n_nodes());
            total += sub.arcs.len();
            for (i, j) in sub.arcs {
                union.insert(EdgeKey::new(i, r, j));
            }
        }
        prop_assert_eq!(total, g.n_edges()); // pairwise disjoint
        prop_assert_eq!(&union, g.edge_set()); // union reconstructs E
    }

    #[test]
    fn jsonl_round_trip_is_identity(g in arb_graph(), with_boxes in any::<bool>()) {
        let v = vocab();
        let layout = with_boxes.then(|| {
            Layout::new(vec![[0.1, 0.2, 0.6, 0.7]; g.n_nodes()]).unwrap()
        });
        let dir = std::env::temp_dir().join("sgcanon-props");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("rt-{:?}.jsonl", std::thread::current().id()));
        let items = vec![(g, layout)];
        jsonl::write_graphs(&path, &items, &v).unwrap();
        let back = jsonl::read_graphs(&path, &v).unwrap();
        prop_assert_eq!(back, items);
    }

    #[test]
    fn reserialization_is_byte_stable(g in arb_graph()) {
        let v = vocab();
        let dir = std::env::temp_dir().join("sgcanon-props");
        std::fs::create_dir_all(&dir).unwrap();
        let p1 = dir.join(format!("s1-{:?}.jsonl", std::thread::current().id()));
        let p2 = dir.join(format!("s2-{:?}.jsonl", std::thread::current().id()));
        let items = vec![(g, None)];
        jsonl::write_graphs(&p1, &items, &v).unwrap();
        let back = jsonl::read_graphs(&p1, &v).unwrap();
        jsonl::write_graphs(&p2, &back, &v).unwrap();
        prop_assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn sgc_is_idempotent_and_monotone(g in arb_graph(), f in arb_formulas()) {
        let once = sgc(&g, &f).unwrap();
        let twice = sgc(&once, &f).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert!(g.edge_set().is_subset(once.edge_set()));
    }

    #[test]
    fn max_product_bellman_property(
        n in 2usize..6,
        weights in prop::collection::vec(0.05f64..=1.0, 0..20),
        endpoints in prop::collection::vec((0usize..6, 0usize..6), 0..20),
    ) {
        let arcs: std::collections::BTreeMap<(usize, usize), f64> = endpoints
            .into_iter()
            .zip(weights)
            .filter(|((i, j), _)| i != j && *i < n && *j < n)
            .collect();
        let g = WeightedDigraph { n, arcs };
        let t = max_product_paths(&g).unwrap();
        for i in 0..n {
            prop_assert_eq!(t.best(i, i), 1.0);
            for j in 0..n {
                let best = t.best(i, j);
                for k in 0..n {
                    prop_assert!(best >= t.best(i, k) * t.best(k, j) - 1e-12);
                }
            }
        }
    }

    #[test]
    fn iou_symmetric_and_bounded(
        a in prop::collection::vec(0.0f64..=1.0, 4),
        b in prop::collection::vec(0.0f64..=1.0, 4),
    ) {
        let a = [a[0], a[1], a[2], a[3]];
        let b = [b[0], b[1], b[2], b[3]];
        let ab = iou(&a, &b);
        prop_assert_eq!(ab, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        // non-degenerate boxes score exactly 1 against themselves
        if a[2] > a[0] && a[3] > a[1] {
            prop_assert_eq!(iou(&a, &a), 1.0);
        }
    }
}
