use proptest::prelude::*;
use rand::seq::SliceRandom;

use tree_history::growth::{affine_closed_form_log_probability, grow, recursive_tree_log_probability};
use tree_history::oracle;
use tree_history::root::{confidence_set, confidence_set_equivalence_aware, log_hist_counts};
use tree_history::sampling::{is_history, HistorySampler, SamplerKind};
use tree_history::{rng, AttachmentKernel, LabeledTree};

fn random_tree(n: usize, seed: u64) -> LabeledTree {
    oracle::random_tree(n, &mut rng::seeded(seed))
}

/// The same tree with shuffled edge order and orientation and fresh labels.
fn relabeled(t: &LabeledTree, seed: u64) -> (LabeledTree, Vec<String>) {
    let mut r = rng::seeded(seed);
    let mut names: Vec<String> = (0..t.len()).map(|i| format!("v{i}")).collect();
    names.shuffle(&mut r);
    let mut edges: Vec<(String, String)> = t.edges().map(|(a, b)| (names[a].clone(), names[b].clone())).collect();
    edges.shuffle(&mut r);
    for e in edges.iter_mut() {
        if rand::Rng::random::<bool>(&mut r) {
            std::mem::swap(&mut e.0, &mut e.1);
        }
    }
    (LabeledTree::from_edge_list(&edges).unwrap(), names)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posterior_is_labeling_equivariant(n in 2usize..60, seed in any::<u64>(), perm in any::<u64>()) {
        let t = random_tree(n, seed);
        let (u, names) = relabeled(&t, perm);
        let a = log_hist_counts(&t);
        let b = log_hist_counts(&u);
        for v in 0..n {
            let w = u.index_of(&names[v]).unwrap();
            let tol = 1e-9 * a.log_hist(v).abs().max(1.0);
            prop_assert!((a.log_hist(v) - b.log_hist(w)).abs() <= tol);
            prop_assert!((a.prob(v) - b.prob(w)).abs() <= 1e-9);
        }
        for eps in [0.05, 0.2, 0.5] {
            let sa: Vec<&str> = {
                let mut s: Vec<&str> = confidence_set(&a, eps).nodes.iter().map(|&v| names[v].as_str()).collect();
                s.sort();
                s
            };
            let mut sb = confidence_set(&b, eps).labels(&u);
            sb.sort();
            prop_assert_eq!(sa, sb);
        }
    }

    #[test]
    fn posterior_is_normalized_and_sets_reach_level(n in 1usize..200, seed in any::<u64>(), eps in 0.01f64..0.99) {
        let t = random_tree(n, seed);
        let post = log_hist_counts(&t);
        let total: f64 = (0..n).map(|v| post.prob(v)).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        let set = confidence_set(&post, eps);
        let mass: f64 = set.nodes.iter().map(|&v| post.prob(v)).sum();
        prop_assert!(mass >= 1.0 - eps - 1e-9);
        prop_assert!((mass - set.achieved_mass).abs() < 1e-9);
        let wide = confidence_set_equivalence_aware(&post, &t, eps);
        for v in &set.nodes {
            prop_assert!(wide.contains(*v));
        }
        let classes = t.equivalence_classes();
        for v in 0..n {
            for w in 0..n {
                if classes.class_of[v] == classes.class_of[w] {
                    prop_assert_eq!(wide.contains(v), wide.contains(w));
                }
            }
        }
    }

    #[test]
    fn samplers_emit_histories(n in 1usize..120, seed in any::<u64>()) {
        let t = random_tree(n, seed);
        let post = log_hist_counts(&t);
        let s = HistorySampler::new(&t, &post);
        let mut r = rng::seeded(seed ^ 1);
        for kind in [SamplerKind::Forward, SamplerKind::Fast, SamplerKind::Backward] {
            let h = s.sample(kind, &mut r);
            prop_assert!(is_history(&t, &h.ordering));
        }
    }

    #[test]
    fn affine_closed_form_matches_replay(n in 2usize..200, seed in any::<u64>(), alpha in 0.0f64..3.0, beta in 0.0f64..3.0) {
        prop_assume!(alpha + beta > 0.1);
        let k = AttachmentKernel::Affine { alpha, beta };
        let g = grow(&k, n, &mut rng::seeded(seed)).unwrap();
        let replay = recursive_tree_log_probability(&k, &g);
        let closed = affine_closed_form_log_probability(alpha, beta, &g).unwrap();
        prop_assert!((replay - closed).abs() <= 1e-8 * replay.abs().max(1.0), "{} vs {}", replay, closed);
    }
}

#[test]
fn anchor_choice_does_not_matter() {
    // Same tree, each node in turn placed first in the edge list.
    let t = random_tree(40, 11);
    let base = log_hist_counts(&t);
    for anchor in 0..t.len() {
        let mut edges: Vec<(String, String)> = t
            .edges()
            .map(|(a, b)| (t.label(a).to_string(), t.label(b).to_string()))
            .collect();
        let first = edges.iter().position(|(a, b)| a == t.label(anchor) || b == t.label(anchor)).unwrap();
        edges.swap(0, first);
        if edges[0].1 == t.label(anchor) {
            let e = &mut edges[0];
            std::mem::swap(&mut e.0, &mut e.1);
        }
        let u = LabeledTree::from_edge_list(&edges).unwrap();
        assert_eq!(u.label(0), t.label(anchor));
        let post = log_hist_counts(&u);
        for v in 0..t.len() {
            let w = u.index_of(t.label(v)).unwrap();
            assert!((base.log_prob(v) - post.log_prob(w)).abs() < 1e-9);
        }
    }
}

#[test]
fn million_node_path_is_stable() {
    let n = 1_000_000;
    let parents: Vec<usize> = (0..n).map(|i| if i == 0 { usize::MAX } else { i - 1 }).collect();
    let t = LabeledTree::from_parents(&parents, (0..n).map(|i| i.to_string()).collect());
    let post = log_hist_counts(&t);
    // End nodes have exactly one history; the total is 2^(n-1). The end
    // value is a difference of two sums near log((n-1)!).
    let scale = tree_history::logmath::LogFactorials::up_to(n).get(n - 1);
    assert!(post.log_hist(0).abs() < 1e-12 * scale);
    let total = post.total_log_hist();
    assert!((total - (n as f64 - 1.0) * 2f64.ln()).abs() < 1e-6 * total);
    let sum: f64 = (0..n).map(|v| post.prob(v)).sum();
    assert!((sum - 1.0).abs() < 1e-9);
}
