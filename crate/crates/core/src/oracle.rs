//! Brute-force ground truth for small trees.
//!
//! Everything here works from first principles (explicit enumeration and
//! naive replay) so that it can check the fast algorithms elsewhere.

use std::collections::{BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;

use rand::Rng;
use thiserror::Error;

use crate::growth::AttachmentKernel;
use crate::logmath::log_sum_exp;
use crate::tree::{CanonicalCode, LabeledTree};

/// Largest tree accepted by [`enumerate_histories`].
pub const MAX_ENUMERATION: usize = 12;
/// Largest tree accepted by the kernel-dependent oracles.
pub const MAX_EXACT: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("tree has {n} nodes; exhaustive enumeration is limited to {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("every history has zero probability under the kernel")]
    NoSupport,
    #[error("unknown node index {0}")]
    UnknownNode(usize),
}

fn guard(tree: &LabeledTree, limit: usize) -> Result<(), OracleError> {
    if tree.len() > limit {
        Err(OracleError::TooLarge { n: tree.len(), limit })
    } else {
        Ok(())
    }
}

/// All histories of a tree, stored flat (`n` node indices per history).
#[derive(Debug, Clone)]
pub struct HistoryEnumeration {
    n: usize,
    flat: Vec<u8>,
    /// `by_root[v] = #hist(t, v)`.
    pub by_root: Vec<u64>,
}

impl HistoryEnumeration {
    pub fn len(&self) -> usize {
        self.flat.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn get(&self, i: usize) -> Vec<usize> {
        self.flat[i * self.n..(i + 1) * self.n].iter().map(|&v| v as usize).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    /// Index of `ordering` in enumeration order, if it is a history.
    pub fn index_map(&self) -> HashMap<Vec<usize>, usize> {
        self.iter().enumerate().map(|(i, o)| (o, i)).collect()
    }
}

fn adjacency_masks(tree: &LabeledTree) -> Vec<u32> {
    (0..tree.len())
        .map(|v| tree.neighbors(v).iter().fold(0u32, |m, &w| m | (1 << w)))
        .collect()
}

/// Depth-first extension over the frontier of the placed set.
fn extend(adj: &[u32], placed: u32, prefix: &mut Vec<u8>, out: &mut Vec<u8>) {
    let n = adj.len();
    if prefix.len() == n {
        out.extend_from_slice(prefix);
        return;
    }
    let mut frontier = 0u32;
    for (v, &a) in adj.iter().enumerate() {
        if placed & (1 << v) != 0 {
            frontier |= a;
        }
    }
    frontier &= !placed;
    for v in 0..n {
        if frontier & (1 << v) != 0 {
            prefix.push(v as u8);
            extend(adj, placed | (1 << v), prefix, out);
            prefix.pop();
        }
    }
}

fn histories_from(adj: &[u32], root: usize) -> Vec<u8> {
    let mut out = Vec::new();
    let mut prefix = vec![root as u8];
    extend(adj, 1 << root, &mut prefix, &mut out);
    out
}

/// Every ordering of the nodes whose prefixes are all connected.
pub fn enumerate_histories(tree: &LabeledTree) -> Result<HistoryEnumeration, OracleError> {
    guard(tree, MAX_ENUMERATION)?;
    let n = tree.len();
    let adj = adjacency_masks(tree);
    let mut flat = Vec::new();
    let mut by_root = vec![0u64; n];
    for (root, count) in by_root.iter_mut().enumerate() {
        let part = histories_from(&adj, root);
        *count = (part.len() / n) as u64;
        flat.extend(part);
    }
    Ok(HistoryEnumeration { n, flat, by_root })
}

/// `P(T_n = t)` for the recursive tree with 1-based parents
/// (`parents[k-1]` is the parent of node `k`), replayed naively: at every
/// step the normalizer is summed afresh over all present nodes.
pub fn naive_log_probability(kernel: &AttachmentKernel, parents: &[usize]) -> f64 {
    let n = parents.len();
    let mut degree = vec![0usize; n];
    let mut log_p = 0.0;
    for k in 2..=n {
        let p = parents[k - 1] - 1;
        if k >= 3 {
            let total: f64 = degree[..k - 1].iter().map(|&d| kernel.weight(d)).sum();
            let w = kernel.weight(degree[p]);
            if w <= 0.0 {
                return f64::NEG_INFINITY;
            }
            log_p += (w / total).ln();
        }
        degree[p] += 1;
        degree[k - 1] += 1;
    }
    log_p
}

/// 1-based parent array of the recursive tree induced by a history.
fn induced_parents(tree: &LabeledTree, ordering: &[usize]) -> Vec<usize> {
    let n = ordering.len();
    let mut arrival = vec![usize::MAX; n];
    let mut parents = Vec::with_capacity(n);
    for (i, &v) in ordering.iter().enumerate() {
        arrival[v] = i;
        let p = tree
            .neighbors(v)
            .iter()
            .map(|&w| arrival[w])
            .filter(|&a| a < i)
            .min();
        parents.push(p.map_or(0, |a| a + 1));
    }
    parents
}

/// Conditional law of the history given the shape, under `kernel`.
#[derive(Debug, Clone)]
pub struct ConditionalDistribution {
    pub histories: HistoryEnumeration,
    /// `probs[i]` is the probability of `histories.get(i)`.
    pub probs: Vec<f64>,
}

impl ConditionalDistribution {
    /// Marginal law of the first node.
    pub fn root_posterior(&self) -> Vec<f64> {
        let n = self.histories.n;
        let mut out = vec![0.0; n];
        for (i, p) in self.probs.iter().enumerate() {
            out[self.histories.flat[i * n] as usize] += p;
        }
        out
    }
}

pub fn exact_conditional_distribution(
    tree: &LabeledTree,
    kernel: &AttachmentKernel,
) -> Result<ConditionalDistribution, OracleError> {
    guard(tree, MAX_EXACT)?;
    let histories = enumerate_histories(tree)?;
    let logs: Vec<f64> = histories
        .iter()
        .map(|o| naive_log_probability(kernel, &induced_parents(tree, &o)))
        .collect();
    let norm = log_sum_exp(&logs);
    if norm == f64::NEG_INFINITY {
        return Err(OracleError::NoSupport);
    }
    let probs = logs.iter().map(|l| (l - norm).exp()).collect();
    Ok(ConditionalDistribution { histories, probs })
}

/// Distinct recursive trees (1-based parent arrays) whose rooted shape is
/// `(tree, u)`.
pub fn recursive_trees(tree: &LabeledTree, u: usize) -> Result<HashSet<Vec<usize>>, OracleError> {
    guard(tree, MAX_EXACT)?;
    if u >= tree.len() {
        return Err(OracleError::UnknownNode(u));
    }
    let n = tree.len();
    let flat = histories_from(&adjacency_masks(tree), u);
    Ok(flat
        .chunks(n)
        .map(|c| {
            let o: Vec<usize> = c.iter().map(|&v| v as usize).collect();
            induced_parents(tree, &o)
        })
        .collect())
}

/// `#recur(t, u)`.
pub fn count_recursive_trees(tree: &LabeledTree, u: usize) -> Result<usize, OracleError> {
    Ok(recursive_trees(tree, u)?.len())
}

/// `#Eq(u, t)`: the number of nodes giving the same set of recursive trees
/// as `u`, i.e. the same rooted shape.
pub fn indistinguishable_count(tree: &LabeledTree, u: usize) -> Result<usize, OracleError> {
    let mine = recursive_trees(tree, u)?;
    let mut count = 0;
    for w in 0..tree.len() {
        if recursive_trees(tree, w)? == mine {
            count += 1;
        }
    }
    Ok(count)
}

/// Likelihood of `u` being the first node:
/// `(1 / #Eq(u, t)) * sum over recursive trees with rooted shape (t, u) of
/// P(T_n = t)`.
pub fn exact_likelihood(tree: &LabeledTree, u: usize, kernel: &AttachmentKernel) -> Result<f64, OracleError> {
    let recur = recursive_trees(tree, u)?;
    let logs: Vec<f64> = recur.iter().map(|p| naive_log_probability(kernel, p)).collect();
    let eq = indistinguishable_count(tree, u)?;
    Ok(log_sum_exp(&logs).exp() / eq as f64)
}

/// Exact integer `#hist(t, v)` for all roots, by enumeration without storage.
pub fn count_histories_by_root(tree: &LabeledTree) -> Result<Vec<u64>, OracleError> {
    guard(tree, MAX_ENUMERATION)?;
    let adj = adjacency_masks(tree);
    fn count(adj: &[u32], placed: u32, full: u32) -> u64 {
        if placed == full {
            return 1;
        }
        let mut frontier = 0u32;
        for (v, &a) in adj.iter().enumerate() {
            if placed & (1 << v) != 0 {
                frontier |= a;
            }
        }
        frontier &= !placed;
        let mut total = 0;
        let mut f = frontier;
        while f != 0 {
            let v = f.trailing_zeros();
            f &= f - 1;
            total += count(adj, placed | (1 << v), full);
        }
        total
    }
    let full = if tree.is_empty() { 0 } else { u32::MAX >> (32 - tree.len()) };
    Ok((0..tree.len()).map(|r| count(&adj, 1 << r, full)).collect())
}

/// Decodes a Prüfer sequence over `0..seq.len() + 2`.
pub fn tree_from_prufer(seq: &[usize]) -> LabeledTree {
    let n = seq.len() + 2;
    let labels: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<usize>> = (0..n).filter(|&v| degree[v] == 1).map(Reverse).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let Reverse(leaf) = leaves.pop().expect("a leaf remains");
        edges.push((labels[leaf].as_str(), labels[s].as_str()));
        degree[s] -= 1;
        if degree[s] == 1 {
            leaves.push(Reverse(s));
        }
    }
    let Reverse(a) = leaves.pop().expect("two leaves remain");
    let Reverse(b) = leaves.pop().expect("two leaves remain");
    edges.push((labels[a].as_str(), labels[b].as_str()));
    LabeledTree::from_edge_list(&edges).expect("Prüfer sequences decode to trees")
}

/// A uniformly random labeled tree on `n` nodes.
pub fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> LabeledTree {
    match n {
        0 => panic!("a tree needs at least one node"),
        1 => LabeledTree::single_node("0"),
        _ => {
            let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
            tree_from_prufer(&seq)
        }
    }
}

/// One representative of every unlabeled tree on `n` nodes (`n <= 12`),
/// built by attaching a leaf anywhere on each smaller shape.
pub fn all_tree_shapes(n: usize) -> Vec<LabeledTree> {
    assert!((1..=MAX_ENUMERATION).contains(&n), "shape enumeration supports 1..={MAX_ENUMERATION} nodes");
    let mut shapes = vec![LabeledTree::single_node("0")];
    for m in 2..=n {
        let fresh = (m - 1).to_string();
        let mut seen: HashSet<CanonicalCode> = HashSet::new();
        let mut next = Vec::new();
        for t in &shapes {
            for v in 0..t.len() {
                let mut edges: Vec<(&str, &str)> = t.edges().map(|(a, b)| (t.label(a), t.label(b))).collect();
                edges.push((t.label(v), fresh.as_str()));
                let grown = LabeledTree::from_edge_list(&edges).expect("adding a leaf keeps a tree");
                if seen.insert(grown.unrooted_canonical_code()) {
                    next.push(grown);
                }
            }
        }
        shapes = next;
    }
    shapes
}
