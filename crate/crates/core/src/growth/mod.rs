//! Simulation of PA growth processes and exact log-probabilities of
//! recursive trees and histories.

mod kernel;

pub use kernel::AttachmentKernel;

use rand::Rng;
use thiserror::Error;

use crate::fenwick::Fenwick;
use crate::tree::{LabeledTree, NO_PARENT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrowthError {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("kernel syntax: {0}")]
    KernelSyntax(String),
    #[error("tree size must be at least 1")]
    EmptyTree,
    #[error("total attachment weight is zero at step {step}; growth stalled")]
    ZeroTotalWeight { step: usize },
    #[error("closed form normalizer is not positive at step {step}")]
    NonPositiveNormalizer { step: usize },
    #[error("not a recursive tree: node {node} has parent {parent}")]
    NotRecursive { node: usize, parent: usize },
    #[error("ordering is not a history: position {position} is not adjacent to an earlier node")]
    NotAHistory { position: usize },
    #[error("ordering is not a permutation of the tree's nodes")]
    NotAPermutation,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A recursive tree: the complete growth history of a simulated tree.
///
/// Node `k` (1-based arrival time) has parent `parent(k) < k`; node 1 is the
/// root and `parent(1) = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrownTree {
    /// `parents[k - 1]` is the parent of node `k`.
    parents: Vec<usize>,
}

impl GrownTree {
    /// Validates the recursive-tree property on a 1-based parent array.
    pub fn from_parents(parents: Vec<usize>) -> Result<Self, GrowthError> {
        if parents.is_empty() {
            return Err(GrowthError::EmptyTree);
        }
        for (i, &p) in parents.iter().enumerate() {
            let k = i + 1;
            let ok = if k == 1 { p == 0 } else { p >= 1 && p < k };
            if !ok {
                return Err(GrowthError::NotRecursive { node: k, parent: p });
            }
        }
        Ok(GrownTree { parents })
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    /// Parent of node `k` (1-based); 0 for the root.
    #[inline]
    pub fn parent(&self, k: usize) -> usize {
        self.parents[k - 1]
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    /// Final degree of each node, indexed by `k - 1`.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.len()];
        for (i, &p) in self.parents.iter().enumerate().skip(1) {
            deg[i] += 1;
            deg[p - 1] += 1;
        }
        deg
    }

    /// The tree with node `k` labeled by `labels[k - 1]`.
    pub fn to_labeled_tree_with(&self, labels: Vec<String>) -> LabeledTree {
        let parents: Vec<usize> = self
            .parents
            .iter()
            .map(|&p| if p == 0 { NO_PARENT } else { p - 1 })
            .collect();
        LabeledTree::from_parents(&parents, labels)
    }

    /// The tree labeled by arrival time (`"1"`, `"2"`, ...), so that internal
    /// index `k - 1` is node `k`.
    pub fn to_labeled_tree(&self) -> LabeledTree {
        self.to_labeled_tree_with((1..=self.len()).map(|k| k.to_string()).collect())
    }

    /// Text form: line `k` holds `parent(k)`.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.len() * 8);
        for p in &self.parents {
            out.push_str(&p.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self, GrowthError> {
        let parents = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim().parse::<usize>().map_err(|_| GrowthError::Parse {
                    line: i + 1,
                    message: format!("expected a parent index, found `{}`", l.trim()),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_parents(parents)
    }
}

/// Grows a tree of `n` nodes under `kernel`.
///
/// Each new node picks its parent with probability proportional to
/// `phi(degree)`, using a Fenwick tree over node weights: `O(log n)` per step.
pub fn grow<R: Rng + ?Sized>(
    kernel: &AttachmentKernel,
    n: usize,
    rng: &mut R,
) -> Result<GrownTree, GrowthError> {
    kernel.validate()?;
    if n == 0 {
        return Err(GrowthError::EmptyTree);
    }
    let mut parents = Vec::with_capacity(n);
    parents.push(0);
    if n == 1 {
        return Ok(GrownTree { parents });
    }
    parents.push(1);
    let mut degree = vec![0usize; n];
    degree[0] = 1;
    degree[1] = 1;
    let mut weights = Fenwick::zeros(n);
    weights.set(0, kernel.weight(1));
    weights.set(1, kernel.weight(1));
    for k in 3..=n {
        let total = weights.total();
        if total.is_nan() || total <= 0.0 {
            return Err(GrowthError::ZeroTotalWeight { step: k });
        }
        let chosen = loop {
            let target = rng.random::<f64>() * total;
            let i = weights.search(target);
            // Rounding can land on a zero-weight boundary; redraw.
            if i < k - 1 && weights.weight(i) > 0.0 {
                break i;
            }
        };
        degree[chosen] += 1;
        weights.set(chosen, kernel.weight(degree[chosen]));
        degree[k - 1] = 1;
        weights.set(k - 1, kernel.weight(1));
        parents.push(chosen + 1);
    }
    Ok(GrownTree { parents })
}

/// `log P(T_n = t)` by replaying the growth of `t` under `kernel`.
///
/// The step `k = 2` is forced and contributes nothing. A tree that the
/// kernel cannot produce has log-probability `-inf`.
pub fn recursive_tree_log_probability(kernel: &AttachmentKernel, t: &GrownTree) -> f64 {
    let n = t.len();
    if n <= 2 {
        return 0.0;
    }
    let mut degree = vec![0usize; n];
    degree[0] = 1;
    degree[1] = 1;
    let mut total = 2.0 * kernel.weight(1);
    let mut log_p = 0.0;
    for k in 3..=n {
        let p = t.parent(k) - 1;
        let w = kernel.weight(degree[p]);
        if w.is_nan() || w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        log_p += w.ln() - total.ln();
        degree[p] += 1;
        total += kernel.weight(degree[p]) - w + kernel.weight(1);
        degree[k - 1] = 1;
    }
    log_p
}

/// Closed form of `log P(T_n = t)` for `phi(d) = alpha + beta d`:
///
/// `prod_{k=3..n} 1 / ((k-1) alpha + 2 (k-2) beta)` times
/// `prod_v prod_{i=1..deg(v)-1} (alpha + i beta)`.
///
/// The forced second step is left out of both products so that `alpha = 0`
/// (linear attachment) is covered. A vanishing degree factor yields `-inf`.
pub fn affine_closed_form_log_probability(
    alpha: f64,
    beta: f64,
    t: &GrownTree,
) -> Result<f64, GrowthError> {
    let n = t.len();
    let mut log_p = 0.0;
    for k in 3..=n {
        let z = (k - 1) as f64 * alpha + 2.0 * (k - 2) as f64 * beta;
        if z.is_nan() || z <= 0.0 {
            return Err(GrowthError::NonPositiveNormalizer { step: k });
        }
        log_p -= z.ln();
    }
    for d in t.degrees() {
        for i in 1..d {
            let f = alpha + i as f64 * beta;
            if f.is_nan() || f <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            log_p += f.ln();
        }
    }
    Ok(log_p)
}

/// Parent array (1-based arrival times) of the recursive tree obtained by
/// numbering the nodes of `tree` in the order given.
pub fn ordering_to_grown_tree(tree: &LabeledTree, ordering: &[usize]) -> Result<GrownTree, GrowthError> {
    let n = tree.len();
    if ordering.len() != n {
        return Err(GrowthError::NotAPermutation);
    }
    let mut arrival = vec![usize::MAX; n];
    for (i, &v) in ordering.iter().enumerate() {
        if v >= n || arrival[v] != usize::MAX {
            return Err(GrowthError::NotAPermutation);
        }
        arrival[v] = i;
    }
    let mut parents = Vec::with_capacity(n);
    parents.push(0);
    for (i, &v) in ordering.iter().enumerate().skip(1) {
        let mut earlier = tree.neighbors(v).iter().filter(|&&w| arrival[w] < i);
        match (earlier.next(), earlier.next()) {
            (Some(&w), None) => parents.push(arrival[w] + 1),
            _ => return Err(GrowthError::NotAHistory { position: i + 1 }),
        }
    }
    Ok(GrownTree { parents })
}

/// Log joint probability of the history `ordering` of `tree` (node indices,
/// first arrival first). The uniform `1/n!` relabeling factor is omitted; it
/// is the same for every history of a fixed tree.
pub fn history_log_probability(
    kernel: &AttachmentKernel,
    tree: &LabeledTree,
    ordering: &[usize],
) -> Result<f64, GrowthError> {
    let t = ordering_to_grown_tree(tree, ordering)?;
    Ok(recursive_tree_log_probability(kernel, &t))
}
