//! Exact uniform sampling of histories of an observed tree, and importance
//! sampling under kernels whose conditional history law is not uniform.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::fenwick::{self, Fenwick};
use crate::growth::{history_log_probability, AttachmentKernel, GrowthError};
use crate::rng;
use crate::root::{format_sig, RootPosterior};
use crate::tree::{LabeledTree, RootedTree, NO_PARENT};

/// Samples per RNG stream in parallel batches.
const CHUNK: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("no samples requested")]
    NoSamples,
    #[error("every sampled history has zero probability under the kernel")]
    ZeroTotalWeight,
    #[error(transparent)]
    Growth(#[from] GrowthError),
}

/// One history (node indices, first arrival first) with its log importance
/// weight; the weight is 0 for exact uniform draws.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySample {
    pub ordering: Vec<usize>,
    pub log_weight: f64,
}

impl HistorySample {
    pub fn labels<'a>(&self, tree: &'a LabeledTree) -> Vec<&'a str> {
        self.ordering.iter().map(|&v| tree.label(v)).collect()
    }

    /// `arrival[v]` is the 1-based arrival time of node `v`.
    pub fn arrival_times(&self) -> Vec<usize> {
        let mut t = vec![0; self.ordering.len()];
        for (i, &v) in self.ordering.iter().enumerate() {
            t[v] = i + 1;
        }
        t
    }
}

/// True iff `ordering` is a permutation of the nodes whose every prefix is
/// connected.
pub fn is_history(tree: &LabeledTree, ordering: &[usize]) -> bool {
    let n = tree.len();
    if ordering.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for (i, &v) in ordering.iter().enumerate() {
        if v >= n || seen[v] {
            return false;
        }
        if i > 0 && !tree.neighbors(v).iter().any(|&w| seen[w]) {
            return false;
        }
        seen[v] = true;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    /// Size-biased frontier extension.
    Forward,
    /// Uniform permutation repaired along ancestor chains.
    Fast,
    /// Reversed uniform leaf removal.
    Backward,
}

impl FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(SamplerKind::Forward),
            "fast" => Ok(SamplerKind::Fast),
            "backward" => Ok(SamplerKind::Backward),
            other => Err(format!("unknown sampler `{other}`; expected forward, fast or backward")),
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerKind::Forward => "forward",
            SamplerKind::Fast => "fast",
            SamplerKind::Backward => "backward",
        })
    }
}

/// Uniform history sampler for a fixed tree. Draws the first node from the
/// root posterior, then completes the history by one of three exact methods.
pub struct HistorySampler<'a> {
    tree: &'a LabeledTree,
    root_cdf: Vec<f64>,
}

impl<'a> HistorySampler<'a> {
    pub fn new(tree: &'a LabeledTree, posterior: &RootPosterior) -> Self {
        assert!(posterior.matches(tree), "posterior was computed from a different tree");
        let mut acc = 0.0;
        let root_cdf = posterior
            .log_prob_all()
            .iter()
            .map(|lp| {
                acc += lp.exp();
                acc
            })
            .collect();
        HistorySampler { tree, root_cdf }
    }

    pub fn tree(&self) -> &'a LabeledTree {
        self.tree
    }

    pub fn draw_root<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.root_cdf.last().expect("nonempty tree");
        let u = rng.random::<f64>() * total;
        self.root_cdf.partition_point(|&c| c <= u).min(self.root_cdf.len() - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, kind: SamplerKind, rng: &mut R) -> HistorySample {
        let ordering = match kind {
            SamplerKind::Forward => self.forward(rng),
            SamplerKind::Fast => self.fast(rng),
            SamplerKind::Backward => self.backward(rng),
        };
        debug_assert!(is_history(self.tree, &ordering));
        HistorySample { ordering, log_weight: 0.0 }
    }

    /// Forward sampling: after the root, each frontier node joins with
    /// probability proportional to the size of the subtree it hangs.
    pub fn forward<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let root = self.draw_root(rng);
        self.forward_from(root, rng)
    }

    pub fn forward_from<R: Rng + ?Sized>(&self, root: usize, rng: &mut R) -> Vec<usize> {
        let tree = self.tree;
        let n = tree.len();
        let rooted = tree.rooted(root);
        let mut frontier: Fenwick<u64> = Fenwick::zeros(n);
        let mut ordering = Vec::with_capacity(n);
        ordering.push(root);
        for c in rooted.children(tree, root) {
            frontier.set(c, rooted.size[c] as u64);
        }
        for k in 1..n {
            let remaining = (n - k) as u64;
            let v = frontier.search(rng.random_range(0..remaining));
            frontier.set(v, 0);
            ordering.push(v);
            for c in rooted.children(tree, v) {
                frontier.set(c, rooted.size[c] as u64);
            }
        }
        ordering
    }

    /// Permutation repair: give the non-root nodes a uniformly shuffled set
    /// of arrival times, then visit nodes parent-first and swap each node's
    /// time with the earliest time held inside its subtree. Every history has
    /// exactly `prod_v n_v` preimages, so the result is uniform.
    pub fn fast<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let root = self.draw_root(rng);
        self.fast_from(root, rng)
    }

    pub fn fast_from<R: Rng + ?Sized>(&self, root: usize, rng: &mut R) -> Vec<usize> {
        let tree = self.tree;
        let n = tree.len();
        let rooted = tree.rooted(root);
        let pre = preorder(tree, &rooted);
        let mut times: Vec<u32> = (1..n as u32).collect();
        times.shuffle(rng);
        times.insert(0, 0);
        let mut argmin = RangeArgmin::new(times);
        for (p, &v) in pre.iter().enumerate().skip(1) {
            let m = argmin.query(p, p + rooted.size[v]);
            if m != p {
                argmin.swap(p, m);
            }
        }
        let mut ordering = vec![0usize; n];
        for (p, &v) in pre.iter().enumerate() {
            ordering[argmin.value(p) as usize] = v;
        }
        ordering
    }

    /// Backward sampling: repeatedly remove a leaf other than the root with
    /// probability `#hist(t - u, root) / #hist(t, root)`; the removal order
    /// reversed is the history.
    pub fn backward<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let n = self.tree.len();
        let placed = self.backward_until(rng, |_, _| false);
        let mut ordering = Vec::with_capacity(n);
        ordering.push(placed[0]);
        ordering.extend(placed[1..].iter().rev());
        ordering
    }

    /// Backward pass with an early stop. `stop(node, arrival_time)` is called
    /// for the root (time 1) and then for each removed leaf (times `n`,
    /// `n - 1`, ...); returning true ends the pass. Returns the nodes placed
    /// so far in that order.
    pub fn backward_until<R, F>(&self, rng: &mut R, mut stop: F) -> Vec<usize>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, usize) -> bool,
    {
        let root = self.draw_root(rng);
        let mut pass = BackwardPass::new(self.tree, root);
        let n = self.tree.len();
        let mut placed = Vec::with_capacity(n);
        placed.push(root);
        if stop(root, 1) {
            return placed;
        }
        for m in (2..=n).rev() {
            let leaf = pass.remove_leaf(rng);
            placed.push(leaf);
            if stop(leaf, m) {
                break;
            }
        }
        placed
    }
}

/// Depth-first preorder of a rooted tree; each subtree is a contiguous run
/// starting at its root.
fn preorder(tree: &LabeledTree, rooted: &RootedTree) -> Vec<usize> {
    let mut pre = Vec::with_capacity(tree.len());
    let mut stack = vec![rooted.root];
    while let Some(v) = stack.pop() {
        pre.push(v);
        stack.extend(rooted.children(tree, v));
    }
    pre
}

/// Segment tree answering "position of the smallest value in a range".
struct RangeArgmin {
    width: usize,
    values: Vec<u32>,
    best: Vec<u32>,
}

impl RangeArgmin {
    fn new(values: Vec<u32>) -> Self {
        let width = values.len().next_power_of_two();
        let mut best = vec![u32::MAX; 2 * width];
        for i in 0..values.len() {
            best[width + i] = i as u32;
        }
        let mut r = RangeArgmin { width, values, best };
        for i in (1..width).rev() {
            r.best[i] = r.pick(r.best[2 * i], r.best[2 * i + 1]);
        }
        r
    }

    #[inline]
    fn pick(&self, a: u32, b: u32) -> u32 {
        match (a, b) {
            (u32::MAX, _) => b,
            (_, u32::MAX) => a,
            _ if self.values[b as usize] < self.values[a as usize] => b,
            _ => a,
        }
    }

    fn value(&self, i: usize) -> u32 {
        self.values[i]
    }

    /// Position of the minimum over `lo..hi`.
    fn query(&self, lo: usize, hi: usize) -> usize {
        let (mut l, mut r) = (lo + self.width, hi + self.width);
        let mut acc = u32::MAX;
        while l < r {
            if l & 1 == 1 {
                acc = self.pick(acc, self.best[l]);
                l += 1;
            }
            if r & 1 == 1 {
                r -= 1;
                acc = self.pick(acc, self.best[r]);
            }
            l >>= 1;
            r >>= 1;
        }
        acc as usize
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.values.swap(a, b);
        for i in [a, b] {
            let mut j = (i + self.width) >> 1;
            while j >= 1 {
                self.best[j] = self.pick(self.best[2 * j], self.best[2 * j + 1]);
                j >>= 1;
            }
        }
    }
}

/// Children of the rooted tree laid out contiguously, each node's children
/// carrying a Fenwick segment of their current subtree sizes.
struct BackwardPass {
    root: usize,
    parent: Vec<usize>,
    size: Vec<usize>,
    kids: Vec<usize>,
    start: Vec<usize>,
    slot: Vec<usize>,
    weights: Vec<u64>,
}

impl BackwardPass {
    fn new(tree: &LabeledTree, root: usize) -> Self {
        let n = tree.len();
        let rooted = tree.rooted(root);
        let mut start = vec![0usize; n + 1];
        for v in 0..n {
            start[v + 1] = start[v] + tree.degree(v) - usize::from(v != root);
        }
        let mut kids = vec![0usize; n.saturating_sub(1)];
        let mut slot = vec![NO_PARENT; n];
        let mut weights = vec![0u64; kids.len()];
        for v in 0..n {
            for (j, c) in rooted.children(tree, v).enumerate() {
                kids[start[v] + j] = c;
                slot[c] = j;
                weights[start[v] + j] = rooted.size[c] as u64;
            }
            fenwick::build(&mut weights[start[v]..start[v + 1]]);
        }
        BackwardPass {
            root,
            parent: rooted.parent,
            size: rooted.size,
            kids,
            start,
            slot,
            weights,
        }
    }

    /// Descends from the root choosing a child with probability proportional
    /// to its subtree size until a leaf is reached, then removes it.
    fn remove_leaf<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let mut v = self.root;
        while self.size[v] > 1 || v == self.root {
            let seg = &self.weights[self.start[v]..self.start[v + 1]];
            let target = rng.random_range(0..(self.size[v] - 1) as u64);
            let j = fenwick::search(seg, target);
            v = self.kids[self.start[v] + j];
        }
        let leaf = v;
        let mut a = leaf;
        while a != self.root {
            let p = self.parent[a];
            self.size[a] -= 1;
            let range = self.start[p]..self.start[p + 1];
            fenwick::sub(&mut self.weights[range], self.slot[a], 1);
            a = p;
        }
        self.size[self.root] -= 1;
        leaf
    }
}

/// One uniform history by forward sampling.
pub fn sample_history_forward<R: Rng + ?Sized>(tree: &LabeledTree, posterior: &RootPosterior, rng: &mut R) -> HistorySample {
    HistorySampler::new(tree, posterior).sample(SamplerKind::Forward, rng)
}

/// One uniform history by permutation repair.
pub fn sample_history_fast<R: Rng + ?Sized>(tree: &LabeledTree, posterior: &RootPosterior, rng: &mut R) -> HistorySample {
    HistorySampler::new(tree, posterior).sample(SamplerKind::Fast, rng)
}

/// One uniform history by leaf removal.
pub fn sample_history_backward<R: Rng + ?Sized>(tree: &LabeledTree, posterior: &RootPosterior, rng: &mut R) -> HistorySample {
    HistorySampler::new(tree, posterior).sample(SamplerKind::Backward, rng)
}

/// Runs `job(rng, len)` over chunks of at most 1024 draws, chunk `c` on
/// stream `c` of `seed`, and concatenates the results in chunk order. The
/// output does not depend on the thread count.
pub fn par_chunks<T, F>(m: usize, seed: u64, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut rng::TreeRng, usize) -> Vec<T> + Sync,
{
    let chunks = m.div_ceil(CHUNK);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(seed, c as u64);
            job(&mut r, CHUNK.min(m - c * CHUNK))
        })
        .collect();
    parts.into_iter().flatten().collect()
}

/// `m` uniform histories drawn in parallel on per-chunk streams of `seed`.
pub fn sample_batch(
    tree: &LabeledTree,
    posterior: &RootPosterior,
    kind: SamplerKind,
    m: usize,
    seed: u64,
) -> Vec<HistorySample> {
    let sampler = HistorySampler::new(tree, posterior);
    par_chunks(m, seed, |r, len| (0..len).map(|_| sampler.sample(kind, r)).collect())
}

/// Draws `m` histories with the fast sampler and keeps only
/// `(log_weight, stat(ordering))`. With a kernel the weight is the history's
/// log-probability under it; without one every weight is 0.
pub fn map_samples<T, F>(
    tree: &LabeledTree,
    posterior: &RootPosterior,
    kernel: Option<&AttachmentKernel>,
    m: usize,
    seed: u64,
    stat: F,
) -> Result<Vec<(f64, T)>, SamplingError>
where
    T: Send,
    F: Fn(&[usize]) -> T + Sync,
{
    if m == 0 {
        return Err(SamplingError::NoSamples);
    }
    let sampler = HistorySampler::new(tree, posterior);
    let out = par_chunks(m, seed, |r, len| {
        (0..len)
            .map(|_| {
                let s = sampler.sample(SamplerKind::Fast, r);
                let w = match kernel {
                    Some(k) => history_log_probability(k, tree, &s.ordering)?,
                    None => 0.0,
                };
                Ok((w, stat(&s.ordering)))
            })
            .collect::<Vec<Result<_, GrowthError>>>()
    });
    let out = out.into_iter().collect::<Result<Vec<_>, _>>()?;
    if out.iter().all(|(w, _)| *w == f64::NEG_INFINITY) {
        return Err(SamplingError::ZeroTotalWeight);
    }
    Ok(out)
}

/// Weights a uniform history by its probability under `kernel`.
pub fn weigh(kernel: &AttachmentKernel, tree: &LabeledTree, sample: &mut HistorySample) -> Result<(), SamplingError> {
    sample.log_weight = history_log_probability(kernel, tree, &sample.ordering)?;
    Ok(())
}

/// `m` uniform histories from the fast sampler, each weighted by its joint
/// probability under `kernel`.
pub fn importance_sample<R: Rng + ?Sized>(
    tree: &LabeledTree,
    posterior: &RootPosterior,
    kernel: &AttachmentKernel,
    m: usize,
    rng: &mut R,
) -> Result<Vec<HistorySample>, SamplingError> {
    if m == 0 {
        return Err(SamplingError::NoSamples);
    }
    let sampler = HistorySampler::new(tree, posterior);
    let samples = (0..m)
        .map(|_| {
            let mut s = sampler.sample(SamplerKind::Fast, rng);
            weigh(kernel, tree, &mut s).map(|_| s)
        })
        .collect::<Result<Vec<_>, _>>()?;
    check_weights(&samples)?;
    Ok(samples)
}

/// Parallel [`importance_sample`] on per-chunk streams of `seed`.
pub fn importance_sample_batch(
    tree: &LabeledTree,
    posterior: &RootPosterior,
    kernel: &AttachmentKernel,
    m: usize,
    seed: u64,
) -> Result<Vec<HistorySample>, SamplingError> {
    if m == 0 {
        return Err(SamplingError::NoSamples);
    }
    let mut samples = sample_batch(tree, posterior, SamplerKind::Fast, m, seed);
    samples
        .par_iter_mut()
        .try_for_each(|s| weigh(kernel, tree, s))?;
    check_weights(&samples)?;
    Ok(samples)
}

fn check_weights(samples: &[HistorySample]) -> Result<(), SamplingError> {
    if samples.iter().all(|s| s.log_weight == f64::NEG_INFINITY) {
        Err(SamplingError::ZeroTotalWeight)
    } else {
        Ok(())
    }
}

/// Self-normalized Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    /// `(sum w)^2 / sum w^2`.
    pub effective_sample_size: f64,
    pub samples: usize,
}

/// Normalized weights `w_i / max w`, shifted in log space.
pub fn normalized_weights(samples: &[HistorySample]) -> Result<Vec<f64>, SamplingError> {
    if samples.is_empty() {
        return Err(SamplingError::NoSamples);
    }
    let top = samples.iter().map(|s| s.log_weight).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(SamplingError::ZeroTotalWeight);
    }
    Ok(samples.iter().map(|s| (s.log_weight - top).exp()).collect())
}

/// Weighted frequency of `event` among the sampled histories.
pub fn estimate_event_probability<F>(samples: &[HistorySample], event: F) -> Result<Estimate, SamplingError>
where
    F: Fn(&[usize]) -> bool,
{
    let w = normalized_weights(samples)?;
    let hits: Vec<bool> = samples.iter().map(|s| event(&s.ordering)).collect();
    Ok(weighted_estimate(&w, &hits))
}

pub(crate) fn weighted_estimate(w: &[f64], hits: &[bool]) -> Estimate {
    let total: f64 = w.iter().sum();
    let total_sq: f64 = w.iter().map(|x| x * x).sum();
    let hit: f64 = w.iter().zip(hits).filter(|(_, &h)| h).map(|(x, _)| x).sum();
    let p = hit / total;
    let var: f64 = w
        .iter()
        .zip(hits)
        .map(|(x, &h)| {
            let d = f64::from(u8::from(h)) - p;
            x * x * d * d
        })
        .sum();
    Estimate {
        value: p,
        std_error: var.sqrt() / total,
        effective_sample_size: total * total / total_sq,
        samples: w.len(),
    }
}

/// Sample dump: the ordering as comma-separated labels, a tab, the log
/// weight.
pub fn write_samples<W: Write>(out: &mut W, tree: &LabeledTree, samples: &[HistorySample]) -> io::Result<()> {
    for s in samples {
        let mut first = true;
        for &v in &s.ordering {
            if !first {
                out.write_all(b",")?;
            }
            first = false;
            out.write_all(tree.label(v).as_bytes())?;
        }
        writeln!(out, "\t{}", format_sig(s.log_weight, 12))?;
    }
    Ok(())
}
