//! Monte Carlo posteriors over the latent history: arrival times, seed trees
//! and pairwise arrival order.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::growth::AttachmentKernel;
use crate::logmath::log_ties;
use crate::root::{log_hist_counts, RootPosterior};
use crate::sampling::{map_samples, par_chunks, weighted_estimate, Estimate, HistorySampler, SamplingError};
use crate::tree::LabeledTree;

/// Default number of sampled histories per query.
pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("unknown node label `{0}`")]
    UnknownNode(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// The kernel to weight by, or `None` when histories are uniform under it.
fn weighting(kernel: Option<&AttachmentKernel>) -> Result<Option<&AttachmentKernel>, QueryError> {
    match kernel {
        None => Ok(None),
        Some(k) => {
            k.validate()
                .map_err(|e| QueryError::Sampling(SamplingError::Growth(e)))?;
            Ok((!k.is_shape_exchangeable()).then_some(k))
        }
    }
}

fn require(tree: &LabeledTree, label: &str) -> Result<usize, QueryError> {
    tree.index_of(label).ok_or_else(|| QueryError::UnknownNode(label.to_string()))
}

fn check_samples(m: usize) -> Result<(), QueryError> {
    if m == 0 {
        Err(QueryError::InvalidArgument("the number of samples must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Weights `exp(lw - max lw)`.
fn relative_weights(log_weights: impl Iterator<Item = f64> + Clone) -> Vec<f64> {
    let top = log_weights.clone().fold(f64::NEG_INFINITY, f64::max);
    log_weights.map(|w| (w - top).exp()).collect()
}

/// Posterior distribution of the arrival time of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalPosterior {
    pub node: usize,
    /// `mass[t - 1]` estimates `P(node arrived at time t | shape)`.
    pub mass: Vec<f64>,
    pub effective_sample_size: f64,
    pub samples: usize,
}

impl ArrivalPosterior {
    pub fn mass_at(&self, t: usize) -> f64 {
        self.mass[t - 1]
    }
}

/// Arrival-time histogram of `node` over sampled histories; weighted by
/// `kernel` when it is not shape exchangeable.
pub fn arrival_time_posterior<R: Rng + ?Sized>(
    tree: &LabeledTree,
    node: &str,
    m: usize,
    rng: &mut R,
    kernel: Option<&AttachmentKernel>,
) -> Result<ArrivalPosterior, QueryError> {
    let posterior = log_hist_counts(tree);
    arrival_time_posterior_with(tree, &posterior, node, m, rng.random(), kernel)
}

pub fn arrival_time_posterior_with(
    tree: &LabeledTree,
    posterior: &RootPosterior,
    node: &str,
    m: usize,
    seed: u64,
    kernel: Option<&AttachmentKernel>,
) -> Result<ArrivalPosterior, QueryError> {
    let u = require(tree, node)?;
    check_samples(m)?;
    let kernel = weighting(kernel)?;
    let draws = map_samples(tree, posterior, kernel, m, seed, |o| {
        o.iter().position(|&v| v == u).expect("every node appears")
    })?;
    let w = relative_weights(draws.iter().map(|d| d.0));
    let total: f64 = w.iter().sum();
    let total_sq: f64 = w.iter().map(|x| x * x).sum();
    let mut mass = vec![0.0; tree.len()];
    for (x, (_, t)) in w.iter().zip(&draws) {
        mass[*t] += x;
    }
    for x in &mut mass {
        *x /= total;
    }
    Ok(ArrivalPosterior {
        node: u,
        mass,
        effective_sample_size: total * total / total_sq,
        samples: m,
    })
}

/// Times (1-based, ascending) forming the smallest high-mass set with
/// coverage at least `1 - epsilon`, closed under ties at the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalConfidenceSet {
    pub times: Vec<usize>,
    pub level: f64,
    pub achieved_mass: f64,
}

impl ArrivalConfidenceSet {
    pub fn contains(&self, t: usize) -> bool {
        self.times.binary_search(&t).is_ok()
    }
}

pub fn arrival_time_confidence_set(posterior: &ArrivalPosterior, epsilon: f64) -> ArrivalConfidenceSet {
    assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0,1), got {epsilon}");
    let mass = &posterior.mass;
    let mut order: Vec<usize> = (0..mass.len()).filter(|&i| mass[i] > 0.0).collect();
    order.sort_by(|&a, &b| mass[b].total_cmp(&mass[a]).then(a.cmp(&b)));
    let target = 1.0 - epsilon;
    let mut acc = 0.0;
    let mut k = 0;
    while k < order.len() {
        acc += mass[order[k]];
        k += 1;
        if acc >= target - 1e-12 {
            break;
        }
    }
    let boundary = mass[order[k - 1]].ln();
    while k < order.len() && log_ties(boundary, mass[order[k]].ln()) {
        acc += mass[order[k]];
        k += 1;
    }
    let mut times: Vec<usize> = order[..k].iter().map(|i| i + 1).collect();
    times.sort_unstable();
    ArrivalConfidenceSet {
        times,
        level: target,
        achieved_mass: acc.min(1.0),
    }
}

/// Posterior over the set of the first `k` arrivals.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedTreePosterior {
    pub k: usize,
    /// Node sets (sorted by label) with their probabilities, most likely
    /// first.
    pub sets: Vec<(Vec<usize>, f64)>,
}

pub fn seed_tree_posterior<R: Rng + ?Sized>(
    tree: &LabeledTree,
    k: usize,
    m: usize,
    rng: &mut R,
    kernel: Option<&AttachmentKernel>,
) -> Result<SeedTreePosterior, QueryError> {
    let posterior = log_hist_counts(tree);
    seed_tree_posterior_with(tree, &posterior, k, m, rng.random(), kernel)
}

pub fn seed_tree_posterior_with(
    tree: &LabeledTree,
    posterior: &RootPosterior,
    k: usize,
    m: usize,
    seed: u64,
    kernel: Option<&AttachmentKernel>,
) -> Result<SeedTreePosterior, QueryError> {
    if k == 0 || k > tree.len() {
        return Err(QueryError::InvalidArgument(format!(
            "seed size must lie in 1..={}, got {k}",
            tree.len()
        )));
    }
    check_samples(m)?;
    let kernel = weighting(kernel)?;
    let by_label = |a: &usize, b: &usize| tree.label(*a).cmp(tree.label(*b));
    let draws = map_samples(tree, posterior, kernel, m, seed, |o| {
        let mut s = o[..k].to_vec();
        s.sort_by(by_label);
        s
    })?;
    let w = relative_weights(draws.iter().map(|d| d.0));
    let total: f64 = w.iter().sum();
    let mut acc: HashMap<Vec<usize>, f64> = HashMap::new();
    for (x, (_, s)) in w.iter().zip(draws) {
        *acc.entry(s).or_insert(0.0) += x;
    }
    let mut sets: Vec<(Vec<usize>, f64)> = acc.into_iter().map(|(s, x)| (s, x / total)).collect();
    sets.sort_by(|a, b| {
        b.1.total_cmp(&a.1).then_with(|| {
            let la = a.0.iter().map(|&v| tree.label(v));
            let lb = b.0.iter().map(|&v| tree.label(v));
            la.cmp(lb)
        })
    });
    Ok(SeedTreePosterior { k, sets })
}

/// `P(u arrives before v | shape)`.
///
/// Without importance weights this runs backward passes that stop as soon as
/// `u` or `v` is placed: the first of them met is either the root or the
/// later arrival of the two.
pub fn pairwise_order_probability<R: Rng + ?Sized>(
    tree: &LabeledTree,
    u: &str,
    v: &str,
    m: usize,
    rng: &mut R,
    kernel: Option<&AttachmentKernel>,
) -> Result<Estimate, QueryError> {
    let posterior = log_hist_counts(tree);
    pairwise_order_probability_with(tree, &posterior, u, v, m, rng.random(), kernel)
}

pub fn pairwise_order_probability_with(
    tree: &LabeledTree,
    posterior: &RootPosterior,
    u: &str,
    v: &str,
    m: usize,
    seed: u64,
    kernel: Option<&AttachmentKernel>,
) -> Result<Estimate, QueryError> {
    let a = require(tree, u)?;
    let b = require(tree, v)?;
    if a == b {
        return Err(QueryError::InvalidArgument("the two nodes must differ".into()));
    }
    check_samples(m)?;
    match weighting(kernel)? {
        Some(k) => {
            let draws = map_samples(tree, posterior, Some(k), m, seed, |o| {
                o.iter().find(|&&x| x == a || x == b) == Some(&a)
            })?;
            let w = relative_weights(draws.iter().map(|d| d.0));
            let hits: Vec<bool> = draws.iter().map(|d| d.1).collect();
            Ok(weighted_estimate(&w, &hits))
        }
        None => {
            let sampler = HistorySampler::new(tree, posterior);
            let hits: Vec<bool> = par_chunks(m, seed, |r, len| {
                (0..len)
                    .map(|_| {
                        let placed = sampler.backward_until(r, |x, _| x == a || x == b);
                        let met = *placed.last().expect("root is always placed");
                        // Met at time 1 means it came first; later means it came last.
                        (met == a) == (placed.len() == 1)
                    })
                    .collect()
            });
            Ok(weighted_estimate(&vec![1.0; m], &hits))
        }
    }
}

#[derive(Serialize)]
struct ArrivalJson<'a> {
    node: &'a str,
    masses: Vec<f64>,
    confset: ConfsetJson<'a>,
}

#[derive(Serialize)]
struct ConfsetJson<'a> {
    level: f64,
    times: &'a [usize],
}

/// `{node, masses: [...], confset: {level, times}}`.
pub fn arrival_json(tree: &LabeledTree, posterior: &ArrivalPosterior, set: &ArrivalConfidenceSet) -> String {
    serde_json::to_string(&ArrivalJson {
        node: tree.label(posterior.node),
        masses: posterior.mass.iter().map(|&x| round12(x)).collect(),
        confset: ConfsetJson {
            level: round12(set.level),
            times: &set.times,
        },
    })
    .expect("plain data serializes")
}

#[derive(Serialize)]
struct SeedsJson<'a> {
    pairs: Vec<SeedPairJson<'a>>,
}

#[derive(Serialize)]
struct SeedPairJson<'a> {
    set: Vec<&'a str>,
    prob: f64,
}

/// `{pairs: [{set, prob}]}`.
pub fn seed_tree_json(tree: &LabeledTree, posterior: &SeedTreePosterior) -> String {
    let pairs = posterior
        .sets
        .iter()
        .map(|(s, p)| SeedPairJson {
            set: s.iter().map(|&v| tree.label(v)).collect(),
            prob: round12(*p),
        })
        .collect();
    serde_json::to_string(&SeedsJson { pairs }).expect("plain data serializes")
}

/// Rounds to 12 significant digits for output.
fn round12(x: f64) -> f64 {
    crate::root::format_sig(x, 12).parse().unwrap_or(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn tree(edges: &[(&str, &str)]) -> LabeledTree {
        LabeledTree::from_edge_list(edges).unwrap()
    }

    fn path3() -> LabeledTree {
        tree(&[("A", "B"), ("B", "C")])
    }

    #[test]
    fn path_arrivals() {
        let t = path3();
        let mut r = rng::seeded(1);
        let b = arrival_time_posterior(&t, "B", 10_000, &mut r, None).unwrap();
        assert!((b.mass_at(1) - 0.5).abs() < 0.01);
        assert!((b.mass_at(2) - 0.5).abs() < 0.01);
        assert_eq!(b.mass_at(3), 0.0);
        let a = arrival_time_posterior(&t, "A", 10_000, &mut r, Some(&AttachmentKernel::Uniform)).unwrap();
        assert!((a.mass_at(1) - 0.25).abs() < 0.01);
        assert!((b.mass.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let set = arrival_time_confidence_set(&b, 0.4);
        assert_eq!(set.times, vec![1, 2]);
        assert!(matches!(
            arrival_time_posterior(&t, "Z", 10, &mut r, None),
            Err(QueryError::UnknownNode(_))
        ));
        assert!(arrival_time_posterior(&t, "A", 0, &mut r, None).is_err());
    }

    #[test]
    fn single_node_arrival() {
        let t = LabeledTree::single_node("x");
        let mut r = rng::seeded(2);
        let p = arrival_time_posterior(&t, "x", 5, &mut r, None).unwrap();
        assert_eq!(p.mass, vec![1.0]);
        assert_eq!(arrival_time_confidence_set(&p, 0.01).times, vec![1]);
    }

    #[test]
    fn seed_sets() {
        let t = path3();
        let mut r = rng::seeded(3);
        let s = seed_tree_posterior(&t, 2, 20_000, &mut r, None).unwrap();
        assert_eq!(s.sets.len(), 2);
        for (set, p) in &s.sets {
            assert!(set.contains(&t.index_of("B").unwrap()));
            assert!((p - 0.5).abs() < 0.01);
        }
        let full = seed_tree_posterior(&t, 3, 100, &mut r, None).unwrap();
        assert_eq!(full.sets.len(), 1);
        assert!((full.sets[0].1 - 1.0).abs() < 1e-12);
        assert!(seed_tree_posterior(&t, 4, 100, &mut r, None).is_err());
        let json = seed_tree_json(&t, &full);
        assert_eq!(json, r#"{"pairs":[{"set":["A","B","C"],"prob":1.0}]}"#);
    }

    #[test]
    fn pairwise_orders() {
        let path4 = tree(&[("a", "b"), ("b", "c"), ("c", "d")]);
        let mut r = rng::seeded(4);
        let p = pairwise_order_probability(&path4, "b", "a", 20_000, &mut r, None).unwrap();
        assert!((p.value - 0.875).abs() < 0.01, "{}", p.value);
        let star = tree(&[("h", "x"), ("h", "y"), ("h", "z")]);
        let q = pairwise_order_probability(&star, "x", "y", 20_000, &mut r, None).unwrap();
        assert!((q.value - 0.5).abs() < 0.01);
        let pair = tree(&[("x", "y")]);
        let e = pairwise_order_probability(&pair, "x", "y", 20_000, &mut r, None).unwrap();
        assert!((e.value - 0.5).abs() < 0.015);
        let w = pairwise_order_probability(&path4, "b", "a", 20_000, &mut r, Some(&AttachmentKernel::Sublinear(0.5))).unwrap();
        assert!((w.value - 0.875).abs() < 0.01);
        assert!(pairwise_order_probability(&path4, "a", "a", 10, &mut r, None).is_err());
    }

    #[test]
    fn arrival_json_shape() {
        let t = path3();
        let p = ArrivalPosterior { node: 1, mass: vec![0.5, 0.5, 0.0], effective_sample_size: 4.0, samples: 4 };
        let set = arrival_time_confidence_set(&p, 0.1);
        assert_eq!(
            arrival_json(&t, &p, &set),
            r#"{"node":"B","masses":[0.5,0.5,0.0],"confset":{"level":0.9,"times":[1,2]}}"#
        );
    }
}
