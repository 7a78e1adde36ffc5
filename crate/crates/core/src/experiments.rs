//! Simulation experiments and the data plumbing behind the `treehist` CLI.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dsu::DisjointSets;
use crate::growth::{grow, AttachmentKernel, GrowthError, GrownTree};
use crate::oracle;
use crate::posterior::QueryError;
use crate::rng;
use crate::sampling::SamplingError;
use crate::root::{bound_k, confidence_set, format_sig, log_hist_counts, BoundModel, ConfidenceSet, RootPosterior};
use crate::tree::{LabeledTree, TreeError, NO_PARENT};

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// Bad arguments; the CLI exits with status 2.
    #[error("{0}")]
    Usage(String),
    /// Bad or unreadable input data; the CLI exits with status 3.
    #[error("{0}")]
    Data(String),
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Usage(_) => 2,
            ExperimentError::Data(_) => 3,
        }
    }
}

impl From<TreeError> for ExperimentError {
    fn from(e: TreeError) -> Self {
        ExperimentError::Data(e.to_string())
    }
}

impl From<GrowthError> for ExperimentError {
    fn from(e: GrowthError) -> Self {
        match e {
            GrowthError::InvalidKernel(_) | GrowthError::KernelSyntax(_) | GrowthError::EmptyTree => {
                ExperimentError::Usage(e.to_string())
            }
            other => ExperimentError::Data(other.to_string()),
        }
    }
}

impl From<SamplingError> for ExperimentError {
    fn from(e: SamplingError) -> Self {
        match e {
            SamplingError::NoSamples => ExperimentError::Usage("--samples must be at least 1".into()),
            SamplingError::Growth(g) => g.into(),
            other => ExperimentError::Data(other.to_string()),
        }
    }
}

impl From<QueryError> for ExperimentError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::UnknownNode(_) => ExperimentError::Data(e.to_string()),
            QueryError::InvalidArgument(m) => ExperimentError::Usage(m),
            QueryError::Sampling(s) => s.into(),
        }
    }
}

impl From<io::Error> for ExperimentError {
    fn from(e: io::Error) -> Self {
        ExperimentError::Data(format!("i/o error: {e}"))
    }
}

/// Parameters of a simulation study.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kernel: AttachmentKernel,
    pub n: usize,
    pub trials: usize,
    pub epsilons: Vec<f64>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.kernel.validate()?;
        if self.n == 0 {
            return Err(ExperimentError::Usage("--n must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(ExperimentError::Usage("--trials must be at least 1".into()));
        }
        check_epsilons(&self.epsilons)
    }
}

pub fn check_epsilons(eps: &[f64]) -> Result<(), ExperimentError> {
    if eps.is_empty() {
        return Err(ExperimentError::Usage("at least one --eps level is required".into()));
    }
    match eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        Some(e) => Err(ExperimentError::Usage(format!("--eps must lie in (0,1), got {e}"))),
        None => Ok(()),
    }
}

/// A simulated tree: the ground-truth growth history and the observed
/// snapshot with random labels and shuffled edges.
#[derive(Debug, Clone)]
pub struct Generated {
    pub truth: GrownTree,
    /// `labels[k - 1]` is the public label of the node that arrived at time
    /// `k`.
    pub labels: Vec<String>,
    /// Observed edges in file order.
    pub edges: Vec<(usize, usize)>,
}

impl Generated {
    pub fn root_label(&self) -> &str {
        &self.labels[0]
    }

    /// The observation as a tree; node indices follow first appearance in
    /// the edge list, exactly as when the edge file is read back.
    pub fn observed(&self) -> LabeledTree {
        if self.truth.len() == 1 {
            return LabeledTree::single_node(self.labels[0].clone());
        }
        let pairs: Vec<(&str, &str)> = self
            .edges
            .iter()
            .map(|&(a, b)| (self.labels[a].as_str(), self.labels[b].as_str()))
            .collect();
        LabeledTree::from_edge_list(&pairs).expect("a grown tree is a tree")
    }

    pub fn edge_list_text(&self) -> String {
        let mut out = String::with_capacity(self.edges.len() * 16);
        if self.truth.len() == 1 {
            out.push_str(&self.labels[0]);
            out.push('\n');
        }
        for &(a, b) in &self.edges {
            out.push_str(&self.labels[a]);
            out.push(' ');
            out.push_str(&self.labels[b]);
            out.push('\n');
        }
        out
    }
}

/// Grows a tree and hides its history: node labels are a random permutation
/// of `1..=n` and edges are shuffled and randomly oriented.
pub fn generate<R: Rng + ?Sized>(kernel: &AttachmentKernel, n: usize, rng: &mut R) -> Result<Generated, ExperimentError> {
    let truth = grow(kernel, n, rng)?;
    let mut perm: Vec<usize> = (1..=n).collect();
    perm.shuffle(rng);
    let labels = perm.iter().map(|p| p.to_string()).collect();
    let mut edges: Vec<(usize, usize)> = (2..=n)
        .map(|k| {
            let (a, b) = (k - 1, truth.parent(k) - 1);
            if rng.random::<bool>() {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect();
    edges.shuffle(rng);
    Ok(Generated { truth, labels, edges })
}

/// Writes `PREFIX.parents`, `PREFIX.edges` and the `PREFIX.meta` sidecar
/// holding the true root label.
pub fn write_generated(prefix: &Path, g: &Generated, kernel: &AttachmentKernel, seed: u64) -> Result<(), ExperimentError> {
    let with = |ext: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(".");
        p.push(ext);
        std::path::PathBuf::from(p)
    };
    std::fs::write(with("parents"), g.truth.to_text())?;
    std::fs::write(with("edges"), g.edge_list_text())?;
    let meta = format!("root={}\nkernel={}\nn={}\nseed={}\n", g.root_label(), kernel, g.truth.len(), seed);
    std::fs::write(with("meta"), meta)?;
    Ok(())
}

/// Reads `root=<label>` from a metadata sidecar.
pub fn read_true_root(path: &Path) -> Result<String, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Data(format!("{}: {e}", path.display())))?;
    text.lines()
        .find_map(|l| l.strip_prefix("root="))
        .map(|s| s.trim().to_string())
        .ok_or_else(|| ExperimentError::Data(format!("{}: no root= line", path.display())))
}

/// Outcome of one simulated trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Set size per level, in the order of the configured epsilons.
    pub sizes: Vec<usize>,
    pub covered: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub epsilon: f64,
    pub level: f64,
    pub coverage: Option<f64>,
    pub mean_size: f64,
    pub sd_size: f64,
    pub trials: usize,
    /// Worst-case size bound for UA or LPA growth, when applicable.
    pub bound: Option<u64>,
}

/// Empirical coverage and set sizes across trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub levels: Vec<LevelSummary>,
    pub trials: Vec<TrialRecord>,
}

fn summarize(epsilons: &[f64], trials: Vec<TrialRecord>, with_coverage: bool, model: Option<BoundModel>) -> CoverageReport {
    let levels = epsilons
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let m = trials.len() as f64;
            let sizes: Vec<f64> = trials.iter().map(|t| t.sizes[i] as f64).collect();
            let mean = sizes.iter().sum::<f64>() / m;
            let var = if trials.len() > 1 {
                sizes.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (m - 1.0)
            } else {
                0.0
            };
            let hits = trials.iter().filter(|t| t.covered[i]).count();
            LevelSummary {
                epsilon: eps,
                level: 1.0 - eps,
                coverage: with_coverage.then(|| hits as f64 / m),
                mean_size: mean,
                sd_size: var.sqrt(),
                trials: trials.len(),
                bound: model.map(|b| bound_k(b, eps)),
            }
        })
        .collect();
    CoverageReport { levels, trials }
}

/// The bound family matching a kernel, if any.
pub fn bound_model(kernel: &AttachmentKernel) -> Option<BoundModel> {
    match kernel {
        AttachmentKernel::Uniform => Some(BoundModel::Ua),
        AttachmentKernel::Linear => Some(BoundModel::Lpa),
        _ => None,
    }
}

/// Grows `trials` trees (trial `i` on stream `i` of the seed), infers the
/// root of each from its shape and records coverage of the true root.
pub fn run_coverage(config: &ExperimentConfig) -> Result<CoverageReport, ExperimentError> {
    config.validate()?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(config.seed, t as u64);
            let g = generate(&config.kernel, config.n, &mut r)?;
            let tree = g.observed();
            let root = tree.index_of(g.root_label()).expect("root is labeled");
            let post = log_hist_counts(&tree);
            let sets: Vec<_> = config.epsilons.iter().map(|&e| confidence_set(&post, e)).collect();
            Ok(TrialRecord {
                trial: t,
                sizes: sets.iter().map(|s| s.len()).collect(),
                covered: sets.iter().map(|s| s.contains(root)).collect(),
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(summarize(&config.epsilons, trials, true, bound_model(&config.kernel)))
}

/// An undirected multigraph read from an edge list; nodes are indexed by
/// first appearance.
#[derive(Debug, Clone)]
pub struct Graph {
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut labels: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut id = |s: &str, labels: &mut Vec<String>| {
            *index.entry(s.to_string()).or_insert_with(|| {
                labels.push(s.to_string());
                labels.len() - 1
            })
        };
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = t.split_whitespace().collect();
            match tokens.as_slice() {
                [a] => {
                    id(a, &mut labels);
                }
                [a, b] if a == b => {
                    return Err(ExperimentError::Data(format!("line {}: self-loop on `{a}`", i + 1)));
                }
                [a, b] => {
                    let x = id(a, &mut labels);
                    let y = id(b, &mut labels);
                    edges.push((x, y));
                }
                _ => {
                    return Err(ExperimentError::Data(format!("line {}: expected two labels", i + 1)));
                }
            }
        }
        if labels.is_empty() {
            return Err(ExperimentError::Data("graph has no nodes".into()));
        }
        Ok(Graph { labels, edges })
    }

    pub fn read(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Data(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Minimum spanning tree under independent standard-normal edge weights
    /// (Kruskal with union-find). Node indices are kept.
    pub fn random_spanning_tree<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LabeledTree, ExperimentError> {
        let n = self.labels.len();
        let weights: Vec<f64> = self.edges.iter().map(|_| rng.sample(StandardNormal)).collect();
        let mut order: Vec<usize> = (0..self.edges.len()).collect();
        order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(a.cmp(&b)));
        let mut sets = DisjointSets::new(n);
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut taken = 0;
        for e in order {
            let (a, b) = self.edges[e];
            if sets.union(a, b) {
                adj[a].push(b);
                adj[b].push(a);
                taken += 1;
            }
        }
        if taken + 1 != n {
            return Err(ExperimentError::Data(format!(
                "graph is disconnected: {} components",
                n - taken
            )));
        }
        let mut parent = vec![NO_PARENT; n];
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = v;
                    stack.push(w);
                }
            }
        }
        Ok(LabeledTree::from_parents(&parent, self.labels.clone()))
    }
}

/// Root inference on random spanning trees of a general graph; trial `i`
/// draws its weights from stream `i` of the seed.
pub fn run_mst_root(
    graph: &Graph,
    trials: usize,
    epsilons: &[f64],
    seed: u64,
    true_root: Option<&str>,
) -> Result<CoverageReport, ExperimentError> {
    check_epsilons(epsilons)?;
    if trials == 0 {
        return Err(ExperimentError::Usage("--trials must be at least 1".into()));
    }
    let root = match true_root {
        Some(l) => Some(
            graph
                .labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| ExperimentError::Data(format!("true root `{l}` is not in the graph")))?,
        ),
        None => None,
    };
    let records = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, t as u64);
            let tree = graph.random_spanning_tree(&mut r)?;
            let post = log_hist_counts(&tree);
            let sets: Vec<_> = epsilons.iter().map(|&e| confidence_set(&post, e)).collect();
            Ok(TrialRecord {
                trial: t,
                sizes: sets.iter().map(|s| s.len()).collect(),
                covered: sets.iter().map(|s| root.is_some_and(|v| s.contains(v))).collect(),
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(summarize(epsilons, records, root.is_some(), None))
}

/// Coverage summary as CSV: `epsilon,level,coverage,mean_size,sd_size,trials`.
pub fn coverage_csv(report: &CoverageReport) -> String {
    let mut out = String::from("epsilon,level,coverage,mean_size,sd_size,trials\n");
    for l in &report.levels {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            format_sig(l.epsilon, 12),
            format_sig(l.level, 12),
            l.coverage.map(|c| format_sig(c, 12)).unwrap_or_default(),
            format_sig(l.mean_size, 12),
            format_sig(l.sd_size, 12),
            l.trials
        );
    }
    out
}

/// Size summary as CSV: `epsilon,level,mean_size,sd_size,trials,bound`; the
/// bound column is empty for kernels without one.
pub fn sizes_csv(report: &CoverageReport) -> String {
    let mut out = String::from("epsilon,level,mean_size,sd_size,trials,bound\n");
    for l in &report.levels {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            format_sig(l.epsilon, 12),
            format_sig(l.level, 12),
            format_sig(l.mean_size, 12),
            format_sig(l.sd_size, 12),
            l.trials,
            l.bound.map(|b| b.to_string()).unwrap_or_default()
        );
    }
    out
}

/// Per-trial log as CSV: `trial,epsilon,size,covered`, sorted by trial.
pub fn trial_log_csv(report: &CoverageReport) -> String {
    let mut out = String::from("trial,epsilon,size,covered\n");
    for t in &report.trials {
        for (i, l) in report.levels.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", t.trial, format_sig(l.epsilon, 12), t.sizes[i], u8::from(t.covered[i]));
        }
    }
    out
}

pub fn report_json(report: &CoverageReport) -> String {
    serde_json::to_string_pretty(report).expect("plain data serializes") + "\n"
}

#[derive(Serialize)]
struct PosteriorJson<'a> {
    nodes: Vec<NodeJson<'a>>,
    sets: Vec<SetJson<'a>>,
}

#[derive(Serialize)]
struct NodeJson<'a> {
    node: &'a str,
    log_hist: f64,
    root_prob: f64,
}

#[derive(Serialize)]
struct SetJson<'a> {
    level: f64,
    mass: f64,
    nodes: Vec<&'a str>,
}

fn round12(x: f64) -> f64 {
    format_sig(x, 12).parse().unwrap_or(x)
}

/// Root posterior and confidence sets as JSON, nodes in display order.
pub fn posterior_json(tree: &LabeledTree, post: &RootPosterior, sets: &[ConfidenceSet]) -> String {
    let doc = PosteriorJson {
        nodes: post
            .display_order(tree)
            .into_iter()
            .map(|v| NodeJson {
                node: tree.label(v),
                log_hist: round12(post.log_hist(v)),
                root_prob: round12(post.prob(v)),
            })
            .collect(),
        sets: sets
            .iter()
            .map(|s| SetJson {
                level: round12(s.level),
                mass: round12(s.achieved_mass),
                nodes: s.labels(tree),
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("plain data serializes") + "\n"
}

/// `epsilon,ua,lpa` rows of the worst-case size bounds.
pub fn bounds_csv(epsilons: &[f64]) -> Result<String, ExperimentError> {
    check_epsilons(epsilons)?;
    let mut out = String::from("epsilon,ua,lpa\n");
    for &e in epsilons {
        let _ = writeln!(out, "{},{},{}", format_sig(e, 12), bound_k(BoundModel::Ua, e), bound_k(BoundModel::Lpa, e));
    }
    Ok(out)
}

/// Result of comparing the linear-time counts against brute force.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleCheck {
    pub trees: usize,
    pub nodes: usize,
    pub mismatches: Vec<String>,
}

/// Checks `exp(log #hist)` and the exact closed-form count against brute
/// enumeration on every node of each tree.
pub fn oracle_check_tree(tree: &LabeledTree, report: &mut OracleCheck) -> Result<(), ExperimentError> {
    let counts = oracle::count_histories_by_root(tree).map_err(|e| ExperimentError::Usage(e.to_string()))?;
    let post = log_hist_counts(tree);
    report.trees += 1;
    for (v, &c) in counts.iter().enumerate() {
        report.nodes += 1;
        let fast = post.log_hist(v).exp().round() as u64;
        let closed = crate::root::exact_history_count(tree, v);
        if fast != c || closed != Some(c as u128) {
            report.mismatches.push(format!(
                "node {}: enumeration {c}, log count {fast}, closed form {closed:?}",
                tree.label(v)
            ));
        }
    }
    Ok(())
}

/// Runs [`oracle_check_tree`] on `trials` uniformly random labeled trees
/// with sizes drawn from `2..=max_n`.
pub fn oracle_check_random(max_n: usize, trials: usize, seed: u64) -> Result<OracleCheck, ExperimentError> {
    if !(2..=oracle::MAX_ENUMERATION).contains(&max_n) {
        return Err(ExperimentError::Usage(format!(
            "--n must lie in 2..={} for brute-force checks",
            oracle::MAX_ENUMERATION
        )));
    }
    let mut report = OracleCheck { trees: 0, nodes: 0, mismatches: Vec::new() };
    let mut r = rng::seeded(seed);
    for _ in 0..trials {
        let n = r.random_range(2..=max_n);
        let t = oracle::random_tree(n, &mut r);
        oracle_check_tree(&t, &mut report)?;
    }
    Ok(report)
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), ExperimentError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()?;
        }
    }
    Ok(())
}
