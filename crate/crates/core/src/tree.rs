//! Labeled trees, rooted orientations, subtree statistics, canonical rooted
//! codes and classes of indistinguishable nodes.
//!
//! Labels are opaque tokens. They are mapped once to dense indices `0..n` in
//! order of first appearance, and every algorithm in the crate works on those
//! indices. Results are reported back through [`LabeledTree::label`].

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::path::Path;

use thiserror::Error;

use crate::dsu::DisjointSets;

/// Sentinel parent of the root in a [`RootedTree`].
pub const NO_PARENT: usize = usize::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("empty edge list")]
    Empty,
    #[error("self-loop on node `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge `{0}` -- `{1}`")]
    DuplicateEdge(String, String),
    #[error("edge `{0}` -- `{1}` closes a cycle")]
    Cycle(String, String),
    #[error("graph is disconnected ({components} components); `{detached}` is not reachable from `{anchor}`")]
    Disconnected {
        components: usize,
        anchor: String,
        detached: String,
    },
    #[error("unknown node label `{0}`")]
    UnknownLabel(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<TreeError>,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

/// An immutable undirected tree on `n >= 1` uniquely labeled nodes.
///
/// Adjacency is stored in compressed sparse row form so that million-node
/// trees stay compact.
#[derive(Clone)]
pub struct LabeledTree {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    offsets: Vec<usize>,
    adjacency: Vec<usize>,
}

impl fmt::Debug for LabeledTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let edges: Vec<(&str, &str)> = self
            .edges()
            .map(|(a, b)| (self.label(a), self.label(b)))
            .collect();
        f.debug_struct("LabeledTree")
            .field("n", &self.len())
            .field("edges", &edges)
            .finish()
    }
}

impl LabeledTree {
    /// Builds and validates a tree from label pairs.
    pub fn from_edge_list<S: AsRef<str>>(edges: &[(S, S)]) -> Result<Self, TreeError> {
        let mut builder = Builder::default();
        for (a, b) in edges {
            builder.push(a.as_ref(), b.as_ref())?;
        }
        builder.finish()
    }

    /// The one-node tree.
    pub fn single_node(label: impl Into<String>) -> Self {
        let label = label.into();
        let mut index = HashMap::new();
        index.insert(label.clone(), 0);
        LabeledTree {
            labels: vec![label],
            index,
            offsets: vec![0, 0],
            adjacency: Vec::new(),
        }
    }

    /// Builds a tree from a parent array over dense indices, where
    /// `parents[i]` is the index of the parent of node `i` and the root has
    /// `NO_PARENT`. Node `i` receives `labels[i]`.
    ///
    /// Panics if the array does not describe a tree or labels repeat.
    pub fn from_parents(parents: &[usize], labels: Vec<String>) -> Self {
        assert_eq!(parents.len(), labels.len(), "one label per node");
        assert!(!labels.is_empty(), "tree must have at least one node");
        let n = labels.len();
        let edges: Vec<(usize, usize)> = parents
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != NO_PARENT)
            .map(|(v, &p)| (p, v))
            .collect();
        assert_eq!(edges.len(), n - 1, "exactly one root expected");
        let mut index = HashMap::with_capacity(n);
        for (i, l) in labels.iter().enumerate() {
            let prev = index.insert(l.clone(), i);
            assert!(prev.is_none(), "duplicate label `{l}`");
        }
        let (offsets, adjacency) = csr(n, &edges);
        let tree = LabeledTree {
            labels,
            index,
            offsets,
            adjacency,
        };
        debug_assert_eq!(tree.rooted(0).order.len(), n, "parent array is not connected");
        tree
    }

    /// Parses the edge-list text format: one edge per line as two
    /// whitespace-separated tokens; blank lines and lines starting with `#`
    /// are ignored. A line with a single token declares an isolated node,
    /// which is only valid when it is the whole tree.
    pub fn parse_edge_list(text: &str) -> Result<Self, TreeError> {
        let mut builder = Builder::default();
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut tokens = trimmed.split_whitespace();
            let a = tokens.next().unwrap();
            match (tokens.next(), tokens.next()) {
                (None, _) => builder.declare(a),
                (Some(b), None) => builder.push(a, b).map_err(|e| TreeError::AtLine {
                    line: line_no,
                    source: Box::new(e),
                })?,
                (Some(_), Some(extra)) => {
                    return Err(TreeError::Parse {
                        line: line_no,
                        message: format!("expected two labels, found extra token `{extra}`"),
                    })
                }
            }
        }
        builder.finish()
    }

    pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Self, TreeError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| TreeError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_edge_list(&text)
    }

    /// Serializes to the edge-list text format, edges in internal order.
    pub fn to_edge_list_text(&self) -> String {
        let mut out = String::with_capacity(self.len() * 16);
        if self.len() == 1 {
            out.push_str(self.label(0));
            out.push('\n');
        }
        for (a, b) in self.edges() {
            out.push_str(self.label(a));
            out.push(' ');
            out.push_str(self.label(b));
            out.push('\n');
        }
        out
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// Always false; a tree has at least one node.
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn require(&self, label: &str) -> Result<usize, TreeError> {
        self.index_of(label)
            .ok_or_else(|| TreeError::UnknownLabel(label.to_string()))
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Each undirected edge once, as `(smaller index, larger index)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).flat_map(move |a| {
            self.neighbors(a)
                .iter()
                .filter(move |&&b| a < b)
                .map(move |&b| (a, b))
        })
    }

    /// Orients the tree away from `root`.
    pub fn rooted(&self, root: usize) -> RootedTree {
        let n = self.len();
        let mut parent = vec![NO_PARENT; n];
        let mut order = Vec::with_capacity(n);
        order.push(root);
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &w in self.neighbors(v) {
                if w != parent[v] {
                    parent[w] = v;
                    order.push(w);
                }
            }
        }
        let mut size = vec![1usize; n];
        for &v in order.iter().skip(1).rev() {
            size[parent[v]] += size[v];
        }
        RootedTree {
            root,
            parent,
            order,
            size,
        }
    }

    /// Subtree sizes with the tree viewed as rooted at `root`.
    pub fn subtree_sizes(&self, root: &str) -> Result<SubtreeSizeTable, TreeError> {
        let r = self.require(root)?;
        Ok(SubtreeSizeTable {
            root: r,
            sizes: self.rooted(r).size,
        })
    }

    /// Edge count of the longest simple path.
    pub fn diameter(&self) -> usize {
        self.longest_path().len() - 1
    }

    /// A longest path, found with two breadth-first sweeps.
    pub fn longest_path(&self) -> Vec<usize> {
        let (a, _) = self.farthest_from(0);
        let (b, parent) = self.farthest_from(a);
        let mut path = vec![b];
        let mut v = b;
        while v != a {
            v = parent[v];
            path.push(v);
        }
        path
    }

    fn farthest_from(&self, start: usize) -> (usize, Vec<usize>) {
        let n = self.len();
        let mut parent = vec![NO_PARENT; n];
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::with_capacity(n);
        dist[start] = 0;
        queue.push_back(start);
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            last = v;
            for &w in self.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    parent[w] = v;
                    queue.push_back(w);
                }
            }
        }
        (last, parent)
    }

    /// One or two central nodes (midpoints of a longest path).
    pub fn centers(&self) -> Vec<usize> {
        let path = self.longest_path();
        let len = path.len();
        if len % 2 == 1 {
            vec![path[len / 2]]
        } else {
            let mut c = vec![path[len / 2 - 1], path[len / 2]];
            c.sort_unstable();
            c
        }
    }

    pub fn rooted_canonical_code(&self, root: &str) -> Result<CanonicalCode, TreeError> {
        Ok(self.rooted_code_at(self.require(root)?))
    }

    /// Canonical encoding of the rooted shape of `(self, root)`.
    ///
    /// The code of a node is its child count as a big-endian `u32` followed
    /// by the codes of its children in sorted order. Codes are prefix free,
    /// so equal codes mean equal rooted shapes.
    pub fn rooted_code_at(&self, root: usize) -> CanonicalCode {
        let rooted = self.rooted(root);
        let mut codes: Vec<Vec<u8>> = vec![Vec::new(); self.len()];
        let mut pending: Vec<Vec<Vec<u8>>> = vec![Vec::new(); self.len()];
        for &v in rooted.order.iter().rev() {
            let mut children = std::mem::take(&mut pending[v]);
            children.sort_unstable();
            let len = 4 + children.iter().map(Vec::len).sum::<usize>();
            let mut code = Vec::with_capacity(len);
            code.extend_from_slice(&(children.len() as u32).to_be_bytes());
            for c in children {
                code.extend_from_slice(&c);
            }
            let p = rooted.parent[v];
            if p == NO_PARENT {
                codes[v] = code;
            } else {
                pending[p].push(code);
            }
        }
        CanonicalCode(std::mem::take(&mut codes[root]))
    }

    /// Canonical encoding of the unrooted shape: the smallest rooted code
    /// over the center(s).
    pub fn unrooted_canonical_code(&self) -> CanonicalCode {
        self.centers()
            .into_iter()
            .map(|c| self.rooted_code_at(c))
            .min()
            .unwrap()
    }

    /// Partition of the nodes into classes of indistinguishable nodes, i.e.
    /// nodes at which the tree has the same rooted shape.
    ///
    /// Every automorphism fixes the center, so two nodes are equivalent iff
    /// the chains of subtree types from the center down to them agree. Runs
    /// in `O(n log n)` using interned integer subtree types.
    pub fn equivalence_classes(&self) -> EquivalenceClasses {
        let n = self.len();
        let centers = self.centers();
        let c1 = centers[0];
        let c2 = centers.get(1).copied();
        let rooted = self.rooted(c1);

        let mut interner: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut shape = vec![0u32; n];
        let mut child_shapes: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &v in rooted.order.iter().rev() {
            let mut kids = std::mem::take(&mut child_shapes[v]);
            if v == c1 {
                if let Some(c2) = c2 {
                    // The side of c1 without the c2 branch.
                    let other = shape[c2];
                    let pos = kids.iter().position(|&s| s == other).unwrap();
                    kids.swap_remove(pos);
                }
            }
            kids.sort_unstable();
            let next = interner.len() as u32;
            let id = *interner.entry(kids).or_insert(next);
            shape[v] = id;
            let p = rooted.parent[v];
            if p != NO_PARENT {
                child_shapes[p].push(id);
            }
        }

        // Orbit keys: (orbit of the parent, subtree type).
        const VIRTUAL: u32 = u32::MAX;
        let mut orbit_ids: HashMap<(u32, u32), u32> = HashMap::new();
        let mut orbit = vec![0u32; n];
        let mut intern = |key: (u32, u32)| {
            let next = orbit_ids.len() as u32;
            *orbit_ids.entry(key).or_insert(next)
        };
        for &v in &rooted.order {
            let p = rooted.parent[v];
            orbit[v] = if v == c1 || Some(v) == c2 {
                intern((VIRTUAL, shape[v]))
            } else {
                intern((orbit[p], shape[v]))
            };
        }
        EquivalenceClasses::from_keys(&orbit)
    }

    /// Structural hash used to tie derived objects to their tree.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.len().hash(&mut h);
        self.offsets.hash(&mut h);
        self.adjacency.hash(&mut h);
        h.finish()
    }
}

fn csr(n: usize, edges: &[(usize, usize)]) -> (Vec<usize>, Vec<usize>) {
    let mut deg = vec![0usize; n + 1];
    for &(a, b) in edges {
        deg[a] += 1;
        deg[b] += 1;
    }
    let mut offsets = vec![0usize; n + 1];
    for v in 0..n {
        offsets[v + 1] = offsets[v] + deg[v];
    }
    let mut fill = offsets.clone();
    let mut adjacency = vec![0usize; 2 * edges.len()];
    for &(a, b) in edges {
        adjacency[fill[a]] = b;
        fill[a] += 1;
        adjacency[fill[b]] = a;
        fill[b] += 1;
    }
    (offsets, adjacency)
}

#[derive(Default)]
struct Builder {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<(usize, usize)>,
    sets: DisjointSets,
}

impl Builder {
    fn intern(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len();
        let owned = label.to_string();
        self.labels.push(owned.clone());
        self.index.insert(owned, i);
        self.sets.push();
        i
    }

    fn declare(&mut self, label: &str) {
        self.intern(label);
    }

    fn push(&mut self, a: &str, b: &str) -> Result<(), TreeError> {
        if a == b {
            return Err(TreeError::SelfLoop(a.to_string()));
        }
        let ia = self.intern(a);
        let ib = self.intern(b);
        if !self.sets.union(ia, ib) {
            // A repeated edge also closes a cycle; tell the two apart here.
            let repeated = self.edges.iter().any(|&(x, y)| (x, y) == (ia, ib) || (x, y) == (ib, ia));
            return Err(if repeated {
                TreeError::DuplicateEdge(a.to_string(), b.to_string())
            } else {
                TreeError::Cycle(a.to_string(), b.to_string())
            });
        }
        self.edges.push((ia, ib));
        Ok(())
    }

    fn finish(mut self) -> Result<LabeledTree, TreeError> {
        let n = self.labels.len();
        if n == 0 {
            return Err(TreeError::Empty);
        }
        if self.edges.len() + 1 != n {
            let anchor = self.sets.find(0);
            let detached = (0..n).find(|&v| self.sets.find(v) != anchor).unwrap();
            return Err(TreeError::Disconnected {
                components: n - self.edges.len(),
                anchor: self.labels[0].clone(),
                detached: self.labels[detached].clone(),
            });
        }
        let (offsets, adjacency) = csr(n, &self.edges);
        Ok(LabeledTree {
            labels: self.labels,
            index: self.index,
            offsets,
            adjacency,
        })
    }
}

/// A tree oriented away from a root: parent pointers, breadth-first order
/// (root first) and subtree sizes, all over dense indices.
#[derive(Debug, Clone)]
pub struct RootedTree {
    pub root: usize,
    pub parent: Vec<usize>,
    pub order: Vec<usize>,
    pub size: Vec<usize>,
}

impl RootedTree {
    /// Children of `v` in this orientation.
    pub fn children<'a>(&'a self, tree: &'a LabeledTree, v: usize) -> impl Iterator<Item = usize> + 'a {
        let p = self.parent[v];
        tree.neighbors(v).iter().copied().filter(move |&w| w != p)
    }
}

/// Sizes of the subtrees hanging below every node for a fixed root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtreeSizeTable {
    pub root: usize,
    pub sizes: Vec<usize>,
}

impl SubtreeSizeTable {
    pub fn get(&self, tree: &LabeledTree, label: &str) -> Option<usize> {
        tree.index_of(label).map(|i| self.sizes[i])
    }

    /// Sizes keyed by label.
    pub fn by_label<'a>(&'a self, tree: &'a LabeledTree) -> HashMap<&'a str, usize> {
        self.sizes
            .iter()
            .enumerate()
            .map(|(i, &s)| (tree.label(i), s))
            .collect()
    }
}

/// A byte string identifying a rooted (or unrooted) shape.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalCode(pub Vec<u8>);

/// Partition of the nodes of a tree into indistinguishable classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceClasses {
    pub class_of: Vec<usize>,
    pub classes: Vec<Vec<usize>>,
}

impl EquivalenceClasses {
    /// Groups nodes with equal keys; class ids follow first appearance by
    /// node index.
    pub fn from_keys<K: Hash + Eq + Clone>(keys: &[K]) -> Self {
        let mut ids: HashMap<K, usize> = HashMap::new();
        let mut class_of = Vec::with_capacity(keys.len());
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for (v, k) in keys.iter().enumerate() {
            let next = ids.len();
            let id = *ids.entry(k.clone()).or_insert(next);
            if id == classes.len() {
                classes.push(Vec::new());
            }
            classes[id].push(v);
            class_of.push(id);
        }
        EquivalenceClasses { class_of, classes }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_size(&self, v: usize) -> usize {
        self.classes[self.class_of[v]].len()
    }
}
