//! Binary indexed (Fenwick) trees over nonnegative weights, used for
//! weighted draws with logarithmic updates.
//!
//! The free functions operate on any slice, which lets many small trees share
//! one allocation (see the backward history sampler).

use std::ops::{AddAssign, Sub};

pub trait Weight: Copy + Default + PartialOrd + AddAssign + Sub<Output = Self> {}
impl Weight for f64 {}
impl Weight for u64 {}

/// Adds `delta` to position `i` (0-based) of the tree stored in `tree`.
#[inline]
pub fn add<T: Weight>(tree: &mut [T], i: usize, delta: T) {
    let mut j = i + 1;
    while j <= tree.len() {
        tree[j - 1] += delta;
        j += j & j.wrapping_neg();
    }
}

/// Subtracts `delta` from position `i`; the position must hold at least
/// `delta`.
#[inline]
pub fn sub<T: Weight>(tree: &mut [T], i: usize, delta: T) {
    let mut j = i + 1;
    while j <= tree.len() {
        tree[j - 1] = tree[j - 1] - delta;
        j += j & j.wrapping_neg();
    }
}

/// Sum of positions `0..i`.
#[inline]
pub fn prefix<T: Weight>(tree: &[T], i: usize) -> T {
    let mut acc = T::default();
    let mut j = i;
    while j > 0 {
        acc += tree[j - 1];
        j &= j - 1;
    }
    acc
}

/// Smallest position whose inclusive prefix sum exceeds `target`, or
/// `tree.len()` when `target` is at least the total.
#[inline]
pub fn search<T: Weight>(tree: &[T], mut target: T) -> usize {
    let n = tree.len();
    let mut pos = 0usize;
    let mut step = if n == 0 { 0 } else { 1usize << (usize::BITS - 1 - n.leading_zeros()) };
    while step > 0 {
        let next = pos + step;
        if next <= n && tree[next - 1] <= target {
            pos = next;
            target = target - tree[next - 1];
        }
        step >>= 1;
    }
    pos
}

/// Builds a tree in place from plain weights in linear time.
pub fn build<T: Weight>(values: &mut [T]) {
    let n = values.len();
    for j in 1..=n {
        let up = j + (j & j.wrapping_neg());
        if up <= n {
            let v = values[j - 1];
            values[up - 1] += v;
        }
    }
}

/// Owned Fenwick tree that also remembers the raw weights.
#[derive(Debug, Clone)]
pub struct Fenwick<T: Weight> {
    tree: Vec<T>,
    weights: Vec<T>,
}

impl<T: Weight> Fenwick<T> {
    pub fn zeros(n: usize) -> Self {
        Fenwick {
            tree: vec![T::default(); n],
            weights: vec![T::default(); n],
        }
    }

    pub fn from_weights(weights: Vec<T>) -> Self {
        let mut tree = weights.clone();
        build(&mut tree);
        Fenwick { tree, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    pub fn set(&mut self, i: usize, w: T) {
        let old = self.weights[i];
        self.weights[i] = w;
        if w >= old {
            add(&mut self.tree, i, w - old);
        } else {
            // Unsigned weights cannot carry a negative delta.
            sub(&mut self.tree, i, old - w);
        }
    }

    pub fn prefix(&self, i: usize) -> T {
        prefix(&self.tree, i)
    }

    pub fn total(&self) -> T {
        prefix(&self.tree, self.tree.len())
    }

    /// Position selected by a draw `target` in `[0, total)`.
    pub fn search(&self, target: T) -> usize {
        search(&self.tree, target).min(self.tree.len().saturating_sub(1))
    }
}
