//! C ABI over `tree_history`.
//!
//! Every fallible function returns a [`ThStatus`] and writes results through
//! out-pointers. On failure a message is kept per thread and can be read
//! with [`th_last_error`]. Handles are opaque and must be released with the
//! matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tree_history::posterior;
use tree_history::root::{self, BoundModel, RootPosterior};
use tree_history::sampling::HistorySampler;
use tree_history::{experiments, rng, AttachmentKernel, LabeledTree};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    UnknownNode = 4,
    BufferTooSmall = 5,
    Mismatch = 6,
    Panic = 7,
}

/// Worst-case bound families for [`th_bound_k`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThBoundModel {
    Uniform = 0,
    Linear = 1,
}

/// An observed tree with its node labels.
pub struct ThTree {
    tree: LabeledTree,
    labels: Vec<CString>,
}

/// Root posterior of a tree.
pub struct ThPosterior {
    post: RootPosterior,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

type FfiResult = Result<(), (ThStatus, String)>;

fn guard<F: FnOnce() -> FfiResult>(f: F) -> ThStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ThStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ThStatus::Panic
        }
    }
}

fn fail<T>(status: ThStatus, msg: impl Into<String>) -> Result<T, (ThStatus, String)> {
    Err((status, msg.into()))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (ThStatus, String)> {
    if p.is_null() {
        return fail(ThStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (ThStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, (ThStatus, String)> {
    p.as_ref().ok_or_else(|| (ThStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (ThStatus, String)> {
    p.as_mut().ok_or_else(|| (ThStatus::NullPointer, format!("{what} is null")))
}

fn wrap_tree(tree: LabeledTree) -> *mut ThTree {
    let labels = tree
        .labels()
        .iter()
        .map(|l| CString::new(l.as_str()).expect("labels come from C strings or digits"))
        .collect();
    Box::into_raw(Box::new(ThTree { tree, labels }))
}

fn check_eps(eps: f64) -> FfiResult {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        fail(ThStatus::InvalidArgument, format!("epsilon must lie in (0,1), got {eps}"))
    }
}

fn check_post(tree: &ThTree, post: &ThPosterior) -> FfiResult {
    if post.post.matches(&tree.tree) {
        Ok(())
    } else {
        fail(ThStatus::Mismatch, "posterior was computed for a different tree")
    }
}

fn node_arg(tree: &ThTree, v: usize) -> FfiResult {
    if v < tree.tree.len() {
        Ok(())
    } else {
        fail(ThStatus::UnknownNode, format!("node index {v} out of range"))
    }
}

/// The message of the last failed call on this thread, or null. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn th_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses an edge list (two labels per line) into a new tree handle.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn th_tree_parse(text: *const c_char, out: *mut *mut ThTree) -> ThStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = str_arg(text, "text")?;
        let tree = LabeledTree::parse_edge_list(text).map_err(|e| (ThStatus::ParseError, e.to_string()))?;
        *out = wrap_tree(tree);
        Ok(())
    })
}

/// Reads an edge-list file into a new tree handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn th_tree_read(path: *const c_char, out: *mut *mut ThTree) -> ThStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let tree = LabeledTree::read_edge_list(path).map_err(|e| (ThStatus::ParseError, e.to_string()))?;
        *out = wrap_tree(tree);
        Ok(())
    })
}

/// Grows a random tree under `kernel` (e.g. `"linear"`, `"sublinear:0.5"`)
/// with shuffled labels. `root` receives the index of the first node.
///
/// # Safety
/// `kernel` must be a NUL-terminated string; `out` and `root` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn th_tree_generate(
    kernel: *const c_char,
    n: usize,
    seed: u64,
    out: *mut *mut ThTree,
    root: *mut usize,
) -> ThStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let root = out_arg(root, "root")?;
        let kernel: AttachmentKernel = str_arg(kernel, "kernel")?
            .parse()
            .map_err(|e: tree_history::GrowthError| (ThStatus::InvalidArgument, e.to_string()))?;
        let g = experiments::generate(&kernel, n, &mut rng::seeded(seed))
            .map_err(|e| (ThStatus::InvalidArgument, e.to_string()))?;
        let tree = g.observed();
        *root = tree.index_of(g.root_label()).expect("root is labeled");
        *out = wrap_tree(tree);
        Ok(())
    })
}

/// # Safety
/// `tree` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn th_tree_free(tree: *mut ThTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `tree` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn th_tree_len(tree: *const ThTree) -> usize {
    tree.as_ref().map_or(0, |t| t.tree.len())
}

/// Label of node `v`, or null when out of range. Owned by the tree.
///
/// # Safety
/// `tree` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn th_tree_label(tree: *const ThTree, v: usize) -> *const c_char {
    tree.as_ref()
        .and_then(|t| t.labels.get(v))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// # Safety
/// `tree` a live handle, `label` a NUL-terminated string, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn th_tree_index_of(tree: *const ThTree, label: *const c_char, out: *mut usize) -> ThStatus {
    guard(|| {
        let tree = ref_arg(tree, "tree")?;
        let label = str_arg(label, "label")?;
        let out = out_arg(out, "out")?;
        *out = tree
            .tree
            .index_of(label)
            .ok_or_else(|| (ThStatus::UnknownNode, format!("unknown node label `{label}`")))?;
        Ok(())
    })
}

/// Computes the root posterior of `tree`.
///
/// # Safety
/// `tree` a live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn th_posterior_new(tree: *const ThTree, out: *mut *mut ThPosterior) -> ThStatus {
    guard(|| {
        let tree = ref_arg(tree, "tree")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(ThPosterior {
            post: root::log_hist_counts(&tree.tree),
        }));
        Ok(())
    })
}

/// # Safety
/// `post` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn th_posterior_free(post: *mut ThPosterior) {
    if !post.is_null() {
        drop(Box::from_raw(post));
    }
}

/// Log of the number of histories rooted at `v`.
///
/// # Safety
/// All pointers valid; `post` computed from `tree`.
#[no_mangle]
pub unsafe extern "C" fn th_posterior_log_hist(
    tree: *const ThTree,
    post: *const ThPosterior,
    v: usize,
    out: *mut f64,
) -> ThStatus {
    guard(|| {
        let (tree, post) = (ref_arg(tree, "tree")?, ref_arg(post, "posterior")?);
        check_post(tree, post)?;
        node_arg(tree, v)?;
        *out_arg(out, "out")? = post.post.log_hist(v);
        Ok(())
    })
}

/// Root probabilities of all nodes, written to `buf[0..len)`, where `len`
/// must equal the tree size.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn th_posterior_root_probs(
    tree: *const ThTree,
    post: *const ThPosterior,
    buf: *mut f64,
    len: usize,
) -> ThStatus {
    guard(|| {
        let (tree, post) = (ref_arg(tree, "tree")?, ref_arg(post, "posterior")?);
        check_post(tree, post)?;
        if len != tree.tree.len() {
            return fail(ThStatus::BufferTooSmall, format!("buffer holds {len}, tree has {}", tree.tree.len()));
        }
        out_arg(buf, "buf")?;
        let out = std::slice::from_raw_parts_mut(buf, len);
        for (v, slot) in out.iter_mut().enumerate() {
            *slot = post.post.prob(v);
        }
        Ok(())
    })
}

/// Root confidence set at level `1 - eps`. Node indices go to
/// `buf[0..cap)` and the set size to `size`; when `cap` is too small only
/// `size` is written and `BufferTooSmall` returned.
///
/// # Safety
/// `buf` must hold `cap` entries (may be null when `cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn th_confidence_set(
    tree: *const ThTree,
    post: *const ThPosterior,
    eps: f64,
    buf: *mut usize,
    cap: usize,
    size: *mut usize,
) -> ThStatus {
    guard(|| {
        let (tree, post) = (ref_arg(tree, "tree")?, ref_arg(post, "posterior")?);
        check_post(tree, post)?;
        check_eps(eps)?;
        let size = out_arg(size, "size")?;
        let set = root::confidence_set(&post.post, eps);
        *size = set.len();
        if cap < set.len() {
            return fail(ThStatus::BufferTooSmall, format!("set has {} nodes, buffer holds {cap}", set.len()));
        }
        out_arg(buf, "buf")?;
        std::slice::from_raw_parts_mut(buf, set.len()).copy_from_slice(&set.nodes);
        Ok(())
    })
}

/// Worst-case confidence set size for uniform or linear attachment.
///
/// # Safety
/// `out` valid.
#[no_mangle]
pub unsafe extern "C" fn th_bound_k(model: ThBoundModel, eps: f64, out: *mut u64) -> ThStatus {
    guard(|| {
        check_eps(eps)?;
        let model = match model {
            ThBoundModel::Uniform => BoundModel::Ua,
            ThBoundModel::Linear => BoundModel::Lpa,
        };
        *out_arg(out, "out")? = root::bound_k(model, eps);
        Ok(())
    })
}

/// One history drawn uniformly at random: `buf[t]` is the node arriving at
/// time `t + 1`. `len` must equal the tree size.
///
/// # Safety
/// `buf` must hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn th_sample_history(
    tree: *const ThTree,
    post: *const ThPosterior,
    seed: u64,
    buf: *mut usize,
    len: usize,
) -> ThStatus {
    guard(|| {
        let (tree, post) = (ref_arg(tree, "tree")?, ref_arg(post, "posterior")?);
        check_post(tree, post)?;
        if len != tree.tree.len() {
            return fail(ThStatus::BufferTooSmall, format!("buffer holds {len}, tree has {}", tree.tree.len()));
        }
        out_arg(buf, "buf")?;
        let ordering = HistorySampler::new(&tree.tree, &post.post).fast(&mut rng::seeded(seed));
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&ordering);
        Ok(())
    })
}

/// Monte Carlo posterior of the arrival time of node `label`: `buf[t - 1]`
/// receives the mass at time `t`. `kernel` may be null for the uniform
/// history law.
///
/// # Safety
/// Strings NUL-terminated (or `kernel` null); `buf` must hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn th_arrival_posterior(
    tree: *const ThTree,
    post: *const ThPosterior,
    label: *const c_char,
    samples: usize,
    seed: u64,
    kernel: *const c_char,
    buf: *mut f64,
    len: usize,
) -> ThStatus {
    guard(|| {
        let (tree, post) = (ref_arg(tree, "tree")?, ref_arg(post, "posterior")?);
        check_post(tree, post)?;
        let label = str_arg(label, "label")?;
        let kernel: Option<AttachmentKernel> = if kernel.is_null() {
            None
        } else {
            Some(
                str_arg(kernel, "kernel")?
                    .parse()
                    .map_err(|e: tree_history::GrowthError| (ThStatus::InvalidArgument, e.to_string()))?,
            )
        };
        if len != tree.tree.len() {
            return fail(ThStatus::BufferTooSmall, format!("buffer holds {len}, tree has {}", tree.tree.len()));
        }
        out_arg(buf, "buf")?;
        let arrival = posterior::arrival_time_posterior_with(&tree.tree, &post.post, label, samples, seed, kernel.as_ref())
            .map_err(|e| match e {
                posterior::QueryError::UnknownNode(_) => (ThStatus::UnknownNode, e.to_string()),
                other => (ThStatus::InvalidArgument, other.to_string()),
            })?;
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&arrival.mass);
        Ok(())
    })
}
