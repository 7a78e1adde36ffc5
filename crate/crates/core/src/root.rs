//! Conditional root posterior of a tree shape and confidence sets for the
//! first node.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use crate::logmath::{log_sum_exp, log_ties, LogFactorials};
use crate::tree::{LabeledTree, RootedTree};

/// Slack on the mass test so that sets reaching exactly `1 - eps` in exact
/// arithmetic are not pushed one node further by rounding.
const MASS_SLACK: f64 = 1e-12;

/// `log #hist(t, v)` for every node, and the normalized root posterior.
#[derive(Debug, Clone)]
pub struct RootPosterior {
    fingerprint: u64,
    log_hist: Vec<f64>,
    log_prob: Vec<f64>,
    total_log_hist: f64,
}

impl RootPosterior {
    pub fn len(&self) -> usize {
        self.log_prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_prob.is_empty()
    }

    /// `log #hist(t, v)`.
    pub fn log_hist(&self, v: usize) -> f64 {
        self.log_hist[v]
    }

    pub fn log_hist_all(&self) -> &[f64] {
        &self.log_hist
    }

    /// Log posterior probability that `v` arrived first.
    pub fn log_prob(&self, v: usize) -> f64 {
        self.log_prob[v]
    }

    pub fn log_prob_all(&self) -> &[f64] {
        &self.log_prob
    }

    pub fn prob(&self, v: usize) -> f64 {
        self.log_prob[v].exp()
    }

    /// `log #hist(t)`.
    pub fn total_log_hist(&self) -> f64 {
        self.total_log_hist
    }

    /// Whether this posterior was computed from `tree`.
    pub fn matches(&self, tree: &LabeledTree) -> bool {
        tree.len() == self.len() && tree.fingerprint() == self.fingerprint
    }

    /// Node indices by descending probability, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| desc(self.log_prob[a], self.log_prob[b]).then(a.cmp(&b)));
        idx
    }

    /// Display order: descending probability, with tied runs ordered by
    /// label.
    pub fn display_order(&self, tree: &LabeledTree) -> Vec<usize> {
        let mut idx = self.ranking();
        let mut start = 0;
        while start < idx.len() {
            let head = self.log_prob[idx[start]];
            let mut end = start + 1;
            while end < idx.len() && log_ties(head, self.log_prob[idx[end]]) {
                end += 1;
            }
            idx[start..end].sort_by(|&a, &b| tree.label(a).cmp(tree.label(b)));
            start = end;
        }
        idx
    }
}

fn desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Rumor centrality of every node in linear time.
///
/// Anchored at node 0: `log #hist(t, 0) = log (n-1)! - sum_{v != 0} log n_v`,
/// and moving the root across an edge to a child `v` adds
/// `log n_v - log (n - n_v)`. The transfers are accumulated as offsets from
/// the anchor and normalized on their own, so high-precision ties survive even
/// when `log #hist` itself is of order `n log n`.
pub fn log_hist_counts(tree: &LabeledTree) -> RootPosterior {
    let n = tree.len();
    let rooted = tree.rooted(0);
    let offset = anchor_offsets(&rooted, n);
    // Summed in index order so the result does not depend on adjacency order.
    let base = LogFactorials::up_to(n - 1).get(n - 1)
        - (1..n).map(|v| (rooted.size[v] as f64).ln()).sum::<f64>();
    let norm = log_sum_exp(&offset);
    let log_prob = offset.iter().map(|r| r - norm).collect();
    let log_hist = offset.iter().map(|r| base + r).collect();
    RootPosterior {
        fingerprint: tree.fingerprint(),
        log_hist,
        log_prob,
        total_log_hist: base + norm,
    }
}

fn anchor_offsets(rooted: &RootedTree, n: usize) -> Vec<f64> {
    let mut offset = vec![0.0; n];
    for &v in &rooted.order[1..] {
        let nv = rooted.size[v];
        assert!(nv < n, "transfer across an edge never empties the complement");
        offset[v] = offset[rooted.parent[v]] + (nv as f64).ln() - ((n - nv) as f64).ln();
    }
    offset
}

/// `#hist(t, root) = (n-1)! / prod_{v != root} n_v` in exact integer
/// arithmetic, or `None` on `u128` overflow.
pub fn exact_history_count(tree: &LabeledTree, root: usize) -> Option<u128> {
    let n = tree.len();
    let rooted = tree.rooted(root);
    let mut num: u128 = 1;
    for k in 2..n as u128 {
        num = num.checked_mul(k)?;
    }
    let mut den: u128 = 1;
    for &v in &rooted.order[1..] {
        den = den.checked_mul(rooted.size[v] as u128)?;
    }
    debug_assert_eq!(num % den, 0);
    Some(num / den)
}

/// A set of candidate first nodes with posterior mass at least its level.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet {
    /// Node indices, by descending probability.
    pub nodes: Vec<usize>,
    /// `1 - epsilon`.
    pub level: f64,
    pub achieved_mass: f64,
    /// True when nodes tying the boundary were added past the minimal prefix.
    pub tie_expanded: bool,
}

impl ConfidenceSet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.nodes.contains(&v)
    }

    /// Membership mask over all `n` nodes.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &v in &self.nodes {
            m[v] = true;
        }
        m
    }

    pub fn labels<'a>(&self, tree: &'a LabeledTree) -> Vec<&'a str> {
        self.nodes.iter().map(|&v| tree.label(v)).collect()
    }
}

fn check_epsilon(epsilon: f64) {
    assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0,1), got {epsilon}");
}

/// Smallest high-probability prefix reaching mass `1 - epsilon`, closed
/// under ties with its last member.
pub fn confidence_set(posterior: &RootPosterior, epsilon: f64) -> ConfidenceSet {
    check_epsilon(epsilon);
    let order = posterior.ranking();
    let lp = posterior.log_prob_all();
    let target = 1.0 - epsilon;
    let mut mass = 0.0;
    let mut k = 0;
    while k < order.len() {
        mass += lp[order[k]].exp();
        k += 1;
        if mass >= target - MASS_SLACK {
            break;
        }
    }
    let boundary = lp[order[k - 1]];
    let minimal = k;
    while k < order.len() && log_ties(boundary, lp[order[k]]) {
        mass += lp[order[k]].exp();
        k += 1;
    }
    ConfidenceSet {
        nodes: order[..k].to_vec(),
        level: target,
        achieved_mass: mass.min(1.0),
        tie_expanded: k > minimal,
    }
}

/// Like [`confidence_set`], but adds whole classes of indistinguishable
/// nodes at a time.
pub fn confidence_set_equivalence_aware(
    posterior: &RootPosterior,
    tree: &LabeledTree,
    epsilon: f64,
) -> ConfidenceSet {
    check_epsilon(epsilon);
    let eq = tree.equivalence_classes();
    let lp = posterior.log_prob_all();
    // Members of a class share one probability; use the first as representative.
    let mut classes: Vec<usize> = (0..eq.len()).collect();
    let rep = |c: usize| eq.classes[c][0];
    classes.sort_by(|&a, &b| desc(lp[rep(a)], lp[rep(b)]).then(rep(a).cmp(&rep(b))));
    let class_mass = |c: usize| eq.classes[c].iter().map(|&v| lp[v].exp()).sum::<f64>();
    let target = 1.0 - epsilon;
    let mut mass = 0.0;
    let mut k = 0;
    while k < classes.len() {
        mass += class_mass(classes[k]);
        k += 1;
        if mass >= target - MASS_SLACK {
            break;
        }
    }
    let boundary = lp[rep(classes[k - 1])];
    let minimal = k;
    while k < classes.len() && log_ties(boundary, lp[rep(classes[k])]) {
        mass += class_mass(classes[k]);
        k += 1;
    }
    let mut nodes: Vec<usize> = classes[..k].iter().flat_map(|&c| eq.classes[c].iter().copied()).collect();
    nodes.sort_by(|&a, &b| desc(lp[a], lp[b]).then(a.cmp(&b)));
    let no_ties_set = confidence_set(posterior, epsilon);
    ConfidenceSet {
        tie_expanded: k > minimal || nodes.len() > no_ties_set.nodes.len(),
        nodes,
        level: target,
        achieved_mass: mass.min(1.0),
    }
}

/// Growth model for the comparison size bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundModel {
    Ua,
    Lpa,
}

impl FromStr for BoundModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ua" | "uniform" => Ok(BoundModel::Ua),
            "lpa" | "linear" => Ok(BoundModel::Lpa),
            other => Err(format!("unknown bound model `{other}`; expected ua or lpa")),
        }
    }
}

impl fmt::Display for BoundModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundModel::Ua => "ua",
            BoundModel::Lpa => "lpa",
        })
    }
}

/// Worst-case confidence set sizes from earlier root-finding results:
/// `floor(2.5 log(1/eps) / eps)` for UA and
/// `floor(0.23 log^2(1/eps) / eps^4)` for LPA.
pub fn bound_k(model: BoundModel, epsilon: f64) -> u64 {
    check_epsilon(epsilon);
    let l = (1.0 / epsilon).ln();
    let v = match model {
        BoundModel::Ua => 2.5 * l / epsilon,
        BoundModel::Lpa => 0.23 * l * l / epsilon.powi(4),
    };
    v.floor() as u64
}

/// `%.{digits}g`-style formatting.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    // Same significant digits as the exponent form; only the point moves.
    let (neg, m) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa),
    };
    let ds: Vec<u8> = m.bytes().filter(|b| b.is_ascii_digit()).collect();
    let mut out = String::with_capacity(digits + 8);
    if neg {
        out.push('-');
    }
    if exp >= 0 {
        let point = exp as usize + 1;
        out.extend(ds[..point].iter().map(|&b| b as char));
        out.push('.');
        out.extend(ds[point..].iter().map(|&b| b as char));
    } else {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.extend(ds.iter().map(|&b| b as char));
    }
    let keep = trim_zeros(&out).len();
    out.truncate(keep);
    out
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Column suffix for a confidence level, e.g. `0.95`.
pub fn level_tag(level: f64) -> String {
    format_sig(level, 12)
}

/// Writes `node,log_hist,root_prob,in_confset_<level>...` rows in display
/// order.
pub fn write_posterior_csv<W: Write>(
    out: &mut W,
    tree: &LabeledTree,
    posterior: &RootPosterior,
    sets: &[ConfidenceSet],
) -> io::Result<()> {
    write!(out, "node,log_hist,root_prob")?;
    for s in sets {
        write!(out, ",in_confset_{}", level_tag(s.level))?;
    }
    writeln!(out)?;
    let masks: Vec<Vec<bool>> = sets.iter().map(|s| s.mask(tree.len())).collect();
    for v in posterior.display_order(tree) {
        write!(
            out,
            "{},{},{}",
            csv_field(tree.label(v)),
            format_sig(posterior.log_hist(v), 12),
            format_sig(posterior.prob(v), 12)
        )?;
        for m in &masks {
            write!(out, ",{}", u8::from(m[v]))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn csv_field(s: &str) -> Cow<'_, str> {
    if s.contains([',', '"', '\n']) {
        Cow::Owned(format!("\"{}\"", s.replace('"', "\"\"")))
    } else {
        Cow::Borrowed(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tree(edges: &[(&str, &str)]) -> LabeledTree {
        LabeledTree::from_edge_list(edges).unwrap()
    }

    fn path(n: usize) -> LabeledTree {
        let labels: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        let edges: Vec<(&str, &str)> = labels.windows(2).map(|w| (w[0].as_str(), w[1].as_str())).collect();
        if n == 1 {
            LabeledTree::single_node("p0")
        } else {
            tree(&edges)
        }
    }

    fn star4() -> LabeledTree {
        tree(&[("C", "x"), ("C", "y"), ("C", "z")])
    }

    fn prob(t: &LabeledTree, p: &RootPosterior, l: &str) -> f64 {
        p.prob(t.index_of(l).unwrap())
    }

    fn set_labels(t: &LabeledTree, s: &ConfidenceSet) -> Vec<String> {
        let mut v: Vec<String> = s.labels(t).into_iter().map(String::from).collect();
        v.sort();
        v
    }

    #[test]
    fn path_of_three() {
        let t = tree(&[("a", "b"), ("b", "c")]);
        let p = log_hist_counts(&t);
        assert!((prob(&t, &p, "a") - 0.25).abs() < 1e-12);
        assert!((prob(&t, &p, "b") - 0.5).abs() < 1e-12);
        assert!((p.total_log_hist().exp() - 4.0).abs() < 1e-9);
        assert!(p.matches(&t));
    }

    #[test]
    fn star_counts() {
        let t = star4();
        let p = log_hist_counts(&t);
        let c = t.index_of("C").unwrap();
        assert!((p.log_hist(c).exp() - 6.0).abs() < 1e-9);
        assert!((p.log_hist(t.index_of("y").unwrap()).exp() - 2.0).abs() < 1e-9);
        assert!((p.total_log_hist().exp() - 12.0).abs() < 1e-9);
        assert_eq!(exact_history_count(&t, c), Some(6));
        assert!((prob(&t, &p, "z") - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn paths_have_power_of_two_histories() {
        for n in 1..=10 {
            let t = path(n);
            let p = log_hist_counts(&t);
            assert!((p.total_log_hist() - ((n - 1) as f64) * 2f64.ln()).abs() < 1e-9);
            assert!(p.log_hist(0).abs() < 1e-9);
            assert_eq!(exact_history_count(&t, n - 1), Some(1));
            let lse = log_sum_exp(p.log_prob_all());
            assert!(lse.abs() < 1e-9);
        }
    }

    #[test]
    fn single_node_posterior() {
        let t = LabeledTree::single_node("solo");
        let p = log_hist_counts(&t);
        assert_eq!(p.log_prob(0), 0.0);
        let s = confidence_set(&p, 0.5);
        assert_eq!(s.nodes, vec![0]);
    }

    #[test]
    fn star_confidence_sets() {
        let t = star4();
        let p = log_hist_counts(&t);
        let s = confidence_set(&p, 0.45);
        assert_eq!(s.len(), 4);
        assert!(s.tie_expanded);
        let s = confidence_set(&p, 0.51);
        assert_eq!(set_labels(&t, &s), vec!["C"]);
        assert!(!s.tie_expanded);
        assert!((s.achieved_mass - 0.5).abs() < 1e-12);
        assert_eq!(confidence_set_equivalence_aware(&p, &t, 0.45).len(), 4);
    }

    #[test]
    fn path_confidence_sets() {
        let t = tree(&[("a", "b"), ("b", "c")]);
        let p = log_hist_counts(&t);
        assert_eq!(confidence_set(&p, 0.4).len(), 3);
        let t4 = tree(&[("a", "b"), ("b", "c"), ("c", "d")]);
        let p4 = log_hist_counts(&t4);
        assert_eq!(confidence_set_equivalence_aware(&p4, &t4, 0.2).len(), 4);
        assert_eq!(set_labels(&t4, &confidence_set_equivalence_aware(&p4, &t4, 0.3)), vec!["b", "c"]);
        // Reaching exactly 1 - eps stops the prefix.
        assert_eq!(confidence_set(&p4, 0.25).len(), 2);
    }

    #[test]
    fn tiny_epsilon_takes_everything() {
        let t = tree(&[("a", "b"), ("b", "c"), ("b", "d"), ("d", "e")]);
        let p = log_hist_counts(&t);
        assert_eq!(confidence_set(&p, 1e-12).len(), 5);
    }

    #[test]
    fn sets_grow_as_epsilon_shrinks() {
        let t = tree(&[("a", "b"), ("b", "c"), ("b", "d"), ("d", "e"), ("e", "f"), ("e", "g"), ("a", "h")]);
        let p = log_hist_counts(&t);
        let mut prev: Option<Vec<bool>> = None;
        for eps in [0.9, 0.7, 0.5, 0.3, 0.2, 0.1, 0.05, 0.01] {
            let m = confidence_set(&p, eps).mask(t.len());
            if let Some(pm) = &prev {
                assert!(pm.iter().zip(&m).all(|(a, b)| !a || *b));
            }
            prev = Some(m);
        }
    }

    #[test]
    fn bounds() {
        assert_eq!(bound_k(BoundModel::Lpa, 0.05), 330_258);
        assert_eq!(bound_k(BoundModel::Lpa, 0.10), 12_194);
        assert_eq!(bound_k(BoundModel::Ua, 0.01), 1_151);
        assert_eq!("LPA".parse::<BoundModel>().unwrap(), BoundModel::Lpa);
    }

    #[test]
    fn significant_digit_format() {
        assert_eq!(format_sig(0.5, 12), "0.5");
        assert_eq!(format_sig(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(format_sig(1.0 / 6.0, 12), "0.166666666667");
        assert_eq!(format_sig(2.0f64.ln(), 12), "0.69314718056");
        assert_eq!(format_sig(1.5e-7, 12), "1.5e-07");
        assert_eq!(format_sig(123456.0, 12), "123456");
        assert_eq!(format_sig(1.234e15, 12), "1.234e+15");
        assert_eq!(format_sig(-3.25, 12), "-3.25");
        assert_eq!(format_sig(0.95, 12), "0.95");
        assert_eq!(format_sig(1.0 - 0.05, 12), "0.95");
        assert_eq!(format_sig(0.0, 12), "0");
        assert_eq!(format_sig(99999999999.96, 12), "100000000000");
        assert_eq!(format_sig(0.0001234, 12), "0.0001234");
        assert_eq!(format_sig(-0.00012345678901234, 12), "-0.000123456789012");
    }

    #[test]
    fn fixed_notation_matches_std_rounding() {
        let mut r = crate::rng::seeded(3);
        for _ in 0..20_000 {
            let x: f64 = (r.random::<f64>() - 0.5) * 10f64.powi(r.random_range(-4..12));
            let sci = format!("{:.11e}", x);
            let exp: i32 = sci.split_once('e').unwrap().1.parse().unwrap();
            if !(-4..12).contains(&exp) {
                continue;
            }
            let fixed = format!("{:.*}", (11 - exp) as usize, x);
            assert_eq!(format_sig(x, 12), trim_zeros(&fixed), "{x}");
        }
    }

    #[test]
    fn csv_rows() {
        let t = tree(&[("b", "a"), ("b", "c")]);
        let p = log_hist_counts(&t);
        let sets = vec![confidence_set(&p, 0.6)];
        let mut out = Vec::new();
        write_posterior_csv(&mut out, &t, &p, &sets).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "node,log_hist,root_prob,in_confset_0.4\nb,0.69314718056,0.5,1\na,0,0.25,0\nc,0,0.25,0\n"
        );
    }
}
