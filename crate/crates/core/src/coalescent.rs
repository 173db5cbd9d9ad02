//! The n-coalescent prior over binary trees with merge times.
//!
//! Times are nonnegative depths measured from the leaves: `t_0 = 0` and
//! `t_k = t_{k-1} + Δ_k`. Leaves carry ids `0..n`; merge `k` (0-based)
//! creates node `n + k`.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
}

/// Rate of the exponential waiting time while `active` sets remain.
pub fn merge_rate(active: usize) -> f64 {
    let m = active as f64;
    m * (m - 1.0) / 2.0
}

impl Dendrogram {
    /// Builds and validates a dendrogram. Children are stored with
    /// `left < right`.
    pub fn new(n_leaves: usize, merges: Vec<Merge>) -> Result<Self> {
        let merges = merges
            .into_iter()
            .map(|m| Merge {
                left: m.left.min(m.right),
                right: m.left.max(m.right),
                time: m.time,
            })
            .collect();
        let tree = Dendrogram { n_leaves, merges };
        tree.validate()?;
        Ok(tree)
    }

    /// Checks structure: `n - 1` merges, each child used once and created
    /// before its parent, and times finite, nonnegative and nondecreasing.
    ///
    /// Ties are allowed because clamped greedy steps and linkage baselines
    /// produce them; they have zero prior density only in the limit.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_leaves;
        if n < 1 {
            return Err(Error::InvalidTree("a tree needs at least one leaf".into()));
        }
        if self.merges.len() != n - 1 {
            return Err(Error::InvalidTree(format!(
                "expected {} merges, found {}",
                n - 1,
                self.merges.len()
            )));
        }
        let mut used = vec![false; 2 * n - 1];
        let mut prev = 0.0;
        for (k, m) in self.merges.iter().enumerate() {
            let created = n + k;
            for c in [m.left, m.right] {
                if c >= created {
                    return Err(Error::InvalidTree(format!(
                        "merge {k} uses node {c} before it exists"
                    )));
                }
                if used[c] {
                    return Err(Error::InvalidTree(format!("node {c} merged twice")));
                }
                used[c] = true;
            }
            if m.left == m.right {
                return Err(Error::InvalidTree(format!("merge {k} joins node {} with itself", m.left)));
            }
            if !m.time.is_finite() || m.time < 0.0 {
                return Err(Error::InvalidTree(format!("merge {k} has time {}", m.time)));
            }
            if m.time < prev {
                return Err(Error::InvalidTree(format!(
                    "merge times decrease at merge {k}: {} < {prev}",
                    m.time
                )));
            }
            prev = m.time;
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        2 * self.n_leaves - 1
    }

    pub fn root(&self) -> usize {
        self.n_nodes() - 1
    }

    pub fn times(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.time).collect()
    }

    /// Waiting times `Δ_k = t_k - t_{k-1}`.
    pub fn deltas(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.merges
            .iter()
            .map(|m| {
                let d = m.time - prev;
                prev = m.time;
                d
            })
            .collect()
    }

    /// Creation time of every node (leaves at 0).
    pub fn node_times(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.n_nodes()];
        for (k, m) in self.merges.iter().enumerate() {
            t[self.n_leaves + k] = m.time;
        }
        t
    }

    /// Parent of each node; the root maps to `None`.
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut p = vec![None; self.n_nodes()];
        for (k, m) in self.merges.iter().enumerate() {
            p[m.left] = Some(self.n_leaves + k);
            p[m.right] = Some(self.n_leaves + k);
        }
        p
    }

    /// Sorted leaf sets below every node.
    pub fn leaf_sets(&self) -> Vec<Vec<usize>> {
        let n = self.n_leaves;
        let mut sets: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for m in &self.merges {
            let mut s = sets[m.left].clone();
            s.extend_from_slice(&sets[m.right]);
            s.sort_unstable();
            sets.push(s);
        }
        sets
    }

    /// Assignment of leaves to the `n_clusters` clusters obtained by undoing
    /// the last `n_clusters - 1` merges. Cluster ids follow the smallest
    /// leaf in each cluster.
    pub fn cut(&self, n_clusters: usize) -> Vec<usize> {
        let n = self.n_leaves;
        let c = n_clusters.clamp(1, n);
        let mut uf: Vec<usize> = (0..n).collect();
        fn find(uf: &mut [usize], mut x: usize) -> usize {
            while uf[x] != x {
                uf[x] = uf[uf[x]];
                x = uf[x];
            }
            x
        }
        // representative leaf for each node
        let mut rep: Vec<usize> = (0..n).collect();
        for m in self.merges.iter().take(n - c) {
            let (a, b) = (rep[m.left], rep[m.right]);
            let (ra, rb) = (find(&mut uf, a), find(&mut uf, b));
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            uf[hi] = lo;
            rep.push(lo);
        }
        let roots: Vec<usize> = (0..n).map(|i| find(&mut uf, i)).collect();
        let mut ids = vec![usize::MAX; n];
        let mut next = 0;
        roots
            .iter()
            .map(|&r| {
                if ids[r] == usize::MAX {
                    ids[r] = next;
                    next += 1;
                }
                ids[r]
            })
            .collect()
    }

    /// Applies a leaf relabelling: leaf `i` becomes `perm[i]`.
    pub fn relabel_leaves(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_leaves;
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: perm.len(),
            });
        }
        let map = |c: usize| if c < n { perm[c] } else { c };
        Dendrogram::new(
            n,
            self.merges
                .iter()
                .map(|m| Merge {
                    left: map(m.left),
                    right: map(m.right),
                    time: m.time,
                })
                .collect(),
        )
    }

    /// Newick string with branch lengths; leaves are named by index or by
    /// `names` when given.
    pub fn to_newick(&self, names: Option<&[String]>) -> String {
        let n = self.n_leaves;
        let times = self.node_times();
        let parents = self.parents();
        let children: Vec<(usize, usize)> = self.merges.iter().map(|m| (m.left, m.right)).collect();
        let label = |i: usize| match names {
            Some(ns) => ns[i].clone(),
            None => i.to_string(),
        };
        let mut out = String::new();
        // iterative post-order to avoid deep recursion on caterpillars
        enum Step {
            Open(usize),
            Comma,
            Close(usize),
        }
        let mut stack = vec![Step::Open(self.root())];
        while let Some(step) = stack.pop() {
            match step {
                Step::Open(node) if node < n => {
                    out.push_str(&label(node));
                    push_length(&mut out, node, &times, &parents);
                }
                Step::Open(node) => {
                    let (l, r) = children[node - n];
                    out.push('(');
                    stack.push(Step::Close(node));
                    stack.push(Step::Open(r));
                    stack.push(Step::Comma);
                    stack.push(Step::Open(l));
                }
                Step::Comma => out.push(','),
                Step::Close(node) => {
                    out.push(')');
                    push_length(&mut out, node, &times, &parents);
                }
            }
        }
        out.push(';');
        out
    }

    /// Parses a binary Newick tree with branch lengths.
    ///
    /// Leaf labels must be the integers `0..n`, or names listed in `names`.
    /// Node times are recovered as the maximum over children of child time
    /// plus branch length; merges are ordered by time.
    pub fn from_newick(s: &str, names: Option<&[String]>) -> Result<Self> {
        let parsed = NewickParser::new(s).parse()?;
        let n = parsed.leaves.len();
        let mut leaf_ids = vec![0usize; n];
        let mut seen = vec![false; n];
        for (slot, name) in parsed.leaves.iter().enumerate() {
            let id = match names {
                Some(ns) => ns.iter().position(|x| x == name),
                None => name.parse::<usize>().ok(),
            }
            .filter(|&i| i < n)
            .ok_or_else(|| Error::InvalidTree(format!("unknown leaf label {name:?}")))?;
            if seen[id] {
                return Err(Error::InvalidTree(format!("leaf {name:?} appears twice")));
            }
            seen[id] = true;
            leaf_ids[slot] = id;
        }
        // compute times bottom-up; internal nodes are created in post-order
        let mut time = vec![0.0; parsed.nodes.len()];
        for (i, node) in parsed.nodes.iter().enumerate() {
            if let PNode::Internal(a, b) = node {
                let ta = time[*a] + parsed.lengths[*a];
                let tb = time[*b] + parsed.lengths[*b];
                time[i] = ta.max(tb);
            }
        }
        let mut internal: Vec<usize> = (0..parsed.nodes.len())
            .filter(|&i| matches!(parsed.nodes[i], PNode::Internal(..)))
            .collect();
        // stable: ties keep post-order, which puts children first
        internal.sort_by(|&a, &b| time[a].total_cmp(&time[b]));
        let mut id = vec![0usize; parsed.nodes.len()];
        for (i, node) in parsed.nodes.iter().enumerate() {
            if let PNode::Leaf(slot) = node {
                id[i] = leaf_ids[*slot];
            }
        }
        let mut merges = Vec::with_capacity(n.saturating_sub(1));
        for (k, &i) in internal.iter().enumerate() {
            id[i] = n + k;
            if let PNode::Internal(a, b) = parsed.nodes[i] {
                merges.push(Merge {
                    left: id[a],
                    right: id[b],
                    time: time[i],
                });
            }
        }
        Dendrogram::new(n, merges)
    }
}

fn push_length(out: &mut String, node: usize, times: &[f64], parents: &[Option<usize>]) {
    let Some(parent) = parents[node] else {
        return;
    };
    let len = times[parent] - times[node];
    out.push(':');
    out.push_str(&format!("{len:?}"));
}

enum PNode {
    Leaf(usize),
    Internal(usize, usize),
}

struct Parsed {
    nodes: Vec<PNode>,
    lengths: Vec<f64>,
    leaves: Vec<String>,
}

struct NewickParser<'a> {
    s: &'a [u8],
    pos: usize,
    out: Parsed,
}

impl<'a> NewickParser<'a> {
    fn new(s: &'a str) -> Self {
        NewickParser {
            s: s.trim().as_bytes(),
            pos: 0,
            out: Parsed {
                nodes: Vec::new(),
                lengths: Vec::new(),
                leaves: Vec::new(),
            },
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::InvalidTree(format!("newick: {msg} at byte {}", self.pos))
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn parse(mut self) -> Result<Parsed> {
        // explicit stack of open internal nodes: collected child indices
        let mut open: Vec<Vec<usize>> = Vec::new();
        let mut last: Option<usize> = None;
        loop {
            match self.peek() {
                Some(b'(') => {
                    self.pos += 1;
                    open.push(Vec::new());
                    continue;
                }
                Some(b',') => {
                    let c = last.take().ok_or_else(|| self.err("empty subtree"))?;
                    open.last_mut().ok_or_else(|| self.err("comma outside parentheses"))?.push(c);
                    self.pos += 1;
                    continue;
                }
                Some(b')') => {
                    let c = last.take().ok_or_else(|| self.err("empty subtree"))?;
                    let mut kids = open.pop().ok_or_else(|| self.err("unbalanced ')'"))?;
                    kids.push(c);
                    if kids.len() != 2 {
                        return Err(self.err("only binary trees are supported"));
                    }
                    self.pos += 1;
                    self.skip_label();
                    let idx = self.push(PNode::Internal(kids[0], kids[1]))?;
                    last = Some(idx);
                }
                Some(b';') | None => {
                    if !open.is_empty() {
                        return Err(self.err("unbalanced '('"));
                    }
                    let root = last.ok_or_else(|| self.err("empty tree"))?;
                    if root + 1 != self.out.nodes.len() {
                        return Err(self.err("trailing content"));
                    }
                    return Ok(self.out);
                }
                Some(_) => {
                    if last.is_some() {
                        return Err(self.err("unexpected token"));
                    }
                    let name = self.read_label();
                    if name.is_empty() {
                        return Err(self.err("missing leaf label"));
                    }
                    let slot = self.out.leaves.len();
                    self.out.leaves.push(name);
                    last = Some(self.push(PNode::Leaf(slot))?);
                }
            }
        }
    }

    fn read_label(&mut self) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if matches!(c, b'(' | b')' | b',' | b':' | b';') {
                break;
            }
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.s[start..self.pos]).trim().to_string()
    }

    fn skip_label(&mut self) {
        let _ = self.read_label();
    }

    fn push(&mut self, node: PNode) -> Result<usize> {
        let len = if self.peek() == Some(b':') {
            self.pos += 1;
            let text = self.read_label();
            let v: f64 = text
                .parse()
                .map_err(|_| self.err(&format!("bad branch length {text:?}")))?;
            if !v.is_finite() || v < 0.0 {
                return Err(self.err("negative or non-finite branch length"));
            }
            v
        } else {
            0.0
        };
        self.out.nodes.push(node);
        self.out.lengths.push(len);
        Ok(self.out.nodes.len() - 1)
    }
}

/// Draws a tree from the coalescent prior: exponential waiting times at
/// rate `m(m-1)/2` and a uniformly chosen pair of surviving sets.
pub fn sample_prior<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Dendrogram> {
    if n < 2 {
        return Err(Error::Domain(format!("prior sampling needs n >= 2, got {n}")));
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut t = 0.0;
    let mut merges = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let rate = merge_rate(active.len());
        let exp = Exp::new(rate).map_err(|e| Error::Domain(e.to_string()))?;
        t += exp.sample(rng);
        let pick = sample(rng, active.len(), 2);
        let (i, j) = (pick.index(0).min(pick.index(1)), pick.index(0).max(pick.index(1)));
        let (a, b) = (active[i], active[j]);
        active.swap_remove(j);
        active.swap_remove(i);
        active.push(n + k);
        merges.push(Merge {
            left: a.min(b),
            right: a.max(b),
            time: t,
        });
    }
    Ok(Dendrogram { n_leaves: n, merges })
}

/// `Σ_k -λ_k Δ_k`, the log density of the merge times (topology choices
/// are absorbed into the rate, so this is the joint `{t, π}` density).
pub fn log_prior(tree: &Dendrogram) -> Result<f64> {
    let n = tree.n_leaves;
    let mut prev = 0.0;
    let mut acc = 0.0;
    for (k, m) in tree.merges.iter().enumerate() {
        let delta = m.time - prev;
        if delta < 0.0 || !delta.is_finite() {
            return Err(Error::InvalidTree(format!(
                "merge times not increasing at merge {k}"
            )));
        }
        acc -= merge_rate(n - k) * delta;
        prev = m.time;
    }
    Ok(acc)
}
