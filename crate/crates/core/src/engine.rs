//! TDP bounds for every supra-threshold cluster and maximal-cluster queries.
//!
//! Bounds are computed one path of a vertex-disjoint path cover at a time: the
//! subtree under the path's start is listed in post-order with the path's own
//! child visited first, so the clusters of all vertices on the path are
//! prefixes of that list and one chain computation yields all of them. The
//! total chain length over all paths is `sigma`, which a heavy cover
//! minimises.

use std::cmp::Ordering;

use crate::chain::ChainScratch;
use crate::error::{Error, Result};
use crate::forest::{ClusterForest, NO_PARENT};
use crate::stats::SimesContext;

/// A set of vertex-disjoint paths covering the forest, each following one
/// chosen child per non-leaf down to a leaf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathCover {
    /// Chosen child of every vertex, `NO_PARENT` at leaves.
    next: Vec<u32>,
    starts: Vec<u32>,
    path_of: Vec<u32>,
    sigma: u64,
}

/// The cover that always continues into the heavy child.
pub fn heavy_path_cover(forest: &ClusterForest) -> PathCover {
    let next = (0..forest.m())
        .map(|v| forest.heavy_child(v).map_or(NO_PARENT, |w| w as u32))
        .collect();
    PathCover::assemble(forest, next)
}

impl PathCover {
    /// Cover given by an explicit child choice for every non-leaf.
    pub fn from_choice(forest: &ClusterForest, choice: &[Option<u32>]) -> Result<Self> {
        if choice.len() != forest.m() {
            return Err(Error::SizeMismatch {
                what: "child choice",
                expected: forest.m(),
                found: choice.len(),
            });
        }
        let mut next = Vec::with_capacity(choice.len());
        for (v, &c) in choice.iter().enumerate() {
            match c {
                None if forest.is_leaf(v) => next.push(NO_PARENT),
                Some(w) if forest.parent(w as usize) == Some(v) => next.push(w),
                _ => {
                    return Err(Error::InvalidForest(format!(
                        "choice {c:?} at rank {v} is not one of its children"
                    )))
                }
            }
        }
        Ok(Self::assemble(forest, next))
    }

    fn assemble(forest: &ClusterForest, next: Vec<u32>) -> Self {
        let m = forest.m();
        let mut chosen = vec![false; m];
        for &w in next.iter().filter(|&&w| w != NO_PARENT) {
            chosen[w as usize] = true;
        }
        let starts: Vec<u32> = (0..m as u32).filter(|&v| !chosen[v as usize]).collect();
        let mut path_of = vec![0u32; m];
        for (id, &s) in starts.iter().enumerate() {
            let mut v = s;
            loop {
                path_of[v as usize] = id as u32;
                match next[v as usize] {
                    NO_PARENT => break,
                    w => v = w,
                }
            }
        }
        let sigma = starts.iter().map(|&s| forest.size(s as usize) as u64).sum();
        PathCover {
            next,
            starts,
            path_of,
            sigma,
        }
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    /// First vertex of every path, ascending.
    pub fn starts(&self) -> &[u32] {
        &self.starts
    }

    pub fn path_of(&self, v: usize) -> usize {
        self.path_of[v] as usize
    }

    pub fn next_on_path(&self, v: usize) -> Option<usize> {
        match self.next[v] {
            NO_PARENT => None,
            w => Some(w as usize),
        }
    }

    /// Members of path `id`, from its start down to its leaf.
    pub fn path(&self, id: usize) -> Vec<u32> {
        let mut out = vec![self.starts[id]];
        while let Some(w) = self.next_on_path(*out.last().unwrap() as usize) {
            out.push(w as u32);
        }
        out
    }

    /// Total sequentialisation length: the sum of subtree orders over path
    /// starts.
    pub fn sigma(&self) -> u64 {
        self.sigma
    }

    /// Whether every chosen edge leads into a largest child subtree.
    pub fn is_heavy(&self, forest: &ClusterForest) -> bool {
        (0..forest.m()).all(|v| match self.next_on_path(v) {
            None => true,
            Some(w) => forest
                .children(v)
                .iter()
                .all(|&x| forest.size(w) >= forest.size(x as usize)),
        })
    }

    /// Post-order listing of the subtree under `start` that visits the
    /// path's child before its siblings.
    pub fn sequentialise(&self, forest: &ClusterForest, start: usize, out: &mut Vec<u32>) {
        out.clear();
        // (vertex, children visited, position of the path child)
        let mut stack: Vec<(u32, u32, u32)> = vec![(start as u32, 0, self.path_child_pos(forest, start))];
        while let Some(top) = stack.last_mut() {
            let (v, idx, pos) = (top.0 as usize, top.1 as usize, top.2 as usize);
            let kids = forest.children(v);
            if idx < kids.len() {
                top.1 += 1;
                let child = match idx {
                    0 => kids[pos],
                    k if k <= pos => kids[k - 1],
                    k => kids[k],
                } as usize;
                stack.push((child as u32, 0, self.path_child_pos(forest, child)));
            } else {
                stack.pop();
                out.push(v as u32);
            }
        }
    }

    fn path_child_pos(&self, forest: &ClusterForest, v: usize) -> u32 {
        let first = self.next[v];
        forest
            .children(v)
            .iter()
            .position(|&w| w == first)
            .unwrap_or(0) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundOptions {
    /// Drop members ranked beyond `zeta` before running chains. Never
    /// changes a bound.
    pub zeta_shrink: bool,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions { zeta_shrink: true }
    }
}

/// TDN and TDP lower bounds for every supra-threshold cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterBounds {
    tdn: Vec<u32>,
    tdp: Vec<f64>,
    representative: Vec<bool>,
    sigma: u64,
    chain_elements: u64,
}

impl ClusterBounds {
    /// Rebuilds bounds from per-representative TDN values; non-representative
    /// entries of `tdn` are ignored.
    pub fn from_tdn(forest: &ClusterForest, mut tdn: Vec<u32>, sigma: u64) -> Result<Self> {
        if tdn.len() != forest.m() {
            return Err(Error::SizeMismatch {
                what: "TDN bounds",
                expected: forest.m(),
                found: tdn.len(),
            });
        }
        let mut tdp = vec![0.0f64; tdn.len()];
        for v in 0..forest.m() {
            if !forest.is_representative(v) {
                tdn[v] = 0;
                continue;
            }
            if tdn[v] as usize > forest.size(v) {
                return Err(Error::InvalidForest(format!(
                    "TDN bound {} of rank {v} exceeds cluster size {}",
                    tdn[v],
                    forest.size(v)
                )));
            }
            tdp[v] = tdn[v] as f64 / forest.size(v) as f64;
        }
        Ok(ClusterBounds {
            tdn,
            tdp,
            representative: forest.representative_flags().to_vec(),
            sigma,
            chain_elements: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.tdn.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tdn.is_empty()
    }

    /// TDN lower bound `d(S_v)`; `None` for non-representatives.
    pub fn tdn(&self, v: usize) -> Option<u64> {
        self.representative[v].then(|| self.tdn[v] as u64)
    }

    /// TDP lower bound `q(S_v)`; `None` for non-representatives.
    pub fn tdp(&self, v: usize) -> Option<f64> {
        self.representative[v].then(|| self.tdp[v])
    }

    /// Raw TDN array indexed by rank, zero at non-representatives.
    pub fn tdn_values(&self) -> &[u32] {
        &self.tdn
    }

    pub fn sigma(&self) -> u64 {
        self.sigma
    }

    /// Number of elements actually fed through chain computations.
    pub fn chain_elements(&self) -> u64 {
        self.chain_elements
    }

    /// Restores the chain element count of a stored structure.
    pub fn with_chain_elements(mut self, n: u64) -> Self {
        self.chain_elements = n;
        self
    }

    /// Exact comparison of `q(S_a)` and `q(S_b)` as fractions.
    fn cmp_tdp(&self, forest: &ClusterForest, a: usize, b: usize) -> Ordering {
        let lhs = self.tdn[a] as u64 * forest.size(b) as u64;
        let rhs = self.tdn[b] as u64 * forest.size(a) as u64;
        lhs.cmp(&rhs)
    }
}

/// Runs one chain computation per path of `cover` and records the bound of
/// every representative.
pub fn compute_all_bounds(
    forest: &ClusterForest,
    cover: &PathCover,
    ctx: &SimesContext,
    opts: BoundOptions,
) -> Result<ClusterBounds> {
    let m = forest.m();
    if ctx.m() != m {
        return Err(Error::SizeMismatch {
            what: "discretised p-values",
            expected: m,
            found: ctx.m(),
        });
    }
    let mut tdn = vec![0u32; m];
    let mut scratch = ChainScratch::new();
    let mut seq = Vec::new();
    let mut c = Vec::new();
    let mut out = Vec::new();
    let mut chain_elements = 0u64;
    let zeta = ctx.zeta;

    for &start in cover.starts() {
        cover.sequentialise(forest, start as usize, &mut seq);
        c.clear();
        c.extend(seq.iter().map(|&v| ctx.c[v as usize]));
        if opts.zeta_shrink {
            chain_elements += seq.iter().filter(|&&v| (v as usize) < zeta).count() as u64;
            scratch.tdn_bounds_filtered(&c, |i| (seq[i] as usize) < zeta, &mut out)?;
        } else {
            chain_elements += seq.len() as u64;
            scratch.tdn_bounds(&c, &mut out)?;
        }
        let mut v = start as usize;
        loop {
            tdn[v] = out[forest.size(v) - 1] as u32;
            match cover.next_on_path(v) {
                Some(w) => v = w,
                None => break,
            }
        }
    }

    let mut bounds = ClusterBounds::from_tdn(forest, tdn, cover.sigma())?;
    bounds.chain_elements = chain_elements;
    Ok(bounds)
}

/// Representatives whose TDP bound strictly exceeds that of every
/// representative ancestor, sorted by ascending TDP (ties by rank).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmissibleIndex {
    order: Vec<u32>,
}

pub fn build_admissible_index(forest: &ClusterForest, bounds: &ClusterBounds) -> AdmissibleIndex {
    let m = forest.m();
    // best representative strict ancestor by TDP, per rank
    let mut best_above: Vec<u32> = vec![NO_PARENT; m];
    let mut order = Vec::new();
    for v in (0..m).rev() {
        if let Some(u) = forest.parent(v) {
            let inherited = best_above[u];
            best_above[v] = if !forest.is_representative(u) {
                inherited
            } else if inherited == NO_PARENT
                || bounds.cmp_tdp(forest, u, inherited as usize) == Ordering::Greater
            {
                u as u32
            } else {
                inherited
            };
        }
        if forest.is_representative(v)
            && (best_above[v] == NO_PARENT
                || bounds.cmp_tdp(forest, v, best_above[v] as usize) == Ordering::Greater)
        {
            order.push(v as u32);
        }
    }
    order.sort_by(|&a, &b| {
        bounds
            .cmp_tdp(forest, a as usize, b as usize)
            .then(a.cmp(&b))
    });
    AdmissibleIndex { order }
}

impl AdmissibleIndex {
    pub fn from_order(order: Vec<u32>) -> Self {
        AdmissibleIndex { order }
    }

    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// One maximal cluster in a query answer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    pub representative: u32,
    pub size: usize,
    pub tdn: u64,
    pub tdp: f64,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::InvalidGamma(gamma))
    }
}

/// Query state over a shared, immutable structure. Owns the mark buffer, so
/// each concurrent caller needs its own session.
#[derive(Debug)]
pub struct QuerySession<'a> {
    forest: &'a ClusterForest,
    bounds: &'a ClusterBounds,
    index: &'a AdmissibleIndex,
    marked: Vec<bool>,
    touched: Vec<u32>,
}

impl<'a> QuerySession<'a> {
    pub fn new(
        forest: &'a ClusterForest,
        bounds: &'a ClusterBounds,
        index: &'a AdmissibleIndex,
    ) -> Self {
        QuerySession {
            forest,
            bounds,
            index,
            marked: vec![false; forest.m()],
            touched: Vec::new(),
        }
    }

    /// Position of the first admissible vertex with `q >= gamma`. A linear
    /// scan from the top end and a binary search advance in lockstep; the
    /// first to finish wins.
    fn first_qualifying(&self, gamma: f64) -> usize {
        let order = &self.index.order;
        let below = |i: usize| self.bounds.tdp[order[i] as usize] < gamma;
        let (mut linear, mut lo, mut hi) = (order.len(), 0, order.len());
        loop {
            if linear == 0 || below(linear - 1) {
                return linear;
            }
            linear -= 1;
            if lo >= hi {
                return lo;
            }
            let mid = lo + (hi - lo) / 2;
            if below(mid) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
    }

    /// All maximal supra-threshold clusters with `q >= gamma`, in ascending
    /// order of `q`. Cost is linear in the total size of the answer.
    pub fn query(&mut self, gamma: f64) -> Result<Vec<Cluster>> {
        check_gamma(gamma)?;
        let from = self.first_qualifying(gamma);
        let mut out = Vec::new();
        for &v in &self.index.order[from..] {
            if self.marked[v as usize] {
                continue;
            }
            for w in self.forest.subtree_members(v as usize) {
                self.marked[w as usize] = true;
                self.touched.push(w);
            }
            let v = v as usize;
            out.push(Cluster {
                representative: v as u32,
                size: self.forest.size(v),
                tdn: self.bounds.tdn[v] as u64,
                tdp: self.bounds.tdp[v],
            });
        }
        for w in self.touched.drain(..) {
            self.marked[w as usize] = false;
        }
        Ok(out)
    }
}

/// One-shot query; allocates a fresh session.
pub fn query_maximal_clusters(
    forest: &ClusterForest,
    bounds: &ClusterBounds,
    index: &AdmissibleIndex,
    gamma: f64,
) -> Result<Vec<Cluster>> {
    QuerySession::new(forest, bounds, index).query(gamma)
}

/// For every rank, the largest `gamma` at which it still belongs to some
/// reported cluster: the maximum TDP over its representative ancestors
/// (itself included).
pub fn max_gamma_map(forest: &ClusterForest, bounds: &ClusterBounds) -> Vec<f64> {
    let m = forest.m();
    let mut gamma = vec![0.0f64; m];
    for v in (0..m).rev() {
        let above = forest.parent(v).map_or(f64::NEG_INFINITY, |u| gamma[u]);
        gamma[v] = match bounds.tdp(v) {
            Some(q) => above.max(q),
            None => above,
        };
    }
    gamma
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub gamma: f64,
    /// End of the heavy path starting at the representative.
    pub label: u32,
    pub representative: u32,
    pub size: usize,
}

/// Maximal cluster sizes along a grid of thresholds, one row per cluster.
pub fn size_curve(
    session: &mut QuerySession<'_>,
    labels: &[u32],
    grid: &[f64],
) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    for &gamma in grid {
        let mut clusters = session.query(gamma)?;
        clusters.sort_by(|a, b| b.size.cmp(&a.size).then(a.representative.cmp(&b.representative)));
        rows.extend(clusters.into_iter().map(|c| CurveRow {
            gamma,
            label: labels[c.representative as usize],
            representative: c.representative,
            size: c.size,
        }));
    }
    Ok(rows)
}
