//! The cluster forest: a directed rooted forest over ranks whose rooted
//! subtrees are exactly the components `C_v` of `G[{ranks <= v}]` that
//! contain `v`.
//!
//! Children of every vertex are stored heavy child first (largest subtree,
//! smallest rank on ties), followed by the remaining children in ascending
//! rank order. The layout depends only on the parent array, so a forest can
//! be rebuilt exactly from persisted parents.

use crate::dsu::DisjointSets;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::stats::SortedPValues;

pub const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterForest {
    parent: Vec<u32>,
    child_start: Vec<usize>,
    children: Vec<u32>,
    size: Vec<u32>,
    roots: Vec<u32>,
    representative: Vec<bool>,
}

/// Builds the cluster forest by adding vertices in rank order and linking
/// each new vertex to the current forest roots of its earlier neighbours.
pub fn build_forest(graph: &Graph, sp: &SortedPValues) -> Result<ClusterForest> {
    let m = sp.len();
    if graph.m() != m {
        return Err(Error::SizeMismatch {
            what: "p-value list",
            expected: graph.m(),
            found: m,
        });
    }
    let (start, lower) = lower_neighbors(graph, &sp.ranks());
    let mut sets = DisjointSets::new(m);
    // forest root of the set whose union-find root is the index
    let mut top: Vec<u32> = (0..m as u32).collect();
    let mut parent = vec![NO_PARENT; m];

    for v in 0..m {
        let mut set_v = v;
        for &u in &lower[start[v]..start[v + 1]] {
            let set_u = sets.find(u as usize);
            let w = top[set_u] as usize;
            if w == v {
                continue;
            }
            parent[w] = v as u32;
            set_v = sets.union_roots(set_u, set_v);
            top[set_v] = v as u32;
        }
    }

    let values = sp.values();
    let representative = (0..m)
        .map(|v| match parent[v] {
            NO_PARENT => true,
            u => values[u as usize] != values[v],
        })
        .collect();
    ClusterForest::from_parents(parent, representative)
}

/// Rank-indexed adjacency keeping only neighbours of smaller rank. The graph
/// is scanned in vertex order, which keeps rank lookups local for spatial
/// graphs, and the forest loop then reads the result sequentially.
fn lower_neighbors(graph: &Graph, ranks: &[u32]) -> (Vec<usize>, Vec<u32>) {
    let m = ranks.len();
    let mut start = vec![0usize; m + 1];
    for (x, &r) in ranks.iter().enumerate() {
        let below = graph.neighbors(x).iter().filter(|&&nb| ranks[nb as usize] < r).count();
        start[r as usize + 1] = below;
    }
    for i in 0..m {
        start[i + 1] += start[i];
    }
    let mut lower = vec![0u32; start[m]];
    for (x, &r) in ranks.iter().enumerate() {
        let mut at = start[r as usize];
        for &nb in graph.neighbors(x) {
            let u = ranks[nb as usize];
            if u < r {
                lower[at] = u;
                at += 1;
            }
        }
    }
    (start, lower)
}

impl ClusterForest {
    /// Assembles a forest from its parent array. Parents must have a
    /// strictly larger rank than their children.
    pub fn from_parents(parent: Vec<u32>, representative: Vec<bool>) -> Result<Self> {
        let m = parent.len();
        if representative.len() != m {
            return Err(Error::SizeMismatch {
                what: "representative flags",
                expected: m,
                found: representative.len(),
            });
        }
        for (v, &u) in parent.iter().enumerate() {
            if u != NO_PARENT && (u as usize >= m || u as usize <= v) {
                return Err(Error::InvalidForest(format!(
                    "parent {u} of rank {v} must be a larger rank below {m}"
                )));
            }
            if u == NO_PARENT && !representative[v] {
                return Err(Error::InvalidForest(format!(
                    "root {v} must be a representative"
                )));
            }
        }

        let mut size = vec![1u32; m];
        let mut child_start = vec![0usize; m + 1];
        for v in 0..m {
            if let Some(u) = Self::parent_of(&parent, v) {
                size[u] += size[v];
                child_start[u + 1] += 1;
            }
        }
        for i in 0..m {
            child_start[i + 1] += child_start[i];
        }
        let mut fill = child_start.clone();
        let mut children = vec![0u32; child_start[m]];
        let mut roots = Vec::new();
        for v in 0..m {
            match Self::parent_of(&parent, v) {
                Some(u) => {
                    children[fill[u]] = v as u32;
                    fill[u] += 1;
                }
                None => roots.push(v as u32),
            }
        }
        for v in 0..m {
            let kids = &mut children[child_start[v]..child_start[v + 1]];
            // ascending rank order, so the first maximum is the smallest rank
            let heavy = (0..kids.len()).fold(None, |best: Option<usize>, i| match best {
                Some(b) if size[kids[b] as usize] >= size[kids[i] as usize] => Some(b),
                _ => Some(i),
            });
            if let Some(h) = heavy {
                kids[..=h].rotate_right(1);
            }
        }

        Ok(ClusterForest {
            parent,
            child_start,
            children,
            size,
            roots,
            representative,
        })
    }

    fn parent_of(parent: &[u32], v: usize) -> Option<usize> {
        match parent[v] {
            NO_PARENT => None,
            u => Some(u as usize),
        }
    }

    pub fn m(&self) -> usize {
        self.parent.len()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        Self::parent_of(&self.parent, v)
    }

    pub fn parents(&self) -> &[u32] {
        &self.parent
    }

    /// Children of `v`, heavy child first.
    pub fn children(&self, v: usize) -> &[u32] {
        &self.children[self.child_start[v]..self.child_start[v + 1]]
    }

    pub fn heavy_child(&self, v: usize) -> Option<usize> {
        self.children(v).first().map(|&w| w as usize)
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.child_start[v] == self.child_start[v + 1]
    }

    pub fn leaf_count(&self) -> usize {
        (0..self.m()).filter(|&v| self.is_leaf(v)).count()
    }

    /// Number of vertices in the subtree rooted at `v`.
    pub fn size(&self, v: usize) -> usize {
        self.size[v] as usize
    }

    pub fn roots(&self) -> &[u32] {
        &self.roots
    }

    pub fn is_representative(&self, v: usize) -> bool {
        self.representative[v]
    }

    pub fn representative_flags(&self) -> &[bool] {
        &self.representative
    }

    /// Ranks whose component is a supra-threshold cluster.
    pub fn representatives(&self) -> Vec<u32> {
        (0..self.m() as u32)
            .filter(|&v| self.representative[v as usize])
            .collect()
    }

    /// Vertices of `C_v` in heavy-child-first post-order; `v` comes last.
    pub fn subtree_members(&self, v: usize) -> PostOrder<'_> {
        PostOrder {
            forest: self,
            stack: vec![(v as u32, 0)],
        }
    }

    /// End of the heavy path starting at `v`.
    pub fn heavy_leaf(&self, mut v: usize) -> usize {
        while let Some(w) = self.heavy_child(v) {
            v = w;
        }
        v
    }

    /// End of the heavy path through every vertex, in one pass.
    pub fn heavy_leaves(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.m()];
        // children have smaller ranks, so they are finished first
        for v in 0..self.m() {
            out[v] = match self.heavy_child(v) {
                Some(w) => out[w],
                None => v as u32,
            };
        }
        out
    }
}

/// Lazy heavy-child-first post-order traversal of one rooted subtree.
#[derive(Debug, Clone)]
pub struct PostOrder<'a> {
    forest: &'a ClusterForest,
    stack: Vec<(u32, u32)>,
}

impl Iterator for PostOrder<'_> {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        loop {
            let (v, next) = self.stack.last_mut()?;
            let kids = self.forest.children(*v as usize);
            if (*next as usize) < kids.len() {
                let w = kids[*next as usize];
                *next += 1;
                self.stack.push((w, 0));
            } else {
                let v = *v;
                self.stack.pop();
                return Some(v);
            }
        }
    }
}
