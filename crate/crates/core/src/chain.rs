//! TDN lower bounds for every prefix of an ascending chain of vertex sets.
//!
//! The fibers of the running maximum of `delta(V_i, j)` over `j >= k` form a
//! partition of `1..=len` into consecutive intervals. Each new member either
//! raises the bound (when its discretised p-value falls in the fiber that
//! contains 1) or merges its fiber into the one on its left.

use crate::error::{Error, Result};

/// Partition of `1..=len` into consecutive intervals, supporting membership
/// lookup and merging an interval into its left neighbour.
#[derive(Debug, Clone, Default)]
pub struct IntervalPartition {
    parent: Vec<u32>,
    rank: Vec<u8>,
    min: Vec<u32>,
}

impl IntervalPartition {
    pub fn new(len: usize) -> Self {
        let mut p = IntervalPartition::default();
        p.reset(len);
        p
    }

    /// Back to singletons `{1}, {2}, ..., {len}`, reusing storage.
    pub fn reset(&mut self, len: usize) {
        self.parent.clear();
        self.parent.extend(0..len as u32);
        self.rank.clear();
        self.rank.resize(len, 0);
        self.min.clear();
        self.min.extend(1..=len as u32);
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    fn root(&mut self, mut i: usize) -> usize {
        while self.parent[i] as usize != i {
            let grand = self.parent[self.parent[i] as usize];
            self.parent[i] = grand;
            i = grand as usize;
        }
        i
    }

    /// Smallest element of the interval containing `x` (1-based).
    pub fn min_of(&mut self, x: usize) -> usize {
        let r = self.root(x - 1);
        self.min[r] as usize
    }

    /// Merges the interval containing `x` with the interval directly before
    /// it. Returns false, leaving the partition untouched, when the interval
    /// already starts at 1.
    pub fn merge_left(&mut self, x: usize) -> bool {
        let ri = self.root(x - 1);
        let lo = self.min[ri] as usize;
        if lo == 1 {
            return false;
        }
        let rj = self.root(lo - 2);
        let left_min = self.min[rj];
        let (big, small) = match self.rank[ri].cmp(&self.rank[rj]) {
            std::cmp::Ordering::Less => (rj, ri),
            std::cmp::Ordering::Greater => (ri, rj),
            std::cmp::Ordering::Equal => {
                self.rank[rj] += 1;
                (rj, ri)
            }
        };
        self.parent[small] = big as u32;
        self.min[big] = left_min;
        true
    }

    /// Checks that the intervals are consecutive, disjoint and cover
    /// `1..=len`, with correct minima.
    pub fn is_consistent(&mut self) -> bool {
        let len = self.len();
        if len == 0 {
            return true;
        }
        if self.min_of(1) != 1 {
            return false;
        }
        for x in 2..=len {
            let (here, prev) = (self.min_of(x), self.min_of(x - 1));
            let same = self.root(x - 1) == self.root(x - 2);
            let ok = if same { here == prev } else { here == x };
            if !ok {
                return false;
            }
        }
        true
    }
}

/// Reusable working state for chain computations.
#[derive(Debug, Clone, Default)]
pub struct ChainScratch {
    partition: IntervalPartition,
    kept: Vec<u64>,
    shrunk: Vec<u64>,
}

fn check_discretised(c: &[u64]) -> Result<()> {
    match c.iter().position(|&x| x < 1) {
        Some(position) => Err(Error::InvalidDiscretised {
            position,
            value: c[position],
        }),
        None => Ok(()),
    }
}

impl ChainScratch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes `d(V_1), ..., d(V_len)` for the chain whose members have
    /// discretised p-values `c` into `out` (cleared first).
    pub fn tdn_bounds(&mut self, c: &[u64], out: &mut Vec<u64>) -> Result<()> {
        check_discretised(c)?;
        self.run(c, out);
        Ok(())
    }

    fn run(&mut self, c: &[u64], out: &mut Vec<u64>) {
        let len = c.len();
        out.clear();
        out.reserve(len);
        self.partition.reset(len);
        let mut d = 0u64;
        for &ci in c {
            if ci <= len as u64 && !self.partition.merge_left(ci as usize) {
                d += 1;
            }
            debug_assert!(len > 64 || self.partition.is_consistent());
            out.push(d);
        }
    }

    /// Same output as [`ChainScratch::tdn_bounds`], but only members with
    /// `keep[i]` take part in the computation; dropped members must be
    /// irrelevant to every bound, as ranks beyond `zeta` are.
    pub fn tdn_bounds_filtered(
        &mut self,
        c: &[u64],
        keep: impl Fn(usize) -> bool,
        out: &mut Vec<u64>,
    ) -> Result<()> {
        check_discretised(c)?;
        let mut kept = std::mem::take(&mut self.kept);
        kept.clear();
        kept.extend(c.iter().enumerate().filter(|&(i, _)| keep(i)).map(|(_, &x)| x));
        let mut shrunk = std::mem::take(&mut self.shrunk);
        self.run(&kept, &mut shrunk);

        out.clear();
        out.reserve(c.len());
        let mut seen = 0usize;
        for i in 0..c.len() {
            if keep(i) {
                seen += 1;
            }
            out.push(if seen == 0 { 0 } else { shrunk[seen - 1] });
        }
        self.kept = kept;
        self.shrunk = shrunk;
        Ok(())
    }
}

/// TDN lower bounds of all prefixes of a chain.
pub fn compute_tdn_bounds(c: &[u64]) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(c.len());
    ChainScratch::new().tdn_bounds(c, &mut out)?;
    Ok(out)
}

/// Reference evaluation: for every prefix, the maximum over `j in 1..=len`
/// of `|{i' <= i : c_i' <= j}| - j + 1`. Quadratic in the chain length.
pub fn naive_chain_bounds(c: &[u64]) -> Result<Vec<u64>> {
    check_discretised(c)?;
    let len = c.len();
    let mut counts = vec![0i64; len + 1];
    let mut out = Vec::with_capacity(len);
    for &ci in c {
        if ci as usize <= len {
            counts[ci as usize] += 1;
        }
        let mut hits = 0i64;
        let mut best = 0i64;
        for (j, &n) in counts.iter().enumerate().skip(1) {
            hits += n;
            best = best.max(hits - j as i64 + 1);
        }
        out.push(best as u64);
    }
    Ok(out)
}
