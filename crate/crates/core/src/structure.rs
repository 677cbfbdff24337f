//! The complete query structure and its build pipeline.

use std::time::{Duration, Instant};

use crate::engine::{
    build_admissible_index, compute_all_bounds, heavy_path_cover, max_gamma_map, size_curve,
    AdmissibleIndex, BoundOptions, Cluster, ClusterBounds, CurveRow, QuerySession,
};
use crate::error::{Error, Result};
use crate::forest::{build_forest, ClusterForest, PostOrder};
use crate::graph::Graph;
use crate::stats::{sort_pvalues, SimesContext};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    /// Sorting and forest construction.
    pub forest: Duration,
    /// Simes quantities, path cover and chain bounds.
    pub bounds: Duration,
    /// Admissible list.
    pub index: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.forest + self.bounds + self.index
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub m: usize,
    pub edges: usize,
    pub h: usize,
    pub zeta: usize,
    pub representatives: usize,
    pub admissible: usize,
    pub sigma: u64,
    pub chain_elements: u64,
    pub timings: PhaseTimings,
}

/// Immutable structure answering maximal-cluster queries for one α.
#[derive(Debug, Clone, PartialEq)]
pub struct TdpStructure {
    alpha: f64,
    h: usize,
    zeta: usize,
    perm: Vec<u32>,
    forest: ClusterForest,
    bounds: ClusterBounds,
    index: AdmissibleIndex,
    labels: Vec<u32>,
}

impl TdpStructure {
    pub fn build(graph: &Graph, pvalues: &[f64], alpha: f64) -> Result<(Self, BuildReport)> {
        Self::build_with(graph, pvalues, alpha, BoundOptions::default())
    }

    pub fn build_with(
        graph: &Graph,
        pvalues: &[f64],
        alpha: f64,
        opts: BoundOptions,
    ) -> Result<(Self, BuildReport)> {
        let t0 = Instant::now();
        let sp = sort_pvalues(pvalues, alpha)?;
        let forest = build_forest(graph, &sp)?;
        let t1 = Instant::now();
        let ctx = SimesContext::new(&sp);
        let cover = heavy_path_cover(&forest);
        let bounds = compute_all_bounds(&forest, &cover, &ctx, opts)?;
        let t2 = Instant::now();
        let index = build_admissible_index(&forest, &bounds);
        let t3 = Instant::now();
        let labels = forest.heavy_leaves();

        let report = BuildReport {
            m: sp.len(),
            edges: graph.edge_count(),
            h: ctx.h,
            zeta: ctx.zeta,
            representatives: forest.representative_flags().iter().filter(|&&r| r).count(),
            admissible: index.len(),
            sigma: bounds.sigma(),
            chain_elements: bounds.chain_elements(),
            timings: PhaseTimings {
                forest: t1 - t0,
                bounds: t2 - t1,
                index: t3 - t2,
            },
        };
        let structure = TdpStructure {
            alpha,
            h: ctx.h,
            zeta: ctx.zeta,
            perm: sp.perm().to_vec(),
            forest,
            bounds,
            index,
            labels,
        };
        Ok((structure, report))
    }

    /// Reassembles a structure from stored parts, checking their sizes agree.
    pub fn from_parts(
        alpha: f64,
        h: usize,
        zeta: usize,
        perm: Vec<u32>,
        forest: ClusterForest,
        bounds: ClusterBounds,
        index: AdmissibleIndex,
    ) -> Result<Self> {
        let m = forest.m();
        if perm.len() != m {
            return Err(Error::SizeMismatch {
                what: "rank permutation",
                expected: m,
                found: perm.len(),
            });
        }
        let mut seen = vec![false; m];
        for &v in &perm {
            if v as usize >= m || std::mem::replace(&mut seen[v as usize], true) {
                return Err(Error::InvalidForest(
                    "rank permutation is not a bijection".into(),
                ));
            }
        }
        if bounds.len() != m {
            return Err(Error::SizeMismatch {
                what: "bounds",
                expected: m,
                found: bounds.len(),
            });
        }
        if let Some(&v) = index
            .order()
            .iter()
            .find(|&&v| v as usize >= m || !forest.is_representative(v as usize))
        {
            return Err(Error::InvalidForest(format!(
                "admissible entry {v} is not a representative"
            )));
        }
        let labels = forest.heavy_leaves();
        Ok(TdpStructure {
            alpha,
            h,
            zeta,
            perm,
            forest,
            bounds,
            index,
            labels,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn zeta(&self) -> usize {
        self.zeta
    }

    pub fn m(&self) -> usize {
        self.forest.m()
    }

    pub fn perm(&self) -> &[u32] {
        &self.perm
    }

    pub fn vertex_of(&self, rank: usize) -> usize {
        self.perm[rank] as usize
    }

    pub fn forest(&self) -> &ClusterForest {
        &self.forest
    }

    pub fn bounds(&self) -> &ClusterBounds {
        &self.bounds
    }

    pub fn admissible(&self) -> &AdmissibleIndex {
        &self.index
    }

    /// Heavy-path terminus of every rank.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn representative_count(&self) -> usize {
        self.forest
            .representative_flags()
            .iter()
            .filter(|&&r| r)
            .count()
    }

    pub fn session(&self) -> QuerySession<'_> {
        QuerySession::new(&self.forest, &self.bounds, &self.index)
    }

    pub fn query(&self, gamma: f64) -> Result<Vec<Cluster>> {
        self.session().query(gamma)
    }

    /// Members of the cluster represented by `rank`, as ranks in post-order.
    pub fn members(&self, rank: usize) -> PostOrder<'_> {
        self.forest.subtree_members(rank)
    }

    /// Largest reportable TDP threshold, indexed by rank.
    pub fn gamma_map(&self) -> Vec<f64> {
        max_gamma_map(&self.forest, &self.bounds)
    }

    /// Largest reportable TDP threshold, indexed by original vertex id.
    pub fn gamma_map_by_vertex(&self) -> Vec<f64> {
        let by_rank = self.gamma_map();
        let mut out = vec![0.0; by_rank.len()];
        for (rank, &g) in by_rank.iter().enumerate() {
            out[self.perm[rank] as usize] = g;
        }
        out
    }

    pub fn size_curve(&self, grid: &[f64]) -> Result<Vec<CurveRow>> {
        size_curve(&mut self.session(), &self.labels, grid)
    }
}

/// Evenly spaced thresholds `from, from + step, ...` up to `to` inclusive,
/// rounded to avoid accumulated drift.
pub fn gamma_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&from) {
        return Err(Error::InvalidGamma(from));
    }
    if !(0.0..=1.0).contains(&to) {
        return Err(Error::InvalidGamma(to));
    }
    if !(step.is_finite() && step > 0.0) || to < from {
        return Err(Error::InvalidGrid(format!(
            "bad threshold grid from={from} to={to} step={step}"
        )));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| {
            let g = from + i as f64 * step;
            ((g * 1e12).round() / 1e12).min(1.0)
        })
        .collect())
}
