//! Adaptive thresholding with all-resolutions inference.
//!
//! Given p-values on the vertices of a sparse graph, the crate enumerates
//! every supra-threshold cluster in a forest, computes a simultaneous lower
//! confidence bound for the true discovery proportion (TDP) of each, and
//! answers queries for the maximal clusters whose bound reaches a threshold
//! `gamma` in time proportional to the answer.
//!
//! ```
//! use ari_core::{Graph, TdpStructure};
//!
//! let graph = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
//! let p = [0.0001, 0.0002, 0.0004, 0.6];
//! let (structure, _report) = TdpStructure::build(&graph, &p, 0.05).unwrap();
//! let clusters = structure.query(0.8).unwrap();
//! assert_eq!(clusters.len(), 1);
//! assert_eq!(clusters[0].size, 3);
//! ```

pub mod chain;
mod dsu;
pub mod engine;
pub mod error;
pub mod forest;
pub mod graph;
pub mod stats;
pub mod structure;

pub use chain::{compute_tdn_bounds, naive_chain_bounds, ChainScratch, IntervalPartition};
pub use engine::{
    build_admissible_index, compute_all_bounds, heavy_path_cover, max_gamma_map,
    query_maximal_clusters, size_curve, AdmissibleIndex, BoundOptions, Cluster, ClusterBounds,
    CurveRow, PathCover, QuerySession,
};
pub use error::{Error, Result};
pub use forest::{build_forest, ClusterForest, NO_PARENT};
pub use graph::{
    grid_to_graph, load_edge_list, load_volume, Connectivity, Graph, GridGraph, GridSpec, Volume,
    VolumeHeader,
};
pub use stats::{
    compute_h, compute_zeta, discretize, naive_d, naive_delta, naive_q, sort_pvalues, z_to_p,
    SimesContext, SortedPValues,
};
pub use structure::{gamma_grid, BuildReport, PhaseTimings, TdpStructure};
