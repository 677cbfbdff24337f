//! The work behind each subcommand, kept free of argument parsing so the
//! HTTP layer and tests can reuse it.
//!
//! Identifiers in every report are input vertex ids for edge-list inputs
//! and linear voxel indices (x fastest) for volume inputs.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use ari_core::{
    gamma_grid, grid_to_graph, load_edge_list, load_volume, BuildReport, Connectivity,
    TdpStructure,
};
use serde::Serialize;

use crate::persist::Persisted;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Input {
    /// JSON volume header.
    Volume(PathBuf),
    EdgeList { edges: PathBuf, pvalues: PathBuf },
}

/// Loads the input and builds the structure. `connectivity` overrides the
/// one in a volume header and is rejected for edge lists.
pub fn build(
    input: &Input,
    alpha: f64,
    connectivity: Option<Connectivity>,
) -> Result<(Persisted, BuildReport)> {
    match input {
        Input::Volume(header) => {
            let mut volume = load_volume(header)?;
            if let Some(c) = connectivity {
                volume.grid.connectivity = c;
            }
            let gg = grid_to_graph(&volume.grid)?;
            let (structure, report) = TdpStructure::build(&gg.graph, &volume.pvalues()?, alpha)?;
            let persisted = Persisted {
                structure,
                edges: report.edges as u64,
                grid: Some(volume.grid),
            };
            Ok((persisted, report))
        }
        Input::EdgeList { edges, pvalues } => {
            if connectivity.is_some() {
                bail!("--connectivity only applies to volume inputs");
            }
            let (graph, p) = load_edge_list(edges, pvalues)?;
            let (structure, report) = TdpStructure::build(&graph, &p, alpha)?;
            let persisted = Persisted {
                structure,
                edges: report.edges as u64,
                grid: None,
            };
            Ok((persisted, report))
        }
    }
}

pub fn build_summary(r: &BuildReport) -> String {
    let t = &r.timings;
    format!(
        "m = {}\nedges = {}\nh = {}\nzeta = {}\nrepresentatives = {}\nadmissible = {}\n\
         sigma = {}\nforest: {:.6} s\nbounds: {:.6} s\nindex: {:.6} s\ntotal: {:.6} s\n",
        r.m,
        r.edges,
        r.h,
        r.zeta,
        r.representatives,
        r.admissible,
        r.sigma,
        t.forest.as_secs_f64(),
        t.bounds.as_secs_f64(),
        t.index.as_secs_f64(),
        t.total().as_secs_f64(),
    )
}

/// Maps ranks to the identifiers used in reports.
struct Ids {
    voxel_of_vertex: Option<Vec<usize>>,
}

impl Ids {
    fn new(p: &Persisted) -> Self {
        Ids {
            voxel_of_vertex: p.voxel_of_vertex(),
        }
    }

    fn of_rank(&self, p: &Persisted, rank: usize) -> u64 {
        let v = p.structure.vertex_of(rank);
        match &self.voxel_of_vertex {
            Some(map) => map[v] as u64,
            None => v as u64,
        }
    }

    fn coords(&self, p: &Persisted, rank: usize) -> Option<[usize; 3]> {
        let grid = p.grid.as_ref()?;
        Some(grid.coords(self.of_rank(p, rank) as usize))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterRow {
    pub size: usize,
    pub tdn: u64,
    pub tdp: f64,
    pub representative: u64,
    /// Lowest-p end of the cluster's heavy path.
    pub label: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub voxel: Option<[usize; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<u64>>,
}

/// Maximal clusters at `gamma`, largest first.
pub fn cluster_rows(p: &Persisted, gamma: f64, with_members: bool) -> Result<Vec<ClusterRow>> {
    let s = &p.structure;
    let ids = Ids::new(p);
    let mut clusters = s.query(gamma)?;
    clusters.sort_by(|a, b| {
        b.size
            .cmp(&a.size)
            .then(b.tdp.total_cmp(&a.tdp))
            .then(a.representative.cmp(&b.representative))
    });
    Ok(clusters
        .into_iter()
        .map(|c| {
            let rep = c.representative as usize;
            let label = s.labels()[rep] as usize;
            ClusterRow {
                size: c.size,
                tdn: c.tdn,
                tdp: c.tdp,
                representative: ids.of_rank(p, rep),
                label: ids.of_rank(p, label),
                voxel: ids.coords(p, label),
                members: with_members.then(|| {
                    let mut m: Vec<u64> =
                        s.members(rep).map(|r| ids.of_rank(p, r as usize)).collect();
                    m.sort_unstable();
                    m
                }),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Format::Table),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => bail!("unknown format {other:?}; expected table, json or csv"),
        }
    }
}

#[derive(Serialize)]
struct GammaBlock {
    gamma: f64,
    clusters: Vec<ClusterRow>,
}

pub fn query_report(
    p: &Persisted,
    gammas: &[f64],
    format: Format,
    with_members: bool,
) -> Result<String> {
    let mut blocks = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let clusters = cluster_rows(p, gamma, with_members)
            .with_context(|| format!("query at gamma {gamma}"))?;
        blocks.push(GammaBlock { gamma, clusters });
    }
    let grid = p.grid.is_some();
    let mut out = String::new();
    match format {
        Format::Json => {
            out = serde_json::to_string_pretty(&blocks)?;
            out.push('\n');
        }
        Format::Csv => {
            out.push_str("gamma,size,tdn,tdp,representative,label");
            if grid {
                out.push_str(",x,y,z");
            }
            if with_members {
                out.push_str(",members");
            }
            out.push('\n');
            for b in &blocks {
                for c in &b.clusters {
                    let _ = write!(
                        out,
                        "{},{},{},{},{},{}",
                        b.gamma, c.size, c.tdn, c.tdp, c.representative, c.label
                    );
                    if let Some([x, y, z]) = c.voxel {
                        let _ = write!(out, ",{x},{y},{z}");
                    }
                    if let Some(m) = &c.members {
                        let joined: Vec<String> = m.iter().map(u64::to_string).collect();
                        let _ = write!(out, ",{}", joined.join(" "));
                    }
                    out.push('\n');
                }
            }
        }
        Format::Table => {
            for (i, b) in blocks.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let _ = writeln!(out, "gamma = {}: {} cluster(s)", b.gamma, b.clusters.len());
                let _ = write!(out, "{:>10} {:>10} {:>8} {:>12}", "size", "tdn", "tdp", "label");
                if grid {
                    let _ = write!(out, " {:>14}", "voxel");
                }
                out.push('\n');
                for c in &b.clusters {
                    let _ = write!(
                        out,
                        "{:>10} {:>10} {:>8.4} {:>12}",
                        c.size, c.tdn, c.tdp, c.label
                    );
                    if let Some([x, y, z]) = c.voxel {
                        let _ = write!(out, " {:>14}", format!("({x},{y},{z})"));
                    }
                    out.push('\n');
                    if let Some(m) = &c.members {
                        let joined: Vec<String> = m.iter().map(u64::to_string).collect();
                        let _ = writeln!(out, "           members: {}", joined.join(" "));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Largest reportable threshold per vertex, as input-ordered identifiers.
pub enum GammaMap {
    /// One `f32` per voxel in input order; NaN outside the mask.
    Volume(Vec<f32>),
    /// `vertex,gamma` rows.
    Csv(String),
}

impl GammaMap {
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            GammaMap::Volume(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            GammaMap::Csv(s) => s.clone().into_bytes(),
        }
    }
}

pub fn gamma_map(p: &Persisted) -> GammaMap {
    let by_vertex = p.structure.gamma_map_by_vertex();
    match (&p.grid, p.voxel_of_vertex()) {
        (Some(grid), Some(voxels)) => {
            let mut out = vec![f32::NAN; grid.voxel_count()];
            for (v, &g) in by_vertex.iter().enumerate() {
                out[voxels[v]] = g as f32;
            }
            GammaMap::Volume(out)
        }
        _ => {
            let mut out = String::from("vertex,gamma\n");
            for (v, g) in by_vertex.iter().enumerate() {
                let _ = writeln!(out, "{v},{g}");
            }
            GammaMap::Csv(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub gamma: f64,
    pub label: u64,
    pub size: usize,
}

pub fn curve_points(p: &Persisted, from: f64, to: f64, step: f64) -> Result<Vec<CurvePoint>> {
    let grid = gamma_grid(from, to, step)?;
    let ids = Ids::new(p);
    Ok(p
        .structure
        .size_curve(&grid)?
        .into_iter()
        .map(|r| CurvePoint {
            gamma: r.gamma,
            label: ids.of_rank(p, r.label as usize),
            size: r.size,
        })
        .collect())
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("gamma,label,size\n");
    for pt in points {
        let _ = writeln!(out, "{},{},{}", pt.gamma, pt.label, pt.size);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ari_core::Graph;

    fn path_structure() -> Persisted {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let (structure, _) = TdpStructure::build(&g, &[0.0001, 0.0002, 0.0004, 0.6], 0.05).unwrap();
        Persisted {
            structure,
            edges: 3,
            grid: None,
        }
    }

    #[test]
    fn gamma_zero_on_connected_input_is_one_row() {
        let p = path_structure();
        let rows = cluster_rows(&p, 0.0, true).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].size, 4);
        assert_eq!(rows[0].members.as_deref(), Some(&[0, 1, 2, 3][..]));
        assert_eq!(rows[0].label, 0);
    }

    #[test]
    fn csv_and_json_agree() {
        let p = path_structure();
        let csv = query_report(&p, &[0.8], Format::Csv, false).unwrap();
        assert_eq!(csv, "gamma,size,tdn,tdp,representative,label\n0.8,3,3,1,2,0\n");
        let json: serde_json::Value =
            serde_json::from_str(&query_report(&p, &[0.8], Format::Json, false).unwrap()).unwrap();
        assert_eq!(json[0]["clusters"][0]["size"], 3);
        assert!(query_report(&p, &[1.5], Format::Table, false).is_err());
    }

    #[test]
    fn graph_gamma_map_is_csv() {
        match gamma_map(&path_structure()) {
            GammaMap::Csv(s) => {
                assert!(s.starts_with("vertex,gamma\n0,1\n"));
                assert!(s.ends_with("3,0.75\n"));
            }
            GammaMap::Volume(_) => panic!("graph input gave a volume"),
        }
    }

    #[test]
    fn curve_rows() {
        let pts = curve_points(&path_structure(), 0.0, 1.0, 0.5).unwrap();
        let sizes: Vec<usize> = pts.iter().map(|p| p.size).collect();
        assert_eq!(sizes, vec![4, 4, 3]);
        assert!(curve_csv(&pts).starts_with("gamma,label,size\n0,0,4\n"));
    }
}
