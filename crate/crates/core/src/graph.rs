//! Sparse undirected graphs, voxel-grid connectivity, and input loaders.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::z_to_p;

/// Undirected simple graph in compressed adjacency form. Vertex ids are `0..m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Graph {
    /// Builds a graph from an edge list. Edges are symmetrised and
    /// deduplicated; self-loops and out-of-range ids are rejected.
    pub fn from_edges<I>(m: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let mut pairs = Vec::new();
        for (u, v) in edges {
            for w in [u, v] {
                if w as usize >= m {
                    return Err(Error::InvalidGrid(format!(
                        "vertex id {w} out of range for {m} vertices"
                    )));
                }
            }
            if u == v {
                return Err(Error::InvalidGrid(format!("self-loop at vertex {u}")));
            }
            pairs.push((u, v));
            pairs.push((v, u));
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self::from_sorted_arcs(m, &pairs))
    }

    fn from_sorted_arcs(m: usize, arcs: &[(u32, u32)]) -> Self {
        let mut offsets = vec![0usize; m + 1];
        for &(u, _) in arcs {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..m {
            offsets[i + 1] += offsets[i];
        }
        let targets = arcs.iter().map(|&(_, v)| v).collect();
        Graph { offsets, targets }
    }

    /// Graph with `m` vertices and no edges.
    pub fn edgeless(m: usize) -> Self {
        Graph {
            offsets: vec![0; m + 1],
            targets: Vec::new(),
        }
    }

    pub fn m(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Each edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.m()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| v as usize > u)
                .map(move |&v| (u as u32, v))
        })
    }

    /// Edge-list text in the format read by [`parse_edge_list`].
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    /// Shared face.
    Six,
    /// Shared face or edge.
    Eighteen,
    /// Shared face, edge, or corner.
    TwentySix,
}

impl Connectivity {
    pub fn neighbours(self) -> u8 {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    fn max_manhattan(self) -> i64 {
        match self {
            Connectivity::Six => 1,
            Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        }
    }

    /// Whether two voxels at this offset are adjacent.
    pub fn adjacent(self, dx: i64, dy: i64, dz: i64) -> bool {
        let cheb = dx.abs().max(dy.abs()).max(dz.abs());
        let manh = dx.abs() + dy.abs() + dz.abs();
        cheb == 1 && manh <= self.max_manhattan()
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            other => Err(Error::InvalidGrid(format!(
                "connectivity must be 6, 18 or 26, got {other}"
            ))),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        c.neighbours()
    }
}

/// A 3D voxel grid with an analysis mask. Linear voxel index is x-fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub connectivity: Connectivity,
    pub mask: Vec<bool>,
}

impl GridSpec {
    pub fn full(dims: [usize; 3], connectivity: Connectivity) -> Self {
        GridSpec {
            dims,
            connectivity,
            mask: vec![true; dims.iter().product()],
        }
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn in_mask_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be positive, got {:?}",
                self.dims
            )));
        }
        if self.mask.len() != self.voxel_count() {
            return Err(Error::SizeMismatch {
                what: "mask",
                expected: self.voxel_count(),
                found: self.mask.len(),
            });
        }
        Ok(())
    }
}

/// Graph over the in-mask voxels of a grid, plus the id maps both ways.
#[derive(Debug, Clone)]
pub struct GridGraph {
    pub graph: Graph,
    pub voxel_of_vertex: Vec<usize>,
    vertex_of_voxel: Vec<u32>,
}

const OUTSIDE: u32 = u32::MAX;

impl GridGraph {
    pub fn vertex_of_voxel(&self, voxel: usize) -> Option<usize> {
        match self.vertex_of_voxel[voxel] {
            OUTSIDE => None,
            v => Some(v as usize),
        }
    }
}

/// Offsets that are lexicographically positive in (z, y, x); each undirected
/// neighbour pair is generated exactly once from its smaller voxel.
fn forward_offsets(conn: Connectivity) -> Vec<(i64, i64, i64)> {
    let mut out = Vec::with_capacity(13);
    for dz in -1..=1i64 {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                if (dz, dy, dx) > (0, 0, 0) && conn.adjacent(dx, dy, dz) {
                    out.push((dx, dy, dz));
                }
            }
        }
    }
    out
}

/// Connects in-mask voxels according to the grid's connectivity.
/// Out-of-mask voxels are not part of the graph.
pub fn grid_to_graph(spec: &GridSpec) -> Result<GridGraph> {
    spec.validate()?;
    let mut vertex_of_voxel = vec![OUTSIDE; spec.voxel_count()];
    let mut voxel_of_vertex = Vec::new();
    for (voxel, _) in spec.mask.iter().enumerate().filter(|(_, &b)| b) {
        vertex_of_voxel[voxel] = voxel_of_vertex.len() as u32;
        voxel_of_vertex.push(voxel);
    }
    let m = voxel_of_vertex.len();
    if m == 0 {
        return Err(Error::EmptyMask);
    }
    if m >= OUTSIDE as usize {
        return Err(Error::InvalidGrid(format!("{m} in-mask voxels is too many")));
    }

    let [nx, ny, nz] = spec.dims.map(|d| d as i64);
    let offsets = forward_offsets(spec.connectivity);
    let neighbour = |voxel: usize, (dx, dy, dz): (i64, i64, i64)| -> Option<u32> {
        let [x, y, z] = spec.coords(voxel).map(|c| c as i64);
        let (x, y, z) = (x + dx, y + dy, z + dz);
        if x < 0 || y < 0 || z < 0 || x >= nx || y >= ny || z >= nz {
            return None;
        }
        match vertex_of_voxel[(x + nx * (y + ny * z)) as usize] {
            OUTSIDE => None,
            w => Some(w),
        }
    };

    let mut degree = vec![0usize; m + 1];
    for (v, &voxel) in voxel_of_vertex.iter().enumerate() {
        for &off in &offsets {
            if let Some(w) = neighbour(voxel, off) {
                degree[v + 1] += 1;
                degree[w as usize + 1] += 1;
            }
        }
    }
    for i in 0..m {
        degree[i + 1] += degree[i];
    }
    let offsets_csr = degree;
    let mut fill = offsets_csr.clone();
    let mut targets = vec![0u32; offsets_csr[m]];
    for (v, &voxel) in voxel_of_vertex.iter().enumerate() {
        for &off in &offsets {
            if let Some(w) = neighbour(voxel, off) {
                targets[fill[v]] = w;
                fill[v] += 1;
                targets[fill[w as usize]] = v as u32;
                fill[w as usize] += 1;
            }
        }
    }
    for v in 0..m {
        targets[offsets_csr[v]..offsets_csr[v + 1]].sort_unstable();
    }

    Ok(GridGraph {
        graph: Graph {
            offsets: offsets_csr,
            targets,
        },
        voxel_of_vertex,
        vertex_of_voxel,
    })
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

fn parse_error(label: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: label.to_string(),
        line,
        message: message.into(),
    }
}

/// Parses whitespace-separated `u v` pairs, one per line. `#` starts a comment.
/// Line numbers in errors are 1-based; `label` names the source.
pub fn parse_edge_list(text: &str, label: &str) -> Result<Vec<(u32, u32, usize)>> {
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_error(
                label,
                idx + 1,
                format!("expected two vertex ids, found {:?}", line),
            ));
        }
        let id = |s: &str| {
            s.parse::<u32>()
                .map_err(|_| parse_error(label, idx + 1, format!("invalid vertex id {s:?}")))
        };
        let (u, v) = (id(fields[0])?, id(fields[1])?);
        if u == v {
            return Err(parse_error(label, idx + 1, format!("self-loop at vertex {u}")));
        }
        edges.push((u, v, idx + 1));
    }
    Ok(edges)
}

/// Parses one decimal p-value per line; line `i` belongs to vertex `i`.
/// Blank lines and `#` comments are skipped.
pub fn parse_pvalues(text: &str, label: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let p: f64 = line
            .parse()
            .map_err(|_| parse_error(label, idx + 1, format!("invalid p-value {line:?}")))?;
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            return Err(parse_error(
                label,
                idx + 1,
                format!("p-value {p} outside [0, 1]"),
            ));
        }
        values.push(p);
    }
    Ok(values)
}

/// Builds a graph from edge-list and p-value texts. The number of p-values
/// fixes `m`; every edge endpoint must be below it.
pub fn graph_from_texts(
    edges_text: &str,
    edges_label: &str,
    pvalues_text: &str,
    pvalues_label: &str,
) -> Result<(Graph, Vec<f64>)> {
    let pvalues = parse_pvalues(pvalues_text, pvalues_label)?;
    if pvalues.is_empty() {
        return Err(Error::Empty);
    }
    let m = pvalues.len();
    let edges = parse_edge_list(edges_text, edges_label)?;
    if let Some(&(u, v, line)) = edges
        .iter()
        .find(|&&(u, v, _)| u as usize >= m || v as usize >= m)
    {
        return Err(parse_error(
            edges_label,
            line,
            format!(
                "vertex id {} out of range: {pvalues_label} has {m} p-values",
                u.max(v)
            ),
        ));
    }
    let graph = Graph::from_edges(m, edges.into_iter().map(|(u, v, _)| (u, v)))?;
    Ok((graph, pvalues))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_edge_list(edges: &Path, pvalues: &Path) -> Result<(Graph, Vec<f64>)> {
    let edges_text = read_text(edges)?;
    let pvalues_text = read_text(pvalues)?;
    graph_from_texts(
        &edges_text,
        &edges.display().to_string(),
        &pvalues_text,
        &pvalues.display().to_string(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatisticKind {
    /// P-values.
    P,
    /// Standard normal statistics, converted with an upper-tail test.
    Z,
}

/// JSON volume header. `data` and `mask` paths are relative to the header's
/// directory. Data is little-endian raw `dtype`, x-fastest; the mask is one
/// byte per voxel, nonzero meaning in-mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub connectivity: Connectivity,
    pub dtype: Dtype,
    pub statistic: StatisticKind,
    pub data: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
}

/// A loaded statistic volume: grid plus in-mask statistics in vertex order.
#[derive(Debug, Clone)]
pub struct Volume {
    pub grid: GridSpec,
    pub statistic: StatisticKind,
    pub values: Vec<f64>,
}

impl Volume {
    /// In-mask p-values, converting z statistics when needed.
    pub fn pvalues(&self) -> Result<Vec<f64>> {
        match self.statistic {
            StatisticKind::P => Ok(self.values.clone()),
            StatisticKind::Z => self.values.iter().map(|&z| z_to_p(z)).collect(),
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_volume(header_path: &Path) -> Result<Volume> {
    let text = read_text(header_path)?;
    let header: VolumeHeader = serde_json::from_str(&text).map_err(|e| Error::Header {
        path: header_path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = header_path.parent().unwrap_or(Path::new("."));
    let voxels: usize = header.dims.iter().product();
    if voxels == 0 {
        return Err(Error::InvalidGrid(format!(
            "dimensions must be positive, got {:?}",
            header.dims
        )));
    }

    let mask = match &header.mask {
        None => vec![true; voxels],
        Some(rel) => {
            let path = base.join(rel);
            let bytes = read_bytes(&path)?;
            if bytes.len() != voxels {
                return Err(Error::Header {
                    path,
                    message: format!(
                        "mask has {} bytes, dims {:?} need {voxels}",
                        bytes.len(),
                        header.dims
                    ),
                });
            }
            bytes.into_iter().map(|b| b != 0).collect()
        }
    };

    let data_path = base.join(&header.data);
    let bytes = read_bytes(&data_path)?;
    let width = header.dtype.width();
    if bytes.len() != voxels * width {
        return Err(Error::Header {
            path: data_path,
            message: format!(
                "data has {} bytes, dims {:?} with {:?} need {}",
                bytes.len(),
                header.dims,
                header.dtype,
                voxels * width
            ),
        });
    }

    let grid = GridSpec {
        dims: header.dims,
        connectivity: header.connectivity,
        mask,
    };
    let mut values = Vec::with_capacity(grid.in_mask_count());
    for (voxel, chunk) in bytes.chunks_exact(width).enumerate() {
        if !grid.mask[voxel] {
            continue;
        }
        let value = match header.dtype {
            Dtype::F32 => f32::from_le_bytes(chunk.try_into().unwrap()) as f64,
            Dtype::F64 => f64::from_le_bytes(chunk.try_into().unwrap()),
        };
        if value.is_nan() {
            let [x, y, z] = grid.coords(voxel);
            return Err(Error::NanInMask { x, y, z });
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(Volume {
        grid,
        statistic: header.statistic,
        values,
    })
}
