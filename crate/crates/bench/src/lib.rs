//! Synthetic workloads and timing for the TDP query structure.
//!
//! Random p-values are `U^3` with `U` uniform on (0, 1), drawn from
//! `ChaCha8Rng::seed_from_u64(seed)`: each 64-bit output keeps its top 53
//! bits `k` and maps to `k / 2^53`, redrawing when `k = 0`, so `U` never
//! hits 0 or 1 and the stream is identical on every platform.

use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};

use ari_core::{
    gamma_grid, grid_to_graph, Connectivity, Graph, GridSpec, PhaseTimings, TdpStructure,
};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest instance the generators will allocate.
pub const MAX_VERTICES: usize = 1 << 24;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("instance with {requested} vertices exceeds the budget of {budget}")]
    Budget { requested: usize, budget: usize },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Core(#[from] ari_core::Error),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

fn check_budget(requested: usize) -> Result<()> {
    if requested > MAX_VERTICES {
        Err(BenchError::Budget {
            requested,
            budget: MAX_VERTICES,
        })
    } else {
        Ok(())
    }
}

fn unit_open(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let k = rng.next_u64() >> 11;
        if k != 0 {
            return k as f64 * (1.0 / (1u64 << 53) as f64);
        }
    }
}

/// `m` cubed uniforms from the documented generator.
pub fn gen_pvalues(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m).map(|_| unit_open(&mut rng).powi(3)).collect()
}

/// The `k x k x k` voxel cube with every voxel in the mask.
pub fn gen_cube(k: usize, connectivity: Connectivity) -> Result<Graph> {
    if k == 0 {
        return Err(BenchError::Scenario("cube side must be positive".into()));
    }
    let m = k.checked_pow(3).unwrap_or(usize::MAX);
    check_budget(m)?;
    Ok(grid_to_graph(&GridSpec::full([k, k, k], connectivity))?.graph)
}

/// Perfect binary tree of order `2^depth - 1` in heap layout (vertex `i`
/// has children `2i+1`, `2i+2`). Sorted cubed uniforms are handed out in
/// post-order, so every vertex has a larger p-value than its subtree and the
/// cluster forest reproduces the tree.
pub fn gen_perfect_binary_tree(depth: u32, seed: u64) -> Result<(Graph, Vec<f64>)> {
    if depth == 0 || depth >= usize::BITS {
        return Err(BenchError::Scenario(format!("bad tree depth {depth}")));
    }
    let m = (1usize << depth) - 1;
    check_budget(m)?;
    let graph = Graph::from_edges(m, (1..m as u32).map(|i| ((i - 1) / 2, i)))?;
    let mut sorted = gen_pvalues(m, seed);
    sorted.sort_by(f64::total_cmp);
    let mut p = vec![0.0; m];
    let mut next = 0;
    let mut stack = vec![(0usize, false)];
    while let Some((i, done)) = stack.pop() {
        if i >= m {
            continue;
        }
        if done {
            p[i] = sorted[next];
            next += 1;
        } else {
            stack.extend([(i, true), (2 * i + 2, false), (2 * i + 1, false)]);
        }
    }
    Ok((graph, p))
}

/// Caterpillar on `m` vertices (`m` even): vertices `m/2..m` form the spine
/// and leaf `i < m/2` hangs off spine vertex `m - 1 - i`. P-values increase
/// with the vertex id, which makes the spine the long path of the forest.
pub fn gen_caterpillar(m: usize) -> Result<(Graph, Vec<f64>)> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(BenchError::Scenario(format!(
            "caterpillar order must be even and positive, got {m}"
        )));
    }
    check_budget(m)?;
    let half = m / 2;
    let spine = (half + 1..m).map(|v| ((v - 1) as u32, v as u32));
    let legs = (0..half).map(|i| (i as u32, (m - 1 - i) as u32));
    let graph = Graph::from_edges(m, spine.chain(legs))?;
    let p = (0..m).map(|v| (v + 1) as f64 / (m + 1) as f64).collect();
    Ok((graph, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Cube,
    PerfectBinaryTree,
    Caterpillar,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Cube => "cube",
            Family::PerfectBinaryTree => "perfect_binary_tree",
            Family::Caterpillar => "caterpillar",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cube" => Ok(Family::Cube),
            "perfect_binary_tree" | "tree" => Ok(Family::PerfectBinaryTree),
            "caterpillar" => Ok(Family::Caterpillar),
            other => Err(BenchError::Scenario(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchScenario {
    pub family: Family,
    /// Cube side, tree depth or caterpillar order.
    pub size: usize,
    /// Used by cubes only.
    pub connectivity: Connectivity,
    pub seed: u64,
    pub repetitions: usize,
}

impl BenchScenario {
    pub fn name(&self) -> String {
        match self.family {
            Family::Cube => format!("cube_k{}_c{}", self.size, u8::from(self.connectivity)),
            Family::PerfectBinaryTree => format!("tree_d{}", self.size),
            Family::Caterpillar => format!("caterpillar_m{}", self.size),
        }
    }

    /// Graph and p-values for repetition `rep`. Cubes draw fresh p-values
    /// per repetition; the other families are deterministic shapes.
    pub fn instance(&self, rep: usize) -> Result<(Graph, Vec<f64>)> {
        let seed = self.seed.wrapping_add(rep as u64);
        match self.family {
            Family::Cube => {
                let g = gen_cube(self.size, self.connectivity)?;
                let p = gen_pvalues(g.m(), seed);
                Ok((g, p))
            }
            Family::PerfectBinaryTree => {
                let depth = u32::try_from(self.size)
                    .map_err(|_| BenchError::Scenario(format!("bad tree depth {}", self.size)))?;
                gen_perfect_binary_tree(depth, seed)
            }
            Family::Caterpillar => gen_caterpillar(self.size),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryTiming {
    pub gamma: f64,
    pub seconds: f64,
    /// Total number of vertices in the returned clusters.
    pub output_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub scenario: String,
    pub family: Family,
    pub m: usize,
    pub sigma: u64,
    pub repetitions: usize,
    /// Mean build phase times.
    pub phases: PhaseTimings,
    pub queries: Vec<QueryTiming>,
}

pub const CSV_HEADER: &str = "scenario,family,m,phase_or_gamma,seconds,output_size,sigma";

impl BenchReport {
    pub fn build_seconds(&self) -> f64 {
        self.phases.total().as_secs_f64()
    }

    pub fn mean_query_seconds(&self) -> f64 {
        if self.queries.is_empty() {
            return 0.0;
        }
        self.queries.iter().map(|q| q.seconds).sum::<f64>() / self.queries.len() as f64
    }

    /// CSV rows without header: the three build phases, then one row per
    /// threshold.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        let head = format!("{},{},{}", self.scenario, self.family, self.m);
        for (name, d) in [
            ("forest", self.phases.forest),
            ("bounds", self.phases.bounds),
            ("index", self.phases.index),
        ] {
            let _ = writeln!(out, "{head},{name},{:.9},,{}", d.as_secs_f64(), self.sigma);
        }
        for q in &self.queries {
            let _ = writeln!(
                out,
                "{head},{},{:.9},{},{}",
                q.gamma, q.seconds, q.output_size, self.sigma
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{CSV_HEADER}\n{}", self.csv_rows())
    }
}

/// Builds the scenario's structure `repetitions` times after one discarded
/// warm-up build, and times every threshold in `0, 0.01, ..., 1` on each.
pub fn run_bench(scenario: &BenchScenario, alpha: f64) -> Result<BenchReport> {
    if scenario.repetitions == 0 {
        return Err(BenchError::Scenario("repetitions must be positive".into()));
    }
    let grid = gamma_grid(0.0, 1.0, 0.01)?;
    {
        let (g, p) = scenario.instance(0)?;
        TdpStructure::build(&g, &p, alpha)?;
    }

    let reps = scenario.repetitions;
    let mut phases = [Duration::ZERO; 3];
    let mut query_secs = vec![0.0f64; grid.len()];
    let mut output = vec![0usize; grid.len()];
    let (mut m, mut sigma) = (0, 0);
    for rep in 0..reps {
        let (g, p) = scenario.instance(rep)?;
        let (s, report) = TdpStructure::build(&g, &p, alpha)?;
        phases[0] += report.timings.forest;
        phases[1] += report.timings.bounds;
        phases[2] += report.timings.index;
        m = report.m;
        sigma = report.sigma;
        let mut session = s.session();
        for (i, &gamma) in grid.iter().enumerate() {
            let t = Instant::now();
            let clusters = session.query(gamma)?;
            query_secs[i] += t.elapsed().as_secs_f64();
            output[i] += clusters.iter().map(|c| c.size).sum::<usize>();
        }
    }

    let n = reps as u32;
    Ok(BenchReport {
        scenario: scenario.name(),
        family: scenario.family,
        m,
        sigma,
        repetitions: reps,
        phases: PhaseTimings {
            forest: phases[0] / n,
            bounds: phases[1] / n,
            index: phases[2] / n,
        },
        queries: grid
            .iter()
            .enumerate()
            .map(|(i, &gamma)| QueryTiming {
                gamma,
                seconds: query_secs[i] / reps as f64,
                output_size: output[i] / reps,
            })
            .collect(),
    })
}
