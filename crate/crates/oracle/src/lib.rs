//! Slow, definitional reference implementations. Nothing here shares code
//! with the fast paths in `ari-core` beyond the input types.

use std::collections::VecDeque;

use ari_core::Graph;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Largest `i` such that `i * p[m-i+j] > j * alpha` for every `j` in `1..=i`,
/// by checking every candidate. `sorted` is ascending.
pub fn definitional_h(sorted: &[f64], alpha: f64) -> usize {
    let m = sorted.len();
    (0..=m)
        .filter(|&i| (1..=i).all(|j| i as f64 * sorted[m - i + j - 1] > j as f64 * alpha))
        .max()
        .unwrap_or(0)
}

/// Smallest 1-based rank `v` in `m-h..=m` with `h * p_v <= (v - m + h + 1) * alpha`,
/// or 0 when `h == m`.
pub fn definitional_zeta(sorted: &[f64], alpha: f64, h: usize) -> usize {
    let m = sorted.len();
    if h == m {
        return 0;
    }
    (m - h..=m)
        .filter(|&v| v >= 1)
        .find(|&v| h as f64 * sorted[v - 1] <= (v + h + 1 - m) as f64 * alpha)
        .unwrap_or(m)
}

/// TDN bound of a vertex set straight from the Simes closed-testing
/// formula, comparing `h * p` against `j * alpha` directly.
pub fn simes_tdn(p_of_members: &[f64], alpha: f64, h: usize) -> u64 {
    let n = p_of_members.len();
    (1..=n)
        .map(|j| {
            let hits = p_of_members
                .iter()
                .filter(|&&p| h as f64 * p <= j as f64 * alpha)
                .count() as i64;
            hits - j as i64 + 1
        })
        .max()
        .unwrap_or(0)
        .max(0) as u64
}

/// Vertices reachable from `v` through vertices accepted by `inside`,
/// sorted ascending.
pub fn component(graph: &Graph, v: usize, inside: impl Fn(usize) -> bool) -> Vec<u32> {
    let mut seen = vec![false; graph.m()];
    let mut queue = VecDeque::from([v]);
    seen[v] = true;
    let mut out = Vec::new();
    while let Some(u) = queue.pop_front() {
        out.push(u as u32);
        for &w in graph.neighbors(u) {
            let w = w as usize;
            if !seen[w] && inside(w) {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    out.sort_unstable();
    out
}

/// A supra-threshold cluster found by exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteCluster {
    /// Original vertex ids, ascending.
    pub members: Vec<u32>,
    pub tdn: u64,
    pub tdp: f64,
}

/// Every distinct supra-threshold cluster: the component containing `v` of
/// the vertices whose p-value is at most `p_v`, for every `v`.
pub fn all_clusters(graph: &Graph, p: &[f64], alpha: f64) -> Vec<BruteCluster> {
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = definitional_h(&sorted, alpha);
    let mut sets: Vec<Vec<u32>> = (0..p.len())
        .map(|v| component(graph, v, |u| p[u] <= p[v]))
        .collect();
    sets.sort();
    sets.dedup();
    sets.into_iter()
        .map(|members| {
            let ps: Vec<f64> = members.iter().map(|&u| p[u as usize]).collect();
            let tdn = simes_tdn(&ps, alpha, h);
            let tdp = tdn as f64 / members.len() as f64;
            BruteCluster { members, tdn, tdp }
        })
        .collect()
}

fn contains(big: &[u32], small: &[u32]) -> bool {
    big.len() > small.len() && small.iter().all(|x| big.binary_search(x).is_ok())
}

/// Clusters with TDP bound at least `gamma` and no qualifying strict
/// superset, sorted by member list.
pub fn maximal_clusters(clusters: &[BruteCluster], gamma: f64) -> Vec<BruteCluster> {
    let qualifying: Vec<&BruteCluster> = clusters.iter().filter(|c| c.tdp >= gamma).collect();
    let mut out: Vec<BruteCluster> = qualifying
        .iter()
        .filter(|c| !qualifying.iter().any(|o| contains(&o.members, &c.members)))
        .map(|&c| c.clone())
        .collect();
    out.sort_by(|a, b| a.members.cmp(&b.members));
    out
}

/// Per vertex, the largest TDP bound among clusters that contain it.
pub fn gamma_map(clusters: &[BruteCluster], m: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; m];
    for c in clusters {
        for &v in &c.members {
            out[v as usize] = out[v as usize].max(c.tdp);
        }
    }
    out
}

/// Random sparse graph plus p-values, with a mix of densities, signal
/// strengths and tied values.
pub fn random_instance(rng: &mut ChaCha8Rng, max_m: usize) -> (Graph, Vec<f64>) {
    let m = rng.random_range(1..=max_m);
    let density: f64 = [0.0, 0.5, 1.0, 2.0, 4.0][rng.random_range(0..5)];
    let n_edges = (density * m as f64).round() as usize;
    let mut edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let a = rng.random_range(0..m as u32);
        let b = rng.random_range(0..m as u32);
        if a != b {
            edges.push((a, b));
        }
    }
    // path backbone on some instances so large clusters appear
    if rng.random_bool(0.4) {
        edges.extend((1..m as u32).map(|v| (v - 1, v)));
    }
    let graph = Graph::from_edges(m, edges).expect("valid random edges");
    let power = rng.random_range(1.0..6.0);
    let signal = rng.random_range(0.0..1.0);
    let coarse = rng.random_bool(0.25);
    let p = (0..m)
        .map(|_| {
            let u: f64 = rng.random();
            let x = if rng.random_bool(signal) { u.powf(power) * 0.01 } else { u };
            if coarse {
                (x * 50.0).round() / 50.0
            } else {
                x
            }
        })
        .collect();
    (graph, p)
}

/// Subtree orders of a forest given as a parent array in which every
/// parent has a larger index.
pub fn subtree_sizes(parent: &[Option<usize>]) -> Vec<u64> {
    let mut size = vec![1u64; parent.len()];
    for v in 0..parent.len() {
        if let Some(u) = parent[v] {
            size[u] += size[v];
        }
    }
    size
}

/// Sum of subtree orders over the path starts of the cover in which each
/// non-leaf continues into `choice[v]`.
pub fn cover_sigma(parent: &[Option<usize>], choice: &[Option<u32>]) -> u64 {
    let size = subtree_sizes(parent);
    let mut chosen = vec![false; parent.len()];
    for w in choice.iter().flatten() {
        chosen[*w as usize] = true;
    }
    (0..parent.len()).filter(|&v| !chosen[v]).map(|v| size[v]).sum()
}

/// Every minimal path cover of the forest: one child choice per non-leaf.
pub fn all_covers(parent: &[Option<usize>]) -> Vec<Vec<Option<u32>>> {
    let m = parent.len();
    let mut kids: Vec<Vec<u32>> = vec![Vec::new(); m];
    for (v, p) in parent.iter().enumerate() {
        if let Some(u) = p {
            kids[*u].push(v as u32);
        }
    }
    let mut covers = vec![Vec::with_capacity(m)];
    for k in &kids {
        covers = covers
            .into_iter()
            .flat_map(|prefix: Vec<Option<u32>>| {
                let options: Vec<Option<u32>> = if k.is_empty() {
                    vec![None]
                } else {
                    k.iter().map(|&w| Some(w)).collect()
                };
                options.into_iter().map(move |o| {
                    let mut next = prefix.clone();
                    next.push(o);
                    next
                })
            })
            .collect();
    }
    covers
}

/// Calls `f` with every tree on `m` vertices whose parent indices exceed
/// their children's, rooted at `m - 1`. Every unlabelled rooted tree shape
/// appears at least once.
pub fn for_each_increasing_tree(m: usize, mut f: impl FnMut(&[Option<usize>])) {
    if m == 0 {
        return;
    }
    let mut parent: Vec<Option<usize>> = (0..m).map(|v| (v + 1 < m).then_some(m - 1)).collect();
    // odometer over parent[v] in v+1..m, starting at the top value
    loop {
        f(&parent);
        let mut v = 0;
        loop {
            if v + 1 >= m {
                return;
            }
            let cur = parent[v].unwrap();
            if cur > v + 1 {
                parent[v] = Some(cur - 1);
                break;
            }
            parent[v] = Some(m - 1);
            v += 1;
        }
    }
}

/// Random forest with parents above children; roughly one root in
/// `root_every` vertices.
pub fn random_forest(rng: &mut ChaCha8Rng, m: usize, root_every: usize) -> Vec<Option<usize>> {
    (0..m)
        .map(|v| {
            if v + 1 == m || rng.random_range(0..root_every.max(1)) == 0 {
                None
            } else {
                // bias towards nearby parents for deep trees on some draws
                let hi = if rng.random_bool(0.5) { m } else { (v + 4).min(m) };
                Some(rng.random_range(v + 1..hi))
            }
        })
        .collect()
}

/// Heap-shaped binary tree on `m` vertices, relabelled by post-order so
/// parents exceed children.
pub fn complete_binary_tree(m: usize) -> Vec<Option<usize>> {
    // heap index i (1-based) has children 2i, 2i+1
    let mut post = vec![0usize; m + 1];
    let mut next = 0;
    let mut stack = vec![(1usize, false)];
    while let Some((i, done)) = stack.pop() {
        if i > m {
            continue;
        }
        if done {
            post[i] = next;
            next += 1;
        } else {
            stack.push((i, true));
            stack.push((2 * i + 1, false));
            stack.push((2 * i, false));
        }
    }
    let mut parent = vec![None; m];
    for i in 2..=m {
        parent[post[i]] = Some(post[i / 2]);
    }
    parent
}

/// Total number of ones in the binary expansions of `0..=m`.
pub fn binary_digit_total(m: u64) -> u64 {
    (0..=m).map(|n| n.count_ones() as u64).sum()
}

/// Upper bound on the heavy-cover sequentialisation length of any forest
/// of order `m`.
pub fn sigma_upper_bound(m: usize) -> f64 {
    let n = (m + 1) as f64;
    n * n.log(4.0) + (5.0 / 6.0 - 3f64.log(4.0)) * n
}
