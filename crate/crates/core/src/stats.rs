//! Statistical primitives for Simes-based closed testing.
//!
//! Ranks are 0-based throughout the crate: rank `r` is the vertex with the
//! `(r + 1)`-th smallest p-value. The quantities `h`, `zeta` and the
//! discretised p-values `c` are the only parts of the p-values that the
//! bound computations downstream ever look at.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};

/// P-values sorted ascending, together with the rank -> vertex permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedPValues {
    perm: Vec<u32>,
    values: Vec<f64>,
    alpha: f64,
}

impl SortedPValues {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// P-values in ascending order, indexed by rank.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Original vertex id of each rank.
    pub fn perm(&self) -> &[u32] {
        &self.perm
    }

    pub fn vertex_of(&self, rank: usize) -> usize {
        self.perm[rank] as usize
    }

    /// Inverse permutation: the rank of each original vertex id.
    pub fn ranks(&self) -> Vec<u32> {
        let mut ranks = vec![0u32; self.perm.len()];
        for (rank, &v) in self.perm.iter().enumerate() {
            ranks[v as usize] = rank as u32;
        }
        ranks
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// Sort raw per-vertex p-values. Ties are broken by vertex id.
pub fn sort_pvalues(raw: &[f64], alpha: f64) -> Result<SortedPValues> {
    check_alpha(alpha)?;
    if raw.is_empty() {
        return Err(Error::Empty);
    }
    if raw.len() > u32::MAX as usize {
        return Err(Error::SizeMismatch {
            what: "p-value list",
            expected: u32::MAX as usize,
            found: raw.len(),
        });
    }
    for (vertex, &value) in raw.iter().enumerate() {
        if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
            return Err(Error::InvalidPValue { vertex, value });
        }
    }
    // `+ 0.0` folds -0.0 into 0.0. Bit patterns of non-negative floats sort
    // in numeric order, and the id in the pair breaks ties.
    let mut keyed: Vec<(u64, u32)> = raw
        .iter()
        .enumerate()
        .map(|(v, &x)| ((x + 0.0).to_bits(), v as u32))
        .collect();
    keyed.sort_unstable();
    let perm = keyed.iter().map(|&(_, v)| v).collect();
    let values = keyed.iter().map(|&(bits, _)| f64::from_bits(bits)).collect();
    Ok(SortedPValues {
        perm,
        values,
        alpha,
    })
}

/// Size of the largest index set whose Simes test does not reject:
/// the largest `i` with `i * p[m-i+j] > j * alpha` for every `j` in `1..=i`.
///
/// For a fixed `i` the binding constraint is the point `(k, p_k)`, `k > m - i`,
/// minimising the slope seen from `(m - i, 0)`. That point is found on the
/// lower convex hull of the suffix, which is grown right-to-left, so the whole
/// scan is `O(m log m)`. The decision itself is always the direct comparison.
pub fn compute_h(sp: &SortedPValues) -> usize {
    let p = &sp.values;
    let m = p.len();
    let alpha = sp.alpha;
    let y = |k: usize| p[k - 1];

    // 1-based x coordinates; the last element is the leftmost hull vertex.
    let mut hull: Vec<usize> = Vec::with_capacity(m);
    let mut best = 0;
    for t in (0..m).rev() {
        let kn = t + 1;
        let yn = y(kn);
        while hull.len() >= 2 {
            let a = hull[hull.len() - 1];
            let b = hull[hull.len() - 2];
            let (ya, yb) = (y(a), y(b));
            // keep `a` only if it lies strictly below the segment kn -> b
            if (ya - yn) * ((b - a) as f64) < (yb - ya) * ((a - kn) as f64) {
                break;
            }
            hull.pop();
        }
        hull.push(kn);

        // Slopes from (t, 0) along the hull are unimodal; find the first
        // vertex whose outgoing edge is at least as steep as its own slope.
        let len = hull.len();
        let vertex = |s: usize| hull[len - 1 - s];
        let turns = |s: usize| {
            let (ks, kn) = (vertex(s), vertex(s + 1));
            (y(kn) - y(ks)) * (ks - t) as f64 >= y(ks) * (kn - ks) as f64
        };
        let (mut lo, mut hi) = (0usize, len - 1);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if turns(mid) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }

        let i = (m - t) as f64;
        let passes = |k: usize| i * y(k) > (k - t) as f64 * alpha;
        let mut feasible = passes(vertex(lo));
        if lo > 0 {
            feasible &= passes(vertex(lo - 1));
        }
        if lo + 1 < len {
            feasible &= passes(vertex(lo + 1));
        }
        if feasible {
            best = m - t;
        }
    }
    best
}

/// Rank cutoff such that only the `zeta` smallest p-values can contribute to
/// any bound. Returns 0 when `h == m`.
pub fn compute_zeta(sp: &SortedPValues, h: usize) -> usize {
    let m = sp.len();
    if h >= m {
        return 0;
    }
    let hf = h as f64;
    ((m - h).max(1)..=m)
        .find(|&v| hf * sp.values[v - 1] <= (v + h + 1 - m) as f64 * sp.alpha)
        .unwrap_or(m)
}

fn discretize_one(h: f64, p: f64, alpha: f64) -> u64 {
    let lhs = h * p;
    let mut c = (lhs / alpha).ceil().max(1.0) as u64;
    // Settle rounding in the division so that `lhs <= j * alpha <=> c <= j`
    // holds with the same float comparison used everywhere else.
    while c > 1 && lhs <= (c - 1) as f64 * alpha {
        c -= 1;
    }
    while lhs > c as f64 * alpha {
        c += 1;
    }
    c
}

/// Discretised p-values `c = max(1, ceil(h p / alpha))`, indexed by rank.
pub fn discretize(sp: &SortedPValues, h: usize) -> Vec<u64> {
    let hf = h as f64;
    sp.values
        .iter()
        .map(|&p| discretize_one(hf, p, sp.alpha))
        .collect()
}

/// Everything the bound computations need from the p-values.
#[derive(Debug, Clone, PartialEq)]
pub struct SimesContext {
    pub h: usize,
    pub zeta: usize,
    pub c: Vec<u64>,
    pub alpha: f64,
}

impl SimesContext {
    pub fn new(sp: &SortedPValues) -> Self {
        let h = compute_h(sp);
        SimesContext {
            h,
            zeta: compute_zeta(sp, h),
            c: discretize(sp, h),
            alpha: sp.alpha,
        }
    }

    pub fn m(&self) -> usize {
        self.c.len()
    }
}

/// `|{v in S : c(v) <= j}| - j + 1`, evaluated directly.
pub fn naive_delta(set: &[u32], j: u64, ctx: &SimesContext) -> i64 {
    let hits = set.iter().filter(|&&v| ctx.c[v as usize] <= j).count() as i64;
    hits - j as i64 + 1
}

/// TDN lower bound by maximising `naive_delta` over `j in 1..=|S|`.
pub fn naive_d(set: &[u32], ctx: &SimesContext) -> u64 {
    (1..=set.len() as u64)
        .map(|j| naive_delta(set, j, ctx))
        .max()
        .map_or(0, |d| d.max(0) as u64)
}

pub fn naive_q(set: &[u32], ctx: &SimesContext) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(naive_d(set, ctx) as f64 / set.len() as f64)
}

/// One-sided upper-tail p-value of a standard normal statistic, clamped to
/// `[f64::MIN_POSITIVE, 1]`.
pub fn z_to_p(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::NonFiniteStatistic(z));
    }
    let upper = |x: f64| 0.5 * libm::erfc(x / SQRT_2);
    let p = if z >= 0.0 { upper(z) } else { 1.0 - upper(-z) };
    Ok(p.clamp(f64::MIN_POSITIVE, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx_from_c(c: Vec<u64>) -> SimesContext {
        SimesContext {
            h: 0,
            zeta: 0,
            c,
            alpha: 0.05,
        }
    }

    #[test]
    fn sort_breaks_ties_by_vertex_id() {
        let sp = sort_pvalues(&[0.3, 0.1, 0.3], 0.05).unwrap();
        assert_eq!(sp.values(), &[0.1, 0.3, 0.3]);
        assert_eq!(sp.perm(), &[1, 0, 2]);
        assert_eq!(sp.ranks(), vec![1, 0, 2]);

        let sp = sort_pvalues(&[0.5], 0.05).unwrap();
        assert_eq!(sp.perm(), &[0]);

        let sp = sort_pvalues(&[1.0, 0.0], 0.1).unwrap();
        assert_eq!(sp.values(), &[0.0, 1.0]);
        assert_eq!(sp.perm(), &[1, 0]);
    }

    #[test]
    fn sort_rejects_bad_input() {
        assert!(matches!(sort_pvalues(&[], 0.05), Err(Error::Empty)));
        assert!(matches!(
            sort_pvalues(&[0.1, f64::NAN], 0.05),
            Err(Error::InvalidPValue { vertex: 1, .. })
        ));
        assert!(matches!(
            sort_pvalues(&[1.5], 0.05),
            Err(Error::InvalidPValue { vertex: 0, .. })
        ));
        assert!(matches!(
            sort_pvalues(&[0.1], 1.0),
            Err(Error::InvalidAlpha(_))
        ));
        assert!(matches!(
            sort_pvalues(&[0.1], 0.0),
            Err(Error::InvalidAlpha(_))
        ));
    }

    #[test]
    fn h_on_small_examples() {
        let sp = sort_pvalues(&[1.0, 1.0, 1.0], 0.05).unwrap();
        assert_eq!(compute_h(&sp), 3);
        let sp = sort_pvalues(&[0.0, 0.0, 0.0], 0.05).unwrap();
        assert_eq!(compute_h(&sp), 0);
        let sp = sort_pvalues(&[0.01, 0.2, 0.3], 0.05).unwrap();
        assert_eq!(compute_h(&sp), 2);
    }

    #[test]
    fn zeta_on_small_examples() {
        let sp = sort_pvalues(&[0.01, 0.2, 0.3], 0.05).unwrap();
        assert_eq!(compute_zeta(&sp, 2), 1);
        let sp = sort_pvalues(&[1.0; 7], 0.05).unwrap();
        assert_eq!(compute_h(&sp), 7);
        assert_eq!(compute_zeta(&sp, 7), 0);
    }

    #[test]
    fn discretisation_examples() {
        assert_eq!(discretize_one(0.0, 0.7, 0.05), 1);
        assert_eq!(discretize_one(2.0, 0.01, 0.05), 1);
        assert_eq!(discretize_one(2.0, 0.2, 0.05), 8);
        // boundary case where h p / alpha rounds across an integer
        for (h, p, alpha) in [(3.0, 0.1, 0.05), (7.0, 0.3, 0.07), (10.0, 0.03, 0.1)] {
            let c = discretize_one(h, p, alpha);
            assert!(h * p <= c as f64 * alpha);
            assert!(c == 1 || h * p > (c - 1) as f64 * alpha);
        }
    }

    #[test]
    fn delta_and_d_examples() {
        let ctx = ctx_from_c(vec![3, 1, 5, 3, 6]);
        assert_eq!(naive_delta(&[], 1, &ctx), 0);
        assert_eq!(naive_delta(&[0], 3, &ctx), -1);
        assert_eq!(naive_delta(&[0, 1, 2, 3], 3, &ctx), 1);
        assert_eq!(naive_d(&[], &ctx), 0);
        assert_eq!(naive_d(&[0, 1, 2, 3, 4], &ctx), 1);

        let ctx = ctx_from_c(vec![1, 1, 1]);
        assert_eq!(naive_d(&[0, 1, 2], &ctx), 3);
        assert_eq!(naive_q(&[0, 1, 2], &ctx).unwrap(), 1.0);
        assert!(matches!(naive_q(&[], &ctx), Err(Error::EmptySet)));
    }

    #[test]
    fn z_to_p_reference_values() {
        assert_eq!(z_to_p(0.0).unwrap(), 0.5);
        assert!((z_to_p(1.6448536269514722).unwrap() - 0.05).abs() < 1e-10);
        // reference values from 40-digit arithmetic
        let table = [
            (-8.0, 0.9999999999999993),
            (-3.5, 0.9997673709209645),
            (-1.0, 0.8413447460685429),
            (0.5, 0.3085375387259869),
            (1.0, 0.15865525393145705),
            (1.959963984540054, 0.025000000000000012),
            (2.5, 0.006209665325776135),
            (4.0, 3.1671241833119924e-05),
            (6.0, 9.86587645037698e-10),
            (8.0, 6.220960574271784e-16),
        ];
        for (z, p) in table {
            assert!((z_to_p(z).unwrap() - p).abs() <= 1e-12, "z = {z}");
        }
        let far = z_to_p(38.0).unwrap();
        assert!(far > 0.0);
        assert_eq!(far, f64::MIN_POSITIVE);
        assert_eq!(z_to_p(-40.0).unwrap(), 1.0);
        assert!(z_to_p(f64::NAN).is_err());
        assert!(z_to_p(f64::INFINITY).is_err());
    }

    #[test]
    fn z_to_p_is_monotone() {
        let mut prev = z_to_p(-8.0).unwrap();
        for i in 1..=1600 {
            let p = z_to_p(-8.0 + i as f64 * 0.01).unwrap();
            assert!(p <= prev);
            prev = p;
        }
    }
}
