//! k-means for the localization stages.
//!
//! Scalar inputs (attention maps) are partitioned exactly: optimal 1-D
//! clusters are contiguous in sorted order, so a search over split points
//! finds the minimum within-cluster SSE. The optimum is also a fixpoint of
//! Lloyd's iteration. Vector inputs (pixel colours) run Lloyd's iteration
//! from seeded k-means++ starts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;

const MAX_ITERATIONS: usize = 300;
const RESTARTS: u64 = 4;
/// Largest number of distinct scalar values handled by the exact search.
const EXACT_LIMIT: usize = 4096;

/// Cluster labels and centers, ordered so cluster 0 has the largest center.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub assignments: Vec<usize>,
    /// One center per cluster, each `dim` long.
    pub centers: Vec<Vec<f64>>,
    /// Within-cluster sum of squared distances.
    pub sse: f64,
}

impl ClusterResult {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k()];
        for &a in &self.assignments {
            s[a] += 1;
        }
        s
    }

    pub fn indicator(&self, cluster: usize) -> Vec<bool> {
        self.assignments.iter().map(|&a| a == cluster).collect()
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::config("k must be positive"));
    }
    if n == 0 {
        return Err(Error::contract("cannot cluster an empty set"));
    }
    Ok(())
}

/// Cluster scalar values into `k` groups.
pub fn kmeans(values: &[f64], k: usize, seed: u64) -> Result<ClusterResult> {
    check_k(k, values.len())?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("k-means input holds non-finite values"));
    }
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < k {
        return Err(Error::DegenerateClustering {
            k,
            distinct: distinct.len(),
        });
    }
    if distinct.len() > EXACT_LIMIT && k > 2 {
        return kmeans_points(values, 1, k, seed);
    }
    Ok(exact_scalar(values, &distinct, k))
}

fn exact_scalar(values: &[f64], distinct: &[f64], k: usize) -> ClusterResult {
    let shift = values.iter().sum::<f64>() / values.len() as f64;
    let m = distinct.len();
    let mut count = vec![0f64; m];
    let mut sum = vec![0f64; m];
    let mut sq = vec![0f64; m];
    for &v in values {
        let i = distinct.partition_point(|&d| d < v);
        let c = v - shift;
        count[i] += 1.0;
        sum[i] += c;
        sq[i] += c * c;
    }
    let prefix = |a: &[f64]| {
        let mut p = vec![0.0; a.len() + 1];
        for i in 0..a.len() {
            p[i + 1] = p[i] + a[i];
        }
        p
    };
    let (pc, ps, pq) = (prefix(&count), prefix(&sum), prefix(&sq));
    let cost = |a: usize, b: usize| -> f64 {
        let n = pc[b] - pc[a];
        let s = ps[b] - ps[a];
        ((pq[b] - pq[a]) - s * s / n).max(0.0)
    };
    // best[j][i]: min cost of splitting distinct[..i] into j+1 groups; cut[j][i] the start of the last group
    let mut best = vec![vec![f64::INFINITY; m + 1]; k];
    let mut cut = vec![vec![0usize; m + 1]; k];
    for i in 1..=m {
        best[0][i] = cost(0, i);
    }
    for j in 1..k {
        let ends = if j == k - 1 { m..=m } else { (j + 1)..=m };
        for i in ends {
            for s in j..i {
                let c = best[j - 1][s] + cost(s, i);
                if c < best[j][i] {
                    best[j][i] = c;
                    cut[j][i] = s;
                }
            }
        }
    }
    let mut bounds = vec![m];
    let mut i = m;
    for j in (1..k).rev() {
        i = cut[j][i];
        bounds.push(i);
    }
    bounds.push(0);
    bounds.reverse();
    // bounds: 0 = b0 < b1 < ... < bk = m, ascending groups; relabel descending
    let group_of = |d: usize| bounds.partition_point(|&b| b <= d) - 1;
    let assignments: Vec<usize> = values
        .iter()
        .map(|&v| k - 1 - group_of(distinct.partition_point(|&d| d < v)))
        .collect();
    let centers: Vec<Vec<f64>> = (0..k)
        .rev()
        .map(|g| {
            let (a, b) = (bounds[g], bounds[g + 1]);
            vec![(ps[b] - ps[a]) / (pc[b] - pc[a]) + shift]
        })
        .collect();
    ClusterResult {
        assignments,
        centers,
        sse: best[k - 1][m],
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cluster `points` (row-major, `dim` values per point) into `k` groups.
pub fn kmeans_points(points: &[f64], dim: usize, k: usize, seed: u64) -> Result<ClusterResult> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::contract("point buffer does not divide into the dimension"));
    }
    let n = points.len() / dim;
    check_k(k, n)?;
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("k-means input holds non-finite values"));
    }
    let mut keys: Vec<Vec<u64>> = points.chunks(dim).map(|p| p.iter().map(|v| v.to_bits()).collect()).collect();
    keys.sort_unstable();
    keys.dedup();
    if keys.len() < k {
        return Err(Error::DegenerateClustering {
            k,
            distinct: keys.len(),
        });
    }
    let mut best: Option<ClusterResult> = None;
    for restart in 0..RESTARTS {
        let run = lloyd(points, dim, k, seed.wrapping_add(restart.wrapping_mul(0x9e37_79b9)));
        if best.as_ref().is_none_or(|b| run.sse < b.sse) {
            best = Some(run);
        }
    }
    Ok(order_descending(best.expect("at least one restart"), dim))
}

fn assign(points: &[f64], dim: usize, centers: &[Vec<f64>]) -> Vec<usize> {
    let n = points.len() / dim;
    par::map_range(n, |i| {
        let p = &points[i * dim..(i + 1) * dim];
        let mut best = (0, f64::INFINITY);
        for (c, center) in centers.iter().enumerate() {
            let d = dist2(p, center);
            if d < best.1 {
                best = (c, d);
            }
        }
        best.0
    })
}

fn lloyd(points: &[f64], dim: usize, k: usize, seed: u64) -> ClusterResult {
    let n = points.len() / dim;
    let point = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![point(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| dist2(point(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(point(next).to_vec());
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist2(point(i), centers.last().expect("just pushed")));
        }
    }
    let mut assignments = assign(points, dim, &centers);
    for _ in 0..MAX_ITERATIONS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(point(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed an empty cluster at the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        dist2(point(a), &centers[assignments[a]])
                            .total_cmp(&dist2(point(b), &centers[assignments[b]]))
                            .then(b.cmp(&a))
                    })
                    .expect("n > 0");
                centers[c] = point(far).to_vec();
            } else {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next = assign(points, dim, &centers);
        if next == assignments {
            break;
        }
        assignments = next;
    }
    let sse = assignments
        .iter()
        .enumerate()
        .map(|(i, &a)| dist2(point(i), &centers[a]))
        .sum();
    ClusterResult {
        assignments,
        centers,
        sse,
    }
}

/// Relabel so centers run from the largest component sum to the smallest; ties keep first occurrence.
fn order_descending(mut r: ClusterResult, _dim: usize) -> ClusterResult {
    let k = r.k();
    let first_seen: Vec<usize> = (0..k)
        .map(|c| r.assignments.iter().position(|&a| a == c).unwrap_or(usize::MAX))
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    let key = |c: usize| r.centers[c].iter().sum::<f64>();
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(first_seen[a].cmp(&first_seen[b])));
    let mut relabel = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    r.assignments.iter_mut().for_each(|a| *a = relabel[*a]);
    r.centers = order.iter().map(|&c| r.centers[c].clone()).collect();
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn groups(r: &ClusterResult, values: &[f64]) -> Vec<Vec<f64>> {
        (0..r.k())
            .map(|c| {
                values
                    .iter()
                    .zip(&r.assignments)
                    .filter(|(_, &a)| a == c)
                    .map(|(&v, _)| v)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn two_point_symmetry() {
        let v = [0.0, 0.0, 10.0, 10.0];
        let r = kmeans(&v, 2, 1).unwrap();
        assert_eq!(groups(&r, &v), vec![vec![10.0, 10.0], vec![0.0, 0.0]]);
        assert_eq!(r.centers, vec![vec![10.0], vec![0.0]]);
    }

    #[test]
    fn uneven_split() {
        let v = [1.0, 2.0, 9.0, 10.0, 11.0];
        let r = kmeans(&v, 2, 1).unwrap();
        assert_eq!(groups(&r, &v), vec![vec![9.0, 10.0, 11.0], vec![1.0, 2.0]]);
    }

    #[test]
    fn three_groups() {
        let v: Vec<f64> = [0.1, 0.5, 0.9]
            .iter()
            .flat_map(|&g| (0..5).map(move |i| g * 10.0 + i as f64 * 0.01))
            .collect();
        let r = kmeans(&v, 3, 7).unwrap();
        for (i, &a) in r.assignments.iter().enumerate() {
            assert_eq!(a, 2 - i / 5);
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            kmeans(&[3.0; 10], 2, 0),
            Err(Error::DegenerateClustering { k: 2, distinct: 1 })
        ));
        assert!(matches!(kmeans(&[1.0, 2.0], 3, 0), Err(Error::DegenerateClustering { .. })));
        assert!(kmeans(&[], 2, 0).is_err());
        assert!(matches!(
            kmeans_points(&[1.0, 1.0, 1.0, 1.0], 2, 2, 0),
            Err(Error::DegenerateClustering { .. })
        ));
    }

    #[test]
    fn color_clusters() {
        let mut pts = Vec::new();
        for i in 0..40 {
            let dark = i % 4 == 0;
            let base = if dark { 20.0 } else { 230.0 };
            pts.extend([base + (i % 3) as f64, base - (i % 5) as f64, base]);
        }
        let r = kmeans_points(&pts, 3, 2, 11).unwrap();
        assert_eq!(r.sizes(), vec![30, 10]);
        for (i, &a) in r.assignments.iter().enumerate() {
            assert_eq!(a, usize::from(i % 4 == 0));
        }
    }

    #[test]
    fn vector_path_is_deterministic_across_modes() {
        let pts: Vec<f64> = (0..300).map(|i| ((i * 37) % 101) as f64).collect();
        let a = kmeans_points(&pts, 3, 2, 5).unwrap();
        let b = par::sequential(|| kmeans_points(&pts, 3, 2, 5).unwrap());
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn affine_invariance(values in proptest::collection::vec(-50.0f64..50.0, 6..40),
                             scale in 0.01f64..100.0, offset in -1e3f64..1e3, k in 2usize..=3) {
            let base = match kmeans(&values, k, 3) { Ok(r) => r, Err(_) => return Ok(()) };
            let moved: Vec<f64> = values.iter().map(|v| v * scale + offset).collect();
            let r = kmeans(&moved, k, 3).unwrap();
            prop_assert_eq!(base.assignments, r.assignments);
        }
    }
}
