//! Seeded k-means++ with Lloyd iterations and a single-point-move refinement.
//!
//! Lloyd's fixed points are not always stable under moving one point, so
//! every run finishes with Hartigan-style moves until no single reassignment
//! lowers the within-cluster sum of squares.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hash::splitmix64;

pub const MAX_ITERATIONS: usize = 100;
pub const RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Cluster index per point, in `0..k`.
    pub assignment: Vec<usize>,
    pub k: usize,
    pub sse: f64,
}

impl Partition {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == cluster).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn centroid(points: &[Vec<f64>], members: impl Iterator<Item = usize>) -> Vec<f64> {
    let dim = points.first().map_or(0, Vec::len);
    let mut c = vec![0.0; dim];
    let mut n = 0usize;
    for i in members {
        for (acc, x) in c.iter_mut().zip(&points[i]) {
            *acc += x;
        }
        n += 1;
    }
    if n > 0 {
        c.iter_mut().for_each(|x| *x /= n as f64);
    }
    c
}

fn centroids(points: &[Vec<f64>], assignment: &[usize], k: usize) -> Vec<Vec<f64>> {
    (0..k).map(|c| centroid(points, (0..points.len()).filter(|&i| assignment[i] == c))).collect()
}

/// Within-cluster sum of squared distances to cluster means.
pub fn sse(points: &[Vec<f64>], assignment: &[usize], k: usize) -> f64 {
    let cs = centroids(points, assignment, k);
    points.iter().zip(assignment).map(|(p, &a)| dist2(p, &cs[a])).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = dist2(p, center);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if *d > 0.0 && target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            // all remaining points coincide with a chosen center
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, &points[next]));
        }
    }
    chosen.iter().map(|&i| points[i].clone()).collect()
}

/// Give every empty cluster the point farthest from its centroid among
/// clusters that can spare one.
fn repair_empty(points: &[Vec<f64>], assignment: &mut [usize], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignment.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else { return };
        let cs = centroids(points, assignment, k);
        let donor = (0..points.len())
            .filter(|&i| sizes[assignment[i]] > 1)
            .max_by(|&a, &b| {
                dist2(&points[a], &cs[assignment[a]])
                    .total_cmp(&dist2(&points[b], &cs[assignment[b]]))
                    .then(b.cmp(&a))
            })
            .expect("k <= n guarantees a donor");
        assignment[donor] = empty;
    }
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> Vec<usize> {
    let k = centers.len();
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    repair_empty(points, &mut assignment, k);
    for _ in 0..MAX_ITERATIONS {
        centers = centroids(points, &assignment, k);
        let mut next: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
        repair_empty(points, &mut next, k);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    assignment
}

/// Move single points while doing so strictly lowers SSE.
fn refine(points: &[Vec<f64>], assignment: &mut [usize], k: usize) {
    let mut cs = centroids(points, assignment, k);
    let mut sizes = vec![0usize; k];
    for &a in assignment.iter() {
        sizes[a] += 1;
    }
    for _ in 0..10_000 {
        let mut moved = false;
        for i in 0..points.len() {
            let from = assignment[i];
            if sizes[from] < 2 {
                continue;
            }
            let nf = sizes[from] as f64;
            let leave_gain = nf / (nf - 1.0) * dist2(&points[i], &cs[from]);
            let mut best: Option<(usize, f64)> = None;
            for to in (0..k).filter(|&c| c != from) {
                let nt = sizes[to] as f64;
                let delta = nt / (nt + 1.0) * dist2(&points[i], &cs[to]) - leave_gain;
                if delta < -1e-12 && best.is_none_or(|(_, d)| delta < d) {
                    best = Some((to, delta));
                }
            }
            if let Some((to, _)) = best {
                assignment[i] = to;
                sizes[from] -= 1;
                sizes[to] += 1;
                cs[from] = centroid(points, (0..points.len()).filter(|&j| assignment[j] == from));
                cs[to] = centroid(points, (0..points.len()).filter(|&j| assignment[j] == to));
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

/// Best-of-`RESTARTS` k-means. Requires `1 <= k <= points.len()`.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Partition {
    assert!(k >= 1 && k <= points.len(), "k must be in 1..=n");
    let mut best: Option<Partition> = None;
    let mut state = seed;
    for _ in 0..RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(&mut state));
        let centers = plus_plus_init(points, k, &mut rng);
        let mut assignment = lloyd(points, centers);
        refine(points, &mut assignment, k);
        let score = sse(points, &assignment, k);
        if best.as_ref().is_none_or(|b| score < b.sse) {
            best = Some(Partition { assignment, k, sse: score });
        }
    }
    canonicalize(best.expect("at least one restart"))
}

/// Relabel clusters by descending size, ties by lowest member index.
fn canonicalize(p: Partition) -> Partition {
    let sizes = p.sizes();
    let first: Vec<usize> = (0..p.k).map(|c| p.assignment.iter().position(|&a| a == c).unwrap_or(usize::MAX)).collect();
    let mut order: Vec<usize> = (0..p.k).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(first[a].cmp(&first[b])));
    let mut relabel = vec![0; p.k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    Partition { assignment: p.assignment.iter().map(|&a| relabel[a]).collect(), ..p }
}

/// Mean silhouette coefficient; singletons score zero.
pub fn silhouette(points: &[Vec<f64>], p: &Partition) -> f64 {
    let n = points.len();
    if n == 0 || p.k < 2 {
        return 0.0;
    }
    let sizes = p.sizes();
    let total: f64 = (0..n)
        .map(|i| {
            let own = p.assignment[i];
            if sizes[own] < 2 {
                return 0.0;
            }
            let mut sums = vec![0.0; p.k];
            for j in (0..n).filter(|&j| j != i) {
                sums[p.assignment[j]] += dist2(&points[i], &points[j]).sqrt();
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..p.k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m == 0.0 { 0.0 } else { (b - a) / m }
        })
        .sum();
    total / n as f64
}

/// Pick k in [2, min(8, n-1)] by silhouette; documents with n <= 2 get k = 1.
pub fn auto_k(points: &[Vec<f64>], seed: u64) -> Partition {
    let n = points.len();
    let upper = 8.min(n.saturating_sub(1));
    if upper < 2 {
        return kmeans(points, 1, seed);
    }
    let mut best: Option<(f64, Partition)> = None;
    for k in 2..=upper {
        let p = kmeans(points, k, seed);
        let s = silhouette(points, &p);
        if best.as_ref().is_none_or(|(bs, _)| s > *bs) {
            best = Some((s, p));
        }
    }
    best.expect("non-empty k range").1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 0.0], vec![0.1, 0.0], vec![0.0, 0.1],
            vec![5.0, 5.0], vec![5.1, 5.0], vec![5.0, 5.1],
            vec![10.0, 0.0], vec![10.1, 0.0],
        ]
    }

    #[test]
    fn recovers_blobs() {
        let p = kmeans(&blobs(), 3, 7);
        assert_eq!(p.assignment, vec![0, 0, 0, 1, 1, 1, 2, 2]);
        assert_eq!(auto_k(&blobs(), 7).k, 3);
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let pts = blobs();
        let p = kmeans(&pts, pts.len(), 1);
        assert_eq!(p.sizes(), vec![1; pts.len()]);
        assert_eq!(p.sse, 0.0);
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let pts = vec![vec![1.0, 1.0]; 4];
        let p = kmeans(&pts, 3, 3);
        assert!(p.sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn deterministic_for_seed() {
        let pts = blobs();
        assert_eq!(kmeans(&pts, 2, 11), kmeans(&pts, 2, 11));
    }

    #[test]
    fn tiny_inputs_use_one_cluster() {
        assert_eq!(auto_k(&[vec![1.0]], 0).k, 1);
        assert_eq!(auto_k(&[vec![1.0], vec![2.0]], 0).k, 1);
    }
}
