//! Barnes-Hut octree over node positions.

use super::vec3::{add, dist2, scale, Vec3};

const NONE: u32 = u32::MAX;
const MAX_DEPTH: u32 = 48;

#[derive(Debug, Clone)]
struct Cell {
    center: Vec3,
    half: f64,
    count: usize,
    /// Mean position of the points below this cell.
    com: Vec3,
    children: [u32; 8],
    /// Point indices; only populated on leaves.
    points: Vec<usize>,
}

impl Cell {
    fn new(center: Vec3, half: f64) -> Self {
        Cell { center, half, count: 0, com: [0.0; 3], children: [NONE; 8], points: Vec::new() }
    }

    fn is_leaf(&self) -> bool {
        self.children.iter().all(|&c| c == NONE)
    }

    fn octant(&self, p: &Vec3) -> usize {
        (usize::from(p[0] >= self.center[0]))
            | (usize::from(p[1] >= self.center[1]) << 1)
            | (usize::from(p[2] >= self.center[2]) << 2)
    }

    fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| (p[k] - self.center[k]).abs() <= self.half)
    }
}

/// An octree whose leaves hold point buckets. Coincident points share a leaf.
#[derive(Debug, Clone)]
pub struct Octree {
    cells: Vec<Cell>,
}

/// What a traversal sees at each step.
pub enum Visit<'a> {
    /// A leaf: interact with each point individually.
    Points(&'a [usize]),
    /// A far cell summarized by its point count and mean position.
    Aggregate { count: usize, com: Vec3 },
}

impl Octree {
    pub fn build(points: &[Vec3]) -> Self {
        let (center, half) = bounding_cube(points);
        let mut tree = Octree { cells: vec![Cell::new(center, half)] };
        for i in 0..points.len() {
            tree.insert(0, i, points, 0);
        }
        tree.summarize(0, points);
        tree
    }

    fn insert(&mut self, cell: usize, index: usize, points: &[Vec3], depth: u32) {
        let p = points[index];
        if self.cells[cell].is_leaf() {
            let bucket = &self.cells[cell].points;
            let coincident = bucket.iter().all(|&j| points[j] == p);
            if bucket.is_empty() || coincident || depth >= MAX_DEPTH {
                self.cells[cell].points.push(index);
                return;
            }
            let existing = std::mem::take(&mut self.cells[cell].points);
            for j in existing {
                self.insert_child(cell, j, points, depth);
            }
        }
        self.insert_child(cell, index, points, depth);
    }

    fn insert_child(&mut self, cell: usize, index: usize, points: &[Vec3], depth: u32) {
        let octant = self.cells[cell].octant(&points[index]);
        let mut child = self.cells[cell].children[octant];
        if child == NONE {
            let parent = &self.cells[cell];
            let quarter = parent.half / 2.0;
            let mut center = parent.center;
            for (k, c) in center.iter_mut().enumerate() {
                *c += if octant >> k & 1 == 1 { quarter } else { -quarter };
            }
            child = self.cells.len() as u32;
            self.cells.push(Cell::new(center, quarter));
            self.cells[cell].children[octant] = child;
        }
        self.insert(child as usize, index, points, depth + 1);
    }

    fn summarize(&mut self, cell: usize, points: &[Vec3]) -> (usize, Vec3) {
        let (count, sum) = if self.cells[cell].is_leaf() {
            let sum = self.cells[cell].points.iter().fold([0.0; 3], |acc, &j| add(acc, points[j]));
            (self.cells[cell].points.len(), sum)
        } else {
            let children = self.cells[cell].children;
            children.iter().filter(|&&c| c != NONE).fold((0, [0.0; 3]), |(n, s), &c| {
                let (cn, cs) = self.summarize(c as usize, points);
                (n + cn, add(s, cs))
            })
        };
        let c = &mut self.cells[cell];
        c.count = count;
        c.com = if count > 0 { scale(sum, 1.0 / count as f64) } else { [0.0; 3] };
        (count, sum)
    }

    /// Walk the tree for a query point. A cell not containing `query` is
    /// summarized when `width / distance < theta`; otherwise it is opened.
    pub fn visit(&self, query: &Vec3, theta: f64, mut f: impl FnMut(Visit<'_>)) {
        let theta2 = theta * theta;
        let mut stack = vec![0usize];
        while let Some(ci) = stack.pop() {
            let cell = &self.cells[ci];
            if cell.count == 0 {
                continue;
            }
            if cell.is_leaf() {
                f(Visit::Points(&cell.points));
                continue;
            }
            let width = 2.0 * cell.half;
            if !cell.contains(query) && width * width < theta2 * dist2(&cell.com, query) {
                f(Visit::Aggregate { count: cell.count, com: cell.com });
                continue;
            }
            stack.extend(cell.children.iter().rev().filter(|&&c| c != NONE).map(|&c| c as usize));
        }
    }

    pub fn len(&self) -> usize {
        self.cells[0].count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn bounding_cube(points: &[Vec3]) -> (Vec3, f64) {
    if points.is_empty() {
        return ([0.0; 3], 1.0);
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, (lo[2] + hi[2]) / 2.0];
    let extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
    // Pad so points on the max face still fall strictly inside.
    (center, (extent / 2.0) * (1.0 + 1e-9) + 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collect_points(tree: &Octree, query: &Vec3, theta: f64) -> (Vec<usize>, usize) {
        let mut seen = Vec::new();
        let mut aggregated = 0;
        tree.visit(query, theta, |v| match v {
            Visit::Points(p) => seen.extend_from_slice(p),
            Visit::Aggregate { count, .. } => aggregated += count,
        });
        seen.sort_unstable();
        (seen, aggregated)
    }

    #[test]
    fn theta_zero_visits_every_point() {
        let pts: Vec<Vec3> = (0..40).map(|i| {
            let f = i as f64;
            [f.sin() * 10.0, (f * 0.7).cos() * 5.0, f * 0.3]
        }).collect();
        let tree = Octree::build(&pts);
        assert_eq!(tree.len(), 40);
        let (seen, agg) = collect_points(&tree, &pts[3], 0.0);
        assert_eq!(agg, 0);
        assert_eq!(seen, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn coincident_points_share_a_leaf() {
        let pts = vec![[1.0, 1.0, 1.0]; 5];
        let tree = Octree::build(&pts);
        let (seen, _) = collect_points(&tree, &[1.0, 1.0, 1.0], 0.9);
        assert_eq!(seen.len(), 5);
    }

    #[test]
    fn large_theta_aggregates_far_cells() {
        let mut pts: Vec<Vec3> = (0..20).map(|i| [i as f64 * 0.01, 0.0, 0.0]).collect();
        pts.push([1000.0, 0.0, 0.0]);
        let tree = Octree::build(&pts);
        let (seen, agg) = collect_points(&tree, &[1000.0, 0.0, 0.0], 1.0);
        assert_eq!(seen.len() + agg, 21);
        assert!(agg > 0);
    }
}
