//! Exact fixed-radius neighbor search.

use crate::linalg::dist2;

const BRUTE_FORCE_BELOW: usize = 256;
const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Immutable kd-tree over a flat coordinate array.
///
/// Queries return exactly the points with `|x - c| <= r`, sorted by index.
/// Small inputs are scanned linearly.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    dim: usize,
    coords: Vec<f64>,
    order: Vec<usize>,
    root: Option<Node>,
}

impl SpatialIndex {
    /// `coords` holds `coords.len() / dim` points back to back.
    pub fn new(coords: &[f64], dim: usize) -> Self {
        assert!(dim > 0 && coords.len() % dim == 0, "coordinate length must be a multiple of dim");
        let count = coords.len() / dim;
        let mut order: Vec<usize> = (0..count).collect();
        let root = if count >= BRUTE_FORCE_BELOW {
            Some(build(coords, dim, &mut order, 0, count))
        } else {
            None
        };
        Self {
            dim,
            coords: coords.to_vec(),
            order,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Indices of all points within distance `r` of `center`, ascending.
    pub fn query(&self, center: &[f64], r: f64) -> Vec<usize> {
        let r2 = r * r;
        let mut out = Vec::new();
        match &self.root {
            None => {
                for i in 0..self.len() {
                    if dist2(self.point(i), center) <= r2 {
                        out.push(i);
                    }
                }
            }
            Some(root) => {
                self.visit(root, center, r, r2, &mut out);
                out.sort_unstable();
            }
        }
        out
    }

    /// Same set as [`query`](Self::query) in a fixed traversal order, unsorted.
    pub fn query_unordered(&self, center: &[f64], r: f64) -> Vec<usize> {
        let r2 = r * r;
        let mut out = Vec::new();
        match &self.root {
            None => out.extend((0..self.len()).filter(|&i| dist2(self.point(i), center) <= r2)),
            Some(root) => self.visit(root, center, r, r2, &mut out),
        }
        out
    }

    fn visit(&self, node: &Node, center: &[f64], r: f64, r2: f64, out: &mut Vec<usize>) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    if dist2(self.point(i), center) <= r2 {
                        out.push(i);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = center[*axis] - value;
                if delta <= r {
                    self.visit(left, center, r, r2, out);
                }
                if delta >= -r {
                    self.visit(right, center, r, r2, out);
                }
            }
        }
    }

    /// Nearest point and its distance; ties go to the lower index.
    pub fn nearest(&self, target: &[f64]) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        match &self.root {
            None => {
                for i in 0..self.len() {
                    consider(&mut best, i, dist2(self.point(i), target));
                }
            }
            Some(root) => self.nearest_in(root, target, &mut best),
        }
        Some((best.0, best.1.sqrt()))
    }

    fn nearest_in(&self, node: &Node, target: &[f64], best: &mut (usize, f64)) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    consider(best, i, dist2(self.point(i), target));
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = target[*axis] - value;
                let (near, far) = if delta <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_in(near, target, best);
                if delta * delta <= best.1 {
                    self.nearest_in(far, target, best);
                }
            }
        }
    }
}

/// Greedy `r`-separated subset of `candidates`, visited in the given order.
///
/// A candidate is kept when every previously kept point is at distance at
/// least `r`. Every candidate ends up within distance `r` of a kept point.
pub fn greedy_net<'a, F>(point: F, candidates: &[usize], r: f64) -> Vec<usize>
where
    F: Fn(usize) -> &'a [f64],
{
    use std::collections::HashMap;
    let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let mut kept = Vec::new();
    let key = |p: &[f64]| -> Vec<i64> { p.iter().take(3).map(|x| (x / r).floor() as i64).collect() };
    for &c in candidates {
        let p = point(c);
        let base = key(p);
        let mut clear = true;
        let dims = base.len();
        let mut offset = vec![-1i64; dims];
        'scan: loop {
            let cell: Vec<i64> = base.iter().zip(&offset).map(|(b, o)| b + o).collect();
            if let Some(list) = cells.get(&cell) {
                for &q in list {
                    if dist2(point(q), p) < r * r {
                        clear = false;
                        break 'scan;
                    }
                }
            }
            let mut a = 0;
            loop {
                if a == dims {
                    break 'scan;
                }
                offset[a] += 1;
                if offset[a] <= 1 {
                    break;
                }
                offset[a] = -1;
                a += 1;
            }
        }
        if clear {
            cells.entry(base).or_default().push(c);
            kept.push(c);
        }
    }
    kept
}

fn consider(best: &mut (usize, f64), i: usize, d2: f64) {
    if d2 < best.1 || (d2 == best.1 && i < best.0) {
        *best = (i, d2);
    }
}

fn build(coords: &[f64], dim: usize, order: &mut [usize], start: usize, end: usize) -> Node {
    if end - start <= LEAF_SIZE {
        return Node::Leaf { start, end };
    }
    let slice = &mut order[start..end];
    let mut axis = 0;
    let mut widest = -1.0;
    for a in 0..dim {
        let (lo, hi) = slice.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let v = coords[i * dim + a];
            (lo.min(v), hi.max(v))
        });
        if hi - lo > widest {
            widest = hi - lo;
            axis = a;
        }
    }
    if widest <= 0.0 {
        return Node::Leaf { start, end };
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        coords[a * dim + axis]
            .total_cmp(&coords[b * dim + axis])
            .then(a.cmp(&b))
    });
    let value = coords[slice[mid] * dim + axis];
    // Left holds values <= split, right holds values >= split.
    let left = build(coords, dim, order, start, start + mid);
    let right = build(coords, dim, order, start + mid, end);
    Node::Split {
        axis,
        value,
        left: Box::new(left),
        right: Box::new(right),
    }
}
