//! Uniform-grid neighbour search with exact (distance, index) ordering.

use crate::geometry::Vec3;
use std::collections::HashMap;

type Cell = (i64, i64, i64);

pub struct Grid<'a> {
    points: &'a [Vec3],
    cell: f64,
    cells: HashMap<Cell, Vec<usize>>,
    lo: Cell,
    hi: Cell,
}

impl<'a> Grid<'a> {
    pub fn new(points: &'a [Vec3], cell: f64) -> Self {
        let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
        let mut lo = (i64::MAX, i64::MAX, i64::MAX);
        let mut hi = (i64::MIN, i64::MIN, i64::MIN);
        for (i, p) in points.iter().enumerate() {
            let c = Self::cell_of(p, cell);
            lo = (lo.0.min(c.0), lo.1.min(c.1), lo.2.min(c.2));
            hi = (hi.0.max(c.0), hi.1.max(c.1), hi.2.max(c.2));
            cells.entry(c).or_default().push(i);
        }
        Self { points, cell, cells, lo, hi }
    }

    fn cell_of(p: &Vec3, cell: f64) -> Cell {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64)
    }

    fn max_ring(&self, c: Cell) -> i64 {
        [c.0 - self.lo.0, self.hi.0 - c.0, c.1 - self.lo.1, self.hi.1 - c.1, c.2 - self.lo.2, self.hi.2 - c.2]
            .into_iter()
            .max()
            .unwrap_or(0)
            .max(0)
    }

    fn visit_ring(&self, c: Cell, r: i64, mut f: impl FnMut(usize)) {
        for dx in -r..=r {
            for dy in -r..=r {
                for dz in -r..=r {
                    if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                        continue;
                    }
                    if let Some(v) = self.cells.get(&(c.0 + dx, c.1 + dy, c.2 + dz)) {
                        v.iter().for_each(|&i| f(i));
                    }
                }
            }
        }
    }

    /// The `k` nearest points to `query` (excluding index `skip`), sorted by
    /// squared distance then index.
    pub fn knn(&self, query: &Vec3, k: usize, skip: Option<usize>) -> Vec<(usize, f64)> {
        let c = Self::cell_of(query, self.cell);
        let max_r = self.max_ring(c);
        let mut cand: Vec<(usize, f64)> = Vec::new();
        for r in 0..=max_r {
            self.visit_ring(c, r, |i| {
                if Some(i) != skip {
                    cand.push((i, (self.points[i] - query).norm_squared()));
                }
            });
            if cand.len() >= k {
                sort_pairs(&mut cand);
                // Unvisited points are strictly farther than r·cell.
                let covered = r as f64 * self.cell;
                if cand[k - 1].1 <= covered * covered {
                    break;
                }
            }
        }
        sort_pairs(&mut cand);
        cand.truncate(k);
        cand
    }

    /// Points within `radius` of `query`, sorted by squared distance then index.
    pub fn within(&self, query: &Vec3, radius: f64) -> Vec<(usize, f64)> {
        let c = Self::cell_of(query, self.cell);
        let reach = (radius / self.cell).ceil() as i64;
        let r2 = radius * radius;
        let mut out = Vec::new();
        for r in 0..=reach.min(self.max_ring(c)) {
            self.visit_ring(c, r, |i| {
                let d2 = (self.points[i] - query).norm_squared();
                if d2 <= r2 {
                    out.push((i, d2));
                }
            });
        }
        sort_pairs(&mut out);
        out
    }
}

/// Squared distances closer than this (Å²) count as tied and fall back to
/// index order, so rounding noise from rigid motions cannot reorder them.
pub const TIE_RESOLUTION: f64 = 1e-8;

fn tie_key(d2: f64) -> i64 {
    (d2 / TIE_RESOLUTION).round() as i64
}

fn sort_pairs(v: &mut [(usize, f64)]) {
    v.sort_by(|a, b| tie_key(a.1).cmp(&tie_key(b.1)).then(a.0.cmp(&b.0)));
}

/// k nearest neighbours of every point among the others.
pub fn knn_all(points: &[Vec3], k: usize) -> Vec<Vec<(usize, f64)>> {
    let grid = Grid::new(points, 6.0);
    points.iter().enumerate().map(|(i, p)| grid.knn(p, k, Some(i))).collect()
}
