//! Neighbor lookup on a uniform grid, and the static exit-distance field that
//! gives every agent its goal direction.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::geom::{Rect, Vec2};
use crate::model::{AgentState, ScenarioSpec};

type CellKey = (i64, i64);

/// Buckets of active agents keyed by integer cell coordinates.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    cell: f64,
    buckets: HashMap<CellKey, Vec<(usize, Vec2)>>,
}

impl SpatialGrid {
    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    /// Ids in the bucket at integer cell coordinates, ascending.
    pub fn bucket(&self, cx: i64, cy: i64) -> Vec<usize> {
        self.buckets
            .get(&(cx, cy))
            .map(|b| b.iter().map(|&(id, _)| id).collect())
            .unwrap_or_default()
    }

    pub fn buckets(&self) -> impl Iterator<Item = (CellKey, Vec<usize>)> + '_ {
        self.buckets
            .iter()
            .map(|(&k, v)| (k, v.iter().map(|&(id, _)| id).collect()))
    }

    fn key(&self, p: Vec2) -> CellKey {
        ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64)
    }

    /// All agents within `radius` of `center` (inclusive), ascending id,
    /// paired with their distance. `exclude` drops one id, typically the
    /// querying agent itself.
    pub fn query_neighbors(&self, center: Vec2, radius: f64, exclude: Option<usize>) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.for_each_neighbor(center, radius, exclude, |id, d| out.push((id, d)));
        out.sort_unstable_by_key(|&(id, _)| id);
        out
    }

    /// Unordered variant of [`Self::query_neighbors`].
    pub fn for_each_neighbor<F: FnMut(usize, f64)>(&self, center: Vec2, radius: f64, exclude: Option<usize>, mut f: F) {
        let (cx, cy) = self.key(center);
        // Normally 1: the engine sizes cells to the largest query radius.
        let reach = (radius / self.cell).ceil().max(1.0) as i64;
        let r2 = radius * radius;
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let Some(bucket) = self.buckets.get(&(cx + dx, cy + dy)) else {
                    continue;
                };
                for &(id, p) in bucket {
                    if Some(id) == exclude {
                        continue;
                    }
                    let d2 = (p - center).length_squared();
                    if d2 <= r2 {
                        f(id, d2.sqrt());
                    }
                }
            }
        }
    }
}

/// Bins every non-exited agent by its center. `cell` must be positive.
pub fn build_grid(agents: &[AgentState], cell: f64) -> SpatialGrid {
    assert!(cell > 0.0, "grid cell size must be positive");
    let mut grid = SpatialGrid {
        cell,
        buckets: HashMap::new(),
    };
    let mut order: Vec<&AgentState> = agents.iter().filter(|a| !a.exited).collect();
    order.sort_by_key(|a| a.id);
    for a in order {
        let key = grid.key(a.pos);
        grid.buckets.entry(key).or_default().push((a.id, a.pos));
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NavError {
    #[error("spawn groups {groups:?} contain no cell with a path to an exit")]
    Unreachable { groups: Vec<usize> },
    #[error("position ({x}, {y}) lies in a blocked or unreachable cell")]
    Blocked { x: f64, y: f64 },
}

/// Neighbor offsets in row-major order (rows are ascending y).
const NEIGHBORS: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Slopes closer than this count as tied and fall back to row-major order.
const SLOPE_TIE_EPS: f64 = 1e-12;

/// Geodesic distance to the nearest exit on the navigation grid.
#[derive(Debug, Clone)]
pub struct NavField {
    nx: usize,
    ny: usize,
    cell: f64,
    dist: Vec<f64>,
    dir: Vec<Vec2>,
    blocked: Vec<bool>,
    exit: Vec<bool>,
}

#[derive(Clone, Copy, PartialEq)]
struct QueueItem {
    dist: f64,
    idx: usize,
}

impl Eq for QueueItem {}

impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (dist, idx).
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl NavField {
    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn dist_at(&self, i: usize, j: usize) -> f64 {
        self.dist[self.index(i, j)]
    }

    pub fn dir_at(&self, i: usize, j: usize) -> Vec2 {
        self.dir[self.index(i, j)]
    }

    pub fn is_blocked(&self, i: usize, j: usize) -> bool {
        self.blocked[self.index(i, j)]
    }

    pub fn is_exit(&self, i: usize, j: usize) -> bool {
        self.exit[self.index(i, j)]
    }

    /// Cell containing `p`, clamped onto the grid.
    pub fn cell_of(&self, p: Vec2) -> (usize, usize) {
        let clamp = |v: f64, n: usize| -> usize {
            let c = (v / self.cell).floor();
            if c < 0.0 {
                0
            } else {
                (c as usize).min(n - 1)
            }
        };
        (clamp(p.x, self.nx), clamp(p.y, self.ny))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new((i as f64 + 0.5) * self.cell, (j as f64 + 0.5) * self.cell)
    }

    fn neighbors(&self, i: usize, j: usize) -> impl Iterator<Item = (usize, usize, (i64, i64))> + '_ {
        NEIGHBORS.iter().filter_map(move |&(dx, dy)| {
            let ni = i as i64 + dx;
            let nj = j as i64 + dy;
            if ni < 0 || nj < 0 || ni >= self.nx as i64 || nj >= self.ny as i64 {
                None
            } else {
                Some((ni as usize, nj as usize, (dx, dy)))
            }
        })
    }

    /// Piecewise-constant goal direction at `pos`. Zero on exit cells.
    pub fn goal_direction(&self, pos: Vec2) -> Result<Vec2, NavError> {
        let (i, j) = self.cell_of(pos);
        let k = self.index(i, j);
        if self.dist[k].is_finite() {
            Ok(self.dir[k])
        } else {
            Err(NavError::Blocked { x: pos.x, y: pos.y })
        }
    }

    /// Direction from `pos` to the center of the lowest-distance finite
    /// neighbor cell, for positions that fall in a blocked cell.
    pub fn escape_direction(&self, pos: Vec2) -> Option<Vec2> {
        let (i, j) = self.cell_of(pos);
        let mut best: Option<(f64, usize, usize)> = None;
        for (ni, nj, _) in self.neighbors(i, j) {
            let d = self.dist_at(ni, nj);
            if d.is_finite() && best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, ni, nj));
            }
        }
        best.map(|(_, ni, nj)| (self.cell_center(ni, nj) - pos).normalized_or_zero())
    }

    /// Grid cells whose area overlaps `r` (at least one).
    fn cells_in(&self, r: &Rect) -> impl Iterator<Item = (usize, usize)> {
        let (i0, j0) = self.cell_of(r.min());
        let (mut i1, mut j1) = self.cell_of(r.max());
        // A max edge on a cell boundary does not reach into the next cell.
        if i1 > i0 && (r.x + r.w) <= i1 as f64 * self.cell {
            i1 -= 1;
        }
        if j1 > j0 && (r.y + r.h) <= j1 as f64 * self.cell {
            j1 -= 1;
        }
        (j0..=j1).flat_map(move |j| (i0..=i1).map(move |i| (i, j)))
    }

    /// Whether the rectangle overlaps at least one finite-distance cell.
    pub fn rect_reachable(&self, r: &Rect) -> bool {
        self.cells_in(r).any(|(i, j)| self.dist_at(i, j).is_finite())
    }

    /// Whether every passable cell overlapping the rectangle is reachable.
    pub fn rect_fully_reachable(&self, r: &Rect) -> bool {
        self.cells_in(r)
            .all(|(i, j)| self.is_blocked(i, j) || self.dist_at(i, j).is_finite())
    }

    /// Distance matrix as text, one line per grid row starting at y = 0,
    /// `inf` for blocked or unreachable cells.
    pub fn dump_dist(&self) -> String {
        let mut s = String::new();
        for j in 0..self.ny {
            for i in 0..self.nx {
                if i > 0 {
                    s.push(' ');
                }
                let d = self.dist_at(i, j);
                if d.is_finite() {
                    let _ = write!(s, "{d:.6}");
                } else {
                    s.push_str("inf");
                }
            }
            s.push('\n');
        }
        s
    }
}

/// 8-neighbor Dijkstra from every exit cell over passable cells.
pub fn compute_nav_field(spec: &ScenarioSpec) -> Result<NavField, NavError> {
    let d = spec.domain;
    let cell = d.cell_size;
    let nx = ((d.width / cell).ceil() as usize).max(1);
    let ny = ((d.height / cell).ceil() as usize).max(1);
    let n = nx * ny;

    let mut field = NavField {
        nx,
        ny,
        cell,
        dist: vec![f64::INFINITY; n],
        dir: vec![Vec2::ZERO; n],
        blocked: vec![false; n],
        exit: vec![false; n],
    };

    for j in 0..ny {
        for i in 0..nx {
            let c = field.cell_center(i, j);
            if spec.obstacles.iter().any(|o| o.contains_closed(c)) {
                let k = field.index(i, j);
                field.blocked[k] = true;
            }
        }
    }

    // Mark every cell an exit segment passes through by sampling the
    // segment at sub-cell spacing (midpoints, so endpoints on a cell border
    // do not leak into the next cell).
    for e in &spec.exits {
        let samples = ((e.length() / (cell * 0.25)).ceil() as usize).max(1);
        for s in 0..samples {
            let t = (s as f64 + 0.5) / samples as f64;
            let p = e.a + (e.b - e.a) * t;
            let (i, j) = field.cell_of(p);
            let k = field.index(i, j);
            field.exit[k] = true;
            field.blocked[k] = false;
        }
    }

    let diag = cell * std::f64::consts::SQRT_2;
    let mut heap = BinaryHeap::new();
    for k in 0..n {
        if field.exit[k] {
            field.dist[k] = 0.0;
            heap.push(QueueItem { dist: 0.0, idx: k });
        }
    }
    while let Some(QueueItem { dist, idx }) = heap.pop() {
        if dist > field.dist[idx] {
            continue;
        }
        let (i, j) = (idx % nx, idx / nx);
        for (ni, nj, (dx, dy)) in field.neighbors(i, j).collect::<Vec<_>>() {
            let nk = field.index(ni, nj);
            if field.blocked[nk] {
                continue;
            }
            let step = if dx != 0 && dy != 0 { diag } else { cell };
            let cand = dist + step;
            if cand < field.dist[nk] {
                field.dist[nk] = cand;
                heap.push(QueueItem { dist: cand, idx: nk });
            }
        }
    }

    for j in 0..ny {
        for i in 0..nx {
            let k = field.index(i, j);
            let here = field.dist[k];
            if !(here.is_finite() && here > 0.0) {
                continue;
            }
            // Steepest descent: the neighbor with the largest distance drop
            // per unit of edge length, i.e. a shortest-path parent.
            let mut best: Option<(f64, (i64, i64))> = None;
            for (ni, nj, (dx, dy)) in field.neighbors(i, j) {
                let nd = field.dist_at(ni, nj);
                if !nd.is_finite() {
                    continue;
                }
                let step = if dx != 0 && dy != 0 { diag } else { cell };
                let slope = (here - nd) / step;
                if best.is_none_or(|(bs, _)| slope > bs + SLOPE_TIE_EPS) {
                    best = Some((slope, (dx, dy)));
                }
            }
            if let Some((_, (dx, dy))) = best {
                field.dir[k] = Vec2::new(dx as f64, dy as f64).normalized_or_zero();
            }
        }
    }

    let unreachable: Vec<usize> = spec
        .groups
        .iter()
        .enumerate()
        .filter(|(_, g)| !field.rect_reachable(&g.rect))
        .map(|(i, _)| i)
        .collect();
    if !unreachable.is_empty() {
        return Err(NavError::Unreachable { groups: unreachable });
    }
    Ok(field)
}
