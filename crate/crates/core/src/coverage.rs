//! Budget-constrained coverage planning: occupancy rasterization, square
//! block decomposition, minimum spanning tree over the block graph, the
//! circumnavigation tour, traversal-time prediction, and per-block formation
//! selection.

use crate::error::{Error, Result};
use crate::geom::{Polygon, Rect, Vec2};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Free,
    Obstacle,
}

/// Uniform occupancy raster anchored at the arena's min corner. Cells are
/// indexed (ix, iy) with iy = 0 at the bottom row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid<F> {
    pub cell_size: F,
    pub width: usize,
    pub height: usize,
    pub origin: Vec2<F>,
    cells: Vec<CellState>,
}

impl<F: Real> OccupancyGrid<F> {
    pub fn cell(&self, ix: usize, iy: usize) -> CellState {
        self.cells[iy * self.width + ix]
    }

    pub fn is_free(&self, ix: usize, iy: usize) -> bool {
        self.cell(ix, iy) == CellState::Free
    }

    /// World-space rectangle of a cell.
    pub fn cell_rect(&self, ix: usize, iy: usize) -> Rect<F> {
        let cs = self.cell_size;
        let min = self.origin
            + Vec2::new(
                cs * F::from_usize(ix).unwrap(),
                cs * F::from_usize(iy).unwrap(),
            );
        Rect::new(min, min + Vec2::new(cs, cs))
    }

    /// Cell containing a point, if inside the raster.
    pub fn cell_of(&self, p: Vec2<F>) -> Option<(usize, usize)> {
        let rel = p - self.origin;
        if rel.x < F::zero() || rel.y < F::zero() {
            return None;
        }
        let ix = (rel.x / self.cell_size).to_f64_lossy().floor() as usize;
        let iy = (rel.y / self.cell_size).to_f64_lossy().floor() as usize;
        if ix < self.width && iy < self.height {
            Some((ix, iy))
        } else {
            None
        }
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == CellState::Free).count()
    }

    /// Plain-text raster (PGM-style): `#` obstacle, `.` free, top row first.
    pub fn dump(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * self.height);
        for iy in (0..self.height).rev() {
            for ix in 0..self.width {
                s.push(if self.is_free(ix, iy) { '.' } else { '#' });
            }
            s.push('\n');
        }
        s
    }
}

/// Conservative rasterization: a cell is Obstacle iff any obstacle polygon
/// overlaps it. The raster spans floor(extent / cell_size) whole cells from
/// the arena's min corner.
pub fn rasterize<F: Real>(
    arena: Rect<F>,
    obstacles: &[Polygon<F>],
    cell_size: F,
) -> Result<OccupancyGrid<F>> {
    if cell_size <= F::zero() {
        return Err(Error::Planning("cell size must be positive".into()));
    }
    if cell_size > arena.width() || cell_size > arena.height() {
        return Err(Error::Planning(format!(
            "cell size {cell_size} exceeds an arena dimension"
        )));
    }
    let width = (arena.width() / cell_size).to_f64_lossy().floor() as usize;
    let height = (arena.height() / cell_size).to_f64_lossy().floor() as usize;
    let mut grid = OccupancyGrid {
        cell_size,
        width,
        height,
        origin: arena.min,
        cells: vec![CellState::Free; width * height],
    };
    for iy in 0..height {
        for ix in 0..width {
            let rect = grid.cell_rect(ix, iy);
            if obstacles.iter().any(|o| o.overlaps_rect(&rect)) {
                grid.cells[iy * width + ix] = CellState::Obstacle;
            }
        }
    }
    Ok(grid)
}

/// A square all-free block of the decomposition, in cell units and world
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block<F> {
    /// Bottom-left cell of the block.
    pub origin: (usize, usize),
    /// Cells per side.
    pub size_cells: usize,
    pub rect: Rect<F>,
}

/// Quadrant parts of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
    Top,
    Bottom,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Top, Side::Bottom];

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
            Side::Top => Side::Bottom,
            Side::Bottom => Side::Top,
        }
    }
}

impl<F: Real> Block<F> {
    pub fn center(&self) -> Vec2<F> {
        self.rect.center()
    }

    /// Center of one quadrant part.
    pub fn part_center(&self, part: Part) -> Vec2<F> {
        let q = self.rect.width() * F::lit(0.25);
        let c = self.center();
        match part {
            Part::TopLeft => Vec2::new(c.x - q, c.y + q),
            Part::TopRight => Vec2::new(c.x + q, c.y + q),
            Part::BottomLeft => Vec2::new(c.x - q, c.y - q),
            Part::BottomRight => Vec2::new(c.x + q, c.y - q),
        }
    }

    pub fn left_edge_center(&self) -> Vec2<F> {
        Vec2::new(
            self.rect.min.x,
            (self.rect.min.y + self.rect.max.y) * F::lit(0.5),
        )
    }

    /// The two part centers on a side, ordered (top, bottom) for vertical
    /// sides and (left, right) for horizontal ones.
    fn side_parts(&self, side: Side) -> (Vec2<F>, Vec2<F>) {
        match side {
            Side::Left => (
                self.part_center(Part::TopLeft),
                self.part_center(Part::BottomLeft),
            ),
            Side::Right => (
                self.part_center(Part::TopRight),
                self.part_center(Part::BottomRight),
            ),
            Side::Top => (
                self.part_center(Part::TopLeft),
                self.part_center(Part::TopRight),
            ),
            Side::Bottom => (
                self.part_center(Part::BottomLeft),
                self.part_center(Part::BottomRight),
            ),
        }
    }
}

/// Greedy decomposition: place the largest fitting all-free square first,
/// scanning row-major from the top-left, then progressively halve the size.
/// Every free cell ends up in exactly one block.
pub fn build_blocks<F: Real>(grid: &OccupancyGrid<F>, max_block_cells: usize) -> Vec<Block<F>> {
    assert!(
        max_block_cells >= 1 && max_block_cells.is_power_of_two(),
        "max block size must be a power of two"
    );
    let mut assigned = vec![false; grid.width * grid.height];
    let mut blocks = Vec::new();
    let mut size = max_block_cells.min(grid.width.max(1)).min(grid.height.max(1));
    if !size.is_power_of_two() {
        size = size.next_power_of_two() / 2;
    }
    while size >= 1 {
        if size <= grid.width && size <= grid.height {
            for top in (size - 1..grid.height).rev() {
                let oy = top + 1 - size;
                for ox in 0..=grid.width - size {
                    let fits = (oy..oy + size).all(|iy| {
                        (ox..ox + size)
                            .all(|ix| grid.is_free(ix, iy) && !assigned[iy * grid.width + ix])
                    });
                    if fits {
                        for iy in oy..oy + size {
                            for ix in ox..ox + size {
                                assigned[iy * grid.width + ix] = true;
                            }
                        }
                        let min = grid.cell_rect(ox, oy).min;
                        let side = grid.cell_size * F::from_usize(size).unwrap();
                        blocks.push(Block {
                            origin: (ox, oy),
                            size_cells: size,
                            rect: Rect::new(min, min + Vec2::new(side, side)),
                        });
                    }
                }
            }
        }
        if size == 1 {
            break;
        }
        size /= 2;
    }
    blocks
}

/// Blocks adjacent to `i` on `side` (shared boundary of positive length).
pub fn side_neighbors<F: Real>(blocks: &[Block<F>], i: usize, side: Side) -> Vec<usize> {
    let b = &blocks[i];
    let (bx0, by0) = b.origin;
    let (bx1, by1) = (bx0 + b.size_cells, by0 + b.size_cells);
    let mut out = Vec::new();
    for (j, n) in blocks.iter().enumerate() {
        if j == i {
            continue;
        }
        let (nx0, ny0) = n.origin;
        let (nx1, ny1) = (nx0 + n.size_cells, ny0 + n.size_cells);
        let touching = match side {
            Side::Left => nx1 == bx0 && ny0 < by1 && ny1 > by0,
            Side::Right => nx0 == bx1 && ny0 < by1 && ny1 > by0,
            Side::Top => ny0 == by1 && nx0 < bx1 && nx1 > bx0,
            Side::Bottom => ny1 == by0 && nx0 < bx1 && nx1 > bx0,
        };
        if touching {
            out.push(j);
        }
    }
    out
}

/// Spanning forest of the block-adjacency graph: one minimum spanning tree
/// per connected component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanningForest {
    /// Tree edges as (lower index, higher index).
    pub edges: Vec<(usize, usize)>,
    /// Component label per block; the component containing the seed is 0.
    pub component_of: Vec<usize>,
    pub n_components: usize,
}

impl SpanningForest {
    pub fn is_connected(&self) -> bool {
        self.n_components <= 1
    }

    pub fn tree_neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }
}

/// Prim's algorithm seeded at `seed_block`, edge weight = Euclidean distance
/// between block centers, ties broken lexicographically on
/// (weight, in-tree index, out index). Remaining components are spanned the
/// same way, seeded at the lowest unvisited index.
pub fn build_spanning_tree<F: Real>(blocks: &[Block<F>], seed_block: usize) -> SpanningForest {
    let n = blocks.len();
    let mut component_of = vec![usize::MAX; n];
    let mut edges = Vec::new();
    let mut n_components = 0;
    let mut seeds: Vec<usize> = Vec::new();
    if n > 0 {
        seeds.push(seed_block.min(n - 1));
    }
    loop {
        let seed = match seeds.pop() {
            Some(s) if component_of[s] == usize::MAX => s,
            Some(_) => continue,
            None => match component_of.iter().position(|&c| c == usize::MAX) {
                Some(s) => s,
                None => break,
            },
        };
        let comp = n_components;
        n_components += 1;
        component_of[seed] = comp;
        loop {
            // Smallest (weight, u, v) with u in the tree and v outside.
            let mut best: Option<(F, usize, usize)> = None;
            for u in 0..n {
                if component_of[u] != comp {
                    continue;
                }
                for side in Side::ALL {
                    for v in side_neighbors(blocks, u, side) {
                        if component_of[v] != usize::MAX {
                            continue;
                        }
                        let w = blocks[u].center().dist(blocks[v].center());
                        let cand = (w, u, v);
                        let better = match &best {
                            None => true,
                            Some((bw, bu, bv)) => {
                                (w, u, v) != (*bw, *bu, *bv)
                                    && (w < *bw
                                        || (w == *bw && (u < *bu || (u == *bu && v < *bv))))
                            }
                        };
                        if better {
                            best = Some(cand);
                        }
                    }
                }
            }
            match best {
                Some((_, u, v)) => {
                    component_of[v] = comp;
                    edges.push((u.min(v), u.max(v)));
                }
                None => break,
            }
        }
    }
    edges.sort_unstable();
    SpanningForest {
        edges,
        component_of,
        n_components,
    }
}

/// Axis of variation along a side's boundary.
fn boundary_coord<F: Real>(b: &Block<F>, side: Side) -> F {
    match side {
        Side::Left => b.rect.min.x,
        Side::Right => b.rect.max.x,
        Side::Top => b.rect.max.y,
        Side::Bottom => b.rect.min.y,
    }
}

/// Overlap interval of two blocks along their shared boundary.
fn boundary_overlap<F: Real>(a: &Block<F>, b: &Block<F>, side: Side) -> (F, F) {
    match side {
        Side::Left | Side::Right => (
            a.rect.min.y.max(b.rect.min.y),
            a.rect.max.y.min(b.rect.max.y),
        ),
        Side::Top | Side::Bottom => (
            a.rect.min.x.max(b.rect.min.x),
            a.rect.max.x.min(b.rect.max.x),
        ),
    }
}

fn point_on_boundary<F: Real>(side: Side, coord: F, other: F) -> Vec2<F> {
    match side {
        Side::Left | Side::Right => Vec2::new(coord, other),
        Side::Top | Side::Bottom => Vec2::new(other, coord),
    }
}

fn axis_of<F: Real>(side: Side, p: Vec2<F>) -> F {
    match side {
        Side::Left | Side::Right => p.x,
        Side::Top | Side::Bottom => p.y,
    }
}

fn other_of<F: Real>(side: Side, p: Vec2<F>) -> F {
    match side {
        Side::Left | Side::Right => p.y,
        Side::Top | Side::Bottom => p.x,
    }
}

/// True if the "first" part of this side sits at the high end of the
/// boundary's varying coordinate (top for vertical sides).
fn first_at_hi(side: Side) -> bool {
    matches!(side, Side::Left | Side::Right)
}

/// Closed circumnavigation tour of the spanning tree containing the start
/// point's block. Connection segments between blocks are routed through
/// explicit points on the shared boundary so every segment stays inside one
/// free block.
pub fn plan_path<F: Real>(
    blocks: &[Block<F>],
    forest: &SpanningForest,
    start: Vec2<F>,
) -> Result<Vec<Vec2<F>>> {
    if blocks.is_empty() {
        return Err(Error::Planning("no free blocks to cover".into()));
    }
    let seed = block_of_point(blocks, start);
    let comp = forest.component_of[seed];

    // Tree-connected neighbors per (block, side).
    let dir_lists: Vec<HashMap<Side, Vec<usize>>> = (0..blocks.len())
        .map(|i| {
            let tn = forest.tree_neighbors(i);
            let mut m = HashMap::new();
            for side in Side::ALL {
                let mut list: Vec<usize> = side_neighbors(blocks, i, side)
                    .into_iter()
                    .filter(|j| tn.contains(j))
                    .collect();
                // Process top-to-bottom on vertical sides, left-to-right on
                // horizontal ones.
                if first_at_hi(side) {
                    list.sort_by(|&a, &b| {
                        blocks[b]
                            .center()
                            .y
                            .partial_cmp(&blocks[a].center().y)
                            .unwrap()
                    });
                } else {
                    list.sort_by(|&a, &b| {
                        blocks[a]
                            .center()
                            .x
                            .partial_cmp(&blocks[b].center().x)
                            .unwrap()
                    });
                }
                m.insert(side, list);
            }
            m
        })
        .collect();

    let mut segments: Vec<(Vec2<F>, Vec2<F>)> = Vec::new();

    for (i, b) in blocks.iter().enumerate() {
        if forest.component_of[i] != comp {
            continue;
        }
        for side in Side::ALL {
            let d = &dir_lists[i][&side];
            if d.is_empty() {
                // Case 1: no tree neighbor — connect the side's two parts.
                let (p1, p2) = b.side_parts(side);
                segments.push((p1, p2));
                continue;
            }
            if d.len() == 1 {
                let j = d[0];
                let rev = &dir_lists[j][&side.opposite()];
                if rev.len() >= 2 {
                    // The neighbor's multi side generates this connection.
                    continue;
                }
                // Symmetric single-single: generate from LEFT/TOP only.
                if !matches!(side, Side::Left | Side::Top) {
                    continue;
                }
                push_lanes(&mut segments, b, &blocks[j], side);
            } else {
                // Case 3: multiple neighbors — lanes to the outer pair,
                // joint points between consecutive neighbors.
                push_multi(&mut segments, blocks, i, d, side);
            }
        }
    }

    // Part centers are real tour waypoints; only auxiliary boundary points
    // may be pruned when collinear.
    let mut essential = Vec::new();
    for (i, b) in blocks.iter().enumerate() {
        if forest.component_of[i] != comp {
            continue;
        }
        for p in [Part::TopLeft, Part::TopRight, Part::BottomLeft, Part::BottomRight] {
            essential.push(b.part_center(p));
        }
    }
    assemble_tour(segments, &essential, start)
}

/// Index of the block containing (or nearest to) a point.
pub fn block_of_point<F: Real>(blocks: &[Block<F>], p: Vec2<F>) -> usize {
    blocks
        .iter()
        .position(|b| b.rect.contains(p))
        .unwrap_or_else(|| {
            let mut best = 0;
            let mut best_d = F::infinity();
            for (i, b) in blocks.iter().enumerate() {
                let d = b.center().dist(p);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            best
        })
}

/// Both crossing lanes between a block and its single tree neighbor on a
/// side, routed through quarter points of the shared boundary.
fn push_lanes<F: Real>(
    segments: &mut Vec<(Vec2<F>, Vec2<F>)>,
    b: &Block<F>,
    n: &Block<F>,
    side: Side,
) {
    let (b_first, b_last) = b.side_parts(side);
    let (n_first, n_last) = n.side_parts(side.opposite());
    let coord = boundary_coord(b, side);
    let (lo, hi) = boundary_overlap(b, n, side);
    let quarter = (hi - lo) * F::lit(0.25);
    let (first_other, last_other) = if first_at_hi(side) {
        (hi - quarter, lo + quarter)
    } else {
        (lo + quarter, hi - quarter)
    };
    segments.push((b_first, point_on_boundary(side, coord, first_other)));
    segments.push((point_on_boundary(side, coord, first_other), n_first));
    segments.push((b_last, point_on_boundary(side, coord, last_other)));
    segments.push((point_on_boundary(side, coord, last_other), n_last));
}

/// Multi-neighbor side: outer lanes plus joint points between consecutive
/// neighbor pairs, projected from the pair midpoint toward the block center.
fn push_multi<F: Real>(
    segments: &mut Vec<(Vec2<F>, Vec2<F>)>,
    blocks: &[Block<F>],
    i: usize,
    sorted: &[usize],
    side: Side,
) {
    let b = &blocks[i];
    let (b_first, b_last) = b.side_parts(side);
    let coord = boundary_coord(b, side);
    let bs = b.rect.width();

    // Outer lane to the first neighbor.
    {
        let n = &blocks[sorted[0]];
        let (n_first, _) = n.side_parts(side.opposite());
        let (lo, hi) = boundary_overlap(b, n, side);
        let quarter = (hi - lo) * F::lit(0.25);
        let other = if first_at_hi(side) { hi - quarter } else { lo + quarter };
        let e = point_on_boundary(side, coord, other);
        segments.push((b_first, e));
        segments.push((e, n_first));
    }

    // Joints between consecutive neighbors.
    let center = b.center();
    let joint_axis = match side {
        Side::Left => b.rect.min.x + bs * F::lit(0.25),
        Side::Right => b.rect.max.x - bs * F::lit(0.25),
        Side::Top => b.rect.max.y - bs * F::lit(0.25),
        Side::Bottom => b.rect.min.y + bs * F::lit(0.25),
    };
    for w in sorted.windows(2) {
        let (na, nb) = (&blocks[w[0]], &blocks[w[1]]);
        let middle = (na.center() + nb.center()).scale(F::lit(0.5));
        let t = (joint_axis - axis_of(side, middle)) / (axis_of(side, center) - axis_of(side, middle));
        let joint_other = other_of(side, middle) + t * (other_of(side, center) - other_of(side, middle));
        let joint = match side {
            Side::Left | Side::Right => Vec2::new(joint_axis, joint_other),
            Side::Top | Side::Bottom => Vec2::new(joint_other, joint_axis),
        };
        let (_, na_last) = na.side_parts(side.opposite());
        let (nb_first, _) = nb.side_parts(side.opposite());
        push_crossing(segments, b, na, side, na_last, joint);
        push_crossing(segments, b, nb, side, nb_first, joint);
    }

    // Outer lane to the last neighbor.
    {
        let n = &blocks[*sorted.last().unwrap()];
        let (_, n_last) = n.side_parts(side.opposite());
        let (lo, hi) = boundary_overlap(b, n, side);
        let quarter = (hi - lo) * F::lit(0.25);
        let other = if first_at_hi(side) { lo + quarter } else { hi - quarter };
        let e = point_on_boundary(side, coord, other);
        segments.push((b_last, e));
        segments.push((e, n_last));
    }
}

/// A neighbor-part-to-joint connection split at the shared boundary so each
/// half stays inside one convex free block.
fn push_crossing<F: Real>(
    segments: &mut Vec<(Vec2<F>, Vec2<F>)>,
    b: &Block<F>,
    n: &Block<F>,
    side: Side,
    n_part: Vec2<F>,
    joint: Vec2<F>,
) {
    let coord = boundary_coord(b, side);
    let (lo, hi) = boundary_overlap(b, n, side);
    let margin = (hi - lo) * F::lit(0.125);
    let a0 = axis_of(side, n_part);
    let a1 = axis_of(side, joint);
    let s = if a1 == a0 { F::lit(0.5) } else { (coord - a0) / (a1 - a0) };
    let cross_other =
        other_of(side, n_part) + s * (other_of(side, joint) - other_of(side, n_part));
    let clamped = cross_other.max(lo + margin).min(hi - margin);
    let e = point_on_boundary(side, coord, clamped);
    segments.push((n_part, e));
    segments.push((e, joint));
}

/// Assemble a segment soup into a single closed tour: every endpoint must
/// have degree two. The tour is oriented counterclockwise, straight-through
/// points are pruned, and it is rotated to begin nearest the start point.
fn assemble_tour<F: Real>(
    segments: Vec<(Vec2<F>, Vec2<F>)>,
    essential: &[Vec2<F>],
    start: Vec2<F>,
) -> Result<Vec<Vec2<F>>> {
    let key = |p: Vec2<F>| -> (i64, i64) {
        (
            (p.x.to_f64_lossy() * 1e6).round() as i64,
            (p.y.to_f64_lossy() * 1e6).round() as i64,
        )
    };
    let mut points: HashMap<(i64, i64), Vec2<F>> = HashMap::new();
    let mut adj: HashMap<(i64, i64), Vec<(i64, i64)>> = HashMap::new();
    for (a, b) in &segments {
        let (ka, kb) = (key(*a), key(*b));
        if ka == kb {
            continue;
        }
        points.entry(ka).or_insert(*a);
        points.entry(kb).or_insert(*b);
        adj.entry(ka).or_default().push(kb);
        adj.entry(kb).or_default().push(ka);
    }
    for (k, nbrs) in &adj {
        if nbrs.len() != 2 {
            return Err(Error::Planning(format!(
                "tour assembly: waypoint {:?} has degree {}",
                points[k], nbrs.len()
            )));
        }
    }
    let Some(&first) = adj.keys().min() else {
        return Err(Error::Planning("empty coverage path".into()));
    };
    let mut cycle = vec![first];
    let mut prev = first;
    let mut cur = adj[&first][0];
    while cur != first {
        cycle.push(cur);
        let nbrs = &adj[&cur];
        let next = if nbrs[0] == prev { nbrs[1] } else { nbrs[0] };
        prev = cur;
        cur = next;
    }
    if cycle.len() != adj.len() {
        return Err(Error::Planning(
            "coverage segments form more than one loop".into(),
        ));
    }
    let mut pts: Vec<Vec2<F>> = cycle.into_iter().map(|k| points[&k]).collect();

    // Drop straight-through auxiliary waypoints (never part centers).
    let essential_keys: std::collections::HashSet<(i64, i64)> =
        essential.iter().map(|&p| key(p)).collect();
    loop {
        let n = pts.len();
        let mut removed = false;
        let mut keep = Vec::with_capacity(n);
        for i in 0..n {
            let a = pts[(i + n - 1) % n];
            let b = pts[i];
            let c = pts[(i + 1) % n];
            let ab = b - a;
            let bc = c - b;
            let straight = ab.cross(bc).abs() < F::lit(1e-9) && ab.dot(bc) > F::zero();
            if straight && !essential_keys.contains(&key(b)) {
                removed = true;
            } else {
                keep.push(b);
            }
        }
        pts = keep;
        if !removed || pts.len() < 4 {
            break;
        }
    }

    // Orient counterclockwise (positive shoelace area).
    let n = pts.len();
    let mut area2 = F::zero();
    for i in 0..n {
        area2 = area2 + pts[i].cross(pts[(i + 1) % n]);
    }
    if area2 < F::zero() {
        pts.reverse();
    }

    // Rotate to the waypoint nearest the start, then close the loop.
    let mut best = 0;
    let mut best_d = F::infinity();
    for (i, p) in pts.iter().enumerate() {
        let d = p.dist(start);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    pts.rotate_left(best);
    let first = pts[0];
    pts.push(first);
    Ok(pts)
}

/// Total length of a waypoint polyline.
pub fn path_length<F: Real>(waypoints: &[Vec2<F>]) -> F {
    waypoints
        .windows(2)
        .map(|w| w[0].dist(w[1]))
        .fold(F::zero(), |a, b| a + b)
}

/// Predicted traversal time and the fraction of free cells covered by the
/// block decomposition.
pub fn predict_budget<F: Real>(
    blocks: &[Block<F>],
    grid: &OccupancyGrid<F>,
    waypoints: &[Vec2<F>],
    leader_speed: F,
    turn_allowance: F,
) -> Result<(F, F)> {
    if leader_speed <= F::zero() {
        return Err(Error::Planning("leader speed must be positive".into()));
    }
    let tt = path_length(waypoints) / leader_speed
        + turn_allowance * F::from_usize(waypoints.len().saturating_sub(1)).unwrap();
    let block_cells: usize = blocks.iter().map(|b| b.size_cells * b.size_cells).sum();
    let free = grid.free_count();
    let frac = if free == 0 {
        F::zero()
    } else {
        F::from_usize(block_cells).unwrap() / F::from_usize(free).unwrap()
    };
    Ok((tt, frac))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormationTag {
    V,
    U,
    Q,
}

impl std::fmt::Display for FormationTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FormationTag::V => "V",
            FormationTag::U => "U",
            FormationTag::Q => "Q",
        })
    }
}

/// Formation for a block: single-cell blocks queue up, larger blocks spread
/// into V (or U when the team is large).
pub fn formation_for_block(size_cells: usize, robot_count: usize) -> FormationTag {
    if size_cells <= 1 {
        FormationTag::Q
    } else if robot_count > 5 {
        FormationTag::U
    } else {
        FormationTag::V
    }
}

/// Follower offsets in the leader frame (+x forward), scaled so every offset
/// fits within the block half-width.
pub fn formation_offsets<F: Real>(
    tag: FormationTag,
    n_followers: usize,
    spacing: F,
    block_half_width: F,
) -> Vec<Vec2<F>> {
    let mut out = Vec::with_capacity(n_followers);
    match tag {
        FormationTag::Q => {
            for i in 1..=n_followers {
                out.push(Vec2::new(-spacing * F::from_usize(i).unwrap(), F::zero()));
            }
        }
        FormationTag::V | FormationTag::U => {
            let max_rank = n_followers.div_ceil(2).max(1);
            let fit = block_half_width * F::lit(0.9) / F::from_usize(max_rank).unwrap();
            let d = spacing.min(fit).max(F::lit(1e-6));
            for i in 1..=n_followers {
                let rank = F::from_usize((i + 1) / 2).unwrap();
                let lateral = if i % 2 == 1 { rank } else { -rank };
                // U: the rearmost pair tucks in behind the wings.
                let lateral = if tag == FormationTag::U && i > 4 {
                    lateral * F::lit(0.5)
                } else {
                    lateral
                };
                out.push(Vec2::new(-rank * d, lateral * d));
            }
        }
    }
    out
}

/// Complete coverage plan for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePlan<F> {
    pub grid: OccupancyGrid<F>,
    pub blocks: Vec<Block<F>>,
    pub tree: SpanningForest,
    pub waypoints: Vec<Vec2<F>>,
    pub predicted_tt: F,
    pub coverage_fraction: F,
    pub formations: Vec<FormationTag>,
    pub over_budget: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageParams<F> {
    pub cell_size: F,
    pub max_block_cells: usize,
    pub leader_speed: F,
    pub turn_allowance: F,
    pub robot_count: usize,
}

impl<F: Real> CoverageParams<F> {
    pub fn new(cell_size: F, robot_count: usize, leader_speed: F) -> Self {
        Self {
            cell_size,
            // 2x2-cell blocks: the circumnavigation lanes sit a half-cell
            // from the block edges, so a formation about one cell wide
            // sweeps the whole block.
            max_block_cells: 2,
            leader_speed,
            turn_allowance: F::zero(),
            robot_count,
        }
    }
}

/// One-stop planner: rasterize, decompose, span, tour, predict.
pub fn plan_coverage<F: Real>(
    arena: Rect<F>,
    obstacles: &[Polygon<F>],
    start: Vec2<F>,
    params: &CoverageParams<F>,
) -> Result<CoveragePlan<F>> {
    let grid = rasterize(arena, obstacles, params.cell_size)?;
    let blocks = build_blocks(&grid, params.max_block_cells);
    if blocks.is_empty() {
        return Err(Error::Planning("no free space to cover".into()));
    }
    let seed = block_of_point(&blocks, start);
    let tree = build_spanning_tree(&blocks, seed);
    let waypoints = plan_path(&blocks, &tree, start)?;
    let (predicted_tt, coverage_fraction) =
        predict_budget(&blocks, &grid, &waypoints, params.leader_speed, params.turn_allowance)?;
    let formations = blocks
        .iter()
        .map(|b| formation_for_block(b.size_cells, params.robot_count))
        .collect();
    Ok(CoveragePlan {
        grid,
        blocks,
        tree,
        waypoints,
        predicted_tt,
        coverage_fraction,
        formations,
        over_budget: false,
    })
}

/// Result of the cell-size search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSizeChoice<F> {
    pub cell_size: F,
    pub predicted_tt: F,
    pub over_budget: bool,
}

/// Search a descending ladder of candidate cell sizes (min arena dimension /
/// k for k = 2..=16) and return the smallest cell size whose predicted
/// traversal time fits the budget. Falls back to the coarsest candidate,
/// flagged, when nothing fits.
pub fn select_cell_size<F: Real>(
    arena: Rect<F>,
    obstacles: &[Polygon<F>],
    start: Vec2<F>,
    budget_s: F,
    leader_speed: F,
    robot_count: usize,
) -> Result<CellSizeChoice<F>> {
    if budget_s <= F::zero() {
        return Err(Error::Planning("budget must be positive".into()));
    }
    let min_dim = arena.width().min(arena.height());
    let mut fallback: Option<(F, F)> = None;
    let mut chosen: Option<(F, F)> = None;
    for k in 2..=16usize {
        let cell = min_dim / F::from_usize(k).unwrap();
        let params = CoverageParams::new(cell, robot_count, leader_speed);
        let plan = match plan_coverage(arena, obstacles, start, &params) {
            Ok(p) => p,
            Err(_) => continue, // e.g. the coarse raster is fully blocked
        };
        if fallback.is_none() {
            fallback = Some((cell, plan.predicted_tt));
        }
        if plan.predicted_tt <= budget_s {
            chosen = Some((cell, plan.predicted_tt));
        }
    }
    match chosen {
        Some((cell_size, predicted_tt)) => Ok(CellSizeChoice {
            cell_size,
            predicted_tt,
            over_budget: false,
        }),
        None => {
            let (cell_size, predicted_tt) = fallback
                .ok_or_else(|| Error::Planning("no viable cell size candidate".into()))?;
            Ok(CellSizeChoice {
                cell_size,
                predicted_tt,
                over_budget: true,
            })
        }
    }
}

/// CSV export of the waypoint list: index, x, y, block id, formation tag.
pub fn plan_to_csv<F: Real>(plan: &CoveragePlan<F>) -> String {
    let mut s = String::from("index,x,y,block,formation\n");
    for (i, wp) in plan.waypoints.iter().enumerate() {
        let b = block_of_point(&plan.blocks, *wp);
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            i, wp.x, wp.y, b, plan.formations[b]
        ));
    }
    s
}
