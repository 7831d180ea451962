//! Greedy fusion of Delaunay triangles into segments.
//!
//! Shared sides are visited from longest to shortest. A segment `S` carries
//! its area `|S|` and the shortest side `m_S` of any member triangle, giving
//! the aspect ratio `l_S = (|S| − A_min) / m_S`. Two segments fuse across a
//! side of length `|e|` when `|e| > κ · min(l_S, l_S')`. Segments whose area
//! is still below `A_min` afterwards are folded into the neighbour with the
//! longest common boundary.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::Serialize;

use crate::exec::Exec;
use crate::grid::Grid;
use crate::triangulation::{dual_edges, DualEdge, Triangulation};

/// Union-find over triangles with per-segment area and shortest side.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentForest {
    parent: Vec<usize>,
    size: Vec<usize>,
    area: Vec<f64>,
    min_edge: Vec<f64>,
}

impl SegmentForest {
    /// One singleton per triangle, initialised with its area and shortest side.
    pub fn new(tri: &Triangulation) -> Self {
        let areas = (0..tri.len()).map(|t| tri.area(t)).collect();
        let shortest = (0..tri.len()).map(|t| tri.shortest_side(t)).collect();
        Self::from_parts(areas, shortest)
    }

    pub fn from_parts(areas: Vec<f64>, min_edges: Vec<f64>) -> Self {
        assert_eq!(areas.len(), min_edges.len());
        let n = areas.len();
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
            area: areas,
            min_edge: min_edges,
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    pub fn find_const(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    pub fn is_root(&self, x: usize) -> bool {
        self.parent[x] == x
    }

    /// Merges two distinct roots. `side` is the length of the side fused
    /// across, if any. Returns the surviving root: the larger tree, or the
    /// lower id on equal sizes.
    pub fn union(&mut self, a: usize, b: usize, side: Option<f64>) -> usize {
        debug_assert!(self.is_root(a) && self.is_root(b) && a != b);
        let (root, child) = match self.size[a].cmp(&self.size[b]) {
            Ordering::Greater => (a, b),
            Ordering::Less => (b, a),
            Ordering::Equal => (a.min(b), a.max(b)),
        };
        self.parent[child] = root;
        self.size[root] += self.size[child];
        self.area[root] += self.area[child];
        let mut m = self.min_edge[root].min(self.min_edge[child]);
        if let Some(len) = side {
            m = m.min(len);
        }
        self.min_edge[root] = m;
        root
    }

    pub fn area(&self, root: usize) -> f64 {
        self.area[root]
    }

    pub fn min_edge(&self, root: usize) -> f64 {
        self.min_edge[root]
    }

    pub fn member_count(&self, root: usize) -> usize {
        self.size[root]
    }
}

/// `l_S = (|S| − A_min) / m_S`; negative while the segment is below `A_min`.
pub fn aspect_ratio(forest: &SegmentForest, root: usize, a_min: f64) -> f64 {
    (forest.area(root) - a_min) / forest.min_edge(root)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepOutcome {
    Fused,
    Kept,
    SameSegment,
    Barred,
}

/// One processed dual edge of the main pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FusionStep {
    /// Index into [`Segmenter::edges`].
    pub edge: usize,
    pub length: f64,
    pub roots: (usize, usize),
    pub ratios: (f64, f64),
    pub outcome: StepOutcome,
}

/// One merge of the minimum-area pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinAreaMerge {
    pub small: usize,
    pub into: usize,
    pub shared_boundary: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FusionTrace {
    pub steps: Vec<FusionStep>,
    pub min_area: Vec<MinAreaMerge>,
}

/// Segment labels per triangle, compacted to `0..segment_count` in order of
/// each segment's first triangle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentationResult {
    pub labels: Vec<u32>,
    pub segment_count: usize,
    pub areas: Vec<f64>,
    pub member_counts: Vec<usize>,
    pub kappa: f64,
    pub a_min: f64,
}

impl SegmentationResult {
    fn compact(roots: impl Iterator<Item = usize>, tri_areas: &[f64], kappa: f64, a_min: f64) -> Self {
        let mut remap: Vec<u32> = vec![u32::MAX; tri_areas.len()];
        let mut labels = Vec::with_capacity(tri_areas.len());
        let mut areas = Vec::new();
        let mut member_counts = Vec::new();
        for (t, r) in roots.enumerate() {
            if remap[r] == u32::MAX {
                remap[r] = areas.len() as u32;
                areas.push(0.0);
                member_counts.push(0);
            }
            let l = remap[r];
            labels.push(l);
            areas[l as usize] += tri_areas[t];
            member_counts[l as usize] += 1;
        }
        Self {
            segment_count: areas.len(),
            labels,
            areas,
            member_counts,
            kappa,
            a_min,
        }
    }

    /// Unions the segments containing each pair of triangles, then compacts.
    pub fn merged(&self, tri: &Triangulation, triangle_pairs: &[(usize, usize)]) -> Self {
        let mut forest = SegmentForest::from_parts(vec![0.0; self.segment_count], vec![0.0; self.segment_count]);
        for &(a, b) in triangle_pairs {
            let (ra, rb) = (
                forest.find(self.labels[a] as usize),
                forest.find(self.labels[b] as usize),
            );
            if ra != rb {
                forest.union(ra, rb, None);
            }
        }
        let areas: Vec<f64> = (0..tri.len()).map(|t| tri.area(t)).collect();
        let roots: Vec<usize> = self.labels.iter().map(|&l| forest.find(l as usize)).collect();
        Self::compact(roots.into_iter(), &areas, self.kappa, self.a_min)
    }

    /// Lowest triangle id of each segment.
    pub fn representatives(&self) -> Vec<usize> {
        let mut reps = vec![usize::MAX; self.segment_count];
        for (t, &l) in self.labels.iter().enumerate() {
            let r = &mut reps[l as usize];
            *r = (*r).min(t);
        }
        reps
    }
}

#[derive(Clone, Copy, PartialEq)]
struct ByArea(f64, usize);

impl Eq for ByArea {}

impl PartialOrd for ByArea {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ByArea {
    // Reversed so that BinaryHeap pops the smallest area, then lowest id.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// A triangulation prepared for repeated segmentation: triangle measures
/// and the dual edges sorted once by non-increasing length.
#[derive(Debug, Clone)]
pub struct Segmenter {
    areas: Vec<f64>,
    shortest: Vec<f64>,
    edges: Vec<DualEdge>,
    order: Vec<usize>,
}

impl Segmenter {
    pub fn new(tri: &Triangulation) -> Self {
        let edges = dual_edges(tri);
        let mut order: Vec<usize> = (0..edges.len()).collect();
        // Longest first; equal lengths keep the (t1, t2) order of `edges`.
        order.sort_by(|&a, &b| edges[b].length.total_cmp(&edges[a].length).then(a.cmp(&b)));
        Self {
            areas: (0..tri.len()).map(|t| tri.area(t)).collect(),
            shortest: (0..tri.len()).map(|t| tri.shortest_side(t)).collect(),
            edges,
            order,
        }
    }

    pub fn triangle_count(&self) -> usize {
        self.areas.len()
    }

    /// Dual edges ordered by `(t1, t2)`; indices are stable edge ids.
    pub fn edges(&self) -> &[DualEdge] {
        &self.edges
    }

    /// Edge ids in processing order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn forest(&self) -> SegmentForest {
        SegmentForest::from_parts(self.areas.clone(), self.shortest.clone())
    }

    pub fn segment(&self, kappa: f64, a_min: f64) -> SegmentationResult {
        self.segment_with(kappa, a_min, None, None)
    }

    /// Full segmentation. Edges flagged in `barriers` (indexed like
    /// [`Segmenter::edges`]) never fuse, in either pass.
    pub fn segment_with(
        &self,
        kappa: f64,
        a_min: f64,
        barriers: Option<&[bool]>,
        mut trace: Option<&mut FusionTrace>,
    ) -> SegmentationResult {
        assert!(kappa > 0.0, "kappa must be positive");
        assert!(a_min >= 0.0, "a_min must be non-negative");
        let mut forest = self.forest();
        self.main_pass(&mut forest, kappa, a_min, barriers, trace.as_deref_mut());
        self.enforce_min_area(&mut forest, a_min, barriers, trace.map(|t| &mut t.min_area));
        self.result(&mut forest, kappa, a_min)
    }

    pub fn main_pass(
        &self,
        forest: &mut SegmentForest,
        kappa: f64,
        a_min: f64,
        barriers: Option<&[bool]>,
        mut trace: Option<&mut FusionTrace>,
    ) {
        for &id in &self.order {
            let e = &self.edges[id];
            let (ra, rb) = (forest.find(e.t1), forest.find(e.t2));
            let barred = barriers.is_some_and(|b| b[id]);
            let (la, lb) = (aspect_ratio(forest, ra, a_min), aspect_ratio(forest, rb, a_min));
            let outcome = if barred {
                StepOutcome::Barred
            } else if ra == rb {
                StepOutcome::SameSegment
            } else if e.length > kappa * la.min(lb) {
                forest.union(ra, rb, Some(e.length));
                StepOutcome::Fused
            } else {
                StepOutcome::Kept
            };
            if let Some(tr) = trace.as_deref_mut() {
                tr.steps.push(FusionStep {
                    edge: id,
                    length: e.length,
                    roots: (ra, rb),
                    ratios: (la, lb),
                    outcome,
                });
            }
        }
    }

    /// Folds every segment smaller than `a_min` into the neighbour sharing
    /// the longest boundary, smallest segment first. Segments without any
    /// neighbour are left alone.
    pub fn enforce_min_area(
        &self,
        forest: &mut SegmentForest,
        a_min: f64,
        barriers: Option<&[bool]>,
        mut trace: Option<&mut Vec<MinAreaMerge>>,
    ) {
        let mut adj: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
        for (id, e) in self.edges.iter().enumerate() {
            if barriers.is_some_and(|b| b[id]) {
                continue;
            }
            let (ra, rb) = (forest.find(e.t1), forest.find(e.t2));
            if ra == rb {
                continue;
            }
            *adj.entry(ra).or_default().entry(rb).or_insert(0.0) += e.length;
            *adj.entry(rb).or_default().entry(ra).or_insert(0.0) += e.length;
        }

        let mut heap: BinaryHeap<ByArea> = (0..forest.len())
            .filter(|&r| forest.is_root(r) && forest.area(r) < a_min)
            .map(|r| ByArea(forest.area(r), r))
            .collect();
        while let Some(ByArea(area, small)) = heap.pop() {
            if !forest.is_root(small) || forest.area(small) != area || area >= a_min {
                continue;
            }
            let Some(neigh) = adj.get(&small) else { continue };
            let Some((&into, &shared)) = neigh.iter().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0))) else {
                continue;
            };
            let small_adj = adj.remove(&small).unwrap_or_default();
            let into_adj = adj.remove(&into).unwrap_or_default();
            let root = forest.union(small, into, None);
            let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
            for (n, len) in small_adj.into_iter().chain(into_adj) {
                if n == small || n == into {
                    continue;
                }
                *merged.entry(n).or_insert(0.0) += len;
            }
            for (&n, &len) in &merged {
                let other = adj.get_mut(&n).expect("adjacency is symmetric");
                other.remove(&small);
                other.remove(&into);
                other.insert(root, len);
            }
            adj.insert(root, merged);
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(MinAreaMerge {
                    small,
                    into,
                    shared_boundary: shared,
                });
            }
            if forest.area(root) < a_min {
                heap.push(ByArea(forest.area(root), root));
            }
        }
    }

    pub fn result(&self, forest: &mut SegmentForest, kappa: f64, a_min: f64) -> SegmentationResult {
        let roots: Vec<usize> = (0..forest.len()).map(|t| forest.find(t)).collect();
        SegmentationResult::compact(roots.into_iter(), &self.areas, kappa, a_min)
    }
}

/// Segments `tri` with the given parameters.
pub fn segment(tri: &Triangulation, kappa: f64, a_min: f64) -> SegmentationResult {
    Segmenter::new(tri).segment(kappa, a_min)
}

/// Stand-alone minimum-area pass over an existing forest.
pub fn enforce_min_area(forest: &mut SegmentForest, tri: &Triangulation, a_min: f64) {
    Segmenter::new(tri).enforce_min_area(forest, a_min, None, None);
}

/// Tolerance of the pixel-centre containment test.
pub const RASTER_TOLERANCE: f64 = 1e-9;

/// Label map: each pixel centre takes `label + 1` of the lowest-id triangle
/// containing it; uncovered pixels stay 0.
pub fn rasterize_labels(tri: &Triangulation, result: &SegmentationResult, width: usize, height: usize) -> Grid<u32> {
    rasterize_labels_with(tri, result, width, height, Exec::default())
}

pub fn rasterize_labels_with(
    tri: &Triangulation,
    result: &SegmentationResult,
    width: usize,
    height: usize,
    exec: Exec,
) -> Grid<u32> {
    assert_eq!(result.labels.len(), tri.len());
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); height];
    let mut x_range = Vec::with_capacity(tri.len());
    for t in 0..tri.len() {
        let c = tri.corners(t);
        let (lo_x, hi_x) = (
            c.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
            c.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max),
        );
        let (lo_y, hi_y) = (
            c.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min),
            c.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max),
        );
        x_range.push((lo_x - 1e-6, hi_x + 1e-6));
        let y0 = (lo_y - 1e-6).ceil().max(0.0);
        let y1 = (hi_y + 1e-6).floor().min(height as f64 - 1.0);
        if y1 < y0 {
            continue;
        }
        for row in &mut rows[y0 as usize..=y1 as usize] {
            row.push(t);
        }
    }
    let mut out = vec![0u32; width * height];
    exec.for_each_row(&mut out, width, |y, row| {
        for (x, px) in row.iter_mut().enumerate() {
            let p = [x as f64, y as f64];
            for &t in &rows[y] {
                let (lo, hi) = x_range[t];
                if p[0] < lo || p[0] > hi {
                    continue;
                }
                if tri.contains(t, p, RASTER_TOLERANCE) {
                    *px = result.labels[t] + 1;
                    break;
                }
            }
        }
    });
    Grid::from_vec(width, height, out).unwrap()
}
