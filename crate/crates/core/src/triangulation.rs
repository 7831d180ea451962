//! Delaunay triangulation of outline points, background pruning and the
//! dual (triangle adjacency) graph used by segmentation.
//!
//! Construction is incremental Bowyer–Watson. The unbounded outside is
//! represented by ghost triangles sharing one vertex at infinity, so hull
//! edges need no finite bounding triangle. Points are inserted in
//! lexicographic `(x, y)` order and a final flip pass settles cocircular
//! quadrilaterals on the diagonal touching the lexicographically smallest
//! of the four vertices. The result therefore only depends on the point
//! set, not on input order.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::config::PipelineConfig;
use crate::grid::BinaryGrid;

pub type Point = [f64; 2];

/// Magnitude below which the in-circle determinant counts as cocircular.
pub const INCIRCLE_EPS: f64 = 1e-9;
/// Points closer than this are treated as duplicates.
pub const DUPLICATE_EPS: f64 = 1e-9;

const GHOST: usize = usize::MAX;
const NONE: usize = usize::MAX;

/// Twice the signed area of `abc`; positive when counter-clockwise.
pub fn orient2d(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Positive when `d` lies inside the circumcircle of the CCW triangle `abc`.
pub fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let alift = adx * adx + ady * ady;
    let blift = bdx * bdx + bdy * bdy;
    let clift = cdx * cdx + cdy * cdy;
    alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) + clift * (adx * bdy - bdx * ady)
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn triangle_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * orient2d(a, b, c)
}

pub fn circumradius(a: Point, b: Point, c: Point) -> f64 {
    let area = triangle_area(a, b, c).abs();
    if area == 0.0 {
        return f64::INFINITY;
    }
    distance(a, b) * distance(b, c) * distance(c, a) / (4.0 * area)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    TooFewPoints(usize),
    AllCollinear,
    DuplicatesSkipped(usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum TriangulationError {
    #[error("triangle {0} references a missing vertex")]
    BadVertex(usize),
    #[error("triangle {0} is not counter-clockwise with positive area")]
    NotCcw(usize),
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifold(usize, usize),
    #[error("malformed mesh file: {0}")]
    Parse(String),
}

/// Neighbour across one triangle side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adjacent {
    pub triangle: usize,
    /// Shared primal edge as vertex ids.
    pub edge: (usize, usize),
    pub length: f64,
}

/// Counter-clockwise triangles over a vertex list with their adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    /// `adjacency[t][i]` is the neighbour across the side opposite vertex `i`.
    pub adjacency: Vec<[Option<Adjacent>; 3]>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Triangulation {
    pub fn empty(vertices: Vec<Point>) -> Self {
        Self {
            vertices,
            triangles: Vec::new(),
            adjacency: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    /// Builds adjacency for explicit triangles, validating orientation and
    /// manifoldness.
    pub fn from_triangles(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self, TriangulationError> {
        let mut sides: HashMap<(usize, usize), (usize, usize)> = HashMap::with_capacity(triangles.len() * 3);
        let mut adjacency = vec![[None; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(TriangulationError::BadVertex(t));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let o = orient2d(a, b, c);
            if o.is_nan() || o <= 0.0 {
                return Err(TriangulationError::NotCcw(t));
            }
            for i in 0..3 {
                let (p, q) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let key = (p.min(q), p.max(q));
                match sides.get(&key) {
                    None => {
                        sides.insert(key, (t, i));
                    }
                    Some(&(u, j)) => {
                        if adjacency[u][j].is_some() || u == t {
                            return Err(TriangulationError::NonManifold(key.0, key.1));
                        }
                        let length = distance(vertices[p], vertices[q]);
                        adjacency[t][i] = Some(Adjacent {
                            triangle: u,
                            edge: key,
                            length,
                        });
                        adjacency[u][j] = Some(Adjacent {
                            triangle: t,
                            edge: key,
                            length,
                        });
                    }
                }
            }
        }
        Ok(Self {
            vertices,
            triangles,
            adjacency,
            diagnostics: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        triangle_area(a, b, c)
    }

    pub fn side_lengths(&self, t: usize) -> [f64; 3] {
        let [a, b, c] = self.corners(t);
        [distance(b, c), distance(c, a), distance(a, b)]
    }

    pub fn shortest_side(&self, t: usize) -> f64 {
        self.side_lengths(t).into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.corners(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn circumradius(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        circumradius(a, b, c)
    }

    /// Whether `p` lies inside or on triangle `t`, up to `tol` in the
    /// orientation determinant.
    pub fn contains(&self, t: usize, p: Point, tol: f64) -> bool {
        let [a, b, c] = self.corners(t);
        orient2d(a, b, p) >= -tol && orient2d(b, c, p) >= -tol && orient2d(c, a, p) >= -tol
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.adjacency.iter().flatten().filter(|a| a.is_none()).count()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.len()).map(|t| self.area(t)).sum()
    }

    /// Keeps the triangles for which `keep` holds and rebuilds adjacency.
    pub fn retain(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        let triangles = (0..self.len())
            .filter(|&t| keep(t))
            .map(|t| self.triangles[t])
            .collect();
        let mut out =
            Self::from_triangles(self.vertices.clone(), triangles).expect("a subset of a valid triangulation is valid");
        out.diagnostics = self.diagnostics.clone();
        out
    }

    /// Writes the mesh as a 2D OFF file (z = 0). Coordinates use the
    /// shortest round-trip representation, so [`Triangulation::from_off`]
    /// restores them exactly.
    pub fn to_off(&self) -> String {
        let mut out = String::new();
        writeln!(out, "OFF").unwrap();
        writeln!(out, "{} {} 0", self.vertices.len(), self.triangles.len()).unwrap();
        for v in &self.vertices {
            writeln!(out, "{:?} {:?} 0", v[0], v[1]).unwrap();
        }
        for t in &self.triangles {
            writeln!(out, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
        }
        out
    }

    pub fn from_off(text: &str) -> Result<Self, TriangulationError> {
        let parse_err = |m: &str| TriangulationError::Parse(m.to_string());
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        if lines.next() != Some("OFF") {
            return Err(parse_err("missing OFF header"));
        }
        let counts: Vec<usize> = lines
            .next()
            .ok_or_else(|| parse_err("missing counts"))?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| parse_err("bad count")))
            .collect::<Result<_, _>>()?;
        let (nv, nt) = match counts.as_slice() {
            [nv, nt, ..] => (*nv, *nt),
            _ => return Err(parse_err("bad counts line")),
        };
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let nums: Vec<f64> = lines
                .next()
                .ok_or_else(|| parse_err("truncated vertex list"))?
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| parse_err("bad coordinate")))
                .collect::<Result<_, _>>()?;
            if nums.len() < 2 {
                return Err(parse_err("vertex needs two coordinates"));
            }
            vertices.push([nums[0], nums[1]]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let nums: Vec<usize> = lines
                .next()
                .ok_or_else(|| parse_err("truncated face list"))?
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| parse_err("bad index")))
                .collect::<Result<_, _>>()?;
            match nums.as_slice() {
                [3, a, b, c] => triangles.push([*a, *b, *c]),
                _ => return Err(parse_err("only triangular faces are supported")),
            }
        }
        Self::from_triangles(vertices, triangles)
    }
}

/// Adjacency between two triangles, weighted by their shared side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualEdge {
    pub t1: usize,
    pub t2: usize,
    pub edge: (usize, usize),
    pub length: f64,
}

/// One entry per interior side, ordered by `(t1, t2)` with `t1 < t2`.
pub fn dual_edges(tri: &Triangulation) -> Vec<DualEdge> {
    let mut out = Vec::new();
    for (t, adj) in tri.adjacency.iter().enumerate() {
        for a in adj.iter().flatten() {
            if a.triangle > t {
                out.push(DualEdge {
                    t1: t,
                    t2: a.triangle,
                    edge: a.edge,
                    length: a.length,
                });
            }
        }
    }
    out.sort_by_key(|e| (e.t1, e.t2));
    out
}

/// Drops triangles whose centroid falls on background in the foreground
/// mask, or whose circumradius exceeds `prune_alpha`.
pub fn prune_background(tri: &Triangulation, cfg: &PipelineConfig) -> Triangulation {
    if cfg.foreground_mask.is_none() && cfg.prune_alpha.is_none() {
        return tri.clone();
    }
    tri.retain(|t| {
        if let Some(mask) = &cfg.foreground_mask {
            if !centroid_on_foreground(mask, tri.centroid(t)) {
                return false;
            }
        }
        match cfg.prune_alpha {
            Some(alpha) => tri.circumradius(t) <= alpha,
            None => true,
        }
    })
}

fn centroid_on_foreground(mask: &BinaryGrid, c: Point) -> bool {
    let x = c[0].round().clamp(0.0, mask.width() as f64 - 1.0) as usize;
    let y = c[1].round().clamp(0.0, mask.height() as f64 - 1.0) as usize;
    mask[(x, y)]
}

/// Drops points within [`DUPLICATE_EPS`] of an earlier point.
pub fn dedup_points(points: &[Point]) -> Vec<Point> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(points[a], points[b]).then(a.cmp(&b)));
    let mut keep = vec![true; points.len()];
    for w in 0..order.len() {
        if !keep[order[w]] {
            continue;
        }
        let p = points[order[w]];
        for &j in &order[w + 1..] {
            if points[j][0] - p[0] > DUPLICATE_EPS {
                break;
            }
            if distance(p, points[j]) < DUPLICATE_EPS {
                keep[j] = false;
            }
        }
    }
    points.iter().zip(keep).filter_map(|(p, k)| k.then_some(*p)).collect()
}

fn lex_cmp(a: Point, b: Point) -> std::cmp::Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
}

/// Delaunay triangulation of `points`. Output vertex ids index `points`.
pub fn delaunay(points: &[Point]) -> Triangulation {
    let finite = points.iter().filter(|p| p[0].is_finite() && p[1].is_finite()).count();
    assert_eq!(finite, points.len(), "points must be finite");
    if points.len() < 3 {
        let mut t = Triangulation::empty(points.to_vec());
        t.diagnostics.push(Diagnostic::TooFewPoints(points.len()));
        return t;
    }

    // Canonical lexicographic order doubles as insertion order and as the
    // rank used for cocircular tie-breaks.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(points[a], points[b]).then(a.cmp(&b)));
    let sorted: Vec<Point> = order.iter().map(|&i| points[i]).collect();

    let mut diagnostics = Vec::new();
    let Some(mut mesh) = Mesh::seed(&sorted) else {
        let mut t = Triangulation::empty(points.to_vec());
        t.diagnostics.push(Diagnostic::AllCollinear);
        return t;
    };
    let mut skipped = 0;
    for i in 0..sorted.len() {
        if mesh.inserted[i] {
            continue;
        }
        if !mesh.insert(i) {
            skipped += 1;
        }
    }
    mesh.settle_ties();
    if skipped > 0 {
        diagnostics.push(Diagnostic::DuplicatesSkipped(skipped));
    }

    // Rotate each triangle to start at its lowest rank, then sort.
    let mut tris: Vec<[usize; 3]> = mesh
        .live_real()
        .map(|t| {
            let v = mesh.tris[t];
            let k = (0..3).min_by_key(|&k| v[k]).unwrap();
            [v[k], v[(k + 1) % 3], v[(k + 2) % 3]]
        })
        .collect();
    tris.sort_unstable();
    let triangles = tris.into_iter().map(|t| t.map(|r| order[r])).collect();
    let mut out = Triangulation::from_triangles(points.to_vec(), triangles)
        .expect("Delaunay construction yields a valid triangulation");
    out.diagnostics = diagnostics;
    out
}

/// Mutable triangle soup with ghost triangles, used during construction.
/// Ghost triangles store the vertex at infinity in slot 2; their side
/// opposite slot 2 is a hull edge with the outside on its left.
struct Mesh<'a> {
    pts: &'a [Point],
    tris: Vec<[usize; 3]>,
    nbr: Vec<[usize; 3]>,
    alive: Vec<bool>,
    free: Vec<usize>,
    inserted: Vec<bool>,
    mark: Vec<u32>,
    stamp: u32,
    last: usize,
}

impl<'a> Mesh<'a> {
    /// Starts from the first non-degenerate triangle in insertion order.
    fn seed(pts: &'a [Point]) -> Option<Self> {
        let (a, b) = (0, 1);
        let c = (2..pts.len()).find(|&c| orient2d(pts[a], pts[b], pts[c]) != 0.0)?;
        let (a, b) = if orient2d(pts[a], pts[b], pts[c]) > 0.0 {
            (a, b)
        } else {
            (b, a)
        };
        let mut mesh = Mesh {
            pts,
            tris: vec![[a, b, c], [b, a, GHOST], [c, b, GHOST], [a, c, GHOST]],
            nbr: vec![[2, 3, 1], [NONE; 3], [NONE; 3], [NONE; 3]],
            alive: vec![true; 4],
            free: Vec::new(),
            inserted: vec![false; pts.len()],
            mark: vec![0; 4],
            stamp: 0,
            last: 0,
        };
        // Ghost (u, v, ∞): side (v, ∞) faces the ghost of the next hull
        // edge, side (∞, u) the ghost of the previous one.
        mesh.nbr[1] = [3, 2, 0];
        mesh.nbr[2] = [1, 3, 0];
        mesh.nbr[3] = [2, 1, 0];
        mesh.inserted[a] = true;
        mesh.inserted[b] = true;
        mesh.inserted[c] = true;
        Some(mesh)
    }

    fn is_ghost(&self, t: usize) -> bool {
        self.tris[t][2] == GHOST
    }

    fn live_real(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tris.len()).filter(|&t| self.alive[t] && !self.is_ghost(t))
    }

    fn p(&self, v: usize) -> Point {
        self.pts[v]
    }

    fn in_circle(&self, t: usize, q: Point) -> bool {
        let [a, b, c] = self.tris[t];
        if c == GHOST {
            let (pa, pb) = (self.p(a), self.p(b));
            let o = orient2d(pa, pb, q);
            if o != 0.0 {
                return o > 0.0;
            }
            // Collinear with the hull edge: inside only strictly between.
            let along = |s: Point, e: Point| (q[0] - s[0]) * (e[0] - s[0]) + (q[1] - s[1]) * (e[1] - s[1]);
            return along(pa, pb) > 0.0 && along(pb, pa) > 0.0;
        }
        incircle(self.p(a), self.p(b), self.p(c), q) > INCIRCLE_EPS
    }

    /// Visibility walk towards `q`; returns a real triangle containing it or
    /// the ghost whose hull edge sees it.
    fn locate(&self, q: Point) -> usize {
        let mut t = self.last;
        if !self.alive[t] {
            t = (0..self.tris.len()).find(|&t| self.alive[t]).unwrap();
        }
        if self.is_ghost(t) {
            t = self.nbr[t][2];
        }
        let limit = 4 * self.tris.len() + 16;
        let mut turn = 0;
        for _ in 0..limit {
            if self.is_ghost(t) {
                return t;
            }
            let v = self.tris[t];
            let mut next = None;
            for k in 0..3 {
                let i = (k + turn) % 3;
                if orient2d(self.p(v[(i + 1) % 3]), self.p(v[(i + 2) % 3]), q) < 0.0 {
                    next = Some(self.nbr[t][i]);
                    break;
                }
            }
            turn = (turn + 1) % 3;
            match next {
                Some(n) => t = n,
                None => return t,
            }
        }
        self.locate_brute(q)
    }

    fn locate_brute(&self, q: Point) -> usize {
        let mut ghost = None;
        for t in 0..self.tris.len() {
            if !self.alive[t] {
                continue;
            }
            let [a, b, c] = self.tris[t];
            if c == GHOST {
                if ghost.is_none() && orient2d(self.p(a), self.p(b), q) > 0.0 {
                    ghost = Some(t);
                }
            } else if orient2d(self.p(a), self.p(b), q) >= 0.0
                && orient2d(self.p(b), self.p(c), q) >= 0.0
                && orient2d(self.p(c), self.p(a), q) >= 0.0
            {
                return t;
            }
        }
        ghost.expect("point lies inside the hull or sees a hull edge")
    }

    fn next_stamp(&mut self) -> u32 {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.stamp = 1;
        }
        self.stamp
    }

    fn alloc(&mut self, tri: [usize; 3], nbr: [usize; 3]) -> usize {
        if let Some(t) = self.free.pop() {
            self.tris[t] = tri;
            self.nbr[t] = nbr;
            self.alive[t] = true;
            t
        } else {
            self.tris.push(tri);
            self.nbr.push(nbr);
            self.alive.push(true);
            self.mark.push(0);
            self.tris.len() - 1
        }
    }

    /// Inserts sorted point `i`. Returns false when it duplicates a vertex.
    fn insert(&mut self, i: usize) -> bool {
        let q = self.p(i);
        let start = self.locate(q);
        for &v in &self.tris[start] {
            if v != GHOST && distance(self.p(v), q) < DUPLICATE_EPS {
                return false;
            }
        }

        // Cavity: triangles whose circumcircle strictly contains q,
        // grown until every boundary side sees q on its inner side.
        let stamp = self.next_stamp();
        let mut cavity = vec![start];
        self.mark[start] = stamp;
        let mut stack = vec![start];
        loop {
            while let Some(t) = stack.pop() {
                for k in 0..3 {
                    let n = self.nbr[t][k];
                    if self.mark[n] != stamp && self.in_circle(n, q) {
                        self.mark[n] = stamp;
                        cavity.push(n);
                        stack.push(n);
                    }
                }
            }
            for &t in &cavity {
                for k in 0..3 {
                    let n = self.nbr[t][k];
                    if self.mark[n] == stamp {
                        continue;
                    }
                    let (u, v) = (self.tris[t][(k + 1) % 3], self.tris[t][(k + 2) % 3]);
                    if u != GHOST && v != GHOST && orient2d(self.p(u), self.p(v), q) <= 0.0 {
                        stack.push(n);
                    }
                }
            }
            if stack.is_empty() {
                break;
            }
            stack.sort_unstable();
            stack.dedup();
            for &n in &stack {
                self.mark[n] = stamp;
                cavity.push(n);
            }
        }

        // Boundary sides (u, v) with the outside neighbour and its slot.
        let mut boundary = Vec::with_capacity(cavity.len() + 2);
        for &t in &cavity {
            for k in 0..3 {
                let n = self.nbr[t][k];
                if self.mark[n] == stamp {
                    continue;
                }
                let (u, v) = (self.tris[t][(k + 1) % 3], self.tris[t][(k + 2) % 3]);
                let slot = (0..3).find(|&j| self.nbr[n][j] == t).unwrap();
                boundary.push((u, v, n, slot));
            }
        }
        for &t in &cavity {
            self.alive[t] = false;
            self.free.push(t);
        }

        // Fan of new triangles around q; link across the boundary first.
        let mut starts: HashMap<usize, (usize, usize)> = HashMap::with_capacity(boundary.len());
        let mut ends: Vec<(usize, usize, usize)> = Vec::with_capacity(boundary.len());
        for &(u, v, n, slot) in &boundary {
            // [u, v, q]: slot 2 faces n, slot 0 is side (v, q), slot 1 is (q, u).
            let (tri, rot) = if u == GHOST {
                ([v, i, GHOST], 1)
            } else if v == GHOST {
                ([i, u, GHOST], 2)
            } else {
                ([u, v, i], 0)
            };
            let base = [NONE, NONE, n];
            let nbr = [base[rot % 3], base[(rot + 1) % 3], base[(rot + 2) % 3]];
            let t = self.alloc(tri, nbr);
            self.nbr[n][slot] = t;
            // Slot of side (q, u) and side (v, q) after rotation.
            let slot_qu = (1 + 3 - rot) % 3;
            let slot_vq = (3 - rot) % 3;
            starts.insert(u, (t, slot_qu));
            ends.push((v, t, slot_vq));
            self.last = t;
        }
        for (v, t, slot) in ends {
            let (t2, slot2) = starts[&v];
            self.nbr[t][slot] = t2;
            self.nbr[t2][slot2] = t;
        }
        if self.is_ghost(self.last) {
            self.last = self.nbr[self.last][2];
        }
        self.inserted[i] = true;
        true
    }

    /// Flips (t, side k) to the other diagonal of its quadrilateral.
    fn flip(&mut self, t: usize, k: usize) {
        let u = self.nbr[t][k];
        let j = (0..3).find(|&j| self.nbr[u][j] == t).unwrap();
        let [r, p, q] = [self.tris[t][k], self.tris[t][(k + 1) % 3], self.tris[t][(k + 2) % 3]];
        let s = self.tris[u][j];
        let a = self.nbr[t][(k + 1) % 3]; // across (q, r)
        let b = self.nbr[t][(k + 2) % 3]; // across (r, p)
        let c = self.nbr[u][(j + 1) % 3]; // across (p, s)
        let d = self.nbr[u][(j + 2) % 3]; // across (s, q)
        debug_assert_eq!(self.tris[u][(j + 1) % 3], q);
        self.tris[t] = [r, p, s];
        self.nbr[t] = [c, u, b];
        self.tris[u] = [s, q, r];
        self.nbr[u] = [a, t, d];
        for (n, old, new) in [(c, u, t), (a, t, u)] {
            if let Some(slot) = (0..3).find(|&m| self.nbr[n][m] == old) {
                self.nbr[n][slot] = new;
            }
        }
    }

    /// Lawson pass: flips illegal sides and settles cocircular quads on the
    /// diagonal touching their lowest-ranked vertex.
    fn settle_ties(&mut self) {
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for t in self.live_real() {
            for k in 0..3 {
                stack.push((t, k));
            }
        }
        let mut budget = 64 * stack.len() + 1024;
        while let Some((t, k)) = stack.pop() {
            if budget == 0 {
                break;
            }
            budget -= 1;
            if !self.alive[t] || self.is_ghost(t) {
                continue;
            }
            let u = self.nbr[t][k];
            if self.is_ghost(u) {
                continue;
            }
            let Some(j) = (0..3).find(|&j| self.nbr[u][j] == t) else {
                continue;
            };
            let [r, p, q] = [self.tris[t][k], self.tris[t][(k + 1) % 3], self.tris[t][(k + 2) % 3]];
            let s = self.tris[u][j];
            let det = incircle(self.p(r), self.p(p), self.p(q), self.p(s));
            let flip = if det > INCIRCLE_EPS {
                true
            } else if det >= -INCIRCLE_EPS {
                r.min(s) < p.min(q)
            } else {
                false
            };
            if !flip {
                continue;
            }
            if !(orient2d(self.p(r), self.p(p), self.p(s)) > 0.0 && orient2d(self.p(s), self.p(q), self.p(r)) > 0.0) {
                continue;
            }
            self.flip(t, k);
            for (tt, kk) in [(t, 0), (t, 2), (u, 0), (u, 2)] {
                stack.push((tt, kk));
            }
        }
    }
}
