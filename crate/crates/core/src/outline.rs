//! Thin outlines from an edge field: non-maximum suppression along the
//! edge direction, two-threshold hysteresis, and quadratic subpixel peaks.

use std::collections::VecDeque;

use crate::edge_detect::{Direction8, EdgeField};
use crate::exec::Exec;
use crate::grid::{BinaryGrid, Grid};

/// Subpixel outline points in raster order of their source pixels.
///
/// Coordinates are in pixels with the origin at the centre of pixel (0, 0).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutlinePoints {
    pub points: Vec<[f64; 2]>,
    pub source_pixel: Vec<(usize, usize)>,
    pub strength: Vec<f64>,
}

impl OutlinePoints {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Strengths one step before and after `(x, y)` along `d`. Steps off the
/// image replicate the border pixel; invalid pixels read as 0.
fn neighbours_along(field: &EdgeField, x: usize, y: usize, d: Direction8) -> (f64, f64) {
    let (dx, dy) = d.offset();
    let (w, h) = (field.width() as isize, field.height() as isize);
    let at = |sx: isize, sy: isize| {
        let nx = (x as isize + sx).clamp(0, w - 1);
        let ny = (y as isize + sy).clamp(0, h - 1);
        field.strength_or_zero(nx, ny)
    };
    (at(-dx, -dy), at(dx, dy))
}

/// Keeps pixels that are maxima of `g` along their own direction:
/// strictly above the predecessor, at least the successor.
pub fn non_max_suppress(field: &EdgeField) -> BinaryGrid {
    non_max_suppress_with(field, Exec::default())
}

pub fn non_max_suppress_with(field: &EdgeField, exec: Exec) -> BinaryGrid {
    let (w, h) = (field.width(), field.height());
    let mut kept = vec![false; w * h];
    exec.for_each_row(&mut kept, w, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            if !field.valid[(x, y)] {
                continue;
            }
            let g = field.strength[(x, y)];
            let (before, after) = neighbours_along(field, x, y, field.direction[(x, y)]);
            *out = g > before && g >= after;
        }
    });
    Grid::from_vec(w, h, kept).unwrap()
}

/// Classical hysteresis over NMS survivors with 8-connectivity.
pub fn hysteresis(kept: &BinaryGrid, field: &EdgeField, t_low: f64, t_high: f64) -> BinaryGrid {
    assert!(t_low <= t_high, "t_low must not exceed t_high");
    let (w, h) = kept.dims();
    let weak = |x: usize, y: usize| kept[(x, y)] && field.strength[(x, y)] >= t_low;
    let mut out = Grid::filled(w, h, false);
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if kept[(x, y)] && field.strength[(x, y)] >= t_high {
                out[(x, y)] = true;
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                if !out[(nx, ny)] && weak(nx, ny) {
                    out[(nx, ny)] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
    }
    out
}

/// Vertex offset of the parabola through `(-1, before)`, `(0, centre)`,
/// `(1, after)`, in units of one step. Degenerate fits and offsets beyond
/// half a step yield 0.
pub fn parabola_offset(before: f64, centre: f64, after: f64) -> f64 {
    let denom = 2.0 * (before - 2.0 * centre + after);
    if denom.abs() < 1e-12 {
        return 0.0;
    }
    let delta = (before - after) / denom;
    if !delta.is_finite() || delta.abs() > 0.5 {
        0.0
    } else {
        delta
    }
}

/// Refined position of the peak at pixel `(x, y)`, moved along the pixel's
/// edge direction.
pub fn subpixel_refine(field: &EdgeField, x: usize, y: usize) -> [f64; 2] {
    let d = field.direction[(x, y)];
    let (before, after) = neighbours_along(field, x, y, d);
    let delta = parabola_offset(before, field.strength[(x, y)], after);
    let (dx, dy) = d.offset();
    [x as f64 + delta * dx as f64, y as f64 + delta * dy as f64]
}

pub fn refine_all(field: &EdgeField, edges: &BinaryGrid) -> OutlinePoints {
    refine_all_with(field, edges, Exec::default())
}

pub fn refine_all_with(field: &EdgeField, edges: &BinaryGrid, exec: Exec) -> OutlinePoints {
    let (w, h) = edges.dims();
    let rows: Vec<Vec<(usize, [f64; 2])>> = exec.map_range(h, |y| {
        (0..w)
            .filter(|&x| edges[(x, y)])
            .map(|x| (x, subpixel_refine(field, x, y)))
            .collect()
    });
    let mut out = OutlinePoints::default();
    for (y, row) in rows.into_iter().enumerate() {
        for (x, p) in row {
            out.points.push(p);
            out.source_pixel.push((x, y));
            out.strength.push(field.strength[(x, y)]);
        }
    }
    out
}

/// NMS, hysteresis and refinement in one call.
pub fn extract_outline(field: &EdgeField, t_low: f64, t_high: f64, exec: Exec) -> OutlinePoints {
    let kept = non_max_suppress_with(field, exec);
    let edges = hysteresis(&kept, field, t_low, t_high);
    refine_all_with(field, &edges, exec)
}
