//! Ray-cast test scenes with known ground truth.
//!
//! A square plate floats at a fixed height above a ground plane and is
//! seen orthographically from above. Each directional light yields one
//! mask: the plate top is always lit, ground points are shadowed when the
//! ray towards the light hits the plate.

use crate::grid::{BinaryGrid, Grid};
use crate::mask_io::{Light, LightEntry, LightSet, ShadowStack};

#[derive(Debug, Clone, PartialEq)]
pub struct SquareScene {
    pub width: usize,
    pub height: usize,
    /// Inclusive pixel range `[x0, x1] × [y0, y1]` covered by the plate.
    pub plate: (usize, usize, usize, usize),
    /// Plate height above the ground, in pixel units.
    pub elevation: f64,
    pub lights: Vec<[f64; 3]>,
}

/// `n` directional lights on a ring at the given elevation angle, with
/// azimuths `offset + k·360/n` degrees.
pub fn ring_lights(n: usize, elevation_deg: f64, azimuth_offset_deg: f64) -> Vec<[f64; 3]> {
    let e = elevation_deg.to_radians();
    (0..n)
        .map(|k| {
            let a = (azimuth_offset_deg + 360.0 * k as f64 / n as f64).to_radians();
            [e.cos() * a.cos(), e.cos() * a.sin(), e.sin()]
        })
        .collect()
}

impl SquareScene {
    /// 256×256 image, centred 96-pixel plate 16 px above the ground, eight
    /// lights at 60° elevation whose azimuths avoid the image axes.
    pub fn standard() -> Self {
        Self {
            width: 256,
            height: 256,
            plate: (80, 80, 175, 175),
            elevation: 16.0,
            lights: ring_lights(8, 60.0, 22.5),
        }
    }

    pub fn on_plate(&self, x: f64, y: f64) -> bool {
        let (x0, y0, x1, y1) = self.plate;
        x >= x0 as f64 - 0.5 && x <= x1 as f64 + 0.5 && y >= y0 as f64 - 0.5 && y <= y1 as f64 + 0.5
    }

    /// Ground truth: `true` on plate pixels.
    pub fn plate_mask(&self) -> BinaryGrid {
        let (x0, y0, x1, y1) = self.plate;
        BinaryGrid::from_fn(self.width, self.height, |x, y| {
            (x0..=x1).contains(&x) && (y0..=y1).contains(&y)
        })
    }

    pub fn render_mask(&self, light: [f64; 3]) -> BinaryGrid {
        assert!(light[2] > 0.0, "lights must be above the ground");
        let t = self.elevation / light[2];
        let plate = self.plate_mask();
        BinaryGrid::from_fn(self.width, self.height, |x, y| {
            if plate[(x, y)] {
                return true;
            }
            let hx = x as f64 + light[0] * t;
            let hy = y as f64 + light[1] * t;
            !self.on_plate(hx, hy)
        })
    }

    pub fn render(&self) -> (ShadowStack, LightSet) {
        let ids: Vec<String> = (0..self.lights.len()).map(|i| format!("L{i:02}")).collect();
        let masks = self.lights.iter().map(|&l| self.render_mask(l)).collect();
        let stack = ShadowStack::new(ids.clone(), masks).expect("scene masks share one size");
        let lights = LightSet {
            entries: ids
                .into_iter()
                .zip(&self.lights)
                .map(|(id, &l)| LightEntry {
                    id,
                    light: Light::directional(l).expect("non-zero light"),
                })
                .collect(),
        };
        (stack, lights)
    }

    /// Plate pixels with a 4-neighbour off the plate.
    pub fn boundary_pixels(&self) -> Vec<(usize, usize)> {
        boundary_pixels(&self.plate_mask().map(|&b| b as u32))
    }
}

/// Pixels whose label differs from some in-image 4-neighbour, restricted
/// to pixels with a non-zero label.
pub fn boundary_pixels(labels: &Grid<u32>) -> Vec<(usize, usize)> {
    let (w, h) = labels.dims();
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let l = labels[(x, y)];
            if l == 0 {
                continue;
            }
            let differs = [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)]
                .iter()
                .any(|&(dx, dy)| labels.get(x as isize + dx, y as isize + dy).is_some_and(|&n| n != l));
            if differs {
                out.push((x, y));
            }
        }
    }
    out
}

/// Fraction of `truth` pixels within Chebyshev distance `tol` of a pixel
/// where the label map changes value.
pub fn boundary_recall(labels: &Grid<u32>, truth: &[(usize, usize)], tol: usize) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let (w, h) = labels.dims();
    let mut edge = Grid::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let l = labels[(x, y)];
            edge[(x, y)] = [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)]
                .iter()
                .any(|&(dx, dy)| labels.get(x as isize + dx, y as isize + dy).is_some_and(|&n| n != l));
        }
    }
    let t = tol as isize;
    let hits = truth
        .iter()
        .filter(|&&(x, y)| {
            (-t..=t).any(|dy| (-t..=t).any(|dx| edge.get(x as isize + dx, y as isize + dy) == Some(&true)))
        })
        .count();
    hits as f64 / truth.len() as f64
}
