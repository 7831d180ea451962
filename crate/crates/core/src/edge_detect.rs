//! Shadow-edge detection by binary template matching.
//!
//! Every pixel of every mask is compared against ten 7×7 templates: fully
//! shadowed, fully lit, and one light-to-shadow step per direction of the
//! 8-neighbourhood. A direction scores high when its step template explains
//! the window much better than the fully-lit template. Scores are averaged
//! over all lights that could plausibly cast a shadow in that direction.
//!
//! Windows are packed into the low 49 bits of a `u64` (bit `7·(dy+3) + (dx+3)`,
//! set = lit), so each L² error on binary data is a single popcount.

use serde::Serialize;

use crate::config::PipelineConfig;
use crate::exec::Exec;
use crate::grid::{BinaryGrid, Grid};
use crate::mask_io::{Light, LightSet, ShadowStack};

pub const TEMPLATE_SIZE: usize = 7;
pub const TEMPLATE_RADIUS: isize = 3;
pub const TEMPLATE_PIXELS: u32 = 49;
const FULL_WINDOW: u64 = (1u64 << 49) - 1;
/// Offset that puts the centre pixel of a step template on the shadow side.
const STEP_BIAS: f64 = -0.25;

/// The eight unit steps of the pixel neighbourhood, in image axes
/// (x right, y down).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Direction8 {
    E,
    NE,
    N,
    NW,
    W,
    SW,
    S,
    SE,
}

impl Direction8 {
    /// Fixed order, also used to break ties in argmax.
    pub const ALL: [Direction8; 8] = [
        Direction8::E,
        Direction8::NE,
        Direction8::N,
        Direction8::NW,
        Direction8::W,
        Direction8::SW,
        Direction8::S,
        Direction8::SE,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    pub fn offset(self) -> (isize, isize) {
        match self {
            Direction8::E => (1, 0),
            Direction8::NE => (1, -1),
            Direction8::N => (0, -1),
            Direction8::NW => (-1, -1),
            Direction8::W => (-1, 0),
            Direction8::SW => (-1, 1),
            Direction8::S => (0, 1),
            Direction8::SE => (1, 1),
        }
    }

    pub fn unit(self) -> [f64; 2] {
        let (dx, dy) = self.offset();
        let n = ((dx * dx + dy * dy) as f64).sqrt();
        [dx as f64 / n, dy as f64 / n]
    }

    pub fn opposite(self) -> Self {
        Self::ALL[(self.index() + 4) % 8]
    }
}

/// A 7×7 binary template packed like a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Template(pub u64);

impl Template {
    pub fn bit(dx: isize, dy: isize) -> u64 {
        debug_assert!(dx.abs() <= TEMPLATE_RADIUS && dy.abs() <= TEMPLATE_RADIUS);
        1u64 << (7 * (dy + TEMPLATE_RADIUS) + (dx + TEMPLATE_RADIUS))
    }

    pub fn is_lit(self, dx: isize, dy: isize) -> bool {
        self.0 & Self::bit(dx, dy) != 0
    }

    pub fn lit_count(self) -> u32 {
        self.0.count_ones()
    }

    /// Number of disagreeing pixels, i.e. the squared L² distance.
    pub fn mismatch(self, window: u64) -> u32 {
        (self.0 ^ window).count_ones()
    }

    pub fn complement(self) -> Self {
        Template(!self.0 & FULL_WINDOW)
    }

    /// Point reflection through the centre pixel.
    pub fn rotated_180(self) -> Self {
        let mut out = 0;
        for dy in -TEMPLATE_RADIUS..=TEMPLATE_RADIUS {
            for dx in -TEMPLATE_RADIUS..=TEMPLATE_RADIUS {
                if self.is_lit(dx, dy) {
                    out |= Self::bit(-dx, -dy);
                }
            }
        }
        Template(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateBank {
    pub fully_shadowed: Template,
    pub fully_lit: Template,
    /// Step templates indexed by [`Direction8::index`]; the direction points
    /// from the lit side into the shadow.
    pub transition: [Template; 8],
}

impl TemplateBank {
    pub fn len(&self) -> usize {
        2 + self.transition.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self, d: Direction8) -> Template {
        self.transition[d.index()]
    }
}

/// Builds the ten templates. Step template `d` is lit exactly where
/// `⟨offset, d̂⟩ < -0.25`.
pub fn build_templates() -> TemplateBank {
    let transition = Direction8::ALL.map(|d| {
        let [ux, uy] = d.unit();
        let mut bits = 0;
        for dy in -TEMPLATE_RADIUS..=TEMPLATE_RADIUS {
            for dx in -TEMPLATE_RADIUS..=TEMPLATE_RADIUS {
                if dx as f64 * ux + dy as f64 * uy < STEP_BIAS {
                    bits |= Template::bit(dx, dy);
                }
            }
        }
        Template(bits)
    });
    TemplateBank {
        fully_shadowed: Template(0),
        fully_lit: Template(FULL_WINDOW),
        transition,
    }
}

/// Mismatch counts of one window against the ten templates (each in 0..=49).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemplateErrors {
    pub e_shadow: u8,
    pub e_lit: u8,
    pub e_dir: [u8; 8],
}

impl TemplateErrors {
    pub fn from_window(window: u64, bank: &TemplateBank) -> Self {
        let lit = window.count_ones() as u8;
        let mut e_dir = [0u8; 8];
        for (e, t) in e_dir.iter_mut().zip(&bank.transition) {
            *e = t.mismatch(window) as u8;
        }
        Self {
            e_shadow: lit,
            e_lit: TEMPLATE_PIXELS as u8 - lit,
            e_dir,
        }
    }

    pub fn dir(&self, d: Direction8) -> u8 {
        self.e_dir[d.index()]
    }
}

/// Per-row 7-bit codes of each pixel's horizontal neighbourhood, with the
/// image edge replicated.
struct RowCodes {
    codes: Grid<u8>,
}

impl RowCodes {
    fn new(mask: &BinaryGrid) -> Self {
        let (w, h) = mask.dims();
        let mut codes = Grid::filled(w, h, 0u8);
        for y in 0..h {
            let row = mask.row(y);
            for x in 0..w {
                let mut code = 0u8;
                for k in 0..TEMPLATE_SIZE {
                    let xx = (x as isize + k as isize - TEMPLATE_RADIUS).clamp(0, w as isize - 1);
                    if row[xx as usize] {
                        code |= 1 << k;
                    }
                }
                codes[(x, y)] = code;
            }
        }
        Self { codes }
    }

    fn window(&self, x: usize, y: usize) -> u64 {
        let h = self.codes.height() as isize;
        let mut win = 0u64;
        for r in 0..TEMPLATE_SIZE {
            let yy = (y as isize + r as isize - TEMPLATE_RADIUS).clamp(0, h - 1) as usize;
            win |= (self.codes[(x, yy)] as u64) << (7 * r);
        }
        win
    }
}

/// Packs the 7×7 window centred on `(x, y)`, replicating edge pixels.
pub fn window_at(mask: &BinaryGrid, x: usize, y: usize) -> u64 {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let mut win = 0;
    for dy in -TEMPLATE_RADIUS..=TEMPLATE_RADIUS {
        for dx in -TEMPLATE_RADIUS..=TEMPLATE_RADIUS {
            let xx = (x as isize + dx).clamp(0, w - 1) as usize;
            let yy = (y as isize + dy).clamp(0, h - 1) as usize;
            if mask[(xx, yy)] {
                win |= Template::bit(dx, dy);
            }
        }
    }
    win
}

pub fn template_errors(mask: &BinaryGrid, x: usize, y: usize, bank: &TemplateBank) -> TemplateErrors {
    TemplateErrors::from_window(window_at(mask, x, y), bank)
}

/// Whether the window is shadowed enough to be ignored for this light.
fn mostly_shadowed(errors: &TemplateErrors, cfg: &PipelineConfig) -> bool {
    let shadowed = (TEMPLATE_PIXELS - errors.e_shadow as u32) as f64;
    shadowed >= cfg.shadow_reject_frac * TEMPLATE_PIXELS as f64
}

fn consistent(shadow_dir: Option<[f64; 2]>, d: Direction8, cos_min: f64) -> bool {
    match shadow_dir {
        None => true,
        Some(s) => {
            let u = d.unit();
            u[0] * s[0] + u[1] * s[1] >= cos_min
        }
    }
}

/// Binary weight of direction `d` for one light at pixel `(x, y)`.
///
/// Zero when the window is (nearly) fully shadowed, or when a step in
/// direction `d` points against the direction in which this light casts
/// shadows. Lights without a usable image-plane direction constrain nothing.
pub fn direction_weight(
    light: &Light,
    x: usize,
    y: usize,
    d: Direction8,
    errors: &TemplateErrors,
    cfg: &PipelineConfig,
) -> bool {
    !mostly_shadowed(errors, cfg) && consistent(light.shadow_direction(x as f64, y as f64), d, cfg.omega_cos_min)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Score of every direction at one pixel plus whether any light counted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionScores {
    pub score: [f64; 8],
    pub weighted: [bool; 8],
}

/// Weighted mean over lights of `σ((E_lit − E_d) / β)`, per direction.
///
/// Directions without any contributing light score 0 and are flagged
/// unweighted. Per-light terms are summed in sorted order so the result
/// does not depend on light order.
pub fn edge_score(errors: &[TemplateErrors], weights: &[[bool; 8]], beta: f64) -> DirectionScores {
    assert_eq!(errors.len(), weights.len());
    let mut gaps: Vec<i32> = Vec::with_capacity(errors.len());
    let mut out = DirectionScores {
        score: [0.0; 8],
        weighted: [false; 8],
    };
    for d in 0..8 {
        gaps.clear();
        gaps.extend(
            errors
                .iter()
                .zip(weights)
                .filter(|(_, w)| w[d])
                .map(|(e, _)| e.e_lit as i32 - e.e_dir[d] as i32),
        );
        if gaps.is_empty() {
            continue;
        }
        gaps.sort_unstable();
        let sum: f64 = gaps.iter().map(|&g| sigmoid(g as f64 / beta)).sum();
        out.score[d] = sum / gaps.len() as f64;
        out.weighted[d] = true;
    }
    out
}

/// Per-pixel edge strength and direction.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField {
    pub strength: Grid<f64>,
    pub direction: Grid<Direction8>,
    /// False where no light contributed to any direction.
    pub valid: Grid<bool>,
}

impl EdgeField {
    pub fn width(&self) -> usize {
        self.strength.width()
    }

    pub fn height(&self) -> usize {
        self.strength.height()
    }

    /// Strength at signed coordinates; invalid or out-of-image pixels read 0.
    pub fn strength_or_zero(&self, x: isize, y: isize) -> f64 {
        match (self.strength.get(x, y), self.valid.get(x, y)) {
            (Some(&g), Some(&true)) => g,
            _ => 0.0,
        }
    }
}

/// Argmax over directions with ties going to the earlier direction.
pub fn strongest(scores: &[f64; 8]) -> (Direction8, f64) {
    let mut best = 0;
    for d in 1..8 {
        if scores[d] > scores[best] {
            best = d;
        }
    }
    (Direction8::from_index(best), scores[best])
}

/// Precomputed per-light state for the field computation.
struct LightPlan<'a> {
    codes: RowCodes,
    light: &'a Light,
    /// Direction acceptance for lights whose shadow direction is the same at
    /// every pixel.
    fixed: Option<[bool; 8]>,
}

pub fn edge_field(stack: &ShadowStack, lights: &LightSet, cfg: &PipelineConfig) -> EdgeField {
    edge_field_with(stack, lights, cfg, Exec::default())
}

pub fn edge_field_with(stack: &ShadowStack, lights: &LightSet, cfg: &PipelineConfig, exec: Exec) -> EdgeField {
    assert_eq!(stack.len(), lights.len(), "one light entry per mask");
    let (w, h) = (stack.width(), stack.height());
    let bank = build_templates();
    let plans: Vec<LightPlan> = stack
        .masks()
        .iter()
        .zip(&lights.entries)
        .map(|(mask, entry)| {
            let fixed = match entry.light {
                Light::Directional(_) => {
                    let s = entry.light.shadow_direction(0.0, 0.0);
                    Some(Direction8::ALL.map(|d| consistent(s, d, cfg.omega_cos_min)))
                }
                Light::Point(_) => None,
            };
            LightPlan {
                codes: RowCodes::new(mask),
                light: &entry.light,
                fixed,
            }
        })
        .collect();

    let mut pixels = vec![(0.0f64, Direction8::E, false); w * h];
    exec.for_each_row(&mut pixels, w, |y, row| {
        let mut errors = Vec::with_capacity(plans.len());
        let mut weights = Vec::with_capacity(plans.len());
        for (x, out) in row.iter_mut().enumerate() {
            errors.clear();
            weights.clear();
            for plan in &plans {
                let e = TemplateErrors::from_window(plan.codes.window(x, y), &bank);
                let accept = if mostly_shadowed(&e, cfg) {
                    [false; 8]
                } else if let Some(fixed) = plan.fixed {
                    fixed
                } else {
                    let s = plan.light.shadow_direction(x as f64, y as f64);
                    Direction8::ALL.map(|d| consistent(s, d, cfg.omega_cos_min))
                };
                errors.push(e);
                weights.push(accept);
            }
            let scores = edge_score(&errors, &weights, cfg.beta);
            let (dir, g) = strongest(&scores.score);
            *out = (g, dir, scores.weighted.iter().any(|&v| v));
        }
    });

    let strength = Grid::from_vec(w, h, pixels.iter().map(|p| p.0).collect()).unwrap();
    let direction = Grid::from_vec(w, h, pixels.iter().map(|p| p.1).collect()).unwrap();
    let valid = Grid::from_vec(w, h, pixels.iter().map(|p| p.2).collect()).unwrap();
    EdgeField {
        strength,
        direction,
        valid,
    }
}
