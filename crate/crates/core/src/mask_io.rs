//! Shadow-mask stacks, light metadata and their on-disk formats.
//!
//! Masks are 8-bit grayscale PGM (P5) or PNG files, one per light, whose
//! file stem is the light id. Pixels above 127 are lit. The lights file is
//! line oriented:
//!
//! ```text
//! # id kind params...
//! L0 directional -0.5 0.0 0.866
//! L1 point 128.0 -40.0
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::grid::BinaryGrid;

const MASK_EXTENSIONS: [&str; 3] = ["pgm", "png", "pnm"];

#[derive(Debug, Error)]
pub enum MaskIoError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("mask {id} is {found_w}x{found_h}, expected {width}x{height}")]
    DimensionMismatch {
        id: String,
        width: usize,
        height: usize,
        found_w: usize,
        found_h: usize,
    },
    #[error("light {0} has no mask image")]
    MissingMask(String),
    #[error("mask {0} has no entry in the lights file")]
    MissingLight(String),
    #[error("duplicate light id {0}")]
    DuplicateId(String),
    #[error("lights file line {line}: {message}")]
    LightsSyntax { line: usize, message: String },
    #[error("shadow stack needs at least one mask")]
    Empty,
    #[error("{masks} masks but {lights} light entries")]
    CountMismatch { masks: usize, lights: usize },
}

/// Per-light binary masks (`true` = lit) sharing one image size.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowStack {
    width: usize,
    height: usize,
    masks: Vec<BinaryGrid>,
    light_ids: Vec<String>,
}

impl ShadowStack {
    pub fn new(light_ids: Vec<String>, masks: Vec<BinaryGrid>) -> Result<Self, MaskIoError> {
        let first = masks.first().ok_or(MaskIoError::Empty)?;
        let (width, height) = first.dims();
        if light_ids.len() != masks.len() {
            return Err(MaskIoError::CountMismatch {
                masks: masks.len(),
                lights: light_ids.len(),
            });
        }
        let mut seen = HashSet::new();
        for (id, mask) in light_ids.iter().zip(&masks) {
            if !seen.insert(id.as_str()) {
                return Err(MaskIoError::DuplicateId(id.clone()));
            }
            if mask.dims() != (width, height) {
                return Err(MaskIoError::DimensionMismatch {
                    id: id.clone(),
                    width,
                    height,
                    found_w: mask.width(),
                    found_h: mask.height(),
                });
            }
        }
        Ok(Self {
            width,
            height,
            masks,
            light_ids,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn masks(&self) -> &[BinaryGrid] {
        &self.masks
    }

    pub fn light_ids(&self) -> &[String] {
        &self.light_ids
    }

    /// Reorders masks so that new position `i` holds old mask `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            width: self.width,
            height: self.height,
            masks: order.iter().map(|&i| self.masks[i].clone()).collect(),
            light_ids: order.iter().map(|&i| self.light_ids[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Light {
    /// Unit vector pointing from the scene toward the light, in image
    /// axes (x right, y down, z toward the camera).
    Directional([f64; 3]),
    /// Image-plane projection of a point light, in pixel coordinates.
    Point([f64; 2]),
}

impl Light {
    /// Directional light from an arbitrary non-zero vector.
    pub fn directional(v: [f64; 3]) -> Option<Self> {
        let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        if (n2 - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Some(Light::Directional(v));
        }
        let n = n2.sqrt();
        (n > 0.0 && n.is_finite()).then(|| Light::Directional([v[0] / n, v[1] / n, v[2] / n]))
    }

    /// Expected image-plane direction in which shadows are cast at pixel
    /// `(x, y)`. `None` when the projection degenerates (light on the
    /// optical axis, or the pixel sits on the epipole).
    pub fn shadow_direction(&self, x: f64, y: f64) -> Option<[f64; 2]> {
        let (sx, sy) = match *self {
            Light::Directional(l) => (-l[0], -l[1]),
            Light::Point(e) => (x - e[0], y - e[1]),
        };
        let n = sx.hypot(sy);
        (n > 1e-12).then(|| [sx / n, sy / n])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightEntry {
    pub id: String,
    pub light: Light,
}

/// Light geometry, index-aligned with a [`ShadowStack`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LightSet {
    pub entries: Vec<LightEntry>,
}

impl LightSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> &Light {
        &self.entries[i].light
    }

    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            entries: order.iter().map(|&i| self.entries[i].clone()).collect(),
        }
    }
}

/// Parses the line-oriented lights format. Blank lines and `#` comments
/// are skipped; directional vectors are normalized.
pub fn parse_lights(text: &str) -> Result<LightSet, MaskIoError> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: String| MaskIoError::LightsSyntax { line: line_no, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let (id, kind, nums) = match fields.as_slice() {
            [id, kind, rest @ ..] => (*id, *kind, rest),
            _ => return Err(syntax("expected `<id> <kind> <numbers...>`".into())),
        };
        let nums: Vec<f64> = nums
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| syntax(format!("bad number {s:?}: {e}"))))
            .collect::<Result<_, _>>()?;
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(syntax("non-finite coordinate".into()));
        }
        let light = match (kind, nums.as_slice()) {
            ("directional", [x, y, z]) => {
                Light::directional([*x, *y, *z]).ok_or_else(|| syntax("zero-length light direction".into()))?
            }
            ("point", [u, v]) => Light::Point([*u, *v]),
            ("directional", _) => return Err(syntax("directional needs 3 numbers".into())),
            ("point", _) => return Err(syntax("point needs 2 numbers".into())),
            (other, _) => return Err(syntax(format!("unknown light kind {other:?}"))),
        };
        if !seen.insert(id.to_string()) {
            return Err(MaskIoError::DuplicateId(id.to_string()));
        }
        entries.push(LightEntry {
            id: id.to_string(),
            light,
        });
    }
    Ok(LightSet { entries })
}

pub fn format_lights(lights: &LightSet) -> String {
    let mut out = String::new();
    for e in &lights.entries {
        match e.light {
            Light::Directional([x, y, z]) => writeln!(out, "{} directional {x} {y} {z}", e.id),
            Light::Point([u, v]) => writeln!(out, "{} point {u} {v}", e.id),
        }
        .expect("writing to a String cannot fail");
    }
    out
}

/// Decodes an 8-bit grayscale image and binarizes it (`> 127` is lit).
pub fn read_binary_image(path: &Path) -> Result<BinaryGrid, MaskIoError> {
    let img = image::open(path).map_err(|source| MaskIoError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let gray = img.to_luma8();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let data = gray.into_raw().into_iter().map(|v| v > 127).collect();
    Ok(BinaryGrid::from_vec(w, h, data).expect("decoded buffer matches its dimensions"))
}

/// Writes a binary raster as P5 PGM with values 0 and 255.
pub fn write_binary_pgm(path: &Path, grid: &BinaryGrid) -> Result<(), MaskIoError> {
    let mut bytes = format!("P5\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    bytes.extend(grid.iter().map(|&lit| if lit { 255u8 } else { 0 }));
    fs::write(path, bytes).map_err(|source| MaskIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn mask_files(dir: &Path) -> Result<HashMap<String, PathBuf>, MaskIoError> {
    let io_err = |source| MaskIoError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = HashMap::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        let Some(ext) = ext else { continue };
        if !path.is_file() || !MASK_EXTENSIONS.contains(&ext.as_str()) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if files.insert(stem.to_string(), path.clone()).is_some() {
            return Err(MaskIoError::DuplicateId(stem.to_string()));
        }
    }
    Ok(files)
}

/// Loads every mask in `mask_dir`, matching each to a record of
/// `lights_file` by id. The stack follows the lights-file order.
pub fn load_stack(mask_dir: &Path, lights_file: &Path) -> Result<(ShadowStack, LightSet), MaskIoError> {
    let text = fs::read_to_string(lights_file).map_err(|source| MaskIoError::Io {
        path: lights_file.to_path_buf(),
        source,
    })?;
    let lights = parse_lights(&text)?;
    let mut files = mask_files(mask_dir)?;

    let mut ids = Vec::with_capacity(lights.len());
    let mut masks = Vec::with_capacity(lights.len());
    for entry in &lights.entries {
        let path = files
            .remove(&entry.id)
            .ok_or_else(|| MaskIoError::MissingMask(entry.id.clone()))?;
        masks.push(read_binary_image(&path)?);
        ids.push(entry.id.clone());
    }
    if let Some(orphan) = files.into_keys().min() {
        return Err(MaskIoError::MissingLight(orphan));
    }
    let stack = ShadowStack::new(ids, masks)?;
    Ok((stack, lights))
}

/// Writes a stack as `<id>.pgm` files plus a lights file, in a form that
/// [`load_stack`] reads back bit-identically.
pub fn write_stack(
    mask_dir: &Path,
    lights_file: &Path,
    stack: &ShadowStack,
    lights: &LightSet,
) -> Result<(), MaskIoError> {
    if stack.len() != lights.len() {
        return Err(MaskIoError::CountMismatch {
            masks: stack.len(),
            lights: lights.len(),
        });
    }
    fs::create_dir_all(mask_dir).map_err(|source| MaskIoError::Io {
        path: mask_dir.to_path_buf(),
        source,
    })?;
    for (id, mask) in stack.light_ids().iter().zip(stack.masks()) {
        write_binary_pgm(&mask_dir.join(format!("{id}.pgm")), mask)?;
    }
    fs::write(lights_file, format_lights(lights)).map_err(|source| MaskIoError::Io {
        path: lights_file.to_path_buf(),
        source,
    })
}
