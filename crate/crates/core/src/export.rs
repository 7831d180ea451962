//! Output files: 16-bit label rasters, JSON sidecars, debug images and the
//! outline point list.

use std::fmt::Write as _;
use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, ImageFormat, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edge_detect::EdgeField;
use crate::grid::Grid;
use crate::outline::OutlinePoints;
use crate::segmentation::SegmentationResult;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("image encoding failed: {0}")]
    Image(#[from] image::ImageError),
    #[error("{0} segments do not fit a 16-bit label image")]
    TooManySegments(usize),
    #[error("json encoding failed: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExportError> {
    fs::write(path, bytes).map_err(|source| ExportError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn encode_png(img: DynamicImage) -> Result<Vec<u8>, ExportError> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// 16-bit grayscale PNG of a raster where 0 is background and `k + 1` is
/// segment `k`.
pub fn label_png(labels: &Grid<u32>) -> Result<Vec<u8>, ExportError> {
    let max = labels.iter().copied().max().unwrap_or(0);
    if max > u16::MAX as u32 {
        return Err(ExportError::TooManySegments(max as usize));
    }
    let data: Vec<u16> = labels.iter().map(|&l| l as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(labels.width() as u32, labels.height() as u32, data).expect("buffer size matches");
    encode_png(DynamicImage::ImageLuma16(buf))
}

/// Decodes a label PNG written by [`label_png`].
pub fn read_label_png(bytes: &[u8]) -> Result<Grid<u32>, ExportError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.into_luma16();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(u32::from).collect();
    Ok(Grid::from_vec(w as usize, h as usize, data).expect("decoded size matches"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentInfo {
    /// Value of this segment in the label raster.
    pub label: u32,
    pub area: f64,
    pub triangles: usize,
    pub pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub width: usize,
    pub height: usize,
    pub kappa: f64,
    pub a_min: f64,
    pub segment_count: usize,
    pub background_pixels: usize,
    pub segments: Vec<SegmentInfo>,
}

impl Sidecar {
    pub fn new(result: &SegmentationResult, labels: &Grid<u32>) -> Self {
        let mut pixels = vec![0usize; result.segment_count + 1];
        for &l in labels.iter() {
            pixels[l as usize] += 1;
        }
        Self {
            width: labels.width(),
            height: labels.height(),
            kappa: result.kappa,
            a_min: result.a_min,
            segment_count: result.segment_count,
            background_pixels: pixels[0],
            segments: (0..result.segment_count)
                .map(|k| SegmentInfo {
                    label: k as u32 + 1,
                    area: result.areas[k],
                    triangles: result.member_counts[k],
                    pixels: pixels[k + 1],
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String, ExportError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Edge strength scaled to 0..=255; invalid pixels are black.
pub fn strength_png(field: &EdgeField) -> Result<Vec<u8>, ExportError> {
    let img = GrayImage::from_fn(field.width() as u32, field.height() as u32, |x, y| {
        let g = field.strength_or_zero(x as isize, y as isize);
        Luma([(g.clamp(0.0, 1.0) * 255.0).round() as u8])
    });
    encode_png(DynamicImage::ImageLuma8(img))
}

/// Direction index times 32; invalid pixels are 255.
pub fn direction_png(field: &EdgeField) -> Result<Vec<u8>, ExportError> {
    let img = GrayImage::from_fn(field.width() as u32, field.height() as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        if field.valid[(x, y)] {
            Luma([field.direction[(x, y)].index() as u8 * 32])
        } else {
            Luma([255])
        }
    });
    encode_png(DynamicImage::ImageLuma8(img))
}

/// One `x y strength` line per outline point.
pub fn outline_text(points: &OutlinePoints) -> String {
    let mut out = String::with_capacity(points.len() * 32);
    for (p, g) in points.points.iter().zip(&points.strength) {
        let _ = writeln!(out, "{:.6} {:.6} {:.6}", p[0], p[1], g);
    }
    out
}

/// Stable pseudo-random colour for a raster label; background is black.
pub fn label_colour(label: u32) -> [u8; 3] {
    if label == 0 {
        return [0, 0, 0];
    }
    let mut h = label.wrapping_mul(0x9E37_79B9) ^ 0x5bd1_e995;
    h ^= h >> 15;
    h = h.wrapping_mul(0x2c1b_3c6d);
    h ^= h >> 12;
    let [a, b, c, _] = h.to_le_bytes();
    [64 + a / 4 * 3, 64 + b / 4 * 3, 64 + c / 4 * 3]
}

/// Segments in false colour with outline points drawn in white.
pub fn overlay_png(labels: &Grid<u32>, outline: &OutlinePoints) -> Result<Vec<u8>, ExportError> {
    let (w, h) = labels.dims();
    let mut img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        Rgb(label_colour(labels[(x as usize, y as usize)]))
    });
    for p in &outline.points {
        let (x, y) = (p[0].round(), p[1].round());
        if x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h {
            img.put_pixel(x as u32, y as u32, Rgb([255, 255, 255]));
        }
    }
    encode_png(DynamicImage::ImageRgb8(img))
}
