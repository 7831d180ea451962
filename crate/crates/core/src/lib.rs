//! Image segmentation from binary shadow masks.
//!
//! The pipeline turns a stack of per-light shadow masks into a segment
//! label map:
//!
//! 1. [`edge_detect`] matches 7×7 templates against every mask and merges
//!    light-to-shadow transitions into an edge strength and direction;
//! 2. [`outline`] thins the field to subpixel outline points;
//! 3. [`triangulation`] connects the points with a Delaunay triangulation;
//! 4. [`segmentation`] fuses triangles into segments by shared side length.
//!
//! [`pipeline`] composes the stages and [`export`] writes the results.

pub mod config;
pub mod edge_detect;
pub mod exec;
pub mod export;
pub mod grid;
pub mod mask_io;
pub mod outline;
pub mod pipeline;
pub mod segmentation;
pub mod synthetic;
pub mod triangulation;

pub use config::{load_config, parse_config, ConfigError, PipelineConfig};
pub use edge_detect::{edge_field, Direction8, EdgeField};
pub use exec::Exec;
pub use grid::{BinaryGrid, Grid};
pub use mask_io::{load_stack, Light, LightEntry, LightSet, MaskIoError, ShadowStack};
pub use outline::OutlinePoints;
pub use pipeline::{run, PipelineError, PipelineOutput, Stage};
pub use segmentation::{rasterize_labels, segment, SegmentationResult, Segmenter};
pub use triangulation::{delaunay, dual_edges, DualEdge, Triangulation};
