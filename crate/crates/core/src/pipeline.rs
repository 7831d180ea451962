//! End-to-end composition of the stages, with per-stage timings and the
//! on-disk project layout shared by the CLI and the service.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::edge_detect::{edge_field_with, EdgeField};
use crate::exec::Exec;
use crate::export::{self, Sidecar};
use crate::grid::Grid;
use crate::mask_io::{load_stack, LightSet, ShadowStack};
use crate::outline::{extract_outline, OutlinePoints};
use crate::segmentation::{rasterize_labels_with, SegmentationResult, Segmenter};
use crate::triangulation::{dedup_points, delaunay, prune_background, Point, Triangulation};

pub const LABELS_FILE: &str = "labels.png";
pub const SIDECAR_FILE: &str = "segments.json";
pub const OVERLAY_FILE: &str = "overlay.png";
pub const OUTLINE_FILE: &str = "outline.txt";
pub const MESH_FILE: &str = "mesh.off";
pub const STRENGTH_FILE: &str = "strength.png";
pub const DIRECTION_FILE: &str = "direction.png";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    MaskIo,
    EdgeDetect,
    Outline,
    Triangulation,
    Segmentation,
    Rasterize,
    Export,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::MaskIo => "mask_io",
            Stage::EdgeDetect => "edge_detect",
            Stage::Outline => "outline",
            Stage::Triangulation => "triangulation",
            Stage::Segmentation => "segmentation",
            Stage::Rasterize => "rasterize",
            Stage::Export => "export",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("stage {stage}: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl PipelineError {
    pub fn new(stage: Stage, source: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        Self {
            stage,
            source: source.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub masks: usize,
    pub outline_points: usize,
    pub vertices: usize,
    pub triangles: usize,
    pub dual_edges: usize,
    pub segments: usize,
}

/// Everything produced by one in-memory run.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub field: EdgeField,
    pub outline: OutlinePoints,
    pub triangulation: Triangulation,
    pub segmenter: Segmenter,
    pub segmentation: SegmentationResult,
    pub labels: Grid<u32>,
    pub timings: Vec<StageTiming>,
    pub counts: Counts,
}

/// Corners of the image rectangle, added to the outline points so that the
/// triangulation covers the whole frame.
pub fn frame_corners(width: usize, height: usize) -> [Point; 4] {
    let (x1, y1) = (width as f64 - 0.5, height as f64 - 0.5);
    [[-0.5, -0.5], [x1, -0.5], [x1, y1], [-0.5, y1]]
}

struct Clock(Vec<StageTiming>);

impl Clock {
    fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push(StageTiming {
            stage,
            ms: start.elapsed().as_secs_f64() * 1e3,
        });
        out
    }
}

/// Runs edge detection through rasterization on an in-memory stack.
pub fn run(
    stack: &ShadowStack,
    lights: &LightSet,
    cfg: &PipelineConfig,
    exec: Exec,
) -> Result<PipelineOutput, PipelineError> {
    cfg.validate().map_err(|e| PipelineError::new(Stage::Config, e))?;
    if stack.len() != lights.len() {
        return Err(PipelineError::new(
            Stage::EdgeDetect,
            format!("{} masks but {} lights", stack.len(), lights.len()),
        ));
    }
    let (w, h) = (stack.width(), stack.height());
    if let Some(mask) = &cfg.foreground_mask {
        if mask.dims() != (w, h) {
            return Err(PipelineError::new(
                Stage::Triangulation,
                format!("foreground mask is {:?}, masks are {:?}", mask.dims(), (w, h)),
            ));
        }
    }

    let mut clock = Clock(Vec::new());
    let field = clock.time(Stage::EdgeDetect, || edge_field_with(stack, lights, cfg, exec));
    let outline = clock.time(Stage::Outline, || extract_outline(&field, cfg.t_low, cfg.t_high, exec));
    let triangulation = clock.time(Stage::Triangulation, || {
        let mut points = outline.points.clone();
        points.extend(frame_corners(w, h));
        prune_background(&delaunay(&dedup_points(&points)), cfg)
    });
    let (segmenter, segmentation) = clock.time(Stage::Segmentation, || {
        let s = Segmenter::new(&triangulation);
        let r = s.segment(cfg.kappa, cfg.a_min);
        (s, r)
    });
    let labels = clock.time(Stage::Rasterize, || {
        rasterize_labels_with(&triangulation, &segmentation, w, h, exec)
    });

    let counts = Counts {
        masks: stack.len(),
        outline_points: outline.len(),
        vertices: triangulation.vertices.len(),
        triangles: triangulation.len(),
        dual_edges: segmenter.edges().len(),
        segments: segmentation.segment_count,
    };
    Ok(PipelineOutput {
        field,
        outline,
        triangulation,
        segmenter,
        segmentation,
        labels,
        timings: clock.0,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub mask_dir: PathBuf,
    pub lights: PathBuf,
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub labels: PathBuf,
    pub sidecar: PathBuf,
    pub overlay: PathBuf,
    pub outline: PathBuf,
    pub mesh: PathBuf,
    pub strength: PathBuf,
    pub direction: PathBuf,
    pub manifest: PathBuf,
}

impl Outputs {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            labels: dir.join(LABELS_FILE),
            sidecar: dir.join(SIDECAR_FILE),
            overlay: dir.join(OVERLAY_FILE),
            outline: dir.join(OUTLINE_FILE),
            mesh: dir.join(MESH_FILE),
            strength: dir.join(STRENGTH_FILE),
            direction: dir.join(DIRECTION_FILE),
            manifest: dir.join(MANIFEST_FILE),
        }
    }

    pub fn all(&self) -> [&Path; 8] {
        [
            &self.labels,
            &self.sidecar,
            &self.overlay,
            &self.outline,
            &self.mesh,
            &self.strength,
            &self.direction,
            &self.manifest,
        ]
    }
}

/// Record of one run, stored as `manifest.json` in the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub inputs: Inputs,
    pub config: PipelineConfig,
    pub width: usize,
    pub height: usize,
    pub timings: Vec<StageTiming>,
    pub counts: Counts,
    pub outputs: Outputs,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn total_ms(&self) -> f64 {
        self.timings.iter().map(|t| t.ms).sum()
    }
}

/// Writes all output files of `out` into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, out: &PipelineOutput) -> Result<Outputs, export::ExportError> {
    fs::create_dir_all(dir).map_err(|source| export::ExportError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let paths = Outputs::in_dir(dir);
    export::write_file(&paths.labels, &export::label_png(&out.labels)?)?;
    let sidecar = Sidecar::new(&out.segmentation, &out.labels).to_json()?;
    export::write_file(&paths.sidecar, sidecar.as_bytes())?;
    export::write_file(&paths.overlay, &export::overlay_png(&out.labels, &out.outline)?)?;
    export::write_file(&paths.outline, export::outline_text(&out.outline).as_bytes())?;
    export::write_file(&paths.mesh, out.triangulation.to_off().as_bytes())?;
    export::write_file(&paths.strength, &export::strength_png(&out.field)?)?;
    export::write_file(&paths.direction, &export::direction_png(&out.field)?)?;
    Ok(paths)
}

/// Loads the inputs, runs every stage and writes the project directory.
pub fn run_project(
    inputs: Inputs,
    cfg: &PipelineConfig,
    out_dir: &Path,
    exec: Exec,
) -> Result<RunManifest, PipelineError> {
    let start = Instant::now();
    let (stack, lights) =
        load_stack(&inputs.mask_dir, &inputs.lights).map_err(|e| PipelineError::new(Stage::MaskIo, e))?;
    let load_ms = start.elapsed().as_secs_f64() * 1e3;
    let out = run(&stack, &lights, cfg, exec)?;

    let start = Instant::now();
    let outputs = write_outputs(out_dir, &out).map_err(|e| PipelineError::new(Stage::Export, e))?;
    let mut timings = vec![StageTiming {
        stage: Stage::MaskIo,
        ms: load_ms,
    }];
    timings.extend(out.timings);
    let mut manifest = RunManifest {
        inputs,
        config: cfg.clone(),
        width: stack.width(),
        height: stack.height(),
        timings,
        counts: out.counts,
        outputs,
    };
    manifest.timings.push(StageTiming {
        stage: Stage::Export,
        ms: start.elapsed().as_secs_f64() * 1e3,
    });
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| PipelineError::new(Stage::Export, e))?;
    export::write_file(&manifest.outputs.manifest, json.as_bytes())
        .map_err(|e| PipelineError::new(Stage::Export, e))?;
    Ok(manifest)
}
