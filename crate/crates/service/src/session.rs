//! Editable segmentation over a project written by `shadowseg run`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use shadowseg_core::export::{self, ExportError, Sidecar};
use shadowseg_core::pipeline::{RunManifest, MANIFEST_FILE, MESH_FILE};
use shadowseg_core::segmentation::{rasterize_labels_with, SegmentationResult};
use shadowseg_core::triangulation::Triangulation;
use shadowseg_core::{Exec, Grid, Segmenter};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no project loaded")]
    NotLoaded,
    #[error("unknown segment {0}")]
    UnknownSegment(u32),
    #[error("unknown dual edge {0}")]
    UnknownEdge(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot load {path}: {message}")]
    Load { path: PathBuf, message: String },
    #[error("stale revision {requested}, current is {current}")]
    Stale { requested: u64, current: u64 },
    #[error(transparent)]
    Export(#[from] ExportError),
}

/// Segment count and measures of the current result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub revision: u64,
    pub kappa: f64,
    pub a_min: f64,
    pub segment_count: usize,
    pub areas: Vec<f64>,
    pub member_counts: Vec<usize>,
}

/// Summary plus the label (1-based, as in the raster) of every triangle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segmentation {
    #[serde(flatten)]
    pub summary: Summary,
    pub labels: Vec<u32>,
    pub barriers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshEdge {
    pub id: usize,
    pub t1: usize,
    pub t2: usize,
    pub vertices: [usize; 2],
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mesh {
    pub width: usize,
    pub height: usize,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub dual_edges: Vec<MeshEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Status {
    pub loaded: bool,
    pub revision: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub project: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triangles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_edges: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merges: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barriers: Option<usize>,
}

/// One loaded project. The triangulation and the sorted dual edges are
/// fixed at load; only parameters, edits and the result change.
#[derive(Debug, Clone)]
pub struct Session {
    project: PathBuf,
    width: usize,
    height: usize,
    tri: Triangulation,
    segmenter: Segmenter,
    kappa: f64,
    a_min: f64,
    /// Manual merges as representative triangle pairs.
    merges: Vec<(usize, usize)>,
    barriers: Vec<bool>,
    result: SegmentationResult,
    revision: u64,
}

fn check_params(kappa: f64, a_min: f64) -> Result<(), SessionError> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(SessionError::InvalidParameter(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    if !(a_min >= 0.0 && a_min.is_finite()) {
        return Err(SessionError::InvalidParameter(format!(
            "a_min must be non-negative, got {a_min}"
        )));
    }
    Ok(())
}

impl Session {
    /// Loads `manifest.json` and `mesh.off` from a project directory.
    pub fn load(project: &Path, revision: u64) -> Result<Self, SessionError> {
        let fail = |path: &Path, message: String| SessionError::Load {
            path: path.to_path_buf(),
            message,
        };
        let manifest_path = project.join(MANIFEST_FILE);
        let manifest = RunManifest::load(&manifest_path).map_err(|e| fail(&manifest_path, e.to_string()))?;
        let mesh_path = project.join(MESH_FILE);
        let text = fs::read_to_string(&mesh_path).map_err(|e| fail(&mesh_path, e.to_string()))?;
        let tri = Triangulation::from_off(&text).map_err(|e| fail(&mesh_path, e.to_string()))?;
        Ok(Self::new(
            project.to_path_buf(),
            tri,
            manifest.width,
            manifest.height,
            manifest.config.kappa,
            manifest.config.a_min,
            revision,
        ))
    }

    pub fn new(
        project: PathBuf,
        tri: Triangulation,
        width: usize,
        height: usize,
        kappa: f64,
        a_min: f64,
        revision: u64,
    ) -> Self {
        let segmenter = Segmenter::new(&tri);
        let barriers = vec![false; segmenter.edges().len()];
        let result = segmenter.segment(kappa, a_min);
        Self {
            project,
            width,
            height,
            tri,
            segmenter,
            kappa,
            a_min,
            merges: Vec::new(),
            barriers,
            result,
            revision,
        }
    }

    fn recompute(&mut self) {
        let auto = self
            .segmenter
            .segment_with(self.kappa, self.a_min, Some(&self.barriers), None);
        self.result = if self.merges.is_empty() {
            auto
        } else {
            auto.merged(&self.tri, &self.merges)
        };
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn triangulation(&self) -> &Triangulation {
        &self.tri
    }

    pub fn result(&self) -> &SegmentationResult {
        &self.result
    }

    pub fn barriers(&self) -> &[bool] {
        &self.barriers
    }

    pub fn resegment(&mut self, kappa: f64, a_min: f64) -> Result<Summary, SessionError> {
        check_params(kappa, a_min)?;
        self.kappa = kappa;
        self.a_min = a_min;
        self.recompute();
        self.revision += 1;
        Ok(self.summary())
    }

    /// Joins segments `a` and `b` (raster labels, starting at 1). Merging a
    /// segment with itself changes nothing.
    pub fn merge(&mut self, a: u32, b: u32) -> Result<u64, SessionError> {
        let count = self.result.segment_count as u32;
        for id in [a, b] {
            if id == 0 || id > count {
                return Err(SessionError::UnknownSegment(id));
            }
        }
        if a == b {
            return Ok(self.revision);
        }
        let reps = self.result.representatives();
        self.merges.push((reps[a as usize - 1], reps[b as usize - 1]));
        self.recompute();
        self.revision += 1;
        Ok(self.revision)
    }

    /// Flips the barrier flag of a dual edge and returns the new flag.
    pub fn toggle_barrier(&mut self, edge: usize) -> Result<bool, SessionError> {
        let flag = self.barriers.get_mut(edge).ok_or(SessionError::UnknownEdge(edge))?;
        *flag = !*flag;
        let now = *flag;
        self.recompute();
        self.revision += 1;
        Ok(now)
    }

    pub fn summary(&self) -> Summary {
        Summary {
            revision: self.revision,
            kappa: self.kappa,
            a_min: self.a_min,
            segment_count: self.result.segment_count,
            areas: self.result.areas.clone(),
            member_counts: self.result.member_counts.clone(),
        }
    }

    pub fn segmentation(&self) -> Segmentation {
        Segmentation {
            summary: self.summary(),
            labels: self.result.labels.iter().map(|l| l + 1).collect(),
            barriers: (0..self.barriers.len()).filter(|&e| self.barriers[e]).collect(),
        }
    }

    pub fn mesh(&self) -> Mesh {
        Mesh {
            width: self.width,
            height: self.height,
            vertices: self.tri.vertices.clone(),
            triangles: self.tri.triangles.clone(),
            dual_edges: self
                .segmenter
                .edges()
                .iter()
                .enumerate()
                .map(|(id, e)| MeshEdge {
                    id,
                    t1: e.t1,
                    t2: e.t2,
                    vertices: [e.edge.0, e.edge.1],
                    length: e.length,
                })
                .collect(),
        }
    }

    pub fn status(&self) -> Status {
        Status {
            loaded: true,
            revision: self.revision,
            project: Some(self.project.clone()),
            width: Some(self.width),
            height: Some(self.height),
            triangles: Some(self.tri.len()),
            dual_edges: Some(self.barriers.len()),
            segment_count: Some(self.result.segment_count),
            kappa: Some(self.kappa),
            a_min: Some(self.a_min),
            merges: Some(self.merges.len()),
            barriers: Some(self.barriers.iter().filter(|&&b| b).count()),
        }
    }

    pub fn label_map(&self) -> Grid<u32> {
        rasterize_labels_with(&self.tri, &self.result, self.width, self.height, Exec::default())
    }

    /// Label PNG in the same encoding as the command-line export.
    pub fn export_png(&self) -> Result<Vec<u8>, SessionError> {
        Ok(export::label_png(&self.label_map())?)
    }

    pub fn export_sidecar(&self) -> Result<String, SessionError> {
        Ok(Sidecar::new(&self.result, &self.label_map()).to_json()?)
    }
}

/// Shared service state: at most one session, plus a revision counter
/// that keeps increasing across project loads.
#[derive(Debug, Default)]
pub struct ServiceState {
    session: Option<Session>,
    revision: u64,
}

impl ServiceState {
    pub fn session(&self) -> Result<&Session, SessionError> {
        self.session.as_ref().ok_or(SessionError::NotLoaded)
    }

    pub fn session_mut(&mut self) -> Result<&mut Session, SessionError> {
        self.session.as_mut().ok_or(SessionError::NotLoaded)
    }

    pub fn revision(&self) -> u64 {
        self.session.as_ref().map_or(self.revision, Session::revision)
    }

    pub fn load(&mut self, project: &Path) -> Result<Status, SessionError> {
        let session = Session::load(project, self.revision() + 1)?;
        self.revision = session.revision();
        let status = session.status();
        self.session = Some(session);
        Ok(status)
    }

    pub fn status(&self) -> Status {
        match &self.session {
            Some(s) => s.status(),
            None => Status {
                loaded: false,
                revision: self.revision,
                project: None,
                width: None,
                height: None,
                triangles: None,
                dual_edges: None,
                segment_count: None,
                kappa: None,
                a_min: None,
                merges: None,
                barriers: None,
            },
        }
    }
}
