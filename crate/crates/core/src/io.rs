//! File formats: JSONL annotations and detections, camera and pose JSON,
//! and binary PGM label maps. Angles are radians.

use std::io::{BufRead, Read, Write};

use nalgebra::{Matrix3, Matrix3x4, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoxRegion, Ellipse, Grid};
use crate::metrics::{DetectionRecord, GtRecord};
use crate::quadric::{CameraMatrix, EllipsoidPose};
use crate::synth::AnnotatedScene;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipseJson {
    pub x: f64,
    pub y: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

impl EllipseJson {
    /// Rejects `theta` outside `(-pi/2, pi/2]` instead of wrapping it.
    pub fn to_ellipse(&self) -> Result<Ellipse<f64>> {
        let half = std::f64::consts::FRAC_PI_2;
        if !(self.theta > -half && self.theta <= half) {
            return Err(Error::InvalidArgument(format!(
                "theta {} outside (-pi/2, pi/2]",
                self.theta
            )));
        }
        Ellipse::new(self.x, self.y, self.a, self.b, self.theta)
    }
}

impl From<&Ellipse<f64>> for EllipseJson {
    fn from(e: &Ellipse<f64>) -> Self {
        Self {
            x: e.x(),
            y: e.y(),
            a: e.a(),
            b: e.b(),
            theta: e.theta(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxJson {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl From<&BoxRegion<f64>> for BoxJson {
    fn from(b: &BoxRegion<f64>) -> Self {
        Self {
            x: b.x(),
            y: b.y(),
            w: b.w(),
            h: b.h(),
        }
    }
}

impl BoxJson {
    pub fn to_box(&self) -> Result<BoxRegion<f64>> {
        BoxRegion::new(self.x, self.y, self.w, self.h)
    }
}

/// One line of an annotation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationLine {
    pub image_id: String,
    pub ellipse: EllipseJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visible_box: Option<BoxJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility_scale: Option<f64>,
}

impl AnnotationLine {
    pub fn to_gt(&self) -> Result<GtRecord> {
        GtRecord::new(
            self.image_id.clone(),
            self.ellipse.to_ellipse()?,
            self.visible_box.map(|b| b.to_box()).transpose()?,
            self.visibility.unwrap_or(1.0),
        )
    }

    pub fn from_gt(g: &GtRecord) -> Self {
        Self {
            image_id: g.image_id.clone(),
            ellipse: (&g.ellipse).into(),
            visible_box: g.visible_box.as_ref().map(Into::into),
            visibility: Some(g.visibility),
            object_id: None,
            depth: None,
            visibility_scale: None,
        }
    }
}

/// One line of a detection file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionLine {
    pub image_id: String,
    pub ellipse: EllipseJson,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<String>,
}

impl DetectionLine {
    pub fn to_detection(&self) -> Result<DetectionRecord> {
        DetectionRecord::new(self.image_id.clone(), self.ellipse.to_ellipse()?, self.score)
    }

    pub fn from_detection(d: &DetectionRecord) -> Self {
        Self {
            image_id: d.image_id.clone(),
            ellipse: (&d.ellipse).into(),
            score: d.score,
            object_id: None,
        }
    }
}

fn at_line<T>(line: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { .. } | Error::Io(_) => e,
        other => Error::Parse {
            line,
            message: other.to_string(),
        },
    })
}

/// Parses every non-blank line; errors carry 1-based line numbers.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::Io(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads and validates annotation lines.
pub fn read_annotations<R: BufRead>(reader: R) -> Result<Vec<GtRecord>> {
    read_annotation_lines(reader)?
        .iter()
        .enumerate()
        .map(|(i, l)| at_line(i + 1, l.to_gt()))
        .collect()
}

pub fn read_annotation_lines<R: BufRead>(reader: R) -> Result<Vec<AnnotationLine>> {
    read_jsonl(reader)
}

pub fn write_annotations<W: Write>(w: W, gts: &[GtRecord]) -> Result<()> {
    let lines: Vec<_> = gts.iter().map(AnnotationLine::from_gt).collect();
    write_jsonl(w, &lines)
}

/// Reads and validates detection lines.
pub fn read_detections<R: BufRead>(reader: R) -> Result<Vec<DetectionRecord>> {
    read_detection_lines(reader)?
        .iter()
        .enumerate()
        .map(|(i, l)| at_line(i + 1, l.to_detection()))
        .collect()
}

pub fn read_detection_lines<R: BufRead>(reader: R) -> Result<Vec<DetectionLine>> {
    read_jsonl(reader)
}

pub fn write_detections<W: Write>(w: W, dets: &[DetectionRecord]) -> Result<()> {
    let lines: Vec<_> = dets.iter().map(DetectionLine::from_detection).collect();
    write_jsonl(w, &lines)
}

/// Annotation lines of a generated scene, in the scene's output order.
pub fn scene_lines(scene: &AnnotatedScene) -> Vec<AnnotationLine> {
    scene
        .objects
        .iter()
        .map(|o| AnnotationLine {
            depth: Some(o.depth),
            visibility_scale: Some(o.visibility_scale),
            ..AnnotationLine::from_gt(&o.gt)
        })
        .collect()
}

/// Camera entry: `p` holds the three rows of the 3x4 matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraJson {
    pub image_id: String,
    pub p: [[f64; 4]; 3],
}

impl CameraJson {
    pub fn to_camera(&self) -> Result<CameraMatrix<f64>> {
        CameraMatrix::new(Matrix3x4::from_fn(|r, c| self.p[r][c]))
    }

    pub fn from_camera(image_id: impl Into<String>, cam: &CameraMatrix<f64>) -> Self {
        let m = cam.matrix();
        Self {
            image_id: image_id.into(),
            p: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])),
        }
    }
}

/// Reads a JSON array of cameras.
pub fn read_cameras<R: Read>(reader: R) -> Result<Vec<(String, CameraMatrix<f64>)>> {
    let entries: Vec<CameraJson> = serde_json::from_reader(reader).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    entries
        .iter()
        .map(|c| Ok((c.image_id.clone(), c.to_camera()?)))
        .collect()
}

/// Ellipsoid pose; `rotation` holds matrix rows, its columns are the axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseJson {
    pub object_id: String,
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
    pub rotation: [[f64; 3]; 3],
}

impl PoseJson {
    pub fn to_pose(&self) -> Result<EllipsoidPose<f64>> {
        EllipsoidPose::from_unsorted(
            Vector3::from(self.center),
            Vector3::from(self.semi_axes),
            Matrix3::from_fn(|r, c| self.rotation[r][c]),
        )
    }

    pub fn from_pose(object_id: impl Into<String>, pose: &EllipsoidPose<f64>) -> Self {
        let r = pose.rotation();
        Self {
            object_id: object_id.into(),
            center: (*pose.center()).into(),
            semi_axes: (*pose.semi_axes()).into(),
            rotation: std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)])),
        }
    }
}

/// Reads a JSON array of poses.
pub fn read_poses<R: Read>(reader: R) -> Result<Vec<(String, EllipsoidPose<f64>)>> {
    let entries: Vec<PoseJson> = serde_json::from_reader(reader).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    entries
        .iter()
        .map(|p| Ok((p.object_id.clone(), p.to_pose()?)))
        .collect()
}

/// Binary (P5) PGM with maxval 255.
pub fn write_pgm<W: Write>(mut w: W, grid: &Grid<u8>) -> Result<()> {
    write!(w, "P5\n{} {}\n255\n", grid.cols(), grid.rows())?;
    w.write_all(grid.as_slice())?;
    Ok(())
}

/// Reads a binary PGM (8-bit, `#` comments allowed in the header).
pub fn read_pgm<R: Read>(mut r: R) -> Result<Grid<u8>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let bad = |m: &str| Error::Parse {
        line: 1,
        message: format!("PGM: {m}"),
    };
    let mut pos = 0;
    let mut fields = Vec::new();
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(bad("only binary P5 files are supported"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("invalid header number"));
    let (cols, rows, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit maxval is supported"));
    }
    // exactly one whitespace byte separates the header from the data
    pos += 1;
    let n = cols * rows;
    if bytes.len() < pos + n {
        return Err(bad("truncated pixel data"));
    }
    Grid::from_vec(cols, rows, bytes[pos..pos + n].to_vec())
}
