//! Scene ingestion: Wavefront OBJ meshes and the JSON camera pose document.
//!
//! The pose document is a JSON array of records:
//!
//! ```json
//! [
//!   {"image_id": "IMG_0001", "position": [0.0, 0.0, 3.0], "view_dir": [0.0, 0.0, 1.0]},
//!   {"image_id": "IMG_0002", "position": [1.0, 0.0, 3.0],
//!    "rotation": [1, 0, 0, 0, 1, 0, 0, 0, 1], "image_path": "img/IMG_0002.jpg"}
//! ]
//! ```
//!
//! Each record carries exactly one of `view_dir` or `rotation`. `rotation` is
//! the camera-to-world matrix, row-major, with the optical axis along camera
//! +Z, so the view direction is its third column. Units are meters.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{MeshError, Ray, TriangleMesh, Vec3};

/// Maximum deviation of `R·Rᵀ` from identity (and of `det R` from 1).
pub const ROTATION_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("OBJ line {line}: {message}")]
    Obj { line: usize, message: String },
    #[error("OBJ line {line}: face references vertex {index}, but only {vertex_count} vertices are defined")]
    ObjIndex {
        line: usize,
        index: i64,
        vertex_count: usize,
    },
    #[error("mesh has no faces ({dropped} degenerate face(s) dropped)")]
    NoFaces { dropped: usize },
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("pose document: {0}")]
    PoseSyntax(#[from] serde_json::Error),
    #[error("pose record {index} ({image_id:?}): {message}")]
    PoseRecord {
        index: usize,
        image_id: String,
        message: String,
    },
    #[error("pose records {first} and {second} share image_id {image_id:?}")]
    DuplicateImageId {
        image_id: String,
        first: usize,
        second: usize,
    },
    #[error("scene has no cameras")]
    NoCameras,
}

/// Counters collected while reading an OBJ file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ObjStats {
    pub vertices: usize,
    pub polygons: usize,
    pub triangles: usize,
    pub degenerate_dropped: usize,
    pub ignored_directives: usize,
}

#[derive(Debug, Clone)]
pub struct ParsedMesh {
    pub mesh: TriangleMesh,
    pub stats: ObjStats,
}

/// Parses the ASCII OBJ subset `v x y z` / `f i j k [l ...]`.
///
/// Polygons are fan-triangulated as `(v0, vi, vi+1)`. Texture and normal
/// references (`i/j/k`, `i//k`) and negative (relative) indices are accepted.
/// Other directives are counted and skipped.
pub fn parse_mesh_obj(bytes: &[u8]) -> Result<ParsedMesh, IngestError> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut stats = ObjStats::default();

    for (idx, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = idx + 1;
        let obj_err = |message: String| IngestError::Obj { line, message };
        let text = std::str::from_utf8(raw).map_err(|_| obj_err("invalid UTF-8".into()))?;
        let text = text.split('#').next().unwrap_or("").trim();
        let mut tokens = text.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };

        match keyword {
            "v" => {
                let coords: Vec<f64> = tokens
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| obj_err(format!("invalid vertex coordinate {t:?}")))
                    })
                    .collect::<Result<_, _>>()?;
                // x y z, optionally followed by w or r g b.
                if !matches!(coords.len(), 3 | 4 | 6 | 7) {
                    return Err(obj_err(format!(
                        "vertex needs 3 coordinates, got {}",
                        coords.len()
                    )));
                }
                let v = Vec3::new(coords[0], coords[1], coords[2]);
                if !v.is_finite() {
                    return Err(obj_err("vertex coordinate is not finite".into()));
                }
                vertices.push(v);
            }
            "f" => {
                let corners: Vec<usize> = tokens
                    .map(|t| resolve_index(t, vertices.len(), line))
                    .collect::<Result<_, _>>()?;
                if corners.len() < 3 {
                    return Err(obj_err(format!(
                        "face needs at least 3 vertices, got {}",
                        corners.len()
                    )));
                }
                stats.polygons += 1;
                for i in 1..corners.len() - 1 {
                    faces.push([corners[0], corners[i], corners[i + 1]]);
                }
            }
            _ => stats.ignored_directives += 1,
        }
    }

    if stats.ignored_directives > 0 {
        log::warn!(
            "ignored {} unsupported OBJ directive(s)",
            stats.ignored_directives
        );
    }
    stats.vertices = vertices.len();
    let mesh = TriangleMesh::new(vertices, faces)?;
    stats.degenerate_dropped = mesh.dropped_degenerate();
    stats.triangles = mesh.triangle_count();
    if mesh.is_empty() {
        return Err(IngestError::NoFaces {
            dropped: stats.degenerate_dropped,
        });
    }
    Ok(ParsedMesh { mesh, stats })
}

fn resolve_index(token: &str, vertex_count: usize, line: usize) -> Result<usize, IngestError> {
    let first = token.split('/').next().unwrap_or("");
    let raw: i64 = first.parse().map_err(|_| IngestError::Obj {
        line,
        message: format!("invalid face index {token:?}"),
    })?;
    let out_of_range = || IngestError::ObjIndex {
        line,
        index: raw,
        vertex_count,
    };
    let resolved = match raw {
        0 => return Err(out_of_range()),
        r if r > 0 => (r - 1) as usize,
        r => {
            let back = r.unsigned_abs() as usize;
            vertex_count.checked_sub(back).ok_or_else(out_of_range)?
        }
    };
    if resolved >= vertex_count {
        return Err(out_of_range());
    }
    Ok(resolved)
}

/// Writes a mesh as OBJ text (one `v` per vertex, one `f` per face).
pub fn write_mesh_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        out.push_str(&format!("v {:?} {:?} {:?}\n", v.x, v.y, v.z));
    }
    for f in mesh.faces() {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    out
}

/// A camera from the SfM solution: where it was and where it looked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub image_id: String,
    /// Camera center (m).
    pub position: Vec3,
    /// Unit optical axis in world coordinates.
    pub view_dir: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
}

impl CameraPose {
    pub fn ray(&self) -> Ray {
        Ray::towards(self.position, self.view_dir).expect("pose view_dir is validated at load")
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRecord {
    image_id: String,
    position: [f64; 3],
    #[serde(default)]
    view_dir: Option<[f64; 3]>,
    #[serde(default)]
    rotation: Option<Vec<f64>>,
    #[serde(default)]
    image_path: Option<String>,
}

/// Parses the pose document. Directions are normalized; duplicate ids,
/// zero-length directions and non-orthonormal rotations are rejected.
pub fn parse_poses(bytes: &[u8]) -> Result<Vec<CameraPose>, IngestError> {
    let records: Vec<PoseRecord> = serde_json::from_slice(bytes)?;
    let mut seen: HashMap<String, usize> = HashMap::with_capacity(records.len());
    let mut poses = Vec::with_capacity(records.len());

    for (index, rec) in records.into_iter().enumerate() {
        let fail = |message: String| IngestError::PoseRecord {
            index,
            image_id: rec.image_id.clone(),
            message,
        };
        if rec.image_id.trim().is_empty() {
            return Err(fail("image_id is empty".into()));
        }
        if let Some(&first) = seen.get(&rec.image_id) {
            return Err(IngestError::DuplicateImageId {
                image_id: rec.image_id,
                first,
                second: index,
            });
        }
        let position = Vec3::from(rec.position);
        if !position.is_finite() {
            return Err(fail("position is not finite".into()));
        }

        let raw_dir = match (&rec.view_dir, &rec.rotation) {
            (Some(d), None) => Vec3::from(*d),
            (None, Some(r)) => view_dir_from_rotation(r).map_err(fail)?,
            (Some(_), Some(_)) => {
                return Err(fail(
                    "give exactly one of view_dir or rotation, not both".into(),
                ))
            }
            (None, None) => return Err(fail("missing view_dir or rotation".into())),
        };
        let view_dir = normalize_direction(raw_dir)
            .ok_or_else(|| fail("view direction has zero length or is not finite".into()))?;

        seen.insert(rec.image_id.clone(), index);
        poses.push(CameraPose {
            image_id: rec.image_id,
            position,
            view_dir,
            image_path: rec.image_path,
        });
    }
    Ok(poses)
}

/// Unit-length within a few ulps is kept as is so serialized poses re-parse
/// bit-identically.
fn normalize_direction(d: Vec3) -> Option<Vec3> {
    let n = d.norm();
    if !(n > 0.0 && n.is_finite()) {
        return None;
    }
    if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
        Some(d)
    } else {
        Some(d / n)
    }
}

fn view_dir_from_rotation(r: &[f64]) -> Result<Vec3, String> {
    if r.len() != 9 {
        return Err(format!("rotation needs 9 numbers, got {}", r.len()));
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err("rotation is not finite".into());
    }
    let m = |i: usize, j: usize| r[3 * i + j];
    let mut worst = 0.0_f64;
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|k| m(i, k) * m(j, k)).sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - expected).abs());
        }
    }
    if worst > ROTATION_TOLERANCE {
        return Err(format!(
            "rotation is not orthonormal (max |R·Rᵀ - I| = {worst:.3e})"
        ));
    }
    let det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
        - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
        + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    if (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(format!("rotation is improper (det = {det:.6})"));
    }
    // R · (0, 0, 1)
    Ok(Vec3::new(m(0, 2), m(1, 2), m(2, 2)))
}

/// Writes poses in the canonical form (explicit `view_dir`).
pub fn serialize_poses(poses: &[CameraPose]) -> String {
    serde_json::to_string_pretty(poses).expect("poses serialize")
}

/// A validated mesh plus its cameras.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: TriangleMesh,
    pub cameras: Vec<CameraPose>,
}

impl Scene {
    pub fn new(mesh: TriangleMesh, cameras: Vec<CameraPose>) -> Result<Self, IngestError> {
        if mesh.is_empty() {
            return Err(IngestError::NoFaces {
                dropped: mesh.dropped_degenerate(),
            });
        }
        if cameras.is_empty() {
            return Err(IngestError::NoCameras);
        }
        Ok(Self { mesh, cameras })
    }

    pub fn load(obj: &[u8], poses: &[u8]) -> Result<Self, IngestError> {
        let mesh = parse_mesh_obj(obj)?.mesh;
        Self::new(mesh, parse_poses(poses)?)
    }

    pub fn camera(&self, image_id: &str) -> Option<&CameraPose> {
        self.cameras.iter().find(|c| c.image_id == image_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI: &str = "v 0 0 0\nv 1 0 0\nv 0 1 0\n";

    #[test]
    fn single_face() {
        let parsed = parse_mesh_obj(format!("{TRI}f 1 2 3\n").as_bytes()).unwrap();
        assert_eq!(parsed.mesh.triangle_count(), 1);
        assert_eq!(parsed.mesh.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn quad_is_fan_triangulated() {
        let obj = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        let parsed = parse_mesh_obj(obj.as_bytes()).unwrap();
        assert_eq!(parsed.mesh.faces(), &[[0, 1, 2], [0, 2, 3]]);
        assert_eq!(parsed.stats.polygons, 1);
        assert_eq!(parsed.stats.triangles, 2);
    }

    #[test]
    fn out_of_range_index_names_the_line() {
        let err = parse_mesh_obj(format!("{TRI}\nf 1 2 9\n").as_bytes()).unwrap_err();
        assert!(matches!(
            err,
            IngestError::ObjIndex {
                line: 5,
                index: 9,
                vertex_count: 3
            }
        ));
        assert!(err.to_string().contains("line 5"), "{err}");
    }

    #[test]
    fn slash_and_negative_indices() {
        let obj = format!("{TRI}vt 0 0\nvn 0 0 1\nf 1/1/1 2//1 -1\n");
        let parsed = parse_mesh_obj(obj.as_bytes()).unwrap();
        assert_eq!(parsed.mesh.faces(), &[[0, 1, 2]]);
        assert_eq!(parsed.stats.ignored_directives, 2);
    }

    #[test]
    fn malformed_lines_report_location() {
        for (obj, line) in [
            ("v 0 0\n", 1),
            ("v 0 0 x\n", 1),
            ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2\n", 4),
            ("v 0 0 0\n\nf a b c\n", 3),
            ("v 0 0 0\nf 0 1 1\n", 2),
        ] {
            match parse_mesh_obj(obj.as_bytes()).unwrap_err() {
                IngestError::Obj { line: l, .. } | IngestError::ObjIndex { line: l, .. } => {
                    assert_eq!(l, line, "{obj:?}")
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn all_degenerate_is_an_error() {
        let obj = "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n";
        assert!(matches!(
            parse_mesh_obj(obj.as_bytes()),
            Err(IngestError::NoFaces { dropped: 1 })
        ));
        assert!(matches!(
            parse_mesh_obj(b"# nothing\n"),
            Err(IngestError::NoFaces { dropped: 0 })
        ));
    }

    #[test]
    fn comments_and_crlf() {
        let obj = "# header\r\nv 0 0 0 # origin\r\nv 1 0 0\r\nv 0 1 0\r\no thing\r\nf 1 2 3\r\n";
        let parsed = parse_mesh_obj(obj.as_bytes()).unwrap();
        assert_eq!(parsed.mesh.triangle_count(), 1);
        assert_eq!(parsed.stats.ignored_directives, 1);
    }

    #[test]
    fn view_dir_is_normalized() {
        let doc = br#"[{"image_id": "img1", "position": [0, 0, 0], "view_dir": [0, 0, 2]}]"#;
        let poses = parse_poses(doc).unwrap();
        assert_eq!(poses[0].view_dir, Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(poses[0].image_path, None);
    }

    #[test]
    fn identity_rotation_looks_along_z() {
        let doc = br#"[{"image_id": "img1", "position": [1, 2, 3],
                        "rotation": [1, 0, 0, 0, 1, 0, 0, 0, 1]}]"#;
        assert_eq!(
            parse_poses(doc).unwrap()[0].view_dir,
            Vec3::new(0.0, 0.0, 1.0)
        );
    }

    #[test]
    fn rotation_uses_third_column() {
        // 90° about +X: camera +Z maps to world -Y.
        let doc = br#"[{"image_id": "a", "position": [0, 0, 0],
                        "rotation": [1, 0, 0, 0, 0, -1, 0, 1, 0]}]"#;
        assert_eq!(
            parse_poses(doc).unwrap()[0].view_dir,
            Vec3::new(0.0, -1.0, 0.0)
        );
    }

    #[test]
    fn pose_contract_errors() {
        let dup = br#"[{"image_id": "img1", "position": [0,0,0], "view_dir": [0,0,1]},
                       {"image_id": "img1", "position": [1,0,0], "view_dir": [0,0,1]}]"#;
        assert!(matches!(
            parse_poses(dup),
            Err(IngestError::DuplicateImageId {
                first: 0,
                second: 1,
                ..
            })
        ));

        let zero = br#"[{"image_id": "a", "position": [0,0,0], "view_dir": [0,0,0]}]"#;
        assert!(matches!(
            parse_poses(zero),
            Err(IngestError::PoseRecord { index: 0, .. })
        ));

        let skew =
            br#"[{"image_id": "a", "position": [0,0,0], "rotation": [1,0.01,0, 0,1,0, 0,0,1]}]"#;
        let err = parse_poses(skew).unwrap_err();
        assert!(err.to_string().contains("orthonormal"), "{err}");

        let mirror =
            br#"[{"image_id": "a", "position": [0,0,0], "rotation": [-1,0,0, 0,1,0, 0,0,1]}]"#;
        assert!(parse_poses(mirror)
            .unwrap_err()
            .to_string()
            .contains("improper"));

        let both = br#"[{"image_id": "a", "position": [0,0,0], "view_dir": [0,0,1],
                         "rotation": [1,0,0, 0,1,0, 0,0,1]}]"#;
        assert!(matches!(
            parse_poses(both),
            Err(IngestError::PoseRecord { .. })
        ));

        let neither = br#"[{"image_id": "a", "position": [0,0,0]}]"#;
        assert!(matches!(
            parse_poses(neither),
            Err(IngestError::PoseRecord { .. })
        ));

        let short = br#"[{"image_id": "a", "position": [0,0,0], "rotation": [1,0,0]}]"#;
        assert!(parse_poses(short)
            .unwrap_err()
            .to_string()
            .contains("9 numbers"));
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let err = parse_poses(b"[\n  {\"image_id\": \"a\",\n  \"position\": [0,0,0] \"x\"}]")
            .unwrap_err();
        assert!(matches!(err, IngestError::PoseSyntax(_)));
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn small_rotation_error_is_tolerated() {
        let doc = br#"[{"image_id": "a", "position": [0,0,0], "rotation": [1,0,0.0004, 0,1,0, -0.0004,0,1]}]"#;
        let d = parse_poses(doc).unwrap()[0].view_dir;
        assert!((d.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scene_requires_cameras_and_faces() {
        let mesh = parse_mesh_obj(format!("{TRI}f 1 2 3\n").as_bytes())
            .unwrap()
            .mesh;
        assert!(matches!(
            Scene::new(mesh, vec![]),
            Err(IngestError::NoCameras)
        ));
        assert!(matches!(
            Scene::new(TriangleMesh::empty(), vec![]),
            Err(IngestError::NoFaces { .. })
        ));
    }
}
