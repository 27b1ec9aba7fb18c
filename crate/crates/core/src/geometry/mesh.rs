use thiserror::Error;

use super::{Bvh, Hit, Ray, Triangle, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("face {face} references vertex {index}, but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteVertex(usize),
}

/// Indexed triangle mesh in meters with its acceleration index.
///
/// Degenerate faces are removed at construction; `faces()` and hit
/// `triangle_index` values refer to the surviving faces.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    triangles: Vec<Triangle>,
    bvh: Bvh,
    dropped_degenerate: usize,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(MeshError::NonFiniteVertex(i));
        }
        for (face, f) in faces.iter().enumerate() {
            if let Some(&index) = f.iter().find(|&&i| i >= vertices.len()) {
                return Err(MeshError::IndexOutOfRange {
                    face,
                    index,
                    vertex_count: vertices.len(),
                });
            }
        }

        let total = faces.len();
        let (faces, triangles): (Vec<_>, Vec<_>) = faces
            .into_iter()
            .map(|f| {
                (
                    f,
                    Triangle::new(vertices[f[0]], vertices[f[1]], vertices[f[2]]),
                )
            })
            .filter(|(_, t)| !t.is_degenerate())
            .unzip();
        let dropped_degenerate = total - faces.len();
        if dropped_degenerate > 0 {
            log::warn!("dropped {dropped_degenerate} degenerate face(s)");
        }

        let bvh = Bvh::build(&triangles);
        Ok(Self {
            vertices,
            faces,
            triangles,
            bvh,
            dropped_degenerate,
        })
    }

    /// Mesh from a triangle soup; every triangle gets its own three vertices.
    pub fn from_triangles(triangles: &[Triangle]) -> Self {
        let vertices = triangles.iter().flat_map(|t| [t.a, t.b, t.c]).collect();
        let faces = (0..triangles.len())
            .map(|i| [3 * i, 3 * i + 1, 3 * i + 2])
            .collect();
        Self::new(vertices, faces).expect("soup indices are in range")
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new()).expect("empty mesh is valid")
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Number of faces removed as degenerate at construction.
    pub fn dropped_degenerate(&self) -> usize {
        self.dropped_degenerate
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    /// Closest intersection with `t >= T_MIN`; ties go to the lowest index.
    pub fn nearest_hit(&self, ray: &Ray) -> Option<Hit> {
        self.bvh.nearest_hit(&self.triangles, ray)
    }

    /// Copy of the mesh moved by `offset`.
    pub fn translated(&self, offset: Vec3) -> Self {
        let vertices = self.vertices.iter().map(|&v| v + offset).collect();
        Self::new(vertices, self.faces.clone()).expect("translation keeps indices valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verts() -> Vec<Vec3> {
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        ]
    }

    #[test]
    fn drops_degenerate_faces() {
        let mesh = TriangleMesh::new(verts(), vec![[0, 1, 2], [0, 1, 3], [0, 0, 2]]).unwrap();
        assert_eq!(mesh.triangle_count(), 1);
        assert_eq!(mesh.dropped_degenerate(), 2);
        assert_eq!(mesh.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn rejects_out_of_range_index() {
        let err = TriangleMesh::new(verts(), vec![[0, 1, 9]]).unwrap_err();
        assert_eq!(
            err,
            MeshError::IndexOutOfRange {
                face: 0,
                index: 9,
                vertex_count: 4
            }
        );
    }

    #[test]
    fn stacked_planes_return_the_closer_one() {
        let tri = |z: f64| {
            Triangle::new(
                Vec3::new(-1.0, -1.0, z),
                Vec3::new(2.0, -1.0, z),
                Vec3::new(-1.0, 2.0, z),
            )
        };
        // Farther plane first so index order and distance order disagree.
        let mesh = TriangleMesh::from_triangles(&[tri(2.0), tri(1.0)]);
        let ray = Ray::new(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0)).unwrap();
        let hit = mesh.nearest_hit(&ray).unwrap();
        assert_eq!(hit.t, 1.0);
        assert_eq!(hit.triangle_index, 1);

        let away = Ray::new(Vec3::ZERO, Vec3::new(0.0, 0.0, -1.0)).unwrap();
        assert_eq!(mesh.nearest_hit(&away), None);
    }

    #[test]
    fn empty_mesh_misses() {
        let mesh = TriangleMesh::empty();
        assert!(mesh.is_empty());
        let ray = Ray::new(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(mesh.nearest_hit(&ray), None);
    }
}
