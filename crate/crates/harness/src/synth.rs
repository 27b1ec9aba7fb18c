//! Seeded synthetic scenes: girder boxes, camera rings, triangle soups.

use std::io;
use std::path::{Path, PathBuf};

use bridgecause_core::geometry::{Ray, Triangle, TriangleMesh, Vec3};
use bridgecause_core::ingest::{serialize_poses, write_mesh_obj, CameraPose, IngestError, Scene};
use bridgecause_core::vqa::{Annotation, Vocabulary};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Accumulates subdivided planar patches into an indexed mesh.
#[derive(Debug, Default, Clone)]
pub struct MeshBuilder {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

impl MeshBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parallelogram `origin + s*u + t*v` for `s, t` in `[0, 1]`, split into
    /// `nu * nv` cells of two triangles each.
    pub fn patch(&mut self, origin: Vec3, u: Vec3, v: Vec3, nu: usize, nv: usize) -> &mut Self {
        let (nu, nv) = (nu.max(1), nv.max(1));
        let base = self.vertices.len();
        for j in 0..=nv {
            for i in 0..=nu {
                let s = i as f64 / nu as f64;
                let t = j as f64 / nv as f64;
                self.vertices.push(origin + u * s + v * t);
            }
        }
        let row = nu + 1;
        for j in 0..nv {
            for i in 0..nu {
                let p = base + j * row + i;
                self.faces.push([p, p + 1, p + row + 1]);
                self.faces.push([p, p + row + 1, p + row]);
            }
        }
        self
    }

    /// Axis-aligned box between `min` and `max`, each face split `n * n`.
    pub fn aabb(&mut self, min: Vec3, max: Vec3, n: usize) -> &mut Self {
        let d = max - min;
        let ex = Vec3::new(d.x, 0.0, 0.0);
        let ey = Vec3::new(0.0, d.y, 0.0);
        let ez = Vec3::new(0.0, 0.0, d.z);
        self.patch(min, ey, ex, n, n)
            .patch(min + ez, ex, ey, n, n)
            .patch(min, ex, ez, n, n)
            .patch(min + ey, ez, ex, n, n)
            .patch(min, ez, ey, n, n)
            .patch(min + ex, ey, ez, n, n)
    }

    pub fn triangle_count(&self) -> usize {
        self.faces.len()
    }

    pub fn build(self) -> TriangleMesh {
        TriangleMesh::new(self.vertices, self.faces).expect("builder emits valid indices")
    }
}

/// How annotations are produced for the generated cameras.
#[derive(Debug, Clone, PartialEq)]
pub enum AnnotationScript {
    /// Every image annotated with no visible members.
    Empty,
    /// Each default-vocabulary member visible with `member_probability`, each
    /// damage on a visible member with `damage_probability`.
    Random {
        member_probability: f64,
        damage_probability: f64,
    },
    /// Annotation per camera index; cameras past the end get none.
    Explicit(Vec<Annotation>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSceneSpec {
    /// Girder box extents along x, y, z (m), centered on the origin.
    pub girder_size: Vec3,
    pub subdivisions: usize,
    pub camera_count: usize,
    /// Distance from the box's bounding circle to the camera ring (m).
    pub standoff: f64,
    /// Extra cameras facing away from the girder, which miss it.
    pub outward_cameras: usize,
    pub seed: u64,
    pub annotations: AnnotationScript,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        Self {
            girder_size: Vec3::new(10.0, 1.0, 2.0),
            subdivisions: 4,
            camera_count: 24,
            standoff: 3.0,
            outward_cameras: 0,
            seed: 0,
            annotations: AnnotationScript::Empty,
        }
    }
}

/// Serialized scene in the canonical formats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneFiles {
    pub mesh_obj: String,
    pub poses_json: String,
    pub annotations_json: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenePaths {
    pub mesh: PathBuf,
    pub poses: PathBuf,
    pub annotations: PathBuf,
}

impl SceneFiles {
    pub fn new(mesh: &TriangleMesh, poses: &[CameraPose], annotations: &[Annotation]) -> Self {
        let mut annotations_json =
            serde_json::to_string_pretty(annotations).expect("annotations serialize");
        annotations_json.push('\n');
        Self {
            mesh_obj: write_mesh_obj(mesh),
            poses_json: serialize_poses(poses),
            annotations_json,
        }
    }

    /// Writes `mesh.obj`, `poses.json` and `annotations.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> io::Result<ScenePaths> {
        std::fs::create_dir_all(dir)?;
        let paths = ScenePaths {
            mesh: dir.join("mesh.obj"),
            poses: dir.join("poses.json"),
            annotations: dir.join("annotations.json"),
        };
        std::fs::write(&paths.mesh, &self.mesh_obj)?;
        std::fs::write(&paths.poses, &self.poses_json)?;
        std::fs::write(&paths.annotations, &self.annotations_json)?;
        Ok(paths)
    }

    pub fn scene(&self) -> Result<Scene, IngestError> {
        Scene::load(self.mesh_obj.as_bytes(), self.poses_json.as_bytes())
    }

    pub fn annotations(&self) -> Vec<Annotation> {
        serde_json::from_str(&self.annotations_json).expect("generated annotations parse")
    }
}

pub fn image_id(index: usize) -> String {
    format!("IMG_{index:04}")
}

/// Girder box surrounded by a ring of cameras aimed at jittered interior
/// points, so every ring camera hits the box.
pub fn gen_scene(spec: &SyntheticSceneSpec) -> SceneFiles {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let half = spec.girder_size * 0.5;
    let mut builder = MeshBuilder::new();
    builder.aabb(-half, half, spec.subdivisions);
    let mesh = builder.build();

    let ring = half.x.hypot(half.y) + spec.standoff;
    let mut poses = Vec::with_capacity(spec.camera_count + spec.outward_cameras);
    for i in 0..spec.camera_count + spec.outward_cameras {
        let angle = std::f64::consts::TAU * i as f64 / spec.camera_count.max(1) as f64
            + rng.gen_range(-0.05..0.05);
        let position = Vec3::new(
            ring * angle.cos(),
            ring * angle.sin(),
            rng.gen_range(-half.z..=half.z),
        );
        let target = Vec3::new(
            rng.gen_range(-0.8..0.8) * half.x,
            rng.gen_range(-0.8..0.8) * half.y,
            rng.gen_range(-0.8..0.8) * half.z,
        );
        let towards = target - position;
        let view = if i < spec.camera_count {
            towards
        } else {
            -towards
        };
        poses.push(CameraPose {
            image_id: image_id(i),
            position,
            view_dir: view.normalized().expect("camera is off the target"),
            image_path: None,
        });
    }

    let vocab = Vocabulary::default();
    let annotations: Vec<Annotation> = match &spec.annotations {
        AnnotationScript::Empty => poses.iter().map(|p| Annotation::new(&p.image_id)).collect(),
        AnnotationScript::Random {
            member_probability,
            damage_probability,
        } => poses
            .iter()
            .map(|p| {
                random_annotation(
                    &mut rng,
                    &p.image_id,
                    &vocab,
                    *member_probability,
                    *damage_probability,
                )
            })
            .collect(),
        AnnotationScript::Explicit(list) => list
            .iter()
            .zip(&poses)
            .map(|(a, p)| Annotation {
                image_id: p.image_id.clone(),
                members: a.members.clone(),
            })
            .collect(),
    };
    SceneFiles::new(&mesh, &poses, &annotations)
}

/// Annotation over `vocab` with independently sampled members and damages.
pub fn random_annotation<R: Rng>(
    rng: &mut R,
    image_id: &str,
    vocab: &Vocabulary,
    member_probability: f64,
    damage_probability: f64,
) -> Annotation {
    let mut ann = Annotation::new(image_id);
    for member in vocab.members() {
        if rng.gen_bool(member_probability) {
            let damages: Vec<&String> = vocab
                .damages()
                .iter()
                .filter(|_| rng.gen_bool(damage_probability))
                .collect();
            ann = ann.with_member(member, damages.into_iter().cloned());
        }
    }
    // Annotators list things in their own order.
    ann.members.shuffle(rng);
    ann
}

/// Horizontal square at height `z` (half side `half`) with one upward camera
/// per `(x, y)` at the origin plane. Camera `i` shoots point `(x, y, z)`.
pub fn plane_scene(z: f64, half: f64, cameras: &[(f64, f64)]) -> Scene {
    let mut builder = MeshBuilder::new();
    builder.patch(
        Vec3::new(-half, -half, z),
        Vec3::new(2.0 * half, 0.0, 0.0),
        Vec3::new(0.0, 2.0 * half, 0.0),
        1,
        1,
    );
    let poses = cameras
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| CameraPose {
            image_id: image_id(i),
            position: Vec3::new(x, y, 0.0),
            view_dir: Vec3::new(0.0, 0.0, 1.0),
            image_path: None,
        })
        .collect();
    Scene::new(builder.build(), poses).expect("valid plane scene")
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_point<R: Rng>(rng: &mut R, extent: f64) -> Vec3 {
    Vec3::new(
        rng.gen_range(-extent..extent),
        rng.gen_range(-extent..extent),
        rng.gen_range(-extent..extent),
    )
}

/// `count` triangles with vertices within `size` of a center drawn from the
/// cube of half side `extent`.
pub fn random_soup<R: Rng>(rng: &mut R, count: usize, extent: f64, size: f64) -> Vec<Triangle> {
    (0..count)
        .map(|_| {
            let c = random_point(rng, extent);
            Triangle::new(
                c + random_point(rng, size),
                c + random_point(rng, size),
                c + random_point(rng, size),
            )
        })
        .collect()
}

/// Mix of rays aimed at random triangles (mostly hits) and rays in random
/// directions from random origins.
pub fn random_rays<R: Rng>(
    rng: &mut R,
    triangles: &[Triangle],
    count: usize,
    extent: f64,
) -> Vec<Ray> {
    (0..count)
        .map(|i| {
            let origin = random_point(rng, extent * 1.5);
            let dir = if i % 2 == 0 && !triangles.is_empty() {
                let tri = &triangles[rng.gen_range(0..triangles.len())];
                let (u, v): (f64, f64) = (rng.gen(), rng.gen());
                let (u, v) = if u + v > 1.0 {
                    (1.0 - u, 1.0 - v)
                } else {
                    (u, v)
                };
                tri.point_at(u, v) - origin
            } else {
                random_unit(rng)
            };
            Ray::towards(origin, dir).unwrap_or_else(|_| {
                Ray::new(origin, Vec3::new(0.0, 0.0, 1.0)).expect("unit direction")
            })
        })
        .collect()
}

/// Random scene for neighborhood properties: a soup of large triangles and
/// cameras aimed at triangle interiors, with a few aimed at nothing.
pub fn random_scene<R: Rng>(rng: &mut R, triangles: usize, cameras: usize) -> Scene {
    let soup = random_soup(rng, triangles.max(1), 5.0, 2.0);
    let mesh = TriangleMesh::from_triangles(&soup);
    let poses = (0..cameras.max(1))
        .map(|i| {
            let position = random_point(rng, 10.0);
            let view = if rng.gen_bool(0.9) {
                let tri = &soup[rng.gen_range(0..soup.len())];
                (tri.centroid() - position)
                    .normalized()
                    .unwrap_or_else(|| random_unit(rng))
            } else {
                random_unit(rng)
            };
            CameraPose {
                image_id: image_id(i),
                position,
                view_dir: view,
                image_path: None,
            }
        })
        .collect();
    Scene::new(mesh, poses).expect("random scene is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use bridgecause_core::neighborhood::shooting_points;

    #[test]
    fn builder_counts() {
        let mut b = MeshBuilder::new();
        b.aabb(Vec3::ZERO, Vec3::new(1.0, 2.0, 3.0), 3);
        assert_eq!(b.triangle_count(), 6 * 9 * 2);
        let mesh = b.build();
        let area: f64 = mesh.triangles().iter().map(Triangle::area).sum();
        assert!((area - 2.0 * (2.0 + 3.0 + 6.0)).abs() < 1e-9);
    }

    #[test]
    fn generation_is_byte_reproducible() {
        let spec = SyntheticSceneSpec {
            seed: 7,
            outward_cameras: 2,
            annotations: AnnotationScript::Random {
                member_probability: 0.3,
                damage_probability: 0.2,
            },
            ..Default::default()
        };
        assert_eq!(gen_scene(&spec), gen_scene(&spec));
        let other = SyntheticSceneSpec {
            seed: 8,
            ..spec.clone()
        };
        assert_ne!(gen_scene(&spec).poses_json, gen_scene(&other).poses_json);
    }

    #[test]
    fn ring_cameras_hit_and_outward_cameras_miss() {
        let spec = SyntheticSceneSpec {
            camera_count: 12,
            outward_cameras: 3,
            ..Default::default()
        };
        let scene = gen_scene(&spec).scene().unwrap();
        let points = shooting_points(&scene);
        for i in 0..12 {
            assert!(points[&image_id(i)].is_some());
        }
        for i in 12..15 {
            assert!(points[&image_id(i)].is_none());
        }
    }

    #[test]
    fn one_camera_one_quad() {
        let scene = plane_scene(2.0, 1.0, &[(0.25, -0.5)]);
        let p = shooting_points(&scene)[&image_id(0)].clone().unwrap();
        assert_eq!(p.point, Vec3::new(0.25, -0.5, 2.0));
        assert_eq!(p.t, 2.0);
    }

    #[test]
    fn explicit_annotations_follow_camera_ids() {
        let spec = SyntheticSceneSpec {
            camera_count: 2,
            annotations: AnnotationScript::Explicit(vec![
                Annotation::new("x").with_member("slab", ["cracking"])
            ]),
            ..Default::default()
        };
        let anns = gen_scene(&spec).annotations();
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].image_id, image_id(0));
    }
}
