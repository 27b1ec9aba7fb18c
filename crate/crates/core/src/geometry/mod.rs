//! Ray casting against triangle meshes.
//!
//! Rays are intersected with triangles by Möller-Trumbore, two-sided. A
//! [`TriangleMesh`] owns a [`Bvh`] whose nearest-hit query is bit-identical to
//! an exhaustive scan: the smallest `t >= T_MIN` wins and equal `t` goes to the
//! lowest triangle index.

mod bvh;
mod mesh;
mod triangle;
mod vec3;

pub use bvh::{Aabb, Bvh};
pub use mesh::{MeshError, TriangleMesh};
pub use triangle::{intersect_triangle, Hit, Ray, RayError, Triangle};
pub use vec3::Vec3;

/// Hits closer than this to the ray origin are ignored (m).
pub const T_MIN: f64 = 1e-6;

/// Möller-Trumbore determinant threshold; smaller |det| counts as parallel.
pub const DET_EPS: f64 = 1e-12;

/// Faces with area at or below this are dropped at load (m²).
pub const DEGENERATE_AREA_EPS: f64 = 1e-12;

/// Allowed deviation of a ray direction from unit length.
pub const UNIT_TOLERANCE: f64 = 1e-9;
