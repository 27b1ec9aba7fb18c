use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Vec3, DEGENERATE_AREA_EPS, DET_EPS, T_MIN, UNIT_TOLERANCE};

#[derive(Debug, Error, PartialEq)]
pub enum RayError {
    #[error("ray origin is not finite")]
    NonFiniteOrigin,
    #[error("ray direction must be unit length, got |d| = {0}")]
    NotUnit(f64),
}

/// A half-line `origin + t * direction`, `t >= 0`, with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Vec3,
    direction: Vec3,
}

impl Ray {
    /// Builds a ray from an already unit-length direction.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self, RayError> {
        if !origin.is_finite() {
            return Err(RayError::NonFiniteOrigin);
        }
        let n = direction.norm();
        if !((n - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(RayError::NotUnit(n));
        }
        Ok(Self { origin, direction })
    }

    /// Builds a ray, normalizing `direction` first.
    pub fn towards(origin: Vec3, direction: Vec3) -> Result<Self, RayError> {
        let d = direction
            .normalized()
            .ok_or(RayError::NotUnit(direction.norm()))?;
        Self::new(origin, d)
    }

    #[inline]
    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    #[inline]
    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub a: Vec3,
    pub b: Vec3,
    pub c: Vec3,
}

impl Triangle {
    pub const fn new(a: Vec3, b: Vec3, c: Vec3) -> Self {
        Self { a, b, c }
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.b - self.a).cross(self.c - self.a).norm()
    }

    pub fn is_degenerate(&self) -> bool {
        // NaN area is degenerate too.
        !(self.area() > DEGENERATE_AREA_EPS)
    }

    pub fn centroid(&self) -> Vec3 {
        (self.a + self.b + self.c) / 3.0
    }

    /// Point at barycentric coordinates `(u, v)`: `(1-u-v)·a + u·b + v·c`.
    pub fn point_at(&self, u: f64, v: f64) -> Vec3 {
        self.a * (1.0 - u - v) + self.b * u + self.c * v
    }

    pub fn translated(&self, offset: Vec3) -> Triangle {
        Triangle::new(self.a + offset, self.b + offset, self.c + offset)
    }
}

/// A ray/triangle intersection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    /// Distance along the ray (m).
    pub t: f64,
    /// Barycentric weight of vertex `b`.
    pub u: f64,
    /// Barycentric weight of vertex `c`.
    pub v: f64,
    pub triangle_index: usize,
}

impl Hit {
    /// Strict "closer than" ordering: smaller `t`, then lower triangle index.
    #[inline]
    pub fn is_closer_than(&self, other: &Hit) -> bool {
        self.t < other.t || (self.t == other.t && self.triangle_index < other.triangle_index)
    }
}

/// Two-sided Möller-Trumbore. Returns the hit with `t >= T_MIN`, if any.
///
/// The returned hit carries `triangle_index = 0`; meshes overwrite it.
pub fn intersect_triangle(ray: &Ray, tri: &Triangle) -> Option<Hit> {
    intersect_indexed(ray, tri, 0)
}

#[inline]
pub(crate) fn intersect_indexed(ray: &Ray, tri: &Triangle, triangle_index: usize) -> Option<Hit> {
    let e1 = tri.b - tri.a;
    let e2 = tri.c - tri.a;
    let p = ray.direction.cross(e2);
    let det = e1.dot(p);
    if !(det.abs() >= DET_EPS) {
        return None;
    }
    let inv_det = 1.0 / det;

    let s = ray.origin - tri.a;
    let u = s.dot(p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }

    let q = s.cross(e1);
    let v = ray.direction.dot(q) * inv_det;
    if !(v >= 0.0 && u + v <= 1.0) {
        return None;
    }

    let t = e2.dot(q) * inv_det;
    if !(t >= T_MIN) {
        return None;
    }
    Some(Hit {
        t,
        u,
        v,
        triangle_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_tri() -> Triangle {
        Triangle::new(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        )
    }

    fn ray(o: [f64; 3], d: [f64; 3]) -> Ray {
        Ray::new(o.into(), d.into()).unwrap()
    }

    #[test]
    fn vertex_hit_is_inclusive() {
        let hit = intersect_triangle(&ray([0.0, 0.0, -1.0], [0.0, 0.0, 1.0]), &unit_tri()).unwrap();
        assert_eq!((hit.t, hit.u, hit.v), (1.0, 0.0, 0.0));
    }

    #[test]
    fn interior_hit_is_exact() {
        let hit =
            intersect_triangle(&ray([0.25, 0.25, -2.0], [0.0, 0.0, 1.0]), &unit_tri()).unwrap();
        assert_eq!((hit.t, hit.u, hit.v), (2.0, 0.25, 0.25));
    }

    #[test]
    fn parallel_ray_misses() {
        let r = ray([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]);
        assert_eq!(intersect_triangle(&r, &unit_tri()), None);
        // In-plane rays are parallel too.
        let r = ray([-1.0, 0.25, 0.0], [1.0, 0.0, 0.0]);
        assert_eq!(intersect_triangle(&r, &unit_tri()), None);
    }

    #[test]
    fn back_face_is_hit() {
        let hit =
            intersect_triangle(&ray([0.25, 0.25, 3.0], [0.0, 0.0, -1.0]), &unit_tri()).unwrap();
        assert_eq!((hit.t, hit.u, hit.v), (3.0, 0.25, 0.25));
    }

    #[test]
    fn behind_origin_and_t_min_are_rejected() {
        let tri = unit_tri();
        assert_eq!(
            intersect_triangle(&ray([0.25, 0.25, 1.0], [0.0, 0.0, 1.0]), &tri),
            None
        );
        // Origin on the surface: t = 0 < T_MIN.
        assert_eq!(
            intersect_triangle(&ray([0.25, 0.25, 0.0], [0.0, 0.0, 1.0]), &tri),
            None
        );
        assert_eq!(
            intersect_triangle(&ray([0.25, 0.25, -5e-7], [0.0, 0.0, 1.0]), &tri),
            None
        );
        assert!(intersect_triangle(&ray([0.25, 0.25, -2e-6], [0.0, 0.0, 1.0]), &tri).is_some());
    }

    #[test]
    fn outside_edges_miss() {
        let tri = unit_tri();
        assert_eq!(
            intersect_triangle(&ray([0.6, 0.6, -1.0], [0.0, 0.0, 1.0]), &tri),
            None
        );
        assert_eq!(
            intersect_triangle(&ray([-0.1, 0.5, -1.0], [0.0, 0.0, 1.0]), &tri),
            None
        );
        assert_eq!(
            intersect_triangle(&ray([0.5, -0.1, -1.0], [0.0, 0.0, 1.0]), &tri),
            None
        );
    }

    #[test]
    fn rejects_non_unit_direction() {
        assert!(matches!(
            Ray::new(Vec3::ZERO, Vec3::new(0.0, 0.0, 2.0)),
            Err(RayError::NotUnit(_))
        ));
        assert!(Ray::towards(Vec3::ZERO, Vec3::ZERO).is_err());
        let r = Ray::towards(Vec3::ZERO, Vec3::new(0.0, 3.0, 4.0)).unwrap();
        assert_eq!(r.direction(), Vec3::new(0.0, 0.6, 0.8));
    }

    #[test]
    fn degenerate_detection() {
        let sliver = Triangle::new(
            Vec3::ZERO,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        );
        assert!(sliver.is_degenerate());
        assert!(!unit_tri().is_degenerate());
        assert_eq!(unit_tri().area(), 0.5);
    }
}
