//! Reference computations used to check the production paths.

use bridgecause_core::diagnosis::{CauseRule, Stage, TranscriptEntry};
use bridgecause_core::geometry::{
    intersect_triangle, Hit, Ray, Triangle, TriangleMesh, DET_EPS, T_MIN,
};
use bridgecause_core::vqa::{Annotation, TemplateId, Vocabulary};

/// Exhaustive scan over every triangle: smallest `t`, lowest index on ties.
pub fn naive_nearest_hit(mesh: &TriangleMesh, ray: &Ray) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (i, tri) in mesh.triangles().iter().enumerate() {
        if let Some(mut hit) = intersect_triangle(ray, tri) {
            hit.triangle_index = i;
            let closer = match best {
                None => true,
                Some(b) => hit.t < b.t || (hit.t == b.t && i < b.triangle_index),
            };
            if closer {
                best = Some(hit);
            }
        }
    }
    best
}

/// Ray/triangle intersection by plane intersection followed by a barycentric
/// containment test (Cramer's rule on the Gram system). Shares nothing with
/// Möller-Trumbore beyond the thresholds. Returns `(t, u, v)`.
pub fn plane_intersection(ray: &Ray, tri: &Triangle) -> Option<(f64, f64, f64)> {
    let e1 = tri.b - tri.a;
    let e2 = tri.c - tri.a;
    let normal = e1.cross(e2);
    let denom = normal.dot(ray.direction());
    if denom.abs() < DET_EPS {
        return None;
    }
    let t = normal.dot(tri.a - ray.origin()) / denom;
    if !(t >= T_MIN) {
        return None;
    }
    let p = ray.at(t) - tri.a;
    let d11 = e1.dot(e1);
    let d12 = e1.dot(e2);
    let d22 = e2.dot(e2);
    let p1 = p.dot(e1);
    let p2 = p.dot(e2);
    let gram = d11 * d22 - d12 * d12;
    let u = (d22 * p1 - d12 * p2) / gram;
    let v = (d11 * p2 - d12 * p1) / gram;
    (u >= 0.0 && v >= 0.0 && u + v <= 1.0).then_some((t, u, v))
}

/// `(n, m)` for a rule computed straight from annotations, without asking
/// any questions.
pub fn recount_from_annotations(
    annotations: &[Annotation],
    images: &[String],
    rule: &CauseRule,
    vocab: &Vocabulary,
) -> (usize, usize) {
    let mut n = 0;
    let mut m = 0;
    for id in images {
        let Some(ann) = annotations.iter().find(|a| &a.image_id == id) else {
            continue;
        };
        let ann = ann.validated(vocab).expect("valid annotation");
        if let Some(member) = ann.members.iter().find(|x| x.name == rule.related_member) {
            n += 1;
            if member.damages.iter().any(|d| rule.events.contains(d)) {
                m += 1;
            }
        }
    }
    (n, m)
}

/// `(n, m)` for a cause recomputed from transcript lines alone.
pub fn recount_from_transcript(transcript: &[TranscriptEntry], cause_name: &str) -> (usize, usize) {
    let mut member_seen: Vec<&str> = Vec::new();
    let mut event_seen: Vec<&str> = Vec::new();
    for e in transcript {
        if e.stage != Stage::Evidence
            || e.cause_name.as_deref() != Some(cause_name)
            || !e.answered_yes()
        {
            continue;
        }
        let list = match e.template_id {
            TemplateId::MemberPresent => &mut member_seen,
            TemplateId::DamageOnMember => &mut event_seen,
            _ => continue,
        };
        if !list.contains(&e.image_id.as_str()) {
            list.push(&e.image_id);
        }
    }
    let m = event_seen
        .iter()
        .filter(|id| member_seen.contains(id))
        .count();
    (member_seen.len(), m)
}
