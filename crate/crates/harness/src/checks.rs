//! Seeded property sweeps shared by the test suites. Each returns a report
//! with counts and the first few violations rather than panicking, so
//! callers can print a summary before asserting.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use bridgecause_core::diagnosis::{evaluate_cause, CauseRule, EventMode};
use bridgecause_core::geometry::{intersect_triangle, Ray, Triangle, TriangleMesh};
use bridgecause_core::ingest::{CameraPose, Scene};
use bridgecause_core::neighborhood::{select_surrounding, shooting_points, ShootingPoints};
use bridgecause_core::vqa::{
    generate_qa, write_corpus, Annotation, AnnotationOracle, AnswerOracle, Vocabulary,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracles::{
    naive_nearest_hit, plane_intersection, recount_from_annotations, recount_from_transcript,
};
use crate::synth::{
    random_annotation, random_point, random_rays, random_scene, random_soup, random_unit,
};

const KEEP: usize = 10;

fn note(list: &mut Vec<String>, msg: impl FnOnce() -> String) {
    if list.len() < KEEP {
        list.push(msg());
    }
}

#[derive(Debug, Clone, Default)]
pub struct MtReport {
    pub cases: usize,
    pub hits: usize,
    /// Returned hits outside the barycentric bounds or failing the
    /// reconstruction identity.
    pub violations: usize,
    /// Hit/miss or `t` disagreements with the plane oracle away from edges.
    pub oracle_disagreements: usize,
    pub max_reconstruction_gap: f64,
    pub examples: Vec<String>,
}

impl MtReport {
    pub fn ok(&self) -> bool {
        self.violations == 0 && self.oracle_disagreements == 0
    }
}

/// Random triangles and rays (half aimed at the triangle). Checks every hit
/// against the barycentric bounds, the reconstruction identity to
/// `tolerance` metres, and the plane-intersection oracle.
pub fn check_moller_trumbore(seed: u64, cases: usize, tolerance: f64) -> MtReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = MtReport::default();
    while r.cases < cases {
        let tri = Triangle::new(
            random_point(&mut rng, 10.0),
            random_point(&mut rng, 10.0),
            random_point(&mut rng, 10.0),
        );
        let origin = random_point(&mut rng, 10.0);
        let dir = if rng.gen_bool(0.5) {
            let (u, v): (f64, f64) = (rng.gen(), rng.gen());
            let (u, v) = if u + v > 1.0 {
                (1.0 - u, 1.0 - v)
            } else {
                (u, v)
            };
            tri.point_at(u, v) - origin
        } else {
            random_unit(&mut rng)
        };
        let Ok(ray) = Ray::towards(origin, dir) else {
            continue;
        };
        r.cases += 1;

        let mt = intersect_triangle(&ray, &tri);
        let plane = plane_intersection(&ray, &tri);
        if let Some(h) = mt {
            r.hits += 1;
            let inside = h.u >= 0.0 && h.v >= 0.0 && h.u + h.v <= 1.0;
            let gap = ray.at(h.t).distance(tri.point_at(h.u, h.v));
            r.max_reconstruction_gap = r.max_reconstruction_gap.max(gap);
            if !inside || !(gap <= tolerance) {
                r.violations += 1;
                note(&mut r.examples, || {
                    format!("case {}: hit {h:?} gap {gap:e}", r.cases)
                });
            }
        }
        // Only robust cases are compared: well inside or well outside, and
        // not nearly parallel.
        let normal = (tri.b - tri.a).cross(tri.c - tri.a);
        let cos = normal.dot(ray.direction()).abs() / normal.norm();
        let margin = |u: f64, v: f64| u.min(v).min(1.0 - u - v).abs();
        let robust = cos > 1e-6
            && match (mt, plane) {
                (Some(h), _) => margin(h.u, h.v) > 1e-9 && h.t > 1e-5,
                (None, Some((t, u, v))) => margin(u, v) > 1e-9 && t > 1e-5,
                (None, None) => true,
            };
        let agree = match (mt, plane) {
            (Some(h), Some((t, _, _))) => (h.t - t).abs() <= 1e-9 * t.abs().max(1.0),
            (None, None) => true,
            _ => false,
        };
        if robust && !agree {
            r.oracle_disagreements += 1;
            note(&mut r.examples, || {
                format!("case {}: mt {mt:?} plane {plane:?}", r.cases)
            });
        }
    }
    r
}

#[derive(Debug, Clone, Default)]
pub struct BvhReport {
    pub triangles: usize,
    pub rays: usize,
    pub hits: usize,
    pub mismatches: usize,
    pub bvh_time: Duration,
    pub naive_time: Duration,
    pub examples: Vec<String>,
}

/// Random soup of `triangles` small triangles and `rays` rays, queried
/// through the BVH and through an exhaustive scan.
pub fn check_bvh(seed: u64, triangles: usize, rays: usize) -> BvhReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extent = 50.0;
    let soup = random_soup(&mut rng, triangles, extent, 0.6);
    let mesh = TriangleMesh::from_triangles(&soup);
    let rays = random_rays(&mut rng, mesh.triangles(), rays, extent);
    compare_with_scan(&mesh, &rays)
}

pub fn compare_with_scan(mesh: &TriangleMesh, rays: &[Ray]) -> BvhReport {
    let start = Instant::now();
    let fast: Vec<_> = rays.iter().map(|r| mesh.nearest_hit(r)).collect();
    let bvh_time = start.elapsed();
    let start = Instant::now();
    let slow: Vec<_> = rays.iter().map(|r| naive_nearest_hit(mesh, r)).collect();
    let naive_time = start.elapsed();

    let mut report = BvhReport {
        triangles: mesh.triangle_count(),
        rays: rays.len(),
        bvh_time,
        naive_time,
        ..Default::default()
    };
    for (i, (a, b)) in fast.iter().zip(&slow).enumerate() {
        let same = match (a, b) {
            (Some(a), Some(b)) => {
                a.triangle_index == b.triangle_index
                    && (a.t - b.t).abs() <= 1e-9 * b.t.abs().max(1.0)
            }
            (None, None) => true,
            _ => false,
        };
        report.hits += b.is_some() as usize;
        if !same {
            report.mismatches += 1;
            note(&mut report.examples, || {
                format!("ray {i}: bvh {a:?} naive {b:?}")
            });
        }
    }
    report
}

#[derive(Debug, Clone, Default)]
pub struct NeighborhoodReport {
    pub scenes: usize,
    pub selections: usize,
    pub partition_violations: usize,
    pub inclusivity_violations: usize,
    pub monotonicity_violations: usize,
    pub translation_violations: usize,
    /// Cameras skipped by the translation check because their hit lies
    /// within rounding of a triangle edge or the ball boundary.
    pub fragile_skipped: usize,
    pub examples: Vec<String>,
}

impl NeighborhoodReport {
    pub fn ok(&self) -> bool {
        self.partition_violations
            + self.inclusivity_violations
            + self.monotonicity_violations
            + self.translation_violations
            == 0
    }
}

fn surrounding_ids(points: &ShootingPoints, interest: &str, radius: f64) -> BTreeSet<String> {
    select_surrounding(points, interest, radius)
        .expect("interest hits")
        .surrounding
        .into_iter()
        .map(|n| n.shooting_point.image_id)
        .collect()
}

fn edge_margin(scene: &Scene, cam: &CameraPose, triangle: usize) -> f64 {
    intersect_triangle(&cam.ray(), &scene.mesh.triangles()[triangle])
        .map_or(0.0, |h| h.u.min(h.v).min(1.0 - h.u - h.v))
}

/// Partition, boundary inclusivity, radius monotonicity and translation
/// invariance of the neighborhood selection over `scenes` random scenes.
pub fn check_neighborhood(seed: u64, scenes: usize) -> NeighborhoodReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = NeighborhoodReport::default();
    while r.scenes < scenes {
        let tris = rng.gen_range(1..60);
        let cams = rng.gen_range(1..30);
        let scene = random_scene(&mut rng, tris, cams);
        let points = shooting_points(&scene);
        let hitting: Vec<&String> = points
            .iter()
            .filter(|(_, p)| p.is_some())
            .map(|(id, _)| id)
            .collect();
        let Some(&interest) = hitting.choose(&mut rng) else {
            continue;
        };
        r.scenes += 1;
        let center = points[interest].as_ref().expect("hit").point;

        let mut radii: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..12.0)).collect();
        radii.push(0.0);
        radii.sort_by(f64::total_cmp);
        let mut previous: Option<BTreeSet<String>> = None;
        for &radius in &radii {
            r.selections += 1;
            let sel = select_surrounding(&points, interest, radius).expect("interest hits");
            let mut all: Vec<String> = vec![sel.interest.image_id.clone()];
            all.extend(
                sel.surrounding
                    .iter()
                    .map(|n| n.shooting_point.image_id.clone()),
            );
            all.extend(sel.excluded.iter().cloned());
            all.extend(sel.missed.iter().cloned());
            let unique: BTreeSet<&String> = all.iter().collect();
            let classes_ok = sel
                .surrounding
                .iter()
                .all(|n| n.distance <= radius && points[&n.shooting_point.image_id].is_some())
                && sel.excluded.iter().all(|id| {
                    points[id]
                        .as_ref()
                        .is_some_and(|p| p.point.distance(center) > radius)
                })
                && sel.missed.iter().all(|id| points[id].is_none());
            if all.len() != points.len() || unique.len() != all.len() || !classes_ok {
                r.partition_violations += 1;
                note(&mut r.examples, || {
                    format!("scene {}: bad partition at r={radius}", r.scenes)
                });
            }

            let now: BTreeSet<String> = sel
                .surrounding
                .iter()
                .map(|n| n.shooting_point.image_id.clone())
                .collect();
            if let Some(prev) = &previous {
                if !prev.is_subset(&now) {
                    r.monotonicity_violations += 1;
                    note(&mut r.examples, || {
                        format!("scene {}: shrank at r={radius}", r.scenes)
                    });
                }
            }
            previous = Some(now);
        }

        // A camera exactly on the boundary is included.
        for (id, p) in &points {
            let Some(p) = p else { continue };
            if id == interest {
                continue;
            }
            let d = p.point.distance(center);
            if !surrounding_ids(&points, interest, d).contains(id) {
                r.inclusivity_violations += 1;
                note(&mut r.examples, || {
                    format!("scene {}: {id} at exactly r={d} left out", r.scenes)
                });
            }
        }

        // Rigid translation of mesh and cameras keeps the selection.
        let offset = random_point(&mut rng, 100.0);
        let moved = Scene::new(
            scene.mesh.translated(offset),
            scene
                .cameras
                .iter()
                .map(|c| CameraPose {
                    position: c.position + offset,
                    ..c.clone()
                })
                .collect(),
        )
        .expect("translated scene is valid");
        let moved_points = shooting_points(&moved);
        let radius = radii[radii.len() / 2];
        let fragile = |id: &String| {
            let near_edge = |s: &Scene, pts: &ShootingPoints| {
                let cam = s.camera(id).expect("camera");
                pts[id]
                    .as_ref()
                    .is_some_and(|p| edge_margin(s, cam, p.triangle_index) < 1e-6)
            };
            let near_ball = points[id]
                .as_ref()
                .is_some_and(|p| (p.point.distance(center) - radius).abs() < 1e-6);
            near_edge(&scene, &points) || near_edge(&moved, &moved_points) || near_ball
        };
        if fragile(interest) {
            r.fragile_skipped += 1;
            continue;
        }
        let before = select_surrounding(&points, interest, radius).expect("hit");
        let after = match select_surrounding(&moved_points, interest, radius) {
            Ok(s) => s,
            Err(e) => {
                r.translation_violations += 1;
                note(&mut r.examples, || {
                    format!("scene {}: translated interest failed: {e}", r.scenes)
                });
                continue;
            }
        };
        let class = |sel: &bridgecause_core::neighborhood::NeighborhoodSelection, id: &String| {
            if sel.missed.contains(id) {
                0
            } else if sel.excluded.contains(id) {
                1
            } else {
                2
            }
        };
        for id in points.keys().filter(|id| *id != interest) {
            if class(&before, id) != class(&after, id) {
                if fragile(id) {
                    r.fragile_skipped += 1;
                } else {
                    r.translation_violations += 1;
                    note(&mut r.examples, || {
                        format!("scene {}: {id} changed class under translation", r.scenes)
                    });
                }
            }
        }
    }
    r
}

#[derive(Debug, Clone, Default)]
pub struct QaReport {
    pub annotations: usize,
    pub questions: usize,
    pub mismatches: usize,
    pub corpus_bytes: usize,
    pub corpus_deterministic: bool,
    pub examples: Vec<String>,
}

pub fn seeded_annotations(seed: u64, count: usize, vocab: &Vocabulary) -> Vec<Annotation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let pm = rng.gen_range(0.0..0.5);
            let pd = rng.gen_range(0.0..0.3);
            random_annotation(&mut rng, &format!("IMG_{i:05}"), vocab, pm, pd)
        })
        .collect()
}

/// Generated questions answered by the annotation oracle must reproduce the
/// generated answers; the corpus must be identical when regenerated.
pub fn check_qa_round_trip(seed: u64, count: usize) -> QaReport {
    let vocab = Vocabulary::default();
    let anns = seeded_annotations(seed, count, &vocab);
    let oracle = AnnotationOracle::new(vocab.clone(), &anns).expect("valid annotations");
    let mut r = QaReport {
        annotations: anns.len(),
        ..Default::default()
    };
    for ann in &anns {
        for pair in generate_qa(ann, &vocab).expect("valid annotation") {
            r.questions += 1;
            let got = oracle.answer(&ann.image_id, &pair.question);
            if got.as_ref().map(|a| &a.value) != Ok(&pair.answer.value) {
                r.mismatches += 1;
                note(&mut r.examples, || {
                    format!(
                        "{}: {:?} expected {:?} got {got:?}",
                        ann.image_id, pair.question.text, pair.answer.value
                    )
                });
            }
        }
    }
    let (first, _) = write_corpus(&anns, &vocab, 2).expect("corpus");
    let again = seeded_annotations(seed, count, &vocab);
    let (second, _) = write_corpus(&again, &vocab, 2).expect("corpus");
    r.corpus_bytes = first.len();
    r.corpus_deterministic = first == second;
    r
}

#[derive(Debug, Clone, Default)]
pub struct DiagnosisReportCheck {
    pub scenes: usize,
    pub rules: usize,
    pub recount_mismatches: usize,
    pub permutation_mismatches: usize,
    pub bound_violations: usize,
    pub examples: Vec<String>,
}

/// Random rules over random annotations: (n, m) must equal the direct
/// recount from annotations and the recount from the transcript, must not
/// depend on image order, and must satisfy m <= n <= images.
pub fn check_diagnosis_counts(seed: u64, scenes: usize) -> DiagnosisReportCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = Vocabulary::default();
    let mut r = DiagnosisReportCheck::default();
    for s in 0..scenes {
        r.scenes += 1;
        let n_images = rng.gen_range(1..40);
        let anns: Vec<Annotation> = (0..n_images)
            .map(|i| random_annotation(&mut rng, &format!("IMG_{i:04}"), &vocab, 0.3, 0.3))
            .collect();
        let oracle = AnnotationOracle::new(vocab.clone(), &anns).expect("valid");
        let images: Vec<String> = anns.iter().map(|a| a.image_id.clone()).collect();
        for k in 0..4 {
            r.rules += 1;
            let member = vocab.members().choose(&mut rng).expect("members");
            let count = rng.gen_range(1..4);
            let events: Vec<String> = vocab
                .damages()
                .choose_multiple(&mut rng, count)
                .cloned()
                .collect();
            let rule = CauseRule::new(&format!("rule {k}"), "corrosion", member, events);
            let mode = if rng.gen_bool(0.5) {
                EventMode::Full
            } else {
                EventMode::ShortCircuit
            };
            let eval = evaluate_cause(&oracle, &images, &rule, mode);
            let got = (eval.evidence.n, eval.evidence.m);
            let direct = recount_from_annotations(&anns, &images, &rule, &vocab);
            let from_transcript = recount_from_transcript(&eval.transcript, &rule.cause_name);
            if got != direct || got != from_transcript {
                r.recount_mismatches += 1;
                note(&mut r.examples, || {
                    format!("scene {s} {k}: report {got:?} annotations {direct:?} transcript {from_transcript:?}")
                });
            }
            if !(got.1 <= got.0 && got.0 <= images.len()) {
                r.bound_violations += 1;
            }
            let mut shuffled = images.clone();
            shuffled.shuffle(&mut rng);
            let again = evaluate_cause(&oracle, &shuffled, &rule, mode).evidence;
            if again != eval.evidence {
                r.permutation_mismatches += 1;
                note(&mut r.examples, || {
                    format!("scene {s} {k}: order changed evidence")
                });
            }
        }
    }
    r
}
