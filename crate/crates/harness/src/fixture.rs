//! Field-test-shaped fixture: a deck soffit with a cross beam, one interest
//! camera under the beam, 63 cameras whose shooting points fall within 0.9 m
//! of the interest point, and decoy cameras that are either further away or
//! miss the mesh.
//!
//! Annotations are scripted so that, at the default radius and with the
//! default rules, the four corrosion causes come out as
//! slab 61/58, abutment 22/18, drainage pipe 0/0 and wheel guard 0/0. The
//! decoy cameras carry drainage pipe, wheel guard, slab and abutment
//! annotations, so any mistake in the neighborhood selection changes the
//! counts.

use bridgecause_core::geometry::{TriangleMesh, Vec3};
use bridgecause_core::ingest::{CameraPose, IngestError, Scene};
use bridgecause_core::vqa::Annotation;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::synth::{MeshBuilder, SceneFiles};

pub const FIELD_SEED: u64 = 0x5eed_b21d;
pub const SOFFIT_Z: f64 = 5.0;
pub const BEAM_BOTTOM_Z: f64 = 4.4;
pub const CAMERA_Z: f64 = 1.5;

pub const SURROUNDING: usize = 63;
const ON_BEAM: usize = 11;
const EXCLUDED: usize = 12;
const MISSED: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldFixture {
    pub files: SceneFiles,
    pub interest_id: String,
    /// Sorted by id.
    pub surrounding_ids: Vec<String>,
    pub excluded_ids: Vec<String>,
    pub missed_ids: Vec<String>,
}

impl FieldFixture {
    pub fn scene(&self) -> Result<Scene, IngestError> {
        self.files.scene()
    }

    pub fn annotations(&self) -> Vec<Annotation> {
        self.files.annotations()
    }

    /// Interest image first, then the surrounding images.
    pub fn analysed_ids(&self) -> Vec<String> {
        std::iter::once(self.interest_id.clone())
            .chain(self.surrounding_ids.iter().cloned())
            .collect()
    }
}

fn bridge_mesh() -> TriangleMesh {
    let mut b = MeshBuilder::new();
    // Deck soffit.
    b.patch(
        Vec3::new(-12.7, -4.9, SOFFIT_Z),
        Vec3::new(25.4, 0.0, 0.0),
        Vec3::new(0.0, 9.8, 0.0),
        24,
        8,
    );
    // Cross beam hanging under the deck.
    b.aabb(
        Vec3::new(-0.15, -3.0, BEAM_BOTTOM_Z),
        Vec3::new(0.15, 3.0, SOFFIT_Z),
        4,
    );
    // Abutment faces at both ends.
    for x in [-12.7, 12.7] {
        b.patch(
            Vec3::new(x, -4.9, 0.0),
            Vec3::new(0.0, 9.8, 0.0),
            Vec3::new(0.0, 0.0, SOFFIT_Z),
            8,
            4,
        );
    }
    b.build()
}

/// Camera below `target`, tilted only along the beam axis so it never
/// grazes the beam on the way up.
fn camera_below<R: Rng>(rng: &mut R, target: Vec3) -> (Vec3, Vec3) {
    let dir = Vec3::new(0.0, rng.gen_range(-0.1..0.1), 1.0)
        .normalized()
        .expect("non-zero");
    let rise = target.z - CAMERA_Z;
    (target - dir * (rise / dir.z), dir)
}

fn surrounding_target<R: Rng>(rng: &mut R, index: usize) -> Vec3 {
    if index < ON_BEAM {
        Vec3::new(
            rng.gen_range(-0.12..0.12),
            rng.gen_range(-0.8..0.8),
            BEAM_BOTTOM_Z,
        )
    } else {
        // Soffit beside the beam: |x| >= 0.3 and x^2 + y^2 <= 0.44, which
        // keeps the 3D distance to the interest point under 0.9 m.
        let x = rng.gen_range(0.3..0.6) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let y_max = (0.44f64 - x * x).sqrt();
        Vec3::new(x, rng.gen_range(-y_max..y_max), SOFFIT_Z)
    }
}

fn excluded_target<R: Rng>(rng: &mut R) -> Vec3 {
    let r = rng.gen_range(2.0..8.0);
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let (x, y) = (r * angle.cos(), (r * angle.sin()).clamp(-4.5, 4.5));
    let x = if x.abs() < 0.3 {
        0.3f64.copysign(x) + x
    } else {
        x
    };
    Vec3::new(x, y, SOFFIT_Z)
}

/// Scripted annotations for the surrounding cameras, indexed like their
/// targets.
fn surrounding_annotations<R: Rng>(rng: &mut R) -> Vec<Vec<(&'static str, Vec<&'static str>)>> {
    let mut members: Vec<Vec<(&'static str, Vec<&'static str>)>> = vec![Vec::new(); SURROUNDING];
    for (i, m) in members.iter_mut().enumerate().take(ON_BEAM) {
        let damages = if i % 2 == 0 {
            vec!["corrosion"]
        } else {
            vec![]
        };
        m.push(("cross beam", damages));
    }

    let mut order: Vec<usize> = (0..SURROUNDING).collect();
    order.shuffle(rng);
    // 61 show the slab; 58 of those show cracking or leaking.
    for (k, &i) in order.iter().enumerate().take(61) {
        let damages = match k {
            0..=57 => match k % 4 {
                0 => vec!["cracking"],
                1 => vec!["leaking"],
                2 => vec!["cracking", "leaking"],
                _ => vec!["cracking", "free lime"],
            },
            58 => vec!["free lime"],
            _ => vec![],
        };
        members[i].push(("slab", damages));
    }

    order.shuffle(rng);
    // 22 show the abutment; 18 of those show leaking.
    for (k, &i) in order.iter().enumerate().take(22) {
        let damages = match k {
            0..=17 if k % 3 == 0 => vec!["leaking", "free lime"],
            0..=17 => vec!["leaking"],
            18 => vec!["cracking"],
            _ => vec![],
        };
        members[i].push(("abutment", damages));
    }
    members
}

fn annotate(id: &str, members: &[(&str, Vec<&str>)]) -> Annotation {
    members.iter().fold(Annotation::new(id), |a, (m, d)| {
        a.with_member(m, d.iter().copied())
    })
}

/// Builds the fixture. Deterministic: every call returns identical bytes.
pub fn field_fixture() -> FieldFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(FIELD_SEED);
    let total = 1 + SURROUNDING + EXCLUDED + MISSED;

    let mut numbers: Vec<u32> = (1..1000).collect();
    numbers.shuffle(&mut rng);
    let ids: Vec<String> = numbers[..total]
        .iter()
        .map(|n| format!("DJI_{n:04}"))
        .collect();

    let mut poses = Vec::with_capacity(total);
    let mut annotations = Vec::with_capacity(total);
    let pose = |id: &str, position: Vec3, view_dir: Vec3| CameraPose {
        image_id: id.to_string(),
        position,
        view_dir,
        image_path: Some(format!("images/{id}.JPG")),
    };

    let interest_id = ids[0].clone();
    poses.push(pose(
        &interest_id,
        Vec3::new(0.0, 0.0, CAMERA_Z),
        Vec3::new(0.0, 0.0, 1.0),
    ));
    annotations.push(Annotation::new(&interest_id).with_member("cross beam", ["corrosion"]));

    let scripted = surrounding_annotations(&mut rng);
    let surrounding = &ids[1..=SURROUNDING];
    for (i, id) in surrounding.iter().enumerate() {
        let target = surrounding_target(&mut rng, i);
        let (position, dir) = camera_below(&mut rng, target);
        poses.push(pose(id, position, dir));
        annotations.push(annotate(id, &scripted[i]));
    }

    let decoys: [&[(&str, Vec<&str>)]; 4] = [
        &[
            ("drainage pipe", vec!["corrosion", "leaking"]),
            ("slab", vec![]),
        ],
        &[("wheel guard", vec!["leaking"]), ("slab", vec!["cracking"])],
        &[("abutment", vec![]), ("drainage pipe", vec!["fissure"])],
        &[("slab", vec![]), ("abutment", vec!["leaking"])],
    ];
    let excluded = &ids[1 + SURROUNDING..1 + SURROUNDING + EXCLUDED];
    for (i, id) in excluded.iter().enumerate() {
        let target = excluded_target(&mut rng);
        let (position, dir) = camera_below(&mut rng, target);
        poses.push(pose(id, position, dir));
        annotations.push(annotate(id, decoys[i % decoys.len()]));
    }

    let missed = &ids[1 + SURROUNDING + EXCLUDED..];
    for (i, id) in missed.iter().enumerate() {
        let position = Vec3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), CAMERA_Z);
        poses.push(pose(id, position, Vec3::new(0.0, 0.0, -1.0)));
        annotations.push(annotate(
            id,
            &[
                ("drainage pipe", vec!["fracture"]),
                ("wheel guard", vec!["leaking"]),
            ][i % 2..],
        ));
    }

    // Pose files from SfM tools are not sorted by anything useful.
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);
    let poses: Vec<CameraPose> = order.iter().map(|&i| poses[i].clone()).collect();
    let annotations: Vec<Annotation> = order.iter().map(|&i| annotations[i].clone()).collect();

    let sorted = |s: &[String]| {
        let mut v = s.to_vec();
        v.sort();
        v
    };
    FieldFixture {
        files: SceneFiles::new(&bridge_mesh(), &poses, &annotations),
        interest_id,
        surrounding_ids: sorted(surrounding),
        excluded_ids: sorted(excluded),
        missed_ids: sorted(missed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::recount_from_annotations;
    use bridgecause_core::diagnosis::default_rules;
    use bridgecause_core::neighborhood::{select_surrounding, shooting_points, DEFAULT_RADIUS};
    use bridgecause_core::vqa::Vocabulary;

    #[test]
    fn deterministic() {
        assert_eq!(field_fixture(), field_fixture());
    }

    #[test]
    fn selection_matches_the_script() {
        let fx = field_fixture();
        let scene = fx.scene().unwrap();
        assert_eq!(scene.cameras.len(), 78);
        let points = shooting_points(&scene);
        let sel = select_surrounding(&points, &fx.interest_id, DEFAULT_RADIUS).unwrap();
        assert_eq!(sel.interest.point, Vec3::new(0.0, 0.0, BEAM_BOTTOM_Z));
        let mut got: Vec<String> = sel
            .surrounding
            .iter()
            .map(|n| n.shooting_point.image_id.clone())
            .collect();
        got.sort();
        assert_eq!(got, fx.surrounding_ids);
        assert!(sel.surrounding.iter().all(|n| n.distance <= 0.9));
        assert_eq!(sel.excluded, fx.excluded_ids);
        assert_eq!(sel.missed, fx.missed_ids);
    }

    #[test]
    fn scripted_counts() {
        let fx = field_fixture();
        let vocab = Vocabulary::default();
        let anns = fx.annotations();
        let images = fx.analysed_ids();
        let counts: Vec<(usize, usize)> = default_rules()
            .iter()
            .map(|r| recount_from_annotations(&anns, &images, r, &vocab))
            .collect();
        assert_eq!(counts, vec![(61, 58), (22, 18), (0, 0), (0, 0)]);

        // Adding the decoys would disturb every row.
        let all: Vec<String> = anns.iter().map(|a| a.image_id.clone()).collect();
        for r in default_rules() {
            let with_decoys = recount_from_annotations(&anns, &all, &r, &vocab);
            assert_ne!(
                with_decoys,
                recount_from_annotations(&anns, &images, &r, &vocab)
            );
        }
    }
}
