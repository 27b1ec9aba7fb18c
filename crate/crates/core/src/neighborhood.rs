//! Shooting points and surrounding-image selection.
//!
//! An image's shooting point is where its optical axis first meets the mesh.
//! Images whose shooting points lie within `radius` of the interest image's
//! shooting point (boundary included) are its surrounding images.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::ingest::Scene;
use crate::par::map_ordered;

/// Radius of the neighborhood ball (m).
pub const DEFAULT_RADIUS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingPoint {
    pub image_id: String,
    pub point: Vec3,
    /// Distance from the camera along its view direction (m).
    pub t: f64,
    pub triangle_index: usize,
}

/// Per-image shooting point, `None` when the view ray misses the mesh.
pub type ShootingPoints = BTreeMap<String, Option<ShootingPoint>>;

#[derive(Debug, Error, PartialEq)]
pub enum NeighborhoodError {
    #[error("unknown image {0:?}")]
    UnknownImage(String),
    #[error("image {0:?} does not view the mesh; its shooting point is undefined")]
    InterestMissed(String),
    #[error("radius must be finite and non-negative, got {0}")]
    InvalidRadius(f64),
}

pub fn shooting_points(scene: &Scene) -> ShootingPoints {
    shooting_points_with_workers(scene, 1)
}

/// Casts every camera's view ray on up to `workers` threads.
pub fn shooting_points_with_workers(scene: &Scene, workers: usize) -> ShootingPoints {
    let hits = map_ordered(&scene.cameras, workers, |cam| {
        let ray = cam.ray();
        scene.mesh.nearest_hit(&ray).map(|hit| ShootingPoint {
            image_id: cam.image_id.clone(),
            point: ray.at(hit.t),
            t: hit.t,
            triangle_index: hit.triangle_index,
        })
    });
    scene
        .cameras
        .iter()
        .map(|c| c.image_id.clone())
        .zip(hits)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    #[serde(flatten)]
    pub shooting_point: ShootingPoint,
    /// Distance to the interest shooting point (m).
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSelection {
    pub interest: ShootingPoint,
    pub radius: f64,
    /// Sorted by `(distance, image_id)`.
    pub surrounding: Vec<Neighbor>,
    /// Hit the mesh outside the ball. Sorted by id.
    pub excluded: Vec<String>,
    /// No mesh hit. Sorted by id.
    pub missed: Vec<String>,
}

impl NeighborhoodSelection {
    /// Interest image first, then the surrounding images in selection order.
    pub fn analysed_images(&self) -> Vec<String> {
        std::iter::once(self.interest.image_id.clone())
            .chain(
                self.surrounding
                    .iter()
                    .map(|n| n.shooting_point.image_id.clone()),
            )
            .collect()
    }

    pub fn camera_count(&self) -> usize {
        1 + self.surrounding.len() + self.excluded.len() + self.missed.len()
    }

    /// Flat per-image classification for plotting.
    pub fn to_document(&self, points: &ShootingPoints) -> SelectionDocument {
        let mut status: BTreeMap<&str, (CameraClass, Option<f64>)> = BTreeMap::new();
        status.insert(&self.interest.image_id, (CameraClass::Interest, Some(0.0)));
        for n in &self.surrounding {
            status.insert(
                &n.shooting_point.image_id,
                (CameraClass::Surrounding, Some(n.distance)),
            );
        }
        for id in &self.excluded {
            let d = points
                .get(id)
                .and_then(|p| p.as_ref())
                .map(|p| p.point.distance(self.interest.point));
            status.insert(id, (CameraClass::Excluded, d));
        }
        for id in &self.missed {
            status.insert(id, (CameraClass::Missed, None));
        }
        let cameras = status
            .into_iter()
            .map(|(id, (class, distance))| ClassifiedCamera {
                image_id: id.to_string(),
                class,
                point: points.get(id).and_then(|p| p.as_ref()).map(|p| p.point),
                distance,
            })
            .collect();
        SelectionDocument {
            interest_image: self.interest.image_id.clone(),
            interest_point: self.interest.point,
            radius: self.radius,
            surrounding_count: self.surrounding.len(),
            excluded_count: self.excluded.len(),
            missed_count: self.missed.len(),
            cameras,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraClass {
    Interest,
    Surrounding,
    Excluded,
    Missed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedCamera {
    pub image_id: String,
    pub class: CameraClass,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec3>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDocument {
    pub interest_image: String,
    pub interest_point: Vec3,
    pub radius: f64,
    pub surrounding_count: usize,
    pub excluded_count: usize,
    pub missed_count: usize,
    pub cameras: Vec<ClassifiedCamera>,
}

/// Document listing every camera's shooting point, or its miss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingDocument {
    pub hits: Vec<ShootingPoint>,
    pub missed: Vec<String>,
}

impl ShootingDocument {
    pub fn new(points: &ShootingPoints) -> Self {
        let hits = points.values().flatten().cloned().collect();
        let missed = points
            .iter()
            .filter(|(_, p)| p.is_none())
            .map(|(id, _)| id.clone())
            .collect();
        Self { hits, missed }
    }
}

/// Splits cameras into interest / surrounding / excluded / missed.
pub fn select_surrounding(
    points: &ShootingPoints,
    interest_id: &str,
    radius: f64,
) -> Result<NeighborhoodSelection, NeighborhoodError> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(NeighborhoodError::InvalidRadius(radius));
    }
    let interest = points
        .get(interest_id)
        .ok_or_else(|| NeighborhoodError::UnknownImage(interest_id.to_string()))?
        .clone()
        .ok_or_else(|| NeighborhoodError::InterestMissed(interest_id.to_string()))?;

    let mut surrounding = Vec::new();
    let mut excluded = Vec::new();
    let mut missed = Vec::new();
    // BTreeMap iteration is id-sorted, so excluded/missed come out sorted.
    for (id, sp) in points {
        if id == interest_id {
            continue;
        }
        match sp {
            None => missed.push(id.clone()),
            Some(sp) => {
                let distance = sp.point.distance(interest.point);
                if distance <= radius {
                    surrounding.push(Neighbor {
                        shooting_point: sp.clone(),
                        distance,
                    });
                } else {
                    excluded.push(id.clone());
                }
            }
        }
    }
    surrounding.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then_with(|| a.shooting_point.image_id.cmp(&b.shooting_point.image_id))
    });

    Ok(NeighborhoodSelection {
        interest,
        radius,
        surrounding,
        excluded,
        missed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Triangle, TriangleMesh};
    use crate::ingest::CameraPose;

    fn sp(id: &str, p: [f64; 3]) -> (String, Option<ShootingPoint>) {
        (
            id.to_string(),
            Some(ShootingPoint {
                image_id: id.to_string(),
                point: p.into(),
                t: 1.0,
                triangle_index: 0,
            }),
        )
    }

    fn unit_scene(cameras: Vec<CameraPose>) -> Scene {
        let tri = Triangle::new(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        );
        Scene::new(TriangleMesh::from_triangles(&[tri]), cameras).unwrap()
    }

    fn cam(id: &str, pos: [f64; 3], dir: [f64; 3]) -> CameraPose {
        CameraPose {
            image_id: id.into(),
            position: pos.into(),
            view_dir: dir.into(),
            image_path: None,
        }
    }

    #[test]
    fn camera_facing_the_triangle_hits_it() {
        let scene = unit_scene(vec![
            cam("a", [0.0, 0.0, -1.0], [0.0, 0.0, 1.0]),
            cam("b", [0.0, 0.0, -1.0], [0.0, 0.0, -1.0]),
        ]);
        let pts = shooting_points(&scene);
        let a = pts["a"].as_ref().unwrap();
        assert_eq!((a.point, a.t), (Vec3::ZERO, 1.0));
        assert_eq!(pts["b"], None);

        let sel = select_surrounding(&pts, "a", DEFAULT_RADIUS).unwrap();
        assert_eq!(sel.missed, vec!["b".to_string()]);
        assert!(sel.surrounding.is_empty());
        assert_eq!(
            select_surrounding(&pts, "b", 1.0),
            Err(NeighborhoodError::InterestMissed("b".into()))
        );
        assert_eq!(
            select_surrounding(&pts, "zzz", 1.0),
            Err(NeighborhoodError::UnknownImage("zzz".into()))
        );
    }

    #[test]
    fn shared_point_means_everyone_surrounds() {
        let pts: ShootingPoints = ["a", "b", "c"]
            .iter()
            .map(|id| sp(id, [1.0, 2.0, 3.0]))
            .collect();
        let sel = select_surrounding(&pts, "b", 1.0).unwrap();
        let ids: Vec<_> = sel
            .surrounding
            .iter()
            .map(|n| n.shooting_point.image_id.as_str())
            .collect();
        assert_eq!(ids, ["a", "c"]);
        // Zero radius still keeps coincident points.
        assert_eq!(
            select_surrounding(&pts, "b", 0.0)
                .unwrap()
                .surrounding
                .len(),
            2
        );
    }

    #[test]
    fn boundary_is_inclusive() {
        let pts: ShootingPoints = [
            sp("i", [0.0, 0.0, 0.0]),
            sp("x", [1.0, 0.0, 0.0]),
            sp("y", [0.0, -1.0, 0.0]),
            sp("z", [0.0, 0.0, 1.0]),
            sp("far", [0.0, 0.0, 1.0 + 1e-12]),
        ]
        .into_iter()
        .collect();
        let sel = select_surrounding(&pts, "i", 1.0).unwrap();
        assert_eq!(sel.surrounding.len(), 3);
        assert_eq!(sel.excluded, vec!["far".to_string()]);
        assert!(sel.surrounding.iter().all(|n| n.distance == 1.0));
    }

    #[test]
    fn radius_zero_keeps_only_interest() {
        let pts: ShootingPoints = [sp("i", [0.0; 3]), sp("j", [0.1, 0.0, 0.0])]
            .into_iter()
            .collect();
        let sel = select_surrounding(&pts, "i", 0.0).unwrap();
        assert!(sel.surrounding.is_empty());
        assert_eq!(sel.analysed_images(), vec!["i".to_string()]);
    }

    #[test]
    fn invalid_radius() {
        let pts: ShootingPoints = [sp("i", [0.0; 3])].into_iter().collect();
        for r in [-1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                select_surrounding(&pts, "i", r),
                Err(NeighborhoodError::InvalidRadius(_))
            ));
        }
    }

    #[test]
    fn surrounding_sorted_by_distance_then_id() {
        let pts: ShootingPoints = [
            sp("i", [0.0; 3]),
            sp("d", [0.5, 0.0, 0.0]),
            sp("c", [0.0, 0.5, 0.0]),
            sp("a", [0.7, 0.0, 0.0]),
            sp("b", [0.1, 0.0, 0.0]),
        ]
        .into_iter()
        .collect();
        let sel = select_surrounding(&pts, "i", 1.0).unwrap();
        let ids: Vec<_> = sel
            .surrounding
            .iter()
            .map(|n| n.shooting_point.image_id.as_str())
            .collect();
        assert_eq!(ids, ["b", "c", "d", "a"]);
    }

    #[test]
    fn document_classifies_every_camera() {
        let mut pts: ShootingPoints = [
            sp("i", [0.0; 3]),
            sp("n", [0.5, 0.0, 0.0]),
            sp("f", [5.0, 0.0, 0.0]),
        ]
        .into_iter()
        .collect();
        pts.insert("m".into(), None);
        let sel = select_surrounding(&pts, "i", 1.0).unwrap();
        let doc = sel.to_document(&pts);
        let classes: Vec<_> = doc
            .cameras
            .iter()
            .map(|c| (c.image_id.as_str(), c.class))
            .collect();
        assert_eq!(
            classes,
            [
                ("f", CameraClass::Excluded),
                ("i", CameraClass::Interest),
                ("m", CameraClass::Missed),
                ("n", CameraClass::Surrounding)
            ]
        );
        assert_eq!(doc.cameras[0].distance, Some(5.0));
        assert_eq!(sel.camera_count(), 4);

        let shots = ShootingDocument::new(&pts);
        assert_eq!(shots.hits.len(), 3);
        assert_eq!(shots.missed, vec!["m".to_string()]);
    }
}
