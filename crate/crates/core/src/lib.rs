//! Bridge damage cause estimation from multi-image evidence.
//!
//! The pipeline has three stages:
//!
//! 1. **Geometry**: cast each camera's optical-axis ray against the
//!    reconstructed triangle mesh; the nearest hit is the image's shooting point.
//! 2. **Neighborhood**: collect every image whose shooting point lies inside a
//!    ball around the shooting point of the image of interest.
//! 3. **Diagnosis**: ask a visual question answering oracle, image by image,
//!    whether the member related to each candidate cause is present and whether
//!    a causal event is visible on it; rank causes by the ratio `M / N`.
//!
//! All coordinates are meters. The mesh and poses are ingested from Wavefront
//! OBJ and a JSON pose document (see [`ingest`]).

// Float guards are written as `!(x >= limit)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnosis;
pub mod geometry;
pub mod ingest;
pub mod neighborhood;
pub mod vqa;

mod par;

pub use diagnosis::{
    default_rules, diagnose, evaluate_cause, identify_damage_and_member, CauseEvidence, CauseRule,
    DiagnoseOptions, DiagnosisError, DiagnosisReport,
};
pub use geometry::{intersect_triangle, Bvh, Hit, Ray, Triangle, TriangleMesh, Vec3};
pub use ingest::{parse_mesh_obj, parse_poses, serialize_poses, CameraPose, IngestError, Scene};
pub use neighborhood::{select_surrounding, shooting_points, NeighborhoodSelection, ShootingPoint};
pub use vqa::{
    generate_qa, render_question, Annotation, AnnotationOracle, Answer, AnswerOracle, OracleError,
    QaPair, Question, RemoteOracle, TemplateId, Vocabulary,
};
