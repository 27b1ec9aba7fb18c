//! Test support: synthetic scenes, the field-test fixture, brute-force
//! oracles independent of the production code paths, and a stub HTTP
//! answer endpoint.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod fixture;
pub mod oracles;
pub mod stub;
pub mod synth;

pub use fixture::{field_fixture, FieldFixture};
pub use oracles::{
    naive_nearest_hit, plane_intersection, recount_from_annotations, recount_from_transcript,
};
pub use stub::{StubBehaviour, StubServer};
pub use synth::{gen_scene, SceneFiles, SyntheticSceneSpec};
