//! Part-aware shape processing toolkit.
//!
//! The crate covers the non-neural half of a part-based 3D generation stack:
//!
//! - [`mesh`]: triangle meshes, OBJ/glTF loading with scene flattening,
//!   welding, components, volume, normalization and surface sampling.
//! - [`obb`]: oriented boxes, the exact minimum-volume box search and the
//!   enclosing box of a layout.
//! - [`segmentation`]: the dataset pipeline turning raw meshes into
//!   part-segmented records with box layouts.
//! - [`metrics`]: exact box IoU, part/object/voxel IoU and corpus statistics.
//! - [`refine`]: beam-search layout alignment and floating-artifact removal.
//! - [`sampler`]: a denoiser-agnostic rectified-flow sampler with guidance,
//!   control annealing, latent freezing and key/value reinjection schedules.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod hull;
pub mod mesh;
pub mod metrics;
pub mod obb;
pub mod refine;
pub mod sampler;
pub mod segmentation;
pub mod union_find;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use mesh::{Aabb, MeshFormat, NormalizationTransform, TriMesh};
pub use metrics::Layout;
pub use obb::Obb;
pub use refine::SimilarityTransform;
pub use segmentation::ShapeRecord;
