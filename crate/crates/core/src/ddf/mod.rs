//! Reference-point generation and the directional distance field
//! `(f, h)` of a surface, with derivatives with respect to the surface's
//! own coordinates.

mod field;
mod refgen;

pub use field::{
    ddf_grad_mesh, ddf_grad_point_cloud, ddf_mesh, ddf_point_cloud, weighted_foot, CloudFoot, DdfConfig,
    DdfField, DdfGradEntry, DdfGradient, DdfSample, Pullback, SINGULAR_DISTANCE,
};
pub use refgen::{generate_reference_points, RefGenConfig, RefSources, ReferencePointSet};
