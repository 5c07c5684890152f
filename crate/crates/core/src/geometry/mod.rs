//! Parametric 2D domains, their triangulations, and exact boundary data
//! (normals, curvature, arclength, measures).

mod curve;
mod domain;
mod mesh;

pub use curve::Curve;
pub use domain::{build_domain, Domain, DomainKind, DomainSpec, Rect};
pub use mesh::{
    boundary_geometry, measure, resolution_to_h, triangulate, BoundaryEdge, EdgeGeometry, Mesh,
};
