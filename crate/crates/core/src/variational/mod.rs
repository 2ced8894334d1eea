//! Polyhedral cones, faces, and second-order difference diagnostics.

mod cone;
mod polytope;
mod quotient;

pub use cone::PolyhedralCone;
pub use polytope::{ExposedFace, Face, Polyhedron, MAX_POLY_DIM};
pub use quotient::{
    default_path_grid, default_t_grid, estimate_d2, hessian_fd_error, random_direction_in,
    second_diff_quotient, second_tangent_distance, validate_hessian, D2Estimate, ExampleSet,
    QuotientSample, DIVERGENCE_CAP,
};
