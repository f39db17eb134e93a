//! Forward reduced distance `ℓ₊`, reduced volume `θ₊` and the inequalities
//! relating them, on model spaces and conformal tori.

mod field;
mod geodesic;
mod geometry;
mod theta;

pub use field::{
    check_gradient_time_identities, check_inequalities, ell_plus_field, ell_plus_field_with, EllSolution,
    IdentityResiduals, InequalityReport, LocalDerivatives, ReducedField, ReducedOptions, ReducedPoint, ReducedSolver,
};
pub use geodesic::{
    geodesic_shoot, l_plus_of_path, path_minimization_oracle, shoot_to, vertex_head, GeodesicSolution, Interpolation,
    OracleOptions, OracleResult, PathSample, ShotResult,
};
pub use geometry::{curvature_operator_nonneg_on, FieldSample, RadialModel, ReducedGeometry, TorusFlowField};
pub use theta::*;

#[cfg(test)]
mod tests;
