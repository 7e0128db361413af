//! Boundary value problems on the half-space through explicit semigroup
//! formulas, with a collocation energy solver on a finite strip as reference.

mod bvp;
mod energy;

pub use bvp::{
    p_star, pde_residuals, ratio, remove_mean, solve_dirichlet, solve_dirichlet_holder, solve_dirichlet_hp,
    solve_neumann, solve_regularity, truncation_radii, BoundaryData, BoundaryKind, BvpSolution, Diagnostics,
    STENCIL_STEP,
};
pub use energy::{
    chebyshev_matrix, check_compatibility, compare_with_semigroup, dense_sqrt, energy_solution, measured_order,
    CompatibilityReport, EnergySolution, TopCondition, ENERGY_MAX_DIM,
};
