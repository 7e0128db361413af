//! Boundary and half-space norm functionals: tent spaces, conical square
//! functions, non-tangential and Carleson functionals, and discrete Hardy,
//! Sobolev and Hölder norms.

mod adapted;
mod boundary;
mod field;
mod tent;
mod tgrid;

pub use adapted::{adapted_extensions, adapted_hardy_norm, admissible, one_lower_star};
pub use boundary::{
    holder_norm, hp_quasinorm, l2_norm, lp_norm, pointwise_norm, relative_mean, sobolev_homog_norm, HpProfile,
    MEAN_ZERO_TOL,
};
pub(crate) use field::dirac_cellwise;
pub use field::{q_extension, q_extension_many, ExtensionOperator, HalfSpaceField};
pub use tent::{
    carleson, carleson_over, conical_square, fubini_tent_square, nt_maximal, nt_maximal_over, tent_norm,
    whitney_convergence_curve, whitney_deviation,
};
pub use tgrid::{TGrid, POINTS_PER_DECADE, TRACE_DECADES};
