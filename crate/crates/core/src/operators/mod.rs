//! Grids, coefficient fields and the assembled operators `L` and `DB`.

mod coefficients;
mod dirac;
mod divform;
mod grid;

pub use coefficients::{
    hermitian_part_min, invert_small, verify_accretivity, verify_garding, CoefficientFamily, CoefficientField,
    GardingMethod, GardingReport, GARDING_DENSE_LIMIT,
};
pub use dirac::DiracOperator;
pub use divform::{apply_blocks, divergence, gradient, gradient_matrix, DivFormOperator};
pub use grid::GridSpec;
