use super::field::{q_extension, q_extension_many, ExtensionOperator, HalfSpaceField};
use super::tent::tent_norm;
use super::tgrid::TGrid;
use crate::calculus::AuxiliaryFunction;
use crate::error::{Error, Result};
use crate::operators::DivFormOperator;
use crate::C64;

/// Lower exponent floor `1_* = n/(n+1)`.
pub fn one_lower_star(n: usize) -> f64 {
    n as f64 / (n as f64 + 1.0)
}

/// Decay requirements for `ψ(t²L)` extensions measured in `T^{s,p}`:
/// `σ > s/2` and `τ > max(0, n/(2p) − s/2)`.
pub fn admissible(psi: &AuxiliaryFunction, n: usize, s: f64, p: f64) -> Result<()> {
    if !(p > one_lower_star(n)) {
        return Err(Error::Precondition(format!("tent exponent {p} must exceed 1_* = {:.4}", one_lower_star(n))));
    }
    let need_sigma = s / 2.0;
    let need_tau = (n as f64 / (2.0 * p) - s / 2.0).max(0.0);
    if !(psi.sigma > need_sigma) || !(psi.tau > need_tau) {
        return Err(Error::Precondition(format!(
            "auxiliary function {} (sigma = {}, tau = {}) is not admissible for s = {s}, p = {p}: \
             need sigma > {need_sigma} and tau > {need_tau}",
            psi.label(),
            psi.sigma,
            psi.tau
        )));
    }
    Ok(())
}

/// Adapted Hardy–Sobolev quasi-norm `‖ψ(t²L) f‖_{T^{s,p}}`.
pub fn adapted_hardy_norm(
    op: &DivFormOperator,
    f: &[C64],
    s: f64,
    p: f64,
    psi: &AuxiliaryFunction,
    tgrid: &TGrid,
) -> Result<f64> {
    admissible(psi, op.grid().n(), s, p)?;
    let field = q_extension(ExtensionOperator::L(op), psi, f, tgrid)?;
    Ok(tent_norm(&field, s, p))
}

/// Extensions of many inputs, so several `(s, p)` can be read off the same fields.
pub fn adapted_extensions(
    target: ExtensionOperator<'_>,
    fs: &[Vec<C64>],
    psi: &AuxiliaryFunction,
    tgrid: &TGrid,
) -> Result<Vec<HalfSpaceField>> {
    q_extension_many(target, psi, fs, tgrid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{CoefficientFamily, CoefficientField, GridSpec};

    #[test]
    fn admissibility_policy() {
        let psi = AuxiliaryFunction::default_family();
        assert!(admissible(&psi, 1, 0.0, 2.0).is_ok());
        assert!(admissible(&psi, 2, 1.0, 0.7).is_ok());
        assert!(admissible(&psi, 1, 0.0, 0.5).is_err());
        assert!(admissible(&AuxiliaryFunction::sqrt_exp(), 1, 1.0, 2.0).is_err());
        assert!(admissible(&AuxiliaryFunction::psi_sigma_tau(2.0, 0.2), 1, 0.0, 1.0).is_err());
    }

    #[test]
    fn zero_data_has_zero_norm() {
        let g = GridSpec::new(1, 1, 16, &[1.0]).unwrap();
        let l =
            DivFormOperator::assemble(&CoefficientField::from_family(&g, &CoefficientFamily::t2()).unwrap()).unwrap();
        let z = vec![C64::new(0.0, 0.0); 16];
        let v = adapted_hardy_norm(&l, &z, 0.0, 2.0, &AuxiliaryFunction::default_family(), &TGrid::default_for(&g))
            .unwrap();
        assert_eq!(v, 0.0);
    }
}
