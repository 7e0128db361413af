use std::fmt;
use std::sync::Arc;

use crate::C64;

type Evaluator = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

/// A holomorphic function on a sector with polynomial decay
/// `|ψ(z)| ≲ min(|z|^σ, |z|^{−τ})`.
#[derive(Clone)]
pub struct AuxiliaryFunction {
    label: String,
    eval: Evaluator,
    pub sigma: f64,
    pub tau: f64,
    /// Half-angle of the sector of holomorphy.
    pub mu: f64,
    at_zero: Option<C64>,
}

impl fmt::Debug for AuxiliaryFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AuxiliaryFunction")
            .field("label", &self.label)
            .field("sigma", &self.sigma)
            .field("tau", &self.tau)
            .field("mu", &self.mu)
            .field("at_zero", &self.at_zero)
            .finish()
    }
}

fn cpow(z: C64, s: f64) -> C64 {
    if z == C64::new(0.0, 0.0) {
        return if s == 0.0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
    }
    (z.ln() * s).exp()
}

impl AuxiliaryFunction {
    /// `at_zero` is the value re-attached to the nullspace component; `None`
    /// means the nullspace component is dropped.
    pub fn new<F>(label: impl Into<String>, sigma: f64, tau: f64, mu: f64, at_zero: Option<C64>, f: F) -> Self
    where
        F: Fn(C64) -> C64 + Send + Sync + 'static,
    {
        Self { label: label.into(), eval: Arc::new(f), sigma, tau, mu, at_zero }
    }

    /// `z^σ (1 + z)^{−σ−τ}`.
    pub fn psi_sigma_tau(sigma: f64, tau: f64) -> Self {
        Self::new(
            format!("z^{sigma}(1+z)^-{}", sigma + tau),
            sigma,
            tau,
            std::f64::consts::PI,
            Some(C64::new(0.0, 0.0)),
            move |z| cpow(z, sigma) * cpow(z + 1.0, -(sigma + tau)),
        )
    }

    /// The default auxiliary function, `σ = τ = 2`.
    pub fn default_family() -> Self {
        Self::psi_sigma_tau(2.0, 2.0)
    }

    /// `z^{1/2} e^{−z^{1/2}}`.
    pub fn sqrt_exp() -> Self {
        Self::new("z^1/2 exp(-z^1/2)", 0.5, f64::INFINITY, std::f64::consts::PI, Some(C64::new(0.0, 0.0)), |z| {
            let r = z.sqrt();
            r * (-r).exp()
        })
    }

    /// `z e^{−z}`.
    pub fn z_exp() -> Self {
        Self::new("z exp(-z)", 1.0, f64::INFINITY, std::f64::consts::FRAC_PI_2, Some(C64::new(0.0, 0.0)), |z| {
            z * (-z).exp()
        })
    }

    /// `z (1 + z)^{−2}`.
    pub fn resolvent_type() -> Self {
        Self::psi_sigma_tau(1.0, 1.0)
    }

    /// The Poisson symbol `e^{−t z^{1/2}}`; fixes constants.
    pub fn poisson(t: f64) -> Self {
        Self::new(
            format!("exp(-{t} z^1/2)"),
            0.0,
            f64::INFINITY,
            std::f64::consts::PI,
            Some(C64::new(1.0, 0.0)),
            move |z| (-z.sqrt() * t).exp(),
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn at_zero(&self) -> Option<C64> {
        self.at_zero
    }

    pub fn eval(&self, z: C64) -> C64 {
        (self.eval)(z)
    }

    /// `z ↦ ψ(s·z)`.
    pub fn dilate(&self, s: f64) -> Self {
        let inner = self.eval.clone();
        Self { label: format!("{}[z->{s}z]", self.label), eval: Arc::new(move |z| inner(z * s)), ..self.clone() }
    }

    /// Pointwise product; decay exponents add.
    pub fn mul(&self, other: &AuxiliaryFunction) -> Self {
        let (f, g) = (self.eval.clone(), other.eval.clone());
        Self {
            label: format!("({})*({})", self.label, other.label),
            eval: Arc::new(move |z| f(z) * g(z)),
            sigma: self.sigma + other.sigma,
            tau: self.tau + other.tau,
            mu: self.mu.min(other.mu),
            at_zero: match (self.at_zero, other.at_zero) {
                (Some(a), Some(b)) => Some(a * b),
                _ => None,
            },
        }
    }

    /// Sampled constant `C` in `|ψ(z)| ≤ C·min(|z|^σ, |z|^{−τ})` on the
    /// sector `|arg z| ≤ angle`. Infinite `τ` is checked as `τ = 4`.
    pub fn decay_constant(&self, angle: f64) -> f64 {
        let tau = self.tau.min(4.0);
        let mut c: f64 = 0.0;
        for i in 0..=160 {
            let r = 10f64.powf(-8.0 + 16.0 * i as f64 / 160.0);
            for j in 0..=8 {
                let theta = -angle + 2.0 * angle * j as f64 / 8.0;
                let z = C64::from_polar(r, theta);
                let bound = r.powf(self.sigma).min(r.powf(-tau));
                c = c.max(self.eval(z).norm() / bound);
            }
        }
        c
    }
}
