use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Particle species. The sign enters the characteristics and the charge sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Species {
    Plus,
    Minus,
}

impl Species {
    pub const BOTH: [Species; 2] = [Species::Plus, Species::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Species::Plus => 1.0,
            Species::Minus => -1.0,
        }
    }
}

/// Decay envelope `w(e) = c (1 + e)^(-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightSpec {
    pub c: f64,
    pub alpha: f64,
}

impl WeightSpec {
    pub fn new(c: f64, alpha: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidInput(format!("weight scale c = {c} must be positive")));
        }
        if !(alpha > 2.0) {
            return Err(Error::NonIntegrableWeight { alpha });
        }
        Ok(WeightSpec { c, alpha })
    }

    pub fn eval(&self, e: f64) -> f64 {
        self.c * (1.0 + e.abs()).powf(-self.alpha)
    }

    pub fn derivative(&self, e: f64) -> f64 {
        -self.alpha * self.c * (1.0 + e).powf(-self.alpha - 1.0)
    }

    /// `∫_E^∞ w(e) e de`, which equals `∫_{r>R} w r dr` with `E = ⟨R⟩`.
    pub fn shell_tail(&self, energy: f64) -> f64 {
        let a = self.alpha;
        let u = 1.0 + energy;
        self.c * (u.powf(2.0 - a) / (a - 2.0) - u.powf(1.0 - a) / (a - 1.0))
    }

    /// Smallest radius whose tail carries at most `tol` of the total mass.
    pub fn tail_radius(&self, tol: f64) -> f64 {
        let total = self.shell_tail(1.0);
        let target = tol * total;
        let (mut lo, mut hi) = (1.0f64, 2.0f64);
        while self.shell_tail(hi) > target {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if self.shell_tail(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < 1e-14 {
                break;
            }
        }
        (hi * hi - 1.0).sqrt()
    }
}

/// The minus-species distribution `μ⁻(e, p)` with its partial derivatives.
pub trait Distribution: Send + Sync {
    fn name(&self) -> &str;
    fn value(&self, e: f64, p: f64) -> f64;
    fn d_e(&self, e: f64, p: f64) -> f64;
    fn d_p(&self, e: f64, p: f64) -> f64;

    /// Energies where the profile is only piecewise smooth, or where the radial
    /// rule should place a panel edge.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn parameters(&self) -> Vec<(String, f64)> {
        Vec::new()
    }

    /// True when `μ` does not depend on `p`.
    fn is_isotropic(&self) -> bool {
        false
    }
}

/// A purely magnetic equilibrium profile: `μ⁺(e,p) := μ⁻(e,−p)`.
#[derive(Clone)]
pub struct EquilibriumProfile {
    minus: Arc<dyn Distribution>,
    pub weight: WeightSpec,
}

impl fmt::Debug for EquilibriumProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EquilibriumProfile")
            .field("name", &self.minus.name())
            .field("parameters", &self.minus.parameters())
            .field("weight", &self.weight)
            .finish()
    }
}

impl EquilibriumProfile {
    pub fn new(minus: Arc<dyn Distribution>, weight: WeightSpec) -> Self {
        EquilibriumProfile { minus, weight }
    }

    pub fn name(&self) -> &str {
        self.minus.name()
    }

    pub fn parameters(&self) -> Vec<(String, f64)> {
        self.minus.parameters()
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.minus.breakpoints()
    }

    pub fn is_isotropic(&self) -> bool {
        self.minus.is_isotropic()
    }

    pub fn mu(&self, species: Species, e: f64, p: f64) -> f64 {
        debug_assert!(e >= 1.0 - 1e-12);
        match species {
            Species::Minus => self.minus.value(e, p),
            Species::Plus => self.minus.value(e, -p),
        }
    }

    pub fn mu_e(&self, species: Species, e: f64, p: f64) -> f64 {
        debug_assert!(e >= 1.0 - 1e-12);
        match species {
            Species::Minus => self.minus.d_e(e, p),
            Species::Plus => self.minus.d_e(e, -p),
        }
    }

    pub fn mu_p(&self, species: Species, e: f64, p: f64) -> f64 {
        debug_assert!(e >= 1.0 - 1e-12);
        match species {
            Species::Minus => self.minus.d_p(e, p),
            Species::Plus => -self.minus.d_p(e, -p),
        }
    }

    /// Evaluation with the energy floor enforced.
    pub fn checked(&self, species: Species, e: f64, p: f64) -> Result<(f64, f64, f64)> {
        if !(e >= 1.0) {
            return Err(Error::EnergyFloor(e));
        }
        let v = (self.mu(species, e, p), self.mu_e(species, e, p), self.mu_p(species, e, p));
        if !(v.0.is_finite() && v.1.is_finite() && v.2.is_finite()) {
            return Err(Error::ProfileEvaluation { e, p });
        }
        Ok(v)
    }
}

/// `μ ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroProfile;

impl Distribution for ZeroProfile {
    fn name(&self) -> &str {
        "zero"
    }
    fn value(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn d_e(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn d_p(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn is_isotropic(&self) -> bool {
        true
    }
}

/// Isotropic nonmonotone profile: `e − 1` on `[1,2)`, `exp(−(e−2)²)` beyond.
#[derive(Debug, Clone, Copy, Default)]
pub struct PaperHomogeneous;

pub(crate) fn ramp_gauss(e: f64) -> f64 {
    if e < 2.0 {
        e - 1.0
    } else {
        (-(e - 2.0) * (e - 2.0)).exp()
    }
}

pub(crate) fn ramp_gauss_derivative(e: f64) -> f64 {
    if e < 2.0 {
        1.0
    } else {
        -2.0 * (e - 2.0) * (-(e - 2.0) * (e - 2.0)).exp()
    }
}

impl Distribution for PaperHomogeneous {
    fn name(&self) -> &str {
        "paper_homogeneous"
    }
    fn value(&self, e: f64, _: f64) -> f64 {
        ramp_gauss(e)
    }
    fn d_e(&self, e: f64, _: f64) -> f64 {
        ramp_gauss_derivative(e)
    }
    fn d_p(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![2.0]
    }
    fn is_isotropic(&self) -> bool {
        true
    }
}

/// `μ = α(e)(1 + κ p²)` with `α` the ramp-Gauss energy profile. Anisotropy in
/// `p` feeds the `∫ v̂₂ μ_p` term of the magnetic block.
#[derive(Debug, Clone, Copy)]
pub struct Anisotropic {
    pub kappa: f64,
}

impl Distribution for Anisotropic {
    fn name(&self) -> &str {
        "anisotropic"
    }
    fn value(&self, e: f64, p: f64) -> f64 {
        ramp_gauss(e) * (1.0 + self.kappa * p * p)
    }
    fn d_e(&self, e: f64, p: f64) -> f64 {
        ramp_gauss_derivative(e) * (1.0 + self.kappa * p * p)
    }
    fn d_p(&self, e: f64, p: f64) -> f64 {
        2.0 * self.kappa * p * ramp_gauss(e)
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![2.0]
    }
    fn parameters(&self) -> Vec<(String, f64)> {
        vec![("kappa".into(), self.kappa)]
    }
}

/// `μ⁻ = a(e) β(p)` with
/// `a(e) = exp(−(e−1)/θ) + δ exp(−((e−e_b)/σ_b)²)` and
/// `β(p) = (1 + κp²) exp(−p²/(2s²))`.
///
/// The small bump makes `a` increase on a thin shell, so the profile is
/// nonmonotone; `κ` makes `g′(0) < 0`.
#[derive(Debug, Clone, Copy)]
pub struct WeakFieldFamily {
    pub theta: f64,
    pub kappa: f64,
    pub s: f64,
    pub delta: f64,
    pub e_b: f64,
    pub sigma_b: f64,
}

impl Default for WeakFieldFamily {
    fn default() -> Self {
        WeakFieldFamily { theta: 0.5, kappa: 0.5, s: 2.0, delta: 0.025, e_b: 2.5, sigma_b: 0.15 }
    }
}

impl WeakFieldFamily {
    fn a(&self, e: f64) -> f64 {
        let z = (e - self.e_b) / self.sigma_b;
        (-(e - 1.0) / self.theta).exp() + self.delta * (-z * z).exp()
    }
    fn a_e(&self, e: f64) -> f64 {
        let z = (e - self.e_b) / self.sigma_b;
        -(-(e - 1.0) / self.theta).exp() / self.theta
            - self.delta * 2.0 * z / self.sigma_b * (-z * z).exp()
    }
    fn beta(&self, p: f64) -> f64 {
        (1.0 + self.kappa * p * p) * (-p * p / (2.0 * self.s * self.s)).exp()
    }
    fn beta_p(&self, p: f64) -> f64 {
        let s2 = self.s * self.s;
        (2.0 * self.kappa * p - (1.0 + self.kappa * p * p) * p / s2) * (-p * p / (2.0 * s2)).exp()
    }
}

impl Distribution for WeakFieldFamily {
    fn name(&self) -> &str {
        "weakfield_family"
    }
    fn value(&self, e: f64, p: f64) -> f64 {
        self.a(e) * self.beta(p)
    }
    fn d_e(&self, e: f64, p: f64) -> f64 {
        self.a_e(e) * self.beta(p)
    }
    fn d_p(&self, e: f64, p: f64) -> f64 {
        self.a(e) * self.beta_p(p)
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![self.e_b - 2.0 * self.sigma_b, self.e_b + 2.0 * self.sigma_b]
    }
    fn parameters(&self) -> Vec<(String, f64)> {
        vec![
            ("theta".into(), self.theta),
            ("kappa".into(), self.kappa),
            ("s".into(), self.s),
            ("delta".into(), self.delta),
            ("e_b".into(), self.e_b),
            ("sigma_b".into(), self.sigma_b),
        ]
    }
}

type ProfileFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Profile assembled from closures, for library users and tests.
pub struct FnProfile {
    pub name: String,
    pub value: ProfileFn,
    pub d_e: ProfileFn,
    pub d_p: ProfileFn,
    pub breakpoints: Vec<f64>,
}

impl Distribution for FnProfile {
    fn name(&self) -> &str {
        &self.name
    }
    fn value(&self, e: f64, p: f64) -> f64 {
        (self.value)(e, p)
    }
    fn d_e(&self, e: f64, p: f64) -> f64 {
        (self.d_e)(e, p)
    }
    fn d_p(&self, e: f64, p: f64) -> f64 {
        (self.d_p)(e, p)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

impl EquilibriumProfile {
    pub fn zero() -> Self {
        Self::new(Arc::new(ZeroProfile), WeightSpec { c: 1.0, alpha: 20.0 })
    }

    pub fn paper_homogeneous() -> Self {
        Self::new(Arc::new(PaperHomogeneous), WeightSpec { c: 1e13, alpha: 20.0 })
    }

    pub fn anisotropic(kappa: f64) -> Self {
        Self::new(Arc::new(Anisotropic { kappa }), WeightSpec { c: 1e14, alpha: 20.0 })
    }

    pub fn weakfield(params: WeakFieldFamily) -> Self {
        Self::new(Arc::new(params), WeightSpec { c: 2e8, alpha: 14.0 })
    }

    pub fn with_weight(mut self, weight: WeightSpec) -> Self {
        self.weight = weight;
        self
    }
}
