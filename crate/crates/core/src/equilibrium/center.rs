use std::f64::consts::PI;

use serde::Serialize;

use super::potential::{EquilibriumState, MagneticPotential, PotentialSolution};
use super::profile::{EquilibriumProfile, Species};
use crate::discretization::{pairwise_sum, VelocityQuadrature};
use crate::error::{Error, Result};

/// `g(ψ) = 2 ∫ v̂₂ μ⁻(⟨v⟩, v₂ − ψ) dv`.
pub fn g_value(profile: &EquilibriumProfile, quad: &VelocityQuadrature, psi: f64) -> f64 {
    let terms: Vec<f64> = quad
        .nodes()
        .iter()
        .map(|n| n.weight * n.vh2 * profile.mu(Species::Minus, n.e, n.v2 - psi))
        .collect();
    2.0 * pairwise_sum(&terms)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CenterOptions {
    /// Central-difference step; `None` selects `1e-4`.
    pub h_g: Option<f64>,
    pub tol_g: f64,
    /// Allowed relative change of `g′(0)` under refinement of the rule.
    pub tol_refine: f64,
}

impl Default for CenterOptions {
    fn default() -> Self {
        CenterOptions { h_g: None, tol_g: 1e-10, tol_refine: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CenterConditions {
    pub g0: f64,
    pub gprime0: f64,
    pub ok: bool,
    pub refinement_gap: f64,
}

impl CenterConditions {
    /// Linear period `2π/√(−g′(0))`.
    pub fn p_cr(&self) -> Option<f64> {
        (self.gprime0 < 0.0).then(|| 2.0 * PI / (-self.gprime0).sqrt())
    }
}

fn gprime0(profile: &EquilibriumProfile, quad: &VelocityQuadrature, h: f64) -> f64 {
    (g_value(profile, quad, h) - g_value(profile, quad, -h)) / (2.0 * h)
}

pub fn check_center_conditions(
    profile: &EquilibriumProfile,
    quad: &VelocityQuadrature,
    opts: &CenterOptions,
) -> Result<CenterConditions> {
    let h = opts.h_g.unwrap_or(1e-4);
    let g0 = g_value(profile, quad, 0.0);
    let gp = gprime0(profile, quad, h);
    let gp_fine = gprime0(profile, &quad.refined(2), h);
    let gap = (gp - gp_fine).abs();
    if !(g0.is_finite() && gp.is_finite()) {
        return Err(Error::QuadratureFailure { gap: f64::INFINITY, tol: opts.tol_refine });
    }
    if gap > opts.tol_refine * gp.abs().max(1.0) {
        return Err(Error::QuadratureFailure { gap, tol: opts.tol_refine });
    }
    Ok(CenterConditions {
        g0,
        gprime0: gp,
        ok: g0.abs() <= opts.tol_g && gp < -opts.tol_g,
        refinement_gap: gap,
    })
}

/// Chebyshev interpolant of a smooth scalar function on `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct Chebyshev {
    lo: f64,
    hi: f64,
    coefs: Vec<f64>,
}

impl Chebyshev {
    pub fn fit(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = (0..n)
            .map(|j| {
                let t = (PI * (j as f64 + 0.5) / n as f64).cos();
                f(0.5 * (lo + hi) + 0.5 * (hi - lo) * t)
            })
            .collect();
        let coefs = (0..n)
            .map(|k| {
                let s: f64 = values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * (PI * k as f64 * (j as f64 + 0.5) / n as f64).cos())
                    .sum();
                let c = 2.0 * s / n as f64;
                if k == 0 {
                    0.5 * c
                } else {
                    c
                }
            })
            .collect();
        Chebyshev { lo, hi, coefs }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coefs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coefs[0]
    }

    /// Magnitude of the trailing coefficients relative to the largest.
    pub fn tail(&self) -> f64 {
        let max = self.coefs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let n = self.coefs.len();
        let tail = self.coefs[n - 4..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if max == 0.0 {
            0.0
        } else {
            tail / max
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OdeOptions {
    pub steps_per_period: usize,
    pub n_samples: usize,
    /// Integration is abandoned after this many guessed periods.
    pub max_periods: f64,
    pub tol_equil: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { steps_per_period: 4096, n_samples: 256, max_periods: 8.0, tol_equil: 1e-6 }
    }
}

/// One closed orbit of `ψ'' = g(ψ)` started at `(−ε, 0)`.
#[derive(Debug, Clone)]
pub struct CenterOrbit {
    pub period: f64,
    pub samples: Vec<f64>,
    pub psi_max: f64,
    pub richardson_gap: f64,
}

fn rk4(g: &dyn Fn(f64) -> f64, y: [f64; 2], h: f64) -> [f64; 2] {
    let f = |y: [f64; 2]| [y[1], g(y[0])];
    let k1 = f(y);
    let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
    let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
    let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Time of the first return of `ψ'` to zero from below, i.e. one full period.
fn find_period(
    g: &dyn Fn(f64) -> f64,
    epsilon: f64,
    h: f64,
    t_max: f64,
    bound: f64,
) -> std::result::Result<f64, String> {
    if !(g(-epsilon) > 0.0) {
        return Err("g(-epsilon) <= 0, the start is not a potential minimum".into());
    }
    let mut y = [-epsilon, 0.0];
    let mut t = 0.0;
    let mut passed_max = false;
    while t < t_max {
        let next = rk4(g, y, h);
        if !next[0].is_finite() || next[0].abs() > bound {
            return Err(format!("orbit left |psi| <= {bound}"));
        }
        if !passed_max && y[1] > 0.0 && next[1] <= 0.0 {
            passed_max = true;
        } else if passed_max && y[1] < 0.0 && next[1] >= 0.0 {
            // secant on the partial step for the crossing time
            let (mut a, mut b) = (0.0, h);
            let (mut fa, mut fb) = (y[1], next[1]);
            for _ in 0..60 {
                let c = b - fb * (b - a) / (fb - fa);
                let fc = rk4(g, y, c)[1];
                if fc.abs() < 1e-15 || (b - a).abs() < 1e-15 * h {
                    return Ok(t + c);
                }
                if (fc < 0.0) == (fa < 0.0) {
                    a = c;
                    fa = fc;
                } else {
                    b = c;
                    fb = fc;
                }
            }
            return Ok(t + 0.5 * (a + b));
        }
        y = next;
        t += h;
    }
    Err(format!("no closure within t = {t_max}"))
}

fn sample_orbit(g: &dyn Fn(f64) -> f64, epsilon: f64, period: f64, steps: usize, n: usize) -> Vec<f64> {
    let h = period / steps as f64;
    let stride = steps / n;
    let mut y = [-epsilon, 0.0];
    let mut out = Vec::with_capacity(n);
    for step in 0..steps {
        if step % stride == 0 {
            out.push(y[0]);
        }
        y = rk4(g, y, h);
    }
    out
}

/// Solves `ψ'' = g(ψ)`, `ψ(0) = −ε`, `ψ'(0) = 0`, over one closed orbit.
pub fn solve_center_orbit(
    g: &dyn Fn(f64) -> f64,
    epsilon: f64,
    t_guess: f64,
    bound: f64,
    opts: &OdeOptions,
) -> Result<CenterOrbit> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon = {epsilon} must be positive")));
    }
    if opts.steps_per_period % opts.n_samples != 0 {
        return Err(Error::Size("steps_per_period must be a multiple of n_samples".into()));
    }
    let not_center = |reason: String| Error::NotACenter { epsilon, reason };
    let t_max = opts.max_periods * t_guess;
    let h = t_guess / opts.steps_per_period as f64;
    let t1 = find_period(g, epsilon, h, t_max, bound).map_err(not_center)?;
    let t2 = find_period(g, epsilon, 0.5 * h, t_max, bound).map_err(not_center)?;
    let s1 = sample_orbit(g, epsilon, t2, opts.steps_per_period, opts.n_samples);
    let s2 = sample_orbit(g, epsilon, t2, 2 * opts.steps_per_period, opts.n_samples);
    let gap = s1
        .iter()
        .zip(&s2)
        .map(|(a, b)| (a - b).abs())
        .fold((t1 - t2).abs(), f64::max);
    let psi_max = s2.iter().cloned().fold(f64::MIN, f64::max);
    Ok(CenterOrbit { period: t2, samples: s2, psi_max, richardson_gap: gap })
}

/// Builds `ψ⁰_ε` for a profile from the center of `ψ'' = g(ψ)`.
pub fn solve_equilibrium_potential(
    profile: &EquilibriumProfile,
    epsilon: f64,
    quad: &VelocityQuadrature,
    opts: &OdeOptions,
) -> Result<EquilibriumState> {
    let center = check_center_conditions(profile, quad, &CenterOptions::default())?;
    if !center.ok {
        return Err(Error::NotACenter {
            epsilon,
            reason: format!("center conditions fail: g0 = {:e}, g'(0) = {:e}", center.g0, center.gprime0),
        });
    }
    let p_cr = center.p_cr().unwrap();
    let mut range = 3.0 * epsilon;
    let (cheb, orbit) = loop {
        let cheb = fit_g(profile, quad, range);
        let g = |psi: f64| cheb.eval(psi);
        match solve_center_orbit(&g, epsilon, p_cr, range, opts) {
            Ok(orbit) => break (cheb, orbit),
            Err(Error::NotACenter { reason, .. }) if reason.starts_with("orbit left") && range < 64.0 * epsilon => {
                range *= 2.0;
            }
            Err(e) => return Err(e),
        }
    };
    let _ = cheb;
    let potential = MagneticPotential::from_samples(orbit.period, orbit.samples.clone())?;

    // Residual of ψ'' = g(ψ) with the quadrature g, on a subset of the samples.
    let n_check = 64.min(orbit.samples.len());
    let stride = orbit.samples.len() / n_check;
    let mut residual: f64 = 0.0;
    for j in (0..orbit.samples.len()).step_by(stride) {
        let x = j as f64 * orbit.period / orbit.samples.len() as f64;
        let lhs = potential.series(x, 2);
        let rhs = g_value(profile, quad, potential.series(x, 0));
        residual = residual.max((lhs - rhs).abs());
    }
    if residual > opts.tol_equil {
        return Err(Error::EquilibriumResidual { residual, tol: opts.tol_equil });
    }
    let c1 = potential.c1_norm();
    Ok(EquilibriumState {
        profile: profile.clone(),
        homogeneous: false,
        solution: Some(PotentialSolution {
            epsilon,
            period: orbit.period,
            p_cr,
            g_prime0: center.gprime0,
            c1_norm: c1,
            ode_residual: residual,
            richardson_gap: orbit.richardson_gap,
        }),
        potential,
    })
}

fn fit_g(profile: &EquilibriumProfile, quad: &VelocityQuadrature, range: f64) -> Chebyshev {
    let mut n = 24;
    loop {
        let cheb = Chebyshev::fit(-range, range, n, |psi| g_value(profile, quad, psi));
        if cheb.tail() < 1e-13 || n >= 192 {
            return cheb;
        }
        n *= 2;
    }
}

/// Largest amplitude below `eps_hi` whose orbit still closes, by bisection.
pub fn find_center_basin(
    profile: &EquilibriumProfile,
    quad: &VelocityQuadrature,
    p_cr: f64,
    eps_hi: f64,
    opts: &OdeOptions,
) -> Result<f64> {
    let range = 4.0 * eps_hi;
    let cheb = fit_g(profile, quad, range);
    let g = |psi: f64| cheb.eval(psi);
    let coarse = OdeOptions { steps_per_period: 1024, n_samples: 256, ..*opts };
    let closes = |eps: f64| {
        let h = p_cr / coarse.steps_per_period as f64;
        find_period(&g, eps, h, coarse.max_periods * p_cr, range).is_ok()
    };
    if closes(eps_hi) {
        return Ok(eps_hi);
    }
    let (mut lo, mut hi) = (0.0, eps_hi);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if closes(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// The nonmonotone stability-type inequality `sup μ⁻_e < π²/(3 P_cr² |S_b|)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityCondition {
    pub sup_mu_e: f64,
    pub measure_sb: f64,
    pub p_cr: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn stability_condition(
    profile: &EquilibriumProfile,
    quad: &VelocityQuadrature,
    p_cr: f64,
) -> StabilityCondition {
    let mut sup: f64 = f64::NEG_INFINITY;
    let mut terms = Vec::with_capacity(quad.len());
    for n in quad.nodes() {
        let me = profile.mu_e(Species::Minus, n.e, n.v2);
        sup = sup.max(me);
        terms.push(if me > 0.0 { n.weight } else { 0.0 });
    }
    let measure = pairwise_sum(&terms);
    let bound = if measure > 0.0 { PI * PI / (3.0 * p_cr * p_cr * measure) } else { f64::INFINITY };
    StabilityCondition {
        sup_mu_e: sup,
        measure_sb: measure,
        p_cr,
        bound,
        holds: sup < bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_stand_in_gives_cosine() {
        let g = |psi: f64| -psi;
        let eps = 0.1;
        let orbit = solve_center_orbit(&g, eps, 2.0 * PI, 1.0, &OdeOptions::default()).unwrap();
        assert!((orbit.period - 2.0 * PI).abs() < 1e-10, "T = {}", orbit.period);
        for (j, v) in orbit.samples.iter().enumerate() {
            let x = j as f64 * orbit.period / orbit.samples.len() as f64;
            assert!((v + eps * x.cos()).abs() < 1e-11);
        }
    }

    #[test]
    fn chebyshev_fits_smooth_function() {
        let c = Chebyshev::fit(-2.0, 3.0, 40, |x: f64| (0.7 * x).sin() * (-0.1 * x * x).exp());
        for &x in &[-1.9f64, 0.0, 1.2, 2.9] {
            let exact = (0.7 * x).sin() * (-0.1 * x * x).exp();
            assert!((c.eval(x) - exact).abs() < 1e-13);
        }
        assert!(c.tail() < 1e-12);
    }

    #[test]
    fn escaping_orbit_is_not_a_center() {
        // g(ψ) = −ψ + ψ³ has saddles at ±1.
        let g = |psi: f64| -psi + psi * psi * psi;
        let r = solve_center_orbit(&g, 1.2, 2.0 * PI, 10.0, &OdeOptions::default());
        assert!(matches!(r, Err(Error::NotACenter { .. })));
        assert!(solve_center_orbit(&g, 0.5, 2.0 * PI, 10.0, &OdeOptions::default()).is_ok());
    }
}
