//! Radial moments of the ramp-Gauss profile `α(e) = (e−1)·1[1,2) + exp(−(e−2)²)·1[2,∞)`.
//!
//! With `r² = e² − 1` the moments split at `r = √3` (`e = 2`):
//!
//! * `I  = ∫₀^{√3} r³/(1+r²) dr = 3/2 − ln 2`
//! * `II = ∫_{√3}^∞ η′(e) r³/(1+r²) dr`
//! * tail `= ∫_{√3}^∞ η′(e) r dr = −(√π/2 + 2)`
//!
//! so that `∫ α′ v̂₁² dv = π(I + II)` and `∫ α′ dv = 2π(3/2 + tail)`.

use serde::Serialize;

use crate::discretization::gauss_legendre_on;

use super::profile::ramp_gauss_derivative;

/// Upper cut in `e` for the Gaussian tail; `exp(−14²)` is far below any tolerance.
const E_CUT: f64 = 16.0;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RadialMoments {
    pub i: f64,
    pub ii: f64,
    /// Signed `∫ η′ r dr`.
    pub tail: f64,
    /// `π (I + II)`.
    pub l0: f64,
    /// `2π (3/2 + tail)`.
    pub mu_e_integral: f64,
}

fn panels(a: f64, b: f64, n_panels: usize, order: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n_panels as f64;
    (0..n_panels)
        .map(|k| {
            let (x, w) = gauss_legendre_on(order, a + k as f64 * h, a + (k + 1) as f64 * h);
            x.iter().zip(&w).map(|(x, w)| w * f(*x)).sum::<f64>()
        })
        .sum()
}

/// Closed form of `I`.
pub fn moment_i_exact() -> f64 {
    1.5 - std::f64::consts::LN_2
}

/// Closed form of the tail moment, `−(√π/2 + 2)`.
pub fn tail_moment_exact() -> f64 {
    -(std::f64::consts::PI.sqrt() / 2.0 + 2.0)
}

/// Panel Gauss evaluation of the moments; the tail integrals run in `e`
/// (`r dr = e de`) where the integrand is smooth.
pub fn radial_moments(n_panels: usize, order: usize) -> RadialMoments {
    let i = panels(0.0, 3f64.sqrt(), n_panels, order, |r| r * r * r / (1.0 + r * r));
    let ii = panels(2.0, E_CUT, n_panels, order, |e| ramp_gauss_derivative(e) * (e * e - 1.0) / e);
    let tail = panels(2.0, E_CUT, n_panels, order, |e| ramp_gauss_derivative(e) * e);
    let pi = std::f64::consts::PI;
    RadialMoments { i, ii, tail, l0: pi * (i + ii), mu_e_integral: 2.0 * pi * (1.5 + tail) }
}

impl Default for RadialMoments {
    fn default() -> Self {
        radial_moments(32, 16)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn closed_forms_hold() {
        let m = RadialMoments::default();
        assert!((m.i - moment_i_exact()).abs() < 1e-14);
        assert!((m.tail - tail_moment_exact()).abs() < 1e-13);
    }

    #[test]
    fn second_moment_matches_radial_simpson() {
        // dense Simpson directly in r, independent of the e substitution
        let r_cut = (E_CUT * E_CUT - 1.0).sqrt();
        let oracle = simpson(3f64.sqrt(), r_cut, 400_000, |r| {
            let u = (1.0 + r * r).sqrt() - 2.0;
            -2.0 * u * (-u * u).exp() * r * r * r / (1.0 + r * r)
        });
        let m = RadialMoments::default();
        assert!((m.ii - oracle).abs() < 1e-10, "{} vs {oracle}", m.ii);
        assert!((m.ii - (-2.531_116_789_945_364)).abs() < 1e-12);
    }
}
