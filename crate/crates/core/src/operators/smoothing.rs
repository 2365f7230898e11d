//! Pointwise evaluation of `Q^λ±` and `P±` on arbitrary phase-space functions.

use super::cache::EvalOptions;
use super::weights::{window_rule, OrbitWeights};
use crate::characteristics::{orbit_info, sample_at, OrbitKind, PhasePoint, StepOptions};
use crate::equilibrium::{EquilibriumState, Species};
use crate::error::{Error, Result};

/// How `Q^λ` integrates in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeRule {
    /// Gauss–Legendre on the truncated window `[−S, 0]`.
    Window,
    /// Exact harmonic weights on one orbit period.
    Orbit,
}

pub struct SmoothingEvaluator<'a> {
    pub state: &'a EquilibriumState,
    pub lambda: f64,
    /// Truncation horizon of the window rule.
    pub horizon: f64,
    pub n_s: usize,
    pub rule: TimeRule,
    s_nodes: Vec<f64>,
    s_weights: Vec<f64>,
    n_orbit: usize,
    n_long: usize,
    step: StepOptions,
}

impl<'a> SmoothingEvaluator<'a> {
    pub fn new(state: &'a EquilibriumState, lambda: f64, rule: TimeRule, opts: &EvalOptions) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("smoothing needs lambda > 0, got {lambda}")));
        }
        let (s_nodes, s_weights) = window_rule(lambda, opts.tol_tail_s, opts.n_s);
        Ok(SmoothingEvaluator {
            state,
            lambda,
            horizon: -opts.tol_tail_s.ln() / lambda,
            n_s: opts.n_s,
            rule,
            s_nodes,
            s_weights,
            n_orbit: opts.n_orbit,
            n_long: opts.n_long,
            step: opts.step,
        })
    }

    pub fn apply(&self, species: Species, k: impl Fn(&PhasePoint) -> f64, point: &PhasePoint) -> Result<f64> {
        match self.rule {
            TimeRule::Window => {
                let tr = sample_at(self.state, species, point, self.s_nodes.clone(), &self.step)?;
                Ok(tr.states.iter().zip(&self.s_weights).map(|(p, w)| w * k(p)).sum())
            }
            TimeRule::Orbit => {
                let (period, n) = match orbit_info(self.state, species, point, &self.step) {
                    Ok(info) if info.kind == OrbitKind::Stationary => return Ok(k(point)),
                    Ok(info) => (info.period, self.n_orbit),
                    Err(Error::OrbitNotResolved { .. }) => (self.step.max_period, self.n_long),
                    Err(e) => return Err(e),
                };
                let times: Vec<f64> = (0..n).map(|q| -(q as f64) * period / n as f64).collect();
                let tr = sample_at(self.state, species, point, times, &self.step)?;
                let mut w = vec![0.0; n];
                OrbitWeights::new(n).compute(self.lambda, period, &mut w, &mut Vec::new());
                Ok(tr.states.iter().zip(&w).map(|(p, w)| w * k(p)).sum())
            }
        }
    }
}

pub fn apply_smoothing(
    eval: &SmoothingEvaluator<'_>,
    species: Species,
    k: impl Fn(&PhasePoint) -> f64,
    point: &PhasePoint,
) -> Result<f64> {
    eval.apply(species, k, point)
}

/// Orbit averages: one exact period, or a long window when the orbit does
/// not close within `max_period`.
pub struct ProjectionEvaluator<'a> {
    pub state: &'a EquilibriumState,
    pub n_orbit: usize,
    pub n_long: usize,
    pub step: StepOptions,
}

impl<'a> ProjectionEvaluator<'a> {
    pub fn new(state: &'a EquilibriumState, opts: &EvalOptions) -> Self {
        ProjectionEvaluator { state, n_orbit: opts.n_orbit, n_long: opts.n_long, step: opts.step }
    }

    pub fn apply(&self, species: Species, k: impl Fn(&PhasePoint) -> f64, point: &PhasePoint) -> Result<f64> {
        let (period, n) = match orbit_info(self.state, species, point, &self.step) {
            Ok(info) if info.kind == OrbitKind::Stationary => return Ok(k(point)),
            Ok(info) => (info.period, self.n_orbit),
            Err(Error::OrbitNotResolved { .. }) => (self.step.max_period, self.n_long),
            Err(e) => return Err(e),
        };
        let times: Vec<f64> = (0..n).map(|q| -(q as f64) * period / n as f64).collect();
        let tr = sample_at(self.state, species, point, times, &self.step)?;
        Ok(tr.states.iter().map(&k).sum::<f64>() / n as f64)
    }
}

pub fn apply_projection(
    eval: &ProjectionEvaluator<'_>,
    species: Species,
    k: impl Fn(&PhasePoint) -> f64,
    point: &PhasePoint,
) -> Result<f64> {
    eval.apply(species, k, point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{EquilibriumProfile, MagneticPotential};
    use std::f64::consts::PI;

    fn homogeneous(p: f64) -> EquilibriumState {
        EquilibriumState::homogeneous(EquilibriumProfile::zero(), p).unwrap()
    }

    fn sine_state(amp: f64) -> EquilibriumState {
        let p = 2.0 * PI;
        let samples: Vec<f64> = (0..64).map(|j| -amp * (j as f64 * p / 64.0).cos()).collect();
        EquilibriumState::with_potential(EquilibriumProfile::zero(), MagneticPotential::from_samples(p, samples).unwrap())
    }

    #[test]
    fn smoothing_of_one() {
        let st = sine_state(0.3);
        let opts = EvalOptions::default();
        let pt = PhasePoint::new(0.7, 0.9, -0.4);
        for rule in [TimeRule::Window, TimeRule::Orbit] {
            let ev = SmoothingEvaluator::new(&st, 0.8, rule, &opts).unwrap();
            let q = ev.apply(Species::Plus, |_| 1.0, &pt).unwrap();
            assert!(q <= 1.0 + 1e-14 && q >= 1.0 - 1e-10 - 1e-14, "{rule:?}: {q}");
        }
    }

    #[test]
    fn homogeneous_cosine_matches_closed_form() {
        let p = 3.0;
        let st = homogeneous(p);
        let opts = EvalOptions::default();
        let k = 2.0 * PI / p;
        let pt = PhasePoint::new(0.4, 1.1, 0.3);
        let vh1 = pt.vh1();
        for &lam in &[0.05, 0.5, 1.0, 20.0] {
            let den = lam * lam + (k * vh1).powi(2);
            let exact = (lam * lam * (k * pt.x).cos() + lam * k * vh1 * (k * pt.x).sin()) / den;
            // the fixed Gauss rule cannot follow many oscillations over a long window
            let rules: &[TimeRule] = if lam < 0.5 { &[TimeRule::Orbit] } else { &[TimeRule::Window, TimeRule::Orbit] };
            for &rule in rules {
                let ev = SmoothingEvaluator::new(&st, lam, rule, &opts).unwrap();
                let q = ev.apply(Species::Minus, |z| (k * z.x).cos(), &pt).unwrap();
                assert!((q - exact).abs() < 1e-9, "{rule:?} lambda={lam}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn projection_of_invariants_and_cosines() {
        let st = sine_state(0.3);
        let opts = EvalOptions::default();
        let pe = ProjectionEvaluator::new(&st, &opts);
        let pt = PhasePoint::new(1.3, 1.5, 0.2);
        let energy = pe.apply(Species::Plus, |z| z.e(), &pt).unwrap();
        assert!((energy - pt.e()).abs() < 1e-12);
        let hom = homogeneous(2.0);
        let ph = ProjectionEvaluator::new(&hom, &opts);
        let avg = ph.apply(Species::Plus, |z| z.vh1() * (PI * z.x).cos(), &PhasePoint::new(0.3, 0.8, 0.1)).unwrap();
        assert!(avg.abs() < 1e-14);
    }

    #[test]
    fn projection_is_idempotent() {
        let st = sine_state(0.4);
        let opts = EvalOptions::default();
        let pe = ProjectionEvaluator::new(&st, &opts);
        let pt = PhasePoint::new(0.2, 0.6, -0.3);
        let k = |z: &PhasePoint| z.x.cos() * z.vh1();
        let once = pe.apply(Species::Plus, k, &pt).unwrap();
        let twice = pe.apply(Species::Plus, |z| pe.apply(Species::Plus, k, z).unwrap(), &pt).unwrap();
        assert!((once - twice).abs() < 1e-8, "{once} vs {twice}");
    }

    #[test]
    fn rejects_zero_lambda() {
        let st = homogeneous(1.0);
        assert!(SmoothingEvaluator::new(&st, 0.0, TimeRule::Window, &EvalOptions::default()).is_err());
    }
}
