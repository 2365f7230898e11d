use serde::Serialize;

use super::profile::{EquilibriumProfile, Species};
use crate::error::Result;

/// Rectangular `(e, p)` grid for profile validation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ValidationGrid {
    pub n_e: usize,
    pub n_p: usize,
    /// Upper energy; `None` picks the energy where `w` has fallen by `1e-12`.
    pub e_max: Option<f64>,
    pub tol_validate: f64,
}

impl Default for ValidationGrid {
    fn default() -> Self {
        ValidationGrid { n_e: 400, n_p: 81, e_max: None, tol_validate: 1e-12 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub e_max: f64,
    pub p_max: f64,
    pub max_negativity: f64,
    pub max_decay_excess: f64,
    /// Location of the worst decay violation.
    pub worst_decay_point: Option<(f64, f64)>,
    pub max_symmetry_defect: f64,
    pub passed: bool,
}

pub fn validate_profile(profile: &EquilibriumProfile, grid: &ValidationGrid) -> Result<ValidationReport> {
    let w = profile.weight;
    let e_max = grid
        .e_max
        .unwrap_or_else(|| 2.0 * 1e12f64.powf(1.0 / w.alpha) - 1.0)
        .max(1.0 + 1e-9);
    let p_max = e_max;
    let mut neg: f64 = 0.0;
    let mut decay: f64 = 0.0;
    let mut worst = None;
    let mut sym: f64 = 0.0;
    for i in 0..grid.n_e {
        let e = 1.0 + (e_max - 1.0) * i as f64 / (grid.n_e - 1).max(1) as f64;
        let bound = w.eval(e);
        for j in 0..grid.n_p {
            let p = -p_max + 2.0 * p_max * j as f64 / (grid.n_p - 1).max(1) as f64;
            for s in Species::BOTH {
                let (mu, me, mp) = profile.checked(s, e, p)?;
                neg = neg.max(-mu);
                let excess = me.abs() + mp.abs() - bound;
                if excess > decay {
                    decay = excess;
                    worst = Some((e, p));
                }
            }
            let d = (profile.mu(Species::Plus, e, p) - profile.mu(Species::Minus, e, -p)).abs();
            sym = sym.max(d);
        }
    }
    let tol = grid.tol_validate;
    Ok(ValidationReport {
        e_max,
        p_max,
        max_negativity: neg.max(0.0),
        max_decay_excess: decay.max(0.0),
        worst_decay_point: worst,
        max_symmetry_defect: sym,
        passed: neg <= tol && decay <= tol && sym <= tol,
    })
}
