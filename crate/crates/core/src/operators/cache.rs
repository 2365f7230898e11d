//! Per-node orbit records and the smoothed basis values built from them.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use super::weights::OrbitWeights;
use crate::characteristics::{orbit_info, sample_at, OrbitKind, PhasePoint, StepOptions};
use crate::discretization::{FourierBasis, VelocityQuadrature};
use crate::equilibrium::{EquilibriumState, Species};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvalOptions {
    /// Samples per orbit period.
    pub n_orbit: usize,
    /// Samples over the long-time window used when an orbit does not close.
    pub n_long: usize,
    pub step: StepOptions,
    /// Tail tolerance of the windowed time rule.
    pub tol_tail_s: f64,
    /// Gauss–Legendre size of the windowed time rule.
    pub n_s: usize,
    /// Largest accepted relative symmetry defect of `A1`, `A2` for `λ > 0`.
    pub tol_sym: f64,
    /// The same at `λ = 0`, where orbit averages jump across separatrices.
    /// Between the two the bound decays like `exp(−λP)`.
    pub tol_sym_zero: f64,
    /// Integrate trajectories even when the state is homogeneous.
    pub force_general: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            n_orbit: 64,
            n_long: 8192,
            step: StepOptions::default(),
            tol_tail_s: 1e-10,
            n_s: 128,
            tol_sym: 1e-3,
            tol_sym_zero: 5e-2,
            force_general: false,
        }
    }
}

impl EvalOptions {
    /// Accepted symmetry defect at `λ` for a state of period `period`.
    pub fn sym_tolerance(&self, lambda: f64, period: f64) -> f64 {
        self.tol_sym.max(self.tol_sym_zero * (-lambda * period).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RecordKind {
    Stationary,
    Periodic,
    /// No closure within `max_period`: the sampled window is treated as one period.
    Unresolved,
}

#[derive(Debug, Clone, Copy)]
struct RecordMeta {
    kind: RecordKind,
    period: f64,
    offset: usize,
    len: usize,
}

/// Orbit samples of the plus species for every (x node, v node) pair. The
/// minus species at `(x, v₁, v₂)` follows the plus trajectory of
/// `(x, v₁, −v₂)` with `V₂` reversed, so it reuses the mirrored record.
pub struct OrbitCache {
    meta: Vec<RecordMeta>,
    xs: Vec<f64>,
    ths: Vec<f64>,
    n_v: usize,
    pub unresolved: usize,
    pub trapped: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CacheSummary {
    pub records: usize,
    pub trapped: usize,
    pub unresolved: usize,
}

impl OrbitCache {
    pub fn build(
        state: &EquilibriumState,
        x_grid: &[f64],
        quad: &VelocityQuadrature,
        opts: &EvalOptions,
    ) -> Result<Self> {
        let n_v = quad.len();
        let jobs: Vec<(usize, usize)> = (0..x_grid.len())
            .flat_map(|j| (0..n_v).map(move |b| (j, b)))
            .collect();
        let results: Vec<Result<(RecordKind, f64, bool, Vec<PhasePoint>)>> = jobs
            .par_iter()
            .map(|&(j, b)| {
                let node = quad.nodes()[b];
                let start = PhasePoint::new(x_grid[j], node.v1, node.v2);
                record_for(state, &start, opts)
            })
            .collect();
        let mut cache = OrbitCache {
            meta: Vec::with_capacity(jobs.len()),
            xs: Vec::new(),
            ths: Vec::new(),
            n_v,
            unresolved: 0,
            trapped: 0,
        };
        for r in results {
            let (kind, period, trapped, pts) = r?;
            if kind == RecordKind::Unresolved {
                cache.unresolved += 1;
            }
            if trapped {
                cache.trapped += 1;
            }
            cache.meta.push(RecordMeta { kind, period, offset: cache.xs.len(), len: pts.len() });
            for p in pts {
                cache.xs.push(p.x);
                cache.ths.push(p.v2.atan2(p.v1));
            }
        }
        Ok(cache)
    }

    pub fn summary(&self) -> CacheSummary {
        CacheSummary { records: self.meta.len(), trapped: self.trapped, unresolved: self.unresolved }
    }
}

fn record_for(
    state: &EquilibriumState,
    start: &PhasePoint,
    opts: &EvalOptions,
) -> Result<(RecordKind, f64, bool, Vec<PhasePoint>)> {
    let species = Species::Plus;
    match orbit_info(state, species, start, &opts.step) {
        Ok(info) if info.kind == OrbitKind::Stationary => Ok((RecordKind::Stationary, 0.0, false, vec![*start])),
        Ok(info) => {
            let n = opts.n_orbit;
            let times: Vec<f64> = (0..n).map(|q| -(q as f64) * info.period / n as f64).collect();
            let tr = sample_at(state, species, start, times, &opts.step)?;
            Ok((RecordKind::Periodic, info.period, info.kind == OrbitKind::Trapped, tr.states))
        }
        Err(Error::OrbitNotResolved { .. }) => {
            let n = opts.n_long;
            let window = opts.step.max_period;
            let times: Vec<f64> = (0..n).map(|q| -(q as f64) * window / n as f64).collect();
            let tr = sample_at(state, species, start, times, &opts.step)?;
            Ok((RecordKind::Unresolved, window, false, tr.states))
        }
        Err(e) => Err(e),
    }
}

/// `Q^λ` of the full basis `e_i`, of `v̂₂ e_i`, and of `v̂₁` at one phase point.
#[derive(Debug, Clone)]
pub struct NodeSmoothing {
    pub qe: Vec<f64>,
    pub qv2e: Vec<f64>,
    pub qv1: f64,
}

impl NodeSmoothing {
    pub fn new(n: usize) -> Self {
        NodeSmoothing { qe: vec![0.0; n], qv2e: vec![0.0; n], qv1: 0.0 }
    }
}

/// Scratch space for per-node smoothing.
pub struct Scratch {
    weights: Vec<f64>,
    fft_buf: Vec<Complex64>,
    basis_vals: Vec<f64>,
    short: OrbitWeights,
    long: OrbitWeights,
}

impl Scratch {
    pub fn new(opts: &EvalOptions, n_basis: usize) -> Self {
        Scratch {
            weights: Vec::new(),
            fft_buf: Vec::new(),
            basis_vals: vec![0.0; n_basis],
            short: OrbitWeights::new(opts.n_orbit),
            long: OrbitWeights::new(opts.n_long),
        }
    }
}

/// Source of smoothed node values: closed form for straight characteristics,
/// or cached orbit samples.
pub enum Smoother {
    Homogeneous,
    Orbits(OrbitCache),
}

impl Smoother {
    pub fn build(
        state: &EquilibriumState,
        basis: &FourierBasis,
        quad: &VelocityQuadrature,
        opts: &EvalOptions,
    ) -> Result<Self> {
        if state.homogeneous && !opts.force_general {
            Ok(Smoother::Homogeneous)
        } else {
            Ok(Smoother::Orbits(OrbitCache::build(state, &basis.x_grid, quad, opts)?))
        }
    }

    pub fn summary(&self) -> Option<CacheSummary> {
        match self {
            Smoother::Homogeneous => None,
            Smoother::Orbits(c) => Some(c.summary()),
        }
    }

    /// Values for `species` at grid point `j` and velocity node `b`.
    #[allow(clippy::too_many_arguments)]
    pub fn node(
        &self,
        lambda: f64,
        species: Species,
        j: usize,
        b: usize,
        basis: &FourierBasis,
        quad: &VelocityQuadrature,
        scratch: &mut Scratch,
        out: &mut NodeSmoothing,
    ) {
        match self {
            Smoother::Homogeneous => {
                let node = quad.nodes()[b];
                homogeneous_node(lambda, basis.x_grid[j], node.vh1, node.vh2, basis, out);
            }
            Smoother::Orbits(cache) => {
                let (b_rec, flip) = match species {
                    Species::Plus => (b, 1.0),
                    Species::Minus => (quad.mirror_v2(b), -1.0),
                };
                let node = quad.nodes()[b_rec];
                let scale = node.r / node.e;
                let meta = cache.meta[j * cache.n_v + b_rec];
                orbit_node(cache, meta, lambda, scale, flip, basis, scratch, out);
            }
        }
    }
}

/// `λ/(λ + i k v̂₁)` split as `(C, S)`: `Q e^{ikx} = (C + iS) e^{ikx}`.
pub fn straight_line_factor(lambda: f64, k: f64, vh1: f64) -> (f64, f64) {
    let kv = k * vh1;
    if lambda == 0.0 {
        return if kv == 0.0 { (1.0, 0.0) } else { (0.0, 0.0) };
    }
    let den = lambda * lambda + kv * kv;
    (lambda * lambda / den, -lambda * kv / den)
}

fn homogeneous_node(lambda: f64, x: f64, vh1: f64, vh2: f64, basis: &FourierBasis, out: &mut NodeSmoothing) {
    // full basis: [const, cos1, sin1, cos2, sin2, ...]
    basis.eval_all(x, &mut out.qe);
    let offset = if basis.mean_zero { 0 } else { 1 };
    for k in 1..=basis.harmonics() {
        let i = offset + 2 * (k - 1);
        let (c, s) = straight_line_factor(lambda, basis.wavenumber(i), vh1);
        let (cv, sv) = (out.qe[i], out.qe[i + 1]);
        out.qe[i] = c * cv - s * sv;
        out.qe[i + 1] = s * cv + c * sv;
    }
    for (a, q) in out.qv2e.iter_mut().zip(&out.qe) {
        *a = vh2 * q;
    }
    out.qv1 = vh1;
}

#[allow(clippy::too_many_arguments)]
fn orbit_node(
    cache: &OrbitCache,
    meta: RecordMeta,
    lambda: f64,
    scale: f64,
    flip: f64,
    basis: &FourierBasis,
    scratch: &mut Scratch,
    out: &mut NodeSmoothing,
) {
    let xs = &cache.xs[meta.offset..meta.offset + meta.len];
    let ths = &cache.ths[meta.offset..meta.offset + meta.len];
    scratch.weights.resize(meta.len, 0.0);
    match meta.kind {
        RecordKind::Stationary => scratch.weights[0] = 1.0,
        RecordKind::Periodic => scratch.short.compute(lambda, meta.period, &mut scratch.weights, &mut scratch.fft_buf),
        RecordKind::Unresolved => scratch.long.compute(lambda, meta.period, &mut scratch.weights, &mut scratch.fft_buf),
    }
    out.qe.iter_mut().for_each(|v| *v = 0.0);
    out.qv2e.iter_mut().for_each(|v| *v = 0.0);
    out.qv1 = 0.0;
    for q in 0..meta.len {
        let w = scratch.weights[q];
        let (s, c) = ths[q].sin_cos();
        let vh1 = scale * c;
        let vh2 = flip * scale * s;
        basis.eval_all(xs[q], &mut scratch.basis_vals);
        let wv2 = w * vh2;
        for (i, e) in scratch.basis_vals.iter().enumerate() {
            out.qe[i] += w * e;
            out.qv2e[i] += wv2 * e;
        }
        out.qv1 += w * vh1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_tolerance_interpolates() {
        let o = EvalOptions::default();
        assert_eq!(o.sym_tolerance(0.0, 5.0), o.tol_sym_zero);
        assert_eq!(o.sym_tolerance(10.0, 5.0), o.tol_sym);
        let mid = o.sym_tolerance(0.1, 5.0);
        assert!(mid < o.tol_sym_zero && mid > o.tol_sym);
    }

    #[test]
    fn straight_line_factor_vanishes_at_zero_velocity() {
        let (re, im) = straight_line_factor(0.7, 2.0, 0.0);
        assert!((re - 1.0).abs() < 1e-15 && im.abs() < 1e-15);
    }
}
