//! Equilibrium characteristics `Ẋ = V̂₁, V̇₁ = ±V̂₂B⁰, V̇₂ = ∓V̂₁B⁰`.
//!
//! The momentum is integrated in polar form `V = r(cos Θ, sin Θ)` with
//! `Θ̇ = ∓B⁰(X)/e`, which keeps `e = ⟨V⟩` exact; only `p±` can drift.

use serde::Serialize;

use crate::discretization::gauss_legendre_on;
use crate::equilibrium::{EquilibriumState, Species};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub x: f64,
    pub v1: f64,
    pub v2: f64,
}

impl PhasePoint {
    pub fn new(x: f64, v1: f64, v2: f64) -> Self {
        PhasePoint { x, v1, v2 }
    }

    pub fn e(&self) -> f64 {
        (1.0 + self.v1 * self.v1 + self.v2 * self.v2).sqrt()
    }

    pub fn vh1(&self) -> f64 {
        self.v1 / self.e()
    }

    pub fn vh2(&self) -> f64 {
        self.v2 / self.e()
    }

    /// Canonical momentum `p± = v₂ ± ψ⁰(x)`.
    pub fn p(&self, species: Species, state: &EquilibriumState) -> f64 {
        self.v2 + species.sign() * state.potential.psi(self.x)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepOptions {
    /// Largest time step; `None` selects `P/256`.
    pub dt: Option<f64>,
    pub tol_cons: f64,
    pub max_halvings: usize,
    pub max_period: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions { dt: None, tol_cons: 1e-9, max_halvings: 6, max_period: 1e4 }
    }
}

impl StepOptions {
    pub fn step(&self, state: &EquilibriumState) -> f64 {
        self.dt.unwrap_or(state.period() / 256.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservationReport {
    pub max_de: f64,
    pub max_dp: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySample {
    pub species: Species,
    pub s_nodes: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub conservation: ConservationReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrbitKind {
    Stationary,
    Passing,
    Trapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitInfo {
    pub kind: OrbitKind,
    /// Minimal period; zero for stationary points.
    pub period: f64,
    /// Direction of spatial advance per forward period for passing orbits.
    pub winding: i32,
}

/// Integrator state: unwrapped position and momentum angle.
#[derive(Debug, Clone, Copy)]
struct Polar {
    x: f64,
    th: f64,
}

struct Integrator<'a> {
    state: &'a EquilibriumState,
    sigma: f64,
    r: f64,
    e: f64,
    p0: f64,
}

impl<'a> Integrator<'a> {
    fn new(state: &'a EquilibriumState, species: Species, start: &PhasePoint) -> Self {
        Integrator {
            state,
            sigma: species.sign(),
            r: (start.v1 * start.v1 + start.v2 * start.v2).sqrt(),
            e: start.e(),
            p0: start.p(species, state),
        }
    }

    fn deriv(&self, y: Polar) -> (f64, f64) {
        (self.r * y.th.cos() / self.e, -self.sigma * self.state.potential.field(y.x) / self.e)
    }

    fn step(&self, y: Polar, h: f64) -> Polar {
        let k1 = self.deriv(y);
        let k2 = self.deriv(Polar { x: y.x + 0.5 * h * k1.0, th: y.th + 0.5 * h * k1.1 });
        let k3 = self.deriv(Polar { x: y.x + 0.5 * h * k2.0, th: y.th + 0.5 * h * k2.1 });
        let k4 = self.deriv(Polar { x: y.x + h * k3.0, th: y.th + h * k3.1 });
        Polar {
            x: y.x + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            th: y.th + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        }
    }

    fn point(&self, y: Polar) -> PhasePoint {
        let (s, c) = y.th.sin_cos();
        PhasePoint { x: y.x.rem_euclid(self.state.period()), v1: self.r * c, v2: self.r * s }
    }

    fn drift(&self, y: Polar) -> f64 {
        let v2 = self.r * y.th.sin();
        (v2 + self.sigma * self.state.potential.psi(y.x) - self.p0).abs()
    }
}

fn initial(start: &PhasePoint) -> Polar {
    Polar { x: start.x, th: start.v2.atan2(start.v1) }
}

fn is_stationary(state: &EquilibriumState, start: &PhasePoint) -> bool {
    let r2 = start.v1 * start.v1 + start.v2 * start.v2;
    r2 == 0.0 || (start.v1 == 0.0 && state.potential.field(start.x) == 0.0)
}

fn straight(state: &EquilibriumState, start: &PhasePoint, s: f64) -> PhasePoint {
    PhasePoint {
        x: (start.x + start.vh1() * s).rem_euclid(state.period()),
        v1: start.v1,
        v2: start.v2,
    }
}

fn validate_start(start: &PhasePoint) -> Result<()> {
    if !(start.x.is_finite() && start.v1.is_finite() && start.v2.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite phase point {start:?}")));
    }
    Ok(())
}

/// Integrates through the listed times (in order, starting from 0) with steps
/// no longer than `dt`, retrying with halved steps while the drift of `p`
/// exceeds `tol_cons`.
fn integrate_through(
    state: &EquilibriumState,
    species: Species,
    start: &PhasePoint,
    times: &[f64],
    opts: &StepOptions,
) -> Result<(Vec<PhasePoint>, f64)> {
    let integ = Integrator::new(state, species, start);
    let mut dt = opts.step(state);
    let mut last_drift = 0.0;
    for halvings in 0..=opts.max_halvings {
        let mut y = initial(start);
        let mut t = 0.0;
        let mut out = Vec::with_capacity(times.len());
        let mut drift: f64 = 0.0;
        for &target in times {
            let span = target - t;
            let n = (span.abs() / dt).ceil().max(if span == 0.0 { 0.0 } else { 1.0 }) as usize;
            if n > 0 {
                let h = span / n as f64;
                for _ in 0..n {
                    y = integ.step(y, h);
                }
                drift = drift.max(integ.drift(y));
            }
            t = target;
            out.push(integ.point(y));
        }
        last_drift = drift;
        if drift <= opts.tol_cons {
            return Ok((out, drift));
        }
        let _ = halvings;
        dt *= 0.5;
    }
    Err(Error::ConservationFailure { drift: last_drift, halvings: opts.max_halvings })
}

/// The phase point reached at time `s` from `start`.
pub fn flow(
    state: &EquilibriumState,
    species: Species,
    start: &PhasePoint,
    s: f64,
    opts: &StepOptions,
) -> Result<PhasePoint> {
    validate_start(start)?;
    if s == 0.0 || is_stationary(state, start) {
        return Ok(*start);
    }
    if state.homogeneous {
        return Ok(straight(state, start, s));
    }
    let (pts, _) = integrate_through(state, species, start, &[s], opts)?;
    Ok(pts[0])
}

/// States at the Gauss–Legendre nodes of `[−S, 0]`, by one continuous
/// backward integration.
pub fn sample_backward(
    state: &EquilibriumState,
    species: Species,
    start: &PhasePoint,
    horizon: f64,
    n_nodes: usize,
    opts: &StepOptions,
) -> Result<TrajectorySample> {
    validate_start(start)?;
    if n_nodes < 2 {
        return Err(Error::Size(format!("n_nodes = {n_nodes} < 2")));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput(format!("horizon = {horizon}")));
    }
    let (mut s_nodes, _) = gauss_legendre_on(n_nodes, -horizon, 0.0);
    s_nodes.reverse();
    sample_at(state, species, start, s_nodes, opts)
}

/// States at arbitrary times `s ≤ 0`, visited in the given (decreasing) order.
pub fn sample_at(
    state: &EquilibriumState,
    species: Species,
    start: &PhasePoint,
    s_nodes: Vec<f64>,
    opts: &StepOptions,
) -> Result<TrajectorySample> {
    let (states, max_dp) = if is_stationary(state, start) {
        (vec![*start; s_nodes.len()], 0.0)
    } else if state.homogeneous {
        (s_nodes.iter().map(|&s| straight(state, start, s)).collect(), 0.0)
    } else {
        integrate_through(state, species, start, &s_nodes, opts)?
    };
    let e0 = start.e();
    let max_de = states.iter().map(|p| (p.e() - e0).abs()).fold(0.0, f64::max);
    Ok(TrajectorySample {
        species,
        s_nodes,
        states,
        conservation: ConservationReport { max_de, max_dp },
    })
}

/// Classifies the orbit through `start` and measures its minimal period.
pub fn orbit_info(
    state: &EquilibriumState,
    species: Species,
    start: &PhasePoint,
    opts: &StepOptions,
) -> Result<OrbitInfo> {
    validate_start(start)?;
    if is_stationary(state, start) {
        return Ok(OrbitInfo { kind: OrbitKind::Stationary, period: 0.0, winding: 0 });
    }
    if state.homogeneous {
        let vh1 = start.vh1();
        let period = state.period() / vh1.abs();
        if period > opts.max_period {
            return Err(Error::OrbitNotResolved { max_period: opts.max_period });
        }
        return Ok(OrbitInfo { kind: OrbitKind::Passing, period, winding: vh1.signum() as i32 });
    }
    let mut dt = opts.step(state);
    let mut last = Error::OrbitNotResolved { max_period: opts.max_period };
    for _ in 0..=opts.max_halvings {
        match find_closure(state, species, start, dt, opts) {
            Ok(info) => return Ok(info),
            Err(e @ Error::ConservationFailure { .. }) => {
                last = e;
                dt *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

fn find_closure(
    state: &EquilibriumState,
    species: Species,
    start: &PhasePoint,
    dt: f64,
    opts: &StepOptions,
) -> Result<OrbitInfo> {
    let period = state.period();
    let mut integ = Integrator::new(state, species, start);
    let mut y = initial(start);
    let mut t = 0.0;
    let h = -dt;
    // A start exactly at a turning point has no direction; step off it first
    // and measure the same orbit from there.
    if start.v1 == 0.0 {
        y = integ.step(y, h);
        let p = integ.point(y);
        integ = Integrator::new(state, species, &p);
        y = initial(&p);
        y.x = p.x;
    }
    let x0 = y.x;
    let dir0 = y.th.cos().signum();
    let mut drift: f64 = 0.0;
    let max_steps = (opts.max_period / dt).ceil() as usize + 1;
    for _ in 0..max_steps {
        let next = integ.step(y, h);
        drift = drift.max(integ.drift(next));
        if drift > opts.tol_cons {
            return Err(Error::ConservationFailure { drift, halvings: 0 });
        }
        let d0 = y.x - x0;
        let d1 = next.x - x0;
        // passing closure: displacement reaches ±P
        for target in [period, -period] {
            if (d0 - target) * (d1 - target) <= 0.0 && d1 != d0 && (d0 - target) != 0.0 {
                let tau = locate(&integ, y, h, |p| p.x - x0 - target);
                let winding = if target < 0.0 { 1 } else { -1 };
                return Ok(OrbitInfo { kind: OrbitKind::Passing, period: t + tau.abs(), winding });
            }
        }
        // trapped closure: return to x0 moving in the initial direction
        if d0 != 0.0 && d0 * d1 <= 0.0 && next.th.cos().signum() == dir0 && y.th.cos().signum() == dir0 {
            let tau = locate(&integ, y, h, |p| p.x - x0);
            return Ok(OrbitInfo { kind: OrbitKind::Trapped, period: t + tau.abs(), winding: 0 });
        }
        y = next;
        t += dt;
    }
    Err(Error::OrbitNotResolved { max_period: opts.max_period })
}

/// Root of `f` along a partial step of length in `[0, h]` by safeguarded secant.
fn locate(integ: &Integrator<'_>, y: Polar, h: f64, f: impl Fn(Polar) -> f64) -> f64 {
    let (mut a, mut b) = (0.0, h);
    let (mut fa, mut fb) = (f(y), f(integ.step(y, h)));
    for _ in 0..80 {
        let mut c = b - fb * (b - a) / (fb - fa);
        if !c.is_finite() || (c - a) * (c - b) > 0.0 {
            c = 0.5 * (a + b);
        }
        let fc = f(integ.step(y, c));
        if fc == 0.0 || (b - a).abs() < 1e-15 * h.abs() {
            return c;
        }
        if (fc < 0.0) == (fa < 0.0) {
            a = c;
            fa = fc;
        } else {
            b = c;
            fb = fc;
        }
        if (b - a).abs() < 4e-16 * h.abs().max(1.0) {
            break;
        }
    }
    0.5 * (a + b)
}

/// States at `s_q = −q·T/n`, `q = 0..n`, for an orbit of period `T`.
pub fn periodic_samples(
    state: &EquilibriumState,
    species: Species,
    start: &PhasePoint,
    period: f64,
    n: usize,
    opts: &StepOptions,
) -> Result<Vec<PhasePoint>> {
    let times: Vec<f64> = (0..n).map(|q| -(q as f64) * period / n as f64).collect();
    Ok(sample_at(state, species, start, times, opts)?.states)
}
