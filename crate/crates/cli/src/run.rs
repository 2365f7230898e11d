//! Pipeline orchestration for each subcommand.

use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use vmspec_core::characteristics::StepOptions;
use vmspec_core::discretization::{build_fourier_basis, build_velocity_quadrature, FourierBasis, VelocityQuadrature};
use vmspec_core::equilibrium::{
    check_center_conditions, radial_moments, solve_equilibrium_potential, stability_condition, validate_profile,
    CenterConditions, CenterOptions, EquilibriumState, OdeOptions, PotentialSolution, Species,
    StabilityCondition, ValidationGrid, ValidationReport,
};
use vmspec_core::growing_mode::{
    from_coefficients, maxwell_defects, reconstruct, residuals, GrowingMode, ModeCoefficients, ResidualReport,
};
use vmspec_core::operators::{Assembler, BlockDiagnostics, EvalOptions};
use vmspec_core::spectra::{
    lambda_grid, locate_kernel, sweep, KernelCrossing, SpectralContext, SpectralOptions, SweepResult,
};
use vmspec_core::Error;

use crate::config::Resolved;
use crate::output::{matrix_rows, num, Sink};
use crate::Failure;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub command: String,
    pub version: &'static str,
    pub config_hash: String,
    pub config: Resolved,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumInfo {
    pub profile: String,
    pub parameters: Vec<(String, f64)>,
    pub weight_c: f64,
    pub weight_alpha: f64,
    pub period: f64,
    pub homogeneous: bool,
    pub c1_norm: f64,
    pub mean_field: f64,
    pub r_max: f64,
    pub velocity_nodes: usize,
    pub center: Option<CenterConditions>,
    pub solution: Option<PotentialSolution>,
    pub stability_condition: Option<StabilityCondition>,
}

#[derive(Default, Debug, Clone, Serialize)]
pub struct Timings {
    pub equilibrium: f64,
    pub orbits: f64,
    pub zero_blocks: f64,
    pub sweep: f64,
    pub mode: f64,
}

pub struct Setup {
    pub cfg: Resolved,
    pub state: EquilibriumState,
    pub quad: VelocityQuadrature,
    pub basis: FourierBasis,
    pub eval: EvalOptions,
    pub info: EquilibriumInfo,
    pub timings: Timings,
}

fn numerical(e: Error) -> Failure {
    Failure::Numerical(e)
}

pub fn setup(cfg: &Resolved) -> Result<Setup, Failure> {
    let t0 = Instant::now();
    let profile = cfg.profile().map_err(Failure::Config)?;
    let quad = build_velocity_quadrature(&profile.weight, &profile.breakpoints(), cfg.tol_tail, cfg.n_r, cfg.n_theta)
        .map_err(numerical)?;
    let (state, center, stab) = if cfg.profile == crate::config::ProfileKind::WeakfieldFamily {
        let eq_quad = build_velocity_quadrature(
            &profile.weight,
            &profile.breakpoints(),
            cfg.tol_tail,
            cfg.n_r_equilibrium,
            cfg.n_theta_equilibrium,
        )
        .map_err(numerical)?;
        let center = check_center_conditions(&profile, &eq_quad, &CenterOptions::default()).map_err(numerical)?;
        let ode = OdeOptions { tol_equil: cfg.tol_equil, ..OdeOptions::default() };
        let state = solve_equilibrium_potential(&profile, cfg.epsilon, &eq_quad, &ode).map_err(numerical)?;
        let stab = center.p_cr().map(|p| stability_condition(&profile, &eq_quad, p));
        (state, Some(center), stab)
    } else {
        (EquilibriumState::homogeneous(profile.clone(), cfg.period).map_err(numerical)?, None, None)
    };
    let basis = build_fourier_basis(state.period(), cfg.n_x, true).map_err(numerical)?;
    let eval = EvalOptions {
        n_orbit: cfg.n_orbit,
        n_s: cfg.n_s,
        step: StepOptions { tol_cons: cfg.tol_cons, ..StepOptions::default() },
        ..EvalOptions::default()
    };
    let info = EquilibriumInfo {
        profile: profile.name().to_string(),
        parameters: profile.parameters(),
        weight_c: profile.weight.c,
        weight_alpha: profile.weight.alpha,
        period: state.period(),
        homogeneous: state.homogeneous,
        c1_norm: state.potential.c1_norm(),
        mean_field: state.potential.mean_field(),
        r_max: quad.r_max,
        velocity_nodes: quad.len(),
        center,
        solution: state.solution.clone(),
        stability_condition: stab,
    };
    let timings = Timings { equilibrium: t0.elapsed().as_secs_f64(), ..Timings::default() };
    Ok(Setup { cfg: cfg.clone(), state, quad, basis, eval, info, timings })
}

impl Setup {
    pub fn header(&self, command: &str) -> Header {
        Header { command: command.into(), version: VERSION, config_hash: self.cfg.hash(), config: self.cfg.clone() }
    }

    pub fn spectral_options(&self) -> SpectralOptions {
        SpectralOptions { tol_eig: self.cfg.tol_eig, tol_kernel: self.cfg.tol_kernel, ..SpectralOptions::default() }
    }

    /// Returns the assembler and the seconds spent building its orbit cache.
    pub fn assembler(&self) -> Result<(Assembler<'_>, f64), Failure> {
        let t0 = Instant::now();
        let asm = Assembler::new(&self.state, &self.basis, &self.quad, &self.eval).map_err(numerical)?;
        Ok((asm, t0.elapsed().as_secs_f64()))
    }

    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = self.cfg.lambda_bounds(self.state.period());
        lambda_grid(lo, hi, self.cfg.lambda_points)
    }
}

// validate

#[derive(Serialize)]
pub struct ValidateReport {
    #[serde(flatten)]
    pub header: Header,
    pub profile: String,
    pub parameters: Vec<(String, f64)>,
    pub validation: ValidationReport,
}

pub fn cmd_validate(cfg: &Resolved, sink: &Sink) -> Result<String, Failure> {
    let profile = cfg.profile().map_err(Failure::Config)?;
    let validation = validate_profile(&profile, &ValidationGrid::default()).map_err(numerical)?;
    let header = Header { command: "validate".into(), version: VERSION, config_hash: cfg.hash(), config: cfg.clone() };
    sink.json(
        "validate",
        &ValidateReport { header, profile: profile.name().into(), parameters: profile.parameters(), validation },
    )
}

// equilibrium

#[derive(Serialize)]
pub struct EquilibriumReport {
    #[serde(flatten)]
    pub header: Header,
    pub equilibrium: EquilibriumInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

pub fn cmd_equilibrium(cfg: &Resolved, sink: &Sink) -> Result<String, Failure> {
    let s = setup(cfg)?;
    if !s.state.homogeneous {
        let n = 256;
        let p = s.state.period();
        let rows = (0..n).map(|j| {
            let x = j as f64 * p / n as f64;
            format!("{},{},{}", num(x), num(s.state.potential.psi(x)), num(s.state.potential.field(x)))
        });
        sink.csv("equilibrium_potential.csv", "x,psi,B", rows)?;
    }
    let report = EquilibriumReport {
        header: s.header("equilibrium"),
        equilibrium: s.info.clone(),
        timings: (!cfg.canonical).then(|| s.timings.clone()),
    };
    sink.json("equilibrium", &report)
}

// assemble

#[derive(Serialize)]
pub struct EquivalenceCheck {
    pub samples: usize,
    pub n: usize,
    pub max_relative_gap: f64,
}

#[derive(Serialize)]
pub struct AssembleReport {
    #[serde(flatten)]
    pub header: Header,
    pub equilibrium: EquilibriumInfo,
    pub lambda: f64,
    pub n_modes: usize,
    pub l: f64,
    pub tol_eig: f64,
    pub diagnostics: BlockDiagnostics,
    pub equivalence: Option<EquivalenceCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

pub fn cmd_assemble(cfg: &Resolved, lambda: f64, sink: &Sink) -> Result<String, Failure> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Failure::Config(format!("lambda = {lambda} must be non-negative")));
    }
    let s = setup(cfg)?;
    let header = s.header("assemble");
    let info = s.info.clone();
    let opts = s.spectral_options();
    let (asm, orbit_time) = s.assembler()?;
    let mut timings = s.timings.clone();
    timings.orbits = orbit_time;
    let blocks = asm.blocks(lambda).map_err(numerical)?;
    sink.csv("blocks_a1.csv", "row,col,value", matrix_rows(&blocks.a1))?;
    sink.csv("blocks_a2.csv", "row,col,value", matrix_rows(&blocks.a2))?;
    sink.csv("blocks_b.csv", "row,col,value", matrix_rows(&blocks.b))?;
    let vec_rows = blocks
        .c
        .iter()
        .enumerate()
        .map(|(i, v)| format!("c,{i},{}", num(*v)))
        .chain(blocks.d.iter().enumerate().map(|(i, v)| format!("d,{i},{}", num(*v))))
        .chain(std::iter::once(format!("l,0,{}", num(blocks.l))));
    sink.csv("blocks_vectors.csv", "name,index,value", vec_rows)?;

    // seeded spot check of the Maxwell equivalence at this λ
    let equivalence = if lambda > 0.0 {
        let ctx = SpectralContext::new(&asm, &opts).map_err(numerical)?;
        let n = cfg.n;
        let m = ctx.m(&blocks, n).map_err(numerical)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let samples = 4;
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let u: Vec<f64> = (0..2 * n + 1).map(|_| rng.random_range(-1.0..1.0)).collect();
            let coefs = ModeCoefficients::from_m_coordinates(&ctx, &u).map_err(numerical)?;
            let mode = from_coefficients(&asm, lambda, &coefs).map_err(numerical)?;
            let d = maxwell_defects(&asm, &mode).in_m_coordinates(&ctx.xi(n), &ctx.zeta(n));
            let mu = &m * DVector::from_vec(u);
            worst = worst.max((d - &mu).norm() / mu.norm());
        }
        Some(EquivalenceCheck { samples, n, max_relative_gap: worst })
    } else {
        None
    };
    let report = AssembleReport {
        header,
        equilibrium: info,
        lambda,
        n_modes: blocks.n_modes,
        l: blocks.l,
        tol_eig: cfg.tol_eig,
        diagnostics: blocks.diagnostics.clone(),
        equivalence,
        timings: (!cfg.canonical).then_some(timings),
    };
    sink.json("assemble", &report)
}

// sweep / analyze / mode

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub neg: usize,
    pub zero: usize,
    pub pos: usize,
    pub min_abs_eig: f64,
    pub l: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChangeRow {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub neg_lo: usize,
    pub neg_hi: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub n: usize,
    pub k_n: usize,
    pub neg_m0: usize,
    pub saturated: bool,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub neg_at_lambda_min: usize,
    pub neg_at_lambda_max: usize,
    pub points: Vec<SweepRow>,
    pub changes: Vec<ChangeRow>,
}

impl SweepSummary {
    fn from(sw: &SweepResult) -> Self {
        let first = &sw.points[0];
        let last = sw.points.last().unwrap();
        SweepSummary {
            n: sw.n,
            k_n: sw.k_n,
            neg_m0: sw.neg_m0,
            saturated: sw.saturated,
            lambda_min: first.lambda,
            lambda_max: last.lambda,
            neg_at_lambda_min: first.counts.neg,
            neg_at_lambda_max: last.counts.neg,
            points: sw
                .points
                .iter()
                .map(|p| SweepRow {
                    lambda: p.lambda,
                    neg: p.counts.neg,
                    zero: p.counts.zero,
                    pos: p.counts.pos,
                    min_abs_eig: p.min_abs_eig,
                    l: p.l,
                })
                .collect(),
            changes: sw
                .changes
                .iter()
                .map(|c| ChangeRow {
                    lambda_lo: sw.points[c.lo].lambda,
                    lambda_hi: sw.points[c.hi].lambda,
                    neg_lo: c.neg_lo,
                    neg_hi: c.neg_hi,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingReport {
    pub lambda_star: f64,
    pub eigenvalue: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub b: f64,
    pub psi_norm: f64,
    pub phi_norm: f64,
    pub residuals: ResidualReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    #[serde(flatten)]
    pub header: Header,
    pub equilibrium: EquilibriumInfo,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypothesis_failure: Option<String>,
    pub neg_a1: usize,
    pub neg_a2: usize,
    pub zero_a2: usize,
    pub neg_l0: usize,
    pub l0: f64,
    pub min_eig_a1: f64,
    pub min_eig_a2: f64,
    pub diagnostics_zero: BlockDiagnostics,
    pub sweep: SweepSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossing: Option<CrossingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossing_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

pub struct Analysis {
    pub report: AnalysisReport,
    pub sweep: SweepResult,
    pub mode: Option<GrowingMode>,
}

fn crossing_report(kc: &KernelCrossing, rep: ResidualReport) -> CrossingReport {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    CrossingReport {
        lambda_star: kc.lambda_star,
        eigenvalue: kc.eigenvalue,
        bracket: kc.bracket,
        iterations: kc.iterations,
        b: kc.b,
        psi_norm: norm(&kc.psi),
        phi_norm: norm(&kc.phi),
        residuals: rep,
    }
}

pub fn analyze(cfg: &Resolved, command: &str, find_mode: bool) -> Result<Analysis, Failure> {
    let s = setup(cfg)?;
    let header = s.header(command);
    let info = s.info.clone();
    let opts = s.spectral_options();
    let grid = s.grid();
    let (asm, orbit_time) = s.assembler()?;
    let mut timings = s.timings.clone();
    timings.orbits = orbit_time;
    let t0 = Instant::now();
    let ctx = SpectralContext::new(&asm, &opts).map_err(numerical)?;
    timings.zero_blocks = t0.elapsed().as_secs_f64();
    let (verdict, hypothesis_failure) = match ctx.verdict() {
        Ok(v) => (v.as_str().to_string(), None),
        Err(e @ Error::DegenerateL0 { .. }) => ("INCONCLUSIVE".to_string(), Some(e.to_string())),
        Err(e) => return Err(numerical(e)),
    };
    let t0 = Instant::now();
    let sw = sweep(&asm, &ctx, cfg.n, &grid).map_err(numerical)?;
    timings.sweep = t0.elapsed().as_secs_f64();

    let mut crossing = None;
    let mut crossing_error = None;
    let mut mode = None;
    if find_mode {
        let t0 = Instant::now();
        match sw.changes.first() {
            None => crossing_error = Some(Error::NoCrossing.to_string()),
            Some(ch) => match locate_kernel(&asm, &ctx, &sw, ch) {
                Ok(kc) => {
                    let m = reconstruct(&asm, &kc).map_err(numerical)?;
                    let rep = residuals(&asm, &m, cfg.tol_residual).map_err(numerical)?;
                    crossing = Some(crossing_report(&kc, rep));
                    mode = Some(m);
                }
                Err(e) => crossing_error = Some(e.to_string()),
            },
        }
        timings.mode = t0.elapsed().as_secs_f64();
    }
    let report = AnalysisReport {
        header,
        equilibrium: info,
        verdict,
        hypothesis_failure,
        neg_a1: ctx.neg_a1,
        neg_a2: ctx.neg_a2,
        zero_a2: ctx.zero_a2,
        neg_l0: ctx.neg_l0(),
        l0: ctx.l0,
        min_eig_a1: ctx.a1.values[0],
        min_eig_a2: ctx.a2.values[0],
        diagnostics_zero: ctx.blocks0.diagnostics.clone(),
        sweep: SweepSummary::from(&sw),
        crossing,
        crossing_error,
        timings: (!cfg.canonical).then_some(timings),
    };
    Ok(Analysis { report, sweep: sw, mode })
}

pub fn write_spectra(sink: &Sink, name: &str, sw: &SweepResult) -> Result<(), Failure> {
    let rows = sw.points.iter().flat_map(|p| {
        p.eigenvalues.iter().enumerate().map(move |(i, v)| format!("{},{i},{}", num(p.lambda), num(*v)))
    });
    sink.csv(name, "lambda,eig_index,eigenvalue", rows)?;
    Ok(())
}

pub fn cmd_sweep(cfg: &Resolved, sink: &Sink) -> Result<String, Failure> {
    let a = analyze(cfg, "sweep", false)?;
    write_spectra(sink, "sweep_spectra.csv", &a.sweep)?;
    sink.json("sweep", &a.report)
}

pub fn cmd_analyze(cfg: &Resolved, find_mode: bool, sink: &Sink) -> Result<String, Failure> {
    let a = analyze(cfg, "analyze", find_mode)?;
    if let Some(m) = &a.mode {
        write_mode(sink, cfg, m)?;
    }
    sink.json("analyze", &a.report)
}

pub fn cmd_mode(cfg: &Resolved, sink: &Sink) -> Result<String, Failure> {
    let a = analyze(cfg, "mode", true)?;
    let text = sink.json("mode", &a.report)?;
    match &a.mode {
        Some(m) => {
            write_mode(sink, cfg, m)?;
            Ok(text)
        }
        None => Err(Failure::NoMode(a.report.crossing_error.unwrap_or_else(|| "no crossing".into()))),
    }
}

fn write_mode(sink: &Sink, cfg: &Resolved, m: &GrowingMode) -> Result<(), Failure> {
    let rows = (0..m.x.len()).map(|j| {
        format!(
            "{},{},{},{},{},{}",
            num(m.x[j]),
            num(m.phi[j]),
            num(m.psi[j]),
            num(m.e1[j]),
            num(m.e2[j]),
            num(m.bfield[j])
        )
    });
    sink.csv("mode_fields.csv", "x,phi,psi,E1,E2,B", rows)?;
    // distribution slices at four positions
    let profile = cfg.profile().map_err(Failure::Config)?;
    let quad = build_velocity_quadrature(&profile.weight, &profile.breakpoints(), cfg.tol_tail, cfg.n_r, cfg.n_theta)
        .map_err(numerical)?;
    let nx = m.x.len();
    let nv = quad.len();
    let mut rows = Vec::new();
    for j in [0, nx / 4, nx / 2, 3 * nx / 4] {
        for (b, node) in quad.nodes().iter().enumerate() {
            rows.push(format!(
                "{},{},{},{},{}",
                num(m.x[j]),
                num(node.r),
                num(node.theta),
                num(m.fplus[j * nv + b]),
                num(m.fminus[j * nv + b])
            ));
        }
    }
    sink.csv("mode_distribution.csv", "x,r,theta,fplus,fminus", rows)?;
    Ok(())
}

// example

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct GoldenEntry {
    pub name: String,
    pub expected: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GoldenRow {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tol: f64,
    pub ok: bool,
}

#[derive(Serialize)]
pub struct ExampleReport {
    pub example: String,
    pub golden: Vec<GoldenRow>,
    pub analysis: AnalysisReport,
}

fn compare(table: &str, values: &[(&str, f64)]) -> Vec<GoldenRow> {
    let entries: Vec<GoldenEntry> = serde_json::from_str(table).expect("golden table parses");
    entries
        .into_iter()
        .map(|e| {
            let value = values.iter().find(|v| v.0 == e.name).map(|v| v.1).unwrap_or(f64::NAN);
            GoldenRow { ok: (value - e.expected).abs() <= e.tol, name: e.name, value, expected: e.expected, tol: e.tol }
        })
        .collect()
}

pub fn cmd_example(cfg: &Resolved, which: &str, emit_spectra: bool, sink: &Sink) -> Result<String, Failure> {
    let (golden, analysis) = match which {
        "homogeneous" => {
            let m = radial_moments(32, 16);
            let profile = cfg.profile().map_err(Failure::Config)?;
            let quad =
                build_velocity_quadrature(&profile.weight, &profile.breakpoints(), cfg.tol_tail, cfg.n_r, cfg.n_theta)
                    .map_err(numerical)?;
            let rule = |f: &dyn Fn(&vmspec_core::discretization::VelocityNode) -> f64| -> f64 {
                quad.nodes().iter().map(|n| n.weight * f(n)).sum()
            };
            let mu_e = rule(&|n| profile.mu_e(Species::Minus, n.e, n.v2));
            let l0 = rule(&|n| profile.mu_e(Species::Minus, n.e, n.v2) * n.vh1 * n.vh1);
            let values = [
                ("I", m.i),
                ("tail_moment", m.tail.abs()),
                ("II", m.ii),
                ("II_pinned", m.ii),
                ("mu_e_integral", mu_e),
                ("l0_per_species", l0),
            ];
            let golden = compare(include_str!("../goldens/homogeneous.json"), &values);
            (golden, analyze(cfg, "example", true)?)
        }
        "weakfield" => {
            let a = analyze(cfg, "example", false)?;
            let eq = &a.report.equilibrium;
            let sol = eq.solution.clone().expect("weak-field state carries its solution");
            let g0 = eq.center.map(|c| c.g0).unwrap_or(f64::NAN);
            let values = [("period_over_p_cr", sol.period / sol.p_cr), ("ode_residual", sol.ode_residual), ("g0", g0)];
            (compare(include_str!("../goldens/weakfield.json"), &values), a)
        }
        other => return Err(Failure::Config(format!("unknown example '{other}'"))),
    };
    if emit_spectra {
        write_spectra(sink, &format!("example_{which}_spectra.csv"), &analysis.sweep)?;
    }
    let bad: Vec<String> = golden
        .iter()
        .filter(|g| !g.ok)
        .map(|g| format!("{}: {} vs {} ± {}", g.name, g.value, g.expected, g.tol))
        .collect();
    let text = sink.json(
        &format!("example_{which}"),
        &ExampleReport { example: which.into(), golden, analysis: analysis.report },
    )?;
    if bad.is_empty() {
        Ok(text)
    } else {
        Err(Failure::Golden(bad))
    }
}
