use std::f64::consts::PI;

use vmspec_core::discretization::{build_fourier_basis, build_velocity_quadrature};
use vmspec_core::equilibrium::{EquilibriumProfile, EquilibriumState};
use vmspec_core::growing_mode::{maxwell_defects, reconstruct, residuals};
use vmspec_core::operators::{Assembler, EvalOptions};
use vmspec_core::spectra::{default_lambda_grid, locate_kernel, sweep, SpectralContext, SpectralOptions, Verdict};
use vmspec_core::Error;

const P: f64 = 2.0 * PI;

fn setup(profile: EquilibriumProfile) -> (EquilibriumState, vmspec_core::discretization::VelocityQuadrature) {
    let quad = build_velocity_quadrature(&profile.weight, &profile.breakpoints(), 1e-12, 24, 64).unwrap();
    (EquilibriumState::homogeneous(profile, P).unwrap(), quad)
}

#[test]
fn anisotropic_profile_has_a_growing_mode() {
    let (st, quad) = setup(EquilibriumProfile::anisotropic(0.1));
    let basis = build_fourier_basis(P, 8, true).unwrap();
    let asm = Assembler::new(&st, &basis, &quad, &EvalOptions::default()).unwrap();
    let ctx = SpectralContext::new(&asm, &SpectralOptions::default()).unwrap();
    assert_eq!(ctx.verdict().unwrap(), Verdict::UnstableT1);
    assert_eq!(ctx.neg_a1, 0);
    assert!(ctx.neg_a2 >= 1 && ctx.l0 < 0.0);

    let grid = default_lambda_grid(P, 48, 1e-2, 1e2);
    let mut stars = Vec::new();
    for n in [4, 8] {
        let sw = sweep(&asm, &ctx, n, &grid).unwrap();
        assert!(sw.saturated);
        assert_eq!(sw.points[0].counts.neg, sw.k_n);
        assert_eq!(sw.points.last().unwrap().counts.neg, n + 1);
        assert_eq!(sw.changes.len(), 1);
        let kc = locate_kernel(&asm, &ctx, &sw, &sw.changes[0]).unwrap();
        assert!(kc.lambda_star > grid[0] && kc.lambda_star < grid[grid.len() - 1]);
        let norm = kc.phi.iter().chain(&kc.psi).map(|v| v * v).sum::<f64>();
        assert!(kc.psi.iter().map(|v| v * v).sum::<f64>().sqrt() + kc.b.abs() > 1e-6);
        assert!(norm > 0.0);

        let mode = reconstruct(&asm, &kc).unwrap();
        let rep = residuals(&asm, &mode, 1e-4).unwrap();
        assert!(rep.passed, "{:?}", rep.relative);
        let d = maxwell_defects(&asm, &mode);
        assert!(d.b_row.abs() < 1e-8);
        stars.push(kc.lambda_star);
    }
    assert!((stars[0] - stars[1]).abs() < 0.05 * stars[1], "{stars:?}");
}

#[test]
fn truncation_below_saturation_undercounts() {
    let (st, quad) = setup(EquilibriumProfile::anisotropic(0.2));
    let basis = build_fourier_basis(P, 8, true).unwrap();
    let asm = Assembler::new(&st, &basis, &quad, &EvalOptions::default()).unwrap();
    let ctx = SpectralContext::new(&asm, &SpectralOptions::default()).unwrap();
    assert!(ctx.neg_a2 > 4);
    assert!(!ctx.saturated(4));
    assert!(ctx.truncated_count(4) < ctx.k_n(4));
    assert!(ctx.saturated(8));
    assert_eq!(ctx.truncated_count(8), ctx.k_n(8));
}

#[test]
fn zero_profile_hits_the_l0_hypothesis() {
    let (st, quad) = setup(EquilibriumProfile::zero());
    let basis = build_fourier_basis(P, 4, true).unwrap();
    let asm = Assembler::new(&st, &basis, &quad, &EvalOptions::default()).unwrap();
    let ctx = SpectralContext::new(&asm, &SpectralOptions::default()).unwrap();
    assert_eq!((ctx.neg_a1, ctx.neg_a2), (0, 0));
    assert!(matches!(ctx.verdict(), Err(Error::DegenerateL0 { .. })));
    let sw = sweep(&asm, &ctx, 3, &[0.1, 1.0, 10.0]).unwrap();
    assert!(sw.points.iter().all(|p| p.counts.neg == 4));
    assert!(sw.changes.is_empty());
}

#[test]
fn sweep_rejects_bad_grids() {
    let (st, quad) = setup(EquilibriumProfile::zero());
    let basis = build_fourier_basis(P, 2, true).unwrap();
    let asm = Assembler::new(&st, &basis, &quad, &EvalOptions::default()).unwrap();
    let ctx = SpectralContext::new(&asm, &SpectralOptions::default()).unwrap();
    assert!(sweep(&asm, &ctx, 1, &[]).is_err());
    assert!(sweep(&asm, &ctx, 1, &[1.0, 0.5]).is_err());
    assert!(sweep(&asm, &ctx, 1, &[0.0, 1.0]).is_err());
    assert!(sweep(&asm, &ctx, 3, &[1.0]).is_err());
}
