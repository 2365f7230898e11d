//! Growing-mode reconstruction from a kernel vector and the residual suite
//! of the linearized equations.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::discretization::spectral_derivative;
use crate::equilibrium::Species;
use crate::error::{Error, Result};
use crate::operators::{Assembler, NodeSmoothing};
use crate::spectra::{KernelCrossing, SpectralContext};

/// Fourier coefficients of a candidate mode. `phi` and `psi` live on the full
/// basis `(1, cos₁, sin₁, …)`; the constant of `phi` must vanish.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeCoefficients {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub b: f64,
}

impl ModeCoefficients {
    /// `φ` given on the mean-zero basis.
    pub fn from_mean_zero(phi: &[f64], psi: &[f64], b: f64) -> Self {
        let mut full = Vec::with_capacity(phi.len() + 1);
        full.push(0.0);
        full.extend_from_slice(phi);
        ModeCoefficients { phi: full, psi: psi.to_vec(), b }
    }

    /// Maps `(u_φ, u_ψ, u_b)` in the eigen-coordinates of `M_n`.
    pub fn from_m_coordinates(ctx: &SpectralContext, u: &[f64]) -> Result<Self> {
        if u.len() % 2 == 0 {
            return Err(Error::Size(format!("vector of length {} is not 2n+1", u.len())));
        }
        let n = u.len() / 2;
        let phi = ctx.xi(n) * DVector::from_column_slice(&u[..n]);
        let psi = ctx.zeta(n) * DVector::from_column_slice(&u[n..2 * n]);
        Ok(Self::from_mean_zero(phi.as_slice(), psi.as_slice(), u[2 * n]))
    }
}

#[derive(Debug, Clone)]
pub struct GrowingMode {
    pub lambda: f64,
    pub coefficients: ModeCoefficients,
    pub x: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub bfield: Vec<f64>,
    /// `f±` at `(x_j, v_b)`, flattened as `j·n_v + b`.
    pub fplus: Vec<f64>,
    pub fminus: Vec<f64>,
    pub rho: Vec<f64>,
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
}

impl GrowingMode {
    pub fn b(&self) -> f64 {
        self.coefficients.b
    }
}

/// `f±` from the kernel vector of a crossing.
pub fn reconstruct(asm: &Assembler<'_>, crossing: &KernelCrossing) -> Result<GrowingMode> {
    let coefs = ModeCoefficients::from_mean_zero(&crossing.phi, &crossing.psi, crossing.b);
    let nontrivial = crossing.psi.iter().map(|v| v * v).sum::<f64>().sqrt() + crossing.b.abs();
    if nontrivial <= 1e-12 {
        return Err(Error::InvalidInput("kernel vector has ψ = 0 and b = 0".into()));
    }
    from_coefficients(asm, crossing.lambda_star, &coefs)
}

/// `f± = ±μ±_e φ ± μ±_p ψ ∓ μ±_e [Q±φ − Q±(v̂₂ψ) − b Q±v̂₁]` and the fields.
pub fn from_coefficients(asm: &Assembler<'_>, lambda: f64, coefs: &ModeCoefficients) -> Result<GrowingMode> {
    let basis = &asm.basis;
    let nb = basis.len();
    if coefs.phi.len() != nb || coefs.psi.len() != nb {
        return Err(Error::Size(format!(
            "coefficient lengths ({}, {}) differ from basis size {nb}",
            coefs.phi.len(),
            coefs.psi.len()
        )));
    }
    if coefs.phi[0] != 0.0 {
        return Err(Error::InvalidInput(format!(
            "φ must be mean-zero; constant coefficient {}",
            coefs.phi[0]
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("growth rate must be positive, got {lambda}")));
    }
    let n_v = asm.quad.len();
    let phi = basis.synthesize(&coefs.phi, 0);
    let dphi = basis.synthesize(&coefs.phi, 1);
    let psi = basis.synthesize(&coefs.psi, 0);
    let dpsi = basis.synthesize(&coefs.psi, 1);
    let b = coefs.b;
    let columns: Vec<(Vec<f64>, Vec<f64>, [f64; 3])> = (0..basis.n_grid())
        .into_par_iter()
        .map_init(
            || (asm.scratch(), NodeSmoothing::new(nb)),
            |(scratch, ns), j| {
                let mut fp = vec![0.0; n_v];
                let mut fm = vec![0.0; n_v];
                let mut moments = [0.0; 3];
                for species in Species::BOTH {
                    let out = match species {
                        Species::Plus => &mut fp,
                        Species::Minus => &mut fm,
                    };
                    for (bi, node) in asm.quad.nodes().iter().enumerate() {
                        let [_, me, mp] = asm.mu_at(species, j, bi);
                        if me == 0.0 && mp == 0.0 {
                            continue;
                        }
                        let mut smoothed = 0.0;
                        if me != 0.0 {
                            asm.node(lambda, species, j, bi, scratch, ns);
                            let qphi: f64 = coefs.phi.iter().zip(&ns.qe).map(|(c, q)| c * q).sum();
                            let qpsi: f64 = coefs.psi.iter().zip(&ns.qv2e).map(|(c, q)| c * q).sum();
                            smoothed = qphi - qpsi - b * ns.qv1;
                        }
                        let density = me * phi[j] + mp * psi[j] - me * smoothed;
                        out[bi] = species.sign() * density;
                        let w = node.weight * density;
                        moments[0] += w;
                        moments[1] += w * node.vh1;
                        moments[2] += w * node.vh2;
                    }
                }
                (fp, fm, moments)
            },
        )
        .collect();
    let mut mode = GrowingMode {
        lambda,
        coefficients: coefs.clone(),
        x: basis.x_grid.clone(),
        e1: dphi.iter().map(|d| -d - lambda * b).collect(),
        e2: psi.iter().map(|p| -lambda * p).collect(),
        bfield: dpsi,
        phi,
        psi,
        fplus: Vec::with_capacity(basis.n_grid() * n_v),
        fminus: Vec::with_capacity(basis.n_grid() * n_v),
        rho: Vec::with_capacity(basis.n_grid()),
        j1: Vec::with_capacity(basis.n_grid()),
        j2: Vec::with_capacity(basis.n_grid()),
    };
    for (fp, fm, m) in columns {
        mode.fplus.extend(fp);
        mode.fminus.extend(fm);
        mode.rho.push(m[0]);
        mode.j1.push(m[1]);
        mode.j2.push(m[2]);
    }
    Ok(mode)
}

/// Relative and absolute residuals of one linearized equation.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ResidualSet {
    pub gauss: f64,
    pub ampere1: f64,
    pub ampere2: f64,
    pub continuity: f64,
    pub vlasov_weak: f64,
}

impl ResidualSet {
    pub fn max(&self) -> f64 {
        [self.gauss, self.ampere1, self.ampere2, self.continuity, self.vlasov_weak]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    /// `‖LHS − RHS‖ / max(‖LHS‖, ‖RHS‖, floor)` on the collocation grid.
    pub relative: ResidualSet,
    /// Root-mean-square `LHS − RHS`.
    pub absolute: ResidualSet,
    /// Relative residuals after projection onto the Fourier span.
    pub galerkin: ResidualSet,
    pub vlasov_tests: usize,
    pub tol: f64,
    pub passed: bool,
}

fn l2(basis_w: &[f64], v: &[f64]) -> f64 {
    v.iter().zip(basis_w).map(|(a, w)| w * a * a).sum::<f64>().sqrt()
}

struct Pair {
    rel: f64,
    abs: f64,
}

fn compare(w: &[f64], lhs: &[f64], rhs: &[f64], floor: f64) -> Pair {
    let diff: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
    let num = l2(w, &diff);
    let den = l2(w, lhs).max(l2(w, rhs)).max(floor);
    let period: f64 = w.iter().sum();
    Pair { rel: if den > 0.0 { num / den } else { 0.0 }, abs: num / period.sqrt() }
}

/// Polynomial factors of the weak Vlasov battery.
#[derive(Debug, Clone, Copy)]
enum Poly {
    One,
    V1,
    V2,
    V1V2,
}

impl Poly {
    const ALL: [Poly; 4] = [Poly::One, Poly::V1, Poly::V2, Poly::V1V2];

    fn value(self, vh1: f64, vh2: f64) -> f64 {
        match self {
            Poly::One => 1.0,
            Poly::V1 => vh1,
            Poly::V2 => vh2,
            Poly::V1V2 => vh1 * vh2,
        }
    }

    /// `(v̂₂∂_{v₁} − v̂₁∂_{v₂})` applied to the polynomial.
    fn rotation(self, vh1: f64, vh2: f64, e: f64) -> f64 {
        match self {
            Poly::One => 0.0,
            Poly::V1 => vh2 / e,
            Poly::V2 => -vh1 / e,
            Poly::V1V2 => (vh2 * vh2 - vh1 * vh1) / e,
        }
    }
}

/// Largest relative defect of `∫∫(λg − D±g) f± = ∫∫ g·RHS±` over the battery
/// `g = e_k(x)·poly(v̂)·exp(−(e−1)/2)`, `e_k ∈ {1, cos₁, sin₁, cos₂}`.
fn weak_vlasov(asm: &Assembler<'_>, mode: &GrowingMode) -> (f64, f64, usize) {
    let basis = &asm.basis;
    let n_v = asm.quad.len();
    let lambda = mode.lambda;
    let x_funcs: Vec<usize> = [0usize, 1, 2, 3].into_iter().filter(|&i| i < basis.len()).collect();
    let mut terms = Vec::new();
    for species in Species::BOTH {
        let f = match species {
            Species::Plus => &mode.fplus,
            Species::Minus => &mode.fminus,
        };
        let sigma = species.sign();
        for &k in &x_funcs {
            for poly in Poly::ALL {
                let (mut t1, mut t2) = (0.0, 0.0);
                for (j, &x) in basis.x_grid.iter().enumerate() {
                    let xw = basis.x_weights[j];
                    let ek = basis.grid_values(k)[j];
                    let dek = if k == 0 { 0.0 } else { basis.derivative_at(k, x, 1) };
                    let b0 = asm.state.potential.field(x);
                    let (e1, e2, bf) = (mode.e1[j], mode.e2[j], mode.bfield[j]);
                    for (bi, node) in asm.quad.nodes().iter().enumerate() {
                        let [_, me, mp] = asm.mu_at(species, j, bi);
                        let fv = f[j * n_v + bi];
                        let rhs = sigma
                            * (-me * node.vh1 * e1 + mp * node.vh1 * bf - (me * node.vh2 + mp) * e2);
                        if fv == 0.0 && rhs == 0.0 {
                            continue;
                        }
                        let wexp = (-(node.e - 1.0) / 2.0).exp();
                        let pv = poly.value(node.vh1, node.vh2);
                        let g = ek * pv * wexp;
                        let dg = node.vh1 * dek * pv * wexp
                            + sigma * b0 * ek * wexp * poly.rotation(node.vh1, node.vh2, node.e);
                        let w = xw * node.weight;
                        t1 += w * (lambda * g - dg) * fv;
                        t2 += w * g * rhs;
                    }
                }
                terms.push((t1, t2));
            }
        }
    }
    let scale = terms.iter().fold(0.0f64, |a, (t1, t2)| a.max(t1.abs()).max(t2.abs()));
    let floor = 1e-3 * scale;
    let mut rel: f64 = 0.0;
    let mut abs: f64 = 0.0;
    for (t1, t2) in &terms {
        let den = t1.abs().max(t2.abs()).max(floor);
        if den > 0.0 {
            rel = rel.max((t1 - t2).abs() / den);
        }
        abs = abs.max((t1 - t2).abs());
    }
    (rel, abs, terms.len())
}

/// Residuals of Gauss, both Ampère equations, continuity, and the weak
/// linearized Vlasov equation.
pub fn residuals(asm: &Assembler<'_>, mode: &GrowingMode, tol: f64) -> Result<ResidualReport> {
    let basis = &asm.basis;
    let ng = basis.n_grid();
    if mode.x.len() != ng || mode.fplus.len() != ng * asm.quad.len() {
        return Err(Error::Size("mode grids do not match the assembler".into()));
    }
    let w = &basis.x_weights;
    let lambda = mode.lambda;
    let floor = 1e-3 * (l2(w, &mode.e1) + l2(w, &mode.e2) + l2(w, &mode.bfield));
    let c = &mode.coefficients;
    let neg_d2phi: Vec<f64> = basis.synthesize(&c.phi, 2).iter().map(|v| -v).collect();
    let d2psi = basis.synthesize(&c.psi, 2);
    let a1_lhs: Vec<f64> = mode.e1.iter().map(|e| lambda * e).collect();
    let a1_rhs: Vec<f64> = mode.j1.iter().map(|j| -j).collect();
    let a2_lhs: Vec<f64> = mode.psi.iter().zip(&d2psi).map(|(p, d)| -lambda * lambda * p + d).collect();
    let a2_rhs: Vec<f64> = mode.j2.iter().map(|j| -j).collect();
    let dj1 = spectral_derivative(&mode.j1, basis.period);
    let cont_rhs: Vec<f64> = mode.rho.iter().map(|r| -lambda * r).collect();

    let eqs = [
        (&neg_d2phi, &mode.rho),
        (&a1_lhs, &a1_rhs),
        (&a2_lhs, &a2_rhs),
        (&dj1, &cont_rhs),
    ];
    let pairs: Vec<Pair> = eqs.iter().map(|(l, r)| compare(w, l, r, floor)).collect();
    let project = |v: &Vec<f64>| basis.synthesize(&basis.project(v), 0);
    let galerkin: Vec<Pair> = eqs.iter().map(|(l, r)| compare(w, &project(l), &project(r), floor)).collect();
    let (vrel, vabs, n_tests) = weak_vlasov(asm, mode);
    let relative = ResidualSet {
        gauss: pairs[0].rel,
        ampere1: pairs[1].rel,
        ampere2: pairs[2].rel,
        continuity: pairs[3].rel,
        vlasov_weak: vrel,
    };
    let absolute = ResidualSet {
        gauss: pairs[0].abs,
        ampere1: pairs[1].abs,
        ampere2: pairs[2].abs,
        continuity: pairs[3].abs,
        vlasov_weak: vabs,
    };
    let galerkin = ResidualSet {
        gauss: galerkin[0].rel,
        ampere1: galerkin[1].rel,
        ampere2: galerkin[2].rel,
        continuity: galerkin[3].rel,
        vlasov_weak: vrel,
    };
    let all = [relative.gauss, relative.ampere1, relative.ampere2, relative.continuity, relative.vlasov_weak];
    Ok(ResidualReport {
        passed: all.iter().all(|r| r.is_finite() && *r <= tol),
        relative,
        absolute,
        galerkin,
        vlasov_tests: n_tests,
        tol,
    })
}

/// Maxwell defects of a mode in Fourier coordinates: `⟨∂²φ + ρ, eⱼ⟩` on the
/// mean-zero basis, `−⟨∂²ψ − λ²ψ + j₂, eᵢ⟩` on the full basis, and
/// `∫j₁ dx − Pλ²b`. For a kernel vector all three vanish.
#[derive(Debug, Clone)]
pub struct MaxwellDefects {
    pub phi_rows: DVector<f64>,
    pub psi_rows: DVector<f64>,
    pub b_row: f64,
}

pub fn maxwell_defects(asm: &Assembler<'_>, mode: &GrowingMode) -> MaxwellDefects {
    let basis = &asm.basis;
    let c = &mode.coefficients;
    let lambda = mode.lambda;
    let d2phi = basis.synthesize(&c.phi, 2);
    let d2psi = basis.synthesize(&c.psi, 2);
    let gauss: Vec<f64> = d2phi.iter().zip(&mode.rho).map(|(d, r)| d + r).collect();
    let amp: Vec<f64> = (0..basis.n_grid())
        .map(|j| -(d2psi[j] - lambda * lambda * mode.psi[j] + mode.j2[j]))
        .collect();
    let g = basis.project(&gauss);
    let a = basis.project(&amp);
    let int_j1: f64 = mode.j1.iter().zip(&basis.x_weights).map(|(j, w)| j * w).sum();
    MaxwellDefects {
        phi_rows: DVector::from_column_slice(&g[1..]),
        psi_rows: DVector::from_vec(a),
        b_row: int_j1 - basis.period * lambda * lambda * c.b,
    }
}

impl MaxwellDefects {
    /// The defects in the eigen-coordinates of `M_n`.
    pub fn in_m_coordinates(&self, xi: &DMatrix<f64>, zeta: &DMatrix<f64>) -> DVector<f64> {
        let n = xi.ncols();
        let mut out = DVector::zeros(2 * n + 1);
        out.rows_mut(0, n).copy_from(&(xi.transpose() * &self.phi_rows));
        out.rows_mut(n, n).copy_from(&(zeta.transpose() * &self.psi_rows));
        out[2 * n] = self.b_row;
        out
    }
}
