//! Galerkin matrices of `A₁^λ`, `A₂^λ`, `B^λ`, the vectors `C^λ`, `D^λ`, the
//! scalar `l^λ`, and the truncated matrix `M^λ_n`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::cache::{straight_line_factor, CacheSummary, EvalOptions, NodeSmoothing, Scratch, Smoother};
use crate::discretization::{FourierBasis, VelocityQuadrature};
use crate::equilibrium::{EquilibriumState, Species};
use crate::error::{Error, Result};

/// Consistency measurements taken while assembling one `λ`.
#[derive(Debug, Clone, Serialize)]
pub struct BlockDiagnostics {
    /// `‖A1 − A1ᵀ‖_max / ‖A1‖_max` before symmetrization.
    pub sym_defect_a1: f64,
    pub sym_defect_a2: f64,
    /// `‖B − (B*)ᵀ‖_max` with `B*` assembled from its own formula.
    pub adjoint_defect_b: f64,
    /// `‖A1 1‖_max / ‖A1‖_max` on the basis extended by the constant.
    pub null_vector: f64,
    /// `max_x |Σ∫(μ_p + v̂₂ μ_e) dv|`.
    pub fact_moment: f64,
    /// `max_x |Σ∫ v̂₁ μ_e dv|` and `max_x |Σ∫ v̂₁ μ_p dv|`.
    pub parity_e: f64,
    pub parity_p: f64,
    pub norm_b: f64,
    pub norm_c: f64,
    pub norm_d: f64,
    pub orbits: Option<CacheSummary>,
}

/// Matrices in the orthonormal Fourier basis; entry `(j, i)` is `⟨op eᵢ, eⱼ⟩`.
#[derive(Debug, Clone)]
pub struct OperatorBlocks {
    pub lambda: f64,
    pub period: f64,
    /// Mean-zero basis size `N_x`.
    pub n_modes: usize,
    /// Mean-zero × mean-zero.
    pub a1: DMatrix<f64>,
    /// Full × full.
    pub a2: DMatrix<f64>,
    /// Mean-zero rows × full columns.
    pub b: DMatrix<f64>,
    /// Full rows × mean-zero columns.
    pub b_star: DMatrix<f64>,
    pub c: DVector<f64>,
    pub d: DVector<f64>,
    pub l: f64,
    /// `A1` on the full basis before symmetrization.
    pub a1_full_raw: DMatrix<f64>,
    pub a2_raw: DMatrix<f64>,
    pub diagnostics: BlockDiagnostics,
}

/// Raw full-basis accumulations before symmetrization.
struct RawBlocks {
    a1: DMatrix<f64>,
    a2: DMatrix<f64>,
    b: DMatrix<f64>,
    b_star: DMatrix<f64>,
    c: DVector<f64>,
    d: DVector<f64>,
    l: f64,
    fact: f64,
    parity_e: f64,
    parity_p: f64,
}

/// Per-x accumulators of velocity moments.
struct XMoments {
    m0: f64,
    mp: f64,
    m2p: f64,
    f1: Vec<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
    hs: Vec<f64>,
    c: f64,
    d: f64,
    l: f64,
    fact: f64,
    parity_e: f64,
    parity_p: f64,
}

/// Reusable assembler: profile values and orbit records are computed once
/// and shared across `λ`.
pub struct Assembler<'a> {
    pub state: &'a EquilibriumState,
    pub basis: FourierBasis,
    pub quad: &'a VelocityQuadrature,
    pub opts: EvalOptions,
    pub smoother: Smoother,
    /// `(μ, μ_e, μ_p)` per species, grid point, velocity node.
    mu: Vec<[f64; 3]>,
}

impl<'a> Assembler<'a> {
    pub fn new(
        state: &'a EquilibriumState,
        basis: &FourierBasis,
        quad: &'a VelocityQuadrature,
        opts: &EvalOptions,
    ) -> Result<Self> {
        if (basis.period - state.period()).abs() > 1e-12 * state.period() {
            return Err(Error::Size(format!(
                "basis period {} differs from equilibrium period {}",
                basis.period,
                state.period()
            )));
        }
        let basis = basis.variant(false);
        let n_v = quad.len();
        let mut mu = Vec::with_capacity(2 * basis.n_grid() * n_v);
        for species in Species::BOTH {
            for &x in &basis.x_grid {
                let shift = species.sign() * state.potential.psi(x);
                for node in quad.nodes() {
                    let (m, me, mp) = state.profile.checked(species, node.e, node.v2 + shift)?;
                    mu.push([m, me, mp]);
                }
            }
        }
        let smoother = Smoother::build(state, &basis, quad, opts)?;
        Ok(Assembler { state, basis, quad, opts: *opts, smoother, mu })
    }

    pub fn n_modes(&self) -> usize {
        self.basis.n_modes
    }

    /// `(μ, μ_e, μ_p)` of `species` at grid point `j` and node `b`.
    pub fn mu_at(&self, species: Species, j: usize, b: usize) -> [f64; 3] {
        let s = match species {
            Species::Plus => 0,
            Species::Minus => 1,
        };
        debug_assert_eq!(Species::BOTH[s], species);
        self.mu[(s * self.basis.n_grid() + j) * self.quad.len() + b]
    }

    pub fn blocks(&self, lambda: f64) -> Result<OperatorBlocks> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda = {lambda}")));
        }
        let raw = match &self.smoother {
            Smoother::Homogeneous => self.homogeneous_raw(lambda),
            Smoother::Orbits(_) => self.general_raw(lambda),
        };
        self.finish(lambda, raw)
            .map_err(|e| Error::AtLambda { lambda, source: Box::new(e) })
    }

    /// Smoothed node values for reconstruction.
    pub fn node(&self, lambda: f64, species: Species, j: usize, b: usize, scratch: &mut Scratch, out: &mut NodeSmoothing) {
        self.smoother.node(lambda, species, j, b, &self.basis, self.quad, scratch, out);
    }

    pub fn scratch(&self) -> Scratch {
        Scratch::new(&self.opts, self.basis.len())
    }

    fn homogeneous_raw(&self, lambda: f64) -> RawBlocks {
        let nb = self.basis.len();
        let kmax = self.basis.harmonics();
        let period = self.basis.period;
        // moments of μ_e·{1, v̂₂, v̂₂²}·(C_k, S_k)
        let mut mc = vec![[0.0f64; 3]; kmax + 1];
        let mut ms = vec![[0.0f64; 3]; kmax + 1];
        let (mut m0, mut mp, mut m2p) = (0.0, 0.0, 0.0);
        let (mut c, mut d, mut l, mut fact, mut par_e, mut par_p) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for species in Species::BOTH {
            for (b, node) in self.quad.nodes().iter().enumerate() {
                let [_, me, mpv] = self.mu_at(species, 0, b);
                let w = node.weight;
                m0 += w * me;
                mp += w * mpv;
                m2p += w * node.vh2 * mpv;
                fact += w * (mpv + node.vh2 * me);
                par_e += w * node.vh1 * me;
                par_p += w * node.vh1 * mpv;
                if me == 0.0 {
                    continue;
                }
                let wm = w * me;
                c += wm * node.vh1;
                d += wm * node.vh2 * node.vh1;
                l += wm * node.vh1 * node.vh1;
                for k in 0..=kmax {
                    let kk = 2.0 * std::f64::consts::PI * k as f64 / period;
                    let (ck, sk) = straight_line_factor(lambda, kk, node.vh1);
                    let pw = [wm, wm * node.vh2, wm * node.vh2 * node.vh2];
                    for m in 0..3 {
                        mc[k][m] += pw[m] * ck;
                        ms[k][m] += pw[m] * sk;
                    }
                }
            }
        }
        // Q̂ block for moment m: rows/cols ordered (cos_k, sin_k).
        let block = |m: usize| -> DMatrix<f64> {
            let mut out = DMatrix::zeros(nb, nb);
            out[(0, 0)] = mc[0][m];
            for k in 1..=kmax {
                let (ic, is) = (2 * k - 1, 2 * k);
                out[(ic, ic)] = mc[k][m];
                out[(is, is)] = mc[k][m];
                out[(ic, is)] = ms[k][m];
                out[(is, ic)] = -ms[k][m];
            }
            out
        };
        let lap = self.laplacian(0.0);
        let ident = DMatrix::<f64>::identity(nb, nb);
        let a1 = &lap - &ident * m0 + block(0);
        let a2 = self.laplacian(lambda) - &ident * m2p - block(2);
        let b = &ident * mp + block(1);
        let b_star = b.clone();
        let mut cv = DVector::zeros(nb);
        let mut dv = DVector::zeros(nb);
        cv[0] = c * period.sqrt();
        dv[0] = d * period.sqrt();
        RawBlocks {
            a1,
            a2,
            b,
            b_star,
            c: cv,
            d: dv,
            l,
            fact: fact.abs(),
            parity_e: par_e.abs(),
            parity_p: par_p.abs(),
        }
    }

    fn x_moments(&self, lambda: f64, j: usize, scratch: &mut Scratch, ns: &mut NodeSmoothing) -> XMoments {
        let nb = self.basis.len();
        let mut acc = XMoments {
            m0: 0.0,
            mp: 0.0,
            m2p: 0.0,
            f1: vec![0.0; nb],
            g: vec![0.0; nb],
            h: vec![0.0; nb],
            hs: vec![0.0; nb],
            c: 0.0,
            d: 0.0,
            l: 0.0,
            fact: 0.0,
            parity_e: 0.0,
            parity_p: 0.0,
        };
        for species in Species::BOTH {
            for (b, node) in self.quad.nodes().iter().enumerate() {
                let [_, me, mpv] = self.mu_at(species, j, b);
                let w = node.weight;
                acc.m0 += w * me;
                acc.mp += w * mpv;
                acc.m2p += w * node.vh2 * mpv;
                acc.fact += w * (mpv + node.vh2 * me);
                acc.parity_e += w * node.vh1 * me;
                acc.parity_p += w * node.vh1 * mpv;
                if me == 0.0 {
                    continue;
                }
                self.smoother.node(lambda, species, j, b, &self.basis, self.quad, scratch, ns);
                let wm = w * me;
                let wm2 = wm * node.vh2;
                for i in 0..nb {
                    acc.f1[i] += wm * ns.qe[i];
                    acc.g[i] += wm2 * ns.qv2e[i];
                    acc.h[i] += wm * ns.qv2e[i];
                    acc.hs[i] += wm2 * ns.qe[i];
                }
                acc.c += wm * ns.qv1;
                acc.d += wm2 * ns.qv1;
                acc.l += wm * node.vh1 * ns.qv1;
            }
        }
        acc
    }

    fn general_raw(&self, lambda: f64) -> RawBlocks {
        let nb = self.basis.len();
        let moments: Vec<XMoments> = (0..self.basis.n_grid())
            .into_par_iter()
            .map_init(
                || (self.scratch(), NodeSmoothing::new(nb)),
                |(scratch, ns), j| self.x_moments(lambda, j, scratch, ns),
            )
            .collect();
        let mut raw = RawBlocks {
            a1: self.laplacian(0.0),
            a2: self.laplacian(lambda),
            b: DMatrix::zeros(nb, nb),
            b_star: DMatrix::zeros(nb, nb),
            c: DVector::zeros(nb),
            d: DVector::zeros(nb),
            l: 0.0,
            fact: 0.0,
            parity_e: 0.0,
            parity_p: 0.0,
        };
        let mut ev = vec![0.0; nb];
        for (jx, m) in moments.iter().enumerate() {
            let xw = self.basis.x_weights[jx];
            for (r, v) in ev.iter_mut().enumerate() {
                *v = self.basis.grid_values(r)[jx];
            }
            for i in 0..nb {
                let a1_col = -m.m0 * ev[i] + m.f1[i];
                let a2_col = -(m.m2p * ev[i] + m.g[i]);
                let b_col = m.mp * ev[i] + m.h[i];
                let bs_col = m.mp * ev[i] + m.hs[i];
                for r in 0..nb {
                    let wr = xw * ev[r];
                    raw.a1[(r, i)] += wr * a1_col;
                    raw.a2[(r, i)] += wr * a2_col;
                    raw.b[(r, i)] += wr * b_col;
                    raw.b_star[(r, i)] += wr * bs_col;
                }
            }
            for r in 0..nb {
                raw.c[r] += xw * ev[r] * m.c;
                raw.d[r] += xw * ev[r] * m.d;
            }
            raw.l += xw * m.l / self.basis.period;
            raw.fact = raw.fact.max(m.fact.abs());
            raw.parity_e = raw.parity_e.max(m.parity_e.abs());
            raw.parity_p = raw.parity_p.max(m.parity_p.abs());
        }
        raw
    }

    /// `diag((2πk/P)² + λ²)` on the full basis.
    fn laplacian(&self, lambda: f64) -> DMatrix<f64> {
        let nb = self.basis.len();
        DMatrix::from_fn(nb, nb, |r, c| {
            if r == c {
                self.basis.wavenumber(r).powi(2) + lambda * lambda
            } else {
                0.0
            }
        })
    }

    fn finish(&self, lambda: f64, raw: RawBlocks) -> Result<OperatorBlocks> {
        let nb = self.basis.len();
        let nz = nb - 1;
        let a1_raw = raw.a1.view((1, 1), (nz, nz)).into_owned();
        let (a1, sym1) = symmetrize(&a1_raw);
        let (a2, sym2) = symmetrize(&raw.a2);
        let tol = self.opts.sym_tolerance(lambda, self.state.period());
        if sym1 > tol {
            return Err(Error::AssemblyInconsistency { block: "A1", defect: sym1, tol });
        }
        if sym2 > tol {
            return Err(Error::AssemblyInconsistency { block: "A2", defect: sym2, tol });
        }
        let b = raw.b.view((1, 0), (nz, nb)).into_owned();
        let b_star = raw.b_star.view((0, 1), (nb, nz)).into_owned();
        let adjoint = max_abs(&(&b - b_star.transpose()));
        let null_vector = raw.a1.column(0).amax() / raw.a1.amax().max(f64::MIN_POSITIVE);
        let c = raw.c.rows(1, nz).into_owned();
        let diagnostics = BlockDiagnostics {
            sym_defect_a1: sym1,
            sym_defect_a2: sym2,
            adjoint_defect_b: adjoint,
            null_vector,
            fact_moment: raw.fact,
            parity_e: raw.parity_e,
            parity_p: raw.parity_p,
            norm_b: max_abs(&b),
            norm_c: c.amax(),
            norm_d: raw.d.amax(),
            orbits: self.smoother.summary(),
        };
        Ok(OperatorBlocks {
            lambda,
            period: self.basis.period,
            n_modes: self.basis.n_modes,
            a1,
            a2,
            b,
            b_star,
            c,
            d: raw.d,
            l: raw.l,
            a1_full_raw: raw.a1,
            a2_raw: raw.a2,
            diagnostics,
        })
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.amax()
    }
}

/// `(A + Aᵀ)/2` and the relative defect `‖A − Aᵀ‖_max / ‖A‖_max`.
pub fn symmetrize(a: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let at = a.transpose();
    let scale = max_abs(a);
    let defect = if scale > 0.0 { max_abs(&(a - &at)) / scale } else { 0.0 };
    ((a + at) * 0.5, defect)
}

/// One-shot assembly.
pub fn assemble_blocks(
    state: &EquilibriumState,
    lambda: f64,
    basis: &FourierBasis,
    quad: &VelocityQuadrature,
    opts: &EvalOptions,
) -> Result<OperatorBlocks> {
    Assembler::new(state, basis, quad, opts)?.blocks(lambda)
}

/// `M^λ_n` in the eigenbases `Ξ` (columns `ξ₁..ξ_n` of `A1⁰`) and `Z`
/// (columns `ζ₁..ζ_n` of `A2⁰`), ordered `(φ, ψ, b)`.
pub fn assemble_m(blocks: &OperatorBlocks, xi: &DMatrix<f64>, zeta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = xi.ncols();
    if zeta.ncols() != n {
        return Err(Error::Size(format!("Ξ has {n} columns, Z has {}", zeta.ncols())));
    }
    if n == 0 || n > blocks.n_modes {
        return Err(Error::Size(format!("n = {n} outside 1..={}", blocks.n_modes)));
    }
    if xi.nrows() != blocks.a1.nrows() || zeta.nrows() != blocks.a2.nrows() {
        return Err(Error::Size("eigenbasis rows do not match the blocks".into()));
    }
    let dim = 2 * n + 1;
    let mut m = DMatrix::zeros(dim, dim);
    let m11 = -(xi.transpose() * &blocks.a1 * xi);
    let m22 = zeta.transpose() * &blocks.a2 * zeta;
    m.view_mut((0, 0), (n, n)).copy_from(&m11);
    m.view_mut((n, n), (n, n)).copy_from(&m22);
    let lambda = blocks.lambda;
    m[(2 * n, 2 * n)] = -blocks.period * (lambda * lambda - blocks.l);
    if lambda > 0.0 {
        let b_bar = (&blocks.b + blocks.b_star.transpose()) * 0.5;
        let m12 = xi.transpose() * b_bar * zeta;
        let m13 = xi.transpose() * &blocks.c;
        let m23 = -(zeta.transpose() * &blocks.d);
        m.view_mut((0, n), (n, n)).copy_from(&m12);
        m.view_mut((n, 0), (n, n)).copy_from(&m12.transpose());
        for i in 0..n {
            m[(i, 2 * n)] = m13[i];
            m[(2 * n, i)] = m13[i];
            m[(n + i, 2 * n)] = m23[i];
            m[(2 * n, n + i)] = m23[i];
        }
    }
    // exact symmetry of the diagonal blocks
    let sym = (&m + m.transpose()) * 0.5;
    Ok(sym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{build_fourier_basis, build_with_radius};
    use crate::equilibrium::{EquilibriumProfile, MagneticPotential};
    use std::f64::consts::PI;

    fn vacuum(p: f64) -> EquilibriumState {
        EquilibriumState::homogeneous(EquilibriumProfile::zero(), p).unwrap()
    }

    #[test]
    fn vacuum_blocks_are_free_laplacian() {
        let p = 2.5;
        let st = vacuum(p);
        let basis = build_fourier_basis(p, 6, true).unwrap();
        let quad = build_with_radius(4.0, &[], 6, 8).unwrap();
        let blocks = assemble_blocks(&st, 0.7, &basis, &quad, &EvalOptions::default()).unwrap();
        for i in 0..6 {
            let k = 2.0 * PI * ((i / 2) + 1) as f64 / p;
            assert!((blocks.a1[(i, i)] - k * k).abs() < 1e-12);
            assert!((blocks.a2[(i + 1, i + 1)] - k * k - 0.49).abs() < 1e-12);
        }
        assert!((blocks.a2[(0, 0)] - 0.49).abs() < 1e-12);
        assert_eq!(blocks.diagnostics.norm_b, 0.0);
        assert_eq!(blocks.l, 0.0);
    }

    #[test]
    fn general_path_matches_closed_form_on_homogeneous_state() {
        let p = 2.0 * PI;
        let st = EquilibriumState::homogeneous(EquilibriumProfile::anisotropic(0.1), p).unwrap();
        let basis = build_fourier_basis(p, 4, true).unwrap();
        let quad = build_with_radius(8.0, &[], 10, 16).unwrap();
        let fast = EvalOptions::default();
        let slow = EvalOptions { force_general: true, n_orbit: 64, ..EvalOptions::default() };
        let af = Assembler::new(&st, &basis, &quad, &fast).unwrap();
        let asl = Assembler::new(&st, &basis, &quad, &slow).unwrap();
        for &lam in &[0.0, 0.3, 3.0] {
            let bf = af.blocks(lam).unwrap();
            let bs = asl.blocks(lam).unwrap();
            let scale = bf.a1.amax().max(1.0);
            assert!((&bf.a1 - &bs.a1).amax() < 1e-8 * scale, "A1 at {lam}");
            assert!((&bf.a2 - &bs.a2).amax() < 1e-8 * scale, "A2 at {lam}");
            assert!((&bf.b - &bs.b).amax() < 1e-8 * scale, "B at {lam}");
            assert!((bf.l - bs.l).abs() < 1e-8 * scale.max(bf.l.abs()), "l at {lam}");
        }
    }

    #[test]
    fn m_of_vacuum_has_known_spectrum() {
        let p = 1.5;
        let st = vacuum(p);
        let basis = build_fourier_basis(p, 4, true).unwrap();
        let quad = build_with_radius(3.0, &[], 4, 8).unwrap();
        let blocks = assemble_blocks(&st, 2.0, &basis, &quad, &EvalOptions::default()).unwrap();
        let xi = DMatrix::identity(4, 4);
        let zeta = DMatrix::identity(5, 4);
        let m = assemble_m(&blocks, &xi, &zeta).unwrap();
        let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let negatives = eig.iter().filter(|&&v| v < 0.0).count();
        assert_eq!(negatives, 5);
        assert!((eig[0] + p * 4.0).abs() < 1e-12 || eig.iter().any(|v| (v + p * 4.0).abs() < 1e-12));
    }

    #[test]
    fn m_rejects_oversized_truncation() {
        let st = vacuum(1.0);
        let basis = build_fourier_basis(1.0, 2, true).unwrap();
        let quad = build_with_radius(3.0, &[], 4, 8).unwrap();
        let blocks = assemble_blocks(&st, 1.0, &basis, &quad, &EvalOptions::default()).unwrap();
        let xi = DMatrix::identity(2, 3);
        let zeta = DMatrix::identity(3, 3);
        assert!(matches!(assemble_m(&blocks, &xi, &zeta), Err(Error::Size(_))));
    }

    #[test]
    fn inhomogeneous_blocks_are_nearly_selfadjoint() {
        let p = 2.0 * PI;
        let samples: Vec<f64> = (0..64).map(|j| -0.05 * (j as f64 * p / 64.0).cos()).collect();
        let st = EquilibriumState::with_potential(
            EquilibriumProfile::anisotropic(0.1),
            MagneticPotential::from_samples(p, samples).unwrap(),
        );
        let basis = build_fourier_basis(p, 4, true).unwrap();
        let quad = build_with_radius(8.0, &[], 10, 24).unwrap();
        let opts = EvalOptions::default();
        let asm = Assembler::new(&st, &basis, &quad, &opts).unwrap();
        let bl = asm.blocks(0.5).unwrap();
        assert!(bl.diagnostics.sym_defect_a1 < 1e-6, "{:?}", bl.diagnostics);
        assert!(bl.diagnostics.sym_defect_a2 < 1e-3, "{:?}", bl.diagnostics);
        assert!(bl.diagnostics.null_vector < 1e-12);
        assert!(bl.diagnostics.adjoint_defect_b < 1e-10);
    }
}
