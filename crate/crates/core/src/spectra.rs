//! Eigensolves, signed counts, instability verdicts, the `λ` sweep of
//! `M^λ_n`, and kernel-crossing localization.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::operators::{assemble_m, symmetrize, Assembler, OperatorBlocks};
use crate::error::{Error, Result};

const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal columns matching `values`.
    pub vectors: DMatrix<f64>,
    /// `max_i ‖A vᵢ − λᵢ vᵢ‖_max`.
    pub residual: f64,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// The first `n` eigenvectors as columns.
    pub fn leading(&self, n: usize) -> DMatrix<f64> {
        self.vectors.columns(0, n).into_owned()
    }
}

/// Full decomposition with ascending eigenvalues, degenerate clusters spanned
/// by the projections of unit vectors in index order, and the first
/// non-negligible component of every eigenvector positive.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<EigenDecomposition> {
    if !a.is_square() {
        return Err(Error::Size(format!("{}x{} matrix is not square", a.nrows(), a.ncols())));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(EigenDecomposition { values: vec![], vectors: DMatrix::zeros(0, 0), residual: 0.0 });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let (sym, defect) = symmetrize(a);
    if defect > 1e-8 {
        return Err(Error::AssemblyInconsistency { block: "eigen input", defect, tol: 1e-8 });
    }
    let eig = SymmetricEigen::try_new(sym.clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenNonConvergence { iterations: EIGEN_MAX_ITER })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    let scale = sym.amax().max(f64::MIN_POSITIVE);
    canonicalize(&values, &mut vectors, 1e-10 * scale);
    let mut residual: f64 = 0.0;
    for c in 0..n {
        let v = vectors.column(c);
        let r = &sym * v - v * values[c];
        residual = residual.max(r.amax());
    }
    Ok(EigenDecomposition { values, vectors, residual })
}

fn canonicalize(values: &[f64], vectors: &mut DMatrix<f64>, cluster_tol: f64) {
    let n = values.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[end - 1] <= cluster_tol {
            end += 1;
        }
        if end - start > 1 {
            let span = vectors.columns(start, end - start).into_owned();
            let mut chosen: Vec<DVector<f64>> = Vec::new();
            for k in 0..n {
                if chosen.len() == end - start {
                    break;
                }
                // projection of the unit vector e_k onto the cluster
                let mut v: DVector<f64> = &span * span.row(k).transpose();
                for u in &chosen {
                    let d = u.dot(&v);
                    v -= u * d;
                }
                let norm = v.norm();
                if norm > 1e-6 {
                    chosen.push(v / norm);
                }
            }
            if chosen.len() == end - start {
                for (c, v) in chosen.into_iter().enumerate() {
                    vectors.set_column(start + c, &v);
                }
            }
        }
        start = end;
    }
    for c in 0..n {
        let mut col = vectors.column_mut(c);
        let big = col.amax();
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-8 * big) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// Signed eigenvalue counts with a symmetric zero band `|λ| ≤ tol`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CountReport {
    pub neg: usize,
    pub zero: usize,
    pub pos: usize,
}

pub fn count(values: &[f64], tol: f64) -> CountReport {
    let neg = values.iter().filter(|&&v| v < -tol).count();
    let pos = values.iter().filter(|&&v| v > tol).count();
    CountReport { neg, zero: values.len() - neg - pos, pos }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "UNSTABLE_T1")]
    UnstableT1,
    #[serde(rename = "UNSTABLE_T2")]
    UnstableT2,
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::UnstableT1 => "UNSTABLE_T1",
            Verdict::UnstableT2 => "UNSTABLE_T2",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// Sufficient instability criteria: `neg(A2⁰) > neg(A1⁰) + neg(−l⁰)`, or the
/// inequality `≠` when `ker A2⁰` is trivial.
pub fn verdict(neg_a1: usize, neg_a2: usize, l0: f64, ker_a2_trivial: bool, tol: f64) -> Result<Verdict> {
    if !l0.is_finite() || l0.abs() <= tol {
        return Err(Error::DegenerateL0 { l0, tol });
    }
    let neg_minus_l0 = usize::from(l0 > 0.0);
    let rhs = neg_a1 + neg_minus_l0;
    Ok(if neg_a2 > rhs {
        Verdict::UnstableT1
    } else if ker_a2_trivial && neg_a2 != rhs {
        Verdict::UnstableT2
    } else {
        Verdict::Inconclusive
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralOptions {
    /// Zero band relative to `‖·‖_max`.
    pub tol_eig: f64,
    /// Absolute band for `l⁰ ≈ 0`.
    pub tol_l0: f64,
    /// Kernel tolerance relative to `‖M‖_max`.
    pub tol_kernel: f64,
    pub max_bisections: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { tol_eig: 1e-8, tol_l0: 1e-10, tol_kernel: 1e-10, max_bisections: 60 }
    }
}

/// The `λ = 0` data: decompositions of `A1⁰`, `A2⁰`, `l⁰`, and the counts.
#[derive(Debug, Clone)]
pub struct SpectralContext {
    pub blocks0: OperatorBlocks,
    pub a1: EigenDecomposition,
    pub a2: EigenDecomposition,
    pub l0: f64,
    pub neg_a1: usize,
    pub neg_a2: usize,
    pub zero_a2: usize,
    pub opts: SpectralOptions,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContextSummary {
    pub neg_a1: usize,
    pub neg_a2: usize,
    pub zero_a2: usize,
    pub l0: f64,
    pub min_a1: f64,
    pub min_a2: f64,
}

impl SpectralContext {
    pub fn new(asm: &Assembler<'_>, opts: &SpectralOptions) -> Result<Self> {
        Self::from_blocks(asm.blocks(0.0)?, opts)
    }

    pub fn from_blocks(blocks0: OperatorBlocks, opts: &SpectralOptions) -> Result<Self> {
        let a1 = symmetric_eigen(&blocks0.a1)?;
        let a2 = symmetric_eigen(&blocks0.a2)?;
        let t1 = opts.tol_eig * blocks0.a1.amax();
        if let Some(&v) = a1.values.iter().find(|v| v.abs() <= t1) {
            return Err(Error::DegenerateA1Kernel { eigenvalue: v });
        }
        let c1 = count(&a1.values, t1);
        let c2 = count(&a2.values, opts.tol_eig * blocks0.a2.amax());
        Ok(SpectralContext {
            l0: blocks0.l,
            neg_a1: c1.neg,
            neg_a2: c2.neg,
            zero_a2: c2.zero,
            blocks0,
            a1,
            a2,
            opts: *opts,
        })
    }

    pub fn summary(&self) -> ContextSummary {
        ContextSummary {
            neg_a1: self.neg_a1,
            neg_a2: self.neg_a2,
            zero_a2: self.zero_a2,
            l0: self.l0,
            min_a1: self.a1.values[0],
            min_a2: self.a2.values[0],
        }
    }

    pub fn n_max(&self) -> usize {
        self.a1.dim()
    }

    pub fn xi(&self, n: usize) -> DMatrix<f64> {
        self.a1.leading(n)
    }

    pub fn zeta(&self, n: usize) -> DMatrix<f64> {
        self.a2.leading(n)
    }

    pub fn neg_l0(&self) -> usize {
        usize::from(self.l0 < 0.0)
    }

    /// `K_n = n − neg(A1⁰) + neg(A2⁰) + neg(l⁰)`.
    pub fn k_n(&self, n: usize) -> usize {
        (n + self.neg_a2 + self.neg_l0()).saturating_sub(self.neg_a1)
    }

    /// Negative count of the truncated `M⁰_n`: only the `n` lowest
    /// eigenvalues of each block enter, so it equals `K_n` once `n` covers
    /// both negative spaces.
    pub fn truncated_count(&self, n: usize) -> usize {
        n - self.neg_a1.min(n) + self.neg_a2.min(n) + self.neg_l0()
    }

    pub fn saturated(&self, n: usize) -> bool {
        n >= self.neg_a1 && n >= self.neg_a2
    }

    pub fn verdict(&self) -> Result<Verdict> {
        verdict(self.neg_a1, self.neg_a2, self.l0, self.zero_a2 == 0, self.opts.tol_l0)
    }

    pub fn m(&self, blocks: &OperatorBlocks, n: usize) -> Result<DMatrix<f64>> {
        if n == 0 || n > self.n_max() {
            return Err(Error::Size(format!("n = {n} outside 1..={}", self.n_max())));
        }
        assemble_m(blocks, &self.xi(n), &self.zeta(n))
    }
}

/// `n_points` logarithmic values in `[lo, hi]·(2π/P)`.
pub fn default_lambda_grid(period: f64, n_points: usize, lo: f64, hi: f64) -> Vec<f64> {
    lambda_grid(lo * 2.0 * PI / period, hi * 2.0 * PI / period, n_points)
}

pub fn lambda_grid(min: f64, max: f64, n_points: usize) -> Vec<f64> {
    if n_points == 1 {
        return vec![min];
    }
    let (a, b) = (min.ln(), max.ln());
    (0..n_points)
        .map(|i| (a + (b - a) * i as f64 / (n_points - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub counts: CountReport,
    pub min_abs_eig: f64,
    pub eigenvalues: Vec<f64>,
    pub l: f64,
    pub norm_b: f64,
    pub norm_c: f64,
    pub norm_d: f64,
    pub sym_defect: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CountChange {
    /// Indices into the sweep grid.
    pub lo: usize,
    pub hi: usize,
    pub neg_lo: usize,
    pub neg_hi: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub n: usize,
    pub k_n: usize,
    /// Negative count of the truncated `M⁰_n`.
    pub neg_m0: usize,
    pub saturated: bool,
    pub points: Vec<SweepPoint>,
    pub changes: Vec<CountChange>,
}

impl SweepResult {
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }
}

fn spectrum_at(asm: &Assembler<'_>, ctx: &SpectralContext, n: usize, lambda: f64) -> Result<(OperatorBlocks, DMatrix<f64>, EigenDecomposition)> {
    let blocks = asm.blocks(lambda)?;
    let m = ctx.m(&blocks, n)?;
    let eig = symmetric_eigen(&m).map_err(|e| Error::AtLambda { lambda, source: Box::new(e) })?;
    Ok((blocks, m, eig))
}

pub fn sweep(asm: &Assembler<'_>, ctx: &SpectralContext, n: usize, grid: &[f64]) -> Result<SweepResult> {
    if grid.is_empty() || grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidInput("lambda grid must be non-empty and positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("lambda grid must be strictly ascending".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let (blocks, m, eig) = spectrum_at(asm, ctx, n, lambda)?;
        let tol = ctx.opts.tol_eig * m.amax();
        let counts = count(&eig.values, tol);
        let min_abs = eig.values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        points.push(SweepPoint {
            lambda,
            counts,
            min_abs_eig: min_abs,
            eigenvalues: eig.values,
            l: blocks.l,
            norm_b: blocks.diagnostics.norm_b,
            norm_c: blocks.diagnostics.norm_c,
            norm_d: blocks.diagnostics.norm_d,
            sym_defect: blocks.diagnostics.sym_defect_a1.max(blocks.diagnostics.sym_defect_a2),
        });
    }
    let changes = points
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].counts.neg != w[1].counts.neg)
        .map(|(i, w)| CountChange { lo: i, hi: i + 1, neg_lo: w[0].counts.neg, neg_hi: w[1].counts.neg })
        .collect();
    Ok(SweepResult {
        n,
        k_n: ctx.k_n(n),
        neg_m0: ctx.truncated_count(n),
        saturated: ctx.saturated(n),
        points,
        changes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelCrossing {
    pub lambda_star: f64,
    /// The crossing eigenvalue of `M^{λ*}_n`.
    pub eigenvalue: f64,
    pub min_abs_eig: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub n: usize,
    /// Kernel vector in the `(ξ, ζ, b)` coordinates of `M_n`, scaled so
    /// `‖φ‖ + ‖ψ‖ + |b| = 1`.
    pub vector: Vec<f64>,
    /// Fourier coefficients: `φ` on the mean-zero basis, `ψ` on the full basis.
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub b: f64,
}

/// A continuous eigenvalue branch of `M^λ_n` crossing zero inside one
/// count-change interval of the sweep, located by bracketed bisection.
pub fn locate_kernel(
    asm: &Assembler<'_>,
    ctx: &SpectralContext,
    sweep: &SweepResult,
    change: &CountChange,
) -> Result<KernelCrossing> {
    let n = sweep.n;
    let (mut lo, mut hi) = (sweep.points[change.lo].lambda, sweep.points[change.hi].lambda);
    if change.neg_lo == change.neg_hi {
        return Err(Error::NoCrossing);
    }
    // sorted index whose sign flips across the interval
    let idx = if change.neg_lo > change.neg_hi { change.neg_lo - 1 } else { change.neg_lo };
    let branch = |lambda: f64| -> Result<(f64, f64, f64, DMatrix<f64>, EigenDecomposition)> {
        let (_, m, eig) = spectrum_at(asm, ctx, n, lambda)?;
        let scale = m.amax();
        let extreme = eig.values[0].abs().max(eig.values[eig.dim() - 1].abs());
        Ok((eig.values[idx], scale, extreme, m, eig))
    };
    let (mut f_lo, _, ext_lo, _, _) = branch(lo)?;
    let (mut f_hi, _, ext_hi, _, _) = branch(hi)?;
    let ratio = ext_lo.max(ext_hi) / ext_lo.min(ext_hi).max(f64::MIN_POSITIVE);
    if ratio > 1e6 {
        return Err(Error::SpuriousInterval { lo, hi, reason: format!("extreme eigenvalues jump by {ratio:e}") });
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::SpuriousInterval { lo, hi, reason: "tracked eigenvalue does not change sign".into() });
    }
    let mut best: Option<(f64, f64, f64, EigenDecomposition)> = None;
    let mut iterations = 0;
    for it in 0..ctx.opts.max_bisections {
        iterations = it + 1;
        // geometric midpoint keeps the log-spaced bracket balanced
        let mid = (lo * hi).sqrt();
        let (f_mid, scale, _, _, eig) = branch(mid)?;
        let done = f_mid.abs() <= ctx.opts.tol_kernel * scale;
        best = Some((mid, f_mid, scale, eig));
        if done {
            break;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
        if (hi - lo) <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let (lambda_star, value, scale, eig) = best.ok_or(Error::NoCrossing)?;
    if value.abs() > ctx.opts.tol_kernel * scale {
        // the branch changed sign across a bracket of machine width without
        // approaching zero: a pole, not a crossing
        if value.abs() > 1e-6 * scale {
            return Err(Error::SpuriousInterval {
                lo,
                hi,
                reason: format!("eigenvalue jumps from {f_lo:e} to {f_hi:e} without reaching zero"),
            });
        }
    }
    let mut vector: Vec<f64> = eig.vectors.column(idx).iter().copied().collect();
    let norm_phi = vector[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
    let norm_psi = vector[n..2 * n].iter().map(|v| v * v).sum::<f64>().sqrt();
    let total = norm_phi + norm_psi + vector[2 * n].abs();
    for v in vector.iter_mut() {
        *v /= total;
    }
    let phi = ctx.xi(n) * DVector::from_column_slice(&vector[..n]);
    let psi = ctx.zeta(n) * DVector::from_column_slice(&vector[n..2 * n]);
    Ok(KernelCrossing {
        lambda_star,
        eigenvalue: value,
        min_abs_eig: eig.values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs())),
        bracket: (lo, hi),
        iterations,
        n,
        b: vector[2 * n],
        phi: phi.iter().copied().collect(),
        psi: psi.iter().copied().collect(),
        vector,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_and_swap() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -1.0, 0.0]));
        let e = symmetric_eigen(&d).unwrap();
        assert_eq!(e.values, vec![-1.0, 0.0, 2.0]);
        let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = symmetric_eigen(&s).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = DMatrix::from_fn(50, 50, |_, _| rng.random_range(-1.0..1.0));
        let a = (&a + a.transpose()) * 0.5;
        let e = symmetric_eigen(&a).unwrap();
        let rec = &e.vectors * DMatrix::from_diagonal(&DVector::from_vec(e.values.clone())) * e.vectors.transpose();
        assert!((rec - &a).amax() <= 1e-9 * a.amax().max(1.0));
        let gram = e.vectors.transpose() * &e.vectors;
        assert!((gram - DMatrix::identity(50, 50)).amax() < 1e-9);
        assert!(e.residual < 1e-9 * a.amax());
    }

    #[test]
    fn degenerate_clusters_are_canonical() {
        let e = symmetric_eigen(&DMatrix::identity(3, 3)).unwrap();
        assert!((e.vectors.clone() - DMatrix::identity(3, 3)).amax() < 1e-12);
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let e = symmetric_eigen(&a).unwrap();
        assert!((e.vectors[(1, 0)] - 1.0).abs() < 1e-12);
        assert!((e.vectors[(2, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(symmetric_eigen(&a).is_err());
    }

    #[test]
    fn verdict_rules() {
        assert_eq!(verdict(0, 1, -1.0, true, 1e-12).unwrap(), Verdict::UnstableT1);
        assert_eq!(verdict(0, 0, -1.0, true, 1e-12).unwrap(), Verdict::Inconclusive);
        assert_eq!(verdict(1, 0, -1.0, true, 1e-12).unwrap(), Verdict::UnstableT2);
        assert_eq!(verdict(1, 0, -1.0, false, 1e-12).unwrap(), Verdict::Inconclusive);
        assert_eq!(verdict(0, 1, 1.0, true, 1e-12).unwrap(), Verdict::Inconclusive);
        assert!(matches!(verdict(0, 1, 0.0, true, 1e-12), Err(Error::DegenerateL0 { .. })));
    }

    #[test]
    fn counts_partition_dimension() {
        let c = count(&[-2.0, -1e-12, 0.0, 3.0], 1e-10);
        assert_eq!((c.neg, c.zero, c.pos), (1, 2, 1));
    }

    #[test]
    fn grid_is_log_spaced() {
        let g = default_lambda_grid(2.0 * PI, 48, 1e-2, 1e2);
        assert_eq!(g.len(), 48);
        assert!((g[0] - 1e-2).abs() < 1e-15 && (g[47] - 1e2).abs() < 1e-11);
        let r = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-12));
    }
}
