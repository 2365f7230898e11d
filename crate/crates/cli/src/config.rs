//! Run configuration: a TOML file with optional sections, resolved against
//! per-profile defaults and command-line overrides.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use vmspec_core::equilibrium::{EquilibriumProfile, WeakFieldFamily, WeightSpec};

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub profile: ProfileSection,
    pub weight: WeightSection,
    pub discretization: DiscretizationSection,
    pub tolerances: ToleranceSection,
    pub lambda: LambdaSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub name: Option<String>,
    pub period: Option<f64>,
    pub epsilon: Option<f64>,
    pub kappa: Option<f64>,
    pub theta: Option<f64>,
    pub s: Option<f64>,
    pub delta: Option<f64>,
    pub e_b: Option<f64>,
    pub sigma_b: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightSection {
    pub c: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationSection {
    pub n_r: Option<usize>,
    pub n_theta: Option<usize>,
    pub n_x: Option<usize>,
    pub n: Option<usize>,
    pub n_s: Option<usize>,
    pub n_orbit: Option<usize>,
    /// Velocity rule used for `g(ψ)` in the weak-field potential solve.
    pub n_r_equilibrium: Option<usize>,
    pub n_theta_equilibrium: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSection {
    pub tol_tail: Option<f64>,
    pub tol_cons: Option<f64>,
    pub tol_eig: Option<f64>,
    pub tol_kernel: Option<f64>,
    pub tol_residual: Option<f64>,
    pub tol_equil: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct LambdaSection {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<String>,
    /// Omit timings so identical inputs give identical bytes.
    pub canonical: Option<bool>,
}

/// Values from the command line that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub profile: Option<String>,
    pub epsilon: Option<f64>,
    pub n: Option<usize>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub out: Option<PathBuf>,
    pub canonical: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    PaperHomogeneous,
    WeakfieldFamily,
    Anisotropic,
    Zero,
}

impl ProfileKind {
    fn parse(name: &str) -> Result<Self, String> {
        match name {
            "paper_homogeneous" => Ok(ProfileKind::PaperHomogeneous),
            "weakfield_family" => Ok(ProfileKind::WeakfieldFamily),
            "anisotropic" => Ok(ProfileKind::Anisotropic),
            "zero" => Ok(ProfileKind::Zero),
            other => Err(format!(
                "unknown profile '{other}' (expected paper_homogeneous, weakfield_family, anisotropic, zero)"
            )),
        }
    }
}

/// Fully resolved settings. This is what gets hashed.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub seed: u64,
    pub profile: ProfileKind,
    /// Period for homogeneous profiles; the weak-field period comes from the solve.
    pub period: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub weakfield: WeakFieldParams,
    pub weight_c: f64,
    pub weight_alpha: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub n_x: usize,
    pub n: usize,
    pub n_s: usize,
    pub n_orbit: usize,
    pub n_r_equilibrium: usize,
    pub n_theta_equilibrium: usize,
    pub tol_tail: f64,
    pub tol_cons: f64,
    pub tol_eig: f64,
    pub tol_kernel: f64,
    pub tol_residual: f64,
    pub tol_equil: f64,
    /// Absolute bounds; `None` scales with `2π/P` once the period is known.
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub lambda_points: usize,
    #[serde(skip)]
    pub out_dir: PathBuf,
    #[serde(skip)]
    pub canonical: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeakFieldParams {
    pub theta: f64,
    pub kappa: f64,
    pub s: f64,
    pub delta: f64,
    pub e_b: f64,
    pub sigma_b: f64,
}

pub fn load(path: Option<&Path>) -> Result<RunConfig, String> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            parse(&text)
        }
    }
}

pub fn parse(text: &str) -> Result<RunConfig, String> {
    toml::from_str(text).map_err(|e| format!("config: {}", e.message()))
}

fn check_size(name: &str, v: usize) -> Result<usize, String> {
    if v == 0 {
        return Err(format!("{name} must be positive"));
    }
    Ok(v)
}

fn check_tol(name: &str, v: f64) -> Result<f64, String> {
    if !(v > 0.0 && v < 1.0) {
        return Err(format!("{name} = {v} must lie in (0, 1)"));
    }
    Ok(v)
}

fn check_positive(name: &str, v: f64) -> Result<f64, String> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("{name} = {v} must be positive and finite"));
    }
    Ok(v)
}

impl RunConfig {
    pub fn resolve(&self, ov: &Overrides) -> Result<Resolved, String> {
        let name = ov.profile.clone().or_else(|| self.profile.name.clone()).unwrap_or_else(|| "paper_homogeneous".into());
        let kind = ProfileKind::parse(&name)?;
        let weak = kind == ProfileKind::WeakfieldFamily;
        let d = &self.discretization;
        let t = &self.tolerances;
        let wd = WeakFieldFamily::default();
        let pf = &self.profile;
        let (c_default, alpha_default) = match kind {
            ProfileKind::PaperHomogeneous => (1e13, 20.0),
            ProfileKind::Anisotropic => (1e14, 20.0),
            ProfileKind::WeakfieldFamily => (2e8, 14.0),
            ProfileKind::Zero => (1.0, 20.0),
        };
        let r = Resolved {
            seed: self.seed.unwrap_or(0),
            profile: kind,
            period: check_positive("period", pf.period.unwrap_or(2.0 * PI))?,
            epsilon: check_positive("epsilon", ov.epsilon.or(pf.epsilon).unwrap_or(0.05))?,
            kappa: pf.kappa.unwrap_or(if weak { wd.kappa } else { 0.1 }),
            weakfield: WeakFieldParams {
                theta: check_positive("theta", pf.theta.unwrap_or(wd.theta))?,
                kappa: pf.kappa.unwrap_or(wd.kappa),
                s: check_positive("s", pf.s.unwrap_or(wd.s))?,
                delta: pf.delta.unwrap_or(wd.delta),
                e_b: pf.e_b.unwrap_or(wd.e_b),
                sigma_b: check_positive("sigma_b", pf.sigma_b.unwrap_or(wd.sigma_b))?,
            },
            weight_c: check_positive("weight.c", self.weight.c.unwrap_or(c_default))?,
            weight_alpha: self.weight.alpha.unwrap_or(alpha_default),
            n_r: check_size("n_r", d.n_r.unwrap_or(if weak { 8 } else { 96 }))?,
            n_theta: check_size("n_theta", d.n_theta.unwrap_or(if weak { 32 } else { 256 }))?,
            n_x: check_size("n_x", d.n_x.unwrap_or(if weak { 4 } else { 32 }))?,
            n: check_size("n", ov.n.or(d.n).unwrap_or(if weak { 4 } else { 8 }))?,
            n_s: check_size("n_s", d.n_s.unwrap_or(128))?,
            n_orbit: check_size("n_orbit", d.n_orbit.unwrap_or(64))?,
            n_r_equilibrium: check_size("n_r_equilibrium", d.n_r_equilibrium.unwrap_or(24))?,
            n_theta_equilibrium: check_size("n_theta_equilibrium", d.n_theta_equilibrium.unwrap_or(64))?,
            tol_tail: check_tol("tol_tail", t.tol_tail.unwrap_or(1e-12))?,
            tol_cons: check_tol("tol_cons", t.tol_cons.unwrap_or(1e-9))?,
            tol_eig: check_tol("tol_eig", t.tol_eig.unwrap_or(1e-8))?,
            tol_kernel: check_tol("tol_kernel", t.tol_kernel.unwrap_or(1e-10))?,
            tol_residual: check_tol("tol_residual", t.tol_residual.unwrap_or(1e-4))?,
            tol_equil: check_tol("tol_equil", t.tol_equil.unwrap_or(1e-6))?,
            lambda_min: ov.lambda_min.or(self.lambda.min),
            lambda_max: ov.lambda_max.or(self.lambda.max),
            lambda_points: check_size("lambda.points", self.lambda.points.unwrap_or(48))?,
            out_dir: ov
                .out
                .clone()
                .or_else(|| self.output.dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("vmspec-out")),
            canonical: ov.canonical || self.output.canonical.unwrap_or(false),
        };
        if r.weight_alpha <= 2.0 {
            return Err(format!("weight.alpha = {} must exceed 2", r.weight_alpha));
        }
        if r.n_theta % 2 != 0 || r.n_theta_equilibrium % 2 != 0 {
            return Err("n_theta must be even".into());
        }
        if r.n_orbit % 2 != 0 || r.n_orbit < 4 {
            return Err("n_orbit must be even and at least 4".into());
        }
        if r.n > r.n_x {
            return Err(format!("n = {} exceeds the {} mean-zero modes of n_x", r.n, r.n_x));
        }
        if let Some(v) = r.lambda_min {
            check_positive("lambda.min", v)?;
        }
        if let Some(v) = r.lambda_max {
            check_positive("lambda.max", v)?;
        }
        if let (Some(a), Some(b)) = (r.lambda_min, r.lambda_max) {
            if a >= b {
                return Err(format!("lambda.min = {a} must be below lambda.max = {b}"));
            }
        }
        if r.lambda_points < 2 {
            return Err("lambda.points must be at least 2".into());
        }
        Ok(r)
    }
}

impl Resolved {
    pub fn profile(&self) -> Result<EquilibriumProfile, String> {
        let base = match self.profile {
            ProfileKind::PaperHomogeneous => EquilibriumProfile::paper_homogeneous(),
            ProfileKind::Anisotropic => EquilibriumProfile::anisotropic(self.kappa),
            ProfileKind::Zero => EquilibriumProfile::zero(),
            ProfileKind::WeakfieldFamily => {
                let w = self.weakfield;
                EquilibriumProfile::weakfield(WeakFieldFamily {
                    theta: w.theta,
                    kappa: w.kappa,
                    s: w.s,
                    delta: w.delta,
                    e_b: w.e_b,
                    sigma_b: w.sigma_b,
                })
            }
        };
        let weight = WeightSpec::new(self.weight_c, self.weight_alpha).map_err(|e| e.to_string())?;
        Ok(base.with_weight(weight))
    }

    /// `λ` bounds for a given period: `[10⁻², 10²]·(2π/P)` unless configured.
    pub fn lambda_bounds(&self, period: f64) -> (f64, f64) {
        let k = 2.0 * PI / period;
        (self.lambda_min.unwrap_or(1e-2 * k), self.lambda_max.unwrap_or(1e2 * k))
    }

    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("resolved config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
