//! `vmspec`: spectral instability analysis from the command line.
//!
//! Exit codes: 0 success, 2 configuration or I/O error, 3 numerical failure,
//! 4 golden mismatch in `example`. `mode` without a crossing counts as a
//! numerical failure.

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use config::Overrides;
use output::Sink;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Io(String),
    Numerical(vmspec_core::Error),
    Golden(Vec<String>),
    NoMode(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) | Failure::Io(_) => 2,
            Failure::Numerical(_) | Failure::NoMode(_) => 3,
            Failure::Golden(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config",
            Failure::Io(_) => "io",
            Failure::Numerical(_) => "numerical",
            Failure::Golden(_) => "golden_mismatch",
            Failure::NoMode(_) => "no_crossing",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(m) | Failure::Io(m) | Failure::NoMode(m) => m.clone(),
            Failure::Numerical(e) => e.to_string(),
            Failure::Golden(rows) => rows.join("; "),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "vmspec", version, about = "Spectral instability analysis for magnetic Vlasov–Maxwell equilibria")]
struct Cli {
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Profile name: paper_homogeneous, weakfield_family, anisotropic, zero
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Weak-field amplitude
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Galerkin truncation level
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    lambda_min: Option<f64>,
    #[arg(long, global = true)]
    lambda_max: Option<f64>,
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (VMSPEC_OUT takes precedence)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Drop timings so outputs are byte-reproducible
    #[arg(long, global = true)]
    canonical: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Example {
    Homogeneous,
    Weakfield,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the profile for positivity, decay and parity
    Validate,
    /// Build the equilibrium potential and its diagnostics
    Equilibrium,
    /// Assemble the operator blocks at one λ
    Assemble {
        #[arg(long)]
        lambda: f64,
    },
    /// Count negative eigenvalues of M_n across the λ grid
    Sweep,
    /// Verdict, sweep and optionally the growing mode
    Analyze {
        #[arg(long)]
        find_mode: bool,
    },
    /// Locate the kernel crossing and write the mode fields
    Mode,
    /// Run a bundled example and compare against its golden table
    Example {
        #[arg(value_enum)]
        which: Example,
        #[arg(long)]
        emit_spectra: bool,
    },
}

fn execute(cli: &Cli) -> Result<String, Failure> {
    let overrides = Overrides {
        profile: cli.profile.clone(),
        epsilon: cli.epsilon,
        n: cli.n,
        lambda_min: cli.lambda_min,
        lambda_max: cli.lambda_max,
        out: std::env::var_os("VMSPEC_OUT").filter(|v| !v.is_empty()).map(PathBuf::from).or_else(|| cli.out.clone()),
        canonical: cli.canonical,
    };
    let mut overrides = overrides;
    if let Command::Example { which, .. } = &cli.command {
        if overrides.profile.is_none() {
            overrides.profile = Some(
                match which {
                    Example::Homogeneous => "paper_homogeneous",
                    Example::Weakfield => "weakfield_family",
                }
                .into(),
            );
        }
    }
    let cfg = config::load(cli.config.as_deref())
        .and_then(|c| c.resolve(&overrides))
        .map_err(Failure::Config)?;
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Failure::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().map_err(|e| Failure::Config(e.to_string()))?;
    }
    let sink = Sink::new(&cfg.out_dir, cfg.hash())?;
    match &cli.command {
        Command::Validate => run::cmd_validate(&cfg, &sink),
        Command::Equilibrium => run::cmd_equilibrium(&cfg, &sink),
        Command::Assemble { lambda } => run::cmd_assemble(&cfg, *lambda, &sink),
        Command::Sweep => run::cmd_sweep(&cfg, &sink),
        Command::Analyze { find_mode } => run::cmd_analyze(&cfg, *find_mode, &sink),
        Command::Mode => run::cmd_mode(&cfg, &sink),
        Command::Example { which, emit_spectra } => {
            let name = match which {
                Example::Homogeneous => "homogeneous",
                Example::Weakfield => "weakfield",
            };
            run::cmd_example(&cfg, name, *emit_spectra, &sink)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            let body = json!({
                "error": { "kind": f.kind(), "message": f.message() },
                "exit_code": f.code(),
            });
            eprintln!("{}", serde_json::to_string_pretty(&body).unwrap());
            ExitCode::from(f.code())
        }
    }
}
