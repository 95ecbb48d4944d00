// SPDX-License-Identifier: Apache-2.0

mod commands;
mod observable;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::CliError;

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("{x} is not a positive number")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Parser, Debug)]
#[command(name = "anosov", version, about = "Numerical lab for Anosov diffeomorphisms of the two-torus")]
pub struct Cli {
    /// Seed for sampled points; recorded in every summary.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Skip the cone check normally run on the spec before any analysis.
    #[arg(long, global = true)]
    pub skip_verify: bool,
    /// Also write the JSON summary to this file.
    #[arg(long, global = true, value_name = "PATH")]
    pub summary: Option<PathBuf>,
    /// Directory for cached orbit databases built from `--spec`.
    #[arg(long, global = true, env = "ANOSOV_CACHE_DIR", value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Check cone invariance and report the hyperbolicity constants.
    Verify(VerifyArgs),
    #[command(subcommand)]
    Orbits(OrbitsCmd),
    #[command(subcommand)]
    Bundles(BundlesCmd),
    #[command(subcommand)]
    Spectral(SpectralCmd),
    #[command(subcommand)]
    Horocycle(HorocycleCmd),
    #[command(subcommand)]
    Mme(MmeCmd),
    /// Plug-in bounds for the correlation rate and the smoothness threshold.
    Diagnose(DiagnoseArgs),
}

/// A spec file path, or `builtin:NAME` for a corpus entry.
#[derive(Args, Debug, Clone)]
pub struct SpecArg {
    #[arg(long, value_name = "SPEC")]
    pub spec: String,
}

/// Periodic data from a saved database or built on demand from a spec.
#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = true)]
pub struct Source {
    #[arg(long, value_name = "PATH")]
    pub db: Option<PathBuf>,
    #[arg(long, value_name = "SPEC")]
    pub spec: Option<String>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub spec: SpecArg,
    #[arg(long, default_value_t = 0.3, value_parser = positive)]
    pub halfwidth: f64,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
}

#[derive(Subcommand, Debug)]
pub enum OrbitsCmd {
    /// Enumerate Fix F^n for n = 1..=N and save the database.
    Enumerate {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long)]
        n: u32,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Re-check counts, residuals and separations of a saved database.
    Validate {
        #[arg(long, value_name = "PATH")]
        db: PathBuf,
        #[arg(long, value_name = "SPEC")]
        spec: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
pub enum BundlesCmd {
    /// Stable and unstable directions and stretch factors at random points.
    Sample {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 1e-11, value_parser = positive)]
        tol: f64,
        /// Override the depth derived from the cone constants.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentityKind {
    Base,
    Extended,
}

#[derive(Subcommand, Debug)]
pub enum SpectralCmd {
    /// Coefficients of a weighted dynamical determinant.
    Determinant {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "g-tilde")]
        weight: String,
        /// Use the extended-map denominators.
        #[arg(long)]
        extended: bool,
        /// Move the sign of the unstable multiplier into a twist.
        #[arg(long)]
        twisted: bool,
        #[arg(long = "N", default_value_t = 10)]
        order: usize,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Zeros of the extended determinant and the resonance verdict.
    Resonances {
        #[command(flatten)]
        source: Source,
        #[arg(long = "N", default_value_t = 10)]
        order: usize,
        #[arg(long, default_value_t = 1.0, value_parser = positive)]
        radius: f64,
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Factorization of the zeta function into determinants.
    CheckIdentity {
        #[arg(value_enum)]
        kind: IdentityKind,
        #[command(flatten)]
        source: Source,
        #[arg(long = "N", default_value_t = 8)]
        order: usize,
        #[arg(long)]
        twisted: bool,
        /// Residual tolerance; defaults to 1e-10 for linear maps and 1e-6 otherwise.
        #[arg(long, value_parser = positive)]
        tol: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
pub enum HorocycleCmd {
    /// Flow a point for time T and optionally integrate an observable.
    Integrate {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 0.0)]
        x1: f64,
        #[arg(long, default_value_t = 0.0)]
        x2: f64,
        #[arg(long = "T", value_parser = positive)]
        t: f64,
        #[arg(long)]
        f: Option<String>,
        #[arg(long, default_value_t = 1e-9, value_parser = positive)]
        tol: f64,
    },
    /// Growth exponent of sup_x |H_{x,T}(f) - T mu(f)| over a T grid.
    Deviation {
        #[command(flatten)]
        spec: SpecArg,
        /// Observable; repeat for several. Defaults to a three-observable suite.
        #[arg(long)]
        f: Vec<String>,
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 16)]
        mean_samples: usize,
        #[arg(long, default_value_t = 10.0, value_parser = positive)]
        t_min: f64,
        #[arg(long, default_value_t = 1e4, value_parser = positive)]
        t_max: f64,
        #[arg(long, default_value_t = 4)]
        per_decade: usize,
        /// Length of the trajectories used for the mean.
        #[arg(long, default_value_t = 1e4, value_parser = positive)]
        t_long: f64,
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Boundedness of ergodic integrals of a mean-zero observable.
    Coboundary {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long)]
        f: String,
        #[arg(long, default_value_t = 1e3, value_parser = positive)]
        t_max: f64,
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 16)]
        mean_samples: usize,
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Rotation number of the return map to a vertical circle.
    Rotation {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 0.5)]
        transversal: f64,
        #[arg(long, default_value_t = 10_000)]
        iterates: usize,
        /// Residual tolerance; defaults to 1e-6 for linear maps and 1e-4 otherwise.
        #[arg(long, value_parser = positive)]
        tol: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
pub enum MmeCmd {
    /// Correlations under the periodic-point approximation of the entropy measure.
    Correlations {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 10)]
        n: u32,
        /// Defaults to the resolution limit for the period and observables.
        #[arg(long)]
        kmax: Option<usize>,
        #[arg(long)]
        f1: String,
        /// Defaults to `--f1`.
        #[arg(long)]
        f2: Option<String>,
        /// Closed-form Lebesgue correlations; linear maps only.
        #[arg(long)]
        exact: bool,
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub spec: SpecArg,
    #[arg(long, default_value_t = 5.0, value_parser = positive)]
    pub r: f64,
    #[arg(long, default_value_t = 0.3, value_parser = positive)]
    pub halfwidth: f64,
    #[arg(long, default_value_t = 32)]
    pub grid: usize,
}

fn main() {
    let cli = Cli::parse();
    let code = match commands::run(&cli) {
        Ok(report) => {
            let text = report.to_json(cli.seed);
            print!("{text}");
            let mut code = 0;
            if let Some(p) = &cli.summary {
                if let Err(e) = std::fs::write(p, &text) {
                    eprintln!("{}", CliError::config(format!("cannot write {}: {e}", p.display())));
                    code = 2;
                }
            }
            let failing = report.failing();
            if code == 0 && !failing.is_empty() {
                eprintln!("verdict failure: {}", failing.join(", "));
                code = 1;
            }
            code
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
