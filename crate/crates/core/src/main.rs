// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rankwedge::error::{Error, Result};
use rankwedge::export;
use rankwedge::localtime::identity_suite;
use rankwedge::mc::mc_corner_hit;
use rankwedge::model::{ModelParams, ParamsRecord};
use rankwedge::pathgen::simulate_path;
use rankwedge::rng::SeedRecord;
use rankwedge::run::{run_scenario, MANIFEST_NAME};
use rankwedge::scenario::{Output, Scenario};
use rankwedge::stationary::{self, build_sum_exp_density, ks_distance, InvariantOptions};

#[derive(Parser)]
#[command(
    name = "rankwedge",
    version,
    about = "Rank-based reflected diffusion in the quadrant"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate path bundles and write them as CSV.
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        paths: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the wedge geometry and the classification.
    Classify {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Evaluate the closed-form invariant density on a grid.
    Density {
        #[command(flatten)]
        params: ParamArgs,
        /// Upper end of both grid axes; defaults to 8 times the mean of R1.
        #[arg(long)]
        xi_max: Option<f64>,
        #[arg(long, default_value_t = 100)]
        points: usize,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Long-run empirical law of (gap, laggard), compared with the closed
    /// form when one exists.
    Invariant {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        burn_in: f64,
        #[arg(long)]
        paths: u64,
        /// Grid points between samples; one time unit when omitted.
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo frequency of coming within `eps` of the corner.
    McCorner {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        paths: u64,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
    },
    /// Local-time identity report for one simulated path.
    IdentityCheck {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
    },
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long)]
    g: f64,
    #[arg(long)]
    h: f64,
    #[arg(long, conflicts_with_all = ["sigma_sq", "rho"])]
    sigma: Option<f64>,
    #[arg(long, conflicts_with = "rho")]
    sigma_sq: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    x1: f64,
    #[arg(long, default_value_t = 0.5)]
    x2: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<ModelParams> {
        let sigma = match self.sigma_sq {
            Some(s2) if s2 >= 0.0 => Some(s2.sqrt()),
            Some(s2) => return Err(Error::Config(format!("sigma-sq must be >= 0, got {s2}"))),
            None => self.sigma,
        };
        ModelParams::try_from(ParamsRecord {
            g: self.g,
            h: self.h,
            rho: self.rho,
            sigma,
            x1: self.x1,
            x2: self.x2,
        })
    }
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    horizon: f64,
    #[arg(long)]
    dt: f64,
    #[arg(long)]
    seed: u64,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: ErrorFields<'a>,
}

#[derive(Serialize)]
struct ErrorFields<'a> {
    code: &'a str,
    module: &'a str,
    message: String,
}

fn report_error(code: &str, module: &str, message: String) {
    let rec = ErrorRecord {
        error: ErrorFields { code, module, message },
    };
    let text = toml::to_string(&rec).unwrap_or_else(|_| format!("[error]\ncode = \"{code}\"\n"));
    let _ = io::stderr().write_all(text.as_bytes());
}

fn print_toml(value: &impl Serialize) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Config(e.to_string()))?;
    io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct InvariantReport {
    samples: usize,
    empirical: stationary::Moments,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form: Option<stationary::Moments>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ks_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ks_laggard: Option<f64>,
}

#[derive(Serialize)]
struct IdentityOutput {
    report: rankwedge::localtime::IdentityReport,
    all_pass: bool,
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, out } => {
            let s = Scenario::from_path(&config)?;
            run_scenario(&s, &out)?;
            println!("{}", out.join(MANIFEST_NAME).display());
        }
        Command::Simulate {
            params,
            grid,
            paths,
            out,
        } => {
            let mut s = Scenario::new(params.params()?, grid.horizon, grid.dt, paths, grid.seed)?;
            s.outputs = vec![Output::PathBundle];
            run_scenario(&s, &out)?;
            println!("{}", out.join(MANIFEST_NAME).display());
        }
        Command::Classify { params } => {
            let mut out = io::stdout().lock();
            export::write_classification(&mut out, &params.params()?)?;
        }
        Command::Density {
            params,
            xi_max,
            points,
            out,
        } => {
            let d = build_sum_exp_density(&params.params()?)?;
            let m = d.moments();
            let xi_max = xi_max.unwrap_or(8.0 * (m.mean_gap + m.mean_laggard));
            if !(xi_max > 0.0) || points == 0 {
                return Err(Error::Config("xi-max must be positive and points at least 1".into()));
            }
            match out {
                Some(path) => {
                    let mut w = io::BufWriter::new(std::fs::File::create(path)?);
                    export::write_density_grid(&mut w, &d, xi_max, points)?;
                    w.flush()?;
                }
                None => export::write_density_grid(&mut io::stdout().lock(), &d, xi_max, points)?,
            }
        }
        Command::Invariant {
            params,
            grid,
            burn_in,
            paths,
            stride,
            out,
        } => {
            let p = params.params()?;
            let mut s = Scenario::new(p, grid.horizon, grid.dt, paths, grid.seed)?;
            s.burn_in = burn_in;
            if let Some(st) = stride {
                s.stride = st;
            }
            s.outputs = vec![Output::Histogram];
            run_scenario(&s, &out)?;
            let o = InvariantOptions {
                horizon: s.horizon,
                burn_in,
                dt: s.dt,
                stride: s.stride,
                bins: s.bins,
            };
            let inv = stationary::empirical_invariant_replicates(&p, &o, s.base_seed, s.n_paths)?;
            let closed = build_sum_exp_density(&p).ok();
            let report = InvariantReport {
                samples: inv.len(),
                empirical: inv.moments,
                closed_form: closed.as_ref().map(|d| d.moments()),
                ks_gap: closed.as_ref().map(|d| ks_distance(&inv.gap, |u| d.gap_cdf(u))),
                ks_laggard: closed.as_ref().map(|d| ks_distance(&inv.laggard, |v| d.laggard_cdf(v))),
            };
            print_toml(&report)?;
        }
        Command::McCorner {
            params,
            grid,
            paths,
            eps,
        } => {
            let mut s = Scenario::new(params.params()?, grid.horizon, grid.dt, paths, grid.seed)?;
            s.thresholds.eps_corner = eps;
            s.validate()?;
            print_toml(&mc_corner_hit(&s)?)?;
        }
        Command::IdentityCheck { params, grid, eps } => {
            let b = simulate_path(&params.params()?, grid.horizon, grid.dt, &SeedRecord::new(grid.seed, 0))?;
            let report = identity_suite(&b, eps)?;
            let all_pass = report.all_pass();
            print_toml(&IdentityOutput { report, all_pass })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            report_error("usage", "cli", msg.lines().next().unwrap_or("").to_string());
            let _ = writeln!(io::stderr());
            let _ = io::stderr().write_all(msg.as_bytes());
            return ExitCode::from(1);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(e.code(), e.module(), e.to_string());
            ExitCode::from(if e.is_domain_error() { 1 } else { 2 })
        }
    }
}
