//! `nctoep`: build truncated models, run the verification suites and emit
//! JSON reports.
//!
//! Exit codes: 0 every check passed, 1 a check failed, 2 usage or input
//! error, 3 precondition violated (e.g. the point is not in the ball).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nc_toeplitz::io::{point_from_json, read_operator, write_coo, write_dense};
use nc_toeplitz::suite::{self, OperatorSource, PointSource, Report, RunConfig};
use nc_toeplitz::{Error, TruncationSpec};

#[derive(Parser, Debug)]
#[command(name = "nctoep", version, about = "Weighted multi-Toeplitz verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Model-operator identities.
    Verify(Common),
    /// Toeplitz detection versus the Brown-Halmos equations.
    Toeplitz(ToeplitzArgs),
    /// Berezin kernel and transform checks at a point.
    Berezin(BerezinArgs),
    /// Multi-homogeneous decomposition and Fejér sums.
    Fourier(Common),
    /// All suites in one report.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Number of factors; inferred from --n when omitted.
    #[arg(long)]
    k: Option<usize>,
    /// Alphabet sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Hyperball orders, comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    /// Truncation lengths, comma separated.
    #[arg(long = "L", value_delimiter = ',')]
    l: Vec<usize>,
    /// Coefficient dimension.
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Override the suite's default tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record per-check wall time (reports are then not reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OpSource {
    RandomSymbol,
    RandomDense,
    Identity,
    File,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OpFormat {
    Coo,
    Dense,
}

#[derive(Args, Debug)]
struct ToeplitzArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = OpSource::RandomSymbol)]
    source: OpSource,
    /// Operator file (coordinate list or dense binary); its header fixes the spec.
    #[arg(long, required_if_eq("source", "file"))]
    file: Option<PathBuf>,
    /// Export the operator under test.
    #[arg(long)]
    export: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OpFormat::Coo)]
    format: OpFormat,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PtSource {
    Zero,
    Radial,
    Random,
    File,
}

#[derive(Args, Debug)]
struct BerezinArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = PtSource::Random)]
    point: PtSource,
    /// Radius for --point radial.
    #[arg(long, default_value_t = 0.5)]
    r: f64,
    /// Dimension of the point's Hilbert space (zero and random points).
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Rescale a random point so every factor map has this spectral radius.
    #[arg(long)]
    rho: Option<f64>,
    /// Point JSON for --point file.
    #[arg(long, required_if_eq("point", "file"))]
    file: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// Dimension of the random Berezin point.
    #[arg(long, default_value_t = 2)]
    dim: usize,
}

impl Common {
    fn spec(&self) -> Result<TruncationSpec> {
        if self.n.is_empty() || self.m.is_empty() || self.l.is_empty() {
            bail!(Error::InvalidSpec("--n, --m and --L are required".into()));
        }
        if let Some(k) = self.k {
            if [self.n.len(), self.m.len(), self.l.len()].iter().any(|&len| len != k) {
                bail!(Error::InvalidSpec(format!("--n, --m and --L must each have k = {k} entries")));
            }
        }
        Ok(TruncationSpec::new(self.n.clone(), self.m.clone(), self.l.clone(), self.d)?)
    }

    fn config(&self, spec: TruncationSpec) -> RunConfig {
        RunConfig { spec, seed: self.seed, tol: self.tol, timings: self.timings }
    }
}

fn run(cli: Cli) -> Result<(Report, Option<PathBuf>)> {
    let (report, out) = match cli.command {
        Command::Verify(c) => (suite::verify(&c.config(c.spec()?))?, c.out),
        Command::Fourier(c) => (suite::fourier(&c.config(c.spec()?))?, c.out),
        Command::Report(a) => (suite::full_report(&a.common.config(a.common.spec()?), a.dim)?, a.common.out),
        Command::Toeplitz(a) => {
            let (spec, source) = match a.source {
                OpSource::File => {
                    let path = a.file.as_ref().expect("required by clap");
                    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                    let (header, matrix) = read_operator::<f64, _>(file)?;
                    (header.spec, OperatorSource::Matrix(matrix))
                }
                OpSource::RandomSymbol => (a.common.spec()?, OperatorSource::RandomSymbol),
                OpSource::RandomDense => (a.common.spec()?, OperatorSource::RandomDense),
                OpSource::Identity => (a.common.spec()?, OperatorSource::Identity),
            };
            let config = a.common.config(spec);
            if let Some(path) = &a.export {
                let matrix = suite::operator_for(&config, &source)?;
                let mut w = BufWriter::new(File::create(path)?);
                match a.format {
                    OpFormat::Coo => write_coo(&mut w, &config.spec, &matrix)?,
                    OpFormat::Dense => write_dense(&mut w, &config.spec, &matrix)?,
                }
                w.flush()?;
            }
            (suite::toeplitz(&config, &source)?, a.common.out)
        }
        Command::Berezin(a) => {
            let config = a.common.config(a.common.spec()?);
            let source = match a.point {
                PtSource::Zero => PointSource::Zero { dim: a.dim },
                PtSource::Radial => PointSource::Radial(a.r),
                PtSource::Random => PointSource::Random { dim: a.dim, rho: a.rho },
                PtSource::File => {
                    let path = a.file.as_ref().expect("required by clap");
                    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    PointSource::Given(point_from_json(&text)?)
                }
            };
            (suite::berezin(&config, &source)?, a.common.out)
        }
    };
    Ok((report, out))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NotMember(_) | Error::NegativeDefect(_) | Error::Commutation(_) | Error::RadiusOutOfRange(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((report, out)) => {
            let json = report.to_json();
            let written = match &out {
                Some(path) => fs::write(path, format!("{json}\n")).with_context(|| format!("writing {}", path.display())),
                None => {
                    println!("{json}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
            for c in report.failures() {
                eprintln!("FAIL {} residual {:.3e} (tol {:.1e})", c.name, c.residual, c.tol);
            }
            eprintln!(
                "{}: {} ({} checks)",
                report.suite,
                if report.pass { "pass" } else { "fail" },
                report.checks.len()
            );
            ExitCode::from(if report.pass { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
