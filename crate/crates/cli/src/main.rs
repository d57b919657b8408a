//! Command-line front end: body ingestion, subcommand dispatch and
//! structured output.
//!
//! Exit codes: 0 success, 1 usage or parse failure, 2 body unsupported by
//! the subcommand, 3 numerical non-convergence.

mod report;

use clap::{Args, Parser, Subcommand, ValueEnum};
use reeb_core::besse_spectra::{self, parse_rational, RationalEllipsoid};
use reeb_core::clarke::{self, OrbitRecord, SystoleOptions};
use reeb_core::convex_body::BodySpec;
use reeb_core::{reeb_flow, ConvexBody, Error};
use report::*;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "reeb",
    about = "Closed Reeb orbits, Morse indices and spectral invariants of convex contact spheres",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Action spectrum of a rational ellipsoid up to a cutoff
    Spectrum(SpectrumArgs),
    /// Spectral-invariant sequence c_0 <= c_1 <= ...
    Invariants(InvariantsArgs),
    /// Fixed-point strata of the common-period Reeb circle action
    Strata(CommonArgs),
    /// Smallest i with c_i = c_{i+n-1} (detects the Besse property)
    Besse(BesseArgs),
    /// Systole and minimizing closed orbit via dual-action minimization
    Systole(SystoleArgs),
    /// Morse index and nullity of a closed orbit
    OrbitIndex(OrbitIndexArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct CommonArgs {
    /// Body specification file (JSON)
    #[arg(long)]
    body: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the report here instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
    /// Random seed, recorded in every report
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Largest action value to enumerate (rational, e.g. "4" or "7/2")
    #[arg(long)]
    cutoff: String,
}

#[derive(Args)]
struct InvariantsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// How many invariants to list
    #[arg(short = 'm', long, default_value_t = 10)]
    count: usize,
}

#[derive(Args)]
struct BesseArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Half-dimension n used in the coincidence test c_i = c_{i+n-1};
    /// defaults to the body's own dimension
    #[arg(short = 'n', long)]
    dim: Option<usize>,
    /// Horizon: how many invariants to inspect
    #[arg(short = 'm', long, default_value_t = 100)]
    count: usize,
}

#[derive(Args)]
struct SystoleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Fourier mode cutoff
    #[arg(short = 'N', long, default_value_t = 64)]
    modes: usize,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    /// Also export the minimizing orbit samples as CSV
    #[arg(long)]
    trajectory_csv: Option<PathBuf>,
    /// Store the full orbit record (JSON) for later orbit-index runs
    #[arg(long)]
    orbit_out: Option<PathBuf>,
}

#[derive(Args)]
struct OrbitIndexArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Coordinate plane of a planar ellipsoid orbit (1-based)
    #[arg(long)]
    coord: Option<usize>,
    /// Iterate count of the planar orbit
    #[arg(long, default_value_t = 1)]
    iterate: u64,
    /// Stored orbit record (JSON) to analyze instead
    #[arg(long)]
    orbit: Option<PathBuf>,
    /// Also export the orbit trajectory as CSV
    #[arg(long)]
    trajectory_csv: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version leave through the error path with status 0
            if e.use_stderr() {
                eprint!("{e}");
                std::process::exit(1);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };
    let code = match run(cli) {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    };
    std::process::exit(code);
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NonConvergence { .. }
            | Error::ShootingDivergence { .. }
            | Error::NewtonDivergence { .. }
            | Error::NoPositiveActionStart
            | Error::ResidualTooLarge { .. }
            | Error::IntegrationFailure { .. } => 3,
            Error::NotRational(_) | Error::Unsupported(_) => 2,
            _ => 1,
        };
        Failure::new(code, e.to_string())
    }
}

fn load_body(path: &Path) -> Result<(ConvexBody, BodySpec), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(1, format!("cannot read {}: {e}", path.display())))?;
    let spec = BodySpec::from_json(&text).map_err(|e| Failure::new(1, e.to_string()))?;
    let body = spec.build().map_err(|e| Failure::new(1, e.to_string()))?;
    let canonical = BodySpec::describe(&body);
    Ok((body, canonical))
}

fn rational_ellipsoid(body: &ConvexBody) -> Result<RationalEllipsoid, Failure> {
    RationalEllipsoid::from_body(body)
        .map_err(|_| Failure::new(2, "subcommand needs an exact rational ellipsoid body"))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Invariants(args) => cmd_invariants(args),
        Command::Strata(args) => cmd_strata(args),
        Command::Besse(args) => cmd_besse(args),
        Command::Systole(args) => cmd_systole(args),
        Command::OrbitIndex(args) => cmd_orbit_index(args),
    }
}

fn emit(common: &CommonArgs, report: &impl Report) -> Result<(), Failure> {
    let rendered = match common.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report.json())
                .map_err(|e| Failure::new(1, e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Text => report.text(),
        Format::Csv => report.csv(),
    };
    match &common.output {
        Some(path) => std::fs::write(path, rendered)
            .map_err(|e| Failure::new(1, format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<(), Failure> {
    let (body, spec) = load_body(&args.common.body)?;
    let ell = rational_ellipsoid(&body)?;
    let cutoff = parse_rational(&args.cutoff).map_err(|e| Failure::new(1, e.to_string()))?;
    let entries = besse_spectra::action_spectrum(&ell, &cutoff);
    let report = SpectrumReport::new(spec, args.common.seed, &args.cutoff, &entries);
    emit(&args.common, &report)
}

fn cmd_invariants(args: InvariantsArgs) -> Result<(), Failure> {
    let (body, spec) = load_body(&args.common.body)?;
    let report = match RationalEllipsoid::from_body(&body) {
        Ok(ell) => {
            let seq = besse_spectra::spectral_invariants(&ell, args.count);
            InvariantsReport::exact(spec, args.common.seed, &seq)
        }
        Err(_) if body.is_ellipsoid() => {
            let values = besse_spectra::float_spectral_invariants(
                body.axes(),
                args.count,
                besse_spectra::FLOAT_COLLISION_TOL,
            );
            InvariantsReport::approximate(spec, args.common.seed, &values)
        }
        Err(_) => return Err(Failure::new(2, "invariants need an ellipsoid body")),
    };
    emit(&args.common, &report)
}

fn cmd_strata(args: CommonArgs) -> Result<(), Failure> {
    let (body, spec) = load_body(&args.body)?;
    let ell = rational_ellipsoid(&body)?;
    let strata = besse_spectra::strata(&ell).map_err(Failure::from)?;
    let report = StrataReport::new(spec, args.seed, ell.tau(), &strata);
    emit(&args, &report)
}

fn cmd_besse(args: BesseArgs) -> Result<(), Failure> {
    let (body, spec) = load_body(&args.common.body)?;
    let n = match args.dim {
        Some(n) if n == body.dim_n() => n,
        Some(n) => {
            return Err(Failure::new(
                1,
                format!("-n {n} does not match the body dimension {}", body.dim_n()),
            ))
        }
        None => body.dim_n(),
    };
    let report = match RationalEllipsoid::from_body(&body) {
        Ok(ell) => {
            let found = besse_spectra::besse_criterion(&ell, n, args.count);
            let value = found
                .map(|i| besse_spectra::spectral_invariants(&ell, i + 1).values[i].to_string());
            BesseReport::new(spec, args.common.seed, n, args.count, true, found, value)
        }
        Err(_) if body.is_ellipsoid() => {
            let found = besse_spectra::float_besse_criterion(
                body.axes(),
                n,
                args.count,
                besse_spectra::FLOAT_COLLISION_TOL,
            );
            let value = found.map(|i| {
                let seq = besse_spectra::float_spectral_invariants(
                    body.axes(),
                    i + 1,
                    besse_spectra::FLOAT_COLLISION_TOL,
                );
                format!("{}", seq[i].0)
            });
            BesseReport::new(spec, args.common.seed, n, args.count, false, found, value)
        }
        Err(_) => return Err(Failure::new(2, "the Besse test needs an ellipsoid body")),
    };
    emit(&args.common, &report)
}

fn cmd_systole(args: SystoleArgs) -> Result<(), Failure> {
    let (body, spec) = load_body(&args.common.body)?;
    let opts = SystoleOptions {
        n_modes: args.modes,
        restarts: args.restarts,
        seed: args.common.seed,
        ..Default::default()
    };
    let result = clarke::minimize_systole(&body, &opts).map_err(Failure::from)?;
    if let Some(path) = &args.trajectory_csv {
        write_trajectory_csv(path, body.dim_n(), &result.orbit.samples)?;
    }
    if let Some(path) = &args.orbit_out {
        let text = serde_json::to_string(&result.orbit).map_err(|e| Failure::new(1, e.to_string()))?;
        std::fs::write(path, text)
            .map_err(|e| Failure::new(1, format!("cannot write {}: {e}", path.display())))?;
    }
    let report = SystoleReport::new(spec, args.modes, &result);
    emit(&args.common, &report)
}

fn cmd_orbit_index(args: OrbitIndexArgs) -> Result<(), Failure> {
    let (body, spec) = load_body(&args.common.body)?;
    let report = match (&args.orbit, args.coord) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::new(1, format!("cannot read {}: {e}", path.display())))?;
            let orbit: OrbitRecord =
                serde_json::from_str(&text).map_err(|e| Failure::new(1, e.to_string()))?;
            if let Some(csv) = &args.trajectory_csv {
                write_trajectory_csv(csv, body.dim_n(), &orbit.samples)?;
            }
            let index = clarke::orbit_index(&body, &orbit).map_err(Failure::from)?;
            OrbitIndexReport::numeric(spec, args.common.seed, orbit.period, &index)
        }
        (None, Some(coord)) => {
            if coord == 0 || coord > body.dim_n() {
                return Err(Failure::new(
                    1,
                    format!("--coord must lie in 1..={}", body.dim_n()),
                ));
            }
            let ell = rational_ellipsoid(&body)?;
            let (ind, nul) = besse_spectra::ellipsoid_orbit_index(&ell, coord - 1, args.iterate);
            let period = (ell.axes()[coord - 1].clone()
                * num_rational::BigRational::from_integer(args.iterate.into()))
            .to_string();
            if let Some(csv) = &args.trajectory_csv {
                let period_f = body.axes()[coord - 1] * args.iterate as f64;
                let traj =
                    reeb_flow::reeb_flow(&body, &body.planar_point(coord - 1), period_f, 256)
                        .map_err(Failure::from)?;
                write_trajectory_csv(csv, body.dim_n(), &traj.samples)?;
            }
            OrbitIndexReport::exact(spec, args.common.seed, coord, args.iterate, period, ind, nul)
        }
        (None, None) => {
            return Err(Failure::new(
                1,
                "orbit-index needs either --coord <i> or --orbit <file>",
            ))
        }
    };
    emit(&args.common, &report)
}

fn write_trajectory_csv(
    path: &Path,
    n: usize,
    samples: &[(f64, nalgebra::DVector<f64>)],
) -> Result<(), Failure> {
    let mut out = String::from("t");
    for i in 1..=n {
        out.push_str(&format!(",x{i},y{i}"));
    }
    out.push('\n');
    for (t, z) in samples {
        out.push_str(&format!("{t}"));
        for v in z.iter() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| Failure::new(1, format!("cannot write {}: {e}", path.display())))
}
