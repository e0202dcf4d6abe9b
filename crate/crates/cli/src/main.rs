//! `paraxial-tomo`: phantoms, forward projection, reconstruction and the
//! numerical certification checks from the command line.
//!
//! Exit status: 0 on success, 2 on invalid input, 1 on internal error or a
//! failed check.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use paraxial_tomo::io::{read_config, ToolConfig};
use paraxial_tomo::Error;

/// Environment variable that overrides `--threads`.
const THREADS_ENV: &str = "PARAXIAL_TOMO_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "paraxial-tomo",
    version,
    about = "Paraxial nonlinear-ultrasound tomography"
)]
struct Cli {
    /// `key = value` configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a phantom as RF64 (and optionally PGM).
    Phantom(PhantomArgs),
    /// Synthesize a WVSG sinogram by paraxial marching.
    Forward(ForwardArgs),
    /// Filtered back-projection of a sinogram.
    Reconstruct(ReconstructArgs),
    /// Dot-product test of the forward map against its adjoint.
    AdjointTest(AdjointArgs),
    /// Riccati conservation and symmetry checks.
    RiccatiCheck(RiccatiArgs),
    /// Line integral through a field.
    Xray(XrayArgs),
    /// One-dimensional Westervelt identity and polarization checks.
    WesterveltCheck(WesterveltArgs),
    /// Image metrics of a reconstruction against ground truth.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
struct PhantomSource {
    /// shepp-logan, disk or raster.
    #[arg(long)]
    kind: Option<String>,
    /// Grid nodes per side.
    #[arg(long)]
    n: Option<usize>,
    /// Side length of the square domain.
    #[arg(long)]
    length: Option<f64>,
    /// Disk radius.
    #[arg(long)]
    radius: Option<f64>,
    /// Raster image (PGM or RF64) for `--kind raster`.
    #[arg(long)]
    image: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PhantomArgs {
    #[command(flatten)]
    source: PhantomSource,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a 16-bit PGM rendering.
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WaveArgs {
    /// Domain size in wavelengths.
    #[arg(long = "l-over-lambda")]
    l_over_lambda: Option<f64>,
    /// Number of projection angles.
    #[arg(long)]
    angles: Option<usize>,
    /// Angular step in degrees (default 360 / angles).
    #[arg(long = "angle-step-deg")]
    angle_step_deg: Option<f64>,
}

#[derive(Debug, Args)]
struct ForwardArgs {
    /// RF64 phantom; synthesized from the phantom settings when absent.
    #[arg(long)]
    phantom: Option<PathBuf>,
    #[command(flatten)]
    source: PhantomSource,
    #[command(flatten)]
    wave: WaveArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a PGM of the envelope modulus |v| at angle zero.
    #[arg(long = "envelope-pgm")]
    envelope_pgm: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    /// WVSG sinogram; synthesized from the phantom and wave settings when absent.
    #[arg(long)]
    sino: Option<PathBuf>,
    /// RF64 ground truth for the metrics report.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    source: PhantomSource,
    #[command(flatten)]
    wave: WaveArgs,
    /// ramlak or ramlak_hann.
    #[arg(long)]
    filter: Option<String>,
    /// Cutoff as a fraction of the Nyquist frequency.
    #[arg(long)]
    cutoff: Option<f64>,
    /// real or modulus.
    #[arg(long)]
    part: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AdjointArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    angles: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "l-over-lambda")]
    l_over_lambda: Option<f64>,
}

#[derive(Debug, Args)]
struct RiccatiArgs {
    /// flat, constant:<kappa> or table:<rf64 path>.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long = "tau-end")]
    tau_end: Option<f64>,
}

#[derive(Debug, Args)]
struct XrayArgs {
    /// RF64 field; a unit disk on a fine grid when absent.
    #[arg(long)]
    phantom: Option<PathBuf>,
    /// Grid nodes per side of the default disk field.
    #[arg(long)]
    n: Option<usize>,
    /// Signed distance of the line from the origin.
    #[arg(long, allow_hyphen_values = true)]
    offset: Option<f64>,
    /// Direction angle of the line in degrees.
    #[arg(long = "angle-deg", allow_hyphen_values = true)]
    angle_deg: Option<f64>,
}

#[derive(Debug, Args)]
struct WesterveltArgs {
    /// Finest number of spatial cells.
    #[arg(long = "n-x")]
    n_x: Option<usize>,
    /// Largest polarization amplitude.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    recon: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn set_opt<T: ToString>(cfg: &mut ToolConfig, key: &str, v: &Option<T>) -> Result<(), Error> {
    if let Some(v) = v {
        cfg.set(key, v.to_string())?;
    }
    Ok(())
}

fn set_path(cfg: &mut ToolConfig, key: &str, v: &Option<PathBuf>) -> Result<(), Error> {
    if let Some(p) = v {
        let s = p
            .to_str()
            .ok_or_else(|| Error::InvalidInput(format!("path {} is not UTF-8", p.display())))?;
        cfg.set(key, s)?;
    }
    Ok(())
}

fn merge_source(cfg: &mut ToolConfig, s: &PhantomSource) -> Result<(), Error> {
    set_opt(cfg, "phantom.kind", &s.kind)?;
    set_opt(cfg, "grid.n", &s.n)?;
    set_opt(cfg, "grid.length", &s.length)?;
    set_opt(cfg, "phantom.radius", &s.radius)?;
    set_path(cfg, "phantom.path", &s.image)
}

fn merge_wave(cfg: &mut ToolConfig, w: &WaveArgs) -> Result<(), Error> {
    set_opt(cfg, "wave.l_over_lambda", &w.l_over_lambda)?;
    set_opt(cfg, "angles.count", &w.angles)?;
    set_opt(cfg, "angles.step_deg", &w.angle_step_deg)
}

/// Applies command-line flags on top of the configuration file.
fn merge_flags(cfg: &mut ToolConfig, command: &Command) -> Result<(), Error> {
    match command {
        Command::Phantom(a) => {
            merge_source(cfg, &a.source)?;
            set_path(cfg, "paths.phantom", &a.out)
        }
        Command::Forward(a) => {
            merge_source(cfg, &a.source)?;
            merge_wave(cfg, &a.wave)?;
            set_path(cfg, "paths.sino", &a.out)?;
            set_path(cfg, "paths.envelope", &a.envelope_pgm)
        }
        Command::Reconstruct(a) => {
            merge_source(cfg, &a.source)?;
            merge_wave(cfg, &a.wave)?;
            set_path(cfg, "paths.truth", &a.truth)?;
            set_opt(cfg, "filter.kind", &a.filter)?;
            set_opt(cfg, "filter.cutoff", &a.cutoff)?;
            set_opt(cfg, "recon.part", &a.part)?;
            set_path(cfg, "paths.out", &a.out)?;
            set_path(cfg, "paths.report", &a.report)?;
            set_path(cfg, "paths.pgm", &a.pgm)
        }
        Command::AdjointTest(a) => {
            set_opt(cfg, "adjoint.n", &a.n)?;
            set_opt(cfg, "adjoint.angles", &a.angles)?;
            set_opt(cfg, "seed", &a.seed)?;
            set_opt(cfg, "wave.l_over_lambda", &a.l_over_lambda)
        }
        Command::RiccatiCheck(a) => {
            set_opt(cfg, "riccati.profile", &a.profile)?;
            set_opt(cfg, "riccati.step", &a.step)?;
            set_opt(cfg, "riccati.tau_end", &a.tau_end)
        }
        Command::Xray(a) => {
            set_path(cfg, "paths.phantom", &a.phantom)?;
            set_opt(cfg, "xray.n", &a.n)?;
            set_opt(cfg, "xray.offset", &a.offset)?;
            set_opt(cfg, "xray.angle_deg", &a.angle_deg)
        }
        Command::WesterveltCheck(a) => {
            set_opt(cfg, "westervelt.n_x", &a.n_x)?;
            set_opt(cfg, "westervelt.eps", &a.eps)
        }
        Command::Metrics(a) => {
            set_path(cfg, "paths.out", &a.recon)?;
            set_path(cfg, "paths.truth", &a.truth)?;
            set_path(cfg, "paths.report", &a.report)
        }
    }
}

fn thread_count(cli: &Cli, cfg: &ToolConfig) -> Result<Option<usize>, Error> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::ValueOutOfRange {
                key: THREADS_ENV.into(),
                reason: format!("`{v}` is not a positive integer"),
            }),
        };
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::ValueOutOfRange {
                key: "threads".into(),
                reason: "must be positive".into(),
            });
        }
        return Ok(Some(n));
    }
    Ok(cfg.get_usize("threads"))
}

/// Outcome of a subcommand that ran to completion.
enum Outcome {
    Done,
    Checks(bool),
}

fn run(cli: &Cli) -> Result<Outcome, Error> {
    let mut cfg = match &cli.config {
        Some(p) => read_config(p)?,
        None => ToolConfig::default(),
    };
    merge_flags(&mut cfg, &cli.command)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cli, &cfg)? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Phantom(a) => commands::phantom(&cfg, a.pgm.as_deref()).map(|_| Outcome::Done),
        Command::Forward(a) => commands::forward(&cfg, a.phantom.as_deref()).map(|_| Outcome::Done),
        Command::Reconstruct(a) => {
            commands::reconstruct(&cfg, a.sino.as_deref()).map(|_| Outcome::Done)
        }
        Command::AdjointTest(_) => commands::adjoint_test(&cfg).map(Outcome::Checks),
        Command::RiccatiCheck(_) => commands::riccati_check(&cfg).map(Outcome::Checks),
        Command::Xray(_) => commands::xray(&cfg).map(Outcome::Checks),
        Command::WesterveltCheck(_) => commands::westervelt_check(&cfg).map(Outcome::Checks),
        Command::Metrics(_) => commands::metrics(&cfg).map(|_| Outcome::Done),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("{first}");
            return ExitCode::from(2);
        }
    };
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(Outcome::Done)) | Ok(Ok(Outcome::Checks(true))) => ExitCode::SUCCESS,
        Ok(Ok(Outcome::Checks(false))) => ExitCode::from(1),
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(1)
        }
    }
}
