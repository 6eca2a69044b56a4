//! Command-line driver: spectra, the verification suite, shape optimization
//! and convergence sweeps, each emitting one JSON report per run.
//!
//! Exit codes: 0 success, 1 some check failed, 2 configuration error,
//! 3 solver error, 4 non-convergence.

pub mod commands;
pub mod config;
pub mod plot;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{execute, Outcome};
pub use config::{Command, RunConfig};
pub use report::Report;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] planar_spectra::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use planar_spectra::Error as E;
        match self {
            CliError::Config(_) => commands::EXIT_CONFIG,
            CliError::Io(_) => commands::EXIT_SOLVER,
            CliError::Core(e) => match e {
                E::InvalidDomain(_)
                | E::DegenerateStar { .. }
                | E::InvalidArgument(_)
                | E::Topology(_)
                | E::Mesh(_)
                | E::EmptyInterior => commands::EXIT_CONFIG,
                E::FactorizationBreakdown { .. } | E::Oracle(_) => commands::EXIT_SOLVER,
                E::NoConvergence { .. } => commands::EXIT_NO_CONVERGENCE,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "planar-spectra", version, about = "Planar Dirichlet, buckling and Stokes spectra")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Eigenvalues and modes of one problem on one domain.
    Spectrum(Flags),
    /// Run named checks (or all) on a domain or the standard gallery.
    Verify(Flags),
    /// Minimize an eigenvalue over area-normalized Fourier stars.
    Optimize(Flags),
    /// Sweep mesh levels and tabulate errors and observed orders.
    Convergence(Flags),
    /// Re-run the configuration embedded in a report and compare bytes.
    Replay {
        report: PathBuf,
        /// Write the regenerated report here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Every setting can also come from `--config FILE` (`key = value` lines);
/// flags win over the file.
#[derive(Debug, Args)]
struct Flags {
    #[arg(long)]
    config: Option<PathBuf>,
    /// disc, ellipse, rectangle, annulus or star.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long = "semi-a")]
    semi_a: Option<String>,
    #[arg(long = "semi-b")]
    semi_b: Option<String>,
    #[arg(long = "w", alias = "width")]
    width: Option<String>,
    #[arg(long = "h", alias = "height")]
    height: Option<String>,
    #[arg(long = "inner-r", alias = "inner")]
    inner_r: Option<String>,
    #[arg(long = "outer-r", alias = "outer")]
    outer_r: Option<String>,
    #[arg(long = "base-radius")]
    base_radius: Option<String>,
    /// Star cosine coefficients a_1,a_2,...
    #[arg(long = "cos", alias = "cos-coeffs")]
    cos_coeffs: Option<String>,
    #[arg(long = "sin", alias = "sin-coeffs")]
    sin_coeffs: Option<String>,
    /// Rescale the domain to this area.
    #[arg(long = "area", alias = "target-area")]
    target_area: Option<String>,
    #[arg(long)]
    level: Option<String>,
    #[arg(long = "level-min")]
    level_min: Option<String>,
    #[arg(long = "level-max")]
    level_max: Option<String>,
    /// Number of eigenvalues.
    #[arg(long)]
    k: Option<String>,
    /// dirichlet, buckling or stokes.
    #[arg(long)]
    problem: Option<String>,
    /// A check name, or `all`.
    #[arg(long)]
    check: Option<String>,
    /// disc, nondisc, none or auto.
    #[arg(long)]
    expect: Option<String>,
    /// stokes1, buckling1 or dirichlet2.
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    modes: Option<String>,
    /// Start coefficients such as `a2=0.1,b3=0.05`, or `none`.
    #[arg(long)]
    start: Option<String>,
    #[arg(long = "max-evaluations")]
    max_evaluations: Option<String>,
    #[arg(long = "certificate-level")]
    certificate_level: Option<String>,
    /// Override one threshold, `NAME=VALUE`; repeatable.
    #[arg(long = "threshold", value_name = "NAME=VALUE")]
    threshold: Vec<String>,
    #[arg(long)]
    viscosity: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Report path.
    #[arg(long)]
    output: Option<String>,
    /// Directory for SVG plots.
    #[arg(long)]
    plots: Option<String>,
    /// Plain-text table path (optimize, convergence).
    #[arg(long)]
    table: Option<String>,
    /// Mesh export path (spectrum).
    #[arg(long)]
    mesh: Option<String>,
    /// Run every gallery domain (verify).
    #[arg(long = "all-gallery")]
    all_gallery: bool,
    /// Include lower levels in the spectrum report.
    #[arg(long)]
    history: bool,
    /// Record wall-clock time in the footer (the report is then not reproducible bitwise).
    #[arg(long)]
    timing: bool,
}

impl Flags {
    /// Flag values as `(key, value)` pairs; the domain kind comes first so
    /// that later shape keys apply to it.
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        };
        push("domain", &self.domain);
        push("radius", &self.radius);
        push("semi_a", &self.semi_a);
        push("semi_b", &self.semi_b);
        push("width", &self.width);
        push("height", &self.height);
        push("inner_r", &self.inner_r);
        push("outer_r", &self.outer_r);
        push("base_radius", &self.base_radius);
        push("cos_coeffs", &self.cos_coeffs);
        push("sin_coeffs", &self.sin_coeffs);
        push("target_area", &self.target_area);
        push("level", &self.level);
        push("level_min", &self.level_min);
        push("level_max", &self.level_max);
        push("k", &self.k);
        push("problem", &self.problem);
        push("check", &self.check);
        push("expect", &self.expect);
        push("objective", &self.objective);
        push("modes", &self.modes);
        push("start", &self.start);
        push("max_evaluations", &self.max_evaluations);
        push("certificate_level", &self.certificate_level);
        push("viscosity", &self.viscosity);
        push("seed", &self.seed);
        push("output", &self.output);
        push("plots", &self.plots);
        push("table", &self.table);
        push("mesh", &self.mesh);
        for t in &self.threshold {
            out.push(("threshold".into(), t.clone()));
        }
        for (k, on) in [("all_gallery", self.all_gallery), ("history", self.history), ("timing", self.timing)] {
            if on {
                out.push((k.into(), "true".into()));
            }
        }
        out
    }

    fn resolve(&self, command: Command) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(p) => config::read_config_file(p)?,
            None => Vec::new(),
        };
        RunConfig::resolve(command, &file, &self.overrides())
    }
}

/// Writes side files, then the report, each atomically.
pub fn write_outcome(cfg: &RunConfig, outcome: &Outcome) -> Result<(), CliError> {
    for (path, bytes) in &outcome.artifacts {
        report::write_atomic(path, bytes)?;
    }
    report::write_atomic(&cfg.output, outcome.report.to_text().as_bytes())
}

/// Runs one configuration end to end and returns the process exit code.
pub fn run_config(cfg: &RunConfig) -> i32 {
    let outcome = match execute(cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if let Err(e) = write_outcome(cfg, &outcome) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    println!("{}", outcome.report.footer.summary);
    println!("report written to {}", cfg.output.display());
    outcome.report.footer.exit_code
}

/// Regenerates a report from its embedded config; `Ok(true)` when the bytes match.
pub fn replay(report_path: &std::path::Path, output: Option<&std::path::Path>) -> Result<bool, CliError> {
    let original = std::fs::read_to_string(report_path)
        .map_err(|e| CliError::Config(format!("cannot read report {}: {e}", report_path.display())))?;
    let report = Report::from_text(&original)?;
    let cfg = RunConfig::from_echo(&report.config)?;
    let again = execute(&cfg)?.report.to_text();
    if let Some(out) = output {
        report::write_atomic(out, again.as_bytes())?;
    }
    Ok(again == original)
}

/// Entry point shared by the binary and the tests.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { commands::EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (command, flags) = match &cli.command {
        Sub::Spectrum(f) => (Command::Spectrum, f),
        Sub::Verify(f) => (Command::Verify, f),
        Sub::Optimize(f) => (Command::Optimize, f),
        Sub::Convergence(f) => (Command::Convergence, f),
        Sub::Replay { report, output } => {
            return match replay(report, output.as_deref()) {
                Ok(true) => {
                    println!("replay of {} is bitwise identical", report.display());
                    0
                }
                Ok(false) => {
                    eprintln!("replay of {} differs from the stored report", report.display());
                    commands::EXIT_CHECK_FAILED
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            };
        }
    };
    match flags.resolve(command) {
        Ok(cfg) => run_config(&cfg),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
