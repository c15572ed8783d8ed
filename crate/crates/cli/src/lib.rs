//! Command-line harness: simulations, figure reproduction, bound checks,
//! periodic branches and threshold searches, with CSV/SVG/JSON output.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{execute, Outcome};
pub use config::Config;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "delay-blowup", version, about = "Delay-induced blow-up oscillator experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Svg,
    Json,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// key = value file; flags override its entries
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<String>,
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true)]
    pub abs_tol: Option<f64>,
    #[arg(long, global = true)]
    pub h_min: Option<f64>,
    /// Radius at which a run counts as blowing up
    #[arg(long, global = true)]
    pub r_max: Option<f64>,
    /// Final integration time
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    #[arg(long, global = true)]
    pub max_steps: Option<usize>,
    /// Worker threads for sweeps (0 = one per core)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output formats, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub format: Option<Vec<FormatArg>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one run and classify it
    Simulate(SimulateArgs),
    /// Reproduce a figure: tau1, tau02, tau001 or diagram
    Figure(FigureArgs),
    /// Check the blow-up estimates along a run from the constructed history
    #[command(name = "verify-theorem1")]
    VerifyTheorem1(VerifyArgs),
    /// Enumerate constant-radius periodic solutions
    Periodic(PeriodicArgs),
    /// Bisect for the blow-up threshold in delta
    Threshold(ThresholdArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub phi_tilde: Option<String>,
    /// polar or cartesian
    #[arg(long)]
    pub form: Option<String>,
    /// Initial radius when tau = 0
    #[arg(long)]
    pub r0: Option<f64>,
    /// Initial angle when tau = 0
    #[arg(long, allow_hyphen_values = true)]
    pub theta0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureName {
    Tau1,
    Tau02,
    Tau001,
    Diagram,
}

impl FigureName {
    fn key(self) -> &'static str {
        match self {
            FigureName::Tau1 => "tau1",
            FigureName::Tau02 => "tau02",
            FigureName::Tau001 => "tau001",
            FigureName::Diagram => "diagram",
        }
    }
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    pub name: Option<FigureName>,
    #[arg(long)]
    pub phi_tilde: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub phi_tilde: Option<String>,
}

#[derive(Debug, Args)]
pub struct PeriodicArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub n_max: Option<u32>,
    /// Also integrate from each point's constant-radius history
    #[arg(long)]
    pub seed_run: bool,
    /// Seeded run length in multiples of tau
    #[arg(long)]
    pub seed_periods: Option<f64>,
    #[arg(long)]
    pub drift_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lo: Option<f64>,
    #[arg(long)]
    pub hi: Option<f64>,
    /// Stop when the bracket is narrower than this
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long)]
    pub phi_tilde: Option<String>,
    #[arg(long)]
    pub probes_per_round: Option<usize>,
}

fn s<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

impl Cli {
    fn command_name(&self) -> &'static str {
        match self.command {
            Command::Simulate(_) => "simulate",
            Command::Figure(_) => "figure",
            Command::VerifyTheorem1(_) => "verify-theorem1",
            Command::Periodic(_) => "periodic",
            Command::Threshold(_) => "threshold",
        }
    }

    fn overrides(&self) -> Vec<(&'static str, Option<String>)> {
        let g = &self.global;
        let mut v = vec![
            ("out_dir", g.out_dir.clone()),
            ("rel_tol", s(&g.rel_tol)),
            ("abs_tol", s(&g.abs_tol)),
            ("h_min", s(&g.h_min)),
            ("r_max", s(&g.r_max)),
            ("horizon", s(&g.horizon)),
            ("max_steps", s(&g.max_steps)),
            ("workers", s(&g.workers)),
            (
                "format",
                g.format.as_ref().map(|fs| {
                    fs.iter()
                        .map(|f| match f {
                            FormatArg::Csv => "csv",
                            FormatArg::Svg => "svg",
                            FormatArg::Json => "json",
                        })
                        .collect::<Vec<_>>()
                        .join(",")
                }),
            ),
        ];
        match &self.command {
            Command::Simulate(a) => v.extend([
                ("tau", s(&a.tau)),
                ("delta", s(&a.delta)),
                ("phi_tilde", a.phi_tilde.clone()),
                ("form", a.form.clone()),
                ("r0", s(&a.r0)),
                ("theta0", s(&a.theta0)),
            ]),
            Command::Figure(a) => v.extend([
                ("name", a.name.map(|n| n.key().to_string())),
                ("phi_tilde", a.phi_tilde.clone()),
            ]),
            Command::VerifyTheorem1(a) => v.extend([
                ("delta", s(&a.delta)),
                ("tau", s(&a.tau)),
                ("phi_tilde", a.phi_tilde.clone()),
            ]),
            Command::Periodic(a) => v.extend([
                ("tau", s(&a.tau)),
                ("n_max", s(&a.n_max)),
                ("seed_run", a.seed_run.then(|| "true".to_string())),
                ("seed_periods", s(&a.seed_periods)),
                ("drift_tol", s(&a.drift_tol)),
            ]),
            Command::Threshold(a) => v.extend([
                ("tau", s(&a.tau)),
                ("lo", s(&a.lo)),
                ("hi", s(&a.hi)),
                ("width", s(&a.width)),
                ("phi_tilde", a.phi_tilde.clone()),
                ("probes_per_round", s(&a.probes_per_round)),
            ]),
        }
        v
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<Config, CliError> {
        let mut cfg = Config::defaults(self.command_name())?;
        if let Some(path) = &self.global.config {
            cfg.merge_file(path)?;
        }
        for (k, v) in self.overrides() {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        if cfg.command() == "figure" && cfg.raw("name").is_empty() {
            return Err(CliError::Usage(
                "figure name required (tau1, tau02, tau001, diagram)".into(),
            ));
        }
        Ok(cfg)
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli.resolve().and_then(|cfg| execute(&cfg)) {
        Ok(outcome) => outcome.exit_code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
