//! Command-line arguments and the resolved run configuration echoed into reports.

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub const DEFAULT_T_MAX: f64 = 10.0;
pub const DEFAULT_POINTS: usize = 20;
pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_STEP: f64 = 1e-2;
pub const DEFAULT_N_MIN: usize = 2;
pub const DEFAULT_N_MAX: usize = 10;

#[derive(Debug, Parser)]
#[command(name = "geoflow", version, about = "Entropy bounds for geodesic flows and Betti-number obstructions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Bound,
    Estimate,
    Count,
    Certify,
    Gromov,
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CommandKind::Bound => "bound",
            CommandKind::Estimate => "estimate",
            CommandKind::Count => "count",
            CommandKind::Certify => "certify",
            CommandKind::Gromov => "gromov",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Curvature extremes and the entropy upper bounds they give.
    Bound(Options),
    /// Growth rate of the mean expansion over the unit sphere bundle.
    Estimate(Options),
    /// Growth rate of the geodesic-arc counting integral.
    Count(Options),
    /// Test a Betti profile against the obstructions.
    Certify(Options),
    /// Compare Gromov's constant with the Betti-number bound.
    Gromov(Options),
}

impl Command {
    pub fn split(self) -> (CommandKind, Options) {
        match self {
            Command::Bound(o) => (CommandKind::Bound, o),
            Command::Estimate(o) => (CommandKind::Estimate, o),
            Command::Count(o) => (CommandKind::Count, o),
            Command::Certify(o) => (CommandKind::Certify, o),
            Command::Gromov(o) => (CommandKind::Gromov, o),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Manifold specification, e.g. `sphere:n=2,r=1.0` (same as --manifold).
    #[arg(value_name = "SPEC", conflicts_with = "manifold")]
    pub spec: Option<String>,
    /// Manifold specification: text form or JSON.
    #[arg(long)]
    pub manifold: Option<String>,
    /// Betti profile: a JSON file path or an inline JSON document.
    #[arg(long)]
    pub profile: Option<String>,
    /// Largest time (or length) on the grid.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Start of the slope window; defaults to t_max / 3 for estimates.
    #[arg(long)]
    pub t_min: Option<f64>,
    /// Number of grid points up to t_max.
    #[arg(long)]
    pub points: Option<usize>,
    /// Monte Carlo samples (or angular directions for counting).
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Integrator step.
    #[arg(long)]
    pub step: Option<f64>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Smallest dimension in the Gromov table.
    #[arg(long)]
    pub n_min: Option<usize>,
    /// Largest dimension in the Gromov table.
    #[arg(long)]
    pub n_max: Option<usize>,
}

/// Every setting a run used, defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub manifold: Option<String>,
    pub profile: Option<String>,
    pub t_min: Option<f64>,
    pub t_max: f64,
    pub points: usize,
    pub samples: usize,
    pub seed: u64,
    pub step: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub n_min: usize,
    pub n_max: usize,
}

impl RunConfig {
    pub fn new(command: CommandKind, options: Options) -> Self {
        RunConfig {
            command,
            manifold: options.manifold.or(options.spec),
            profile: options.profile,
            t_min: options.t_min,
            t_max: options.t_max.unwrap_or(DEFAULT_T_MAX),
            points: options.points.unwrap_or(DEFAULT_POINTS),
            samples: options.samples.unwrap_or(DEFAULT_SAMPLES),
            seed: options.seed.unwrap_or(DEFAULT_SEED),
            step: options.step.unwrap_or(DEFAULT_STEP),
            out: options.out,
            format: options.format.unwrap_or_default(),
            n_min: options.n_min.unwrap_or(DEFAULT_N_MIN),
            n_max: options.n_max.unwrap_or(DEFAULT_N_MAX),
        }
    }

    /// Defaults for `command` with the given manifold specification.
    pub fn for_manifold(command: CommandKind, spec: &str) -> Self {
        Self::new(command, Options { manifold: Some(spec.into()), ..Options::default() })
    }

    /// Defaults for `certify` with a profile path or inline JSON.
    pub fn for_profile(profile: &str) -> Self {
        Self::new(CommandKind::Certify, Options { profile: Some(profile.into()), ..Options::default() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunConfig {
        let cli = Cli::try_parse_from(args).unwrap();
        let (kind, options) = cli.command.split();
        RunConfig::new(kind, options)
    }

    #[test]
    fn positional_and_flag_manifold_agree() {
        let a = parse(&["geoflow", "bound", "sphere:n=2"]);
        let b = parse(&["geoflow", "bound", "--manifold", "sphere:n=2"]);
        assert_eq!(a, b);
        assert!(Cli::try_parse_from(["geoflow", "bound", "sphere:n=2", "--manifold", "torus:n=2"]).is_err());
    }

    #[test]
    fn defaults_are_filled_in() {
        let c = parse(&["geoflow", "estimate", "hyperbolic:n=2"]);
        assert_eq!(c.seed, 0);
        assert_eq!(c.samples, DEFAULT_SAMPLES);
        assert_eq!(c.t_max, DEFAULT_T_MAX);
        assert_eq!(c.format, Format::Json);
        let c = parse(&[
            "geoflow", "estimate", "sphere:n=2", "--t-max", "12", "--samples", "300", "--seed", "7", "--step", "0.001",
            "--format", "text", "--t-min", "2",
        ]);
        assert_eq!((c.t_max, c.samples, c.seed, c.step, c.t_min), (12.0, 300, 7, 1e-3, Some(2.0)));
        assert_eq!(c.format, Format::Text);
    }

    #[test]
    fn rejects_unknown_format() {
        assert!(Cli::try_parse_from(["geoflow", "bound", "sphere:n=2", "--format", "xml"]).is_err());
    }
}
