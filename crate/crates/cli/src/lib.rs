//! Command-line reports over the `geoflow` library: curvature bounds, entropy
//! and counting estimates, Betti-number certification and the Gromov table.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::path::Path;
use std::time::Instant;

pub use commands::{cmd_bound, cmd_certify, cmd_count, cmd_estimate, cmd_gromov, run, CommandOutput};
pub use config::{Cli, CommandKind, Format, RunConfig};
pub use error::{CliError, CliResult};
pub use report::Report;

use report::series_csv;

/// Runs a command and stamps the wall-clock time onto its report.
pub fn run_timed(config: &RunConfig) -> CliResult<CommandOutput> {
    let start = Instant::now();
    let mut output = run(config)?;
    output.report.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
    Ok(output)
}

/// The primary rendering in the configured format. CSV gives the growth
/// series when the command has one.
pub fn render(output: &CommandOutput, format: Format) -> String {
    match format {
        Format::Json => output.report.to_json() + "\n",
        Format::Text => output.report.to_text(),
        Format::Csv => match &output.series {
            Some(series) => series_csv(series),
            None => output.report.to_csv(),
        },
    }
}

/// Writes the rendering to `out`, or returns it for standard output. With
/// `out` set, a growth series also goes to a sibling `.csv` file unless the
/// main output already is that series.
pub fn emit(output: &CommandOutput, format: Format, out: Option<&Path>) -> CliResult<Option<String>> {
    let text = render(output, format);
    let Some(path) = out else {
        return Ok(Some(text));
    };
    std::fs::write(path, text)?;
    if let (Some(series), false) = (&output.series, format == Format::Csv) {
        let sibling = path.with_extension("csv");
        if sibling != path {
            std::fs::write(sibling, series_csv(series))?;
        }
    }
    Ok(None)
}
