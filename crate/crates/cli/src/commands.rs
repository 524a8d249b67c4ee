//! One function per subcommand; each returns a report and its exit code.

use std::f64::consts::PI;
use std::path::Path;

use geoflow::bounds::{grossman_rate, manning_bound, nonpositive_bound, theorem_b_bound};
use geoflow::estimators::{
    counting_series, mane_series, slope, sphere_arc_count, uniform_grid, GrowthSeries, MIN_SAMPLES,
};
use geoflow::manifold::{extremal_curvatures, Manifold, ModelSpec};
use geoflow::topology::{certify, corollary1_bound, gromov_log10_c, BettiProfile};

use crate::config::{CommandKind, RunConfig};
use crate::error::{CliError, CliResult, EXIT_NUMERIC, EXIT_OBSTRUCTED, EXIT_OK};
use crate::report::{
    Body, BoundReport, CountReport, EstimateReport, GromovReport, GromovRow, OracleComparison, Report,
};

/// Slack allowed above the curvature bound before an estimate is flagged.
pub const BOUND_SLACK: f64 = 0.05;
/// Relative disagreement with the sphere arc-count oracle that triggers a warning.
pub const ORACLE_TOLERANCE: f64 = 0.01;
/// Midpoint nodes for the oracle's distance integral.
const ORACLE_NODES: usize = 20_000;
/// Largest dimension in the Gromov table; `M(n)` has about `n^2` digits.
const GROMOV_N_LIMIT: usize = 100;

#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub report: Report,
    /// Growth series for `estimate` and `count`.
    pub series: Option<GrowthSeries>,
    pub exit_code: i32,
}

impl CommandOutput {
    fn new(report: Report, series: Option<GrowthSeries>, exit_code: i32) -> Self {
        CommandOutput { report, series, exit_code }
    }
}

pub fn run(config: &RunConfig) -> CliResult<CommandOutput> {
    match config.command {
        CommandKind::Bound => cmd_bound(config),
        CommandKind::Estimate => cmd_estimate(config),
        CommandKind::Count => cmd_count(config),
        CommandKind::Certify => cmd_certify(config),
        CommandKind::Gromov => cmd_gromov(config),
    }
}

fn model(config: &RunConfig) -> CliResult<(ModelSpec, Manifold)> {
    let text = config
        .manifold
        .as_deref()
        .ok_or_else(|| CliError::Input(format!("`{}` needs a manifold specification", config.command)))?;
    let spec = ModelSpec::parse(text)?;
    let model = spec.build()?;
    Ok((spec, model))
}

fn check_step(config: &RunConfig) -> CliResult<()> {
    if !(config.step > 0.0) || !config.step.is_finite() {
        return Err(CliError::Input(format!("step must be positive, got {}", config.step)));
    }
    Ok(())
}

fn window(config: &RunConfig, default_lo: f64) -> (f64, f64) {
    (config.t_min.unwrap_or(default_lo), config.t_max)
}

/// Curvature extremes and the upper bounds on entropy they imply.
pub fn cmd_bound(config: &RunConfig) -> CliResult<CommandOutput> {
    let (spec, model) = model(config)?;
    let n = model.dim();
    let curvature = extremal_curvatures(&model, config.samples.max(1), config.seed)?;
    let mut notes = Vec::new();
    if !curvature.exact {
        notes.push(format!("curvature extremes sampled from {} frames", config.samples));
    }
    let theorem_b = if curvature.k_max > 0.0 {
        Some(theorem_b_bound(n, curvature.k_max, curvature.min_ricci)?)
    } else {
        notes.push("K_max <= 0: theorem_b needs positive curvature somewhere".into());
        None
    };
    let nonpositive =
        if curvature.min_ricci <= 0.0 { Some(nonpositive_bound(n, curvature.min_ricci)?) } else { None };
    let k = curvature.k_max.max(-curvature.k_min);
    let manning = if k > 0.0 { Some(manning_bound(n, k)?) } else { None };
    let body = BoundReport {
        manifold: spec.to_string(),
        dimension: n,
        curvature,
        theorem_b,
        nonpositive,
        manning,
        grossman: grossman_rate(n)?,
        notes,
    };
    Ok(CommandOutput::new(Report::new(config.clone(), Body::Bound(body), Vec::new()), None, EXIT_OK))
}

/// The curvature bound an estimate must respect: `theorem_b` when
/// `K_max > 0`, otherwise `nonpositive`.
fn entropy_upper_bound(model: &Manifold, config: &RunConfig) -> CliResult<(f64, &'static str)> {
    let c = extremal_curvatures(model, config.samples.max(1), config.seed)?;
    if c.k_max > 0.0 {
        Ok((theorem_b_bound(model.dim(), c.k_max, c.min_ricci)?, "theorem_b"))
    } else {
        Ok((nonpositive_bound(model.dim(), c.min_ricci)?, "nonpositive"))
    }
}

/// Mean-expansion growth rate, checked against the curvature bound.
pub fn cmd_estimate(config: &RunConfig) -> CliResult<CommandOutput> {
    let (spec, model) = model(config)?;
    check_step(config)?;
    if config.samples < MIN_SAMPLES {
        return Err(CliError::Input(format!("estimate needs at least {MIN_SAMPLES} samples, got {}", config.samples)));
    }
    let times = uniform_grid(config.t_max, config.points)?;
    let series = mane_series(&model, &times, config.samples, config.seed, config.step)?;
    let estimate = slope(&series, Some(window(config, config.t_max / 3.0)))?;
    let (upper_bound, name) = entropy_upper_bound(&model, config)?;
    let within_bound = estimate.slope <= upper_bound + BOUND_SLACK;
    let mut warnings = Vec::new();
    if !within_bound {
        warnings.push(format!(
            "estimate {} exceeds {name} = {} by more than {BOUND_SLACK}",
            estimate.slope, upper_bound
        ));
    }
    let body = EstimateReport {
        manifold: spec.to_string(),
        estimate,
        upper_bound,
        upper_bound_name: name.into(),
        within_bound,
        failures: series.failures,
    };
    let exit = if within_bound { EXIT_OK } else { EXIT_NUMERIC };
    Ok(CommandOutput::new(Report::new(config.clone(), Body::Estimate(body), warnings), Some(series), exit))
}

/// `int_M n_T(x, y) dy` on the round 2-sphere of radius `r`, from the arc
/// count between points at distance `s`: `r^2 int_0^pi 2 pi sin(s) n_{T/r}(s) ds`.
pub fn sphere_counting_oracle(r: f64, t: f64) -> CliResult<f64> {
    let h = PI / ORACLE_NODES as f64;
    let mut sum = 0.0;
    for i in 0..ORACLE_NODES {
        let s = (i as f64 + 0.5) * h;
        sum += s.sin() * sphere_arc_count(s, t / r)? as f64;
    }
    Ok(2.0 * PI * r * r * sum * h)
}

/// Counting-integral growth from the model's base point.
pub fn cmd_count(config: &RunConfig) -> CliResult<CommandOutput> {
    let (spec, model) = model(config)?;
    check_step(config)?;
    let times = uniform_grid(config.t_max, config.points)?;
    let x = model.base_point();
    let series = counting_series(&model, &x, &times, config.samples, config.step, config.seed)?;
    let growth = slope(&series, Some(window(config, times[0])))?;
    let integrals: Vec<(f64, f64)> = times.iter().zip(&series.values).map(|(t, y)| (*t, y.exp())).collect();
    let mut warnings = Vec::new();
    let oracle = match spec {
        ModelSpec::Sphere { n: 2, r } => {
            let mut rows = Vec::with_capacity(integrals.len());
            for &(t, counted) in &integrals {
                let oracle = sphere_counting_oracle(r, t)?;
                let relative_error = (counted - oracle).abs() / oracle;
                if relative_error > ORACLE_TOLERANCE {
                    warnings.push(format!("T = {t}: counting integral differs from the arc-count oracle by {relative_error:.3e}"));
                }
                rows.push(OracleComparison { t, counted, oracle, relative_error });
            }
            Some(rows)
        }
        _ => None,
    };
    let body = CountReport { manifold: spec.to_string(), growth, integrals, oracle, failures: series.failures };
    Ok(CommandOutput::new(Report::new(config.clone(), Body::Count(body), warnings), Some(series), EXIT_OK))
}

/// Reads a profile from a path, or parses it directly when it is inline JSON.
pub fn load_profile(source: &str) -> CliResult<BettiProfile> {
    let text = if source.trim_start().starts_with('{') {
        source.to_string()
    } else {
        std::fs::read_to_string(Path::new(source))
            .map_err(|e| CliError::Input(format!("cannot read profile {source}: {e}")))?
    };
    Ok(BettiProfile::from_json(&text)?)
}

/// Obstruction report; exit code 1 when an applicable test fails.
pub fn cmd_certify(config: &RunConfig) -> CliResult<CommandOutput> {
    let source = config.profile.as_deref().ok_or_else(|| CliError::Input("certify needs --profile".into()))?;
    let profile = load_profile(source)?;
    let report = certify(&profile)?;
    let exit = if report.obstructed() { EXIT_OBSTRUCTED } else { EXIT_OK };
    Ok(CommandOutput::new(Report::new(config.clone(), Body::Certify(report), Vec::new()), None, exit))
}

/// `log10 C(n)` against `log10` of the Betti-number bound.
pub fn cmd_gromov(config: &RunConfig) -> CliResult<CommandOutput> {
    let (lo, hi) = (config.n_min, config.n_max);
    if lo < 2 || lo > hi || hi > GROMOV_N_LIMIT {
        return Err(CliError::Input(format!("need 2 <= n_min <= n_max <= {GROMOV_N_LIMIT}, got {lo}..{hi}")));
    }
    let mut rows = Vec::with_capacity(hi - lo + 1);
    for n in lo..=hi {
        let g = gromov_log10_c(n)?;
        let ours = corollary1_bound(n)?.log10();
        rows.push(GromovRow {
            n,
            m: g.m.to_string(),
            log10_c: g.log10_c,
            log10_corollary1: ours,
            paper_bound_smaller: ours < g.log10_c.to_f64(),
        });
    }
    Ok(CommandOutput::new(Report::new(config.clone(), Body::Gromov(GromovReport { rows }), Vec::new()), None, EXIT_OK))
}
