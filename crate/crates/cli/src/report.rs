//! Report envelope shared by every command, with JSON and text renderings.

use std::fmt::Write as _;

use geoflow::estimators::{EntropyEstimate, GrowthSeries};
use geoflow::manifold::ExtremalCurvatures;
use geoflow::numfmt::sig6;
use geoflow::topology::{BigValue, ObstructionReport};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub geoflow: String,
    #[serde(rename = "geoflow-cli")]
    pub geoflow_cli: String,
}

impl Versions {
    pub fn current() -> Self {
        Versions { geoflow: geoflow::VERSION.into(), geoflow_cli: env!("CARGO_PKG_VERSION").into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub manifold: String,
    pub dimension: usize,
    pub curvature: ExtremalCurvatures,
    /// Present when `K_max > 0`.
    pub theorem_b: Option<f64>,
    /// Present when the Ricci curvature takes non-positive values.
    pub nonpositive: Option<f64>,
    /// With `k = max |K|`; absent for flat metrics.
    pub manning: Option<f64>,
    pub grossman: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub manifold: String,
    pub estimate: EntropyEstimate,
    /// The curvature upper bound the estimate is checked against.
    pub upper_bound: f64,
    pub upper_bound_name: String,
    pub within_bound: bool,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub t: f64,
    pub counted: f64,
    pub oracle: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub manifold: String,
    pub growth: EntropyEstimate,
    pub integrals: Vec<(f64, f64)>,
    /// Arc-count cross-check, for the unit 2-sphere only.
    pub oracle: Option<Vec<OracleComparison>>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GromovRow {
    pub n: usize,
    /// `M(n) = 8^n 10^{n^2+4n}`, exact.
    pub m: String,
    pub log10_c: BigValue,
    pub log10_corollary1: f64,
    pub paper_bound_smaller: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GromovReport {
    pub rows: Vec<GromovRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Body {
    Bound(BoundReport),
    Estimate(EstimateReport),
    Count(CountReport),
    Certify(ObstructionReport),
    Gromov(GromovReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub versions: Versions,
    pub config: RunConfig,
    pub result: Body,
    pub warnings: Vec<String>,
    /// Excluded from the canonical form.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl Report {
    pub fn new(config: RunConfig, result: Body, warnings: Vec<String>) -> Self {
        Report { tool: "geoflow".into(), versions: Versions::current(), config, result, warnings, wall_clock_seconds: None }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON without the wall-clock field: identical for identical configs.
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        copy.wall_clock_seconds = None;
        copy.to_json()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "geoflow {} (geoflow {}, seed {})",
            self.config.command, self.versions.geoflow, self.config.seed
        );
        match &self.result {
            Body::Bound(b) => {
                let c = &b.curvature;
                let _ = writeln!(out, "manifold: {} (n = {})", b.manifold, b.dimension);
                let kind = if c.exact { "closed form" } else { "sampled" };
                let _ = writeln!(
                    out,
                    "K_max = {}, K_min = {}, min Ricci = {} ({kind})",
                    sig6(c.k_max),
                    sig6(c.k_min),
                    sig6(c.min_ricci)
                );
                let opt = |x: Option<f64>| x.map(sig6).unwrap_or_else(|| "n/a".into());
                let _ = writeln!(out, "theorem_b   = {}", opt(b.theorem_b));
                let _ = writeln!(out, "nonpositive = {}", opt(b.nonpositive));
                let _ = writeln!(out, "manning     = {}", opt(b.manning));
                let _ = writeln!(out, "grossman    = {}", sig6(b.grossman));
                for n in &b.notes {
                    let _ = writeln!(out, "note: {n}");
                }
            }
            Body::Estimate(e) => {
                let s = &e.estimate;
                let _ = writeln!(out, "manifold: {}", e.manifold);
                let _ = writeln!(
                    out,
                    "slope = {} +- {} over [{}, {}] ({} samples, {} failures)",
                    sig6(s.slope),
                    sig6(s.halfwidth),
                    sig6(s.window.0),
                    sig6(s.window.1),
                    s.samples,
                    e.failures
                );
                let rel = if e.within_bound { "within" } else { "VIOLATES" };
                let _ = writeln!(out, "{rel} {} = {} (+0.05)", e.upper_bound_name, sig6(e.upper_bound));
            }
            Body::Count(c) => {
                let _ = writeln!(out, "manifold: {}", c.manifold);
                let _ = writeln!(
                    out,
                    "counting growth = {} +- {} over [{}, {}]",
                    sig6(c.growth.slope),
                    sig6(c.growth.halfwidth),
                    sig6(c.growth.window.0),
                    sig6(c.growth.window.1)
                );
                for (t, v) in &c.integrals {
                    let _ = writeln!(out, "  T = {:<10} integral = {}", sig6(*t), sig6(*v));
                }
                if let Some(rows) = &c.oracle {
                    for r in rows {
                        let _ = writeln!(
                            out,
                            "  oracle T = {:<10} counted {} vs {} (rel. error {})",
                            sig6(r.t),
                            sig6(r.counted),
                            sig6(r.oracle),
                            sig6(r.relative_error)
                        );
                    }
                }
            }
            Body::Certify(r) => out.push_str(&r.to_text()),
            Body::Gromov(g) => {
                let _ = writeln!(out, "{:>3}  {:>16}  {:>16}  comparison", "n", "log10 C(n)", "log10 Cor. 1");
                for r in &g.rows {
                    let verdict = if r.paper_bound_smaller { "paper bound smaller" } else { "Gromov bound smaller" };
                    let _ = writeln!(
                        out,
                        "{:>3}  {:>16}  {:>16}  {verdict}",
                        r.n,
                        r.log10_c.to_string(),
                        sig6(r.log10_corollary1)
                    );
                }
            }
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        if let Some(s) = self.wall_clock_seconds {
            let _ = writeln!(out, "wall clock: {} s", sig6(s));
        }
        out
    }
}

impl Report {
    /// Flat CSV of the result. Growth series are written separately.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let opt = |x: Option<f64>| x.map(|v| format!("{v:?}")).unwrap_or_default();
        match &self.result {
            Body::Bound(b) => {
                let c = &b.curvature;
                out.push_str("quantity,value\n");
                for (k, v) in [
                    ("k_max", Some(c.k_max)),
                    ("k_min", Some(c.k_min)),
                    ("min_ricci", Some(c.min_ricci)),
                    ("theorem_b", b.theorem_b),
                    ("nonpositive", b.nonpositive),
                    ("manning", b.manning),
                    ("grossman", Some(b.grossman)),
                ] {
                    let _ = writeln!(out, "{k},{}", opt(v));
                }
            }
            Body::Estimate(e) => {
                let s = &e.estimate;
                out.push_str("slope,halfwidth,t_lo,t_hi,samples,seed,upper_bound\n");
                let _ = writeln!(
                    out,
                    "{:?},{:?},{:?},{:?},{},{},{:?}",
                    s.slope, s.halfwidth, s.window.0, s.window.1, s.samples, s.seed, e.upper_bound
                );
            }
            Body::Count(c) => {
                out.push_str("t,integral\n");
                for (t, v) in &c.integrals {
                    let _ = writeln!(out, "{t:?},{v:?}");
                }
            }
            Body::Certify(r) => {
                out.push_str("check,applicable,threshold,observed,verdict\n");
                for c in &r.checks {
                    let q = |x: &Option<geoflow::topology::Quantity>| x.map(|v| v.to_string()).unwrap_or_default();
                    let verdict = serde_json::to_value(c.verdict).expect("verdict serializes");
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        c.name,
                        c.applicable,
                        q(&c.threshold),
                        q(&c.observed),
                        verdict.as_str().unwrap_or_default()
                    );
                }
            }
            Body::Gromov(g) => {
                out.push_str("n,log10_c,log10_corollary1,paper_bound_smaller\n");
                for r in &g.rows {
                    let _ = writeln!(out, "{},{},{:?},{}", r.n, r.log10_c, r.log10_corollary1, r.paper_bound_smaller);
                }
            }
        }
        out
    }
}

/// A growth series as CSV text.
pub fn series_csv(series: &GrowthSeries) -> String {
    let mut buf = Vec::new();
    series.write_csv(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is ascii")
}
