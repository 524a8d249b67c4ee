//! Monte Carlo growth rates: the expansion integral over the unit sphere
//! bundle and the averaged geodesic counting integral.
//!
//! Both integrals grow like `exp(h t)` for an entropy-type rate `h`; the
//! rate is read off as a least-squares slope of their logarithms.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{expansion, propagate_jacobi_checkpoints, JacobiIntegrator};
use crate::error::{Error, Result};
use crate::manifold::{sample_directions_at, sample_sphere_bundle, ChartPoint, Manifold, TangentState};

/// Smallest sample count accepted by the expansion estimator.
pub const MIN_SAMPLES: usize = 100;
/// Largest tolerated fraction of samples whose integration fails.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;
/// Half-widths are this many standard errors.
pub const CONFIDENCE_SIGMAS: f64 = 3.0;
/// Fewest grid points a slope window may hold.
pub const MIN_WINDOW_POINTS: usize = 4;
/// Relative disagreement between half and full direction samples that triggers a warning.
pub const CONVERGENCE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ManeIntegral,
    CountingGrowth,
}

/// `y_j = log` of an integral at `t_j`, with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSeries {
    pub method: Method,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Samples dropped after a failed integration.
    pub failures: usize,
}

impl GrowthSeries {
    pub fn new(method: Method, times: Vec<f64>, values: Vec<f64>, stderr: Vec<f64>, samples: usize, seed: u64) -> Result<Self> {
        if times.len() != values.len() || times.len() != stderr.len() {
            return Err(Error::argument("times, values and stderr must have equal lengths"));
        }
        check_grid(&times)?;
        if values.iter().chain(&stderr).any(|v| !v.is_finite()) {
            return Err(Error::numeric("growth series has non-finite values"));
        }
        Ok(GrowthSeries { method, times, values, stderr, samples, seed, failures: 0 })
    }

    pub fn t_max(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Pointwise rates `y_j / t_j`, to inspect the approach to the limit.
    pub fn rates(&self) -> Vec<f64> {
        self.times.iter().zip(&self.values).map(|(t, y)| y / t).collect()
    }

    /// `[t_max / 3, t_max]`.
    pub fn default_window(&self) -> (f64, f64) {
        (self.t_max() / 3.0, self.t_max())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,y,stderr")?;
        for ((t, y), s) in self.times.iter().zip(&self.values).zip(&self.stderr) {
            writeln!(out, "{t:?},{y:?},{s:?}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub method: Method,
    pub slope: f64,
    pub window: (f64, f64),
    pub halfwidth: f64,
    pub samples: usize,
    pub seed: u64,
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::argument("time grid is empty"));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::argument("times must be finite and strictly increasing"));
    }
    if times[0] <= 0.0 {
        return Err(Error::argument("times must be positive"));
    }
    Ok(())
}

/// `t_max`-spaced uniform grid `t_max / count, 2 t_max / count, ..., t_max`.
pub fn uniform_grid(t_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0) || count == 0 {
        return Err(Error::argument("grid needs t_max > 0 and at least one point"));
    }
    Ok((1..=count).map(|i| t_max * i as f64 / count as f64).collect())
}

/// Mean and standard error of the mean.
fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Expansion of `Phi_theta(t_j)` at every grid time.
fn expansions_along(model: &Manifold, theta: &TangentState, times: &[f64], step: f64) -> Result<Vec<f64>> {
    propagate_jacobi_checkpoints(model, theta, times, step)?
        .iter()
        .map(|p| expansion(&p.phi))
        .collect()
}

/// Runs `f` on each sample in parallel and keeps results in sample order.
/// Integration failures are tolerated up to [`MAX_FAILURE_FRACTION`].
fn census<T, F>(thetas: &[TangentState], f: F) -> Result<(Vec<T>, usize)>
where
    T: Send,
    F: Fn(&TangentState) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = thetas.par_iter().map(&f).collect();
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut failures = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e @ Error::Integration { .. }) => {
                log::warn!("sample {i} failed: {e}");
                failures += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if failures as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::Estimator { failures, total });
    }
    Ok((ok, failures))
}

/// `y_j = log mean_theta ex(Phi_theta(t_j))` over `samples` Liouville-distributed
/// states. Space forms have a constant integrand and evaluate one state.
pub fn mane_series(model: &Manifold, times: &[f64], samples: usize, seed: u64, step: f64) -> Result<GrowthSeries> {
    if samples < MIN_SAMPLES {
        return Err(Error::argument(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    check_grid(times)?;
    if model.is_isotropic() {
        let theta = sample_sphere_bundle(model, 1, seed)?.remove(0);
        let ex = expansions_along(model, &theta, times, step)?;
        return GrowthSeries::new(
            Method::ManeIntegral,
            times.to_vec(),
            ex.iter().map(|e| e.ln()).collect(),
            vec![0.0; times.len()],
            samples,
            seed,
        );
    }
    mane_series_sampled(model, times, samples, seed, step)
}

/// As [`mane_series`], but always integrates every sample.
pub fn mane_series_sampled(model: &Manifold, times: &[f64], samples: usize, seed: u64, step: f64) -> Result<GrowthSeries> {
    if samples < MIN_SAMPLES {
        return Err(Error::argument(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    check_grid(times)?;
    let thetas = sample_sphere_bundle(model, samples, seed)?;
    let (rows, failures) = census(&thetas, |th| expansions_along(model, th, times, step))?;
    let mut values = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    for j in 0..times.len() {
        let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let (mean, se) = mean_stderr(&column);
        values.push(mean.ln());
        stderr.push(se / mean);
    }
    let mut series = GrowthSeries::new(Method::ManeIntegral, times.to_vec(), values, stderr, samples, seed)?;
    series.failures = failures;
    Ok(series)
}

/// Least-squares slope of `y` against `t` over the grid points inside
/// `window` (default `[t_max/3, t_max]`); the half-width is
/// [`CONFIDENCE_SIGMAS`] standard errors propagated from the pointwise errors.
pub fn slope(series: &GrowthSeries, window: Option<(f64, f64)>) -> Result<EntropyEstimate> {
    let (lo, hi) = window.unwrap_or_else(|| series.default_window());
    if !(lo < hi) {
        return Err(Error::argument(format!("empty window [{lo}, {hi}]")));
    }
    let eps = 1e-9 * hi.abs().max(1.0);
    let idx: Vec<usize> = (0..series.times.len())
        .filter(|&j| series.times[j] >= lo - eps && series.times[j] <= hi + eps)
        .collect();
    if idx.len() < MIN_WINDOW_POINTS {
        return Err(Error::argument(format!(
            "window [{lo}, {hi}] holds {} grid points, need {MIN_WINDOW_POINTS}",
            idx.len()
        )));
    }
    let k = idx.len() as f64;
    let t_mean = idx.iter().map(|&j| series.times[j]).sum::<f64>() / k;
    let y_mean = idx.iter().map(|&j| series.values[j]).sum::<f64>() / k;
    let stt: f64 = idx.iter().map(|&j| (series.times[j] - t_mean).powi(2)).sum();
    let sty: f64 = idx.iter().map(|&j| (series.times[j] - t_mean) * (series.values[j] - y_mean)).sum();
    let var: f64 = idx.iter().map(|&j| ((series.times[j] - t_mean) * series.stderr[j]).powi(2)).sum::<f64>() / (stt * stt);
    Ok(EntropyEstimate {
        method: series.method,
        slope: sty / stt,
        window: (lo, hi),
        halfwidth: CONFIDENCE_SIGMAS * var.sqrt(),
        samples: series.samples,
        seed: series.seed,
    })
}

/// Directions on the unit sphere at `x` with their quadrature weights (summing to the sphere's area).
fn direction_rule(model: &Manifold, x: &ChartPoint, count: usize, seed: u64) -> Result<(Vec<TangentState>, f64)> {
    if count == 0 {
        return Err(Error::argument("need at least one direction"));
    }
    let n = model.dim();
    // Area of the unit sphere S^{n-1}: 2 pi^{n/2} / Gamma(n/2).
    let area = 2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n);
    if n == 2 {
        let g = model.metric_at(x)?;
        let chol = g.cholesky().ok_or_else(|| Error::numeric("metric is not positive definite"))?;
        let lt = chol.l().transpose();
        let dirs = (0..count)
            .map(|k| {
                let phi = 2.0 * PI * (k as f64 + 0.5) / count as f64;
                let u = nalgebra::DVector::from_vec(vec![phi.cos(), phi.sin()]);
                let v = lt.solve_upper_triangular(&u).ok_or_else(|| Error::numeric("degenerate metric factor"))?;
                TangentState::new(model, x.clone(), v.iter().copied().collect())
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok((dirs, area / count as f64));
    }
    Ok((sample_directions_at(model, x, count, seed)?, area / count as f64))
}

/// `Gamma(n/2)` for positive integers `n`.
fn gamma_half(n: usize) -> f64 {
    if n % 2 == 0 {
        (1..n / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut a = 0.5;
        while a < n as f64 / 2.0 - 0.25 {
            g *= a;
            a += 1.0;
        }
        g
    }
}

/// Running trapezoid integral of `|det A_v(rho)|` along one direction,
/// reported at each of `times`.
fn radial_integrals(model: &Manifold, theta: &TangentState, times: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut integ = JacobiIntegrator::new(model, theta, None)?;
    let mut acc = 0.0;
    let mut prev = (0.0, 0.0);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        integ.advance_to(t, step, |it| {
            let now = (it.time(), it.exp_block_det());
            acc += 0.5 * (now.0 - prev.0) * (now.1 + prev.1);
            prev = now;
        })?;
        out.push(acc);
    }
    Ok(out)
}

/// Counting integrals `int_M n_T(x, y) dy` at every `T` in `times`, via the
/// radial Jacobian over `angular` directions at `x`. For `n = 2` directions
/// form a uniform angular rule; otherwise they are seeded random.
pub fn counting_series(
    model: &Manifold,
    x: &ChartPoint,
    times: &[f64],
    angular: usize,
    step: f64,
    seed: u64,
) -> Result<GrowthSeries> {
    check_grid(times)?;
    let (dirs, weight) = direction_rule(model, x, angular, seed)?;
    let (rows, failures) = census(&dirs, |th| radial_integrals(model, th, times, step))?;
    let sampled = model.dim() > 2;
    let mut values = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    for j in 0..times.len() {
        let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let (mean, se) = mean_stderr(&column);
        let total = mean * weight * angular as f64;
        if !(total > 0.0) {
            return Err(Error::numeric(format!("counting integral vanished at T = {}", times[j])));
        }
        if sampled && column.len() >= 4 {
            let (half, _) = mean_stderr(&column[..column.len() / 2]);
            let rel = (half - mean).abs() / mean;
            if rel > CONVERGENCE_TOLERANCE {
                log::warn!("T = {}: direction sampling not converged (half vs full differ by {rel:.3})", times[j]);
            }
        }
        values.push(total.ln());
        stderr.push(if sampled { se / mean } else { 0.0 });
    }
    let mut series = GrowthSeries::new(Method::CountingGrowth, times.to_vec(), values, stderr, angular, seed)?;
    series.failures = failures;
    Ok(series)
}

/// `int_M n_T(x, y) dy` for a single `T > 0`.
pub fn counting_integral(model: &Manifold, x: &ChartPoint, t: f64, angular: usize, step: f64, seed: u64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::argument(format!("T must be positive, got {t}")));
    }
    Ok(counting_series(model, x, &[t], angular, step, seed)?.values[0].exp())
}

/// Growth rate of the counting integral over the whole grid.
pub fn counting_growth(
    model: &Manifold,
    x: &ChartPoint,
    times: &[f64],
    angular: usize,
    step: f64,
    seed: u64,
) -> Result<EntropyEstimate> {
    let series = counting_series(model, x, times, angular, step, seed)?;
    slope(&series, Some((times[0], series.t_max())))
}

/// Number of geodesic arcs of length `<= t` between two points of the unit
/// 2-sphere at distance `d`: lengths `d + 2 pi k` and `2 pi - d + 2 pi k`.
pub fn sphere_arc_count(d: f64, t: f64) -> Result<u64> {
    if !(d > 0.0 && d < PI) {
        return Err(Error::argument(format!("distance must lie in (0, pi), got {d}")));
    }
    let count = |first: f64| if t < first { 0 } else { ((t - first) / (2.0 * PI)).floor() as u64 + 1 };
    Ok(count(d) + count(2.0 * PI - d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologicalLowerBound {
    pub value: f64,
    pub notes: Vec<String>,
}

/// `-sqrt(delta) log R / (pi sqrt(n - 1))`, the entropy lower bound for
/// metrics normalised to `r >= delta g`.
pub fn entropy_lower_from_topology(n: usize, delta: f64, r: f64) -> Result<TopologicalLowerBound> {
    if n < 2 {
        return Err(Error::argument(format!("dimension must be at least 2, got {n}")));
    }
    if !(delta > 0.0) {
        return Err(Error::argument(format!("delta must be positive, got {delta}")));
    }
    if !(r > 0.0) {
        return Err(Error::argument(format!("R must be positive, got {r}")));
    }
    let mut notes = Vec::new();
    if n == 2 {
        notes.push("simply connected surfaces are rationally elliptic; the bound is vacuous in dimension 2".into());
    }
    if r > 1.0 {
        notes.push(format!("R = {r} > 1 indicates rational ellipticity; bound clamped to 0"));
        return Ok(TopologicalLowerBound { value: 0.0, notes });
    }
    let value = -delta.sqrt() * r.ln() / (PI * (n as f64 - 1.0).sqrt());
    Ok(TopologicalLowerBound { value: value.max(0.0), notes })
}
