//! Extremal sectional and Ricci curvatures.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sampling::{sample_orthogonal, sample_positions};
use super::{ChartStatus, Manifold, ModelKind};
use crate::error::{Error, Result};

/// Relative widening applied to sampled extremes so they remain valid bounds.
pub const SAMPLED_INFLATION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremalCurvatures {
    pub k_max: f64,
    pub k_min: f64,
    pub min_ricci: f64,
    /// Closed-form values rather than sampled estimates.
    pub exact: bool,
}

/// `(K_max, K_min, min r)` over the unit sphere bundle. Closed forms for the
/// analytic kinds; the sampled search otherwise.
pub fn extremal_curvatures(model: &Manifold, sample_count: usize, seed: u64) -> Result<ExtremalCurvatures> {
    if sample_count == 0 {
        return Err(Error::argument("sample count must be at least 1"));
    }
    if !model.has_analytic_curvature() {
        return sampled_extremal_curvatures(model, sample_count, seed);
    }
    let n = model.dim() as f64;
    let exact = |k_max: f64, k_min: f64, min_ricci: f64| ExtremalCurvatures { k_max, k_min, min_ricci, exact: true };
    Ok(match *model.kind() {
        ModelKind::RoundSphere { radius, .. } => {
            let k = 1.0 / (radius * radius);
            exact(k, k, k * (n - 1.0))
        }
        ModelKind::FlatTorus { .. } => exact(0.0, 0.0, 0.0),
        ModelKind::Hyperbolic { curvature, .. } => exact(-curvature, -curvature, -curvature * (n - 1.0)),
        ModelKind::Ellipsoid { a, b, c } => {
            // Gauss curvature is extremal at the six vertices: K(a e_1) = a^2/(b^2 c^2), etc.
            let vertex = [a * a / (b * b * c * c), b * b / (a * a * c * c), c * c / (a * a * b * b)];
            let k_max = vertex.iter().copied().fold(f64::MIN, f64::max);
            let k_min = vertex.iter().copied().fold(f64::MAX, f64::min);
            exact(k_max, k_min, k_min)
        }
        ModelKind::SphereProduct { p, q, r1, r2 } => {
            let k1 = 1.0 / (r1 * r1);
            let k2 = 1.0 / (r2 * r2);
            let mut k_max = 0.0f64;
            if p >= 2 {
                k_max = k_max.max(k1);
            }
            if q >= 2 {
                k_max = k_max.max(k2);
            }
            // Ricci along cos(a) u1 + sin(a) u2 is k1 (p-1) cos^2 a + k2 (q-1) sin^2 a.
            let min_ricci = (k1 * (p as f64 - 1.0)).min(k2 * (q as f64 - 1.0));
            exact(k_max, 0.0, min_ricci)
        }
        ModelKind::ChartMetric { .. } => unreachable!("chart metrics have no closed-form curvature"),
    })
}

struct Probe<'a> {
    model: &'a Manifold,
    chart: usize,
}

impl Probe<'_> {
    /// Vectors with frame coefficients `coefs` at `y`, via `v = L^{-T} a`.
    fn frame_vectors(&self, g: &DMatrix<f64>, coefs: &[&[f64]]) -> Option<Vec<Vec<f64>>> {
        let chol = g.clone().cholesky()?;
        let lt = chol.l().transpose();
        coefs
            .iter()
            .map(|a| {
                let z = nalgebra::DVector::from_column_slice(a);
                lt.solve_upper_triangular(&z).map(|v| v.iter().copied().collect())
            })
            .collect()
    }

    fn unit(&self, y: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        let nrm = self.model.inner_raw(self.chart, y, v, v).ok()?.sqrt();
        (nrm > 1e-12).then(|| v.iter().map(|a| a / nrm).collect())
    }

    fn inside(&self, y: &[f64]) -> bool {
        !matches!(self.model.status(self.chart, y), ChartStatus::Outside)
    }

    fn sectional(&self, params: &[f64]) -> Option<f64> {
        let n = self.model.dim();
        let (y, rest) = params.split_at(n);
        if !self.inside(y) {
            return None;
        }
        let g = self.model.metric_raw(self.chart, y).ok()?;
        let vecs = self.frame_vectors(&g, &[&rest[..n], &rest[n..]])?;
        let v = self.unit(y, &vecs[0])?;
        let e = self.model.orthonormalize_against(self.chart, y, &vecs[1], &[v.clone()]).ok()??;
        let mut out = [0.0];
        self.model.curvature_matrix(self.chart, y, &v, &e, &mut out).ok()?;
        out[0].is_finite().then_some(out[0])
    }

    fn ricci(&self, params: &[f64]) -> Option<f64> {
        let n = self.model.dim();
        let (y, a) = params.split_at(n);
        if !self.inside(y) {
            return None;
        }
        let g = self.model.metric_raw(self.chart, y).ok()?;
        let vecs = self.frame_vectors(&g, &[a])?;
        let v = self.unit(y, &vecs[0])?;
        let frame = self.model.complement_frame(self.chart, y, &v).ok()?;
        let m = n - 1;
        let mut k = vec![0.0; m * m];
        self.model.curvature_matrix(self.chart, y, &v, &frame, &mut k).ok()?;
        let tr: f64 = (0..m).map(|i| k[i * m + i]).sum();
        tr.is_finite().then_some(tr)
    }
}

/// Coordinate ascent with shrinking steps on `f`; returns the best value found.
fn coordinate_ascent<F: Fn(&[f64]) -> Option<f64>>(f: F, start: Vec<f64>, maximize: bool) -> Option<f64> {
    let sign = if maximize { 1.0 } else { -1.0 };
    let mut x = start;
    let mut best = sign * f(&x)?;
    let mut step = 0.05;
    let mut evals = 0;
    while step > 1e-7 && evals < 20_000 {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut trial = x.clone();
                trial[i] += dir * step;
                evals += 1;
                if let Some(val) = f(&trial) {
                    if sign * val > best {
                        best = sign * val;
                        x = trial;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Some(sign * best)
}

/// Sampled search: `10 * sample_count` random 2-planes, the extreme 1%
/// refined by coordinate ascent, results widened by [`SAMPLED_INFLATION`]
/// so that `k_max` errs upward and `k_min`, `min_ricci` err downward.
pub fn sampled_extremal_curvatures(model: &Manifold, sample_count: usize, seed: u64) -> Result<ExtremalCurvatures> {
    if sample_count == 0 {
        return Err(Error::argument("sample count must be at least 1"));
    }
    let n = model.dim();
    let total = 10 * sample_count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = sample_positions(model, total, &mut rng)?;

    struct Plane {
        chart: usize,
        params: Vec<f64>,
        sectional: f64,
        ricci: f64,
    }
    let mut planes = Vec::with_capacity(total);
    for theta in &states {
        let x = theta.point();
        let w = sample_orthogonal(model, theta, &mut rng)?;
        let g = model.metric_raw(x.chart, &x.coords)?;
        let lt = g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::numeric("metric is not positive definite"))?
            .l()
            .transpose();
        let coef = |v: &[f64]| -> Vec<f64> { (&lt * nalgebra::DVector::from_column_slice(v)).iter().copied().collect() };
        let mut params = x.coords.clone();
        params.extend(coef(theta.velocity()));
        params.extend(coef(&w));
        let probe = Probe { model, chart: x.chart };
        let sectional = probe.sectional(&params).ok_or_else(|| Error::numeric("curvature evaluation failed"))?;
        let ricci = probe.ricci(&params[..2 * n]).ok_or_else(|| Error::numeric("curvature evaluation failed"))?;
        planes.push(Plane { chart: x.chart, params, sectional, ricci });
    }

    let keep = (total / 100).max(1);
    let mut order: Vec<usize> = (0..total).collect();

    order.sort_by(|&a, &b| planes[b].sectional.total_cmp(&planes[a].sectional));
    let mut k_max = planes[order[0]].sectional;
    for &i in &order[..keep] {
        let probe = Probe { model, chart: planes[i].chart };
        if let Some(v) = coordinate_ascent(|p| probe.sectional(p), planes[i].params.clone(), true) {
            k_max = k_max.max(v);
        }
    }
    let mut k_min = planes[order[total - 1]].sectional;
    for &i in order.iter().rev().take(keep) {
        let probe = Probe { model, chart: planes[i].chart };
        if let Some(v) = coordinate_ascent(|p| probe.sectional(p), planes[i].params.clone(), false) {
            k_min = k_min.min(v);
        }
    }
    order.sort_by(|&a, &b| planes[a].ricci.total_cmp(&planes[b].ricci));
    let mut min_ricci = planes[order[0]].ricci;
    for &i in &order[..keep] {
        let probe = Probe { model, chart: planes[i].chart };
        if let Some(v) = coordinate_ascent(|p| probe.ricci(p), planes[i].params[..2 * n].to_vec(), false) {
            min_ricci = min_ricci.min(v);
        }
    }

    Ok(ExtremalCurvatures {
        k_max: k_max + SAMPLED_INFLATION * k_max.abs(),
        k_min: k_min - SAMPLED_INFLATION * k_min.abs(),
        min_ricci: min_ricci - SAMPLED_INFLATION * min_ricci.abs(),
        exact: false,
    })
}
