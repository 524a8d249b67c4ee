//! Model Riemannian manifolds evaluated through explicit coordinate charts.
//!
//! Every model carries one or more charts with closed-form metric jets. The
//! curvature operator `w -> R(w, v) v` is available in closed form for the
//! analytic kinds and through finite differences of the Christoffel symbols
//! otherwise (or when [`CurvatureMode::FiniteDifference`] is forced).
//!
//! The Liouville measure on the unit sphere bundle is left unnormalised:
//! positions are drawn from the Riemannian volume and directions uniformly,
//! and every downstream rate is a slope of logarithms.

mod chart;
mod extremal;
mod sampling;
mod spec;

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use chart::{
    ellipsoid_gauss_curvature, polar_to_stereo, stereo_flip, surface_jet, Chart, ConformalBlock,
    SurfaceParam,
};

pub use chart::MetricFn;
pub use extremal::{extremal_curvatures, sampled_extremal_curvatures, ExtremalCurvatures};
pub use sampling::{sample_directions_at, sample_sphere_bundle};
pub use spec::ModelSpec;

/// Central-difference step on metric entries and Christoffel symbols.
pub const FD_STEP: f64 = 1e-4;
/// Tolerance on `g(v, v) = 1` for states on the unit sphere bundle.
pub const UNIT_TOLERANCE: f64 = 1e-10;

/// Fraction of a chart's extent treated as the switching collar.
const COLLAR: f64 = 0.1;
/// Stereographic charts are used on `|y| < STEREO_EXTENT * radius`.
const STEREO_EXTENT: f64 = 1.5;
/// Poincare ball points with `1 - c|y|^2` below this are treated as leaving the chart.
const BALL_FLOOR: f64 = 1e-12;

/// Default period of the flat torus, giving injectivity radius `pi`.
pub const DEFAULT_TORUS_PERIOD: f64 = 2.0 * PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    RoundSphere { n: usize, radius: f64 },
    FlatTorus { periods: Vec<f64> },
    /// Constant sectional curvature `-curvature`, realised in one Poincare ball chart.
    Hyperbolic { n: usize, curvature: f64 },
    Ellipsoid { a: f64, b: f64, c: f64 },
    SphereProduct { p: usize, q: usize, r1: f64, r2: f64 },
    ChartMetric { n: usize },
}

/// How curvature is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurvatureMode {
    /// Closed forms where the model has them, finite differences otherwise.
    #[default]
    Auto,
    /// Finite differences of the Christoffel symbols for every model.
    FiniteDifference,
}

/// A point given in the coordinates of one of the model's charts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: usize,
    pub coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(chart: usize, coords: Vec<f64>) -> Self {
        ChartPoint { chart, coords }
    }
}

pub(crate) enum ChartStatus {
    Interior,
    SwitchTo(usize),
    Outside,
}

#[derive(Clone, Debug)]
pub struct Manifold {
    kind: ModelKind,
    n: usize,
    charts: Vec<Chart>,
    periods: Option<Vec<f64>>,
    domain: Option<(Vec<f64>, Vec<f64>)>,
    mode: CurvatureMode,
}

/// Christoffel symbols `Gamma^k_ij`, stored with `k` outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn contract(&self, v: &[f64], w: &[f64], out: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += self.data[(k * n + i) * n + j] * v[i] * w[j];
                }
            }
            out[k] = acc;
        }
    }
}

/// A point of the unit sphere bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentState {
    point: ChartPoint,
    v: Vec<f64>,
}

impl TangentState {
    /// Builds a state, normalising `v` to unit length in the metric at `point`.
    pub fn new(model: &Manifold, point: ChartPoint, v: Vec<f64>) -> Result<Self> {
        model.check_point(&point)?;
        if v.len() != model.dim() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::argument("tangent vector has wrong length or non-finite entries"));
        }
        let norm2 = model.inner(&point, &v, &v)?;
        if norm2 <= 0.0 {
            return Err(Error::argument("zero tangent vector"));
        }
        let scale = norm2.sqrt().recip();
        let v = v.iter().map(|x| x * scale).collect();
        Ok(TangentState { point, v })
    }

    pub fn point(&self) -> &ChartPoint {
        &self.point
    }

    pub fn velocity(&self) -> &[f64] {
        &self.v
    }

    /// Errors unless `g(v, v) = 1` within [`UNIT_TOLERANCE`].
    pub fn check_unit(&self, model: &Manifold) -> Result<()> {
        let drift = (model.inner(&self.point, &self.v, &self.v)? - 1.0).abs();
        if drift > UNIT_TOLERANCE {
            return Err(Error::argument(format!("state is off the unit sphere bundle by {drift:e}")));
        }
        Ok(())
    }
}

/// Eigen-decomposition of `w -> R(w, v) v` on the orthogonal complement of `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSpectrum {
    pub theta: TangentState,
    /// Sorted in decreasing order.
    pub eigenvalues: Vec<f64>,
    /// Chart components of the g-orthonormal eigenvectors, matching `eigenvalues`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl CurvatureSpectrum {
    pub fn ricci(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

fn sphere_charts(n: usize, radius: f64) -> Vec<Chart> {
    let block = ConformalBlock { start: 0, dim: n, kappa: 1.0 / (radius * radius), scale: 2.0 };
    let mut charts = vec![Chart::Conformal(vec![block]), Chart::Conformal(vec![block])];
    if n == 2 {
        charts.push(Chart::Surface { axes: [radius; 3], param: SurfaceParam::Polar });
    }
    charts
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::argument(format!("{name} must be positive and finite, got {x}")))
    }
}

impl Manifold {
    /// Round sphere `S^n` of the given radius. Charts 0 and 1 are stereographic
    /// projections from the north and south poles; for `n = 2` chart 2 holds
    /// polar angles `(rho, phi)` with metric `r^2 diag(1, sin^2 rho)`.
    pub fn round_sphere(n: usize, radius: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::argument("dimension must be at least 2"));
        }
        positive("radius", radius)?;
        Ok(Manifold {
            kind: ModelKind::RoundSphere { n, radius },
            n,
            charts: sphere_charts(n, radius),
            periods: None,
            domain: None,
            mode: CurvatureMode::Auto,
        })
    }

    pub fn flat_torus(periods: Vec<f64>) -> Result<Self> {
        let n = periods.len();
        if n < 2 {
            return Err(Error::argument("dimension must be at least 2"));
        }
        for &p in &periods {
            positive("period", p)?;
        }
        let block = ConformalBlock { start: 0, dim: n, kappa: 0.0, scale: 1.0 };
        Ok(Manifold {
            kind: ModelKind::FlatTorus { periods: periods.clone() },
            n,
            charts: vec![Chart::Conformal(vec![block])],
            periods: Some(periods),
            domain: None,
            mode: CurvatureMode::Auto,
        })
    }

    /// Constant curvature `-curvature` in the Poincare ball of radius `1/sqrt(curvature)`.
    pub fn hyperbolic(n: usize, curvature: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::argument("dimension must be at least 2"));
        }
        positive("curvature magnitude", curvature)?;
        let block = ConformalBlock { start: 0, dim: n, kappa: -curvature, scale: 2.0 };
        Ok(Manifold {
            kind: ModelKind::Hyperbolic { n, curvature },
            n,
            charts: vec![Chart::Conformal(vec![block])],
            periods: None,
            domain: None,
            mode: CurvatureMode::Auto,
        })
    }

    /// Ellipsoid with semi-axes `(a, b, c)` along the ambient coordinate axes.
    /// Charts: stereographic from `(0,0,c)`, from `(0,0,-c)`, and polar angles.
    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Result<Self> {
        let axes = [positive("a", a)?, positive("b", b)?, positive("c", c)?];
        let charts = [SurfaceParam::StereoNorth, SurfaceParam::StereoSouth, SurfaceParam::Polar]
            .into_iter()
            .map(|param| Chart::Surface { axes, param })
            .collect();
        Ok(Manifold {
            kind: ModelKind::Ellipsoid { a, b, c },
            n: 2,
            charts,
            periods: None,
            domain: None,
            mode: CurvatureMode::Auto,
        })
    }

    /// Riemannian product `S^p(r1) x S^q(r2)`. Chart `i` uses the north
    /// (bit clear) or south (bit set) stereographic chart on each factor,
    /// bit 0 for the first factor and bit 1 for the second.
    pub fn sphere_product(p: usize, q: usize, r1: f64, r2: f64) -> Result<Self> {
        if p < 1 || q < 1 || p + q < 2 {
            return Err(Error::argument("factor dimensions must be at least 1"));
        }
        positive("r1", r1)?;
        positive("r2", r2)?;
        let blocks = vec![
            ConformalBlock { start: 0, dim: p, kappa: 1.0 / (r1 * r1), scale: 2.0 },
            ConformalBlock { start: p, dim: q, kappa: 1.0 / (r2 * r2), scale: 2.0 },
        ];
        Ok(Manifold {
            kind: ModelKind::SphereProduct { p, q, r1, r2 },
            n: p + q,
            charts: vec![Chart::Conformal(blocks); 4],
            periods: None,
            domain: None,
            mode: CurvatureMode::Auto,
        })
    }

    /// A single chart with a user metric. `domain` bounds the chart as a box;
    /// `periods` makes the coordinates periodic instead. Curvature is always
    /// evaluated by finite differences.
    pub fn chart_metric(
        n: usize,
        metric: MetricFn,
        domain: Option<(Vec<f64>, Vec<f64>)>,
        periods: Option<Vec<f64>>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::argument("dimension must be at least 2"));
        }
        if let Some((lo, hi)) = &domain {
            if lo.len() != n || hi.len() != n || lo.iter().zip(hi).any(|(l, h)| l >= h) {
                return Err(Error::argument("chart domain must be a non-empty box of matching dimension"));
            }
        }
        if let Some(p) = &periods {
            if p.len() != n || p.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::argument("periods must be positive, one per coordinate"));
            }
        }
        Ok(Manifold {
            kind: ModelKind::ChartMetric { n },
            n,
            charts: vec![Chart::User { metric }],
            periods,
            domain,
            mode: CurvatureMode::Auto,
        })
    }

    /// Same model with every curvature evaluation forced through finite differences.
    pub fn with_curvature_mode(mut self, mode: CurvatureMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn chart_count(&self) -> usize {
        self.charts.len()
    }

    pub fn curvature_mode(&self) -> CurvatureMode {
        self.mode
    }

    /// True when curvature is given in closed form and not overridden.
    pub fn has_analytic_curvature(&self) -> bool {
        self.mode == CurvatureMode::Auto && !matches!(self.kind, ModelKind::ChartMetric { .. })
    }

    /// Isometry group acts transitively: curvature quantities depend on the
    /// direction only, never on the point.
    pub fn is_homogeneous(&self) -> bool {
        matches!(
            self.kind,
            ModelKind::RoundSphere { .. }
                | ModelKind::FlatTorus { .. }
                | ModelKind::Hyperbolic { .. }
                | ModelKind::SphereProduct { .. }
        )
    }

    /// Constant sectional curvature: every unit tangent vector is equivalent.
    pub fn is_isotropic(&self) -> bool {
        matches!(
            self.kind,
            ModelKind::RoundSphere { .. } | ModelKind::FlatTorus { .. } | ModelKind::Hyperbolic { .. }
        )
    }

    /// Constant sectional curvature, when the model has one.
    pub fn constant_curvature(&self) -> Option<f64> {
        match self.kind {
            ModelKind::RoundSphere { radius, .. } => Some(1.0 / (radius * radius)),
            ModelKind::FlatTorus { .. } => Some(0.0),
            ModelKind::Hyperbolic { curvature, .. } => Some(-curvature),
            _ => None,
        }
    }

    /// Base point used when homogeneity lets positions be fixed.
    pub fn base_point(&self) -> ChartPoint {
        let coords = match &self.domain {
            Some((lo, hi)) => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            None => vec![0.0; self.n],
        };
        ChartPoint::new(0, coords)
    }

    pub(crate) fn chart(&self, id: usize) -> Result<&Chart> {
        self.charts
            .get(id)
            .ok_or_else(|| Error::argument(format!("chart {id} does not exist")))
    }

    pub(crate) fn status(&self, chart: usize, y: &[f64]) -> ChartStatus {
        match (&self.kind, chart) {
            (ModelKind::RoundSphere { radius, .. }, 0 | 1) => stereo_status(y, *radius, 1 - chart),
            (ModelKind::RoundSphere { .. }, _) | (ModelKind::Ellipsoid { .. }, 2) => polar_status(y),
            (ModelKind::Ellipsoid { .. }, _) => stereo_status(y, 1.0, 1 - chart),
            (ModelKind::FlatTorus { .. }, _) => ChartStatus::Interior,
            (ModelKind::Hyperbolic { curvature, .. }, _) => {
                let s: f64 = y.iter().map(|a| a * a).sum();
                if 1.0 - curvature * s > BALL_FLOOR {
                    ChartStatus::Interior
                } else {
                    ChartStatus::Outside
                }
            }
            (ModelKind::SphereProduct { p, r1, r2, .. }, id) => {
                let mut flip = 0;
                for (bit, (part, r)) in [(&y[..*p], *r1), (&y[*p..], *r2)].into_iter().enumerate() {
                    match stereo_status(part, r, 0) {
                        ChartStatus::Outside => return ChartStatus::Outside,
                        ChartStatus::SwitchTo(_) => flip |= 1 << bit,
                        ChartStatus::Interior => {}
                    }
                }
                if flip == 0 {
                    ChartStatus::Interior
                } else {
                    ChartStatus::SwitchTo(id ^ flip)
                }
            }
            (ModelKind::ChartMetric { .. }, _) => match (&self.domain, &self.periods) {
                (Some((lo, hi)), None) => {
                    if y.iter().zip(lo.iter().zip(hi)).all(|(x, (l, h))| x > l && x < h) {
                        ChartStatus::Interior
                    } else {
                        ChartStatus::Outside
                    }
                }
                _ => ChartStatus::Interior,
            },
        }
    }

    /// Validates that `x` names an existing chart and lies in its domain.
    pub fn check_point(&self, x: &ChartPoint) -> Result<()> {
        self.chart(x.chart)?;
        if x.coords.len() != self.n || x.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::argument("chart point has wrong dimension or non-finite entries"));
        }
        match self.status(x.chart, &x.coords) {
            ChartStatus::Outside => Err(Error::Domain { chart: x.chart, coords: x.coords.clone() }),
            _ => Ok(()),
        }
    }

    fn wrap(&self, x: &mut ChartPoint) {
        if let Some(periods) = &self.periods {
            for (c, p) in x.coords.iter_mut().zip(periods) {
                *c = c.rem_euclid(*p);
            }
        }
        if let Some(Chart::Surface { param: SurfaceParam::Polar, .. }) = self.charts.get(x.chart) {
            x.coords[1] = x.coords[1].rem_euclid(2.0 * PI);
        }
    }

    /// Wraps periodic coordinates and moves the point into a chart where it
    /// is away from the boundary collar, transforming `vectors` alongside.
    pub(crate) fn recenter(&self, x: &mut ChartPoint, vectors: &mut [&mut [f64]]) -> Result<bool> {
        self.wrap(x);
        let mut switched = false;
        for _ in 0..4 {
            match self.status(x.chart, &x.coords) {
                ChartStatus::Interior => return Ok(switched),
                ChartStatus::Outside => {
                    return Err(Error::Domain { chart: x.chart, coords: x.coords.clone() })
                }
                ChartStatus::SwitchTo(to) => {
                    self.transition(x, to, vectors)?;
                    switched = true;
                }
            }
        }
        Ok(switched)
    }

    /// Re-expresses a point and tangent vectors in another chart of the model.
    pub fn express_in(&self, x: &ChartPoint, vectors: &[Vec<f64>], chart: usize) -> Result<(ChartPoint, Vec<Vec<f64>>)> {
        self.check_point(x)?;
        self.chart(chart)?;
        let mut point = x.clone();
        let mut vecs = vectors.to_vec();
        {
            let mut refs: Vec<&mut [f64]> = vecs.iter_mut().map(|v| v.as_mut_slice()).collect();
            self.transition(&mut point, chart, &mut refs)?;
        }
        self.check_point(&point)?;
        Ok((point, vecs))
    }

    fn transition(&self, x: &mut ChartPoint, to: usize, vectors: &mut [&mut [f64]]) -> Result<()> {
        let from = x.chart;
        if from == to {
            return Ok(());
        }
        match &self.kind {
            ModelKind::RoundSphere { radius, .. } => surface_transition(x, to, *radius, vectors),
            ModelKind::Ellipsoid { .. } => surface_transition(x, to, 1.0, vectors),
            ModelKind::SphereProduct { p, r1, r2, .. } => {
                let p = *p;
                for (bit, r) in [(0usize, *r1), (1usize, *r2)] {
                    if (from ^ to) & (1 << bit) == 0 {
                        continue;
                    }
                    let range = if bit == 0 { 0..p } else { p..self.n };
                    let mut subs: Vec<&mut [f64]> =
                        vectors.iter_mut().map(|v| &mut v[range.clone()]).collect();
                    stereo_flip(&mut x.coords[range.clone()], r, &mut subs);
                }
                x.chart = to;
                Ok(())
            }
            _ => Err(Error::argument(format!("model has no chart {to}"))),
        }
    }

    /// Embedding into Euclidean space for the compact embedded kinds
    /// (spheres, ellipsoids, products of spheres).
    pub fn to_ambient(&self, x: &ChartPoint) -> Option<Vec<f64>> {
        match &self.kind {
            ModelKind::RoundSphere { radius, .. } => Some(sphere_ambient(x, *radius)),
            ModelKind::Ellipsoid { a, b, c } => {
                let param = match x.chart {
                    0 => SurfaceParam::StereoNorth,
                    1 => SurfaceParam::StereoSouth,
                    _ => SurfaceParam::Polar,
                };
                Some(surface_jet([*a, *b, *c], param, &x.coords).point.to_vec())
            }
            ModelKind::SphereProduct { p, r1, r2, .. } => {
                let mut out = stereo_ambient(&x.coords[..*p], *r1, x.chart & 1 == 0);
                out.extend(stereo_ambient(&x.coords[*p..], *r2, x.chart & 2 == 0));
                Some(out)
            }
            _ => None,
        }
    }

    // ---- metric evaluation -------------------------------------------------

    /// The metric matrix `g(x)`.
    pub fn metric_at(&self, x: &ChartPoint) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let g = self.metric_raw(x.chart, &x.coords)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("metric has non-finite entries"));
        }
        Ok(g)
    }

    pub(crate) fn metric_raw(&self, chart: usize, y: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n;
        Ok(match self.chart(chart)? {
            Chart::Conformal(blocks) => {
                let mut g = DMatrix::zeros(n, n);
                for b in blocks {
                    let phi = b.factor(y);
                    for i in b.range() {
                        g[(i, i)] = phi * phi;
                    }
                }
                g
            }
            Chart::Surface { axes, param } => {
                let jet = surface_jet(*axes, *param, y);
                DMatrix::from_fn(2, 2, |i, j| (0..3).map(|m| jet.d[m][i] * jet.d[m][j]).sum())
            }
            Chart::User { metric } => {
                let g = metric(y);
                if g.nrows() != n || g.ncols() != n {
                    return Err(Error::numeric("user metric returned a matrix of the wrong size"));
                }
                g
            }
        })
    }

    /// `g_x(a, b)` without domain validation.
    pub(crate) fn inner_raw(&self, chart: usize, y: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
        match self.chart(chart)? {
            Chart::Conformal(blocks) => Ok(blocks
                .iter()
                .map(|blk| {
                    let phi = blk.factor(y);
                    phi * phi * blk.range().map(|i| a[i] * b[i]).sum::<f64>()
                })
                .sum()),
            _ => {
                let g = self.metric_raw(chart, y)?;
                let mut acc = 0.0;
                for i in 0..self.n {
                    for j in 0..self.n {
                        acc += g[(i, j)] * a[i] * b[j];
                    }
                }
                Ok(acc)
            }
        }
    }

    pub fn inner(&self, x: &ChartPoint, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.inner_raw(x.chart, &x.coords, a, b)
    }

    /// Central difference of `f` along coordinate `k`, Richardson-extrapolated once.
    fn richardson<F>(&self, y: &[f64], k: usize, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>>,
    {
        let diff = |h: f64| -> Result<Vec<f64>> {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[k] += h;
            ym[k] -= h;
            let fp = f(&yp)?;
            let fm = f(&ym)?;
            Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        };
        let coarse = diff(FD_STEP)?;
        let fine = diff(0.5 * FD_STEP)?;
        Ok(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect())
    }

    fn christoffel_raw(&self, chart: usize, y: &[f64]) -> Result<Christoffel> {
        let n = self.n;
        let mut data = vec![0.0; n * n * n];
        let idx = |k: usize, i: usize, j: usize| (k * n + i) * n + j;
        match self.chart(chart)? {
            Chart::Conformal(blocks) => {
                for b in blocks {
                    let grad: Vec<f64> = b.range().map(|k| b.dlog_factor(y, k)).collect();
                    let off = b.start;
                    for k in b.range() {
                        for i in b.range() {
                            for j in b.range() {
                                let mut val = 0.0;
                                if i == k {
                                    val += grad[j - off];
                                }
                                if j == k {
                                    val += grad[i - off];
                                }
                                if i == j {
                                    val -= grad[k - off];
                                }
                                data[idx(k, i, j)] = val;
                            }
                        }
                    }
                }
            }
            Chart::Surface { axes, param } => {
                let jet = surface_jet(*axes, *param, y);
                let g = DMatrix::from_fn(2, 2, |i, j| (0..3).map(|m| jet.d[m][i] * jet.d[m][j]).sum::<f64>());
                let ginv = g.try_inverse().ok_or_else(|| Error::numeric("singular metric"))?;
                for i in 0..2 {
                    for j in 0..2 {
                        let first: Vec<f64> =
                            (0..2).map(|l| (0..3).map(|m| jet.dd[m][i][j] * jet.d[m][l]).sum()).collect();
                        for k in 0..2 {
                            data[idx(k, i, j)] = ginv[(k, 0)] * first[0] + ginv[(k, 1)] * first[1];
                        }
                    }
                }
            }
            Chart::User { .. } => {
                let g = self.metric_raw(chart, y)?;
                let ginv = invert_metric(&g)?;
                let dg: Vec<Vec<f64>> = (0..n)
                    .map(|k| {
                        self.richardson(y, k, |z| Ok(self.metric_raw(chart, z)?.as_slice().to_vec()))
                    })
                    .collect::<Result<_>>()?;
                // column-major n x n
                let dgk = |k: usize, i: usize, j: usize| dg[k][j * n + i];
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            let mut acc = 0.0;
                            for l in 0..n {
                                acc += ginv[(k, l)] * (dgk(i, j, l) + dgk(j, i, l) - dgk(l, i, j));
                            }
                            data[idx(k, i, j)] = 0.5 * acc;
                        }
                    }
                }
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite Christoffel symbols"));
        }
        Ok(Christoffel { n, data })
    }

    /// Christoffel symbols of the Levi-Civita connection at `x`.
    pub fn christoffel_at(&self, x: &ChartPoint) -> Result<Christoffel> {
        self.check_point(x)?;
        let g = self.metric_raw(x.chart, &x.coords)?;
        invert_metric(&g)?;
        self.christoffel_raw(x.chart, &x.coords)
    }

    /// `out^k = Gamma^k_ij v^i w^j`.
    pub(crate) fn connection(&self, chart: usize, y: &[f64], v: &[f64], w: &[f64], out: &mut [f64]) -> Result<()> {
        match self.chart(chart)? {
            Chart::Conformal(blocks) => {
                for b in blocks {
                    let denom = 1.0 + b.kappa * b.sq_norm(y);
                    let c = -2.0 * b.kappa / denom;
                    let (mut fv, mut fw, mut vw) = (0.0, 0.0, 0.0);
                    for i in b.range() {
                        fv += c * y[i] * v[i];
                        fw += c * y[i] * w[i];
                        vw += v[i] * w[i];
                    }
                    for k in b.range() {
                        out[k] = fv * w[k] + fw * v[k] - vw * c * y[k];
                    }
                }
                Ok(())
            }
            _ => {
                self.christoffel_raw(chart, y)?.contract(v, w, out);
                Ok(())
            }
        }
    }

    /// Riemann tensor `R^l_ijk` (index order `l, i, j, k`) from finite
    /// differences of the Christoffel symbols.
    fn riemann_fd(&self, chart: usize, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let gamma = self.christoffel_raw(chart, y)?;
        let dgamma: Vec<Vec<f64>> = (0..n)
            .map(|i| self.richardson(y, i, |z| Ok(self.christoffel_raw(chart, z)?.data)))
            .collect::<Result<_>>()?;
        let g = |k: usize, i: usize, j: usize| gamma.data[(k * n + i) * n + j];
        let dg = |d: usize, k: usize, i: usize, j: usize| dgamma[d][(k * n + i) * n + j];
        let mut r = vec![0.0; n * n * n * n];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut val = dg(i, l, j, k) - dg(j, l, i, k);
                        for m in 0..n {
                            val += g(l, i, m) * g(m, j, k) - g(l, j, m) * g(m, i, k);
                        }
                        r[((l * n + i) * n + j) * n + k] = val;
                    }
                }
            }
        }
        Ok(r)
    }

    /// Fills `out` (row-major `m x m`, `m = frame.len() / n`) with
    /// `K_ij = g(R(E_i, v) v, E_j)` for the frame vectors `E_i` stored
    /// consecutively in `frame`.
    pub(crate) fn curvature_matrix(
        &self,
        chart: usize,
        y: &[f64],
        v: &[f64],
        frame: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let n = self.n;
        let m = frame.len() / n;
        let e = |i: usize| &frame[i * n..(i + 1) * n];
        if self.mode == CurvatureMode::Auto {
            match self.chart(chart)? {
                Chart::Conformal(blocks) => {
                    for slot in out.iter_mut().take(m * m) {
                        *slot = 0.0;
                    }
                    for b in blocks {
                        if b.kappa == 0.0 {
                            continue;
                        }
                        let phi2 = b.factor(y).powi(2);
                        let dot = |a: &[f64], c: &[f64]| phi2 * b.range().map(|k| a[k] * c[k]).sum::<f64>();
                        let vv = dot(v, v);
                        for i in 0..m {
                            let ve = dot(v, e(i));
                            for j in 0..m {
                                out[i * m + j] += b.kappa * (vv * dot(e(i), e(j)) - ve * dot(v, e(j)));
                            }
                        }
                    }
                    return Ok(());
                }
                Chart::Surface { axes, param } => {
                    let jet = surface_jet(*axes, *param, y);
                    let kg = ellipsoid_gauss_curvature(*axes, jet.point);
                    let g = DMatrix::from_fn(2, 2, |i, j| (0..3).map(|q| jet.d[q][i] * jet.d[q][j]).sum::<f64>());
                    let dot = |a: &[f64], c: &[f64]| {
                        (0..2).map(|i| (0..2).map(|j| g[(i, j)] * a[i] * c[j]).sum::<f64>()).sum::<f64>()
                    };
                    let vv = dot(v, v);
                    for i in 0..m {
                        for j in 0..m {
                            out[i * m + j] = kg * (vv * dot(e(i), e(j)) - dot(v, e(i)) * dot(v, e(j)));
                        }
                    }
                    return Ok(());
                }
                Chart::User { .. } => {}
            }
        }
        let r = self.riemann_fd(chart, y)?;
        let g = self.metric_raw(chart, y)?;
        let mut rv = vec![0.0; n];
        for i in 0..m {
            let ei = e(i);
            for (l, slot) in rv.iter_mut().enumerate() {
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            acc += r[((l * n + a) * n + b) * n + c] * ei[a] * v[b] * v[c];
                        }
                    }
                }
                *slot = acc;
            }
            for j in 0..m {
                let ej = e(j);
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        acc += g[(a, b)] * rv[a] * ej[b];
                    }
                }
                out[i * m + j] = acc;
            }
        }
        Ok(())
    }

    /// g-orthonormal basis of the complement of the unit vector `v`, stored
    /// consecutively (`(n-1) * n` entries).
    pub(crate) fn complement_frame(&self, chart: usize, y: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let mut basis: Vec<Vec<f64>> = vec![v.to_vec()];
        let mut candidates: Vec<usize> = (0..n).collect();
        // prefer coordinate directions least aligned with v
        let g = self.metric_raw(chart, y)?;
        candidates.sort_by(|&a, &b| {
            let ca = (0..n).map(|j| g[(a, j)] * v[j]).sum::<f64>().abs() / g[(a, a)].sqrt();
            let cb = (0..n).map(|j| g[(b, j)] * v[j]).sum::<f64>().abs() / g[(b, b)].sqrt();
            ca.total_cmp(&cb)
        });
        for c in candidates {
            if basis.len() == n {
                break;
            }
            let mut w = vec![0.0; n];
            w[c] = 1.0;
            let w = self.orthonormalize_against(chart, y, &w, &basis)?;
            if let Some(w) = w {
                basis.push(w);
            }
        }
        if basis.len() != n {
            return Err(Error::numeric("could not complete an orthonormal frame"));
        }
        Ok(basis.into_iter().skip(1).flatten().collect())
    }

    /// Two passes of Gram-Schmidt against `basis`; `None` when `w` is
    /// numerically dependent on it.
    pub(crate) fn orthonormalize_against(
        &self,
        chart: usize,
        y: &[f64],
        w: &[f64],
        basis: &[Vec<f64>],
    ) -> Result<Option<Vec<f64>>> {
        let mut w = w.to_vec();
        let start = self.inner_raw(chart, y, &w, &w)?.sqrt();
        for _ in 0..2 {
            for b in basis {
                let c = self.inner_raw(chart, y, &w, b)?;
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let norm = self.inner_raw(chart, y, &w, &w)?.sqrt();
        if norm <= 1e-8 * start {
            return Ok(None);
        }
        Ok(Some(w.iter().map(|x| x / norm).collect()))
    }

    /// Eigen-decomposition of `w -> R(w, v) v` on `v`'s orthogonal complement.
    pub fn curvature_operator(&self, theta: &TangentState) -> Result<CurvatureSpectrum> {
        theta.check_unit(self)?;
        let x = theta.point();
        let v = theta.velocity();
        let n = self.n;
        let m = n - 1;
        let frame = self.complement_frame(x.chart, &x.coords, v)?;
        let mut kmat = vec![0.0; m * m];
        self.curvature_matrix(x.chart, &x.coords, v, &frame, &mut kmat)?;
        let k = DMatrix::from_row_slice(m, m, &kmat);
        let k = crate::linalg::symmetrize(&k);
        if k.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric("non-finite curvature"));
        }
        let eig = SymmetricEigen::new(k);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues = order.iter().map(|&a| eig.eigenvalues[a]).collect();
        let eigenvectors = order
            .iter()
            .map(|&a| {
                let mut vec = vec![0.0; n];
                for i in 0..m {
                    let coef = eig.eigenvectors[(i, a)];
                    for c in 0..n {
                        vec[c] += coef * frame[i * n + c];
                    }
                }
                vec
            })
            .collect();
        Ok(CurvatureSpectrum { theta: theta.clone(), eigenvalues, eigenvectors })
    }

    /// Ricci curvature `r(v)`, the trace of the curvature operator.
    pub fn ricci(&self, theta: &TangentState) -> Result<f64> {
        Ok(self.curvature_operator(theta)?.ricci())
    }

    /// Sectional curvature of the plane spanned by `v` and `w` at `x`.
    pub fn sectional_curvature(&self, x: &ChartPoint, v: &[f64], w: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let vv = self.inner_raw(x.chart, &x.coords, v, v)?;
        if vv <= 0.0 {
            return Err(Error::argument("zero vector spans no plane"));
        }
        let vn: Vec<f64> = v.iter().map(|a| a / vv.sqrt()).collect();
        let e = self
            .orthonormalize_against(x.chart, &x.coords, w, std::slice::from_ref(&vn))?
            .ok_or_else(|| Error::argument("vectors do not span a plane"))?;
        let mut out = [0.0];
        self.curvature_matrix(x.chart, &x.coords, &vn, &e, &mut out)?;
        Ok(out[0])
    }
}

fn invert_metric(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = g.amax();
    let det = g.determinant();
    if !(det.abs() > 1e-14 * scale.powi(g.nrows() as i32)) {
        return Err(Error::numeric("singular metric"));
    }
    g.clone().try_inverse().ok_or_else(|| Error::numeric("singular metric"))
}

fn stereo_status(y: &[f64], radius: f64, other: usize) -> ChartStatus {
    let s = y.iter().map(|a| a * a).sum::<f64>().sqrt() / radius;
    if !(s < STEREO_EXTENT) {
        ChartStatus::Outside
    } else if s > (1.0 - COLLAR) * STEREO_EXTENT {
        ChartStatus::SwitchTo(other)
    } else {
        ChartStatus::Interior
    }
}

fn polar_status(y: &[f64]) -> ChartStatus {
    let rho = y[0];
    if !(rho > 0.0 && rho < PI) {
        ChartStatus::Outside
    } else if rho < COLLAR * PI {
        // near (0,0,c): the south-pole projection is regular there
        ChartStatus::SwitchTo(1)
    } else if rho > (1.0 - COLLAR) * PI {
        ChartStatus::SwitchTo(0)
    } else {
        ChartStatus::Interior
    }
}

/// Unit-sphere stereographic inverse: north chart projects from `+e_{n+1}`.
fn stereo_unit_point(u: &[f64], north: bool) -> Vec<f64> {
    let s: f64 = u.iter().map(|a| a * a).sum();
    let mut p: Vec<f64> = u.iter().map(|a| 2.0 * a / (1.0 + s)).collect();
    let last = (s - 1.0) / (s + 1.0);
    p.push(if north { last } else { -last });
    p
}

fn stereo_ambient(y: &[f64], radius: f64, north: bool) -> Vec<f64> {
    let u: Vec<f64> = y.iter().map(|a| a / radius).collect();
    stereo_unit_point(&u, north).into_iter().map(|a| a * radius).collect()
}

fn sphere_ambient(x: &ChartPoint, radius: f64) -> Vec<f64> {
    match x.chart {
        0 | 1 => stereo_ambient(&x.coords, radius, x.chart == 0),
        _ => {
            let (sr, cr) = x.coords[0].sin_cos();
            let (sp, cp) = x.coords[1].sin_cos();
            vec![radius * sr * cp, radius * sr * sp, radius * cr]
        }
    }
}

/// Chart changes among {north stereo, south stereo, polar} for spheres
/// (stereo coordinates scaled by `scale`) and ellipsoids (`scale = 1`).
fn surface_transition(x: &mut ChartPoint, to: usize, scale: f64, vectors: &mut [&mut [f64]]) -> Result<()> {
    let from = x.chart;
    match (from, to) {
        (0, 1) | (1, 0) => stereo_flip(&mut x.coords, scale, vectors),
        (2, 0 | 1) => {
            let (u, jac) = polar_to_stereo(x.coords[0], x.coords[1], to == 0);
            for v in vectors.iter_mut() {
                let (a, b) = (v[0], v[1]);
                v[0] = scale * (jac[0][0] * a + jac[0][1] * b);
                v[1] = scale * (jac[1][0] * a + jac[1][1] * b);
            }
            x.coords = vec![scale * u[0], scale * u[1]];
        }
        (0 | 1, 2) => {
            if x.coords.len() != 2 {
                return Err(Error::argument("polar chart exists only in dimension 2"));
            }
            let u = [x.coords[0] / scale, x.coords[1] / scale];
            let p = stereo_unit_point(&u, from == 0);
            let rho = p[2].clamp(-1.0, 1.0).acos();
            let phi = p[1].atan2(p[0]);
            let (_, jac) = polar_to_stereo(rho, phi, from == 0);
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det.abs() < 1e-300 || !(rho > 0.0 && rho < PI) {
                return Err(Error::Domain { chart: 2, coords: vec![rho, phi] });
            }
            for v in vectors.iter_mut() {
                let (a, b) = (v[0] / scale, v[1] / scale);
                v[0] = (jac[1][1] * a - jac[0][1] * b) / det;
                v[1] = (-jac[1][0] * a + jac[0][0] * b) / det;
            }
            x.coords = vec![rho, phi];
        }
        _ => return Err(Error::argument(format!("model has no chart {to}"))),
    }
    x.chart = to;
    Ok(())
}
