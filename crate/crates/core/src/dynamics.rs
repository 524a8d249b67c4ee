//! Geodesics, parallel frames and the Jacobi system along them.
//!
//! `propagate_jacobi` co-integrates the geodesic, a parallel orthonormal
//! frame `E_1..E_{n-1}` of the complement of the velocity, and the
//! fundamental matrix of `a'' = -K(t) a` with `K_ij = <R(E_i, c') c', E_j>`.
//! In the coordinates `{(E_i, 0), (0, E_i)}` that matrix is the differential
//! of the geodesic flow restricted to the invariant subspace transverse to
//! the flow direction and its vertical partner.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::singular_values;
use crate::manifold::{ChartPoint, Manifold, TangentState};

pub const DEFAULT_STEP: f64 = 1e-3;
/// The parallel frame is re-orthonormalised this often (in steps).
pub const REORTHONORMALIZE_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub t: f64,
    pub point: ChartPoint,
    pub velocity: Vec<f64>,
    /// `|g(v, v) - 1|` at this state.
    pub speed_drift: f64,
}

/// Result of co-integrating the Jacobi system along `c_theta` up to time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiPropagation {
    pub theta: TangentState,
    pub t: f64,
    pub state: GeodesicState,
    /// Parallel orthonormal frame of the velocity complement at time `t`.
    pub frame: Vec<Vec<f64>>,
    /// `2(n-1) x 2(n-1)` fundamental matrix; identity at `t = 0`.
    pub phi: DMatrix<f64>,
    /// Largest Gram-matrix deviation of `{c', E_i}` seen before any re-orthonormalisation.
    pub frame_drift: f64,
}

impl JacobiPropagation {
    /// Block `A(t)` with `J(0) = 0, J'(0) = E_i` columns: upper-right `(n-1) x (n-1)` block.
    pub fn exp_block(&self) -> DMatrix<f64> {
        let m = self.phi.nrows() / 2;
        self.phi.view((0, m), (m, m)).into_owned()
    }

    /// State of the flow at time `t` as a point of the unit sphere bundle.
    pub fn end_state(&self, model: &Manifold) -> Result<TangentState> {
        TangentState::new(model, self.state.point.clone(), self.state.velocity.clone())
    }
}

struct Rk4 {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(len: usize) -> Self {
        Rk4 { k: std::array::from_fn(|_| vec![0.0; len]), tmp: vec![0.0; len] }
    }

    fn step<F>(&mut self, x: &mut [f64], h: f64, mut f: F) -> Result<()>
    where
        F: FnMut(&[f64], &mut [f64]) -> Result<()>,
    {
        let [k1, k2, k3, k4] = &mut self.k;
        f(x, k1)?;
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        f(&self.tmp, k2)?;
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        f(&self.tmp, k3)?;
        for i in 0..x.len() {
            self.tmp[i] = x[i] + h * k3[i];
        }
        f(&self.tmp, k4)?;
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|a| !a.is_finite()) {
            return Err(Error::numeric("integration produced non-finite state"));
        }
        Ok(())
    }
}

fn check_step(t_end: f64, step: f64) -> Result<()> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::argument(format!("step must be positive, got {step}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::argument(format!("end time must be non-negative, got {t_end}")));
    }
    Ok(())
}

/// Number of uniform substeps no longer than `step` covering `span`.
fn substeps(span: f64, step: f64) -> usize {
    if span <= 0.0 {
        0
    } else {
        ((span / step) - 1e-9).ceil().max(1.0) as usize
    }
}

fn integration_error(t: f64, chart: usize, y: &[f64], v: &[f64], err: Error) -> Error {
    Error::Integration {
        t,
        last_point: ChartPoint::new(chart, y.to_vec()),
        last_velocity: v.to_vec(),
        reason: err.to_string(),
    }
}

/// Geodesic through `theta` at time `t_end`, by classical RK4 with chart switching.
pub fn integrate_geodesic(model: &Manifold, theta: &TangentState, t_end: f64, step: f64) -> Result<GeodesicState> {
    let mut last = None;
    geodesic_trajectory(model, theta, t_end, step, usize::MAX, |s| last = Some(s))?;
    Ok(last.expect("trajectory always reports its final state"))
}

/// Integrates the geodesic and reports the state every `every` steps and at the end.
pub fn geodesic_trajectory<F>(
    model: &Manifold,
    theta: &TangentState,
    t_end: f64,
    step: f64,
    every: usize,
    mut report: F,
) -> Result<()>
where
    F: FnMut(GeodesicState),
{
    check_step(t_end, step)?;
    theta.check_unit(model)?;
    let n = model.dim();
    let mut chart = theta.point().chart;
    let mut state: Vec<f64> = theta.point().coords.iter().chain(theta.velocity()).copied().collect();
    let mut rk = Rk4::new(2 * n);
    let steps = substeps(t_end, step);
    let h = if steps > 0 { t_end / steps as f64 } else { 0.0 };
    let snapshot = |t: f64, chart: usize, state: &[f64]| -> Result<GeodesicState> {
        let point = ChartPoint::new(chart, state[..n].to_vec());
        let velocity = state[n..].to_vec();
        let speed_drift = (model.inner_raw(chart, &point.coords, &velocity, &velocity)? - 1.0).abs();
        Ok(GeodesicState { t, point, velocity, speed_drift })
    };
    report(snapshot(0.0, chart, &state)?);
    for i in 0..steps {
        let t = i as f64 * h;
        let before = state.clone();
        let advanced = rk
            .step(&mut state, h, |s, out| {
                let (y, v) = s.split_at(n);
                out[..n].copy_from_slice(v);
                model.connection(chart, y, v, v, &mut out[n..])?;
                for a in &mut out[n..] {
                    *a = -*a;
                }
                Ok(())
            })
            .and_then(|_| {
                let (y, v) = state.split_at_mut(n);
                let mut point = ChartPoint::new(chart, y.to_vec());
                model.recenter(&mut point, &mut [v])?;
                y.copy_from_slice(&point.coords);
                chart = point.chart;
                Ok(())
            });
        if let Err(e) = advanced {
            return Err(integration_error(t, chart, &before[..n], &before[n..], e));
        }
        if (i + 1) % every == 0 && i + 1 != steps {
            report(snapshot((i + 1) as f64 * h, chart, &state)?);
        }
    }
    if steps > 0 {
        report(snapshot(t_end, chart, &state)?);
    }
    Ok(())
}

/// Writes `t, chart, x_1..x_n, v_1..v_n` rows.
pub fn write_trajectory_csv<W: Write>(mut out: W, states: &[GeodesicState]) -> std::io::Result<()> {
    let n = states.first().map_or(0, |s| s.point.coords.len());
    let mut header = vec!["t".to_string(), "chart".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("v{i}")));
    writeln!(out, "{}", header.join(","))?;
    for s in states {
        let mut row = vec![format!("{:?}", s.t), s.point.chart.to_string()];
        row.extend(s.point.coords.iter().chain(&s.velocity).map(|a| format!("{a:?}")));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Incremental integrator for the geodesic, its parallel frame and the Jacobi system.
pub struct JacobiIntegrator<'a> {
    model: &'a Manifold,
    theta: TangentState,
    n: usize,
    m: usize,
    chart: usize,
    t: f64,
    /// `[y | v | E_1..E_m | Phi (row-major 2m x 2m)]`
    state: Vec<f64>,
    rk: Rk4,
    kmat: Vec<f64>,
    steps_since_ortho: usize,
    frame_drift: f64,
}

impl<'a> JacobiIntegrator<'a> {
    /// Starts at `theta` with `Phi = I`. Without an explicit frame, a
    /// g-orthonormal basis of the velocity complement is built from the chart axes.
    pub fn new(model: &'a Manifold, theta: &TangentState, frame: Option<&[Vec<f64>]>) -> Result<Self> {
        theta.check_unit(model)?;
        let n = model.dim();
        let m = n - 1;
        let x = theta.point();
        let frame: Vec<f64> = match frame {
            Some(f) => {
                if f.len() != m || f.iter().any(|e| e.len() != n) {
                    return Err(Error::argument("frame must hold n-1 vectors of length n"));
                }
                f.iter().flatten().copied().collect()
            }
            None => model.complement_frame(x.chart, &x.coords, theta.velocity())?,
        };
        let mut state = Vec::with_capacity(2 * n + m * n + 4 * m * m);
        state.extend_from_slice(&x.coords);
        state.extend_from_slice(theta.velocity());
        state.extend_from_slice(&frame);
        for i in 0..2 * m {
            for j in 0..2 * m {
                state.push(if i == j { 1.0 } else { 0.0 });
            }
        }
        let len = state.len();
        let mut integrator = JacobiIntegrator {
            model,
            theta: theta.clone(),
            n,
            m,
            chart: x.chart,
            t: 0.0,
            state,
            rk: Rk4::new(len),
            kmat: vec![0.0; m * m],
            steps_since_ortho: 0,
            frame_drift: 0.0,
        };
        integrator.frame_drift = integrator.gram_deviation()?;
        if integrator.frame_drift > 1e-8 {
            return Err(Error::argument(format!(
                "initial frame is not orthonormal to the velocity (deviation {:e})",
                integrator.frame_drift
            )));
        }
        Ok(integrator)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn rhs(model: &Manifold, chart: usize, n: usize, m: usize, kmat: &mut [f64], s: &[f64], out: &mut [f64]) -> Result<()> {
        let (y, rest) = s.split_at(n);
        let (v, rest) = rest.split_at(n);
        let (frame, phi) = rest.split_at(m * n);
        let (dy, dout) = out.split_at_mut(n);
        let (dv, dout) = dout.split_at_mut(n);
        let (dframe, dphi) = dout.split_at_mut(m * n);
        dy.copy_from_slice(v);
        model.connection(chart, y, v, v, dv)?;
        for a in dv.iter_mut() {
            *a = -*a;
        }
        for i in 0..m {
            let e = &frame[i * n..(i + 1) * n];
            let de = &mut dframe[i * n..(i + 1) * n];
            model.connection(chart, y, v, e, de)?;
            for a in de.iter_mut() {
                *a = -*a;
            }
        }
        model.curvature_matrix(chart, y, v, frame, kmat)?;
        let w = 2 * m;
        // d/dt [A; B] = [[0, I], [-K, 0]] [A; B]
        for i in 0..m {
            for c in 0..w {
                dphi[i * w + c] = phi[(m + i) * w + c];
                let mut acc = 0.0;
                for j in 0..m {
                    acc += 0.5 * (kmat[i * m + j] + kmat[j * m + i]) * phi[j * w + c];
                }
                dphi[(m + i) * w + c] = -acc;
            }
        }
        Ok(())
    }

    /// Largest deviation of the Gram matrix of `{v, E_1..E_m}` from the identity.
    fn gram_deviation(&self) -> Result<f64> {
        let (n, m) = (self.n, self.m);
        let y = &self.state[..n];
        let vecs: Vec<&[f64]> = std::iter::once(&self.state[n..2 * n])
            .chain((0..m).map(|i| &self.state[2 * n + i * n..2 * n + (i + 1) * n]))
            .collect();
        let mut worst = 0.0f64;
        for (i, a) in vecs.iter().enumerate() {
            for (j, b) in vecs.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((self.model.inner_raw(self.chart, y, a, b)? - target).abs());
            }
        }
        Ok(worst)
    }

    fn reorthonormalize(&mut self) -> Result<()> {
        let drift = self.gram_deviation()?;
        self.frame_drift = self.frame_drift.max(drift);
        log::debug!("t = {:.3}: frame Gram deviation {drift:e} before re-orthonormalisation", self.t);
        let (n, m) = (self.n, self.m);
        let y = self.state[..n].to_vec();
        let mut basis = vec![self.state[n..2 * n].to_vec()];
        for i in 0..m {
            let range = 2 * n + i * n..2 * n + (i + 1) * n;
            let e = self
                .model
                .orthonormalize_against(self.chart, &y, &self.state[range.clone()], &basis)?
                .ok_or_else(|| Error::numeric("parallel frame degenerated"))?;
            self.state[range].copy_from_slice(&e);
            basis.push(e);
        }
        Ok(())
    }

    /// One RK4 step of length `h`, followed by chart recentering.
    pub fn step(&mut self, h: f64) -> Result<()> {
        let (model, n, m, chart) = (self.model, self.n, self.m, self.chart);
        let backup = self.state.clone();
        let kmat = &mut self.kmat;
        let result = self
            .rk
            .step(&mut self.state, h, |s, out| Self::rhs(model, chart, n, m, kmat, s, out))
            .and_then(|_| {
                let (y, rest) = self.state.split_at_mut(n);
                let (v, rest) = rest.split_at_mut(n);
                let (frame, _) = rest.split_at_mut(m * n);
                let mut vectors: Vec<&mut [f64]> = std::iter::once(v).chain(frame.chunks_mut(n)).collect();
                let mut point = ChartPoint::new(chart, y.to_vec());
                model.recenter(&mut point, &mut vectors)?;
                y.copy_from_slice(&point.coords);
                self.chart = point.chart;
                Ok(())
            });
        if let Err(e) = result {
            self.state = backup;
            return Err(integration_error(self.t, self.chart, &self.state[..n], &self.state[n..2 * n], e));
        }
        self.t += h;
        self.steps_since_ortho += 1;
        if self.steps_since_ortho >= REORTHONORMALIZE_EVERY {
            self.reorthonormalize()?;
            self.steps_since_ortho = 0;
        }
        Ok(())
    }

    /// Advances to `t_target` in uniform substeps no longer than `max_step`,
    /// calling `observe` after every substep.
    pub fn advance_to<F>(&mut self, t_target: f64, max_step: f64, mut observe: F) -> Result<()>
    where
        F: FnMut(&Self),
    {
        check_step(t_target - self.t, max_step)?;
        let steps = substeps(t_target - self.t, max_step);
        let start = self.t;
        let h = if steps > 0 { (t_target - start) / steps as f64 } else { 0.0 };
        for i in 0..steps {
            self.step(h)?;
            if i + 1 == steps {
                self.t = t_target;
            }
            observe(self);
        }
        Ok(())
    }

    pub fn phi(&self) -> DMatrix<f64> {
        let w = 2 * self.m;
        let off = 2 * self.n + self.m * self.n;
        DMatrix::from_row_slice(w, w, &self.state[off..off + w * w])
    }

    /// `|det A(t)|` for the upper-right block, without allocating a full `Phi`.
    pub fn exp_block_det(&self) -> f64 {
        let (n, m) = (self.n, self.m);
        let w = 2 * m;
        let off = 2 * n + m * n;
        let block = DMatrix::from_fn(m, m, |i, j| self.state[off + i * w + m + j]);
        block.determinant().abs()
    }

    pub fn geodesic_state(&self) -> Result<GeodesicState> {
        let n = self.n;
        let point = ChartPoint::new(self.chart, self.state[..n].to_vec());
        let velocity = self.state[n..2 * n].to_vec();
        let speed_drift = (self.model.inner_raw(self.chart, &point.coords, &velocity, &velocity)? - 1.0).abs();
        Ok(GeodesicState { t: self.t, point, velocity, speed_drift })
    }

    pub fn frame(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        self.state[2 * n..2 * n + self.m * n].chunks(n).map(<[f64]>::to_vec).collect()
    }

    pub fn snapshot(&self) -> Result<JacobiPropagation> {
        let drift = self.frame_drift.max(self.gram_deviation()?);
        Ok(JacobiPropagation {
            theta: self.theta.clone(),
            t: self.t,
            state: self.geodesic_state()?,
            frame: self.frame(),
            phi: self.phi(),
            frame_drift: drift,
        })
    }
}

/// Fundamental matrix of the Jacobi system along `c_theta` at `t_end`.
pub fn propagate_jacobi(model: &Manifold, theta: &TangentState, t_end: f64, step: f64) -> Result<JacobiPropagation> {
    propagate_jacobi_from_frame(model, theta, None, t_end, step)
}

/// As [`propagate_jacobi`], starting from a given parallel frame.
pub fn propagate_jacobi_from_frame(
    model: &Manifold,
    theta: &TangentState,
    frame: Option<&[Vec<f64>]>,
    t_end: f64,
    step: f64,
) -> Result<JacobiPropagation> {
    check_step(t_end, step)?;
    let mut integrator = JacobiIntegrator::new(model, theta, frame)?;
    integrator.advance_to(t_end, step, |_| {})?;
    integrator.snapshot()
}

/// Snapshots at each of the increasing, non-negative `times`.
pub fn propagate_jacobi_checkpoints(
    model: &Manifold,
    theta: &TangentState,
    times: &[f64],
    step: f64,
) -> Result<Vec<JacobiPropagation>> {
    if times.windows(2).any(|w| !(w[0] < w[1])) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::argument("checkpoint times must be increasing and non-negative"));
    }
    let mut integrator = JacobiIntegrator::new(model, theta, None)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        check_step(t - integrator.time(), step)?;
        integrator.advance_to(t, step, |_| {})?;
        out.push(integrator.snapshot()?);
    }
    Ok(out)
}

/// Expansion of a linear map: the largest `|det|` of its restriction to any
/// non-trivial subspace, i.e. the largest product of leading singular values.
pub fn expansion(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::argument("expansion needs a non-empty square matrix"));
    }
    if m.iter().any(|a| !a.is_finite()) {
        return Err(Error::argument("matrix has non-finite entries"));
    }
    Ok(expansion_of_singular_values(singular_values(m).as_slice()))
}

/// `max_k prod_{i <= k} sigma_i` for singular values sorted in decreasing order.
pub(crate) fn expansion_of_singular_values(sv: &[f64]) -> f64 {
    let mut best = sv[0];
    let mut running = 1.0;
    for &s in sv {
        running *= s;
        best = best.max(running);
    }
    best
}

/// `|det A_v(rho)|`: radial Jacobian of the exponential map at `x` in the
/// unit direction of `v`, the density with `int_M n_T(x, y) dy =
/// int_{S_x} int_0^T |det A_v(rho)| drho dsigma(v)`.
pub fn exp_ball_jacobian(model: &Manifold, x: &ChartPoint, v: &[f64], rho: f64, step: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::argument(format!("radius must be non-negative, got {rho}")));
    }
    let theta = TangentState::new(model, x.clone(), v.to_vec())?;
    let prop = propagate_jacobi(model, &theta, rho, step)?;
    Ok(prop.exp_block().determinant().abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn expansion_examples() {
        assert_relative_eq!(expansion(&DMatrix::identity(3, 3)).unwrap(), 1.0, epsilon = 1e-15);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
        assert_relative_eq!(expansion(&d).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn contracting_map_expands_by_largest_singular_value() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 0.25]));
        assert_relative_eq!(expansion(&d).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn expansion_rejects_bad_input() {
        assert!(expansion(&DMatrix::zeros(2, 3)).is_err());
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(expansion(&m).is_err());
    }

    #[test]
    fn substeps_cover_span() {
        assert_eq!(substeps(1.0, 1e-3), 1000);
        assert_eq!(substeps(1.0005, 1e-3), 1001);
        assert_eq!(substeps(0.0, 1e-3), 0);
        assert_eq!(substeps(1e-5, 1e-3), 1);
    }

    #[test]
    fn step_must_be_positive() {
        let model = Manifold::flat_torus(vec![1.0, 1.0]).unwrap();
        let theta = TangentState::new(&model, ChartPoint::new(0, vec![0.0, 0.0]), vec![1.0, 0.0]).unwrap();
        assert!(matches!(integrate_geodesic(&model, &theta, 1.0, 0.0), Err(Error::Argument(_))));
        assert!(matches!(integrate_geodesic(&model, &theta, -1.0, 1e-3), Err(Error::Argument(_))));
    }
}
