//! Seeded sampling of the unit sphere bundle.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ChartPoint, Manifold, ModelKind, TangentState};
use crate::error::{Error, Result};

fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = z.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return z.into_iter().map(|a| a / norm).collect();
        }
    }
}

/// Stereographic coordinates of a point of the sphere of radius `radius`
/// given by a unit vector `p`; picks the chart whose projection pole is
/// farther from `p`. Returns `(is_north_chart, coords)`.
fn stereo_coords(p: &[f64], radius: f64) -> (bool, Vec<f64>) {
    let last = p[p.len() - 1];
    let head = &p[..p.len() - 1];
    if last < 0.0 {
        (true, head.iter().map(|a| radius * a / (1.0 - last)).collect())
    } else {
        (false, head.iter().map(|a| radius * a / (1.0 + last)).collect())
    }
}

fn sample_position(model: &Manifold, rng: &mut ChaCha8Rng, density_bound: &mut f64) -> Result<ChartPoint> {
    Ok(match model.kind() {
        ModelKind::RoundSphere { n, radius } => {
            let (north, y) = stereo_coords(&gaussian_unit(rng, n + 1), *radius);
            ChartPoint::new(if north { 0 } else { 1 }, y)
        }
        ModelKind::FlatTorus { periods } => {
            ChartPoint::new(0, periods.iter().map(|p| rng.random::<f64>() * p).collect())
        }
        ModelKind::Hyperbolic { n, .. } => ChartPoint::new(0, vec![0.0; *n]),
        ModelKind::Ellipsoid { a, b, c } => {
            // Map the uniform sphere by diag(a,b,c); the area element gains the
            // factor abc * |diag(a,b,c)^-1 u|, bounded by abc / min axis.
            let axes = [*a, *b, *c];
            let min_axis = a.min(*b).min(*c);
            loop {
                let u = gaussian_unit(rng, 3);
                let stretch = (0..3).map(|i| (u[i] / axes[i]).powi(2)).sum::<f64>().sqrt();
                if rng.random::<f64>() < stretch * min_axis {
                    let (north, y) = stereo_coords(&u, 1.0);
                    break ChartPoint::new(if north { 0 } else { 1 }, y);
                }
            }
        }
        ModelKind::SphereProduct { p, q, r1, r2 } => {
            let (n1, mut y) = stereo_coords(&gaussian_unit(rng, p + 1), *r1);
            let (n2, y2) = stereo_coords(&gaussian_unit(rng, q + 1), *r2);
            y.extend(y2);
            let chart = usize::from(!n1) | (usize::from(!n2) << 1);
            ChartPoint::new(chart, y)
        }
        ModelKind::ChartMetric { n } => {
            let (lo, hi) = match (&model.domain, &model.periods) {
                (Some((lo, hi)), _) => (lo.clone(), hi.clone()),
                (None, Some(p)) => (vec![0.0; *n], p.clone()),
                (None, None) => return Ok(model.base_point()),
            };
            let volume = |y: &[f64]| -> Result<f64> { Ok(model.metric_raw(0, y)?.determinant().max(0.0).sqrt()) };
            let uniform = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                lo.iter().zip(&hi).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect()
            };
            if *density_bound <= 0.0 {
                let mut probe = 0.0f64;
                for _ in 0..1000 {
                    probe = probe.max(volume(&uniform(rng))?);
                }
                *density_bound = 1.5 * probe;
            }
            loop {
                let y = uniform(rng);
                let dens = volume(&y)?;
                if dens > *density_bound {
                    log::warn!("volume density {dens} exceeded sampling bound {density_bound}; raising bound");
                    *density_bound = 1.5 * dens;
                }
                if rng.random::<f64>() * *density_bound < dens {
                    break ChartPoint::new(0, y);
                }
            }
        }
    })
}

/// Uniform direction on the g-unit sphere at `x`: `v = L^{-T} z / |z|` with `g = L L^T`.
fn sample_direction(model: &Manifold, x: &ChartPoint, rng: &mut ChaCha8Rng) -> Result<TangentState> {
    let g: DMatrix<f64> = model.metric_at(x)?;
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::numeric("metric is not positive definite"))?;
    let z = nalgebra::DVector::from_vec(gaussian_unit(rng, model.dim()));
    let v = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::numeric("degenerate metric factor"))?;
    TangentState::new(model, x.clone(), v.iter().copied().collect())
}

/// Draws `count` states with positions distributed by Riemannian volume and
/// directions uniform on each unit sphere. Deterministic in `seed`.
///
/// The hyperbolic model has infinite volume; its positions stay at the base
/// point, which is exact for every isometry-invariant average.
pub fn sample_sphere_bundle(model: &Manifold, count: usize, seed: u64) -> Result<Vec<TangentState>> {
    if count == 0 {
        return Err(Error::argument("sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_positions(model, count, &mut rng)
}

/// Uniform directions at one fixed point.
pub fn sample_directions_at(model: &Manifold, x: &ChartPoint, count: usize, seed: u64) -> Result<Vec<TangentState>> {
    if count == 0 {
        return Err(Error::argument("sample count must be at least 1"));
    }
    model.check_point(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_direction(model, x, &mut rng)).collect()
}

/// A random unit vector orthogonal to `theta`'s direction, for sampling 2-planes.
pub(crate) fn sample_orthogonal(model: &Manifold, theta: &TangentState, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let x = theta.point();
    loop {
        let w = sample_direction(model, x, rng)?;
        if let Some(e) = model.orthonormalize_against(
            x.chart,
            &x.coords,
            w.velocity(),
            &[theta.velocity().to_vec()],
        )? {
            return Ok(e);
        }
    }
}

pub(crate) fn sample_positions(model: &Manifold, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<TangentState>> {
    let mut bound = 0.0;
    (0..count)
        .map(|_| {
            let x = sample_position(model, rng, &mut bound)?;
            sample_direction(model, &x, rng)
        })
        .collect()
}
