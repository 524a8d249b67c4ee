//! Coordinate charts and their closed-form metric jets.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

/// User-supplied metric evaluator for the chart-metric kind.
pub type MetricFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A block of coordinates carrying the conformally flat metric
/// `(scale / (1 + kappa |y|^2))^2 * identity`.
///
/// `kappa > 0` is a stereographic chart of a round sphere of curvature `kappa`,
/// `kappa < 0` a Poincare ball of curvature `kappa`, and `kappa == 0` with unit
/// scale the Euclidean metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ConformalBlock {
    pub start: usize,
    pub dim: usize,
    pub kappa: f64,
    pub scale: f64,
}

impl ConformalBlock {
    pub fn sq_norm(&self, y: &[f64]) -> f64 {
        y[self.start..self.start + self.dim].iter().map(|a| a * a).sum()
    }

    /// Conformal factor `phi` with `g = phi^2 delta`.
    pub fn factor(&self, y: &[f64]) -> f64 {
        self.scale / (1.0 + self.kappa * self.sq_norm(y))
    }

    /// Gradient of `log phi` with respect to coordinate `k` of the block.
    pub fn dlog_factor(&self, y: &[f64], k: usize) -> f64 {
        -2.0 * self.kappa * y[k] / (1.0 + self.kappa * self.sq_norm(y))
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.dim
    }
}

/// Parametrisations of a triaxial ellipsoid `x^2/a^2 + y^2/b^2 + z^2/c^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SurfaceParam {
    /// Stereographic coordinates of the unit sphere from the north pole,
    /// pushed forward by `diag(a, b, c)`. Regular away from `(0, 0, c)`.
    StereoNorth,
    /// Same from the south pole. Regular away from `(0, 0, -c)`.
    StereoSouth,
    /// Polar angles `(rho, phi)` with `rho` measured from `(0, 0, c)`.
    Polar,
}

#[derive(Clone)]
pub(crate) enum Chart {
    Conformal(Vec<ConformalBlock>),
    Surface { axes: [f64; 3], param: SurfaceParam },
    User { metric: MetricFn },
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Chart::Conformal(blocks) => f.debug_tuple("Conformal").field(blocks).finish(),
            Chart::Surface { axes, param } => f
                .debug_struct("Surface")
                .field("axes", axes)
                .field("param", param)
                .finish(),
            Chart::User { .. } => f.write_str("User"),
        }
    }
}

/// Position, first and second derivatives of an ellipsoid parametrisation.
pub(crate) struct SurfaceJet {
    pub point: [f64; 3],
    /// `d[m][i] = d P_m / d y_i`
    pub d: [[f64; 2]; 3],
    /// `dd[m][i][j] = d^2 P_m / d y_i d y_j`
    pub dd: [[[f64; 2]; 2]; 3],
}

pub(crate) fn surface_jet(axes: [f64; 3], param: SurfaceParam, y: &[f64]) -> SurfaceJet {
    let mut point = [0.0; 3];
    let mut d = [[0.0; 2]; 3];
    let mut dd = [[[0.0; 2]; 2]; 3];
    match param {
        SurfaceParam::StereoNorth | SurfaceParam::StereoSouth => {
            let sign = if param == SurfaceParam::StereoNorth { 1.0 } else { -1.0 };
            let s = y[0] * y[0] + y[1] * y[1];
            let q = 1.0 / (1.0 + s);
            let q2 = q * q;
            let q3 = q2 * q;
            let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
            for m in 0..2 {
                point[m] = 2.0 * y[m] * q;
                for i in 0..2 {
                    d[m][i] = 2.0 * delta(m, i) * q - 4.0 * y[m] * y[i] * q2;
                    for j in 0..2 {
                        dd[m][i][j] = -4.0
                            * q2
                            * (delta(m, i) * y[j] + delta(m, j) * y[i] + delta(i, j) * y[m])
                            + 16.0 * y[m] * y[i] * y[j] * q3;
                    }
                }
            }
            point[2] = sign * (1.0 - 2.0 * q);
            for i in 0..2 {
                d[2][i] = sign * 4.0 * y[i] * q2;
                for j in 0..2 {
                    dd[2][i][j] = sign * (4.0 * delta(i, j) * q2 - 16.0 * y[i] * y[j] * q3);
                }
            }
        }
        SurfaceParam::Polar => {
            let (sr, cr) = y[0].sin_cos();
            let (sp, cp) = y[1].sin_cos();
            point = [sr * cp, sr * sp, cr];
            d = [[cr * cp, -sr * sp], [cr * sp, sr * cp], [-sr, 0.0]];
            dd = [
                [[-sr * cp, -cr * sp], [-cr * sp, -sr * cp]],
                [[-sr * sp, cr * cp], [cr * cp, -sr * sp]],
                [[-cr, 0.0], [0.0, 0.0]],
            ];
        }
    }
    for m in 0..3 {
        point[m] *= axes[m];
        for i in 0..2 {
            d[m][i] *= axes[m];
            for j in 0..2 {
                dd[m][i][j] *= axes[m];
            }
        }
    }
    SurfaceJet { point, d, dd }
}

/// Gauss curvature of the ellipsoid at an ambient point on it.
pub(crate) fn ellipsoid_gauss_curvature(axes: [f64; 3], p: [f64; 3]) -> f64 {
    let [a, b, c] = axes;
    let w = p[0] * p[0] / a.powi(4) + p[1] * p[1] / b.powi(4) + p[2] * p[2] / c.powi(4);
    1.0 / (a * a * b * b * c * c * w * w)
}

/// Unit-sphere stereographic coordinates of a polar-angle point, and the
/// Jacobian `d u / d (rho, phi)` (row = component of u).
pub(crate) fn polar_to_stereo(rho: f64, phi: f64, north: bool) -> ([f64; 2], [[f64; 2]; 2]) {
    let (sp, cp) = phi.sin_cos();
    let half = 0.5 * rho;
    if north {
        let cot = half.cos() / half.sin();
        let drho = -0.5 / (half.sin() * half.sin());
        ([cot * cp, cot * sp], [[drho * cp, -cot * sp], [drho * sp, cot * cp]])
    } else {
        let tan = half.tan();
        let drho = 0.5 / (half.cos() * half.cos());
        ([tan * cp, tan * sp], [[drho * cp, -tan * sp], [drho * sp, tan * cp]])
    }
}

/// Map between the two stereographic charts of a sphere of the given
/// radius: `y -> r^2 y / |y|^2`. Returns the new point and applies the
/// Jacobian to each tangent vector in place.
pub(crate) fn stereo_flip(y: &mut [f64], radius: f64, vectors: &mut [&mut [f64]]) {
    let s: f64 = y.iter().map(|a| a * a).sum();
    let r2 = radius * radius;
    for vec in vectors.iter_mut() {
        let dot: f64 = y.iter().zip(vec.iter()).map(|(a, b)| a * b).sum();
        for (vi, yi) in vec.iter_mut().zip(y.iter()) {
            *vi = r2 * (*vi / s - 2.0 * yi * dot / (s * s));
        }
    }
    for yi in y.iter_mut() {
        *yi *= r2 / s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stereo_jet_matches_finite_differences() {
        let axes = [1.0, 1.5, 2.0];
        for param in [SurfaceParam::StereoNorth, SurfaceParam::StereoSouth, SurfaceParam::Polar] {
            let y = [0.3, 0.7];
            let jet = surface_jet(axes, param, &y);
            let h = 1e-6;
            for i in 0..2 {
                let mut yp = y;
                let mut ym = y;
                yp[i] += h;
                ym[i] -= h;
                let jp = surface_jet(axes, param, &yp);
                let jm = surface_jet(axes, param, &ym);
                for m in 0..3 {
                    let fd = (jp.point[m] - jm.point[m]) / (2.0 * h);
                    assert!((fd - jet.d[m][i]).abs() < 1e-8, "{param:?} d[{m}][{i}]");
                    for j in 0..2 {
                        let fd2 = (jp.d[m][j] - jm.d[m][j]) / (2.0 * h);
                        assert!((fd2 - jet.dd[m][j][i]).abs() < 1e-7, "{param:?} dd[{m}][{j}][{i}]");
                    }
                }
            }
        }
    }

    #[test]
    fn jet_points_lie_on_ellipsoid() {
        let axes = [1.0, 1.5, 2.0];
        for param in [SurfaceParam::StereoNorth, SurfaceParam::StereoSouth, SurfaceParam::Polar] {
            let p = surface_jet(axes, param, &[0.4, -1.1]).point;
            let level: f64 = (0..3).map(|m| p[m] * p[m] / (axes[m] * axes[m])).sum();
            assert!((level - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn polar_to_stereo_agrees_with_embedding() {
        let (rho, phi) = (1.1, 0.4);
        let polar = surface_jet([1.0; 3], SurfaceParam::Polar, &[rho, phi]).point;
        for (north, param) in [(true, SurfaceParam::StereoNorth), (false, SurfaceParam::StereoSouth)] {
            let (u, _) = polar_to_stereo(rho, phi, north);
            let p = surface_jet([1.0; 3], param, &u).point;
            for m in 0..3 {
                assert!((p[m] - polar[m]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn stereo_flip_is_an_involution() {
        let mut y = vec![0.7, -0.2, 1.3];
        let orig = y.clone();
        let mut v = vec![0.1, 0.2, 0.3];
        let v0 = v.clone();
        stereo_flip(&mut y, 2.0, &mut [&mut v]);
        stereo_flip(&mut y, 2.0, &mut [&mut v]);
        for i in 0..3 {
            assert!((y[i] - orig[i]).abs() < 1e-14);
            assert!((v[i] - v0[i]).abs() < 1e-14);
        }
    }
}
