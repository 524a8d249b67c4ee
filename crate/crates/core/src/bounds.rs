//! First-order polar decomposition of the flow differential and the closed-form
//! entropy bounds that follow from it.
//!
//! Over a short time `delta` the differential of the geodesic flow on the
//! transverse subspace is `I + delta R + O(delta^2)` with `R = [[0, I], [-K, 0]]`,
//! so its positive part is `I + (delta/2)(R + R^T) + O(delta^2)`. The
//! eigenvalues of `R + R^T = [[0, I - K], [I - K, 0]]` are `+-(1 - lambda_i)`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::dynamics::{expansion, propagate_jacobi};
use crate::error::{Error, Result};
use crate::linalg::{sym_operator_norm, sym_sqrt, symmetrize};
use crate::manifold::{Manifold, TangentState};

/// Second-order constants above this are flagged as unreliable for the
/// first-order expansion formula.
pub const DEFECT_CONSTANT_FLAG: f64 = 1e2;

/// The block operator `[[0, I], [-K, 0]]` at `theta`, in the parallel frame
/// that [`propagate_jacobi`] starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptROperator {
    pub theta: TangentState,
    /// Symmetric curvature matrix `K_ij = <R(E_i, v) v, E_j>`.
    pub k: DMatrix<f64>,
    /// Orthonormal frame `E_1..E_{n-1}` of the velocity complement.
    pub frame: Vec<Vec<f64>>,
}

impl ScriptROperator {
    fn m(&self) -> usize {
        self.k.nrows()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let m = self.m();
        let mut out = DMatrix::zeros(2 * m, 2 * m);
        out.view_mut((0, m), (m, m)).fill_with_identity();
        out.view_mut((m, 0), (m, m)).copy_from(&(-&self.k));
        out
    }

    /// `R + R^T = [[0, I - K], [I - K, 0]]`.
    pub fn symmetric_part(&self) -> DMatrix<f64> {
        let m = self.m();
        let off = DMatrix::identity(m, m) - &self.k;
        let mut out = DMatrix::zeros(2 * m, 2 * m);
        out.view_mut((0, m), (m, m)).copy_from(&off);
        out.view_mut((m, 0), (m, m)).copy_from(&off);
        out
    }

    /// Eigenvalues `lambda_i` of `K`, descending.
    pub fn curvature_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.k.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }
}

pub fn script_r(model: &Manifold, theta: &TangentState) -> Result<ScriptROperator> {
    theta.check_unit(model)?;
    let x = theta.point();
    let n = model.dim();
    let m = n - 1;
    let flat = model.complement_frame(x.chart, &x.coords, theta.velocity())?;
    let mut kmat = vec![0.0; m * m];
    model.curvature_matrix(x.chart, &x.coords, theta.velocity(), &flat, &mut kmat)?;
    let k = symmetrize(&DMatrix::from_row_slice(m, m, &kmat));
    if k.iter().any(|a| !a.is_finite()) {
        return Err(Error::numeric("non-finite curvature"));
    }
    Ok(ScriptROperator { theta: theta.clone(), k, frame: flat.chunks(n).map(<[f64]>::to_vec).collect() })
}

/// `prod_i (1 + (delta/2)|1 - lambda_i|)`, the expansion of `I + (delta/2)(R + R^T)`.
///
/// For `lambda_i > 1` the expanding eigenvector is `(e_i, -e_i)`, so the
/// absolute value extends the product beyond the case `lambda_i <= 1`.
pub fn first_order_expansion(model: &Manifold, theta: &TangentState, delta: f64) -> Result<f64> {
    let lambdas = model.curvature_operator(theta)?.eigenvalues;
    first_order_expansion_of(&lambdas, delta)
}

pub(crate) fn first_order_expansion_of(lambdas: &[f64], delta: f64) -> Result<f64> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::argument(format!("delta must be non-negative, got {delta}")));
    }
    let mut product = 1.0;
    for &l in lambdas {
        let half = 0.5 * delta * (1.0 - l).abs();
        if 1.0 - half <= 0.0 {
            return Err(Error::argument(format!(
                "delta = {delta} is too large: factor 1 - {half} is not positive for lambda = {l}"
            )));
        }
        product *= 1.0 + half;
    }
    Ok(product)
}

/// `|| (Phi(delta)^T Phi(delta))^{1/2} - (I + (delta/2)(R + R^T)) ||` in operator norm.
pub fn lemma_residual(model: &Manifold, theta: &TangentState, delta: f64, step: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::argument(format!("delta must be non-negative, got {delta}")));
    }
    let op = script_r(model, theta)?;
    let prop = propagate_jacobi(model, theta, delta, step)?;
    let gram = symmetrize(&(prop.phi.transpose() * &prop.phi));
    let root = sym_sqrt(&gram)?;
    let dim = root.nrows();
    let linear = DMatrix::identity(dim, dim) + op.symmetric_part() * (0.5 * delta);
    Ok(sym_operator_norm(&(root - linear)))
}

/// `|ex(Phi(delta)) - first_order_expansion| / delta^2`, the empirical
/// second-order constant; compare against [`DEFECT_CONSTANT_FLAG`].
pub fn expansion_defect_constant(model: &Manifold, theta: &TangentState, delta: f64, step: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::argument(format!("delta must be positive, got {delta}")));
    }
    let first = first_order_expansion(model, theta, delta)?;
    let prop = propagate_jacobi(model, theta, delta, step)?;
    Ok((expansion(&prop.phi)? - first).abs() / (delta * delta))
}

fn dimension(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::argument(format!("dimension must be at least 2, got {n}")));
    }
    Ok(n as f64)
}

/// `(n-1) sqrt(K_max) / 2 - min r / (2 sqrt(K_max))`.
pub fn theorem_b_bound(n: usize, k_max: f64, min_ricci: f64) -> Result<f64> {
    let n = dimension(n)?;
    if !(k_max > 0.0) || !min_ricci.is_finite() {
        return Err(Error::argument(format!(
            "needs K_max > 0 (got {k_max}); use nonpositive_bound for non-positive curvature"
        )));
    }
    let s = k_max.sqrt();
    Ok(0.5 * (n - 1.0) * s - min_ricci / (2.0 * s))
}

/// `sqrt(-(n-1) min r)`, the optimised bound for `min r <= 0`.
pub fn nonpositive_bound(n: usize, min_ricci: f64) -> Result<f64> {
    let n = dimension(n)?;
    if !(min_ricci <= 0.0) {
        return Err(Error::argument(format!("needs min Ricci <= 0, got {min_ricci}")));
    }
    // Adding 0.0 turns a negative zero into +0.
    Ok(((n - 1.0) * -min_ricci + 0.0).sqrt())
}

/// `(n-1) sqrt(k)` for sectional curvature bounded below by `-k`.
pub fn manning_bound(n: usize, k: f64) -> Result<f64> {
    let n = dimension(n)?;
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::argument(format!("needs k > 0, got {k}")));
    }
    Ok((n - 1.0) * k.sqrt())
}

/// `(2(n-1)/pi) log(2 + pi/2)`.
pub fn grossman_rate(n: usize) -> Result<f64> {
    let n = dimension(n)?;
    use std::f64::consts::PI;
    Ok(2.0 * (n - 1.0) / PI * (2.0 + PI / 2.0).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{sample_sphere_bundle, ChartPoint};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn models() -> Vec<Manifold> {
        vec![
            Manifold::round_sphere(2, 1.0).unwrap(),
            Manifold::round_sphere(3, 1.0).unwrap(),
            Manifold::flat_torus(vec![1.0, 1.0]).unwrap(),
            Manifold::hyperbolic(2, 1.0).unwrap(),
            Manifold::hyperbolic(3, 1.0).unwrap(),
            Manifold::ellipsoid(1.0, 1.0, 2.0).unwrap(),
            Manifold::sphere_product(2, 2, 1.0, 1.0).unwrap(),
        ]
    }

    fn first_theta(model: &Manifold) -> TangentState {
        sample_sphere_bundle(model, 1, 7).unwrap().remove(0)
    }

    #[test]
    fn script_r_examples() {
        let torus = Manifold::flat_torus(vec![1.0, 1.0]).unwrap();
        let op = script_r(&torus, &first_theta(&torus)).unwrap();
        assert_eq!(op.matrix(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));

        let sphere = Manifold::round_sphere(2, 1.0).unwrap();
        let op = script_r(&sphere, &first_theta(&sphere)).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((op.matrix() - expected).amax() < 1e-12);
        assert!(op.symmetric_part().amax() < 1e-12);

        let hyp = Manifold::hyperbolic(2, 1.0).unwrap();
        let op = script_r(&hyp, &first_theta(&hyp)).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(op.symmetric_part()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert_relative_eq!(ev[0], -2.0, epsilon = 1e-12);
        assert_relative_eq!(ev[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_part_eigenvectors_pair_frame_directions() {
        for model in models() {
            let op = script_r(&model, &first_theta(&model)).unwrap();
            let m = op.k.nrows();
            let eig = SymmetricEigen::new(op.k.clone());
            let s = op.symmetric_part();
            for (i, &l) in eig.eigenvalues.iter().enumerate() {
                let e = eig.eigenvectors.column(i);
                for sign in [1.0, -1.0] {
                    let mut w = nalgebra::DVector::zeros(2 * m);
                    w.rows_mut(0, m).copy_from(&e);
                    w.rows_mut(m, m).copy_from(&(e * sign));
                    w /= 2f64.sqrt();
                    let defect = (&s * &w - &w * (sign * (1.0 - l))).amax();
                    assert!(defect < 1e-10, "{:?}: {defect}", model.kind());
                }
            }
        }
    }

    #[test]
    fn linearisation_eigenvalues_match_the_product_formula() {
        for model in models() {
            for theta in sample_sphere_bundle(&model, 5, 3).unwrap() {
                let op = script_r(&model, &theta).unwrap();
                let lambdas = op.curvature_eigenvalues();
                for delta in [1e-2, 1e-3] {
                    let dim = 2 * lambdas.len();
                    let lin = DMatrix::identity(dim, dim) + op.symmetric_part() * (0.5 * delta);
                    let mut got: Vec<f64> = SymmetricEigen::new(lin).eigenvalues.iter().copied().collect();
                    let mut want: Vec<f64> = lambdas
                        .iter()
                        .flat_map(|l| [1.0 + 0.5 * delta * (1.0 - l), 1.0 - 0.5 * delta * (1.0 - l)])
                        .collect();
                    got.sort_by(f64::total_cmp);
                    want.sort_by(f64::total_cmp);
                    for (a, b) in got.iter().zip(&want) {
                        assert!((a - b).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn first_order_expansion_examples() {
        let sphere = Manifold::round_sphere(3, 1.0).unwrap();
        assert_relative_eq!(first_order_expansion(&sphere, &first_theta(&sphere), 0.01).unwrap(), 1.0, epsilon = 1e-12);

        // v tangent to the first factor of S^2 x S^2: spectrum {1, 0, 0}.
        let product = Manifold::sphere_product(2, 2, 1.0, 1.0).unwrap();
        let pure = TangentState::new(&product, ChartPoint::new(0, vec![0.1, 0.2, -0.3, 0.4]), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(first_order_expansion(&product, &pure, 0.01).unwrap(), 1.005 * 1.005, epsilon = 1e-12);
        // S^3 x S^1 with v in the sphere factor: spectrum {1, 1, 0}, a single factor.
        let product = Manifold::sphere_product(3, 1, 1.0, 1.0).unwrap();
        let pure = TangentState::new(&product, ChartPoint::new(0, vec![0.1, 0.2, -0.3, 0.4]), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(first_order_expansion(&product, &pure, 0.01).unwrap(), 1.005, epsilon = 1e-12);

        let torus = Manifold::flat_torus(vec![1.0, 1.0]).unwrap();
        assert_relative_eq!(first_order_expansion(&torus, &first_theta(&torus), 0.01).unwrap(), 1.005, epsilon = 1e-15);
    }

    #[test]
    fn first_order_expansion_rejects_large_delta() {
        let hyp = Manifold::hyperbolic(2, 1.0).unwrap();
        // 1 - lambda = 2, so delta = 1 kills the contracting factor.
        assert!(matches!(first_order_expansion(&hyp, &first_theta(&hyp), 1.0), Err(Error::Argument(_))));
        assert!(first_order_expansion(&hyp, &first_theta(&hyp), 0.5).is_ok());
        assert!(first_order_expansion_of(&[0.0], -1.0).is_err());
    }

    #[test]
    fn lemma_residual_examples() {
        let torus = Manifold::flat_torus(vec![1.0, 1.0]).unwrap();
        let th = first_theta(&torus);
        let r1 = lemma_residual(&torus, &th, 1e-2, 1e-3).unwrap();
        let r2 = lemma_residual(&torus, &th, 5e-3, 1e-3).unwrap();
        assert!((3.5..=4.5).contains(&(r1 / r2)), "ratio {}", r1 / r2);
        // Closed form: [[1, d], [0, 1]] has positive part (2, d; d, 2 + d^2) / sqrt(4 + d^2),
        // which differs from I + (d/2)[[0,1],[1,0]] by diag(-d^2/8, 3d^2/8) + O(d^4).
        assert_relative_eq!(r1, 3e-4 / 8.0, max_relative = 1e-3);

        let sphere = Manifold::round_sphere(2, 1.0).unwrap();
        assert!(lemma_residual(&sphere, &first_theta(&sphere), 1e-2, 1e-3).unwrap() <= 1e-4);

        for model in models() {
            assert!(lemma_residual(&model, &first_theta(&model), 0.0, 1e-3).unwrap() < 1e-15);
        }
    }

    #[test]
    fn defect_constant_is_moderate_on_models() {
        for model in models() {
            let c = expansion_defect_constant(&model, &first_theta(&model), 1e-2, 1e-3).unwrap();
            assert!(c < DEFECT_CONSTANT_FLAG, "{:?}: {c}", model.kind());
        }
    }

    #[test]
    fn theorem_b_examples() {
        for n in 2..8 {
            assert_eq!(theorem_b_bound(n, 1.0, n as f64 - 1.0).unwrap(), 0.0);
        }
        assert_eq!(theorem_b_bound(4, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(theorem_b_bound(2, 1.0, -1.0).unwrap(), 1.0);
        assert!(matches!(theorem_b_bound(2, 0.0, 0.0), Err(Error::Argument(_))));
        assert!(theorem_b_bound(1, 1.0, 0.0).is_err());
    }

    #[test]
    fn nonpositive_examples() {
        for n in 2..8 {
            let m = n as f64 - 1.0;
            assert_eq!(nonpositive_bound(n, -m).unwrap(), m);
        }
        assert_eq!(nonpositive_bound(2, 0.0).unwrap(), 0.0);
        assert_eq!(nonpositive_bound(2, -4.0).unwrap(), 2.0);
        assert!(nonpositive_bound(2, 0.5).is_err());
    }

    #[test]
    fn manning_examples() {
        assert_eq!(manning_bound(2, 1.0).unwrap(), 1.0);
        assert_eq!(manning_bound(4, 1.0).unwrap(), 3.0);
        assert!(manning_bound(4, 1.0).unwrap() > theorem_b_bound(4, 1.0, 1.0).unwrap());
        assert_eq!(manning_bound(3, 4.0).unwrap(), 4.0);
        assert!(manning_bound(3, 0.0).is_err());
    }

    #[test]
    fn grossman_examples() {
        assert!((grossman_rate(2).unwrap() - 0.8103).abs() < 5e-5);
        assert!((grossman_rate(4).unwrap() - 2.4310).abs() < 1e-3);
        assert!(grossman_rate(4).unwrap() > theorem_b_bound(4, 1.0, 0.0).unwrap());
        assert_eq!(theorem_b_bound(4, 1.0, 0.0).unwrap(), 1.5);
    }

    proptest! {
        #[test]
        fn theorem_b_rescales(n in 2usize..12, k in 0.01..100.0f64, r in -50.0..50.0f64) {
            let direct = theorem_b_bound(n, k, r).unwrap();
            let scaled = k.sqrt() * theorem_b_bound(n, 1.0, r / k).unwrap();
            prop_assert!((direct - scaled).abs() <= 1e-12 * direct.abs().max(1.0));
        }

        #[test]
        fn theorem_b_below_manning(n in 2usize..12, k in 0.01..100.0f64, frac in 0.0..1.0f64) {
            let min_ricci = -(n as f64 - 1.0) * k * frac + (n as f64 - 1.0) * k * (1.0 - frac);
            prop_assert!(theorem_b_bound(n, k, min_ricci).unwrap() <= manning_bound(n, k).unwrap() * (1.0 + 1e-12));
        }
    }
}
