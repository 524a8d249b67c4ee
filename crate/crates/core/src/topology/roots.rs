//! Polynomial roots from companion-matrix eigenvalues, polished by Newton steps.

use nalgebra::{Complex, DMatrix, Schur};

use crate::error::{Error, Result};

/// Roots closer than this (relative to their modulus) are treated as one multiple root.
const CLUSTER_TOLERANCE: f64 = 1e-4;
const NEWTON_ITERATIONS: usize = 30;
const SCHUR_ITERATIONS: usize = 10_000;
const DIAGONAL_SHIFTS: [f64; 4] = [0.0, 0.1373, -0.2917, 0.5521];

/// `k`-th derivative of the polynomial with ascending coefficients `c`, at `z`.
fn derivative_at(c: &[f64], k: usize, z: Complex<f64>) -> Complex<f64> {
    let mut acc = Complex::new(0.0, 0.0);
    for i in (k..c.len()).rev() {
        let falling: f64 = (0..k).map(|j| (i - j) as f64).product();
        acc = acc * z + Complex::new(c[i] * falling, 0.0);
    }
    acc
}

/// Newton iteration on the `k`-th derivative; a root of multiplicity `k + 1`
/// of `c` is a simple root there.
fn newton(c: &[f64], k: usize, mut z: Complex<f64>) -> Complex<f64> {
    for _ in 0..NEWTON_ITERATIONS {
        let f = derivative_at(c, k, z);
        let df = derivative_at(c, k + 1, z);
        if df.norm() == 0.0 {
            break;
        }
        let dz = f / df;
        if !dz.re.is_finite() || !dz.im.is_finite() {
            break;
        }
        let next = z - dz;
        // Stop once the residual no longer decreases.
        if derivative_at(c, k, next).norm() >= f.norm() {
            break;
        }
        z = next;
        if dz.norm() <= f64::EPSILON * z.norm() {
            break;
        }
    }
    z
}

/// All complex roots of `sum_i c[i] t^i` (ascending coefficients, non-zero leading term).
pub fn polynomial_roots(c: &[f64]) -> Result<Vec<Complex<f64>>> {
    let degree = c.len().saturating_sub(1);
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = c[degree];
    if lead == 0.0 || c.iter().any(|a| !a.is_finite()) {
        return Err(Error::argument("polynomial needs finite coefficients and a non-zero leading term"));
    }
    let mut companion = DMatrix::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -c[i] / lead;
    }
    // QR without exceptional shifts stalls on cyclic companions such as that of
    // 1 + t^4; moving the spectrum off the origin breaks the symmetry.
    let raw: Vec<Complex<f64>> = DIAGONAL_SHIFTS
        .iter()
        .find_map(|&s| {
            let shifted = &companion - DMatrix::identity(degree, degree) * s;
            Schur::try_new(shifted, f64::EPSILON, SCHUR_ITERATIONS)
                .map(|schur| schur.complex_eigenvalues().iter().map(|z| z + s).collect())
        })
        .ok_or_else(|| Error::numeric("companion eigenvalues did not converge"))?;
    if raw.len() != degree || raw.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::numeric("companion eigenvalues did not converge"));
    }

    // Group near-coincident eigenvalues; a cluster of m approximates an m-fold root.
    let mut assigned = vec![false; degree];
    let mut roots = Vec::with_capacity(degree);
    for i in 0..degree {
        if assigned[i] {
            continue;
        }
        let scale = raw[i].norm().max(f64::MIN_POSITIVE);
        let members: Vec<usize> = (i..degree)
            .filter(|&j| !assigned[j] && (raw[j] - raw[i]).norm() <= CLUSTER_TOLERANCE * scale)
            .collect();
        for &j in &members {
            assigned[j] = true;
        }
        let m = members.len();
        if m == 1 {
            roots.push(newton(c, 0, raw[i]));
            continue;
        }
        let centroid = members.iter().map(|&j| raw[j]).sum::<Complex<f64>>() / m as f64;
        let polished = newton(c, m - 1, centroid);
        if (polished - centroid).norm() <= CLUSTER_TOLERANCE * scale {
            roots.extend(std::iter::repeat_n(polished, m));
        } else {
            roots.extend(members.iter().map(|&j| newton(c, 0, raw[j])));
        }
    }
    Ok(roots)
}

/// Largest distance in a greedy nearest matching of two root multisets.
pub fn multiset_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for z in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, w)| (k, (z - w).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("equal lengths");
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}
