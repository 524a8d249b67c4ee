//! Betti-number bounds for closed simply connected manifolds carrying an
//! Einstein metric of non-negative sectional curvature, and a certifier that
//! reports which of them a given Betti profile violates.
//!
//! Normalising such a metric to `r = g` forces `0 <= K <= 1`, so the entropy
//! bound with `K_max = 1` and the loop-space growth estimate give
//! `-log R <= pi sqrt(n-1) (n-2) / 2`, where `R` is the radius of convergence
//! of the rational homotopy series. For formal manifolds `R` is bounded above
//! by the smallest root modulus of the Poincare polynomial.

mod big;
mod certify;
#[cfg(test)]
mod hp;
mod roots;
#[cfg(test)]
mod tests;

use std::f64::consts::{LN_10, PI};

use nalgebra::Complex;
use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use big::BigValue;
pub use certify::{certify, Check, ObstructionReport, Quantity, Verdict};
pub use roots::{multiset_distance, polynomial_roots};

/// `floor((5/2) e^{6 pi})`, the largest `b_2` allowed on a formal simply
/// connected 5-manifold. Pinned from a 50-digit evaluation (see the tests).
pub const COROLLARY3_B2_FLOOR: u64 = 383_882_338;

fn default_p() -> usize {
    2
}

fn yes() -> bool {
    true
}

/// `R` accepts a positive number, `"inf"` for rationally elliptic
/// manifolds, or null / absence when unknown.
fn deserialize_radius<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Text(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Number(x)) => Ok(Some(x)),
        Some(Raw::Text(s)) if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity" | "+inf") => {
            Ok(Some(f64::INFINITY))
        }
        Some(Raw::Text(s)) => Err(serde::de::Error::custom(format!("R must be a number or \"inf\", got {s:?}"))),
    }
}

fn serialize_radius<S: Serializer>(r: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(x) if x.is_infinite() => s.serialize_str("inf"),
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_none(),
    }
}

/// Rational Betti numbers and the homotopy data the bounds are gated on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BettiProfile {
    pub n: usize,
    pub betti: Vec<u64>,
    #[serde(default)]
    pub formal: bool,
    /// `p` for a `(p-1)`-connected manifold.
    #[serde(default = "default_p")]
    pub connected_p: usize,
    #[serde(default = "yes")]
    pub simply_connected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<i64>,
    /// Radius of convergence of `sum dim(pi_i(M) (x) Q) t^i`, when known.
    #[serde(
        rename = "R",
        default,
        deserialize_with = "deserialize_radius",
        serialize_with = "serialize_radius",
        skip_serializing_if = "Option::is_none"
    )]
    pub radius: Option<f64>,
}

impl BettiProfile {
    /// A formal, simply connected profile without optional data.
    pub fn new(betti: Vec<u64>) -> Self {
        BettiProfile {
            n: betti.len().saturating_sub(1),
            betti,
            formal: true,
            connected_p: 2,
            simply_connected: true,
            chi: None,
            tau: None,
            radius: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let profile: BettiProfile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        let n = self.n;
        if n < 2 {
            return bad(format!("dimension must be at least 2, got {n}"));
        }
        if self.betti.len() != n + 1 {
            return bad(format!("expected {} Betti numbers b_0..b_{n}, got {}", n + 1, self.betti.len()));
        }
        if !self.simply_connected {
            return bad("only simply connected manifolds are supported; pass to the universal cover".into());
        }
        let b = &self.betti;
        if b[0] != 1 || b[n] != 1 {
            return bad("a closed connected orientable manifold has b_0 = b_n = 1".into());
        }
        if b[1] != 0 {
            return bad("a simply connected manifold has b_1 = 0".into());
        }
        if let Some(i) = (0..=n).find(|&i| b[i] != b[n - i]) {
            return bad(format!("Poincare duality fails: b_{i} = {} but b_{} = {}", b[i], n - i, b[n - i]));
        }
        let p = self.connected_p;
        if p < 2 || p > n {
            return bad(format!("connectivity p must satisfy 2 <= p <= n, got {p}"));
        }
        if let Some(i) = (1..p).find(|&i| b[i] != 0) {
            return bad(format!("a {}-connected manifold has b_{i} = 0", p - 1));
        }
        if let Some(chi) = self.chi {
            if chi != self.euler_characteristic() {
                return bad(format!("chi = {chi} disagrees with the Betti numbers ({})", self.euler_characteristic()));
            }
        }
        if let Some(tau) = self.tau {
            if n % 4 != 0 {
                return bad(format!("a signature needs dimension divisible by 4, got {n}"));
            }
            let middle = b[n / 2] as i64;
            if tau.abs() > middle || (middle - tau).rem_euclid(2) != 0 {
                return bad(format!("signature {tau} is incompatible with b_{} = {middle}", n / 2));
            }
        }
        if let Some(r) = self.radius {
            if !(r > 0.0) {
                return bad(format!("R must be positive, got {r}"));
            }
        }
        Ok(())
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.betti.iter().enumerate().map(|(i, &b)| if i % 2 == 0 { b as i64 } else { -(b as i64) }).sum()
    }

    /// Total rational Betti number `dim H_*(M; Q) = P_M(1)`.
    pub fn total_betti(&self) -> u64 {
        self.betti.iter().sum()
    }

    /// Known to be rationally elliptic (`R = +inf` or `R > 1`).
    pub fn known_elliptic(&self) -> bool {
        self.radius.is_some_and(|r| r > 1.0)
    }
}

/// Roots of `P_M(t) = sum b_i t^i`; they come in reciprocal pairs `z, 1/z`.
pub fn poincare_roots(profile: &BettiProfile) -> Result<Vec<Complex<f64>>> {
    profile.validate()?;
    let coeffs: Vec<f64> = profile.betti.iter().map(|&b| b as f64).collect();
    polynomial_roots(&coeffs)
}

/// `min |z_i|` over the Poincare polynomial roots, an upper bound for `R`
/// on formal rationally hyperbolic manifolds.
pub fn felix_thomas_r_upper(profile: &BettiProfile) -> Result<f64> {
    Ok(poincare_roots(profile)?.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min))
}

fn dimension(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::argument(format!("dimension must be at least 2, got {n}")));
    }
    Ok(n as f64)
}

/// `(pi sqrt(n-1) / 2)((n-1) sqrt(k) - 1/sqrt(k))`, bounding `-log R` for
/// metrics with `r >= g` and `K <= k`.
pub fn theorem_a_neg_log_r(n: usize, k: f64) -> Result<f64> {
    let n = dimension(n)?;
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::argument(format!("needs k > 0, got {k}")));
    }
    let s = k.sqrt();
    Ok(0.5 * PI * (n - 1.0).sqrt() * ((n - 1.0) * s - 1.0 / s))
}

/// The Einstein exponent `pi sqrt(n-1)(n-2)/2`.
fn einstein_exponent(n: usize) -> Result<f64> {
    theorem_a_neg_log_r(n, 1.0)
}

/// `log10(1 + e^a)` without overflow.
fn log10_one_plus_exp(a: f64) -> f64 {
    if a > 0.0 {
        (a + (-a).exp().ln_1p()) / LN_10
    } else {
        a.exp().ln_1p() / LN_10
    }
}

fn big(log10: f64) -> Result<BigValue> {
    BigValue::from_log10(log10).ok_or_else(|| Error::numeric("bound is not finite"))
}

/// `[1 + exp(pi sqrt(n-1)(n-2)/2)]^n`, bounding `dim H_*(M; Q)`.
pub fn corollary1_bound(n: usize) -> Result<BigValue> {
    let a = einstein_exponent(n)?;
    let direct = (1.0 + a.exp()).powi(n as i32);
    if direct.is_finite() && direct < 1e300 {
        return BigValue::from_f64(direct).ok_or_else(|| Error::numeric("bound is not finite"));
    }
    big(n as f64 * log10_one_plus_exp(a))
}

/// `(1 + 1/R)^n`; `R = +inf` marks a rationally elliptic manifold and
/// gives the bound `2^n` that holds there.
pub fn corollary_suma_bound(n: usize, r: f64) -> Result<BigValue> {
    dimension(n)?;
    if !(r > 0.0) {
        return Err(Error::argument(format!("R must be positive, got {r}")));
    }
    if r.is_infinite() {
        return match BigValue::from_f64(2f64.powi(n as i32)) {
            Some(v) if n < 1000 => Ok(v),
            _ => big(n as f64 * 2f64.log10()),
        };
    }
    let direct = (1.0 + 1.0 / r).powi(n as i32);
    if direct.is_finite() && direct < 1e300 {
        return BigValue::from_f64(direct).ok_or_else(|| Error::numeric("bound is not finite"));
    }
    big(n as f64 * (1.0 / r).ln_1p() / LN_10)
}

fn check_p(n: usize, p: usize) -> Result<()> {
    dimension(n)?;
    if p < 2 || p > n {
        return Err(Error::argument(format!("needs 2 <= p <= n, got p = {p}, n = {n}")));
    }
    Ok(())
}

/// `(n / (p b_p))^{1/p}`, an upper bound for `R` on `(p-1)`-connected formal manifolds.
pub fn corollary_p1_r_upper(n: usize, p: usize, b_p: u64) -> Result<f64> {
    check_p(n, p)?;
    if b_p == 0 {
        return Err(Error::NotApplicable("b_p = 0 gives no bound on R".into()));
    }
    Ok((n as f64 / (p as f64 * b_p as f64)).powf(1.0 / p as f64))
}

/// `(n/p) exp(p pi sqrt(n-1)(n-2)/2)`, bounding `b_p` on `(p-1)`-connected formal manifolds.
pub fn corollary2_bp_bound(n: usize, p: usize) -> Result<BigValue> {
    check_p(n, p)?;
    let a = einstein_exponent(n)?;
    let log10 = (n as f64 / p as f64).log10() + p as f64 * a / LN_10;
    if log10 < 300.0 {
        let direct = n as f64 / p as f64 * (p as f64 * a).exp();
        return BigValue::from_f64(direct).ok_or_else(|| Error::numeric("bound is not finite"));
    }
    big(log10)
}

/// `(b_2 + sqrt(b_2^2 - 4)) / 2`, a lower bound for `1/R` on simply connected
/// rationally hyperbolic 4-manifolds.
pub fn babenko_inv_r_lower(b2: u64) -> Result<f64> {
    if b2 < 2 {
        return Err(Error::NotApplicable(format!("b_2 = {b2} lies in the rationally elliptic range")));
    }
    let b = b2 as f64;
    Ok(0.5 * (b + (b * b - 4.0).sqrt()))
}

/// Largest `b_2` with `babenko_inv_r_lower(b_2) <= exp(pi sqrt 3)`: the
/// dimension-4 limit for Einstein metrics of non-negative sectional curvature.
pub fn max_dim4_b2() -> u64 {
    let limit = einstein_exponent(4).expect("n = 4 is valid").exp();
    let mut b2 = 2;
    while babenko_inv_r_lower(b2 + 1).expect("b2 >= 2") <= limit {
        b2 += 1;
    }
    b2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub threshold: f64,
    pub observed: f64,
    pub pass: bool,
}

/// Hitchin `chi >= (3/2)^{3/2} |tau|` and Gursky-LeBrun `9 >= chi > (15/4)|tau|`,
/// both as quoted. The second rejects the complex projective plane.
pub fn dim4_gauss_bonnet_checks(chi: i64, tau: i64) -> (InequalityCheck, InequalityCheck) {
    let chi_f = chi as f64;
    let hitchin_threshold = 1.5f64.powf(1.5) * tau.abs() as f64;
    let gl_threshold = 3.75 * tau.abs() as f64;
    (
        InequalityCheck {
            name: "hitchin".into(),
            threshold: hitchin_threshold,
            observed: chi_f,
            pass: chi_f >= hitchin_threshold,
        },
        InequalityCheck {
            name: "gursky-lebrun".into(),
            threshold: gl_threshold,
            observed: chi_f,
            pass: chi <= 9 && chi_f > gl_threshold,
        },
    )
}

/// `M(n) = 8^n 10^{n^2 + 4n}` and `log10 C(n)` for Gromov's constant
/// `C(n) = ((n+1) 2^{M(n)})^{100^n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GromovConstant {
    pub n: usize,
    pub m: BigUint,
    /// `log10 C(n) = 100^n (log10(n+1) + M(n) log10 2)`.
    pub log10_c: BigValue,
}

pub fn gromov_log10_c(n: usize) -> Result<GromovConstant> {
    dimension(n)?;
    let e = u32::try_from(n * n + 4 * n).map_err(|_| Error::argument("dimension too large"))?;
    let m = BigUint::from(8u32).pow(n as u32) * BigUint::from(10u32).pow(e);
    let log10_2 = 2f64.log10();
    let head = ((n + 1) as f64).log10();
    // log10 M(n) is exact up to rounding: n log10 8 + n^2 + 4n.
    let log10_m = n as f64 * 8f64.log10() + e as f64;
    let log10_c = if log10_m < 280.0 {
        let m_f = 8f64.powi(n as i32) * 10f64.powi(e as i32);
        let value = 100f64.powi(n as i32) * (head + m_f * log10_2);
        BigValue::from_f64(value).ok_or_else(|| Error::numeric("Gromov constant overflow"))?
    } else {
        big(2.0 * n as f64 + log10_m + (log10_2 + head * 10f64.powf(-log10_m)).log10())?
    };
    Ok(GromovConstant { n, m, log10_c })
}

/// `[1 + exp(pi h sqrt((n-1)/delta))]^n`, bounding `dim H_*(M; Q)` for a
/// metric with `r >= delta g` and entropy `h`.
pub fn remark_hr_bound(n: usize, delta: f64, h: f64) -> Result<BigValue> {
    let nf = dimension(n)?;
    if !(delta > 0.0) || !(h >= 0.0) {
        return Err(Error::argument(format!("needs delta > 0 and h >= 0, got {delta}, {h}")));
    }
    let a = PI * h * ((nf - 1.0) / delta).sqrt();
    let direct = (1.0 + a.exp()).powi(n as i32);
    if direct.is_finite() && direct < 1e300 {
        return BigValue::from_f64(direct).ok_or_else(|| Error::numeric("bound is not finite"));
    }
    big(nf * log10_one_plus_exp(a))
}
