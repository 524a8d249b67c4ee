use std::f64::consts::PI;

use approx::assert_relative_eq;
use num_bigint::{BigInt, BigUint};
use proptest::prelude::*;

use super::certify::Quantity;
use super::hp::{rel_err, Hp};
use super::*;
use crate::bounds::theorem_b_bound;

fn profile(betti: &[u64]) -> BettiProfile {
    BettiProfile::new(betti.to_vec())
}

fn check<'a>(report: &'a ObstructionReport, name: &str) -> &'a Check {
    report.checks.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("no check {name}"))
}

/// `pi sqrt(n-1) (n-2) / 2` in high precision.
fn hp_exponent(n: i64) -> Hp {
    &(&(&Hp::pi() * &Hp::int(n - 1).sqrt()) * &Hp::int(n - 2)) / &Hp::int(2)
}

fn hp_babenko(b2: i64) -> Hp {
    &(&Hp::int(b2) + &Hp::int(b2 * b2 - 4).sqrt()) / &Hp::int(2)
}

#[test]
fn corollary3_floor_matches_oracle() {
    let threshold = &Hp::ratio(5, 2) * &(&Hp::int(2) * &hp_exponent(5)).exp();
    assert_eq!(threshold.floor(), BigInt::from(COROLLARY3_B2_FLOOR));
    // The fractional part keeps double precision well clear of an integer.
    let frac = &threshold - &Hp::int(COROLLARY3_B2_FLOOR as i64);
    assert!(frac.to_f64() > 0.4 && frac.to_f64() < 0.6);
    let bound = corollary2_bp_bound(5, 2).unwrap();
    assert!(rel_err(&threshold, bound.to_f64()) < 1e-14);
}

#[test]
fn dim4_limit_matches_oracle() {
    let limit = hp_exponent(4).exp();
    assert!(hp_babenko(230) <= limit);
    assert!(hp_babenko(231) > limit);
    assert_eq!(max_dim4_b2(), 230);
    assert!(rel_err(&limit, theorem_a_neg_log_r(4, 1.0).unwrap().exp()) < 1e-14);
    assert!(rel_err(&hp_babenko(230), babenko_inv_r_lower(230).unwrap()) < 1e-15);
}

#[test]
fn theorem_a_values() {
    assert!(rel_err(&hp_exponent(4), theorem_a_neg_log_r(4, 1.0).unwrap()) < 1e-15);
    assert_relative_eq!(theorem_a_neg_log_r(4, 1.0).unwrap(), 5.441398092702653, max_relative = 1e-15);
    assert_eq!(theorem_a_neg_log_r(2, 1.0).unwrap(), 0.0);
    // sqrt(4) * 3 * pi / 2; twice this is the Corollary 3 exponent.
    assert_relative_eq!(theorem_a_neg_log_r(5, 1.0).unwrap(), 3.0 * PI, max_relative = 1e-15);
    assert!(theorem_a_neg_log_r(4, 0.0).is_err());
    assert!(theorem_a_neg_log_r(4, -1.0).is_err());
    assert!(theorem_a_neg_log_r(1, 1.0).is_err());
}

#[test]
fn corollary1_values() {
    assert_eq!(corollary1_bound(2).unwrap().to_f64(), 4.0);
    let exact = (&Hp::int(1) + &hp_exponent(4).exp()).powi(4);
    assert!(rel_err(&exact, corollary1_bound(4).unwrap().to_f64()) < 1e-13);
    for n in 2..40 {
        assert!(corollary1_bound(n).unwrap().log10() >= n as f64 * 2f64.log10() - 1e-12);
    }
    // Large n stays finite through the log form.
    let big = corollary1_bound(200).unwrap();
    let expected = 200.0 * (PI * 199f64.sqrt() * 198.0 / 2.0) / std::f64::consts::LN_10;
    assert_relative_eq!(big.log10(), expected, max_relative = 1e-12);
}

#[test]
fn corollary_suma_values() {
    assert_eq!(corollary_suma_bound(4, 1.0).unwrap().to_f64(), 16.0);
    let r = (-theorem_a_neg_log_r(4, 1.0).unwrap()).exp();
    assert_relative_eq!(
        corollary_suma_bound(4, r).unwrap().to_f64(),
        corollary1_bound(4).unwrap().to_f64(),
        max_relative = 1e-12
    );
    assert_eq!(corollary_suma_bound(6, f64::INFINITY).unwrap().to_f64(), 64.0);
    assert!(corollary_suma_bound(4, 0.0).is_err());
    assert!(corollary_suma_bound(4, -2.0).is_err());
}

#[test]
fn corollary_p1_values() {
    assert_relative_eq!(corollary_p1_r_upper(4, 2, 2).unwrap(), 1.0, max_relative = 1e-15);
    assert_relative_eq!(corollary_p1_r_upper(5, 2, 10).unwrap(), 0.5, max_relative = 1e-15);
    assert!(matches!(corollary_p1_r_upper(5, 2, 0), Err(Error::NotApplicable(_))));
    assert!(corollary_p1_r_upper(5, 1, 3).is_err());
    for b in 1..50 {
        assert!(corollary_p1_r_upper(7, 3, b + 1).unwrap() < corollary_p1_r_upper(7, 3, b).unwrap());
    }
}

#[test]
fn corollary2_values() {
    assert_relative_eq!(corollary2_bp_bound(2, 2).unwrap().to_f64(), 1.0, max_relative = 1e-15);
    assert_relative_eq!(
        corollary2_bp_bound(5, 2).unwrap().to_f64(),
        2.5 * (6.0 * PI).exp(),
        max_relative = 1e-14
    );
    assert!(corollary2_bp_bound(5, 6).is_err());
    let huge = corollary2_bp_bound(60, 30).unwrap();
    assert!(huge.is_large());
}

#[test]
fn babenko_values() {
    assert_eq!(babenko_inv_r_lower(2).unwrap(), 1.0);
    assert!(matches!(babenko_inv_r_lower(1), Err(Error::NotApplicable(_))));
    assert!(matches!(babenko_inv_r_lower(0), Err(Error::NotApplicable(_))));
    let limit = theorem_a_neg_log_r(4, 1.0).unwrap().exp();
    assert!(babenko_inv_r_lower(230).unwrap() <= limit);
    assert!(babenko_inv_r_lower(231).unwrap() > limit);
    for b in 2..500 {
        assert!(babenko_inv_r_lower(b + 1).unwrap() > babenko_inv_r_lower(b).unwrap());
    }
}

#[test]
fn gauss_bonnet_examples() {
    let (h, gl) = dim4_gauss_bonnet_checks(2, 0);
    assert!(h.pass && gl.pass);
    let (h, gl) = dim4_gauss_bonnet_checks(10, 0);
    assert!(h.pass && !gl.pass);
    let (h, gl) = dim4_gauss_bonnet_checks(4, 2);
    assert!(h.pass && !gl.pass);
    assert_relative_eq!(h.threshold, 3.6742346141747673, max_relative = 1e-15);
    assert_eq!(gl.threshold, 7.5);
    // The complex projective plane passes Hitchin but not the quoted Gursky-LeBrun form.
    let (h, gl) = dim4_gauss_bonnet_checks(3, 1);
    assert!(h.pass && !gl.pass);
}

#[test]
fn gromov_constant() {
    let g = gromov_log10_c(2).unwrap();
    assert_eq!(g.m, BigUint::from(64u32) * BigUint::from(10u32).pow(12));
    let exact = &Hp::int(10_000) * &(&Hp::int(3).log10() + &(&Hp::int(64_000_000_000_000) * &Hp::int(2).log10()));
    assert!(rel_err(&exact, g.log10_c.to_f64()) < 1e-14, "{}", g.log10_c);
    let mut last = g.log10_c.log10();
    for n in 3..=12 {
        let c = gromov_log10_c(n).unwrap();
        assert!(c.log10_c.log10() > last);
        last = c.log10_c.log10();
        assert_eq!(c.m.to_string().len(), (n as f64 * 8f64.log10()).floor() as usize + n * n + 4 * n + 1);
    }
    for n in 4..=10 {
        let ours = corollary1_bound(n).unwrap().log10();
        let gromov = gromov_log10_c(n).unwrap().log10_c.to_f64();
        assert!(ours * 1e10 < gromov, "n = {n}");
    }
}

#[test]
fn remark_hr_values() {
    assert_eq!(remark_hr_bound(5, 1.0, 0.0).unwrap().to_f64(), 32.0);
    let h = theorem_b_bound(4, 1.0, 1.0).unwrap();
    assert_eq!(h, 1.0);
    assert_relative_eq!(
        remark_hr_bound(4, 1.0, h).unwrap().to_f64(),
        corollary1_bound(4).unwrap().to_f64(),
        max_relative = 1e-12
    );
    let mut last = 0.0;
    for k in 0..20 {
        let v = remark_hr_bound(4, 0.5, k as f64 * 0.1).unwrap().to_f64();
        assert!(v > last);
        last = v;
    }
    assert!(remark_hr_bound(4, 0.0, 1.0).is_err());
    assert!(remark_hr_bound(4, 1.0, -1.0).is_err());
}

#[test]
fn poincare_roots_examples() {
    let s4 = poincare_roots(&profile(&[1, 0, 0, 0, 1])).unwrap();
    assert_eq!(s4.len(), 4);
    assert!(s4.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    let s2s2 = poincare_roots(&profile(&[1, 0, 2, 0, 1])).unwrap();
    assert!(s2s2.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    let p = profile(&[1, 0, 3, 0, 1]);
    let roots = poincare_roots(&p).unwrap();
    let min = roots.iter().map(|z| z.norm()).fold(f64::MAX, f64::min);
    let max = roots.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!((min * max - 1.0).abs() < 1e-6);
    assert!(felix_thomas_r_upper(&p).unwrap() < 1.0);
    // 1 + 3t^2 + t^4: |t|^2 = (3 - sqrt 5) / 2.
    assert_relative_eq!(felix_thomas_r_upper(&p).unwrap(), ((3.0 - 5f64.sqrt()) / 2.0).sqrt(), max_relative = 1e-12);
    assert_relative_eq!(felix_thomas_r_upper(&profile(&[1, 0, 0, 0, 1])).unwrap(), 1.0, max_relative = 1e-12);
    assert!(poincare_roots(&profile(&[1, 0, 2, 1, 1])).is_err());
}

#[test]
fn profile_validation() {
    let ok = |text: &str| BettiProfile::from_json(text).unwrap();
    let bad = |text: &str| BettiProfile::from_json(text).unwrap_err();
    let p = ok(r#"{"n": 4, "betti": [1, 0, 2, 0, 1], "formal": true, "chi": 4, "tau": 0}"#);
    assert_eq!(p.connected_p, 2);
    assert!(p.simply_connected);
    assert_eq!(ok(r#"{"n": 4, "betti": [1, 0, 2, 0, 1], "R": "inf"}"#).radius, Some(f64::INFINITY));
    assert_eq!(ok(r#"{"n": 4, "betti": [1, 0, 2, 0, 1], "R": 0.5}"#).radius, Some(0.5));
    assert!(matches!(bad(r#"{"n": 4, "betti": [1, 0, 2, 0]}"#), Error::Validation(_)));
    assert!(matches!(bad(r#"{"n": 4, "betti": [1, 0, 2, 1, 1]}"#), Error::Validation(_)));
    assert!(matches!(bad(r#"{"n": 4, "betti": [1, 1, 2, 1, 1]}"#), Error::Validation(_)));
    assert!(matches!(bad(r#"{"n": 4, "betti": [2, 0, 2, 0, 2]}"#), Error::Validation(_)));
    assert!(matches!(bad(r#"{"n": 4, "betti": [1, 0, 2, 0, 1], "chi": 3}"#), Error::Validation(_)));
    assert!(matches!(bad(r#"{"n": 4, "betti": [1, 0, 2, 0, 1], "tau": 1}"#), Error::Validation(_)));
    assert!(matches!(bad(r#"{"n": 4, "betti": [1, 0, 2, 0, 1], "tau": 4}"#), Error::Validation(_)));
    assert!(matches!(bad(r#"{"n": 6, "betti": [1, 0, 1, 0, 1, 0, 1], "tau": 1}"#), Error::Validation(_)));
    assert!(matches!(bad(r#"{"n": 4, "betti": [1, 0, 2, 0, 1], "simply_connected": false}"#), Error::Validation(_)));
    assert!(matches!(bad(r#"{"n": 6, "betti": [1, 0, 1, 0, 1, 0, 1], "connected_p": 3}"#), Error::Validation(_)));
    assert!(matches!(bad(r#"{"n": 4, "betti": [1, 0, 2, 0, 1], "R": 0}"#), Error::Validation(_)));
    assert!(matches!(bad(r#"{"n": 4, "betti": [1, 0, 2, 0, 1], "R": "big"}"#), Error::Parse(_)));
    assert!(matches!(bad(r#"{"n": 4, "betti": [1, 0, 2, 0, 1], "colour": 1}"#), Error::Parse(_)));
    assert!(matches!(bad(r#"{"n": 1, "betti": [1, 1]}"#), Error::Validation(_)));
}

#[test]
fn profile_round_trips_through_json() {
    let mut p = profile(&[1, 0, 0, 2, 0, 0, 1]);
    p.connected_p = 3;
    p.radius = Some(f64::INFINITY);
    let text = serde_json::to_string(&p).unwrap();
    assert!(text.contains(r#""R":"inf""#));
    assert_eq!(BettiProfile::from_json(&text).unwrap(), p);
}

#[test]
fn certify_corollary3_threshold() {
    let mut b = vec![1, 0, COROLLARY3_B2_FLOOR + 1, COROLLARY3_B2_FLOOR + 1, 0, 1];
    let report = certify(&profile(&b)).unwrap();
    assert!(report.obstructed());
    assert_eq!(check(&report, "corollary-2").verdict, Verdict::Fail);
    assert!(report.conclusion.contains("corollary-2"));

    b[2] = COROLLARY3_B2_FLOOR;
    b[3] = COROLLARY3_B2_FLOOR;
    let at = certify(&profile(&b)).unwrap();
    assert_eq!(check(&at, "corollary-2").verdict, Verdict::Pass);

    let one = certify(&profile(&[1, 0, 1, 1, 0, 1])).unwrap();
    assert_eq!(one.verdict, Verdict::Pass);
}

#[test]
fn certify_dimension_four() {
    let report = certify(&profile(&[1, 0, 231, 0, 1])).unwrap();
    assert!(report.obstructed());
    assert_eq!(check(&report, "babenko").verdict, Verdict::Fail);
    // min|z|^2 = 1 / babenko(b_2), so the root test only bites past exp(2 pi sqrt 3).
    assert_eq!(check(&report, "felix-thomas").verdict, Verdict::Pass);
    let report = certify(&profile(&[1, 0, 230, 0, 1])).unwrap();
    assert_eq!(check(&report, "babenko").verdict, Verdict::Pass);

    let mut s2s2 = profile(&[1, 0, 2, 0, 1]);
    s2s2.chi = Some(4);
    s2s2.tau = Some(0);
    let report = certify(&s2s2).unwrap();
    assert_eq!(report.verdict, Verdict::Pass);
    assert!(report.checks.iter().filter(|c| c.applicable).all(|c| c.verdict == Verdict::Pass));
    assert_eq!(check(&report, "hitchin").verdict, Verdict::Pass);
    assert!(report.assumption.contains("assuming rationally hyperbolic"));

    let mut cp2 = profile(&[1, 0, 1, 0, 1]);
    cp2.tau = Some(1);
    let report = certify(&cp2).unwrap();
    assert_eq!(report.verdict, Verdict::Pass);
    let gl = check(&report, "gursky-lebrun");
    assert!(!gl.applicable && gl.verdict == Verdict::Fail);

    let mut large = profile(&[1, 0, 12, 0, 1]);
    large.tau = Some(0);
    assert_eq!(check(&certify(&large).unwrap(), "gursky-lebrun").verdict, Verdict::Fail);
    assert_eq!(certify(&large).unwrap().verdict, Verdict::Pass);
}

#[test]
fn certify_gating() {
    let mut p = profile(&[1, 0, 231, 0, 1]);
    p.formal = false;
    let report = certify(&p).unwrap();
    assert!(!check(&report, "felix-thomas").applicable);
    assert!(!check(&report, "corollary-1").applicable);
    assert_eq!(check(&report, "babenko").verdict, Verdict::Fail);

    p.radius = Some(f64::INFINITY);
    let report = certify(&p).unwrap();
    assert_eq!(report.verdict, Verdict::Pass);
    assert!(report.assumption.contains("elliptic"));

    let mut q = profile(&[1, 0, 3, 0, 1]);
    q.radius = Some(1e-3);
    let report = certify(&q).unwrap();
    assert_eq!(check(&report, "theorem-a").verdict, Verdict::Fail);
    q.radius = Some(0.5);
    assert_eq!(check(&certify(&q).unwrap(), "theorem-a").verdict, Verdict::Pass);
}

#[test]
fn certify_never_obstructs_elliptic_examples() {
    // Spheres, products of spheres and projective spaces.
    let examples: [&[u64]; 8] = [
        &[1, 0, 1],
        &[1, 0, 0, 1],
        &[1, 0, 1, 0, 1],
        &[1, 0, 2, 0, 1],
        &[1, 0, 1, 1, 0, 1],
        &[1, 0, 1, 0, 1, 0, 1],
        &[1, 0, 0, 2, 0, 0, 1],
        &[1, 0, 1, 0, 2, 0, 1, 0, 1],
    ];
    for b in examples {
        let report = certify(&profile(b)).unwrap();
        assert_eq!(report.verdict, Verdict::Pass, "{b:?}\n{}", report.to_text());
    }
}

#[test]
fn report_renders_large_thresholds() {
    let b = {
        let mut b = vec![0u64; 21];
        b[0] = 1;
        b[20] = 1;
        b
    };
    let report = certify(&profile(&b)).unwrap();
    let cor1 = check(&report, "corollary-1");
    assert!(matches!(cor1.threshold, Some(Quantity::Large(_))));
    let text = report.to_text();
    assert!(text.contains("corollary-1"));
    assert!(text.contains("verdict: no obstruction found"));
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["verdict"], "pass");
    assert!(json["checks"][2]["threshold"]["exponent"].as_i64().unwrap() > 100);
}

/// Random duality-valid profiles with `b_1 = 0`.
fn duality_profile(max_n: usize, max_b: u64) -> impl Strategy<Value = BettiProfile> {
    (2..=max_n).prop_flat_map(move |n| {
        prop::collection::vec(0..=max_b, n / 2 + 1).prop_map(move |half| {
            let mut b = vec![0u64; n + 1];
            for i in 2..=n / 2 {
                b[i] = half[i];
                b[n - i] = half[i];
            }
            b[0] = 1;
            b[n] = 1;
            profile(&b)
        })
    })
}

/// Integers spread evenly in magnitude over `[1, 10^decades]`.
fn log_uniform(decades: f64) -> impl Strategy<Value = u64> {
    (0.0..decades).prop_map(|u: f64| 10f64.powf(u) as u64)
}

/// Profiles of dimension 4 to 10 whose Betti numbers reach the obstruction
/// thresholds, with an index `2 <= i <= n - 2` to increase.
fn monotone_case() -> impl Strategy<Value = (BettiProfile, usize)> {
    (4usize..=10).prop_flat_map(|n| {
        (prop::collection::vec(prop_oneof![Just(0u64), log_uniform(10.0)], n / 2 + 1), 2..=n - 2).prop_map(
            move |(half, i)| {
                let mut b = vec![0u64; n + 1];
                for k in 2..=n / 2 {
                    b[k] = half[k];
                    b[n - k] = half[k];
                }
                b[0] = 1;
                b[n] = 1;
                (profile(&b), i)
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn roots_are_reciprocal(p in duality_profile(12, 60)) {
        let roots = poincare_roots(&p).unwrap();
        prop_assert_eq!(roots.len(), p.n);
        let inverted: Vec<_> = roots.iter().map(|z| z.inv()).collect();
        prop_assert!(multiset_distance(&roots, &inverted) < 1e-6, "{:?}", p.betti);
    }

    #[test]
    fn smallest_root_modulus_at_most_one(p in duality_profile(12, 60)) {
        let min = felix_thomas_r_upper(&p).unwrap();
        prop_assert!(min <= 1.0 + 1e-9);
        let max = poincare_roots(&p).unwrap().iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!((min - 1.0 / max).abs() <= 1e-6);
    }

    #[test]
    fn certify_is_monotone((p, i) in monotone_case(), d in log_uniform(6.0)) {
        let n = p.n;
        let before = certify(&p).unwrap();
        let mut q = p.clone();
        q.betti[i] += d;
        if n - i != i {
            q.betti[n - i] += d;
        }
        let after = certify(&q).unwrap();
        prop_assert!(!before.obstructed() || after.obstructed(), "{:?} -> {:?}", p.betti, q.betti);
    }

    #[test]
    fn passing_profiles_satisfy_the_total_bound(p in duality_profile(10, 3000)) {
        let report = certify(&p).unwrap();
        prop_assume!(!report.obstructed());
        let bound = corollary_suma_bound(p.n, felix_thomas_r_upper(&p).unwrap()).unwrap();
        prop_assert!(bound.log10() >= (p.total_betti() as f64).log10() - 1e-9);
    }
}
