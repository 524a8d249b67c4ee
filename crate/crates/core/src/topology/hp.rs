//! Fixed-point decimal arithmetic with 60 digits, used by the tests as an
//! independent oracle for thresholds that double precision cannot settle.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;

const DIGITS: u32 = 60;

fn scale() -> BigInt {
    BigInt::from(10u32).pow(DIGITS)
}

/// A real number `raw / 10^60`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Hp(BigInt);

impl Hp {
    pub fn int(n: i64) -> Self {
        Hp(BigInt::from(n) * scale())
    }

    pub fn ratio(p: i64, q: i64) -> Self {
        Hp(BigInt::from(p) * scale() / BigInt::from(q))
    }

    pub fn sqrt(&self) -> Self {
        assert!(self.0.sign() != num_bigint::Sign::Minus);
        Hp((&self.0 * scale()).sqrt())
    }

    pub fn floor(&self) -> BigInt {
        let (q, r) = (&self.0 / scale(), &self.0 % scale());
        if r.sign() == num_bigint::Sign::Minus {
            q - 1
        } else {
            q
        }
    }

    /// Nearest `f64`, via the leading digits.
    pub fn to_f64(&self) -> f64 {
        let text = self.0.to_string();
        let (negative, digits) = match text.strip_prefix('-') {
            Some(d) => (true, d),
            None => (false, text.as_str()),
        };
        let v: f64 = format!("{digits}e-{DIGITS}").parse().expect("decimal");
        if negative {
            -v
        } else {
            v
        }
    }

    fn abs_lt(&self, other: &Hp) -> bool {
        self.0.magnitude() < other.0.magnitude()
    }

    /// `arctan(1/m)` by its alternating series.
    fn arctan_inv(m: i64) -> Self {
        let m2 = BigInt::from(m * m);
        let mut power = scale() / BigInt::from(m);
        let mut sum = BigInt::from(0);
        let mut k = 0i64;
        while power.sign() != num_bigint::Sign::NoSign {
            let term = &power / BigInt::from(2 * k + 1);
            if k % 2 == 0 {
                sum += term;
            } else {
                sum -= term;
            }
            power /= &m2;
            k += 1;
        }
        Hp(sum)
    }

    /// Machin's formula `pi = 16 atan(1/5) - 4 atan(1/239)`.
    pub fn pi() -> Self {
        Hp(Self::arctan_inv(5).0 * 16 - Self::arctan_inv(239).0 * 4)
    }

    pub fn exp(&self) -> Self {
        // Halve until |x| < 1/2, sum the Taylor series, square back.
        let half = Hp::ratio(1, 2);
        let mut x = self.clone();
        let mut halvings = 0;
        while !x.abs_lt(&half) {
            x = Hp(x.0 / 2);
            halvings += 1;
        }
        let mut term = Hp::int(1);
        let mut sum = Hp::int(1);
        let mut k = 1i64;
        while term.0.sign() != num_bigint::Sign::NoSign {
            term = Hp((&term * &x).0 / BigInt::from(k));
            sum = &sum + &term;
            k += 1;
        }
        for _ in 0..halvings {
            sum = &sum * &sum;
        }
        sum
    }

    /// Natural logarithm by Halley's iteration on `exp`.
    pub fn ln(&self) -> Self {
        assert!(self.0.sign() == num_bigint::Sign::Plus);
        let guess = self.to_f64().ln();
        let mut y = Hp(BigInt::from((guess * 1e15).round() as i64) * BigInt::from(10u32).pow(DIGITS - 15));
        for _ in 0..8 {
            let e = y.exp();
            let step = &Hp::int(2) * &(&(self - &e) / &(self + &e));
            y = &y + &step;
        }
        y
    }

    pub fn log10(&self) -> Self {
        &self.ln() / &Hp::int(10).ln()
    }

    pub fn powi(&self, n: u32) -> Self {
        (0..n).fold(Hp::int(1), |acc, _| &acc * self)
    }
}

impl Add for &Hp {
    type Output = Hp;
    fn add(self, o: &Hp) -> Hp {
        Hp(&self.0 + &o.0)
    }
}

impl Sub for &Hp {
    type Output = Hp;
    fn sub(self, o: &Hp) -> Hp {
        Hp(&self.0 - &o.0)
    }
}

impl Mul for &Hp {
    type Output = Hp;
    fn mul(self, o: &Hp) -> Hp {
        Hp(&self.0 * &o.0 / scale())
    }
}

impl Div for &Hp {
    type Output = Hp;
    fn div(self, o: &Hp) -> Hp {
        Hp(&self.0 * scale() / &o.0)
    }
}

impl Neg for &Hp {
    type Output = Hp;
    fn neg(self) -> Hp {
        Hp(-&self.0)
    }
}

/// Compare to an `f64` by relative error.
pub fn rel_err(exact: &Hp, approx: f64) -> f64 {
    let e = exact.to_f64();
    ((approx - e) / e).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_matches_known_constants() {
        // Digits of pi, e, ln 2 and sqrt 2 to 40 places.
        let check = |x: Hp, digits: &str| {
            let got = x.0.to_string();
            assert!(got.starts_with(digits), "{got} vs {digits}");
        };
        check(Hp::pi(), "3141592653589793238462643383279502884197");
        check(Hp::int(1).exp(), "2718281828459045235360287471352662497757");
        check(Hp::int(2).ln(), "693147180559945309417232121458176568075");
        check(Hp::int(2).sqrt(), "1414213562373095048801688724209698078569");
    }

    #[test]
    fn exp_and_ln_are_inverse() {
        let x = Hp::ratio(123_456, 1000);
        let back = x.exp().ln();
        assert!((&back - &x).0.magnitude() < BigInt::from(10u32).pow(10).magnitude());
        assert_eq!(Hp::ratio(-3, 2).exp().floor(), BigInt::from(0));
    }
}
