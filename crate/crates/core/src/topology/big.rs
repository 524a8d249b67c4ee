//! Positive reals too large for `f64`, carried as a decimal mantissa and exponent.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Values at or above this are reported in scientific form only.
pub const LARGE_THRESHOLD_LOG10: f64 = 15.0;

/// A positive real `mantissa * 10^exponent` with `1 <= mantissa < 10`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BigValue {
    pub mantissa: f64,
    pub exponent: i64,
}

impl BigValue {
    /// From a positive finite `f64`, exactly up to rounding of the mantissa.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !(x > 0.0) || !x.is_finite() {
            return None;
        }
        let mut exponent = x.log10().floor() as i64;
        let mut mantissa = x / 10f64.powi(exponent as i32);
        // log10 can land one off near exact powers of ten.
        if mantissa >= 10.0 {
            mantissa /= 10.0;
            exponent += 1;
        } else if mantissa < 1.0 {
            mantissa *= 10.0;
            exponent -= 1;
        }
        Some(BigValue { mantissa, exponent })
    }

    pub fn from_log10(l: f64) -> Option<Self> {
        if !l.is_finite() {
            return None;
        }
        if l.abs() < 300.0 {
            return Self::from_f64(10f64.powf(l));
        }
        let exponent = l.floor();
        Some(BigValue { mantissa: 10f64.powf(l - exponent), exponent: exponent as i64 })
    }

    pub fn log10(&self) -> f64 {
        self.exponent as f64 + self.mantissa.log10()
    }

    /// The value as `f64`; infinite when it overflows.
    pub fn to_f64(&self) -> f64 {
        if self.exponent > 308 {
            return f64::INFINITY;
        }
        self.mantissa * 10f64.powi(self.exponent as i32)
    }

    pub fn is_large(&self) -> bool {
        self.log10() >= LARGE_THRESHOLD_LOG10
    }
}

impl fmt::Display for BigValue {
    /// Six significant digits: plain below 10^15, scientific above.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_large() || self.exponent < -4 {
            write!(f, "{:.5}e{}", self.mantissa, self.exponent)
        } else {
            write!(f, "{}", crate::numfmt::sig6(self.to_f64()))
        }
    }
}
