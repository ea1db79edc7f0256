//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive};

/// Floating point type the ranking math is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + FromStr + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `log(1 + exp(x))` without overflow for large `x`.
pub fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function `1 / (1 + exp(-x))`, stable in both tails.
pub fn logistic<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Formats `x` with `digits` significant digits, in plain notation when
/// the magnitude allows and scientific notation otherwise. Trailing zeros
/// in the fraction are trimmed.
pub fn format_significant(x: f64, digits: usize) -> String {
    debug_assert!(digits >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = digits as i32 - 1 - exponent;
    if (0..=20).contains(&decimals) && (-6..=15).contains(&exponent) {
        let s = format!("{:.*}", decimals as usize, x);
        trim_fraction(&s)
    } else {
        format!("{:.*e}", digits - 1, x)
    }
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" {
            "0".to_string()
        } else {
            t.to_string()
        }
    } else {
        s.to_string()
    }
}

/// Seventeen significant digits: enough for an exact `f64` round trip.
pub fn format_exact(x: f64) -> String {
    format!("{:.16e}", x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_formatting() {
        assert_eq!(format_significant(100.0, 9), "100");
        assert_eq!(format_significant(0.125, 9), "0.125");
        assert_eq!(format_significant(-1.5, 9), "-1.5");
        assert_eq!(format_significant(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_significant(123456789.123, 9), "123456789");
        assert_eq!(format_significant(1e-9, 9), "1.00000000e-9");
    }

    #[test]
    fn exact_formatting_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(format_exact(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn stable_transcendentals() {
        assert_eq!(softplus(1000.0f64), 1000.0);
        assert!(softplus(-1000.0f64) >= 0.0);
        assert!((softplus(0.0f64) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(logistic(0.0f64), 0.5);
        assert!(logistic(-1000.0f64).is_finite());
        assert!((logistic(3.0f32) + logistic(-3.0f32) - 1.0).abs() < 1e-6);
    }
}
