//! Exact rationals for efficiency parameters and resource ledgers.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;

use crate::error::{invalid, Error, Result};

/// A reduced fraction `num/den` with `den >= 1` and `gcd(num, den) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    num: i64,
    den: i64,
}

impl Rational {
    pub const ZERO: Rational = Rational { num: 0, den: 1 };
    pub const ONE: Rational = Rational { num: 1, den: 1 };

    /// Builds the reduced fraction `num/den`. A negative denominator flips
    /// both signs.
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(invalid("zero denominator"));
        }
        let g = num.gcd(&den);
        let (mut n, mut d) = if g == 0 { (0, 1) } else { (num / g, den / g) };
        if d < 0 {
            n = -n;
            d = -d;
        }
        Ok(Rational { num: n, den: d })
    }

    pub fn integer(n: i64) -> Self {
        Rational { num: n, den: 1 }
    }

    pub fn numer(&self) -> i64 {
        self.num
    }

    pub fn denom(&self) -> i64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// `1 - self`, still reduced.
    pub fn complement(&self) -> Self {
        Rational {
            num: self.den - self.num,
            den: self.den,
        }
    }

    /// True when the value lies in the closed unit interval.
    pub fn in_unit_interval(&self) -> bool {
        self.num >= 0 && self.num <= self.den
    }

    pub fn checked_add(&self, other: &Rational) -> Option<Rational> {
        let l = self.den.lcm(&other.den);
        let a = self.num.checked_mul(l / self.den)?;
        let b = other.num.checked_mul(l / other.den)?;
        Rational::new(a.checked_add(b)?, l).ok()
    }

    pub fn checked_mul(&self, other: &Rational) -> Option<Rational> {
        let g1 = self.num.gcd(&other.den).max(1);
        let g2 = other.num.gcd(&self.den).max(1);
        let n = (self.num / g1).checked_mul(other.num / g2)?;
        let d = (self.den / g2).checked_mul(other.den / g1)?;
        Rational::new(n, d).ok()
    }
}

/// Reduces `num/den` to lowest terms.
pub fn reduce_rational(num: i64, den: i64) -> Result<Rational> {
    Rational::new(num, den)
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num as i128 * other.den as i128).cmp(&(other.num as i128 * self.den as i128))
    }
}

/// Parses `a/b`, an integer, or a finite decimal literal such as `0.35`
/// (converted exactly, `0.35 = 7/20`).
impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || invalid(format!("cannot parse '{s}' as a rational"));
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            return Rational::new(n, d);
        }
        if let Some((int_part, frac_part)) = s.split_once('.') {
            if frac_part.is_empty() || !frac_part.bytes().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            if frac_part.len() > 15 {
                return Err(invalid(format!("too many decimal digits in '{s}'")));
            }
            let negative = int_part.starts_with('-');
            let int_digits = int_part.trim_start_matches(['-', '+']);
            let whole: i64 = if int_digits.is_empty() {
                0
            } else {
                int_digits.parse().map_err(|_| bad())?
            };
            let scale = 10i64.pow(frac_part.len() as u32);
            let frac: i64 = frac_part.parse().map_err(|_| bad())?;
            let mag = whole
                .checked_mul(scale)
                .and_then(|w| w.checked_add(frac))
                .ok_or_else(bad)?;
            return Rational::new(if negative { -mag } else { mag }, scale);
        }
        let n: i64 = s.parse().map_err(|_| bad())?;
        Ok(Rational::integer(n))
    }
}
