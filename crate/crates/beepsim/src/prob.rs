//! Exact rational probabilities. Never floating point: every value is a
//! reduced `BigRational` in [0, 1], so validation intervals, transition sums,
//! and analyzer mass accounting are bit-exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProbError {
    #[error("probability {0} is outside [0, 1]")]
    OutOfRange(String),
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("cannot parse rational from `{0}`")]
    Unparseable(String),
}

/// A probability: reduced rational in [0, 1].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prob(BigRational);

impl Prob {
    pub fn zero() -> Self {
        Prob(BigRational::zero())
    }

    pub fn one() -> Self {
        Prob(BigRational::one())
    }

    pub fn new(r: BigRational) -> Result<Self, ProbError> {
        if r.is_negative() || r > BigRational::one() {
            return Err(ProbError::OutOfRange(r.to_string()));
        }
        Ok(Prob(r))
    }

    pub fn from_u64(num: u64, den: u64) -> Result<Self, ProbError> {
        if den == 0 {
            return Err(ProbError::ZeroDenominator);
        }
        Prob::new(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn into_ratio(self) -> BigRational {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    /// Reduced numerator/denominator as machine words, when they fit.
    pub fn to_u64_parts(&self) -> Option<(u64, u64)> {
        Some((self.0.numer().to_u64()?, self.0.denom().to_u64()?))
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.0)
    }
}

impl fmt::Display for Prob {
    /// Canonical `num/den` form, including `0/1` and `1/1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for Prob {
    type Err = ProbError;

    fn from_str(s: &str) -> Result<Self, ProbError> {
        Prob::new(parse_rational(s)?)
    }
}

/// Parse `a/b`, an integer, or a decimal (`0.1` becomes exactly 1/10).
pub fn parse_rational(s: &str) -> Result<BigRational, ProbError> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| ProbError::Unparseable(s.into()))?;
        let d = BigInt::from_str(d.trim()).map_err(|_| ProbError::Unparseable(s.into()))?;
        if d.is_zero() {
            return Err(ProbError::ZeroDenominator);
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let int = if int.is_empty() { "0" } else { int };
        let neg = int.starts_with('-');
        let whole = BigInt::from_str(int).map_err(|_| ProbError::Unparseable(s.into()))?;
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ProbError::Unparseable(s.into()));
        }
        let digits = BigInt::from_str(frac).map_err(|_| ProbError::Unparseable(s.into()))?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_part = BigRational::new(digits, scale);
        let whole = BigRational::from_integer(whole);
        return Ok(if neg { whole - frac_part } else { whole + frac_part });
    }
    let n = BigInt::from_str(s).map_err(|_| ProbError::Unparseable(s.into()))?;
    Ok(BigRational::from_integer(n))
}

/// Lossy float view for reports. Exact values stay rational everywhere else.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Denominators can outgrow f64; divide after a partial reduction.
        let n = r.numer().to_f64().unwrap_or(f64::MAX);
        let d = r.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("1/8").unwrap(), BigRational::new(1.into(), 8.into()));
        assert_eq!(parse_rational("0.1").unwrap(), BigRational::new(1.into(), 10.into()));
        assert_eq!(parse_rational("2").unwrap(), BigRational::from_integer(2.into()));
        assert_eq!(parse_rational("0.25").unwrap(), BigRational::new(1.into(), 4.into()));
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn prob_bounds() {
        assert!(Prob::from_u64(3, 2).is_err());
        assert!(Prob::from_u64(1, 2).is_ok());
        assert_eq!(Prob::from_u64(2, 4).unwrap().to_string(), "1/2");
    }

    #[test]
    fn display_round_trips() {
        for (n, d) in [(0u64, 1u64), (1, 1), (1, 3), (7, 9)] {
            let p = Prob::from_u64(n, d).unwrap();
            assert_eq!(p.to_string().parse::<Prob>().unwrap(), p);
        }
    }
}
