//! Finite-precision 𝔭-adic elements written as digit expansions
//! `x = Σ_{i ≥ m} r_i π^i` with digit labels `r_i ∈ {0, …, q−1}`.
//!
//! Only the additive and ultrametric structure is modelled. For `q = p` the
//! digits subtract with borrows in base `q`; for `q = p²` a digit label `r` is
//! read as the pair `(r div p, r mod p)` and subtracts component-wise mod `p`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::number_field::is_prime;

/// A 𝔭-adic number known on digit indices `< precision`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PAdicApprox {
    q: u64,
    /// Index of the first nonzero digit; `None` for the zero sentinel.
    lowest: Option<i64>,
    /// Digits at indices `lowest .. precision`.
    digits: Vec<u32>,
    precision: i64,
}

fn check_q(q: u64) -> Result<()> {
    if q < 2 || q > u32::MAX as u64 {
        return Err(Error::InvalidArgument(format!("residue field size q = {q} out of range")));
    }
    Ok(())
}

impl PAdicApprox {
    pub fn zero(q: u64, precision: i64) -> Result<Self> {
        check_q(q)?;
        Ok(Self { q, lowest: None, digits: Vec::new(), precision })
    }

    /// Builds `Σ digits[k] π^{start+k}`, known up to `start + digits.len()`.
    pub fn from_digits(q: u64, start: i64, digits: &[u32]) -> Result<Self> {
        check_q(q)?;
        if let Some(&bad) = digits.iter().find(|&&d| d as u64 >= q) {
            return Err(Error::InvalidArgument(format!("digit {bad} out of range for q = {q}")));
        }
        let precision = start + digits.len() as i64;
        Ok(match digits.iter().position(|&d| d != 0) {
            None => Self { q, lowest: None, digits: Vec::new(), precision },
            Some(k) => Self {
                q,
                lowest: Some(start + k as i64),
                digits: digits[k..].to_vec(),
                precision,
            },
        })
    }

    /// Digits on `lo..hi` produced by `digit_at`; anything below `lo` is zero.
    pub(crate) fn from_fn(q: u64, lo: i64, hi: i64, digit_at: impl FnMut(i64) -> u32) -> Result<Self> {
        let digits: Vec<u32> = (lo..hi.max(lo)).map(digit_at).collect();
        let mut x = Self::from_digits(q, lo, &digits)?;
        x.precision = hi;
        Ok(x)
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn precision(&self) -> i64 {
        self.precision
    }

    pub fn is_zero(&self) -> bool {
        self.lowest.is_none()
    }

    /// Index of the leading nonzero digit (`k` with `|x| = q^{-k}`).
    pub fn val_offset(&self) -> Option<i64> {
        self.lowest
    }

    /// Digit at index `i`, or `None` if `i` is beyond the precision.
    pub fn digit(&self, i: i64) -> Option<u32> {
        if i >= self.precision {
            return None;
        }
        match self.lowest {
            Some(lo) if i >= lo => Some(self.digits[(i - lo) as usize]),
            _ => Some(0),
        }
    }

    /// `|x| = q^{-val_offset}`, and `0` for the zero sentinel.
    pub fn norm(&self) -> f64 {
        match self.lowest {
            None => 0.0,
            Some(k) => (self.q as f64).powf(-(k as f64)),
        }
    }

    /// Drops every digit at index `≥ precision`.
    pub fn truncate(&self, precision: i64) -> Self {
        if precision >= self.precision {
            return self.clone();
        }
        let lo = self.lowest.unwrap_or(precision).min(precision);
        Self::from_fn(self.q, lo, precision, |i| self.digit(i).unwrap()).expect("valid q")
    }

    fn check_same_q(&self, other: &Self) -> Result<()> {
        if self.q != other.q {
            return Err(Error::ResidueMismatch(self.q, other.q));
        }
        Ok(())
    }

    /// Lowest index at which the represented digits of `self` and `other`
    /// differ.
    pub fn first_difference(&self, other: &Self) -> Result<i64> {
        self.check_same_q(other)?;
        let precision = self.precision.min(other.precision);
        let start = match (self.lowest, other.lowest) {
            (None, None) => return Err(Error::InsufficientPrecision(precision)),
            (Some(a), None) | (None, Some(a)) => a,
            (Some(a), Some(b)) => a.min(b),
        };
        (start..precision)
            .find(|&i| self.digit(i) != other.digit(i))
            .ok_or(Error::InsufficientPrecision(precision))
    }

    /// `self − other`, known up to the smaller precision.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_q(other)?;
        let precision = self.precision.min(other.precision);
        let lo = match (self.lowest, other.lowest) {
            (None, None) => return Self::zero(self.q, precision),
            (Some(a), None) | (None, Some(a)) => a,
            (Some(a), Some(b)) => a.min(b),
        };
        let q = self.q;
        let digit = |x: &Self, i: i64| x.digit(i).unwrap_or(0) as i64;
        match DigitArithmetic::for_q(q)? {
            DigitArithmetic::Borrow => {
                let mut borrow = 0i64;
                Self::from_fn(q, lo, precision, |i| {
                    let mut d = digit(self, i) - digit(other, i) - borrow;
                    borrow = 0;
                    if d < 0 {
                        d += q as i64;
                        borrow = 1;
                    }
                    d as u32
                })
            }
            DigitArithmetic::Componentwise(p) => {
                let p = p as i64;
                Self::from_fn(q, lo, precision, |i| {
                    let (a, b) = (digit(self, i), digit(other, i));
                    let hi = (a / p - b / p).rem_euclid(p);
                    let low = (a % p - b % p).rem_euclid(p);
                    (hi * p + low) as u32
                })
            }
        }
    }
}

enum DigitArithmetic {
    Borrow,
    Componentwise(u64),
}

impl DigitArithmetic {
    fn for_q(q: u64) -> Result<Self> {
        if is_prime(q) {
            return Ok(Self::Borrow);
        }
        let p = (q as f64).sqrt().round() as u64;
        if p * p == q && is_prime(p) {
            return Ok(Self::Componentwise(p));
        }
        Err(Error::InvalidArgument(format!(
            "digit arithmetic needs q = p or q = p^2, got {q}"
        )))
    }
}

/// `|x − y|`, computed from the leading digit of the difference.
pub fn ultrametric_distance(x: &PAdicApprox, y: &PAdicApprox) -> Result<f64> {
    let diff = x.sub(y)?;
    match diff.val_offset() {
        Some(_) => Ok(diff.norm()),
        None => Err(Error::InsufficientPrecision(diff.precision())),
    }
}

const DIGIT_CHARS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";

/// Text form `q=3: 1.02@-1` (digits 1, 0, 2 from index −1). Bases above 36
/// separate decimal digits with commas. The zero sentinel is `q=3: 0/P`.
impl fmt::Display for PAdicApprox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q={}: ", self.q)?;
        let Some(lo) = self.lowest else {
            return write!(f, "0/{}", self.precision);
        };
        let wide = self.q > 36;
        for (k, &d) in self.digits.iter().enumerate() {
            match k {
                0 => {}
                1 => f.write_str(".")?,
                _ if wide => f.write_str(",")?,
                _ => {}
            }
            if wide {
                write!(f, "{d}")?;
            } else {
                write!(f, "{}", DIGIT_CHARS[d as usize] as char)?;
            }
        }
        write!(f, "@{lo}")
    }
}

impl FromStr for PAdicApprox {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad digit expansion {s:?}"));
        let (head, body) = s.trim().split_once(':').ok_or_else(bad)?;
        let q: u64 = head.trim().strip_prefix("q=").ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let body = body.trim();
        if let Some(prec) = body.strip_prefix("0/") {
            return Self::zero(q, prec.parse().map_err(|_| bad())?);
        }
        let (digits, start) = body.split_once('@').ok_or_else(bad)?;
        let start: i64 = start.parse().map_err(|_| bad())?;
        let (lead, rest) = digits.split_once('.').unwrap_or((digits, ""));
        let parse_wide = |t: &str| t.parse::<u32>().map_err(|_| bad());
        let parse_char = |c: char| c.to_digit(36).ok_or_else(bad);
        let mut out = Vec::new();
        if q > 36 {
            out.push(parse_wide(lead)?);
            for t in rest.split(',').filter(|t| !t.is_empty()) {
                out.push(parse_wide(t)?);
            }
        } else {
            for c in lead.chars().chain(rest.chars()) {
                out.push(parse_char(c)?);
            }
        }
        if out.len() > 1 && rest.is_empty() || lead.is_empty() {
            return Err(bad());
        }
        Self::from_digits(q, start, &out)
    }
}

/// The closed ball `B(center, q^M) = {z : |z − center| ≤ q^M}`.
///
/// The center is stored truncated to indices `< −M`, so two balls compare
/// equal exactly when they are the same set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ball {
    radius_exp: i64,
    center: PAdicApprox,
}

impl Ball {
    pub fn new(center: &PAdicApprox, radius_exp: i64) -> Result<Self> {
        if center.precision() < -radius_exp {
            return Err(Error::InsufficientPrecision(center.precision()));
        }
        Ok(Self { radius_exp, center: center.truncate(-radius_exp) })
    }

    pub fn q(&self) -> u64 {
        self.center.q()
    }

    /// `M` such that the radius is `q^M`.
    pub fn radius_exp(&self) -> i64 {
        self.radius_exp
    }

    pub fn center(&self) -> &PAdicApprox {
        &self.center
    }

    pub fn contains(&self, z: &PAdicApprox) -> Result<bool> {
        self.center.check_same_q(z)?;
        let cut = -self.radius_exp;
        if z.precision() < cut {
            return Err(Error::InsufficientPrecision(z.precision()));
        }
        let lo = match (self.center.val_offset(), z.val_offset()) {
            (None, None) => return Ok(true),
            (Some(a), None) | (None, Some(a)) => a,
            (Some(a), Some(b)) => a.min(b),
        };
        Ok((lo..cut).all(|i| self.center.digit(i) == z.digit(i)))
    }

    /// The `q^k` disjoint balls of radius `q^{M−k}` that make up this ball.
    pub fn sub_balls(&self, k: u32) -> Result<Vec<Ball>> {
        let q = self.q();
        let count = q
            .checked_pow(k)
            .filter(|&c| c <= 1 << 24)
            .ok_or_else(|| Error::InvalidArgument(format!("q^k = {q}^{k} sub-balls is too many")))?;
        let cut = -self.radius_exp;
        let lo = self.center.val_offset().unwrap_or(cut).min(cut);
        (0..count)
            .map(|mut code| {
                let mut fresh = vec![0u32; k as usize];
                for slot in fresh.iter_mut() {
                    *slot = (code % q) as u32;
                    code /= q;
                }
                let center = PAdicApprox::from_fn(q, lo, cut + k as i64, |i| {
                    if i < cut {
                        self.center.digit(i).unwrap()
                    } else {
                        fresh[(i - cut) as usize]
                    }
                })?;
                Ball::new(&center, self.radius_exp - k as i64)
            })
            .collect()
    }
}

/// Number of disjoint balls of radius `q^M` lying at distance exactly
/// `q^{M+m}` from a fixed point: `(q−1)·q^{m−1}`.
pub fn count_balls_at_distance(q: u64, m: u32) -> Result<u64> {
    if q < 2 || m == 0 {
        return Err(Error::InvalidArgument(format!("need q >= 2 and m >= 1 (got q = {q}, m = {m})")));
    }
    q.checked_pow(m - 1)
        .and_then(|v| v.checked_mul(q - 1))
        .ok_or_else(|| Error::InvalidArgument(format!("ball count overflows for q = {q}, m = {m}")))
}

/// Uniform point on the sphere `{|x| = q^m}`, with digits up to index
/// `precision − 1`.
pub fn sample_uniform_sphere<R: Rng + ?Sized>(
    q: u64,
    m: i64,
    precision: i64,
    rng: &mut R,
) -> Result<PAdicApprox> {
    check_q(q)?;
    if precision <= -m {
        return Err(Error::InvalidArgument(format!(
            "precision {precision} leaves no digit for norm q^{m}"
        )));
    }
    let lead = -m;
    PAdicApprox::from_fn(q, lead, precision, |i| {
        if i == lead {
            rng.random_range(1..q as u32)
        } else {
            rng.random_range(0..q as u32)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn px(s: &str) -> PAdicApprox {
        s.parse().unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(PAdicApprox::zero(5, 3).unwrap().norm(), 0.0);
        assert_eq!(px("q=3: 1@-2").norm(), 9.0);
        assert_eq!(px("q=2: 1@0").norm(), 1.0);
        assert_eq!(px("q=3: 1.02@-1").norm(), 3.0);
    }

    #[test]
    fn leading_zeros_are_normalised() {
        let x = PAdicApprox::from_digits(3, -2, &[0, 0, 2, 1]).unwrap();
        assert_eq!(x.val_offset(), Some(0));
        assert_eq!(x.precision(), 2);
        assert_eq!(x.digit(-5), Some(0));
        assert_eq!(x.digit(1), Some(1));
        assert_eq!(x.digit(2), None);
        assert!(PAdicApprox::from_digits(3, 0, &[3]).is_err());
        assert!(PAdicApprox::from_digits(3, 0, &[0, 0]).unwrap().is_zero());
    }

    #[test]
    fn text_notation() {
        let x = px("q=3: 1.02@-1");
        assert_eq!(x.val_offset(), Some(-1));
        assert_eq!((x.digit(-1), x.digit(0), x.digit(1)), (Some(1), Some(0), Some(2)));
        assert_eq!(x.to_string(), "q=3: 1.02@-1");
        assert_eq!(px("q=2: 1@0").to_string(), "q=2: 1@0");
        assert_eq!(px("q=49: 12.0,48@3").to_string(), "q=49: 12.0,48@3");
        assert_eq!(px("q=11: a.0a@2").digit(2), Some(10));
        let z = PAdicApprox::zero(7, 4).unwrap();
        assert_eq!(z.to_string(), "q=7: 0/4");
        assert_eq!(px("q=7: 0/4"), z);
        for bad in ["q=3 1.0@0", "q=3: 1.0", "q=3: 3@0", "3: 1@0", "q=3: 12@0", "q=3: .1@0"] {
            assert!(bad.parse::<PAdicApprox>().is_err(), "{bad}");
        }
    }

    #[test]
    fn distance_examples() {
        let x = px("q=2: 1@0");
        let zero = PAdicApprox::zero(2, 1).unwrap();
        assert_eq!(ultrametric_distance(&x, &zero).unwrap(), 1.0);
        assert_eq!(ultrametric_distance(&px("q=3: 1@-1"), &px("q=3: 2@-1")).unwrap(), 3.0);
        assert!(matches!(
            ultrametric_distance(&x, &x.clone()),
            Err(Error::InsufficientPrecision(1))
        ));
        assert!(matches!(
            ultrametric_distance(&x, &px("q=3: 1@0")),
            Err(Error::ResidueMismatch(2, 3))
        ));
    }

    #[test]
    fn subtraction_borrows_in_prime_base() {
        // 0 − 1 = −1 = (q−1)(q−1)… in base q
        let zero = PAdicApprox::zero(5, 3).unwrap();
        let one = px("q=5: 1.00@0");
        let d = zero.sub(&one).unwrap();
        assert_eq!((d.digit(0), d.digit(1), d.digit(2)), (Some(4), Some(4), Some(4)));
        // 2 + 1·5 − 3 = 4 → digits 4, 0
        let d = px("q=5: 2.1@0").sub(&px("q=5: 3.0@0")).unwrap();
        assert_eq!((d.digit(0), d.digit(1)), (Some(4), Some(0)));
    }

    #[test]
    fn subtraction_is_componentwise_for_q_p_squared() {
        // q = 9: label 4 = (1, 1), label 8 = (2, 2); 4 − 8 = (−1, −1) = (2, 2) = 8 without borrow.
        let d = px("q=9: 4.0@0").sub(&px("q=9: 8.0@0")).unwrap();
        assert_eq!((d.digit(0), d.digit(1)), (Some(8), Some(0)));
        assert!(px("q=4: 1@0").sub(&px("q=4: 2@0")).is_ok());
        assert!(px("q=8: 1@0").sub(&px("q=8: 2@0")).is_err());
    }

    #[test]
    fn ball_count_examples() {
        assert_eq!(count_balls_at_distance(2, 2).unwrap(), 2);
        assert_eq!(count_balls_at_distance(3, 1).unwrap(), 2);
        // brute force: length-3 digit prefixes with nonzero leading digit
        let brute = (0..125u32).filter(|code| code / 25 != 0).count() as u64;
        assert_eq!(count_balls_at_distance(5, 3).unwrap(), brute);
        assert_eq!(brute, 100);
        assert!(count_balls_at_distance(1, 2).is_err());
        assert!(count_balls_at_distance(2, 0).is_err());
        assert!(count_balls_at_distance(u64::MAX, 3).is_err());
    }

    #[test]
    fn ball_counts_fill_the_big_ball() {
        for q in [2u64, 3, 5, 9] {
            for n in 1..8u32 {
                let sum: u64 = (1..=n).map(|m| count_balls_at_distance(q, m).unwrap()).sum();
                assert_eq!(sum, q.pow(n) - 1);
            }
        }
    }

    #[test]
    fn balls_compare_as_sets() {
        let a = Ball::new(&px("q=3: 1.21@-1"), 0).unwrap();
        let b = Ball::new(&px("q=3: 1.2@-1"), 0).unwrap();
        let c = Ball::new(&px("q=3: 1.22@-1"), 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.contains(&px("q=3: 1.20@-1")).unwrap());
        assert!(!a.contains(&px("q=3: 2.2@-1")).unwrap());
        assert!(a.contains(&px("q=3: 1@-2")).is_err());
        assert!(Ball::new(&px("q=3: 1@-1"), -1).is_err());
    }

    #[test]
    fn sphere_sampler_hits_requested_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (q, m) in [(2u64, 1i64), (3, 2), (9, -1), (5, 4)] {
            for _ in 0..200 {
                let x = sample_uniform_sphere(q, m, 3, &mut rng).unwrap();
                assert_eq!(x.val_offset(), Some(-m));
                assert_eq!(x.norm(), (q as f64).powi(m as i32));
            }
        }
        assert!(sample_uniform_sphere(2, 1, -1, &mut rng).is_err());
        let x = sample_uniform_sphere(2, 1, 0, &mut rng).unwrap();
        assert_eq!(x.to_string(), "q=2: 1@-1");
    }

    #[test]
    fn sphere_leading_digit_is_uniform_on_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 40_000;
        let ones = (0..n)
            .filter(|_| sample_uniform_sphere(3, 2, -1, &mut rng).unwrap().digit(-2) == Some(1))
            .count() as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((ones / n as f64 - 0.5).abs() < 4.0 * sigma);
    }
}
