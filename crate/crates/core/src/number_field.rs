//! Finite places of `Q` and of quadratic fields `Q(√d)`, and deterministic
//! values of the Dedekind zeta function used as oracles for the Monte Carlo
//! estimator.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A number field supported by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum FieldSpec {
    Rationals,
    /// `Q(√d)` with `d` squarefree, `d ∉ {0, 1}`.
    Quadratic { d: i64, discriminant: i64 },
}

impl FieldSpec {
    pub fn quadratic(d: i64) -> Result<Self> {
        if d == 0 || d == 1 {
            return Err(Error::InvalidField(format!("d = {d} does not define a quadratic field")));
        }
        if !is_squarefree(d) {
            return Err(Error::InvalidField(format!("d = {d} is not squarefree")));
        }
        let discriminant = if d.rem_euclid(4) == 1 { d } else { 4 * d };
        Ok(FieldSpec::Quadratic { d, discriminant })
    }

    /// Degree `[K : Q]`.
    pub fn degree(&self) -> u32 {
        match self {
            FieldSpec::Rationals => 1,
            FieldSpec::Quadratic { .. } => 2,
        }
    }

    /// Field discriminant (`1` for `Q`).
    pub fn discriminant(&self) -> i64 {
        match self {
            FieldSpec::Rationals => 1,
            FieldSpec::Quadratic { discriminant, .. } => *discriminant,
        }
    }

    /// The quadratic character `n ↦ (D/n)` attached to the field; constant `1`
    /// for `Q`.
    pub fn character(&self, n: u64) -> i8 {
        match self {
            FieldSpec::Rationals => 1,
            FieldSpec::Quadratic { discriminant, .. } => {
                kronecker_symbol(*discriminant, n).expect("validated discriminant")
            }
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Rationals => write!(f, "Q"),
            FieldSpec::Quadratic { d, .. } => write!(f, "Q(sqrt{d})"),
        }
    }
}

impl FromStr for FieldSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "Q" {
            return Ok(FieldSpec::Rationals);
        }
        let inner = s
            .strip_prefix("Q(sqrt")
            .and_then(|rest| rest.strip_suffix(')'))
            .ok_or_else(|| Error::Parse(format!("expected \"Q\" or \"Q(sqrt<d>)\", got {s:?}")))?;
        let d: i64 = inner
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad integer {inner:?} in field spec")))?;
        FieldSpec::quadratic(d)
    }
}

impl From<FieldSpec> for String {
    fn from(f: FieldSpec) -> String {
        f.to_string()
    }
}

impl TryFrom<String> for FieldSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// How a rational prime behaves in the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Splitting {
    Split,
    Inert,
    Ramified,
}

/// A finite place `v` of `K`.
///
/// `index` is the position of the place in the global ordering by
/// `(q, p, j)` where `j` separates the two places over a split prime. Places
/// with larger norm are always appended, so the index of a place never depends
/// on the enumeration cut-off; it keys the random streams of the place.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FinitePlace {
    pub p: u64,
    /// Residue degree.
    pub f: u32,
    /// Ramification index.
    pub e: u32,
    /// Residue field size `p^f`.
    pub q: u64,
    pub index: usize,
}

impl FinitePlace {
    pub fn is_ramified(&self) -> bool {
        self.e > 1
    }
}

/// Value of `ζ_K(s)` from a truncated product or series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaOracleResult {
    pub value: Complex64,
    /// Certified bound on the omitted part; see [`TailKind`] for what it bounds.
    pub tail_bound: f64,
    /// Norm bound for products, number of terms for series.
    pub cutoff: u64,
    pub tail_kind: TailKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    /// Bound on `|log ∏ omitted factors|`.
    LogProduct,
    /// Bound on the omitted series mass `Σ |a_n n^{-s}|`.
    SeriesMass,
}

impl ZetaOracleResult {
    /// Certified bound on `|ζ_K(s) − value|`.
    pub fn abs_error_bound(&self) -> f64 {
        match self.tail_kind {
            // |value·(e^L − 1)| ≤ |value|·(e^{|L|} − 1)
            TailKind::LogProduct => self.value.norm() * self.tail_bound.exp_m1(),
            TailKind::SeriesMass => self.tail_bound,
        }
    }
}

pub(crate) fn check_half_plane(s: Complex64) -> Result<()> {
    if s.re > 1.0 && s.re.is_finite() && s.im.is_finite() {
        Ok(())
    } else {
        Err(Error::NonConvergent(s.re))
    }
}

fn is_squarefree(d: i64) -> bool {
    let n = d.unsigned_abs();
    let mut k = 2u64;
    while k * k <= n {
        if n.is_multiple_of(k * k) {
            return false;
        }
        k += 1;
    }
    true
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut k = 3u64;
    while k.saturating_mul(k) <= n {
        if n.is_multiple_of(k) {
            return false;
        }
        k += 2;
    }
    true
}

/// Primes `≤ n` by the sieve of Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

/// Jacobi symbol `(a/n)` for odd `n ≥ 1`.
fn jacobi(mut a: u64, mut n: u64) -> i8 {
    debug_assert!(n % 2 == 1);
    a %= n;
    let mut result = 1i8;
    while a != 0 {
        while a.is_multiple_of(2) {
            a /= 2;
            if matches!(n % 8, 3 | 5) {
                result = -result;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            result = -result;
        }
        a %= n;
    }
    if n == 1 {
        result
    } else {
        0
    }
}

/// Kronecker symbol `(D/n)` for a discriminant `D ≡ 0, 1 (mod 4)`.
pub fn kronecker_symbol(d: i64, n: u64) -> Result<i8> {
    if d.rem_euclid(4) > 1 {
        return Err(Error::BadDiscriminant(d));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("kronecker symbol needs n >= 1".into()));
    }
    let twos = n.trailing_zeros();
    let odd = n >> twos;
    let mut sign = 1i8;
    if twos > 0 {
        let chi2 = match d.rem_euclid(8) {
            1 | 7 => 1,
            3 | 5 => -1,
            _ => 0,
        };
        if chi2 == 0 {
            return Ok(0);
        }
        if chi2 == -1 && twos % 2 == 1 {
            sign = -1;
        }
    }
    let a = (d as i128).rem_euclid(odd as i128) as u64;
    Ok(sign * jacobi(a, odd))
}

pub fn splitting(field: &FieldSpec, p: u64) -> Splitting {
    match field.character(p) {
        1 => Splitting::Split,
        -1 => Splitting::Inert,
        _ => Splitting::Ramified,
    }
}

/// All finite places with `q ≤ norm_bound`, ordered by `(q, p, j)`.
pub fn enumerate_places(field: &FieldSpec, norm_bound: u64) -> Result<Vec<FinitePlace>> {
    if norm_bound < 2 {
        return Err(Error::InvalidArgument(format!("norm bound must be >= 2 (got {norm_bound})")));
    }
    // (q, p, j, f, e)
    let mut raw: Vec<(u64, u64, u32, u32, u32)> = Vec::new();
    for p in primes_up_to(norm_bound) {
        match field {
            FieldSpec::Rationals => raw.push((p, p, 0, 1, 1)),
            FieldSpec::Quadratic { .. } => match splitting(field, p) {
                Splitting::Split => {
                    raw.push((p, p, 0, 1, 1));
                    raw.push((p, p, 1, 1, 1));
                }
                Splitting::Ramified => raw.push((p, p, 0, 1, 2)),
                Splitting::Inert => {
                    if let Some(q) = p.checked_mul(p).filter(|&q| q <= norm_bound) {
                        raw.push((q, p, 0, 2, 1));
                    }
                }
            },
        }
    }
    raw.sort_unstable();
    Ok(raw
        .into_iter()
        .enumerate()
        .map(|(index, (q, p, _, f, e))| FinitePlace { p, f, e, q, index })
        .collect())
}

/// The places of `K` lying over the rational prime `p`.
pub fn places_above(field: &FieldSpec, p: u64) -> Result<Vec<FinitePlace>> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    let q_max = match (field, splitting(field, p)) {
        (FieldSpec::Quadratic { .. }, Splitting::Inert) => p
            .checked_mul(p)
            .ok_or_else(|| Error::InvalidArgument(format!("p = {p} too large")))?,
        _ => p,
    };
    let mut places = enumerate_places(field, q_max)?;
    places.retain(|v| v.p == p);
    Ok(places)
}

/// `(1 − q^{-s})^{-1}`.
pub fn local_euler_factor(q: u64, s: Complex64) -> Complex64 {
    let q_pow = (-s * (q as f64).ln()).exp();
    (Complex64::new(1.0, 0.0) - q_pow).inv()
}

/// `ζ_K(s)` as the product of local factors over places with `q ≤ norm_bound`.
///
/// The tail bound is on the logarithm of the omitted factors:
/// `|Σ_{q_v > Q} log(1 − q_v^{-s})| ≤ 2·g·Q^{1−σ}/(σ−1)`.
pub fn euler_product_zeta(field: &FieldSpec, s: Complex64, norm_bound: u64) -> Result<ZetaOracleResult> {
    check_half_plane(s)?;
    let places = enumerate_places(field, norm_bound)?;
    let value = places
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, v| acc * local_euler_factor(v.q, s));
    let sigma = s.re;
    let g = field.degree() as f64;
    let tail_bound = 2.0 * g * (norm_bound as f64).powf(1.0 - sigma) / (sigma - 1.0);
    Ok(ZetaOracleResult {
        value,
        tail_bound,
        cutoff: norm_bound,
        tail_kind: TailKind::LogProduct,
    })
}

/// Number of ideals of norm `n`, for `n = 0..=n_max` (entry 0 is unused).
pub fn ideal_counts(field: &FieldSpec, n_max: usize) -> Vec<u32> {
    let mut counts = vec![0u32; n_max + 1];
    match field {
        FieldSpec::Rationals => counts.iter_mut().skip(1).for_each(|c| *c = 1),
        FieldSpec::Quadratic { .. } => {
            // a_n = Σ_{t | n} χ(t), accumulated over multiples of each t.
            let mut acc = vec![0i64; n_max + 1];
            for t in 1..=n_max {
                let chi = field.character(t as u64) as i64;
                if chi != 0 {
                    let mut k = t;
                    while k <= n_max {
                        acc[k] += chi;
                        k += t;
                    }
                }
            }
            for (c, a) in counts.iter_mut().zip(acc) {
                *c = a as u32;
            }
        }
    }
    counts
}

/// Number of ideals of norm `n`.
pub fn ideal_count(field: &FieldSpec, n: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::InvalidArgument("ideal norm must be >= 1".into()));
    }
    Ok(match field {
        FieldSpec::Rationals => 1,
        FieldSpec::Quadratic { .. } => {
            let mut sum = 0i64;
            let mut t = 1u64;
            while t * t <= n {
                if n.is_multiple_of(t) {
                    sum += field.character(t) as i64;
                    if t * t != n {
                        sum += field.character(n / t) as i64;
                    }
                }
                t += 1;
            }
            sum as u64
        }
    })
}

/// `ζ_K(s)` as the partial Dirichlet series `Σ_{n ≤ N} a_n n^{-s}`.
///
/// Tail bounds: `N^{1−σ}/(σ−1)` for `Q`; for quadratic fields `a_n ≤ τ(n)` and
/// `Σ_{n ≤ x} τ(n) ≤ x(ln x + 1)`, which by partial summation gives
/// `σ·N^{1−σ}·((ln N + 1)/(σ−1) + 1/(σ−1)²)`.
pub fn dirichlet_series_zeta(field: &FieldSpec, s: Complex64, n_terms: u64) -> Result<ZetaOracleResult> {
    check_half_plane(s)?;
    if n_terms == 0 {
        return Err(Error::InvalidArgument("n_terms must be >= 1".into()));
    }
    let counts = ideal_counts(field, n_terms as usize);
    let mut value = Complex64::new(0.0, 0.0);
    // Summed from the small end of the magnitudes upward.
    for n in (1..=n_terms as usize).rev() {
        let a = counts[n];
        if a != 0 {
            value += (-s * (n as f64).ln()).exp() * a as f64;
        }
    }
    let sigma = s.re;
    let big_n = n_terms as f64;
    let head = big_n.powf(1.0 - sigma);
    let tail_bound = match field {
        FieldSpec::Rationals => head / (sigma - 1.0),
        FieldSpec::Quadratic { .. } => {
            sigma * head * ((big_n.ln() + 1.0) / (sigma - 1.0) + 1.0 / (sigma - 1.0).powi(2))
        }
    };
    Ok(ZetaOracleResult {
        value,
        tail_bound,
        cutoff: n_terms,
        tail_kind: TailKind::SeriesMass,
    })
}
