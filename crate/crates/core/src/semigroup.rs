//! The transition semigroup of a rotation-invariant additive process on a
//! 𝔭-adic field, given by its Lévy tail sequence `a(M) = ν(B(0, q^M)^c)`.
//!
//! The probability of staying in a ball of radius `q^M` is
//!
//! ```text
//! P_M(t) = q^{-1}(q-1) Σ_{i≥0} q^{-i} exp(-(q-1)^{-1}(q·a(M+i) − a(M+i+1))·t)
//! ```
//!
//! and the kernel towards a ball at distance `q^{M+m}` is
//! `(q-1)^{-1} q^{1-m} (P_{M+m}(t) − P_{M+m-1}(t))`. Series are truncated after
//! `I = ⌈log_q(1/tol)⌉` terms; since every exponential is at most one, the
//! omitted weight `q^{-I-1}` bounds the error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The sequence `a(M)`, `M ∈ Z`, defining one coordinate process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpProfile {
    q: u64,
    mode: ProfileMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileMode {
    /// `a(M) = c·q^{-αM}`.
    Geometric { c: f64, alpha: f64 },
    /// Explicit values `a(start), a(start+1), …`. A table ending in `0` is
    /// extended by zeros; otherwise indices past the end are out of window.
    Table { start: i64, values: Vec<f64> },
}

impl JumpProfile {
    pub fn geometric(q: u64, c: f64, alpha: f64) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidArgument(format!("q must be >= 2 (got {q})")));
        }
        if !(c > 0.0 && c.is_finite()) || !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "geometric profile needs c > 0 and alpha > 0 (got c = {c}, alpha = {alpha})"
            )));
        }
        Ok(Self { q, mode: ProfileMode::Geometric { c, alpha } })
    }

    pub fn table(q: u64, start: i64, values: Vec<f64>) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidArgument(format!("q must be >= 2 (got {q})")));
        }
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty a(M) table".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("a(M) values must be finite and >= 0".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument("a(M) must be nonincreasing in M".into()));
        }
        Ok(Self { q, mode: ProfileMode::Table { start, values } })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn mode(&self) -> &ProfileMode {
        &self.mode
    }

    pub fn is_geometric(&self) -> bool {
        matches!(self.mode, ProfileMode::Geometric { .. })
    }

    /// `(c, α)` for geometric profiles.
    pub fn geometric_params(&self) -> Option<(f64, f64)> {
        match self.mode {
            ProfileMode::Geometric { c, alpha } => Some((c, alpha)),
            ProfileMode::Table { .. } => None,
        }
    }

    /// Lévy tail `a(M)`.
    pub fn a(&self, m: i64) -> Result<f64> {
        match &self.mode {
            ProfileMode::Geometric { c, alpha } => Ok(c * (-(alpha * m as f64) * (self.q as f64).ln()).exp()),
            ProfileMode::Table { start, values } => {
                if m < *start {
                    return Err(Error::OutOfWindow(m));
                }
                let k = (m - start) as usize;
                match values.get(k) {
                    Some(v) => Ok(*v),
                    None if *values.last().unwrap() == 0.0 => Ok(0.0),
                    None => Err(Error::OutOfWindow(m)),
                }
            }
        }
    }
}

/// A kernel or series value with its certified truncation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: f64,
    pub trunc_error: f64,
}

/// Position of the starting point relative to a target ball `B(y, q^M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceClass {
    /// `|x − y| ≤ q^M`.
    Inside,
    /// `|x − y| = q^{M+m}`, `m ≥ 1`.
    Outside(u32),
}

impl DistanceClass {
    fn outside_m(self) -> Result<Option<u32>> {
        match self {
            DistanceClass::Inside => Ok(None),
            DistanceClass::Outside(0) => Err(Error::InvalidArgument(
                "an outside distance class needs m >= 1".into(),
            )),
            DistanceClass::Outside(m) => Ok(Some(m)),
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("time must be finite and >= 0 (got {t})")))
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tolerance must be > 0 (got {tol})")))
    }
}

/// Number of retained series terms minus one: `I = ⌈log_q(1/tol)⌉`.
fn truncation_index(q: u64, tol: f64) -> u32 {
    let i = ((1.0 / tol).ln() / (q as f64).ln()).ceil();
    i.clamp(1.0, 4096.0) as u32
}

/// `1 − P_M(t)`, summed directly so that small values keep full relative
/// precision. The error is `q^{-I-1}`.
pub fn p_series_complement(profile: &JumpProfile, m: i64, t: f64, tol: f64) -> Result<KernelValue> {
    check_time(t)?;
    check_tol(tol)?;
    let q = profile.q as f64;
    let last = truncation_index(profile.q, tol);
    let mut weight = (q - 1.0) / q;
    let mut a_here = profile.a(m)?;
    let mut sum = 0.0;
    for i in 0..=last as i64 {
        let a_next = profile.a(m + i + 1)?;
        let rate = (q * a_here - a_next) / (q - 1.0);
        sum += weight * -(-rate * t).exp_m1();
        weight /= q;
        a_here = a_next;
    }
    Ok(KernelValue {
        value: sum,
        trunc_error: q.powi(-(last as i32) - 1),
    })
}

/// `P_M(t)`: probability of staying in a ball of radius `q^M`.
pub fn p_series(profile: &JumpProfile, m: i64, t: f64, tol: f64) -> Result<KernelValue> {
    let c = p_series_complement(profile, m, t, tol)?;
    Ok(KernelValue { value: 1.0 - c.value, trunc_error: c.trunc_error })
}

/// `P_t(x, B(y, q^M))` for `x` in distance class `class` from the ball.
pub fn transition_prob(
    class: DistanceClass,
    m_res: i64,
    t: f64,
    profile: &JumpProfile,
    tol: f64,
) -> Result<KernelValue> {
    match class.outside_m()? {
        None => p_series(profile, m_res, t, tol),
        Some(m) => {
            let outer = p_series_complement(profile, m_res + m as i64, t, tol)?;
            let inner = p_series_complement(profile, m_res + m as i64 - 1, t, tol)?;
            let q = profile.q as f64;
            let scale = q.powi(1 - m as i32) / (q - 1.0);
            let value = scale * (inner.value - outer.value);
            let trunc_error = scale * (inner.trunc_error + outer.trunc_error);
            if value < -trunc_error - 4.0 * f64::EPSILON {
                return Err(Error::NegativeKernel(value));
            }
            Ok(KernelValue { value: value.max(0.0), trunc_error })
        }
    }
}

/// `H 1_B(x)` for `B = B(y, q^M)`.
pub fn generator_indicator(class: DistanceClass, m_res: i64, profile: &JumpProfile) -> Result<f64> {
    match class.outside_m()? {
        None => Ok(-profile.a(m_res)?),
        Some(m) => {
            let q = profile.q as f64;
            let k = m_res + m as i64;
            Ok(q.powi(1 - m as i32) / (q - 1.0) * (profile.a(k - 1)? - profile.a(k)?))
        }
    }
}

/// Result of [`check_chapman_kolmogorov`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChapmanKolmogorovReport {
    /// `max |P_{t1+t2} − P_{t1}·P_{t2}|` over the retained class matrix.
    pub max_abs_error: f64,
    /// Bound on the contribution of classes beyond the window, `t1·a(M+W)`,
    /// plus the series truncation error.
    pub truncation_bound: f64,
}

/// Transition matrix between distance classes `{inside, 1, …, window}` from
/// the reference ball `B(0, q^M)`, with `kernel[d]` the single-ball kernel at
/// class `d` (`kernel[0]` the stay probability).
///
/// From a point at class `i ≥ 1`, the class-`j` balls for `j < i` all sit at
/// distance `q^{M+i}`; those with `j > i` at `q^{M+j}`; and within class `i`
/// there is the point's own ball, `(q−1)q^{k−1}` balls at distance `q^{M+k}`
/// for `k < i`, and `(q−2)q^{i−1}` at distance `q^{M+i}`.
pub(crate) fn lumped_matrix(q: f64, kernel: &[f64]) -> Vec<Vec<f64>> {
    let w = kernel.len() - 1;
    let count = |d: usize| (q - 1.0) * q.powi(d as i32 - 1);
    let mut near = vec![0.0; w + 1];
    for i in 1..=w {
        near[i] = near[i - 1] + if i > 1 { count(i - 1) * kernel[i - 1] } else { 0.0 };
    }
    (0..=w)
        .map(|i| {
            (0..=w)
                .map(|j| match (i, j) {
                    (0, 0) => kernel[0],
                    (0, j) => count(j) * kernel[j],
                    (i, 0) => kernel[i],
                    (i, j) if j < i => count(j) * kernel[i],
                    (i, j) if j > i => count(j) * kernel[j],
                    (i, _) => kernel[0] + near[i] + (q - 2.0) * q.powi(i as i32 - 1) * kernel[i],
                })
                .collect()
        })
        .collect()
}

fn class_kernels(profile: &JumpProfile, m_res: i64, t: f64, window: u32, tol: f64) -> Result<(Vec<f64>, f64)> {
    let mut kernel = Vec::with_capacity(window as usize + 1);
    let mut err: f64 = 0.0;
    for d in 0..=window {
        let class = if d == 0 { DistanceClass::Inside } else { DistanceClass::Outside(d) };
        let k = transition_prob(class, m_res, t, profile, tol)?;
        err = err.max(k.trunc_error);
        kernel.push(k.value);
    }
    Ok((kernel, err))
}

/// Compares `P_{t1+t2}` with `P_{t1}·P_{t2}` on the class-lumped chain.
pub fn check_chapman_kolmogorov(
    profile: &JumpProfile,
    resolution: i64,
    t1: f64,
    t2: f64,
    window: u32,
) -> Result<ChapmanKolmogorovReport> {
    check_time(t1)?;
    check_time(t2)?;
    if window < 2 {
        return Err(Error::InvalidArgument(format!("window must be >= 2 (got {window})")));
    }
    const TOL: f64 = 1e-16;
    let q = profile.q as f64;
    let (k1, e1) = class_kernels(profile, resolution, t1, window, TOL)?;
    let (k2, e2) = class_kernels(profile, resolution, t2, window, TOL)?;
    let (k12, e12) = class_kernels(profile, resolution, t1 + t2, window, TOL)?;
    let (a, b, c) = (lumped_matrix(q, &k1), lumped_matrix(q, &k2), lumped_matrix(q, &k12));
    let n = window as usize + 1;
    let mut max_abs_error: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let composed: f64 = (0..n).map(|l| a[i][l] * b[l][j]).sum();
            max_abs_error = max_abs_error.max((composed - c[i][j]).abs());
        }
    }
    let outside_mass = t1 * profile.a(resolution + window as i64)?;
    // Ball counts times single-ball kernel errors stay below 2·q^{-I-1}, and
    // each entry mixes at most n kernels.
    let series_error = 4.0 * n as f64 * (e1 + e2 + e12);
    Ok(ChapmanKolmogorovReport {
        max_abs_error,
        truncation_bound: outside_mass + series_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> JumpProfile {
        JumpProfile::geometric(2, 1.0, 2.0).unwrap()
    }

    #[test]
    fn a_examples() {
        assert_eq!(profile().a(0).unwrap(), 1.0);
        assert_eq!(profile().a(1).unwrap(), 0.25);
        let p = JumpProfile::geometric(3, 3.0, 1.0).unwrap();
        assert!((p.a(-1).unwrap() - 9.0).abs() < 1e-14);
    }

    #[test]
    fn table_profiles() {
        let p = JumpProfile::table(3, -1, vec![4.0, 2.0, 0.5, 0.0]).unwrap();
        assert_eq!(p.a(-1).unwrap(), 4.0);
        assert_eq!(p.a(1).unwrap(), 0.5);
        assert_eq!(p.a(40).unwrap(), 0.0);
        assert!(matches!(p.a(-2), Err(Error::OutOfWindow(-2))));
        let open = JumpProfile::table(3, 0, vec![1.0, 0.5]).unwrap();
        assert!(matches!(open.a(2), Err(Error::OutOfWindow(2))));
        assert!(JumpProfile::table(3, 0, vec![1.0, 2.0]).is_err());
        assert!(JumpProfile::table(3, 0, vec![-1.0]).is_err());
        assert!(JumpProfile::table(3, 0, vec![]).is_err());
        assert!(JumpProfile::geometric(1, 1.0, 1.0).is_err());
        assert!(JumpProfile::geometric(2, 0.0, 1.0).is_err());
        assert!(JumpProfile::geometric(2, 1.0, -1.0).is_err());
    }

    #[test]
    fn p_series_at_time_zero_is_one() {
        let table = JumpProfile::table(5, -3, vec![9.0, 3.0, 1.0, 0.2, 0.0]).unwrap();
        for p in [profile(), JumpProfile::geometric(9, 0.3, 0.7).unwrap(), table] {
            for m in -3..4 {
                assert_eq!(p_series(&p, m, 0.0, 1e-12).unwrap().value, 1.0);
            }
        }
    }

    #[test]
    fn p_series_respects_first_order_bound_and_decays() {
        let p = profile();
        let one = p_series(&p, 0, 1.0, 1e-14).unwrap();
        assert!(one.trunc_error <= 1e-14);
        assert!(1.0 - one.value <= 1.0 * p.a(0).unwrap());
        assert!(one.value > 0.0 && one.value < 1.0);
        let two = p_series(&p, 0, 2.0, 1e-14).unwrap();
        assert!(two.value < one.value);
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = profile();
        assert!(p_series(&p, 0, -1.0, 1e-9).is_err());
        assert!(p_series(&p, 0, 1.0, 0.0).is_err());
        assert!(transition_prob(DistanceClass::Outside(0), 0, 1.0, &p, 1e-9).is_err());
        assert!(generator_indicator(DistanceClass::Outside(0), 0, &p).is_err());
        assert!(check_chapman_kolmogorov(&p, 0, 0.1, 0.1, 1).is_err());
        let open = JumpProfile::table(2, 0, vec![1.0, 0.5]).unwrap();
        assert!(matches!(p_series(&open, 0, 1.0, 1e-3), Err(Error::OutOfWindow(_))));
    }

    #[test]
    fn kernel_at_time_zero() {
        let p = profile();
        assert_eq!(transition_prob(DistanceClass::Inside, 0, 0.0, &p, 1e-12).unwrap().value, 1.0);
        assert_eq!(transition_prob(DistanceClass::Outside(1), 0, 0.0, &p, 1e-12).unwrap().value, 0.0);
    }

    #[test]
    fn rows_sum_to_one() {
        let p = profile();
        let (q, t) = (2.0f64, 0.5);
        let mut total = p_series(&p, 0, t, 1e-15).unwrap().value;
        for m in 1..=60u32 {
            let k = transition_prob(DistanceClass::Outside(m), 0, t, &p, 1e-15).unwrap().value;
            total += (q - 1.0) * q.powi(m as i32 - 1) * k;
        }
        assert!((total - 1.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn generator_examples() {
        let p = profile();
        assert_eq!(generator_indicator(DistanceClass::Inside, 0, &p).unwrap(), -1.0);
        assert_eq!(generator_indicator(DistanceClass::Outside(1), 0, &p).unwrap(), 0.75);
    }

    #[test]
    fn generator_matches_difference_quotient() {
        let p = profile();
        let t = 1e-4;
        for class in [DistanceClass::Inside, DistanceClass::Outside(1), DistanceClass::Outside(2)] {
            let start = if class == DistanceClass::Inside { 1.0 } else { 0.0 };
            let k = transition_prob(class, 0, t, &p, 1e-16).unwrap().value;
            let h = generator_indicator(class, 0, &p).unwrap();
            let rel = ((k - start) / t - h).abs() / h.abs();
            assert!(rel < 1e-3, "{class:?}: rel {rel:e}");
        }
    }

    #[test]
    fn chapman_kolmogorov_identity_at_zero() {
        let r = check_chapman_kolmogorov(&profile(), 0, 0.0, 0.0, 5).unwrap();
        assert_eq!(r.max_abs_error, 0.0);
    }

    #[test]
    fn chapman_kolmogorov_examples() {
        let r = check_chapman_kolmogorov(&profile(), 0, 0.3, 0.3, 20).unwrap();
        assert!(r.max_abs_error <= 1e-6, "{r:?}");
        let p3 = JumpProfile::geometric(3, 2.0, 1.5).unwrap();
        let r = check_chapman_kolmogorov(&p3, 0, 0.1, 0.7, 20).unwrap();
        assert!(r.max_abs_error <= 1e-6, "{r:?}");
    }

    #[test]
    fn lumped_rows_are_substochastic() {
        let p = JumpProfile::geometric(3, 2.0, 1.5).unwrap();
        let (k, _) = class_kernels(&p, 0, 0.4, 12, 1e-16).unwrap();
        for row in lumped_matrix(3.0, &k) {
            let s: f64 = row.iter().sum();
            assert!(s <= 1.0 + 1e-12 && s > 1.0 - 1e-5, "{s}");
        }
    }
}
