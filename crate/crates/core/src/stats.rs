//! Streaming moments with a deterministic merge, and the goodness-of-fit
//! statistics used by the law checks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Running mean and centred second moment `Σ |z − mean|²` (Welford), with
/// the pairwise merge of Chan et al. Identical inputs give exactly zero
/// spread.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentAccumulator {
    pub n: u64,
    pub mean: Complex64,
    pub m2: f64,
}

impl MomentAccumulator {
    pub fn push(&mut self, z: Complex64) {
        self.n += 1;
        let delta = z - self.mean;
        self.mean += delta / self.n as f64;
        let delta2 = z - self.mean;
        self.m2 += (delta.conj() * delta2).re;
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * (other.n as f64 / n as f64);
        let m2 = self.m2 + other.m2 + delta.norm_sqr() * (self.n as f64 * other.n as f64 / n as f64);
        Self { n, mean, m2 }
    }

    /// Sample variance of `z` (complex: `E|z − mean|²`), `n − 1` denominator.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Merges accumulators along a fixed binary tree over their order, so the
/// result depends only on the sequence, not on who produced it.
pub fn pairwise_merge(mut parts: Vec<MomentAccumulator>) -> MomentAccumulator {
    if parts.is_empty() {
        return MomentAccumulator::default();
    }
    while parts.len() > 1 {
        parts = parts
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => a.merge(b),
                [a] => *a,
                _ => unreachable!(),
            })
            .collect();
    }
    parts[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
}

/// Pearson chi-square goodness of fit. Cells are merged from the right until
/// every expected count is at least `min_expected`.
pub fn chi_square_gof(observed: &[u64], probs: &[f64], min_expected: f64) -> Result<ChiSquareResult> {
    if observed.len() != probs.len() || observed.len() < 2 {
        return Err(Error::InvalidArgument("chi-square needs matching cells, at least two".into()));
    }
    let n: u64 = observed.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs).rev() {
        o_acc += o as f64;
        e_acc += p * n as f64;
        if e_acc >= min_expected {
            cells.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => cells.push((o_acc, e_acc)),
        }
    }
    if cells.len() < 2 {
        return Err(Error::InvalidArgument("too few cells after merging".into()));
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len() as u32 - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(ChiSquareResult { statistic, dof, p_value: dist.sf(statistic) })
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|` and its
/// asymptotic critical value at level `alpha`.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    (d, c * ((na + nb) / (na * nb)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_matches_two_pass() {
        let zs: Vec<Complex64> = (0..1000)
            .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos() * 2.0))
            .collect();
        let mean = zs.iter().sum::<Complex64>() / zs.len() as f64;
        let var = zs.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (zs.len() - 1) as f64;
        let parts: Vec<MomentAccumulator> = zs
            .chunks(37)
            .map(|c| {
                let mut acc = MomentAccumulator::default();
                c.iter().for_each(|&z| acc.push(z));
                acc
            })
            .collect();
        let acc = pairwise_merge(parts);
        assert_eq!(acc.n, 1000);
        assert!((acc.mean - mean).norm() < 1e-13);
        assert!((acc.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn constant_input_has_zero_spread() {
        let z = Complex64::new(4.0 / 3.0, 0.0);
        let parts: Vec<MomentAccumulator> = (0..9)
            .map(|_| {
                let mut acc = MomentAccumulator::default();
                (0..77).for_each(|_| acc.push(z));
                acc
            })
            .collect();
        let acc = pairwise_merge(parts);
        assert_eq!(acc.mean, z);
        assert_eq!(acc.std_error(), 0.0);
    }

    #[test]
    fn chi_square_reference_value() {
        // Same counts as a textbook uniform check: X² = 2.4179…, p = 0.4903…
        let r = chi_square_gof(&[28, 31, 40, 35], &[0.25; 4], 5.0).unwrap();
        assert!((r.statistic - 2.417_910_447_761_194).abs() < 1e-12);
        assert!((r.p_value - 0.490_309_306_965_388_3).abs() < 1e-9);
        assert_eq!(r.dof, 3);
    }

    #[test]
    fn chi_square_merges_sparse_tail() {
        let r = chi_square_gof(&[50, 30, 15, 4, 1, 0], &[0.5, 0.3, 0.15, 0.04, 0.009, 0.001], 5.0).unwrap();
        assert_eq!(r.dof, 3);
        assert!(r.p_value > 0.5);
    }

    #[test]
    fn ks_detects_shift() {
        let a: Vec<f64> = (0..2000).map(|k| k as f64 / 2000.0).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.2).collect();
        let (d, crit) = ks_two_sample(&a, &b, 1e-3);
        assert!((d - 0.2).abs() < 1e-3 && d > crit);
        let (d, crit) = ks_two_sample(&a, &a, 1e-3);
        assert!(d == 0.0 && crit > 0.0);
    }
}
