//! Monte Carlo estimation of `ζ_K(s)` from exit laws.
//!
//! For each finite place the coordinate process is run until it leaves `R_v`
//! and the exit norm `|X_τ| = q^m` is turned into the factor
//! `(1 − q^{-α})^{-1} |π X_τ|^{α−s} = (1 − q^{-α})^{-1} q^{(m−1)(α−s)}`,
//! whose expectation is the local Euler factor `(1 − q^{-s})^{-1}`. Places are
//! independent, so the product of factors over places is an unbiased estimate
//! of the (truncated) Euler product.
//!
//! Its second moment per place is `(1 − ρ)^{-1} / (1 − q^{α − 2Re s})` with
//! `ρ = q^{-α}`, finite only when `α < 2 Re s`; the default `α = Re s` makes
//! every factor's modulus constant.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::number_field::{check_half_plane, enumerate_places, euler_product_zeta, local_euler_factor, FieldSpec, FinitePlace};
use crate::process::ExitNormLaw;
use crate::rng::{keyed_stream, Purpose};
use crate::semigroup::JumpProfile;
use crate::stats::{pairwise_merge, MomentAccumulator};

/// Replicas per work unit. Fixed, so that the reduction tree (and hence every
/// floating-point result) is the same for any number of workers.
const BLOCK: u64 = 1024;

/// How the stability index `α_v` is chosen per place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum AlphaStrategy {
    /// `α_v = Re s` for every place.
    MatchRealPart,
    Fixed(f64),
    /// Keyed by place index.
    PerPlace(BTreeMap<usize, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub field: FieldSpec,
    pub s: Complex64,
    pub norm_bound: u64,
    pub n_samples: u64,
    pub alpha_strategy: AlphaStrategy,
    /// `c_v = q_v^{-β}`.
    pub beta: f64,
    pub seed: u64,
}

impl EstimatorConfig {
    pub fn new(field: FieldSpec, s: Complex64, norm_bound: u64, n_samples: u64, seed: u64) -> Self {
        Self {
            field,
            s,
            norm_bound,
            n_samples,
            alpha_strategy: AlphaStrategy::MatchRealPart,
            beta: 2.0,
            seed,
        }
    }

    pub fn with_alpha(mut self, strategy: AlphaStrategy) -> Self {
        self.alpha_strategy = strategy;
        self
    }

    fn alpha_for(&self, place: &FinitePlace) -> Result<f64> {
        let alpha = match &self.alpha_strategy {
            AlphaStrategy::MatchRealPart => self.s.re,
            AlphaStrategy::Fixed(a) => *a,
            AlphaStrategy::PerPlace(map) => *map.get(&place.index).ok_or_else(|| {
                Error::InvalidArgument(format!("no alpha given for place index {}", place.index))
            })?,
        };
        check_alpha(alpha, self.s)?;
        Ok(alpha)
    }

    /// Checks every precondition and returns the configured places.
    pub fn validate(&self) -> Result<Vec<FinitePlace>> {
        check_half_plane(self.s)?;
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "c-schedule exponent beta must be > 1 so that the sum of a_v(0) converges (got {})",
                self.beta
            )));
        }
        let places = enumerate_places(&self.field, self.norm_bound)?;
        if places.is_empty() {
            return Err(Error::NoPlaces(self.norm_bound));
        }
        for v in &places {
            self.alpha_for(v)?;
        }
        Ok(places)
    }
}

fn check_alpha(alpha: f64, s: Complex64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be > 0 (got {alpha})")));
    }
    if alpha >= 2.0 * s.re {
        return Err(Error::InfiniteVariance { alpha, bound: 2.0 * s.re });
    }
    Ok(())
}

/// Per-place factor map `m ↦ (1 − q^{-α})^{-1} q^{(m−1)(α−s)}`.
#[derive(Debug, Clone, Copy)]
struct FactorMap {
    prefactor: f64,
    exponent: Complex64,
}

impl FactorMap {
    fn new(q: u64, alpha: f64, s: Complex64) -> Self {
        let ln_q = (q as f64).ln();
        Self {
            prefactor: -1.0 / (-alpha * ln_q).exp_m1(),
            exponent: (Complex64::new(alpha, 0.0) - s) * ln_q,
        }
    }

    fn apply(&self, m: u32) -> Complex64 {
        if m == 1 {
            return Complex64::new(self.prefactor, 0.0);
        }
        (self.exponent * (m - 1) as f64).exp() * self.prefactor
    }
}

/// One draw of the place factor `(1 − q^{-α})^{-1} |π X_τ|^{α − s}`.
pub fn place_factor_sample<R: Rng + ?Sized>(
    place: &FinitePlace,
    profile: &JumpProfile,
    s: Complex64,
    rng: &mut R,
) -> Result<Complex64> {
    check_half_plane(s)?;
    if profile.q() != place.q {
        return Err(Error::ResidueMismatch(place.q, profile.q()));
    }
    let (_, alpha) = profile.geometric_params().ok_or(Error::NotGeometric)?;
    let m = ExitNormLaw::new(place.q, alpha)?.sample(rng);
    Ok(FactorMap::new(place.q, alpha, s).apply(m))
}

/// `E[factor] = (1 − q^{-s})^{-1}`.
pub fn place_factor_expectation_exact(place: &FinitePlace, s: Complex64) -> Result<Complex64> {
    check_half_plane(s)?;
    Ok(local_euler_factor(place.q, s))
}

/// `E[q^{(m−1)w}]` under the exit-norm law with index `α`:
/// `Σ_{k≥0} (1−ρ)ρ^k q^{kw} = (1 − ρ)/(1 − ρ q^w)`, valid for `Re w < α`.
pub fn exit_norm_moment_exact(q: u64, alpha: f64, w: Complex64) -> Result<Complex64> {
    if w.re >= alpha || w.re.is_nan() {
        return Err(Error::InvalidArgument(format!("moment of order {w} diverges for alpha = {alpha}")));
    }
    let ln_q = (q as f64).ln();
    let one_minus_rho = -(-alpha * ln_q).exp_m1();
    let ratio = ((w - alpha) * ln_q).exp();
    Ok(one_minus_rho / (Complex64::new(1.0, 0.0) - ratio))
}

/// `E|factor|² = (1 − ρ)^{-1} / (1 − q^{α − 2 Re s})` for `α < 2 Re s`.
pub fn place_factor_second_moment_exact(q: u64, alpha: f64, s: Complex64) -> Result<f64> {
    check_alpha(alpha, s)?;
    let ln_q = (q as f64).ln();
    let one_minus_rho = -(-alpha * ln_q).exp_m1();
    Ok(1.0 / one_minus_rho / -((alpha - 2.0 * s.re) * ln_q).exp_m1())
}

/// Mean of a per-place factor over the replicas, next to its exact value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceDiagnostic {
    pub index: usize,
    pub p: u64,
    pub q: u64,
    pub f: u32,
    pub e: u32,
    pub alpha: f64,
    pub c: f64,
    pub exact_mean: Complex64,
    pub sample_mean: Complex64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaEstimate {
    pub mean: Complex64,
    pub std_error: f64,
    pub n: u64,
    /// Euler product over the same places.
    pub oracle: Complex64,
    /// Log-tail bound of the oracle against the full `ζ_K(s)`.
    pub oracle_tail: f64,
    pub places: Vec<PlaceDiagnostic>,
}

struct PlaceLaw {
    place: FinitePlace,
    law: ExitNormLaw,
}

struct ProductRun {
    product: MomentAccumulator,
    per_place: Vec<MomentAccumulator>,
}

/// Averages `Π_v g(v, m_v)` over `n` replicas, where `m_v` is drawn from the
/// exit-norm law of place `v` using the stream keyed by
/// `(seed, purpose, place index, replica)`.
fn run_product<G>(laws: &[PlaceLaw], n: u64, seed: u64, purpose: Purpose, workers: usize, g: G) -> Result<ProductRun>
where
    G: Fn(usize, u32) -> Complex64 + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let run_block = |b: u64| {
        let mut product = MomentAccumulator::default();
        let mut per_place = vec![MomentAccumulator::default(); laws.len()];
        for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
            let mut z = Complex64::new(1.0, 0.0);
            for (j, pl) in laws.iter().enumerate() {
                let mut rng = keyed_stream(seed, purpose, pl.place.index as u64, i);
                let f = g(j, pl.law.sample(&mut rng));
                per_place[j].push(f);
                z *= f;
            }
            product.push(z);
        }
        (product, per_place)
    };
    let parts: Vec<(MomentAccumulator, Vec<MomentAccumulator>)> = if workers <= 1 {
        (0..blocks).map(run_block).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| (0..blocks).into_par_iter().map(run_block).collect())
    };
    let product = pairwise_merge(parts.iter().map(|p| p.0).collect());
    let per_place = (0..laws.len())
        .map(|j| pairwise_merge(parts.iter().map(|p| p.1[j]).collect()))
        .collect();
    Ok(ProductRun { product, per_place })
}

fn place_laws(places: &[FinitePlace], alphas: &[f64]) -> Result<Vec<PlaceLaw>> {
    places
        .iter()
        .zip(alphas)
        .map(|(v, &a)| Ok(PlaceLaw { place: *v, law: ExitNormLaw::new(v.q, a)? }))
        .collect()
}

/// Single-threaded [`estimate_zeta_with_workers`].
pub fn estimate_zeta(config: &EstimatorConfig) -> Result<ZetaEstimate> {
    estimate_zeta_with_workers(config, 1)
}

/// Estimates the Euler product of `ζ_K(s)` over places with `q ≤ norm_bound`.
/// Results are bit-identical for every worker count.
pub fn estimate_zeta_with_workers(config: &EstimatorConfig, workers: usize) -> Result<ZetaEstimate> {
    let places = config.validate()?;
    let alphas = places.iter().map(|v| config.alpha_for(v)).collect::<Result<Vec<_>>>()?;
    let laws = place_laws(&places, &alphas)?;
    let maps: Vec<FactorMap> = places
        .iter()
        .zip(&alphas)
        .map(|(v, &a)| FactorMap::new(v.q, a, config.s))
        .collect();
    let run = run_product(&laws, config.n_samples, config.seed, Purpose::ZetaFactor, workers, |j, m| maps[j].apply(m))?;
    let oracle = euler_product_zeta(&config.field, config.s, config.norm_bound)?;
    let diagnostics = places
        .iter()
        .zip(&alphas)
        .zip(&run.per_place)
        .map(|((v, &alpha), acc)| PlaceDiagnostic {
            index: v.index,
            p: v.p,
            q: v.q,
            f: v.f,
            e: v.e,
            alpha,
            c: (v.q as f64).powf(-config.beta),
            exact_mean: local_euler_factor(v.q, config.s),
            sample_mean: acc.mean,
            std_error: acc.std_error(),
        })
        .collect();
    Ok(ZetaEstimate {
        mean: run.product.mean,
        std_error: run.product.std_error(),
        n: run.product.n,
        oracle: oracle.value,
        oracle_tail: oracle.tail_bound,
        places: diagnostics,
    })
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McValue {
    pub value: Complex64,
    pub std_error: f64,
}

impl McValue {
    fn of(acc: &MomentAccumulator) -> Self {
        Self { value: acc.mean, std_error: acc.std_error() }
    }

    /// Product of two independent estimates; the variance of the product is
    /// `|A|²V_B + |B|²V_A + V_A V_B`.
    fn times(self, other: Self) -> Self {
        let (va, vb) = (self.std_error.powi(2), other.std_error.powi(2));
        Self {
            value: self.value * other.value,
            std_error: (self.value.norm_sqr() * vb + other.value.norm_sqr() * va + va * vb).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McComparison {
    pub lhs: McValue,
    pub rhs: McValue,
    pub abs_diff: f64,
    pub combined_std_error: f64,
    /// `abs_diff ≤ 3·combined_std_error` (plus rounding allowance).
    pub ok: bool,
}

impl McComparison {
    fn new(lhs: McValue, rhs: McValue) -> Self {
        let abs_diff = (lhs.value - rhs.value).norm();
        let combined_std_error = lhs.std_error.hypot(rhs.std_error);
        let rounding = 1e-12 * (lhs.value.norm() + rhs.value.norm());
        Self { lhs, rhs, abs_diff, combined_std_error, ok: abs_diff <= 3.0 * combined_std_error + rounding }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    /// Common `α_v` of the process the identity is stated for.
    pub alpha: f64,
    pub exact_lhs: Complex64,
    pub exact_rhs: Complex64,
    pub exact_abs_diff: f64,
    /// `exact_abs_diff ≤ 1e-10`.
    pub exact_ok: bool,
    pub monte_carlo: Option<McComparison>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalEquationReport {
    pub s: Complex64,
    pub places: usize,
    pub checks: Vec<IdentityCheck>,
}

impl FunctionalEquationReport {
    pub fn all_ok(&self) -> bool {
        self.checks
            .iter()
            .all(|c| c.exact_ok && c.monte_carlo.as_ref().is_none_or(|m| m.ok))
    }
}

/// Exact value of the truncated product `Π_v E[g_v]`.
fn exact_product(places: &[FinitePlace], mut per_place: impl FnMut(&FinitePlace) -> Result<Complex64>) -> Result<Complex64> {
    places.iter().try_fold(Complex64::new(1.0, 0.0), |acc, v| Ok(acc * per_place(v)?))
}

fn identity(name: &str, alpha: f64, exact_lhs: Complex64, exact_rhs: Complex64, mc: Option<McComparison>, note: Option<&str>) -> IdentityCheck {
    let exact_abs_diff = (exact_lhs - exact_rhs).norm();
    IdentityCheck {
        name: name.to_string(),
        alpha,
        exact_lhs,
        exact_rhs,
        exact_abs_diff,
        exact_ok: exact_abs_diff <= 1e-10,
        monte_carlo: mc,
        note: note.map(str::to_string),
    }
}

/// Single-threaded [`functional_equation_check_with_workers`].
pub fn functional_equation_check(
    field: &FieldSpec,
    s: Complex64,
    norm_bound: u64,
    n_samples: u64,
    seed: u64,
) -> Result<FunctionalEquationReport> {
    functional_equation_check_with_workers(field, s, norm_bound, n_samples, seed, 1)
}

/// Evaluates, on the places with `q ≤ norm_bound` and with `s = x + iy`:
///
/// * `conjugate_alpha_2x`: `ζ(s)·E Π|πX|^s = ζ(s̄)·E Π|πX|^{s̄}` for `α_v = 2x`;
/// * `shift_alpha_x`: `ζ(s) = ζ(x)·E Π|πX|^{-iy}` for `α_v = x`;
/// * `conjugate_alpha_x`: `ζ(s)·E Π|πX|^{iy} = ζ(s̄)·E Π|πX|^{-iy}` for `α_v = x`.
///
/// Here `ζ` at a point is the expectation of the place-factor product of the
/// process in question. Every quantity is computed exactly from the
/// closed-form exit-norm moments; the two `α = x` identities are also
/// estimated by Monte Carlo, each expectation from its own streams. At
/// `α = 2x` the moments `E|πX|^s` have infinite variance, so that identity is
/// checked exactly only.
pub fn functional_equation_check_with_workers(
    field: &FieldSpec,
    s: Complex64,
    norm_bound: u64,
    n_samples: u64,
    seed: u64,
    workers: usize,
) -> Result<FunctionalEquationReport> {
    check_half_plane(s)?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
    }
    let places = enumerate_places(field, norm_bound)?;
    if places.is_empty() {
        return Err(Error::NoPlaces(norm_bound));
    }
    let (x, y) = (s.re, s.im);
    let sbar = s.conj();
    let iy = Complex64::new(0.0, y);
    let real = |r: f64| Complex64::new(r, 0.0);

    // zeta at `point` for the process with index `alpha`, from the exit law.
    let zeta_exact = |alpha: f64, point: Complex64| {
        exact_product(&places, |v| {
            let prefactor = -1.0 / (-alpha * (v.q as f64).ln()).exp_m1();
            Ok(exit_norm_moment_exact(v.q, alpha, real(alpha) - point)? * prefactor)
        })
    };
    let moment_exact = |alpha: f64, w: Complex64| exact_product(&places, |v| exit_norm_moment_exact(v.q, alpha, w));

    let mut checks = Vec::with_capacity(3);

    let a2 = 2.0 * x;
    checks.push(identity(
        "conjugate_alpha_2x",
        a2,
        zeta_exact(a2, s)? * moment_exact(a2, s)?,
        zeta_exact(a2, sbar)? * moment_exact(a2, sbar)?,
        None,
        Some("alpha = 2 Re s puts E|pi X|^s on the infinite-variance boundary; evaluated from exact expectations only"),
    ));

    let laws = place_laws(&places, &vec![x; places.len()])?;
    let zeta_mc = |point: Complex64, tag: u32| -> Result<McValue> {
        let maps: Vec<FactorMap> = places.iter().map(|v| FactorMap::new(v.q, x, point)).collect();
        let run = run_product(&laws, n_samples, seed, Purpose::MomentEstimate(tag), workers, |j, m| maps[j].apply(m))?;
        Ok(McValue::of(&run.product))
    };
    let moment_mc = |w: Complex64, tag: u32| -> Result<McValue> {
        let ln_q: Vec<f64> = places.iter().map(|v| (v.q as f64).ln()).collect();
        let run = run_product(&laws, n_samples, seed, Purpose::MomentEstimate(tag), workers, |j, m| {
            (w * ln_q[j] * (m - 1) as f64).exp()
        })?;
        Ok(McValue::of(&run.product))
    };

    let zeta_s = zeta_mc(s, 0)?;
    checks.push(identity(
        "shift_alpha_x",
        x,
        zeta_exact(x, s)?,
        zeta_exact(x, real(x))? * moment_exact(x, -iy)?,
        Some(McComparison::new(zeta_s, zeta_mc(real(x), 1)?.times(moment_mc(-iy, 2)?))),
        None,
    ));

    checks.push(identity(
        "conjugate_alpha_x",
        x,
        zeta_exact(x, s)? * moment_exact(x, iy)?,
        zeta_exact(x, sbar)? * moment_exact(x, -iy)?,
        Some(McComparison::new(
            zeta_mc(s, 3)?.times(moment_mc(iy, 4)?),
            zeta_mc(sbar, 5)?.times(moment_mc(-iy, 6)?),
        )),
        None,
    ));

    Ok(FunctionalEquationReport { s, places: places.len(), checks })
}
