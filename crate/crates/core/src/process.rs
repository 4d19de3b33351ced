//! Exact samplers for the coordinate processes and their product over places.
//!
//! Started from `0`, a coordinate process leaves the unit ball `R_v` after an
//! exponential time of rate `a(0)`, and for a geometric profile
//! `a(M) = c·q^{-αM}` the exit point has norm `q^m` with probability
//! `(q^α − 1)q^{-mα}`, uniformly spread over the `(q−1)q^{m−1}` unit balls at
//! that distance. The exit time and the exit position are drawn independently;
//! nothing in the crate uses their joint law.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::number_field::FinitePlace;
use crate::padic::{sample_uniform_sphere, PAdicApprox};
use crate::semigroup::{p_series_complement, JumpProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct ExitSample {
    /// First exit time from `R_v`.
    pub tau: f64,
    /// Exit-norm exponent: `|X_τ| = q^m`, `m ≥ 1`.
    pub m: u32,
    pub position: Option<PAdicApprox>,
}

/// Exponential time with rate `a(0)`; infinite if `a(0) = 0`.
pub fn sample_exit_time<R: Rng + ?Sized>(profile: &JumpProfile, rng: &mut R) -> Result<f64> {
    let rate = profile.a(0)?;
    if rate == 0.0 {
        return Ok(f64::INFINITY);
    }
    let e: f64 = Exp1.sample(rng);
    Ok(e / rate)
}

/// The exit-norm law `P(m) = (1 − ρ)ρ^{m−1}`, `ρ = q^{-α}`, on `m ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitNormLaw {
    ln_rho: f64,
}

impl ExitNormLaw {
    pub fn new(q: u64, alpha: f64) -> Result<Self> {
        if q < 2 || !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("exit-norm law needs q >= 2, alpha > 0 (got {q}, {alpha})")));
        }
        Ok(Self { ln_rho: -alpha * (q as f64).ln() })
    }

    pub fn for_profile(profile: &JumpProfile) -> Result<Self> {
        let (_, alpha) = profile.geometric_params().ok_or(Error::NotGeometric)?;
        Self::new(profile.q(), alpha)
    }

    pub fn rho(&self) -> f64 {
        self.ln_rho.exp()
    }

    pub fn pmf(&self, m: u32) -> f64 {
        if m == 0 {
            return 0.0;
        }
        -self.ln_rho.exp_m1() * (self.ln_rho * (m - 1) as f64).exp()
    }

    /// `m = 1 + ⌊ln U / ln ρ⌋` with `U` uniform on `(0, 1]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u = 1.0 - rng.random::<f64>();
        let k = (u.ln() / self.ln_rho).floor();
        1 + k.min(u32::MAX as f64 - 1.0) as u32
    }
}

pub fn sample_exit_norm_exp<R: Rng + ?Sized>(profile: &JumpProfile, rng: &mut R) -> Result<u32> {
    Ok(ExitNormLaw::for_profile(profile)?.sample(rng))
}

/// Exit time, exit-norm exponent and an exit point known on indices
/// `< precision`.
pub fn sample_exit_position<R: Rng + ?Sized>(
    profile: &JumpProfile,
    precision: i64,
    rng: &mut R,
) -> Result<ExitSample> {
    let law = ExitNormLaw::for_profile(profile)?;
    let m = law.sample(rng);
    if precision <= -(m as i64) {
        return Err(Error::InvalidArgument(format!(
            "precision {precision} cannot represent a point of norm q^{m}"
        )));
    }
    let position = sample_uniform_sphere(profile.q(), m as i64, precision, rng)?;
    let tau = sample_exit_time(profile, rng)?;
    Ok(ExitSample { tau, m, position: Some(position) })
}

/// One state of the chain of radius-`q^M` balls visited by a coordinate
/// process: the ball `B(center, q^M)` entered at time `clock`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallChainState {
    /// Ball center, known on indices `< −M` (exactly the digits that name
    /// the ball).
    pub center: PAdicApprox,
    pub resolution: i64,
    pub clock: f64,
}

impl BallChainState {
    pub fn digit_prefix(&self) -> String {
        self.center.to_string()
    }
}

/// Draws the class `m ≥ 1` of the next jump, with probabilities
/// `(a(M+m−1) − a(M+m)) / a(M)`.
fn jump_class<R: Rng + ?Sized>(profile: &JumpProfile, resolution: i64, law: Option<&ExitNormLaw>, rng: &mut R) -> Result<u32> {
    if let Some(law) = law {
        // For a(M) = c·q^{-αM} the ratio is (1 − q^{-α}) q^{-α(m−1)}.
        return Ok(law.sample(rng));
    }
    let total = profile.a(resolution)?;
    let target = rng.random::<f64>() * total;
    let mut m = 1u32;
    // P(class ≤ m) = (a(M) − a(M+m)) / a(M)
    while total - profile.a(resolution + m as i64)? <= target {
        m += 1;
    }
    Ok(m)
}

/// Continuous-time trajectory of the ball chain at resolution `M`, started in
/// `B(0, q^M)`, up to `t_end`. The first state is the start; each further
/// state is a jump.
pub fn simulate_ball_chain<R: Rng + ?Sized>(
    profile: &JumpProfile,
    resolution: i64,
    t_end: f64,
    rng: &mut R,
) -> Result<Vec<BallChainState>> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must be finite and >= 0 (got {t_end})")));
    }
    let q = profile.q();
    let cut = -resolution;
    let law = match profile.geometric_params() {
        Some((_, alpha)) => Some(ExitNormLaw::new(q, alpha)?),
        None => None,
    };
    let rate = profile.a(resolution)?;
    let mut states = vec![BallChainState {
        center: PAdicApprox::zero(q, cut)?,
        resolution,
        clock: 0.0,
    }];
    if rate == 0.0 {
        return Ok(states);
    }
    let mut clock = 0.0;
    loop {
        let hold: f64 = Exp1.sample(rng);
        clock += hold / rate;
        if clock > t_end {
            break;
        }
        let m = jump_class(profile, resolution, law.as_ref(), rng)?;
        let pivot = cut - m as i64;
        let old = &states.last().unwrap().center;
        let lo = old.val_offset().unwrap_or(pivot).min(pivot);
        let center = PAdicApprox::from_fn(q, lo, cut, |i| {
            let d = old.digit(i).unwrap();
            if i < pivot {
                d
            } else if i == pivot {
                // uniform over the q − 1 digits different from d
                let r = rng.random_range(1..q as u32);
                ((d as u64 + r as u64) % q) as u32
            } else {
                rng.random_range(0..q as u32)
            }
        })?;
        states.push(BallChainState { center, resolution, clock });
    }
    Ok(states)
}

/// State occupied at time `t` (the last one entered at or before `t`).
pub fn state_at(trajectory: &[BallChainState], t: f64) -> Option<&BallChainState> {
    trajectory.iter().take_while(|s| s.clock <= t).last()
}

/// Writes `clock,resolution,digits` rows with a header.
pub fn write_trajectory_csv<W: Write>(trajectory: &[BallChainState], mut out: W) -> io::Result<()> {
    writeln!(out, "clock,resolution,digits")?;
    for s in trajectory {
        let digits = s.digit_prefix();
        if digits.contains(',') {
            writeln!(out, "{},{},\"{}\"", s.clock, s.resolution, digits)?;
        } else {
            writeln!(out, "{},{},{}", s.clock, s.resolution, digits)?;
        }
    }
    Ok(())
}

/// Finitely many finite places with their coordinate processes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdelicConfig {
    pub places: Vec<FinitePlace>,
    pub profiles: Vec<JumpProfile>,
    /// `Σ_v a_v(0)` over the configured finite places plus the archimedean
    /// contribution.
    pub sum_a0: f64,
    /// Total `a_v(0)` attributed to the archimedean coordinates. Those
    /// coordinates are never simulated.
    pub archimedean_a0: f64,
}

impl AdelicConfig {
    pub fn new(places: Vec<FinitePlace>, profiles: Vec<JumpProfile>) -> Result<Self> {
        Self::with_archimedean(places, profiles, 0.0)
    }

    pub fn with_archimedean(places: Vec<FinitePlace>, profiles: Vec<JumpProfile>, archimedean_a0: f64) -> Result<Self> {
        if places.len() != profiles.len() {
            return Err(Error::InvalidArgument("one profile per place required".into()));
        }
        if !(archimedean_a0 >= 0.0 && archimedean_a0.is_finite()) {
            return Err(Error::InvalidArgument("archimedean a(0) must be finite and >= 0".into()));
        }
        for (v, p) in places.iter().zip(&profiles) {
            if v.q != p.q() {
                return Err(Error::ResidueMismatch(v.q, p.q()));
            }
        }
        let mut sum_a0 = archimedean_a0;
        for p in &profiles {
            sum_a0 += p.a(0)?;
        }
        if !(sum_a0 > 0.0 && sum_a0.is_finite()) {
            return Err(Error::InvalidArgument(format!("need 0 < sum of a_v(0) < inf (got {sum_a0})")));
        }
        Ok(Self { places, profiles, sum_a0, archimedean_a0 })
    }

    /// Geometric profiles `a_v(M) = q_v^{-β} q_v^{-αM}`.
    pub fn with_schedule(places: Vec<FinitePlace>, beta: f64, alpha: f64) -> Result<Self> {
        let profiles = places
            .iter()
            .map(|v| JumpProfile::geometric(v.q, (v.q as f64).powf(-beta), alpha))
            .collect::<Result<Vec<_>>>()?;
        Self::new(places, profiles)
    }

    /// `Σ_v a_v(0)` over the finite places only.
    pub fn finite_sum_a0(&self) -> f64 {
        self.sum_a0 - self.archimedean_a0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservativityReport {
    /// `Σ_v (1 − P_0^{(v)}(t))`.
    pub lhs: f64,
    /// `t·Σ_v a_v(0)` over the finite places.
    pub rhs: f64,
    /// Summed series truncation error plus rounding allowance.
    pub slack: f64,
    pub ok: bool,
}

/// Checks `Σ_v P_t(0, R_v^c) ≤ t·Σ_v a_v(0)` on the configured places.
pub fn conservativity_check(config: &AdelicConfig, t: f64) -> Result<ConservativityReport> {
    const TOL: f64 = 1e-15;
    let mut lhs = 0.0;
    let mut slack = 0.0;
    for profile in &config.profiles {
        let c = p_series_complement(profile, 0, t, TOL)?;
        lhs += c.value;
        slack += c.trunc_error;
    }
    let rhs = t * config.finite_sum_a0();
    slack += 8.0 * f64::EPSILON * (rhs + config.profiles.len() as f64 * TOL);
    Ok(ConservativityReport { lhs, rhs, slack, ok: lhs <= rhs + slack })
}
