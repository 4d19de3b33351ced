//! Statistical checks of the samplers against their exact laws.

use adelic_core::number_field::{enumerate_places, local_euler_factor};
use adelic_core::padic::{count_balls_at_distance, sample_uniform_sphere};
use adelic_core::process::{sample_exit_position, sample_exit_time, simulate_ball_chain, state_at, ExitNormLaw};
use adelic_core::rng::{keyed_stream, Purpose};
use adelic_core::semigroup::p_series;
use adelic_core::stats::{chi_square_gof, ks_two_sample, MomentAccumulator};
use adelic_core::zeta_mc::{estimate_zeta, place_factor_sample};
use adelic_core::{Complex64, EstimatorConfig, FieldSpec, FinitePlace, JumpProfile, PAdicApprox};

const SEED: u64 = 11;

fn z_score(hits: u64, n: u64, p: f64) -> f64 {
    let freq = hits as f64 / n as f64;
    (freq - p).abs() / (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn exit_time_scales_inversely_with_the_rate() {
    const N: u64 = 20_000;
    let fast = JumpProfile::geometric(3, 2.0, 1.0).unwrap();
    let slow = JumpProfile::geometric(3, 1.0, 1.0).unwrap();
    let mut r1 = keyed_stream(SEED, Purpose::ExitTime, 0, 0);
    let mut r2 = keyed_stream(SEED, Purpose::ExitTime, 1, 0);
    let a: Vec<f64> = (0..N).map(|_| sample_exit_time(&fast, &mut r1).unwrap()).collect();
    let b: Vec<f64> = (0..N).map(|_| sample_exit_time(&slow, &mut r2).unwrap() / 2.0).collect();
    let (d, critical) = ks_two_sample(&a, &b, 1e-3);
    assert!(d < critical, "D = {d}, critical = {critical}");
}

#[test]
fn sphere_digit_patterns_are_uniform() {
    const N: u64 = 100_000;
    let mut rng = keyed_stream(SEED, Purpose::LawCheck(1), 0, 0);
    let mut counts = vec![0u64; 54];
    for _ in 0..N {
        // digits at indices −1..=2: a leading digit in {1, 2} and 27 tails
        let x = sample_uniform_sphere(3, 1, 3, &mut rng).unwrap();
        let code = (-1..3).fold(0usize, |acc, i| acc * 3 + x.digit(i).unwrap() as usize);
        counts[code - 27] += 1;
    }
    let r = chi_square_gof(&counts, &[1.0 / 54.0; 54], 5.0).unwrap();
    assert!(r.p_value > 1e-3, "{r:?}");
    for &c in &counts {
        assert!(z_score(c, N, 1.0 / 54.0) < 4.5);
    }
}

#[test]
fn exit_position_masses_split_evenly_over_balls() {
    // q = 2, α = 2: the unit-radius ball at distance 2 from R_v carries P(m = 1) = 3/4
    let profile = JumpProfile::geometric(2, 1.0, 2.0).unwrap();
    let mut rng = keyed_stream(SEED, Purpose::ExitPosition, 0, 0);
    const N: u64 = 100_000;
    let hits = (0..N)
        .filter(|_| {
            let x = sample_exit_position(&profile, 0, &mut rng).unwrap().position.unwrap();
            x.val_offset() == Some(-1)
        })
        .count() as u64;
    assert!(z_score(hits, N, 0.75) < 3.5);

    // q = 3, α = 1, m = 2: six balls of radius 1, each with mass (2/9)/6
    let profile = JumpProfile::geometric(3, 1.0, 1.0).unwrap();
    let mut rng = keyed_stream(SEED, Purpose::ExitPosition, 1, 0);
    const M: u64 = 1_000_000;
    assert_eq!(count_balls_at_distance(3, 2).unwrap(), 6);
    let mut cells = [0u64; 6];
    for _ in 0..M {
        let x = sample_exit_position(&profile, 0, &mut rng).unwrap().position.unwrap();
        if x.val_offset() == Some(-2) {
            let k = (x.digit(-2).unwrap() as usize - 1) * 3 + x.digit(-1).unwrap() as usize;
            cells[k] += 1;
        }
    }
    for &c in &cells {
        assert!(z_score(c, M, 2.0 / 9.0 / 6.0) < 3.5, "{cells:?}");
    }
}

#[test]
fn no_jump_probability_is_exponential() {
    const N: u64 = 100_000;
    let profile = JumpProfile::geometric(2, 1.0, 2.0).unwrap();
    let still = (0..N)
        .filter(|&i| {
            let mut rng = keyed_stream(SEED, Purpose::BallChain, 7, i);
            simulate_ball_chain(&profile, 0, 1.0, &mut rng).unwrap().len() == 1
        })
        .count() as u64;
    assert!(z_score(still, N, (-1.0f64).exp()) < 3.5);
}

#[test]
fn ball_chain_occupation_matches_the_semigroup() {
    const N: u64 = 100_000;
    let cases = [
        (JumpProfile::geometric(3, 2.0, 1.5).unwrap(), 0i64, 0.3),
        (JumpProfile::geometric(5, 1.0, 1.0).unwrap(), -1, 0.8),
    ];
    for (k, (profile, res, t)) in cases.iter().enumerate() {
        let inside = (0..N)
            .filter(|&i| {
                let mut rng = keyed_stream(SEED, Purpose::BallChain, k as u64, i);
                let path = simulate_ball_chain(profile, *res, *t, &mut rng).unwrap();
                state_at(&path, *t).unwrap().center.is_zero()
            })
            .count() as u64;
        let exact = p_series(profile, *res, *t, 1e-15).unwrap().value;
        assert!(z_score(inside, N, exact) < 3.5, "case {k}: {inside} vs {exact}");
    }
}

#[test]
fn ball_chain_jump_classes_follow_the_table_profile() {
    // telescoping class law (a(m−1) − a(m))/a(0) for a non-geometric table
    let values = vec![2.0, 1.2, 0.5, 0.1, 0.0];
    let profile = JumpProfile::table(2, 0, values.clone()).unwrap();
    const N: u64 = 50_000;
    let mut counts = [0u64; 4];
    for i in 0..N {
        let mut rng = keyed_stream(SEED, Purpose::BallChain, 9, i);
        let path = simulate_ball_chain(&profile, 0, 100.0, &mut rng).unwrap();
        let first = &path[1].center;
        let class = -first.val_offset().unwrap();
        counts[class as usize - 1] += 1;
    }
    let probs: Vec<f64> = (1..=4).map(|m| (values[m - 1] - values[m]) / values[0]).collect();
    let r = chi_square_gof(&counts, &probs, 5.0).unwrap();
    assert!(r.p_value > 1e-3, "{counts:?} {r:?}");
}

#[test]
fn exit_norm_sampler_matches_profile_law() {
    let law = ExitNormLaw::new(4, 0.7).unwrap();
    let total: f64 = (1..2000).map(|m| law.pmf(m)).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let mut rng = keyed_stream(SEED, Purpose::LawCheck(2), 0, 0);
    const N: u64 = 200_000;
    let mut counts = vec![0u64; 30];
    for _ in 0..N {
        counts[(law.sample(&mut rng) as usize).min(30) - 1] += 1;
    }
    let mut probs: Vec<f64> = (1..30).map(|m| law.pmf(m)).collect();
    probs.push(law.rho().powi(29));
    assert!(chi_square_gof(&counts, &probs, 5.0).unwrap().p_value > 1e-3);
}

fn place(q: u64) -> FinitePlace {
    let (p, f) = if q == 9 { (3, 2) } else { (q, 1) };
    FinitePlace { p, f, e: 1, q, index: 0 }
}

#[test]
fn place_factors_are_unbiased() {
    const N: u64 = 100_000;
    for q in [2u64, 3, 5, 9] {
        for s in [Complex64::new(2.0, 0.0), Complex64::new(3.0, 0.0), Complex64::new(2.0, 1.0)] {
            // α away from Re s so the factor is random even for real s
            for alpha in [s.re, 0.75 * s.re, 1.5 * s.re] {
                let profile = JumpProfile::geometric(q, 1.0, alpha).unwrap();
                let mut rng = keyed_stream(SEED, Purpose::LawCheck(3), q, alpha.to_bits());
                let mut acc = MomentAccumulator::default();
                for _ in 0..N {
                    acc.push(place_factor_sample(&place(q), &profile, s, &mut rng).unwrap());
                }
                let exact = local_euler_factor(q, s);
                let diff = (acc.mean - exact).norm();
                assert!(diff <= 4.0 * acc.std_error() + 1e-12, "q = {q}, s = {s}, alpha = {alpha}: {diff} vs {}", acc.std_error());
            }
        }
    }
}

#[test]
fn factors_at_distinct_places_are_uncorrelated() {
    let places = enumerate_places(&FieldSpec::Rationals, 5).unwrap();
    let s = Complex64::new(2.0, 0.0);
    const N: u64 = 100_000;
    let profiles: Vec<JumpProfile> = places.iter().map(|v| JumpProfile::geometric(v.q, 1.0, 1.5).unwrap()).collect();
    let draws: Vec<Vec<f64>> = places
        .iter()
        .zip(&profiles)
        .map(|(v, p)| {
            (0..N)
                .map(|i| {
                    let mut rng = keyed_stream(SEED, Purpose::ZetaFactor, v.index as u64, i);
                    place_factor_sample(v, p, s, &mut rng).unwrap().re
                })
                .collect()
        })
        .collect();
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    for a in 0..draws.len() {
        for b in a + 1..draws.len() {
            let (ma, mb) = (mean(&draws[a]), mean(&draws[b]));
            let cov: f64 = draws[a].iter().zip(&draws[b]).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / N as f64;
            let var = |x: &[f64], m: f64| x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / N as f64;
            let corr = cov / (var(&draws[a], ma) * var(&draws[b], mb)).sqrt();
            assert!(corr.abs() < 3.0 / (N as f64).sqrt(), "places {a}, {b}: corr = {corr}");
        }
    }
}

#[test]
fn estimates_at_conjugate_points_are_conjugate() {
    let s = Complex64::new(2.5, 1.3);
    let cfg = |s| EstimatorConfig::new(FieldSpec::Rationals, s, 30, 5_000, SEED);
    let a = estimate_zeta(&cfg(s)).unwrap();
    let b = estimate_zeta(&cfg(s.conj())).unwrap();
    assert_eq!(a.mean, b.mean.conj());
    assert_eq!(a.std_error, b.std_error);
}

#[test]
fn zeta_estimate_with_random_factors_is_within_error() {
    let field: FieldSpec = "Q(sqrt5)".parse().unwrap();
    let cfg = EstimatorConfig::new(field, Complex64::new(2.0, 0.5), 60, 50_000, SEED)
        .with_alpha(adelic_core::AlphaStrategy::Fixed(1.5));
    let est = estimate_zeta(&cfg).unwrap();
    assert!(est.std_error > 0.0);
    assert!((est.mean - est.oracle).norm() <= 4.0 * est.std_error);
}

#[test]
fn sphere_point_is_inside_ball_of_its_norm() {
    let mut rng = keyed_stream(SEED, Purpose::LawCheck(4), 0, 0);
    for m in 1..4 {
        let x = sample_uniform_sphere(5, m, 3, &mut rng).unwrap();
        let origin = PAdicApprox::zero(5, 3).unwrap();
        let ball = adelic_core::Ball::new(&origin, m).unwrap();
        let inner = adelic_core::Ball::new(&origin, m - 1).unwrap();
        assert!(ball.contains(&x).unwrap() && !inner.contains(&x).unwrap());
    }
}
