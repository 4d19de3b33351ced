use std::path::PathBuf;

use adelic_core::number_field::{enumerate_places, splitting};
use adelic_core::process::{conservativity_check, sample_exit_time, simulate_ball_chain, ExitNormLaw};
use adelic_core::rng::{keyed_stream, Purpose};
use adelic_core::semigroup::{check_chapman_kolmogorov, generator_indicator, transition_prob};
use adelic_core::stats::chi_square_gof;
use adelic_core::zeta_mc::{estimate_zeta_with_workers, functional_equation_check_with_workers};
use adelic_core::{AdelicConfig, AlphaStrategy, DistanceClass, EstimatorConfig, FieldSpec, JumpProfile};
use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use crate::report::{emit, Execution, Format, Report, Table};
use crate::Invalid;

#[derive(Debug, Parser)]
#[command(name = "adelic", version, about = "Adelic Markov process simulator and Monte Carlo Dedekind zeta estimator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the finite places with q <= norm bound.
    Places {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value_t = 100)]
        norm_bound: u64,
        #[command(flatten)]
        out: OutputArgs<FormatCsv>,
    },
    /// Evaluate the transition kernel and generator of one coordinate process.
    Kernel {
        #[command(flatten)]
        profile: ProfileArgs,
        /// Ball resolution M (radius q^M).
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        resolution: i64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Number of distance classes reported, and the Chapman-Kolmogorov window.
        #[arg(long, default_value_t = 20)]
        window: u32,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        out: OutputArgs<FormatCsv>,
    },
    /// Sample exit norms and exit times and test them against their laws.
    Laws {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long = "n", default_value_t = 1_000_000)]
        n_samples: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutputArgs<FormatJson>,
    },
    /// Monte Carlo estimate of the truncated Euler product of zeta_K(s).
    Estimate {
        #[command(flatten)]
        zeta: ZetaArgs,
        /// `match` (alpha = Re s) or `fixed:<alpha>`.
        #[arg(long, default_value = "match")]
        alpha: String,
        /// c-schedule exponent: c_v = q_v^(-beta).
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[command(flatten)]
        out: OutputArgs<FormatJson>,
    },
    /// Check the three functional identities at s.
    Funceq {
        #[command(flatten)]
        zeta: ZetaArgs,
        #[command(flatten)]
        out: OutputArgs<FormatJson>,
    },
    /// Check the conservativity bound sum_v P_t(0, R_v^c) <= t sum_v a_v(0).
    Conservativity {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, default_value_t = 50)]
        norm_bound: u64,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        /// Stability index of every place.
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, num_args = 1.., default_values_t = [0.1, 1.0])]
        t: Vec<f64>,
        #[command(flatten)]
        out: OutputArgs<FormatJson>,
    },
    /// Simulate one trajectory of the ball chain.
    Chain {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        resolution: i64,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutputArgs<FormatCsv>,
    },
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    /// "Q" or "Q(sqrt<d>)", e.g. "Q(sqrt-1)".
    #[arg(long, default_value = "Q", value_parser = parse_field)]
    field: FieldSpec,
}

fn parse_field(s: &str) -> std::result::Result<FieldSpec, String> {
    s.parse().map_err(|e: adelic_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct ZetaArgs {
    #[command(flatten)]
    field: FieldArgs,
    /// Real and imaginary part of s.
    #[arg(long, num_args = 2, value_names = ["RE", "IM"], allow_negative_numbers = true, required = true)]
    s: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    norm_bound: u64,
    #[arg(long = "n", default_value_t = 100_000)]
    n_samples: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

impl ZetaArgs {
    fn s(&self) -> Complex64 {
        Complex64::new(self.s[0], self.s[1])
    }
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    q: u64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
}

impl ProfileArgs {
    fn profile(&self) -> Result<JumpProfile> {
        Ok(JumpProfile::geometric(self.q, self.c, self.alpha)?)
    }

    fn echo(&self) -> serde_json::Value {
        json!({ "q": self.q, "c": self.c, "alpha": self.alpha })
    }
}

pub trait DefaultFormat {
    const FORMAT: Format;
}

#[derive(Debug, Clone)]
pub struct FormatCsv;
#[derive(Debug, Clone)]
pub struct FormatJson;

impl DefaultFormat for FormatCsv {
    const FORMAT: Format = Format::Csv;
}

impl DefaultFormat for FormatJson {
    const FORMAT: Format = Format::Json;
}

#[derive(Debug, Args)]
pub struct OutputArgs<D: DefaultFormat + Clone + Send + Sync + 'static> {
    /// Report path; stdout when omitted. ADELIC_OUTPUT_DIR overrides its directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(skip)]
    _default: std::marker::PhantomData<D>,
}

impl<D: DefaultFormat + Clone + Send + Sync + 'static> OutputArgs<D> {
    fn format(&self) -> Format {
        self.format.unwrap_or(D::FORMAT)
    }

    fn write(&self, report: Report, exec: Execution) -> Result<String> {
        emit(report, exec, self.format(), self.output.as_deref())
    }
}

fn require_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or_else(|| Invalid("this subcommand is randomized and needs an explicit --seed".into()).into())
}

fn check_workers(workers: usize) -> Result<()> {
    if workers == 0 {
        return Err(Invalid("--workers must be >= 1".into()).into());
    }
    Ok(())
}

fn parse_alpha(spec: &str) -> Result<AlphaStrategy> {
    match spec.trim() {
        "match" => Ok(AlphaStrategy::MatchRealPart),
        other => other
            .strip_prefix("fixed:")
            .and_then(|a| a.trim().parse().ok())
            .map(AlphaStrategy::Fixed)
            .ok_or_else(|| Invalid(format!("--alpha must be \"match\" or \"fixed:<alpha>\" (got {other:?})")).into()),
    }
}

fn fmt_c(z: Complex64) -> [String; 2] {
    [z.re.to_string(), z.im.to_string()]
}

pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Places { field, norm_bound, out } => places(field.field, norm_bound, &out),
        Command::Kernel { profile, resolution, t, window, tol, out } => kernel(&profile, resolution, t, window, tol, &out),
        Command::Laws { profile, n_samples, seed, out } => laws(&profile, n_samples, seed, &out),
        Command::Estimate { zeta, alpha, beta, out } => estimate(&zeta, &alpha, beta, &out),
        Command::Funceq { zeta, out } => funceq(&zeta, &out),
        Command::Conservativity { field, norm_bound, beta, alpha, t, out } => {
            conservativity(field.field, norm_bound, beta, alpha, &t, &out)
        }
        Command::Chain { profile, resolution, t_end, seed, out } => chain(&profile, resolution, t_end, seed, &out),
    }
}

fn places<D: DefaultFormat + Clone + Send + Sync>(field: FieldSpec, norm_bound: u64, out: &OutputArgs<D>) -> Result<String> {
    let exec = Execution::start(1);
    let places = enumerate_places(&field, norm_bound)?;
    let mut table = Table::new(&["index", "p", "f", "e", "q", "splitting"]);
    let mut rows = Vec::new();
    for v in &places {
        let kind = splitting(&field, v.p);
        table.push(vec![
            v.index.to_string(),
            v.p.to_string(),
            v.f.to_string(),
            v.e.to_string(),
            v.q.to_string(),
            json!(kind).as_str().unwrap_or_default().to_string(),
        ]);
        rows.push(json!({ "place": v, "splitting": kind }));
    }
    let report = Report {
        command: "places",
        config: json!({ "field": field, "norm_bound": norm_bound }),
        result: json!({ "places": rows }),
        table,
        summary: format!("{} places of {field} with q <= {norm_bound}", places.len()),
    };
    out.write(report, exec)
}

fn kernel<D: DefaultFormat + Clone + Send + Sync>(
    args: &ProfileArgs,
    resolution: i64,
    t: f64,
    window: u32,
    tol: f64,
    out: &OutputArgs<D>,
) -> Result<String> {
    let exec = Execution::start(1);
    let profile = args.profile()?;
    let mut table = Table::new(&["class", "m", "kernel", "trunc_error", "generator"]);
    let mut rows = Vec::new();
    let classes = std::iter::once(DistanceClass::Inside).chain((1..=window).map(DistanceClass::Outside));
    for class in classes {
        let k = transition_prob(class, resolution, t, &profile, tol)?;
        let h = generator_indicator(class, resolution, &profile)?;
        let (name, m) = match class {
            DistanceClass::Inside => ("inside", 0),
            DistanceClass::Outside(m) => ("outside", m),
        };
        table.push(vec![name.into(), m.to_string(), k.value.to_string(), k.trunc_error.to_string(), h.to_string()]);
        rows.push(json!({ "class": class, "kernel": k, "generator": h }));
    }
    let ck = check_chapman_kolmogorov(&profile, resolution, t / 2.0, t / 2.0, window)?;
    let report = Report {
        command: "kernel",
        config: json!({ "profile": args.echo(), "resolution": resolution, "t": t, "window": window, "tol": tol }),
        result: json!({ "classes": rows, "chapman_kolmogorov_half_steps": ck }),
        table,
        summary: format!(
            "P_{resolution}({t}) = {}, Chapman-Kolmogorov error at t/2 + t/2 = {:.2e}",
            rows[0]["kernel"]["value"], ck.max_abs_error
        ),
    };
    out.write(report, exec)
}

fn laws<D: DefaultFormat + Clone + Send + Sync>(args: &ProfileArgs, n: u64, seed: Option<u64>, out: &OutputArgs<D>) -> Result<String> {
    let profile = args.profile()?;
    if n < 2 {
        return Err(Invalid("--n must be >= 2".into()).into());
    }
    let seed = require_seed(seed)?;
    let exec = Execution::start(1);
    const CELLS: u32 = 64;
    let law = ExitNormLaw::for_profile(&profile)?;
    let mut rng = keyed_stream(seed, Purpose::LawCheck(0), 0, 0);
    let mut observed = vec![0u64; CELLS as usize];
    for _ in 0..n {
        observed[(law.sample(&mut rng).min(CELLS) - 1) as usize] += 1;
    }
    let mut probs: Vec<f64> = (1..CELLS).map(|m| law.pmf(m)).collect();
    probs.push(law.rho().powi(CELLS as i32 - 1));
    let chi = chi_square_gof(&observed, &probs, 5.0)?;

    let a0 = profile.a(0)?;
    let mut rng = keyed_stream(seed, Purpose::ExitTime, 0, 0);
    let taus: Vec<f64> = (0..n).map(|_| sample_exit_time(&profile, &mut rng)).collect::<adelic_core::Result<_>>()?;
    let survival: Vec<_> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&t| {
            let exact = (-a0 * t).exp();
            let empirical = taus.iter().filter(|&&tau| tau > t).count() as f64 / n as f64;
            let sigma = (exact * (1.0 - exact) / n as f64).sqrt();
            json!({ "t": t, "empirical": empirical, "exact": exact, "z": (empirical - exact) / sigma })
        })
        .collect();

    let mut table = Table::new(&["m", "observed", "expected"]);
    for (m, (&o, &p)) in observed.iter().zip(&probs).enumerate().filter(|(_, (&o, _))| o > 0) {
        table.push(vec![(m + 1).to_string(), o.to_string(), (p * n as f64).to_string()]);
    }
    let report = Report {
        command: "laws",
        config: json!({ "profile": args.echo(), "n_samples": n, "seed": seed }),
        result: json!({ "exit_norm": { "observed": observed, "probabilities": probs, "chi_square": chi }, "exit_time_survival": survival }),
        table,
        summary: format!("exit-norm chi-square p = {:.4} (dof {})", chi.p_value, chi.dof),
    };
    out.write(report, exec)
}

fn estimate<D: DefaultFormat + Clone + Send + Sync>(zeta: &ZetaArgs, alpha: &str, beta: f64, out: &OutputArgs<D>) -> Result<String> {
    let strategy = parse_alpha(alpha)?;
    let mut config = EstimatorConfig::new(zeta.field.field, zeta.s(), zeta.norm_bound, zeta.n_samples, 0).with_alpha(strategy);
    config.beta = beta;
    config.validate()?;
    config.seed = require_seed(zeta.seed)?;
    check_workers(zeta.workers)?;
    let exec = Execution::start(zeta.workers);
    let est = estimate_zeta_with_workers(&config, zeta.workers)?;
    let mut table = Table::new(&[
        "index", "p", "q", "f", "e", "alpha", "c", "exact_re", "exact_im", "mean_re", "mean_im", "std_error",
    ]);
    for d in &est.places {
        let [er, ei] = fmt_c(d.exact_mean);
        let [mr, mi] = fmt_c(d.sample_mean);
        table.push(vec![
            d.index.to_string(),
            d.p.to_string(),
            d.q.to_string(),
            d.f.to_string(),
            d.e.to_string(),
            d.alpha.to_string(),
            d.c.to_string(),
            er,
            ei,
            mr,
            mi,
            d.std_error.to_string(),
        ]);
    }
    let diff = (est.mean - est.oracle).norm();
    let summary = format!(
        "zeta ~ {:.6}{:+.6}i +/- {:.2e} (oracle {:.6}{:+.6}i, |diff| = {diff:.2e}, {} places, n = {})",
        est.mean.re,
        est.mean.im,
        est.std_error,
        est.oracle.re,
        est.oracle.im,
        est.places.len(),
        est.n
    );
    let report = Report {
        command: "estimate",
        config: json!(config),
        result: json!(est),
        table,
        summary,
    };
    out.write(report, exec)
}

fn funceq<D: DefaultFormat + Clone + Send + Sync>(zeta: &ZetaArgs, out: &OutputArgs<D>) -> Result<String> {
    let s = zeta.s();
    if s.re.is_nan() || s.re <= 1.0 {
        return Err(adelic_core::Error::NonConvergent(s.re).into());
    }
    let seed = require_seed(zeta.seed)?;
    check_workers(zeta.workers)?;
    let exec = Execution::start(zeta.workers);
    let field = zeta.field.field;
    let report =
        functional_equation_check_with_workers(&field, s, zeta.norm_bound, zeta.n_samples, seed, zeta.workers)?;
    let mut table = Table::new(&["name", "alpha", "exact_abs_diff", "exact_ok", "mc_abs_diff", "mc_std_error", "mc_ok"]);
    for c in &report.checks {
        let (d, se, ok) = match &c.monte_carlo {
            Some(m) => (m.abs_diff.to_string(), m.combined_std_error.to_string(), m.ok.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        table.push(vec![c.name.clone(), c.alpha.to_string(), c.exact_abs_diff.to_string(), c.exact_ok.to_string(), d, se, ok]);
    }
    let summary = format!(
        "{} identities at s = {}{:+}i over {} places: {}",
        report.checks.len(),
        s.re,
        s.im,
        report.places,
        if report.all_ok() { "all hold" } else { "FAILED" }
    );
    let doc = Report {
        command: "funceq",
        config: json!({
            "field": field, "s": s, "norm_bound": zeta.norm_bound, "n_samples": zeta.n_samples, "seed": seed,
        }),
        result: json!({ "all_ok": report.all_ok(), "report": report }),
        table,
        summary,
    };
    out.write(doc, exec)
}

fn conservativity<D: DefaultFormat + Clone + Send + Sync>(
    field: FieldSpec,
    norm_bound: u64,
    beta: f64,
    alpha: f64,
    times: &[f64],
    out: &OutputArgs<D>,
) -> Result<String> {
    if beta.is_nan() || beta <= 1.0 {
        return Err(Invalid(format!("--beta must be > 1 so that the sum of a_v(0) converges (got {beta})")).into());
    }
    let exec = Execution::start(1);
    let places = enumerate_places(&field, norm_bound)?;
    let config = AdelicConfig::with_schedule(places, beta, alpha)?;
    let mut table = Table::new(&["t", "lhs", "rhs", "slack", "ok"]);
    let mut rows = Vec::new();
    for &t in times {
        let r = conservativity_check(&config, t)?;
        table.push(vec![t.to_string(), r.lhs.to_string(), r.rhs.to_string(), r.slack.to_string(), r.ok.to_string()]);
        rows.push(json!({ "t": t, "check": r }));
    }
    let all_ok = rows.iter().all(|r| r["check"]["ok"] == true);
    let report = Report {
        command: "conservativity",
        config: json!({ "field": field, "norm_bound": norm_bound, "beta": beta, "alpha": alpha, "t": times }),
        result: json!({ "places": config.places.len(), "sum_a0": config.finite_sum_a0(), "checks": rows, "all_ok": all_ok }),
        table,
        summary: format!(
            "{} places, {} times: {}",
            config.places.len(),
            times.len(),
            if all_ok { "bound holds" } else { "bound VIOLATED" }
        ),
    };
    out.write(report, exec)
}

fn chain<D: DefaultFormat + Clone + Send + Sync>(
    args: &ProfileArgs,
    resolution: i64,
    t_end: f64,
    seed: Option<u64>,
    out: &OutputArgs<D>,
) -> Result<String> {
    let profile = args.profile()?;
    let seed = require_seed(seed)?;
    let exec = Execution::start(1);
    let mut rng = keyed_stream(seed, Purpose::BallChain, 0, 0);
    let path = simulate_ball_chain(&profile, resolution, t_end, &mut rng)?;
    let mut table = Table::new(&["clock", "resolution", "digits"]);
    let mut states = Vec::new();
    for s in &path {
        table.push(vec![s.clock.to_string(), s.resolution.to_string(), s.digit_prefix()]);
        states.push(json!({ "clock": s.clock, "center": s.center.to_string() }));
    }
    let report = Report {
        command: "chain",
        config: json!({ "profile": args.echo(), "resolution": resolution, "t_end": t_end, "seed": seed }),
        result: json!({ "jumps": path.len() - 1, "states": states }),
        table,
        summary: format!("{} jumps up to t = {t_end}", path.len() - 1),
    };
    out.write(report, exec)
}
