//! Seeded Monte-Carlo suites with pass/fail reports.

mod suites;

use std::time::Instant;

use num_complex::Complex64;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{simulate_into, JumpSet, NoiseConfig};
use crate::rng::stream;
use crate::stable::{stable_cf, StableParams, StableSampler};

pub use suites::*;

pub const SCHEMA_VERSION: u32 = 1;

/// Suite names accepted by [`run_suite`].
pub const SUITES: &[&str] = &["ecf", "linear", "kernels", "survival", "moment", "tail", "integral", "picard", "glue", "local"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub statistic: f64,
    pub target: f64,
    /// `"<"`: statistic < target; `"<="`: statistic ≤ target + tolerance;
    /// `"~"`: |statistic − target| ≤ tolerance.
    pub relation: String,
    pub tolerance: f64,
    pub standard_error: Option<f64>,
    pub source: String,
    pub pass: bool,
}

impl Assertion {
    pub fn below(name: impl Into<String>, statistic: f64, bound: f64, source: &str) -> Self {
        Self {
            name: name.into(),
            statistic,
            target: bound,
            relation: "<".into(),
            tolerance: 0.0,
            standard_error: None,
            source: source.into(),
            pass: statistic < bound,
        }
    }

    pub fn at_most(name: impl Into<String>, statistic: f64, bound: f64, slack: f64, se: Option<f64>, source: &str) -> Self {
        Self {
            name: name.into(),
            statistic,
            target: bound,
            relation: "<=".into(),
            tolerance: slack,
            standard_error: se,
            source: source.into(),
            pass: statistic <= bound + slack,
        }
    }

    pub fn near(name: impl Into<String>, statistic: f64, target: f64, tolerance: f64, se: Option<f64>, source: &str) -> Self {
        Self {
            name: name.into(),
            statistic,
            target,
            relation: "~".into(),
            tolerance,
            standard_error: se,
            source: source.into(),
            pass: (statistic - target).abs() <= tolerance,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool, source: &str) -> Self {
        Self::near(name, if ok { 1.0 } else { 0.0 }, 1.0, 0.0, None, source)
    }

    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let rel = match self.relation.as_str() {
            "~" => format!("target {:.6e} ± {:.3e}", self.target, self.tolerance),
            "<=" => format!("bound {:.6e} + {:.3e}", self.target, self.tolerance),
            _ => format!("bound < {:.6e}", self.target),
        };
        let se = self.standard_error.map(|s| format!(", se {s:.3e}")).unwrap_or_default();
        format!("{verdict} {}: {:.6e} ({rel}{se})", self.name, self.statistic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub schema_version: u32,
    pub suite: String,
    pub seed: u64,
    pub negative_control: bool,
    pub replicates: usize,
    pub assertions: Vec<Assertion>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl TestReport {
    pub fn new(suite: &str, opts: &SuiteOptions, replicates: usize, assertions: Vec<Assertion>) -> Self {
        let pass = !assertions.is_empty() && assertions.iter().all(|a| a.pass);
        Self {
            schema_version: SCHEMA_VERSION,
            suite: suite.into(),
            seed: opts.seed,
            negative_control: opts.negative_control,
            replicates,
            assertions,
            pass,
            wall_time_s: None,
        }
    }

    /// JSON without the wall time; identical seeds give identical bytes.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.wall_time_s = None;
        serde_json::to_string_pretty(&c).expect("report serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn summary(&self) -> String {
        let mut out = format!(
            "[{}] suite {} (seed {}, {} replicates{})\n",
            if self.pass { "PASS" } else { "FAIL" },
            self.suite,
            self.seed,
            self.replicates,
            if self.negative_control { ", negative control" } else { "" }
        );
        for a in &self.assertions {
            out.push_str("  ");
            out.push_str(&a.line());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Overrides the suite's default replicate count.
    pub replicates: Option<usize>,
    pub negative_control: bool,
    /// Base of the ECF threshold `base·(10⁵/N)^{1/2}`.
    pub ecf_base: f64,
    /// Overrides the PRM cutoff of the ecf, linear and moment suites.
    pub cutoff: Option<f64>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { seed: 20240531, replicates: None, negative_control: false, ecf_base: 0.02, cutoff: None }
    }
}

impl SuiteOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    fn reps(&self, default: usize) -> usize {
        self.replicates.unwrap_or(default)
    }
}

/// Runs a suite by name and stamps the wall time.
pub fn run_suite(name: &str, opts: &SuiteOptions) -> Result<TestReport> {
    let start = Instant::now();
    let mut report = match name {
        "ecf" => ecf_suite(opts),
        "linear" => linear_suite(opts),
        "kernels" => kernels_suite(opts),
        "survival" => survival_suite(opts),
        "moment" => moment_suite(opts),
        "tail" => tail_suite(opts),
        "integral" => integral_suite(opts),
        "picard" => picard_suite(opts),
        "glue" => glue_suite(opts),
        "local" => local_suite(opts),
        _ => Err(Error::invalid("suite", format!("unknown suite '{name}'; available: {}", SUITES.join(", ")))),
    }?;
    report.wall_time_s = Some(start.elapsed().as_secs_f64());
    Ok(report)
}

/// The default ECF grid: 201 points on [−5, 5].
pub fn default_u_grid() -> Vec<f64> {
    (0..=200).map(|i| -5.0 + 0.05 * i as f64).collect()
}

pub fn empirical_cf(samples: &[f64], u: f64) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for &x in samples {
        let (s, c) = (u * x).sin_cos();
        re += c;
        im += s;
    }
    Complex64::new(re, im) / samples.len() as f64
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.len() < 10_000 {
        return Err(Error::invalid("samples", format!("need at least 10⁴ samples, got {}", samples.len())));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degenerate("non-finite sample".into()));
    }
    if samples.iter().all(|&x| x == samples[0]) {
        return Err(Error::Degenerate("all samples are equal".into()));
    }
    Ok(())
}

/// `sup_u |φ̂(u) − φ(u)|` against a stable cf, thresholded at
/// `base·(10⁵/N)^{1/2}`.
pub fn ecf_test(name: &str, samples: &[f64], params: &StableParams, u_grid: &[f64], base: f64) -> Result<Assertion> {
    check_samples(samples)?;
    let dist = u_grid.iter().map(|&u| (empirical_cf(samples, u) - stable_cf(params, u)).norm()).fold(0.0, f64::max);
    let threshold = base * (1e5 / samples.len() as f64).sqrt();
    Ok(Assertion::below(name, dist, threshold, "ecf-sup-distance"))
}

/// Two-sample version: `sup_u |φ̂_a(u) − φ̂_b(u)|`.
pub fn ecf_two_sample(name: &str, a: &[f64], b: &[f64], u_grid: &[f64], base: f64) -> Result<Assertion> {
    check_samples(a)?;
    check_samples(b)?;
    let dist = u_grid.iter().map(|&u| (empirical_cf(a, u) - empirical_cf(b, u)).norm()).fold(0.0, f64::max);
    let n = a.len().min(b.len()) as f64;
    Ok(Assertion::below(name, dist, base * (1e5 / n).sqrt(), "ecf-two-sample"))
}

/// `sup_λ λ^α P̂(|X| > λ)` over `lambdas`, with the binomial standard error
/// at the maximizing λ.
pub fn tail_statistic(samples: &[f64], lambdas: &[f64], alpha: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    let mut best = (0.0, 0.0);
    for &l in lambdas {
        let p = samples.iter().filter(|x| x.abs() > l).count() as f64 / n;
        let v = l.powf(alpha) * p;
        if v > best.0 {
            best = (v, l.powf(alpha) * (p * (1.0 - p) / n).sqrt());
        }
    }
    best
}

pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Simulates `n` replicates on independent streams of `seed` and maps each.
pub fn farm<T, F>(config: &NoiseConfig, seed: u64, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &JumpSet) -> Result<T> + Sync,
{
    (0..n)
        .into_par_iter()
        .map_init(
            || JumpSet::empty(config.domain.dim, config.cutoff),
            |set, r| {
                simulate_into(config, &mut stream(seed, r as u64), set)?;
                f(r, set)
            },
        )
        .collect()
}

/// Independent draws from a stable law, in chunks of 4096 per stream.
pub fn stable_draws(params: &StableParams, seed: u64, n: usize) -> Vec<f64> {
    let sampler = StableSampler::new(*params);
    (0..n.div_ceil(4096))
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream(seed, c as u64);
            let len = 4096.min(n - c * 4096);
            (0..len).map(move |_| sampler.sample(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, beta: f64) -> StableParams {
        StableParams::new(alpha, 1.0, beta, 0.0).unwrap()
    }

    #[test]
    fn ecf_self_consistency_and_power() {
        let grid = default_u_grid();
        for (a, b) in [(0.5, 0.0), (1.5, 0.7)] {
            let x = stable_draws(&params(a, b), 11, 20_000);
            assert!(ecf_test("own", &x, &params(a, b), &grid, 0.02).unwrap().pass);
            assert!(!ecf_test("wrong", &x, &params(a + 0.3, b), &grid, 0.02).unwrap().pass);
        }
        assert!(ecf_test("empty", &[], &params(0.5, 0.0), &grid, 0.02).is_err());
        assert!(matches!(ecf_test("flat", &vec![1.0; 20_000], &params(0.5, 0.0), &grid, 0.02), Err(Error::Degenerate(_))));
    }

    #[test]
    fn helpers() {
        assert!((slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
        let (s, se) = tail_statistic(&[0.5, 2.0, -3.0, 0.1], &[1.0, 4.0], 1.0);
        assert_eq!(s, 0.5);
        assert!((se - (0.25f64 / 4.0).sqrt()).abs() < 1e-15);
        let (m, _) = mean_se(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(default_u_grid().len(), 201);
    }

    #[test]
    fn reports_are_deterministic() {
        let opts = SuiteOptions::with_seed(5);
        let a = run_suite("survival", &opts).unwrap();
        let b = run_suite("survival", &opts).unwrap();
        assert_eq!(a.canonical_json(), b.canonical_json());
        assert!(a.to_json().contains("wall_time_s"));
        assert!(!a.canonical_json().contains("wall_time_s"));
        let back: TestReport = serde_json::from_str(&a.canonical_json()).unwrap();
        assert_eq!(back.schema_version, SCHEMA_VERSION);
        assert!(a.summary().lines().count() > a.assertions.len());
    }

    #[test]
    fn unknown_suite_lists_available() {
        let err = run_suite("nope", &SuiteOptions::default()).unwrap_err();
        assert!(err.to_string().contains("survival"));
    }
}
