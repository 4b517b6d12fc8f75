use std::f64::consts::PI;

use rayon::prelude::*;

use super::{ecf_test, ecf_two_sample, farm, slope, stable_draws, tail_statistic, Assertion, SuiteOptions, TestReport};
use crate::error::{Error, Result};
use crate::integral::{integral_path, integrate_field, lp_norm, Deterministic, History, PredictableField};
use crate::kernels::KernelSpec;
use crate::noise::{first_large_jump_time, noise_of_box, truncated_noise_of_box, JumpSet, NoiseConfig, Rect, SpaceTimeBox};
use crate::rng::derive_seed;
use crate::solver::{
    drift_constant, glue, linear_value, picard_batch, picard_solve_with, Driver, GlueOutcome, LipschitzSigma,
    SolverConfig, Start,
};
use crate::stable::LevyMeasure;

/// Exponent shift applied by the negative controls.
const CONTROL_SHIFT: f64 = 0.3;

fn noise(alpha: f64, beta: f64, lo: f64, hi: f64, horizon: f64, cutoff: f64) -> Result<NoiseConfig> {
    NoiseConfig::new(LevyMeasure::from_beta(alpha, beta)?, horizon, Rect::interval(lo, hi), cutoff)
}

fn shifted(opts: &SuiteOptions, alpha: f64) -> f64 {
    if opts.negative_control {
        alpha + CONTROL_SHIFT
    } else {
        alpha
    }
}

/// Z(B) over a unit window against the stable law it should follow.
pub fn ecf_suite(opts: &SuiteOptions) -> Result<TestReport> {
    let n = opts.reps(10_000);
    let cutoff = opts.cutoff.unwrap_or(1e-3);
    let grid = super::default_u_grid();
    let mut out = Vec::new();
    for (alpha, beta) in [(0.5, 0.0), (0.5, 1.0), (1.5, 0.0), (1.5, -1.0)] {
        let cfg = noise(alpha, beta, 0.0, 1.0, 1.0, cutoff)?;
        let seed = derive_seed(opts.seed, &format!("ecf/{alpha}/{beta}"));
        let window = cfg.window();
        let samples = farm(&cfg, seed, n, |_, js| noise_of_box(js, &window, &cfg))?;
        let target = LevyMeasure::from_beta(shifted(opts, alpha), beta)?.box_law(1.0)?;
        let label = format!("alpha={alpha} beta={beta}");
        out.push(ecf_test(&format!("Z(B) vs stable cf, {label}"), &samples, &target, &grid, opts.ecf_base)?);
        let oracle = stable_draws(&target, derive_seed(seed, "oracle"), n);
        out.push(ecf_two_sample(&format!("Z(B) vs sampler draws, {label}"), &samples, &oracle, &grid, opts.ecf_base)?);
    }
    Ok(TestReport::new("ecf", opts, n, out))
}

/// Law of the linear wave solution at (t, 0) = (2, 0).
pub fn linear_suite(opts: &SuiteOptions) -> Result<TestReport> {
    let n = opts.reps(10_000);
    let cutoff = opts.cutoff.unwrap_or(1e-3);
    let (alpha, beta, t) = (0.5, 0.5, 2.0);
    let kernel = KernelSpec::wave1d();
    let cfg = noise(alpha, beta, -2.5, 2.5, t, cutoff)?;
    let mut out = Vec::new();
    let closed = kernel.i_alpha(t, alpha)?.value();
    let quad = kernel.i_alpha_quadrature(t, alpha, 0.0)?.value();
    out.push(Assertion::below("I_alpha(2) closed form vs quadrature (rel)", ((closed - quad) / closed).abs(), 1e-6, "closed-form"));
    out.push(Assertion::near("I_alpha(2) = 2^-alpha t^2", closed, 2.828427, 5e-7, None, "closed-form"));
    let seed = derive_seed(opts.seed, "linear");
    let samples = farm(&cfg, seed, n, |_, js| linear_value(&kernel, js, &cfg, t, 0.0))?;
    let target = LevyMeasure::from_beta(shifted(opts, alpha), beta)?.box_law(closed)?;
    out.push(ecf_test("u(2,0) vs stable cf", &samples, &target, &super::default_u_grid(), opts.ecf_base)?);
    Ok(TestReport::new("linear", opts, n, out))
}

/// Closed-form kernel integrals against quadrature, and the fractional
/// kernel's time scaling.
pub fn kernels_suite(opts: &SuiteOptions) -> Result<TestReport> {
    let mut out = Vec::new();
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let w1 = KernelSpec::wave1d();
    let (c, q) = (w1.i_alpha(2.0, 0.5)?.value(), w1.i_alpha_quadrature(2.0, 0.5, 0.0)?.value());
    out.push(Assertion::below("wave1d I_alpha(2), alpha=0.5: quadrature rel-err", rel(q, c), 1e-6, "closed-form"));
    let w2 = KernelSpec::wave2d();
    let (c, q) = (w2.i_alpha(1.0, 0.5)?.value(), w2.i_alpha_quadrature(1.0, 0.5, 0.0)?.value());
    out.push(Assertion::below("wave2d I_alpha(1), alpha=0.5: quadrature rel-err", rel(q, c), 1e-6, "closed-form"));
    out.push(Assertion::near("wave2d I_alpha(1), alpha=0.5", c, 0.6684342, 5e-8, None, "closed-form"));
    let heat = KernelSpec::heat_free(1)?;
    let a: f64 = 0.5;
    let kappa = (3.0 - a) / 2.0;
    let oracle = a.powf(-0.5) * (2.0 * PI).powf((1.0 - a) / 2.0) / kappa;
    let q = heat.i_alpha_quadrature(1.0, a, 0.0)?.value();
    out.push(Assertion::below("heat d=1 I_alpha(1), alpha=0.5: quadrature vs moment oracle", rel(q, oracle), 1e-6, "closed-form"));
    let frac = KernelSpec::fractional(0.5, 1)?;
    let ts = [0.5, 1.0, 2.0, 4.0];
    for p in [1.5, 2.0] {
        let ys: Vec<f64> = ts.iter().map(|&t| frac.space_power_integral(t, 0.0, p).ln()).collect();
        let xs: Vec<f64> = ts.iter().map(|t: &f64| t.ln()).collect();
        let mut target = -(p - 1.0) / (2.0 * 0.5);
        if opts.negative_control {
            target += CONTROL_SHIFT;
        }
        out.push(Assertion::near(format!("fractional gamma=0.5 slope, p={p}"), slope(&xs, &ys), target, 0.05, None, "scaling-law"));
    }
    Ok(TestReport::new("kernels", opts, 0, out))
}

/// Survival of the first large jump time against exp(−T|B|K^{−α}).
pub fn survival_suite(opts: &SuiteOptions) -> Result<TestReport> {
    let n = opts.reps(10_000);
    let ladder = [1.0, 2.0, 4.0, 64.0];
    let mut out = Vec::new();
    for alpha in [0.5, 1.5] {
        // Only jumps above 1 matter, so a cutoff below the ladder suffices.
        let cfg = noise(alpha, 0.0, 0.0, 1.0, 1.0, 0.5)?;
        let seed = derive_seed(opts.seed, &format!("survival/{alpha}"));
        let taus = farm(&cfg, seed, n, |_, js| {
            Ok([1.0, 2.0, 4.0, 64.0].map(|k| first_large_jump_time(js, &cfg.domain, k)))
        })?;
        let a = shifted(opts, alpha);
        for (i, &k) in ladder.iter().enumerate() {
            let hat = taus.iter().filter(|t| t[i] > 1.0).count() as f64 / n as f64;
            let target = (-f64::powf(k, -a)).exp();
            let se = (target * (1.0 - target) / n as f64).sqrt();
            out.push(Assertion::near(format!("P(tau_K > T), alpha={alpha}, K={k}"), hat, target, 3.0 * se, Some(se), "survival-law"));
        }
        // exp(−64^{−α}) ≥ 0.9 only holds for α > 0.6.
        if alpha > 1.0 {
            let far = taus.iter().filter(|t| t[3] > 1.0).count() as f64 / n as f64;
            out.push(Assertion::at_most(format!("P(tau_64 <= T), alpha={alpha}"), 1.0 - far, 0.1, 0.0, None, "limit"));
        }
    }
    Ok(TestReport::new("survival", opts, n, out))
}

/// Rejects exponents outside the moment window (α, 2].
pub fn check_moment_exponent(alpha: f64, p: f64) -> Result<()> {
    if !(p > alpha && p <= 2.0) {
        return Err(Error::invalid("p", format!("{p} is outside ({alpha}, 2]")));
    }
    Ok(())
}

/// Slope of log E|Z_K(B)|^p in log K.
pub fn moment_suite(opts: &SuiteOptions) -> Result<TestReport> {
    let n = opts.reps(100_000);
    let cutoff = opts.cutoff.unwrap_or(1e-3);
    let ks = [1.0, 2.0, 4.0, 8.0];
    let mut out = Vec::new();
    for (alpha, p) in [(0.5, 0.75), (1.5, 1.9)] {
        check_moment_exponent(alpha, p)?;
        // |B| = 0.01: the single-large-jump regime, where the K-scaling is sharp.
        let cfg = noise(alpha, 0.0, 0.0, 0.01, 1.0, cutoff)?;
        let seed = derive_seed(opts.seed, &format!("moment/{alpha}/{p}"));
        let window = cfg.window();
        let rows = farm(&cfg, seed, n, |_, js| {
            let mut row = [0.0; 4];
            for (i, &k) in ks.iter().enumerate() {
                row[i] = truncated_noise_of_box(js, &window, k, &cfg)?.abs().powf(p);
            }
            Ok(row)
        })?;
        let ys: Vec<f64> = (0..4).map(|i| (rows.iter().map(|r| r[i]).sum::<f64>() / n as f64).ln()).collect();
        let xs: Vec<f64> = ks.iter().map(|k: &f64| k.ln()).collect();
        let mut target = p - alpha;
        if opts.negative_control {
            target += CONTROL_SHIFT;
        }
        out.push(Assertion::near(format!("slope of log E|Z_K|^p, alpha={alpha}, p={p}"), slope(&xs, &ys), target, 0.1, None, "scaling-law"));
    }
    out.push(Assertion::holds("p = alpha rejected", check_moment_exponent(0.5, 0.5).is_err(), "precondition"));
    Ok(TestReport::new("moment", opts, n, out))
}

/// Tail bounds: linearity in |B|, the u^{-1} regime below the envelope, and
/// invariance of weighted sums under Σ|a_k|^α.
pub fn tail_suite(opts: &SuiteOptions) -> Result<TestReport> {
    let n = opts.reps(100_000);
    let alpha = 0.5;
    let a = shifted(opts, alpha);
    let big_k = 1e6;
    let cs = [2.0, 4.0, 8.0, 16.0, 32.0];
    let mut out = Vec::new();

    let mut stats = Vec::new();
    for vol in [1.0, 0.5, 0.25] {
        let cfg = noise(alpha, 0.0, 0.0, vol, 1.0, 1e-5)?;
        let seed = derive_seed(opts.seed, &format!("tail/linear/{vol}"));
        let window = cfg.window();
        let samples = farm(&cfg, seed, n, |_, js| truncated_noise_of_box(js, &window, big_k, &cfg))?;
        let lambdas: Vec<f64> = cs.iter().map(|c| c * vol.powf(1.0 / a)).collect();
        stats.push((vol, tail_statistic(&samples, &lambdas, a)));
    }
    let (_, (s1, e1)) = stats[0];
    for &(vol, (s, e)) in &stats[1..] {
        let r = 1.0 / vol;
        let se = (e1 * e1 + r * r * e * e).sqrt();
        out.push(Assertion::near(format!("|B|-linearity: S(1) - S({vol})/{vol}"), s1 - r * s, 0.0, 3.0 * se, Some(se), "tail-linearity"));
    }
    let per_vol: Vec<f64> = stats.iter().map(|&(v, (s, _))| s / v).collect();
    let mean = per_vol.iter().sum::<f64>() / per_vol.len() as f64;
    let spread = per_vol.iter().map(|r| (r / mean - 1.0).abs()).fold(0.0, f64::max);
    out.push(Assertion::at_most("r_hat stable across |B| (max rel deviation)", spread, 0.2, 0.0, None, "tail-linearity"));

    let k = 1.0;
    let cfg = noise(alpha, 0.0, 0.0, 1.0, 1.0, 1e-3)?;
    let window = cfg.window();
    let samples = farm(&cfg, derive_seed(opts.seed, "tail/envelope"), n, |_, js| truncated_noise_of_box(js, &window, k, &cfg))?;
    let envelope = alpha / (1.0 - alpha) * k.powf(1.0 - alpha);
    for u in [2.0 * k, 4.0 * k, 8.0 * k] {
        let ph = samples.iter().filter(|x| x.abs() > u).count() as f64 / n as f64;
        let se = u * (ph * (1.0 - ph) / n as f64).sqrt();
        out.push(Assertion::at_most(format!("u P(|Z_K|>u) at u={u}"), u * ph, envelope, 3.0 * se, Some(se), "large-deviation"));
    }

    let cfg = noise(alpha, 0.0, 0.0, 3.0, 1.0, 1e-5)?;
    let boxes: Vec<SpaceTimeBox> = (0..3).map(|i| SpaceTimeBox::new(0.0, 1.0, Rect::interval(i as f64, i as f64 + 1.0))).collect();
    let etas = farm(&cfg, derive_seed(opts.seed, "tail/weights"), n, |_, js| {
        let mut e = [0.0; 3];
        for (i, b) in boxes.iter().enumerate() {
            e[i] = truncated_noise_of_box(js, b, big_k, &cfg)?;
        }
        Ok(e)
    })?;
    let scale = 3f64.powf(1.0 / alpha);
    let lambdas: Vec<f64> = cs.iter().map(|c| c * scale).collect();
    let equal: Vec<f64> = etas.iter().map(|e| e[0] + e[1] + e[2]).collect();
    let single: Vec<f64> = etas.iter().map(|e| 3f64.powf(1.0 / a) * e[0]).collect();
    let (se_eq, ee) = tail_statistic(&equal, &lambdas, alpha);
    let (se_single, es) = tail_statistic(&single, &lambdas, alpha);
    let se = (ee * ee + es * es).sqrt();
    out.push(Assertion::near("weights (1,1,1) vs (3^(1/alpha),0,0)", se_eq - se_single, 0.0, 3.0 * se, Some(se), "weight-invariance"));
    let zero: Vec<f64> = etas.iter().map(|_| 0.0).collect();
    out.push(Assertion::at_most("all-zero weights", tail_statistic(&zero, &lambdas, alpha).0, 0.0, 0.0, None, "trivial"));
    Ok(TestReport::new("tail", opts, n, out))
}

/// Moment inequality across K and scaling of the maximal inequality.
pub fn integral_suite(opts: &SuiteOptions) -> Result<TestReport> {
    let n = opts.reps(20_000);
    let (alpha, p) = (0.5, 0.75);
    let a = shifted(opts, alpha);
    let cfg = noise(alpha, 0.0, 0.0, 1.0, 1.0, 1e-3)?;
    let b = Rect::interval(0.0, 0.05);
    let field = |s: f64, x: &[f64; 2]| 1.0 + s * x[0];
    let x = Deterministic(field);
    let none = [JumpSet::empty(1, cfg.cutoff)];
    let mut out = Vec::new();

    let ks = [1.0, 2.0, 4.0];
    let norm_p = lp_norm(&x, p, 1.0, &b, &none)?.powf(p);
    let rows = farm(&cfg, derive_seed(opts.seed, "integral/moment"), n, |_, js| {
        let mut row = [0.0; 3];
        for (i, &k) in ks.iter().enumerate() {
            row[i] = integrate_field(&x, js, 1.0, &b, &cfg, Some(k))?.abs().powf(p);
        }
        Ok(row)
    })?;
    let ratios: Vec<f64> = (0..3)
        .map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / n as f64 / (ks[i].powf(p - a) * norm_p))
        .collect();
    let spread = ratios.iter().fold(0.0, |m: f64, &r| m.max(r)) / ratios.iter().fold(f64::INFINITY, |m: f64, &r| m.min(r));
    out.push(Assertion::at_most("moment ratio across K in {1,2,4}: max/min - 1", spread - 1.0, 0.25, 0.0, None, "moment-inequality"));

    let lambdas: Vec<f64> = (-10..=24).map(|j| 2f64.powf(j as f64 / 2.0)).collect();
    let sups = farm(&cfg, derive_seed(opts.seed, "integral/maximal"), n, |_, js| {
        Ok(integral_path(&x, js, &b, &cfg, None, &[1.0])?.sup_abs())
    })?;
    let norm_a = lp_norm(&x, alpha, 1.0, &b, &none)?.powf(alpha);
    let mut stats = Vec::new();
    for c in [0.6, 1.0, 1.7] {
        let scaled: Vec<f64> = sups.iter().map(|s| c * s).collect();
        stats.push(tail_statistic(&scaled, &lambdas, alpha).0 / (c.powf(a) * norm_a));
    }
    let spread = stats.iter().fold(0.0, |m: f64, &r| m.max(r)) / stats.iter().fold(f64::INFINITY, |m: f64, &r| m.min(r));
    out.push(Assertion::at_most("maximal-inequality constant across X scalings: max/min - 1", spread - 1.0, 0.25, 0.0, None, "maximal-inequality"));
    Ok(TestReport::new("integral", opts, n, out))
}

/// Picard iteration for σ(u) = u on the wave and Dirichlet heat kernels.
pub fn picard_suite(opts: &SuiteOptions) -> Result<TestReport> {
    let n = opts.reps(200);
    let cfg_noise = noise(0.5, 0.0, 0.0, 1.0, 1.0, 1e-3)?;
    let sigma = LipschitzSigma::identity();
    let mut out = Vec::new();
    for kernel in [KernelSpec::wave1d(), KernelSpec::heat_dirichlet()] {
        let name = kernel.name();
        let mut cfg = SolverConfig::new(kernel, cfg_noise, 1.0, 0.75)?;
        if opts.negative_control {
            // A single step cannot reach the fixed point.
            cfg = cfg.with_iterations(1, 1e-8)?;
        }
        let seed = derive_seed(opts.seed, &format!("picard/{name}"));
        let reps = farm(&cfg_noise, seed, n, |_, js| Ok(js.clone()))?;
        let batch = picard_batch(&cfg, &sigma, &reps, Driver::Truncated(1.0), Start::Linear)?;
        out.push(Assertion::below(format!("{name}: worst U_(n+1)/U_n from n=2"), batch.worst_ratio(2), 0.9, "contraction"));
        out.push(Assertion::below(format!("{name}: max fixed-point residual"), batch.max_residual, 1e-8, "residual-recomputation"));
        let m = &batch.moments;
        let growth = if m.len() > 4 && m[4] > 0.0 {
            m[4..m.len().min(20)].iter().fold(0.0, |a: f64, &b| a.max(b)) / m[4]
        } else {
            1.0
        };
        out.push(Assertion::at_most(format!("{name}: max_n M_n / M_5"), growth, 1.1, 0.0, None, "moment-bound"));
        let gap = reps
            .par_iter()
            .map(|js| {
                let a = picard_solve_with(&cfg, &sigma, js, Driver::Truncated(1.0), Start::Zero)?;
                let b = picard_solve_with(&cfg, &sigma, js, Driver::Truncated(1.0), Start::Linear)?;
                Ok(a.max_abs_diff(&b))
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        out.push(Assertion::below(format!("{name}: zero vs linear start"), gap, 1e-7, "uniqueness"));
    }
    Ok(TestReport::new("picard", opts, n, out))
}

/// Gluing across truncation levels and the α > 1 drift relation.
pub fn glue_suite(opts: &SuiteOptions) -> Result<TestReport> {
    let n = opts.reps(400);
    let sigma = LipschitzSigma::affine(0.5, 1.0);
    let mut out = Vec::new();

    let alpha = 0.5;
    let nz = noise(alpha, 0.0, 0.0, 1.0, 1.0, 1e-3)?;
    let cfg = SolverConfig::new(KernelSpec::wave1d(), nz, 1.0, 0.75)?.with_grid(10, 10)?;
    let ladder = [1.0, 2.0, 4.0, 8.0];
    let runs = farm(&nz, derive_seed(opts.seed, "glue/0.5"), n, |_, js| {
        let outcome = glue(&cfg, &sigma, js, &ladder)?;
        let k_used = match &outcome {
            GlueOutcome::Resolved { k, .. } => Some(*k),
            GlueOutcome::Unresolved => None,
        };
        let tau1 = first_large_jump_time(js, &nz.domain, 1.0);
        let tau4 = first_large_jump_time(js, &nz.domain, 4.0);
        // Compare on {τ_1 > T}; the control compares where only τ_4 > T.
        let compare = if opts.negative_control { tau1 <= 1.0 && tau4 > 1.0 } else { tau1 > 1.0 };
        let gap = if compare {
            let u1 = picard_solve_with(&cfg.clone().with_truncation(1.0)?, &sigma, js, Driver::Truncated(1.0), Start::Zero)?;
            let u4 = picard_solve_with(&cfg.clone().with_truncation(4.0)?, &sigma, js, Driver::Truncated(4.0), Start::Zero)?;
            Some(u1.max_abs_diff(&u4))
        } else {
            None
        };
        Ok((k_used, gap))
    })?;
    let gaps: Vec<f64> = runs.iter().filter_map(|r| r.1).collect();
    let worst = gaps.iter().fold(0.0, |a: f64, &b| a.max(b));
    let set = if opts.negative_control { "tau_1 <= T < tau_4" } else { "tau_1 > T" };
    out.push(Assertion::below(format!("alpha=0.5: max |u_1 - u_4| over {} replicates with {set}", gaps.len()), worst, 1e-8, "truncation-consistency"));
    out.push(Assertion::holds("alpha=0.5: comparison set nonempty", !gaps.is_empty(), "truncation-consistency"));
    for &k in &ladder {
        let hat = runs.iter().filter(|r| r.0.is_some_and(|used| used <= k)).count() as f64 / n as f64;
        let target = (-k.powf(-alpha)).exp();
        let se = (target * (1.0 - target) / n as f64).sqrt();
        out.push(Assertion::near(format!("alpha=0.5: resolved by K={k}"), hat, target, 3.0 * se, Some(se), "survival-law"));
    }
    let unresolved = runs.iter().filter(|r| r.0.is_none()).count();
    out.push(Assertion::at_most("alpha=0.5: unresolved replicates (count)", unresolved as f64, n as f64, 0.0, None, "report"));

    let (alpha, beta, k) = (1.5, -0.6, 2.0);
    let nz = noise(alpha, beta, 0.0, 1.0, 1.0, 0.05)?;
    let cfg = SolverConfig::new(KernelSpec::wave1d(), nz, k, 1.75)?.with_grid(10, 10)?;
    let offset_law = drift_constant(&nz, k)?;
    let one = LipschitzSigma::constant(1.0);
    let rows = farm(&nz, derive_seed(opts.seed, "glue/1.5"), n, |_, js| {
        if first_large_jump_time(js, &nz.domain, k) <= 1.0 {
            return Ok(None);
        }
        let full = picard_solve_with(&cfg, &sigma, js, Driver::Full, Start::Zero)?;
        let other = if opts.negative_control { Driver::Truncated(k) } else { Driver::Drifted(k) };
        let v = picard_solve_with(&cfg, &sigma, js, other, Start::Zero)?;
        let u1 = picard_solve_with(&cfg, &one, js, Driver::Full, Start::Zero)?;
        let uk = picard_solve_with(&cfg, &one, js, Driver::Truncated(k), Start::Zero)?;
        let mut offset_err: f64 = 0.0;
        for (i, t) in u1.times.iter().enumerate() {
            for (l, x) in u1.xs.iter().enumerate() {
                let expected = -offset_law * cfg.kernel.cell_mass_time_integral(0.0, *t, *x, 0.0, 1.0);
                offset_err = offset_err.max((u1.at(i, l) - uk.at(i, l) - expected).abs());
            }
        }
        Ok(Some((full.max_abs_diff(&v), offset_err)))
    })?;
    let used: Vec<(f64, f64)> = rows.into_iter().flatten().collect();
    let drift_gap = used.iter().fold(0.0, |a: f64, r| a.max(r.0));
    let offset_gap = used.iter().fold(0.0, |a: f64, r| a.max(r.1));
    out.push(Assertion::below(format!("alpha=1.5: max |u - v_K| over {} replicates with tau_K > T", used.len()), drift_gap, 1e-6, "drift-consistency"));
    out.push(Assertion::below("alpha=1.5: linear offset u - u_K + b_K ∫∫G", offset_gap, 1e-6, "drift-consistency"));
    Ok(TestReport::new("glue", opts, n, out))
}

/// `1{N(s−) ≥ m}·(1 + s x)`: vanishes identically on {N(T) < m}.
struct AfterJumps {
    m: usize,
    flip: bool,
}

impl PredictableField for AfterJumps {
    fn value(&self, s: f64, x: &[f64; 2], past: &History<'_>) -> f64 {
        let on = (past.jumps().len() >= self.m) != self.flip;
        if on {
            1.0 + s * x[0]
        } else {
            0.0
        }
    }
}

/// Integrals of fields vanishing on a replicate event are exactly zero there.
pub fn local_suite(opts: &SuiteOptions) -> Result<TestReport> {
    let n = opts.reps(2_000);
    let mut out = Vec::new();
    for (alpha, k) in [(0.5, 2.0), (1.5, 2.0)] {
        // Cutoff chosen so that a replicate carries 3 jumps on average.
        let cutoff = 3f64.powf(-1.0 / alpha);
        let cfg = noise(alpha, 0.3, 0.0, 1.0, 1.0, cutoff)?;
        let seed = derive_seed(opts.seed, &format!("local/{alpha}"));
        let b = cfg.domain;
        for (label, m) in [("never", 0usize), ("no jumps", 1), ("fewer than 3 jumps", 3)] {
            let field = AfterJumps { m, flip: opts.negative_control };
            let rows = farm(&cfg, seed, n, |_, js| {
                if js.len() >= m {
                    return Ok(None);
                }
                let full = integrate_field(&field, js, 1.0, &b, &cfg, None)?;
                let trunc = integrate_field(&field, js, 1.0, &b, &cfg, Some(k))?;
                Ok(Some(full == 0.0 && trunc == 0.0))
            })?;
            let matching: Vec<bool> = rows.into_iter().flatten().collect();
            let frac = if matching.is_empty() { 1.0 } else { matching.iter().filter(|&&z| z).count() as f64 / matching.len() as f64 };
            out.push(Assertion::near(
                format!("alpha={alpha}, {label}: exact zeros on {} matching replicates", matching.len()),
                frac,
                1.0,
                0.0,
                None,
                "local-property",
            ));
        }
    }
    Ok(TestReport::new("local", opts, n, out))
}
