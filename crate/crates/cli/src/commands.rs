use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use levy_spde::error::Error;
use levy_spde::noise::{noise_of_box, simulate_jumps, JumpSet};
use levy_spde::rng::stream;
use levy_spde::solver::{picard_solve, picard_solve_drifted, solve_linear, SolutionField};
use levy_spde::verify::{run_suite, mean_se, SUITES};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

fn header(cfg: &RunConfig) -> String {
    format!("levy-spde {} seed={}", env!("CARGO_PKG_VERSION"), cfg.run.seed)
}

/// Creates the output directory and writes the normalized config echo.
fn prepare_out(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let out = cfg.run.out.clone();
    fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    fs::write(out.join("config.ini"), format!("# {}\n{}", header(cfg), cfg.normalized()))?;
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let m = if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) };
    m + 0.0
}

#[derive(Serialize)]
struct BoxSummary {
    t0: f64,
    t1: f64,
    lo: f64,
    hi: f64,
    median: f64,
    law_alpha: f64,
    law_sigma: f64,
    law_beta: f64,
}

#[derive(Serialize)]
struct NoiseSummary {
    version: &'static str,
    seed: u64,
    replicates: usize,
    mean_jump_count: f64,
    jump_count_se: f64,
    expected_jump_count: f64,
    boxes: Vec<BoxSummary>,
}

pub fn noise(cfg: &RunConfig) -> Result<bool, CliError> {
    cfg.check_replicates()?;
    let noise = cfg.noise_config()?;
    let boxes = cfg.boxes()?;
    let out = prepare_out(cfg)?;
    let seed = cfg.run.seed;
    let keep = cfg.run.max_files;

    let results: Vec<(usize, Vec<f64>, Option<JumpSet>)> = (0..cfg.run.replicates)
        .into_par_iter()
        .map(|i| {
            let jumps = simulate_jumps(&noise, &mut stream(seed, i as u64))?;
            let values = boxes.iter().map(|b| noise_of_box(&jumps, b, &noise)).collect::<Result<Vec<_>, _>>()?;
            Ok((jumps.len(), values, (i < keep).then_some(jumps)))
        })
        .collect::<Result<_, Error>>()?;

    let head = header(cfg);
    if keep > 0 {
        fs::create_dir_all(out.join("jumps"))?;
    }
    for (i, (_, _, jumps)) in results.iter().enumerate() {
        if let Some(j) = jumps {
            let mut w = create(&out.join(format!("jumps/replicate_{i:04}.csv")))?;
            j.write_csv(&mut w, Some(&head))?;
            w.flush()?;
        }
    }
    let mut w = create(&out.join("box_values.csv"))?;
    writeln!(w, "# {head}\nreplicate,box,value")?;
    for (i, (_, values, _)) in results.iter().enumerate() {
        for (b, v) in values.iter().enumerate() {
            writeln!(w, "{i},{b},{v:.16e}")?;
        }
    }
    w.flush()?;

    let counts: Vec<f64> = results.iter().map(|r| r.0 as f64).collect();
    let (mean, se) = mean_se(&counts);
    let mut summary = NoiseSummary {
        version: env!("CARGO_PKG_VERSION"),
        seed,
        replicates: cfg.run.replicates,
        mean_jump_count: mean,
        jump_count_se: se,
        expected_jump_count: noise.expected_jumps(),
        boxes: Vec::new(),
    };
    for (b, sp) in boxes.iter().enumerate() {
        let mut values: Vec<f64> = results.iter().map(|r| r.1[b]).collect();
        let law = noise.measure.box_law(sp.volume())?;
        summary.boxes.push(BoxSummary {
            t0: sp.t0,
            t1: sp.t1,
            lo: sp.region.lo[0],
            hi: sp.region.hi[0],
            median: median(&mut values),
            law_alpha: law.alpha,
            law_sigma: law.sigma,
            law_beta: law.beta,
        });
    }
    write_json(&out.join("summary.json"), &summary)?;

    println!("{head}");
    println!("replicates            {}", summary.replicates);
    println!("mean jump count       {:.6} (se {:.6})", summary.mean_jump_count, summary.jump_count_se);
    println!("expected jump count   {:.6}", summary.expected_jump_count);
    for (b, s) in summary.boxes.iter().enumerate() {
        println!(
            "box {b} ({}, {}]x({}, {}): median {:.6}, law S_{}(sigma={:.6}, beta={})",
            s.t0, s.t1, s.lo, s.hi, s.median, s.law_alpha, s.law_sigma, s.law_beta
        );
    }
    println!("wrote {}", out.display());
    Ok(true)
}

fn write_field(path: &Path, field: &SolutionField, head: &str) -> Result<(), CliError> {
    let mut w = create(path)?;
    field.write_csv(&mut w, Some(head))?;
    w.flush()?;
    Ok(())
}

/// The value at the last time row and the middle column.
fn terminal(field: &SolutionField) -> (f64, f64) {
    let l = field.xs.len() / 2;
    (field.xs[l], field.at(field.times.len() - 1, l))
}

pub fn linear(cfg: &RunConfig) -> Result<bool, CliError> {
    cfg.check_replicates()?;
    let solver = cfg.solver_config()?;
    let out = prepare_out(cfg)?;
    let seed = cfg.run.seed;
    let keep = cfg.run.max_files;

    let fields: Vec<(f64, f64, Option<SolutionField>)> = (0..cfg.run.replicates)
        .into_par_iter()
        .map(|i| {
            let jumps = simulate_jumps(&solver.noise, &mut stream(seed, i as u64))?;
            let field = solve_linear(&solver.kernel, &jumps, &solver)?;
            let (x, u) = terminal(&field);
            Ok((x, u, (i < keep).then_some(field)))
        })
        .collect::<Result<_, Error>>()?;

    let head = header(cfg);
    if keep > 0 {
        fs::create_dir_all(out.join("linear"))?;
    }
    let mut w = create(&out.join("terminal.csv"))?;
    writeln!(w, "# {head}\nreplicate,t,x,u")?;
    for (i, (x, u, field)) in fields.iter().enumerate() {
        writeln!(w, "{i},{:.16e},{x:.16e},{u:.16e}", solver.noise.horizon)?;
        if let Some(f) = field {
            write_field(&out.join(format!("linear/replicate_{i:04}.csv")), f, &head)?;
        }
    }
    w.flush()?;

    let mut us: Vec<f64> = fields.iter().map(|f| f.1).collect();
    println!("{head}");
    println!("kernel                {}", solver.kernel.name());
    println!("replicates            {}", cfg.run.replicates);
    println!("grid                  {} x {}", solver.n_t, solver.n_x);
    println!("median terminal value {:.6}", median(&mut us));
    println!("wrote {}", out.display());
    Ok(true)
}

#[derive(Serialize)]
struct SolveSummary {
    version: &'static str,
    seed: u64,
    kernel: String,
    drifted: bool,
    replicates: usize,
    converged: usize,
    max_iterations: usize,
    max_residual: f64,
}

pub fn solve(cfg: &RunConfig) -> Result<bool, CliError> {
    cfg.check_replicates()?;
    let solver = cfg.solver_config()?;
    let sigma = cfg.sigma();
    if cfg.solver.drifted && solver.alpha() <= 1.0 {
        return Err(CliError::Config { line: 0, message: "solver.drifted requires noise.alpha > 1".into() });
    }
    let out = prepare_out(cfg)?;
    let seed = cfg.run.seed;
    let keep = cfg.run.max_files;

    let runs: Vec<Option<SolutionField>> = (0..cfg.run.replicates)
        .into_par_iter()
        .map(|i| {
            let jumps = simulate_jumps(&solver.noise, &mut stream(seed, i as u64))?;
            let result = if cfg.solver.drifted {
                picard_solve_drifted(&solver, &sigma, &jumps)
            } else {
                picard_solve(&solver, &sigma, &jumps)
            };
            match result {
                Ok(f) => Ok(Some(f)),
                Err(Error::Diverged { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, Error>>()?;

    let head = header(cfg);
    if keep > 0 {
        fs::create_dir_all(out.join("solve"))?;
    }
    let mut summary = SolveSummary {
        version: env!("CARGO_PKG_VERSION"),
        seed,
        kernel: solver.kernel.name(),
        drifted: cfg.solver.drifted,
        replicates: cfg.run.replicates,
        converged: 0,
        max_iterations: 0,
        max_residual: 0.0,
    };
    let mut w = create(&out.join("terminal.csv"))?;
    writeln!(w, "# {head}\nreplicate,converged,iterations,residual,u")?;
    for (i, run) in runs.iter().enumerate() {
        let Some(f) = run else {
            writeln!(w, "{i},false,,,")?;
            continue;
        };
        let d = &f.diagnostics;
        summary.converged += usize::from(d.converged);
        summary.max_iterations = summary.max_iterations.max(d.iterations);
        summary.max_residual = summary.max_residual.max(d.residual);
        writeln!(w, "{i},{},{},{:.6e},{:.16e}", d.converged, d.iterations, d.residual, terminal(f).1)?;
        if i < keep {
            write_field(&out.join(format!("solve/replicate_{i:04}.csv")), f, &head)?;
            fs::write(out.join(format!("solve/replicate_{i:04}.json")), f.diagnostics_json() + "\n")?;
        }
    }
    w.flush()?;
    write_json(&out.join("summary.json"), &summary)?;

    println!("{head}");
    println!("kernel                {}", summary.kernel);
    println!("sigma                 {}", sigma.label());
    println!("converged             {}/{}", summary.converged, summary.replicates);
    println!("max iterations        {}", summary.max_iterations);
    println!("max residual          {:.3e}", summary.max_residual);
    println!("wrote {}", out.display());
    Ok(summary.converged == summary.replicates)
}

pub fn kernels(cfg: &RunConfig) -> Result<bool, CliError> {
    let spec = cfg.kernel_spec()?;
    let alpha = cfg.noise.alpha;
    let p = cfg.kernel.p;
    let times = &cfg.kernel.times;
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(CliError::Config { line: 0, message: "kernel.times must be a nonempty list of positive times".into() });
    }
    let rows = times
        .iter()
        .map(|&t| Ok((t, spec.i_alpha(t, alpha)?.value(), spec.j_p(t, p)?.value())))
        .collect::<Result<Vec<_>, Error>>()?;
    let out = prepare_out(cfg)?;
    let head = header(cfg);
    let y = [cfg.kernel.source, 0.0];

    let mut w = create(&out.join("kernel_values.csv"))?;
    writeln!(w, "# {head}\nt,x,value")?;
    for &t in times {
        for &x in &cfg.kernel.xs {
            writeln!(w, "{t},{x},{:.16e}", spec.eval(t, &[x, 0.0], &y)?)?;
        }
    }
    w.flush()?;

    let mut w = create(&out.join("kernel_integrals.csv"))?;
    writeln!(w, "# {head}\nt,I_alpha,J_p")?;
    for (t, i, j) in &rows {
        writeln!(w, "{t},{i:.16e},{j:.16e}")?;
    }
    w.flush()?;

    println!("{head}");
    println!("kernel {}  alpha={alpha}  p={p}", spec.name());
    println!("{:>10} {:>16} {:>16}", "t", "I_alpha", "J_p");
    for (t, i, j) in &rows {
        println!("{t:>10} {i:>16.6} {j:>16.6}");
    }
    println!("wrote {}", out.display());
    Ok(true)
}

#[derive(Serialize)]
struct SuiteResult<'a> {
    suite: &'a str,
    pass: bool,
}

pub fn verify(cfg: &RunConfig, suite: &str) -> Result<bool, CliError> {
    let names: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else if SUITES.contains(&suite) {
        vec![suite]
    } else {
        return Err(CliError::Usage(format!("unknown suite '{suite}'; available: {}, all", SUITES.join(", "))));
    };
    let opts = cfg.suite_options();
    let out = prepare_out(cfg)?;
    let mut results = Vec::new();
    for name in names {
        let report = run_suite(name, &opts)?;
        fs::write(out.join(format!("verify_{name}.json")), report.canonical_json() + "\n")?;
        print!("{}", report.summary());
        println!("  wall time {:.1}s", report.wall_time_s.unwrap_or(0.0));
        results.push(SuiteResult { suite: name, pass: report.pass });
    }
    let pass = results.iter().all(|r| r.pass);
    if suite == "all" {
        write_json(&out.join("verify_all.json"), &results)?;
        let failed: Vec<_> = results.iter().filter(|r| !r.pass).map(|r| r.suite).collect();
        if failed.is_empty() {
            println!("all {} suites pass", results.len());
        } else {
            println!("failed suites: {}", failed.join(", "));
        }
    }
    Ok(pass)
}
