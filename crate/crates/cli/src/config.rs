//! Run configuration: sectioned `key = value` text or the equivalent JSON.
//!
//! ```text
//! [run]
//! seed = 7
//! replicates = 100
//!
//! [noise]
//! alpha = 1.5
//! beta = -0.5
//! cutoff = 0.01
//! ```
//!
//! Every key is optional. Unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use levy_spde::kernels::{KernelKind, KernelSpec};
use levy_spde::noise::{Generator, NoiseConfig, Rect, SpaceTimeBox};
use levy_spde::solver::{LipschitzSigma, SolverConfig};
use levy_spde::stable::LevyMeasure;
use levy_spde::verify::SuiteOptions;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub seed: u64,
    pub replicates: usize,
    pub out: PathBuf,
    /// Cap on per-replicate files written by `noise`, `linear` and `solve`.
    pub max_files: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSection {
    pub alpha: f64,
    pub beta: f64,
    pub horizon: f64,
    pub domain: (f64, f64),
    pub cutoff: f64,
    pub generator: Generator,
    /// Boxes `(t0, t1, lo, hi)` whose noise values are reported.
    pub boxes: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSection {
    pub kind: String,
    pub dim: usize,
    pub gamma: f64,
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub source: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSection {
    pub truncation: f64,
    pub p: f64,
    pub n_t: usize,
    pub n_x: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// σ(u) = slope·u + offset.
    pub slope: f64,
    pub offset: f64,
    pub drifted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySection {
    pub ecf_base: f64,
    pub cutoff: Option<f64>,
    pub negative_control: bool,
    /// Replicate count for the suites; unset keeps each suite's default.
    pub replicates: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub run: RunSection,
    pub noise: NoiseSection,
    pub kernel: KernelSection,
    pub solver: SolverSection,
    pub verify: VerifySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            run: RunSection { seed: 20240531, replicates: 1, out: PathBuf::from("out"), max_files: 10 },
            noise: NoiseSection {
                alpha: 0.5,
                beta: 0.0,
                horizon: 1.0,
                domain: (0.0, 1.0),
                cutoff: 1e-3,
                generator: Generator::Homogeneous,
                boxes: vec![[0.0, 1.0, 0.0, 1.0]],
            },
            kernel: KernelSection {
                kind: "wave1d".into(),
                dim: 1,
                gamma: 0.5,
                times: vec![0.25, 0.5, 1.0, 2.0],
                xs: (0..=20).map(|i| -2.0 + 0.2 * i as f64).collect(),
                source: 0.0,
                p: 1.0,
            },
            solver: SolverSection {
                truncation: 1.0,
                p: 0.75,
                n_t: 20,
                n_x: 20,
                max_iter: 200,
                tol: 1e-8,
                slope: 1.0,
                offset: 1.0,
                drifted: false,
            },
            verify: VerifySection { ecf_base: 0.02, cutoff: None, negative_control: false, replicates: None },
        }
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("run", &["seed", "replicates", "out", "max_files"]),
    ("noise", &["alpha", "beta", "horizon", "domain", "cutoff", "generator", "boxes"]),
    ("kernel", &["kind", "dim", "gamma", "times", "xs", "source", "p"]),
    ("solver", &["truncation", "p", "n_t", "n_x", "max_iter", "tol", "sigma_slope", "sigma_offset", "drifted"]),
    ("verify", &["ecf_base", "cutoff", "negative_control", "replicates"]),
];

/// Raw value with the line it came from (0 when unknown, as for JSON).
struct Entry {
    value: String,
    line: usize,
}

type Table = BTreeMap<(String, String), Entry>;

fn config_error(line: usize, message: impl Into<String>) -> CliError {
    CliError::Config { line, message: message.into() }
}

fn check_key(section: &str, key: &str, line: usize) -> Result<(), CliError> {
    let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| *s == section) else {
        let names: Vec<_> = SECTIONS.iter().map(|s| s.0).collect();
        return Err(config_error(line, format!("unknown section [{section}]; expected one of {}", names.join(", "))));
    };
    if !keys.contains(&key) {
        return Err(config_error(line, format!("unknown key '{key}' in [{section}]; expected one of {}", keys.join(", "))));
    }
    Ok(())
}

fn parse_ini(text: &str) -> Result<Table, CliError> {
    let mut table = Table::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| config_error(line, format!("malformed section header '{content}'")))?
                .trim();
            if !SECTIONS.iter().any(|s| s.0 == name) {
                check_key(name, "", line)?;
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) =
            content.split_once('=').ok_or_else(|| config_error(line, format!("expected 'key = value', found '{content}'")))?;
        let key = key.trim();
        let sec = section.clone().ok_or_else(|| config_error(line, format!("key '{key}' appears before any [section]")))?;
        check_key(&sec, key, line)?;
        let entry = Entry { value: value.trim().to_string(), line };
        if let Some(prev) = table.insert((sec.clone(), key.to_string()), entry) {
            return Err(config_error(line, format!("duplicate key '{key}' in [{sec}] (first set on line {})", prev.line)));
        }
    }
    Ok(table)
}

fn json_scalar(v: &Value, path: &str) -> Result<String, CliError> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Array(items) => {
            let parts = items
                .iter()
                .map(|item| match item {
                    Value::Array(inner) => {
                        inner.iter().map(|x| json_scalar(x, path)).collect::<Result<Vec<_>, _>>().map(|v| v.join(","))
                    }
                    other => json_scalar(other, path),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let sep = if items.iter().any(Value::is_array) { ";" } else { "," };
            parts.join(sep)
        }
        Value::Null | Value::Object(_) => return Err(config_error(0, format!("'{path}' must be a scalar or an array"))),
    })
}

fn parse_json(text: &str) -> Result<Table, CliError> {
    let root: Value = serde_json::from_str(text).map_err(|e| config_error(e.line(), format!("invalid JSON: {e}")))?;
    let Value::Object(sections) = root else {
        return Err(config_error(1, "top-level JSON value must be an object of sections"));
    };
    let mut table = Table::new();
    for (sec, body) in sections {
        if !SECTIONS.iter().any(|s| s.0 == sec) {
            check_key(&sec, "", 0)?;
        }
        let Value::Object(keys) = body else {
            return Err(config_error(0, format!("section '{sec}' must be an object")));
        };
        for (key, v) in keys {
            check_key(&sec, &key, 0)?;
            let value = json_scalar(&v, &format!("{sec}.{key}"))?;
            table.insert((sec.clone(), key), Entry { value, line: 0 });
        }
    }
    Ok(table)
}

struct Reader {
    table: Table,
}

impl Reader {
    fn take<T>(&mut self, sec: &str, key: &str, default: T, parse: impl Fn(&str) -> Option<T>, what: &str) -> Result<T, CliError> {
        match self.table.remove(&(sec.to_string(), key.to_string())) {
            None => Ok(default),
            Some(e) => parse(&e.value)
                .ok_or_else(|| config_error(e.line, format!("{sec}.{key}: expected {what}, found '{}'", e.value))),
        }
    }

    fn f64(&mut self, sec: &str, key: &str, default: f64) -> Result<f64, CliError> {
        self.take(sec, key, default, |s| s.parse().ok(), "a number")
    }

    fn usize(&mut self, sec: &str, key: &str, default: usize) -> Result<usize, CliError> {
        self.take(sec, key, default, |s| s.parse().ok(), "a non-negative integer")
    }

    fn bool(&mut self, sec: &str, key: &str, default: bool) -> Result<bool, CliError> {
        self.take(sec, key, default, |s| s.parse().ok(), "true or false")
    }

    fn list(&mut self, sec: &str, key: &str, default: Vec<f64>) -> Result<Vec<f64>, CliError> {
        self.take(sec, key, default, parse_list, "a comma-separated list of numbers")
    }

    fn line_of(&self, sec: &str, key: &str) -> usize {
        self.table.get(&(sec.to_string(), key.to_string())).map_or(0, |e| e.line)
    }
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse().ok()).collect()
}

fn parse_boxes(s: &str) -> Option<Vec<[f64; 4]>> {
    s.split(';')
        .filter(|b| !b.trim().is_empty())
        .map(|b| parse_list(b).and_then(|v| <[f64; 4]>::try_from(v).ok()))
        .collect()
}

fn parse_generator(s: &str) -> Option<Generator> {
    match s {
        "homogeneous" => Some(Generator::Homogeneous),
        "partitioned" => Some(Generator::Partitioned),
        _ => None,
    }
}

fn generator_name(g: Generator) -> &'static str {
    match g {
        Generator::Homogeneous => "homogeneous",
        Generator::Partitioned => "partitioned",
    }
}

const KERNEL_KINDS: &[&str] = &["heat_free", "heat_dirichlet", "fractional", "cable", "wave1d", "wave2d"];

fn from_table(mut r: Reader) -> Result<RunConfig, CliError> {
    let d = RunConfig::default();
    let run = RunSection {
        seed: r.take("run", "seed", d.run.seed, |s| s.parse().ok(), "an unsigned 64-bit integer")?,
        replicates: r.usize("run", "replicates", d.run.replicates)?,
        out: r.take("run", "out", d.run.out.clone(), |s| Some(PathBuf::from(s)), "a path")?,
        max_files: r.usize("run", "max_files", d.run.max_files)?,
    };
    let noise = NoiseSection {
        alpha: r.f64("noise", "alpha", d.noise.alpha)?,
        beta: r.f64("noise", "beta", d.noise.beta)?,
        horizon: r.f64("noise", "horizon", d.noise.horizon)?,
        domain: r.take(
            "noise",
            "domain",
            d.noise.domain,
            |s| parse_list(s).filter(|v| v.len() == 2).map(|v| (v[0], v[1])),
            "two numbers 'lo, hi'",
        )?,
        cutoff: r.f64("noise", "cutoff", d.noise.cutoff)?,
        generator: r.take("noise", "generator", d.noise.generator, parse_generator, "homogeneous or partitioned")?,
        boxes: r.take("noise", "boxes", d.noise.boxes.clone(), parse_boxes, "boxes 't0,t1,lo,hi' separated by ';'")?,
    };
    let kernel = KernelSection {
        kind: r.take(
            "kernel",
            "kind",
            d.kernel.kind.clone(),
            |s| KERNEL_KINDS.contains(&s).then(|| s.to_string()),
            &format!("one of {}", KERNEL_KINDS.join(", ")),
        )?,
        dim: r.usize("kernel", "dim", d.kernel.dim)?,
        gamma: r.f64("kernel", "gamma", d.kernel.gamma)?,
        times: r.list("kernel", "times", d.kernel.times.clone())?,
        xs: r.list("kernel", "xs", d.kernel.xs.clone())?,
        source: r.f64("kernel", "source", d.kernel.source)?,
        p: r.f64("kernel", "p", d.kernel.p)?,
    };
    let solver = SolverSection {
        truncation: r.f64("solver", "truncation", d.solver.truncation)?,
        p: r.f64("solver", "p", d.solver.p)?,
        n_t: r.usize("solver", "n_t", d.solver.n_t)?,
        n_x: r.usize("solver", "n_x", d.solver.n_x)?,
        max_iter: r.usize("solver", "max_iter", d.solver.max_iter)?,
        tol: r.f64("solver", "tol", d.solver.tol)?,
        slope: r.f64("solver", "sigma_slope", d.solver.slope)?,
        offset: r.f64("solver", "sigma_offset", d.solver.offset)?,
        drifted: r.bool("solver", "drifted", d.solver.drifted)?,
    };
    let replicates_line = r.line_of("verify", "replicates");
    let verify = VerifySection {
        ecf_base: r.f64("verify", "ecf_base", d.verify.ecf_base)?,
        cutoff: r.take("verify", "cutoff", None, |s| s.parse().ok().map(Some), "a number")?,
        negative_control: r.bool("verify", "negative_control", d.verify.negative_control)?,
        replicates: r.take("verify", "replicates", None, |s| s.parse().ok().map(Some), "a positive integer")?,
    };
    if verify.replicates == Some(0) {
        return Err(config_error(replicates_line, "verify.replicates must be positive"));
    }
    debug_assert!(r.table.is_empty());
    Ok(RunConfig { run, noise, kernel, solver, verify })
}

impl RunConfig {
    /// Parses either format. Text whose first non-blank character is `{`
    /// is read as JSON.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table = if text.trim_start().starts_with('{') { parse_json(text)? } else { parse_ini(text)? };
        from_table(Reader { table })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config { line, message } => {
                let at = if line > 0 { format!("{}:{line}", path.display()) } else { path.display().to_string() };
                CliError::Config { line: 0, message: format!("{at}: {message}") }
            }
            other => other,
        })
    }

    /// The normalized text form: every key, fixed order, defaults filled in.
    pub fn normalized(&self) -> String {
        fn list(v: &[f64]) -> String {
            v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
        }
        let mut s = String::new();
        let r = &self.run;
        let _ = writeln!(s, "[run]\nseed = {}\nreplicates = {}\nout = {}\nmax_files = {}\n", r.seed, r.replicates, r.out.display(), r.max_files);
        let n = &self.noise;
        let boxes = n.boxes.iter().map(|b| list(b)).collect::<Vec<_>>().join("; ");
        let _ = writeln!(
            s,
            "[noise]\nalpha = {}\nbeta = {}\nhorizon = {}\ndomain = {}, {}\ncutoff = {}\ngenerator = {}\nboxes = {}\n",
            n.alpha,
            n.beta,
            n.horizon,
            n.domain.0,
            n.domain.1,
            n.cutoff,
            generator_name(n.generator),
            boxes
        );
        let k = &self.kernel;
        let _ = writeln!(
            s,
            "[kernel]\nkind = {}\ndim = {}\ngamma = {}\ntimes = {}\nxs = {}\nsource = {}\np = {}\n",
            k.kind,
            k.dim,
            k.gamma,
            list(&k.times),
            list(&k.xs),
            k.source,
            k.p
        );
        let v = &self.solver;
        let _ = writeln!(
            s,
            "[solver]\ntruncation = {}\np = {}\nn_t = {}\nn_x = {}\nmax_iter = {}\ntol = {}\nsigma_slope = {}\nsigma_offset = {}\ndrifted = {}\n",
            v.truncation, v.p, v.n_t, v.n_x, v.max_iter, v.tol, v.slope, v.offset, v.drifted
        );
        let w = &self.verify;
        let _ = writeln!(s, "[verify]\necf_base = {}\nnegative_control = {}", w.ecf_base, w.negative_control);
        if let Some(c) = w.cutoff {
            let _ = writeln!(s, "cutoff = {c}");
        }
        if let Some(n) = w.replicates {
            let _ = writeln!(s, "replicates = {n}");
        }
        s
    }

    pub fn noise_config(&self) -> Result<NoiseConfig, CliError> {
        let n = &self.noise;
        let measure = LevyMeasure::from_beta(n.alpha, n.beta)?;
        let cfg = NoiseConfig::new(measure, n.horizon, Rect::interval(n.domain.0, n.domain.1), n.cutoff)?;
        Ok(cfg.with_generator(n.generator))
    }

    pub fn boxes(&self) -> Result<Vec<SpaceTimeBox>, CliError> {
        let n = &self.noise;
        self.noise
            .boxes
            .iter()
            .map(|&[t0, t1, lo, hi]| {
                let inside = 0.0 <= t0 && t0 < t1 && t1 <= n.horizon && n.domain.0 <= lo && lo < hi && hi <= n.domain.1;
                if inside {
                    Ok(SpaceTimeBox::new(t0, t1, Rect::interval(lo, hi)))
                } else {
                    Err(config_error(0, format!("noise.boxes: ({t0},{t1})x({lo},{hi}) is empty or leaves the simulated window")))
                }
            })
            .collect()
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, CliError> {
        let k = &self.kernel;
        let kind = match k.kind.as_str() {
            "heat_free" => KernelKind::HeatFree,
            "heat_dirichlet" => KernelKind::HeatDirichletInterval,
            "fractional" => KernelKind::FractionalHeat { gamma: k.gamma },
            "cable" => KernelKind::Cable,
            "wave1d" => KernelKind::Wave1d,
            "wave2d" => KernelKind::Wave2d,
            other => return Err(config_error(0, format!("kernel.kind: unknown kernel '{other}'"))),
        };
        Ok(KernelSpec::new(kind, k.dim)?)
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let s = &self.solver;
        let cfg = SolverConfig::new(self.kernel_spec()?, self.noise_config()?, s.truncation, s.p)?
            .with_grid(s.n_t, s.n_x)?
            .with_iterations(s.max_iter, s.tol)?;
        Ok(cfg)
    }

    pub fn sigma(&self) -> LipschitzSigma {
        LipschitzSigma::affine(self.solver.slope, self.solver.offset)
    }

    pub fn suite_options(&self) -> SuiteOptions {
        SuiteOptions {
            seed: self.run.seed,
            replicates: self.verify.replicates,
            negative_control: self.verify.negative_control,
            ecf_base: self.verify.ecf_base,
            cutoff: self.verify.cutoff,
        }
    }

    /// Checks the replicate count shared by the simulation commands.
    pub fn check_replicates(&self) -> Result<(), CliError> {
        if self.run.replicates == 0 {
            return Err(config_error(0, "run.replicates must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_normalized_text() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.normalized()).unwrap(), cfg);
    }

    #[test]
    fn edited_config_round_trips() {
        let text = "[run]\nseed = 9 # comment\n[noise]\nalpha = 0.5\nboxes = 0,0.5,0,1; 0.5,1,0.2,0.4\n[verify]\ncutoff = 0.01\nreplicates = 50\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.run.seed, 9);
        assert_eq!(cfg.noise.boxes.len(), 2);
        assert_eq!(cfg.verify.cutoff, Some(0.01));
        assert_eq!(RunConfig::parse(&cfg.normalized()).unwrap(), cfg);
    }

    #[test]
    fn json_matches_text() {
        let json = r#"{"run": {"seed": 9}, "noise": {"alpha": 0.5, "boxes": [[0, 0.5, 0, 1], [0.5, 1, 0.2, 0.4]]},
                      "kernel": {"times": [1, 2]}}"#;
        let text = "[run]\nseed = 9\n[noise]\nalpha = 0.5\nboxes = 0,0.5,0,1;0.5,1,0.2,0.4\n[kernel]\ntimes = 1, 2\n";
        assert_eq!(RunConfig::parse(json).unwrap(), RunConfig::parse(text).unwrap());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = RunConfig::parse("[run]\nseed = 1\n\n[noise]\nalpah = 0.5\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 5, .. }), "{err}");
        let err = RunConfig::parse("[noise]\nalpha = half\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 2, .. }), "{err}");
        let err = RunConfig::parse("[bogus]\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 1, .. }), "{err}");
        let err = RunConfig::parse("[run]\nseed = 1\nseed = 2\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(RunConfig::parse(r#"{"run": {"sed": 1}}"#).is_err());
    }

    #[test]
    fn module_preconditions_are_checked() {
        let cfg = RunConfig::parse("[noise]\nalpha = 1\n").unwrap();
        assert!(cfg.noise_config().is_err());
        let cfg = RunConfig::parse("[run]\nreplicates = 0\n").unwrap();
        assert!(cfg.check_replicates().is_err());
        let cfg = RunConfig::parse("[noise]\nboxes = 0,2,0,1\n").unwrap();
        assert!(cfg.boxes().is_err());
    }
}
