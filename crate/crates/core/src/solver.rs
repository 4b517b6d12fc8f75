//! Mild solutions on a space-time grid in d = 1: the linear equation, the
//! truncated nonlinear equation by Picard iteration, the α > 1 drifted
//! equation, and gluing across truncation levels.
//!
//! The state of an iterate is its values on the grid `(t_k, x_l)` and at the
//! left limits `(T_j-, X_j)` of the jumps. The compensator integral freezes
//! `σ(u)` on each cell `(t_k, t_{k+1}] × cell_l` at its left time edge, so
//! every quantity depends only on strictly earlier ones and the iteration
//! reaches its fixed point after finitely many steps.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::noise::{compensator_band, first_large_jump_time, truncation_drift, Jump, JumpSet, NoiseConfig};
use crate::rng::stream;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub kernel: KernelSpec,
    pub noise: NoiseConfig,
    pub truncation: f64,
    pub p: f64,
    pub n_t: usize,
    pub n_x: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl SolverConfig {
    pub fn new(kernel: KernelSpec, noise: NoiseConfig, truncation: f64, p: f64) -> Result<Self> {
        let c = Self { kernel, noise, truncation, p, n_t: 20, n_x: 20, max_iter: 200, tol: 1e-8 };
        c.validate()?;
        Ok(c)
    }

    pub fn with_grid(mut self, n_t: usize, n_x: usize) -> Result<Self> {
        self.n_t = n_t;
        self.n_x = n_x;
        self.validate()?;
        Ok(self)
    }

    pub fn with_iterations(mut self, max_iter: usize, tol: f64) -> Result<Self> {
        self.max_iter = max_iter;
        self.tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_truncation(mut self, k: f64) -> Result<Self> {
        self.truncation = k;
        self.validate()?;
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.noise.alpha()
    }

    pub fn validate(&self) -> Result<()> {
        check_domain(&self.kernel, &self.noise)?;
        let alpha = self.alpha();
        let window_ok = if alpha < 1.0 { self.p > alpha && self.p < 1.0 } else { self.p > alpha && self.p <= 2.0 };
        if !window_ok {
            let w = if alpha < 1.0 { "(α, 1)" } else { "(α, 2]" };
            return Err(Error::invalid("p", format!("{} is outside {w} for α = {alpha}", self.p)));
        }
        if !self.kernel.j_p_time_integrable(self.p) {
            return Err(Error::invalid("p", format!("∫J_p dt is infinite for {} at p = {}", self.kernel.name(), self.p)));
        }
        if !(self.truncation > self.noise.cutoff) {
            return Err(Error::invalid("K", format!("{} must exceed the cutoff {}", self.truncation, self.noise.cutoff)));
        }
        if self.n_t == 0 || self.n_x == 0 {
            return Err(Error::invalid("grid", "need at least one time step and one space point"));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::invalid("iterations", "need max_iter ≥ 1 and a positive tolerance"));
        }
        Ok(())
    }
}

fn check_domain(kernel: &KernelSpec, noise: &NoiseConfig) -> Result<()> {
    if kernel.dim() != 1 || noise.domain.dim != 1 {
        return Err(Error::Unsupported("the solver handles d = 1 only".into()));
    }
    if let Some((lo, hi)) = kernel.bounded_domain() {
        if noise.domain.lo[0] != lo || noise.domain.hi[0] != hi {
            return Err(Error::invalid("domain", format!("{} needs the domain ({lo}, {hi}]", kernel.name())));
        }
    }
    if !kernel.i_alpha_finite(noise.alpha()) {
        return Err(Error::InfiniteIntegrability { kernel: kernel.name(), alpha: noise.alpha() });
    }
    Ok(())
}

/// A Lipschitz coefficient `σ` with its declared constant.
#[derive(Clone)]
pub struct LipschitzSigma {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lipschitz: f64,
    label: String,
}

impl std::fmt::Debug for LipschitzSigma {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LipschitzSigma({}, C = {})", self.label, self.lipschitz)
    }
}

impl LipschitzSigma {
    /// Wraps `f` after spot-checking the Lipschitz and linear-growth bounds on
    /// 10³ seeded random pairs.
    pub fn new<F>(label: impl Into<String>, lipschitz: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::invalid("sigma", "Lipschitz constant must be finite and nonnegative"));
        }
        let s = Self { f: Arc::new(f), lipschitz, label: label.into() };
        let growth = s.growth();
        let mut rng = stream(0x5167_4d41, 0);
        for _ in 0..1000 {
            let u: f64 = rng.random_range(-100.0..100.0);
            let v: f64 = rng.random_range(-100.0..100.0);
            let (fu, fv) = (s.eval(u), s.eval(v));
            if (fu - fv).abs() > lipschitz * (u - v).abs() * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::invalid("sigma", format!("Lipschitz bound fails at ({u}, {v})")));
            }
            if fu.abs() > growth * (1.0 + u.abs()) * (1.0 + 1e-12) {
                return Err(Error::invalid("sigma", format!("growth bound fails at {u}")));
            }
        }
        Ok(s)
    }

    /// `σ(u) = a u + b`.
    pub fn affine(a: f64, b: f64) -> Self {
        let f = move |u: f64| a * u + b;
        Self { f: Arc::new(f), lipschitz: a.abs(), label: format!("{a}*u+{b}") }
    }

    pub fn identity() -> Self {
        Self::affine(1.0, 0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::affine(0.0, c)
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `D_σ = C_σ ∨ |σ(0)|`.
    pub fn growth(&self) -> f64 {
        self.lipschitz.max(self.eval(0.0).abs())
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Per-iteration `max |u_n - u_{n-1}|^p` over grid and jump points.
    pub increments: Vec<f64>,
    pub residual: f64,
    pub converged: bool,
    pub k_used: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    /// Row-major `(n_t + 1) × n_x`.
    pub values: Vec<f64>,
    /// `(T_j, X_j, u(T_j-, X_j))` for the jumps used.
    pub jump_values: Vec<(f64, f64, f64)>,
    pub diagnostics: Diagnostics,
}

impl SolutionField {
    pub fn at(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.xs.len() + l]
    }

    pub fn max_abs_diff(&self, other: &SolutionField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "t,x,u")?;
        for (k, t) in self.times.iter().enumerate() {
            for (l, x) in self.xs.iter().enumerate() {
                writeln!(w, "{t:.16e},{x:.16e},{:.16e}", self.at(k, l))?;
            }
        }
        Ok(())
    }

    pub fn diagnostics_json(&self) -> String {
        serde_json::to_string_pretty(&self.diagnostics).expect("diagnostics serialize")
    }
}

/// Which noise the integral map is driven by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Driver {
    /// Z_K, compensated by the (ε, K] band when α > 1.
    Truncated(f64),
    /// Z_K with the extra drift `-b_K σ(u)`; α > 1 only.
    Drifted(f64),
    /// Z itself, compensated by the (ε, ∞) band when α > 1.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    Zero,
    Linear,
}

fn compensator(noise: &NoiseConfig, driver: Driver) -> Result<f64> {
    match driver {
        Driver::Truncated(k) => noise.truncated_compensator(k),
        Driver::Full => noise.full_compensator(),
        Driver::Drifted(k) => {
            if noise.alpha() < 1.0 {
                return Err(Error::invalid("alpha", "the drifted equation needs α > 1"));
            }
            Ok(noise.truncated_compensator(k)? + truncation_drift(&noise.measure, k)?)
        }
    }
}

fn grid_times(horizon: f64, n_t: usize) -> Vec<f64> {
    (0..=n_t).map(|k| horizon * k as f64 / n_t as f64).collect()
}

fn grid_cells(lo: f64, hi: f64, n_x: usize) -> Vec<(f64, f64)> {
    let h = (hi - lo) / n_x as f64;
    (0..n_x).map(|l| (lo + l as f64 * h, lo + (l + 1) as f64 * h)).collect()
}

/// The discretized integral map for one realization. `Φ(u)` at an
/// evaluation point is `Σ_i A_i σ(u at jump i) - c Σ_m W_m σ(u at node m)`.
struct IntegralMap {
    times: Vec<f64>,
    xs: Vec<f64>,
    jumps: Vec<Jump>,
    /// Lower-triangular `A[j][i] = G(T_j - T_i, X_j, X_i) z_i` for i < j.
    jump_jump: Vec<Vec<f64>>,
    /// `grid_jump[g][i] = G(t_k - T_i, x_l, X_i) z_i` for `T_i < t_k`.
    grid_jump: Vec<Vec<f64>>,
    comp: f64,
    /// `W[lag][l][l']`: time integral over lag window of the cell mass.
    lag_weights: Vec<Vec<Vec<f64>>>,
    /// Per jump, weights against grid nodes `(k, l')` with `t_k < T_j`.
    jump_grid: Vec<Vec<f64>>,
}

impl IntegralMap {
    fn build(config: &SolverConfig, jumps: &[Jump], comp: f64) -> Self {
        let kernel = &config.kernel;
        let horizon = config.noise.horizon;
        let (lo, hi) = (config.noise.domain.lo[0], config.noise.domain.hi[0]);
        let times = grid_times(horizon, config.n_t);
        let cells = grid_cells(lo, hi, config.n_x);
        let xs: Vec<f64> = cells.iter().map(|c| 0.5 * (c.0 + c.1)).collect();
        let jumps: Vec<Jump> = jumps.to_vec();
        let jump_jump: Vec<Vec<f64>> = (0..jumps.len())
            .map(|j| {
                let jj = &jumps[j];
                jumps[..j]
                    .iter()
                    .map(|ji| if ji.t < jj.t { kernel.eval1(jj.t - ji.t, jj.x[0], ji.x[0]) * ji.z } else { 0.0 })
                    .collect()
            })
            .collect();
        let mut grid_jump = Vec::with_capacity(times.len() * xs.len());
        for &t in &times {
            for &x in &xs {
                grid_jump.push(
                    jumps.iter().map(|ji| if ji.t < t { kernel.eval1(t - ji.t, x, ji.x[0]) * ji.z } else { 0.0 }).collect(),
                );
            }
        }
        let (lag_weights, jump_grid) = if comp != 0.0 {
            let dt = horizon / config.n_t as f64;
            let lag_weights = (0..config.n_t)
                .map(|m| {
                    xs.iter()
                        .map(|&x| {
                            cells
                                .iter()
                                .map(|c| kernel.cell_mass_time_integral(m as f64 * dt, (m + 1) as f64 * dt, x, c.0, c.1))
                                .collect()
                        })
                        .collect()
                })
                .collect();
            let jump_grid = jumps
                .iter()
                .map(|j| {
                    let mut w = Vec::new();
                    for k in 0..config.n_t {
                        if !(times[k] < j.t) {
                            break;
                        }
                        let upper = times[k + 1].min(j.t);
                        for c in &cells {
                            w.push(kernel.cell_mass_time_integral(j.t - upper, j.t - times[k], j.x[0], c.0, c.1));
                        }
                    }
                    w
                })
                .collect();
            (lag_weights, jump_grid)
        } else {
            (Vec::new(), Vec::new())
        };
        Self { times, xs, jumps, jump_jump, grid_jump, comp, lag_weights, jump_grid }
    }

    fn n_grid(&self) -> usize {
        self.times.len() * self.xs.len()
    }

    /// One application of the map to the state `(grid, at_jumps)`.
    fn apply(&self, sigma: &dyn Fn(f64) -> f64, grid: &[f64], at_jumps: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let s_jump: Vec<f64> = at_jumps.iter().map(|&u| sigma(u)).collect();
        let s_grid: Vec<f64> = grid.iter().map(|&u| sigma(u)).collect();
        let nx = self.xs.len();
        let mut new_jumps: Vec<f64> = self.jump_jump.iter().map(|row| dot(row, &s_jump)).collect();
        let mut new_grid: Vec<f64> = self.grid_jump.iter().map(|row| dot(row, &s_jump)).collect();
        if self.comp != 0.0 {
            for (j, w) in self.jump_grid.iter().enumerate() {
                new_jumps[j] -= self.comp * dot(w, &s_grid[..w.len()]);
            }
            for k in 1..self.times.len() {
                for l in 0..nx {
                    let mut acc = 0.0;
                    for kp in 0..k {
                        let weights = &self.lag_weights[k - kp - 1][l];
                        acc += dot(weights, &s_grid[kp * nx..(kp + 1) * nx]);
                    }
                    new_grid[k * nx + l] -= self.comp * acc;
                }
            }
        }
        (new_grid, new_jumps)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn p_distance(a: &[f64], b: &[f64], p: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(p)).fold(0.0, f64::max)
}

/// Per-iteration grid records kept for replicate-level statistics.
struct Trace {
    increments: Vec<Vec<f64>>,
    iterates: Vec<Vec<f64>>,
}

fn jumps_for(config: &SolverConfig, jumps: &JumpSet, driver: Driver) -> Result<Vec<Jump>> {
    if jumps.dim != 1 {
        return Err(Error::invalid("jumps", "the solver needs a one-dimensional jump set"));
    }
    let window = config.noise.window();
    let keep = |j: &&Jump| window.contains(j);
    Ok(match driver {
        Driver::Full => jumps.iter().filter(keep).copied().collect(),
        Driver::Truncated(k) | Driver::Drifted(k) => jumps.iter().filter(keep).filter(|j| j.z.abs() <= k).copied().collect(),
    })
}

fn iterate(
    config: &SolverConfig,
    sigma: &LipschitzSigma,
    jumps: &JumpSet,
    driver: Driver,
    start: Start,
    keep_trace: bool,
) -> Result<(SolutionField, Trace)> {
    config.validate()?;
    let comp = compensator(&config.noise, driver)?;
    let used = jumps_for(config, jumps, driver)?;
    let map = IntegralMap::build(config, &used, comp);
    let f = |u: f64| sigma.eval(u);
    let (mut grid, mut at_jumps) = match start {
        Start::Zero => (vec![0.0; map.n_grid()], vec![0.0; used.len()]),
        Start::Linear => map.apply(&|_| 1.0, &vec![0.0; map.n_grid()], &vec![0.0; used.len()]),
    };
    let mut trace = Trace { increments: Vec::new(), iterates: Vec::new() };
    let mut increments = Vec::new();
    let mut rising = 0;
    let mut converged = false;
    for n in 1..=config.max_iter {
        let (g, j) = map.apply(&f, &grid, &at_jumps);
        let u = p_distance(&g, &grid, config.p).max(p_distance(&j, &at_jumps, config.p));
        if keep_trace {
            trace.increments.push(g.iter().zip(&grid).map(|(a, b)| (a - b).abs().powf(config.p)).collect());
            trace.iterates.push(g.iter().map(|a| a.abs().powf(config.p)).collect());
        }
        grid = g;
        at_jumps = j;
        if let Some(&last) = increments.last() {
            rising = if u > last { rising + 1 } else { 0 };
        }
        increments.push(u);
        if u < config.tol {
            converged = true;
            break;
        }
        if rising >= 3 {
            return Err(Error::Diverged { iterations: n, increments });
        }
    }
    let (g, j) = map.apply(&f, &grid, &at_jumps);
    let residual = p_distance(&g, &grid, config.p).max(p_distance(&j, &at_jumps, config.p));
    let field = SolutionField {
        times: map.times.clone(),
        xs: map.xs.clone(),
        values: grid,
        jump_values: map.jumps.iter().zip(&at_jumps).map(|(jp, &u)| (jp.t, jp.x[0], u)).collect(),
        diagnostics: Diagnostics { iterations: increments.len(), increments, residual, converged, k_used: None },
    };
    Ok((field, trace))
}

/// `u(t, x) = ∫₀^t ∫_O G(t - s, x, y) Z(ds, dy)` at a single point; the
/// compensator term (α > 1) is integrated in closed form.
pub fn linear_value(kernel: &KernelSpec, jumps: &JumpSet, noise: &NoiseConfig, t: f64, x: f64) -> Result<f64> {
    check_domain(kernel, noise)?;
    let (lo, hi) = (noise.domain.lo[0], noise.domain.hi[0]);
    let window = noise.window();
    let mut total = 0.0;
    for j in jumps.iter() {
        if j.t < t && window.contains(j) {
            total += kernel.eval1(t - j.t, x, j.x[0]) * j.z;
        }
    }
    let comp = noise.full_compensator()?;
    if comp != 0.0 {
        total -= comp * kernel.cell_mass_time_integral(0.0, t, x, lo, hi);
    }
    Ok(total)
}

/// The linear solution against Z on the grid of `config`.
pub fn solve_linear(kernel: &KernelSpec, jumps: &JumpSet, config: &SolverConfig) -> Result<SolutionField> {
    check_domain(kernel, &config.noise)?;
    let (lo, hi) = (config.noise.domain.lo[0], config.noise.domain.hi[0]);
    let times = grid_times(config.noise.horizon, config.n_t);
    let xs: Vec<f64> = grid_cells(lo, hi, config.n_x).iter().map(|c| 0.5 * (c.0 + c.1)).collect();
    let mut values = Vec::with_capacity(times.len() * xs.len());
    for &t in &times {
        for &x in &xs {
            values.push(linear_value(kernel, jumps, &config.noise, t, x)?);
        }
    }
    let jump_values = jumps
        .iter()
        .filter(|j| config.noise.window().contains(j))
        .map(|j| linear_value(kernel, jumps, &config.noise, j.t, j.x[0]).map(|u| (j.t, j.x[0], u)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SolutionField {
        times,
        xs,
        values,
        jump_values,
        diagnostics: Diagnostics { iterations: 0, increments: Vec::new(), residual: 0.0, converged: true, k_used: None },
    })
}

/// Picard iteration for `u = ∫∫ G σ(u) dZ_K` with `K = config.truncation`.
pub fn picard_solve(config: &SolverConfig, sigma: &LipschitzSigma, jumps: &JumpSet) -> Result<SolutionField> {
    picard_solve_with(config, sigma, jumps, Driver::Truncated(config.truncation), Start::Zero)
}

/// Picard iteration for the drifted equation `Lu = σ(u) Ż_K - b_K σ(u)`.
pub fn picard_solve_drifted(config: &SolverConfig, sigma: &LipschitzSigma, jumps: &JumpSet) -> Result<SolutionField> {
    picard_solve_with(config, sigma, jumps, Driver::Drifted(config.truncation), Start::Zero)
}

pub fn picard_solve_with(
    config: &SolverConfig,
    sigma: &LipschitzSigma,
    jumps: &JumpSet,
    driver: Driver,
    start: Start,
) -> Result<SolutionField> {
    iterate(config, sigma, jumps, driver, start, false).map(|r| r.0)
}

/// Replicate-level Picard statistics on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchDiagnostics {
    pub replicates: usize,
    /// `U_n = sup_grid mean |u_n - u_{n-1}|^p`.
    pub increments: Vec<f64>,
    /// `M_n = sup_grid mean |u_n|^p`.
    pub moments: Vec<f64>,
    pub max_residual: f64,
    pub all_converged: bool,
}

impl BatchDiagnostics {
    /// Largest `U_{n+1} / U_n` from `from` on, skipping exact zeros.
    pub fn worst_ratio(&self, from: usize) -> f64 {
        let u = &self.increments;
        (from.max(1)..u.len().saturating_sub(1))
            .filter(|&n| u[n] > 0.0)
            .map(|n| u[n + 1] / u[n])
            .fold(0.0, f64::max)
    }
}

/// Runs the Picard iteration on every replicate with common random numbers
/// and averages the grid records; iterations past a replicate's stopping
/// point repeat its final iterate.
pub fn picard_batch(
    config: &SolverConfig,
    sigma: &LipschitzSigma,
    replicates: &[JumpSet],
    driver: Driver,
    start: Start,
) -> Result<BatchDiagnostics> {
    if replicates.is_empty() {
        return Err(Error::invalid("replicates", "need at least one realization"));
    }
    let runs = replicates
        .par_iter()
        .map(|js| iterate(config, sigma, js, driver, start, true))
        .collect::<Result<Vec<_>>>()?;
    let depth = runs.iter().map(|r| r.1.increments.len()).max().unwrap_or(0);
    let n_grid = (config.n_t + 1) * config.n_x;
    let mut inc = vec![vec![0.0; n_grid]; depth];
    let mut mom = vec![vec![0.0; n_grid]; depth];
    for (_, trace) in &runs {
        for n in 0..depth {
            if let Some(row) = trace.increments.get(n) {
                inc[n].iter_mut().zip(row).for_each(|(a, b)| *a += b);
            }
            let row = trace.iterates.get(n).or(trace.iterates.last());
            if let Some(row) = row {
                mom[n].iter_mut().zip(row).for_each(|(a, b)| *a += b);
            }
        }
    }
    let r = replicates.len() as f64;
    let sup_mean = |rows: Vec<Vec<f64>>| rows.into_iter().map(|row| row.into_iter().fold(0.0, f64::max) / r).collect();
    Ok(BatchDiagnostics {
        replicates: replicates.len(),
        increments: sup_mean(inc),
        moments: sup_mean(mom),
        max_residual: runs.iter().map(|r| r.0.diagnostics.residual).fold(0.0, f64::max),
        all_converged: runs.iter().all(|r| r.0.diagnostics.converged),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum GlueOutcome {
    Resolved { k: f64, field: SolutionField },
    /// Every ladder level has a large jump in the domain before the horizon.
    Unresolved,
}

/// Solution of the untruncated equation on one replicate: the solution at the
/// smallest ladder level `K` with `τ_K(O) > T` (drifted form when α > 1).
pub fn glue(config: &SolverConfig, sigma: &LipschitzSigma, jumps: &JumpSet, ladder: &[f64]) -> Result<GlueOutcome> {
    if ladder.is_empty() {
        return Err(Error::invalid("ladder", "need at least one truncation level"));
    }
    if ladder.windows(2).any(|w| !(w[1] > w[0])) || !(ladder[0] > config.noise.cutoff) {
        return Err(Error::invalid("ladder", "levels must increase strictly and exceed the cutoff"));
    }
    for &k in ladder {
        if first_large_jump_time(jumps, &config.noise.domain, k) > config.noise.horizon {
            let driver = if config.alpha() > 1.0 { Driver::Drifted(k) } else { Driver::Truncated(k) };
            let cfg = config.clone().with_truncation(k)?;
            let mut field = picard_solve_with(&cfg, sigma, jumps, driver, Start::Zero)?;
            field.diagnostics.k_used = Some(k);
            return Ok(GlueOutcome::Resolved { k, field });
        }
    }
    Ok(GlueOutcome::Unresolved)
}

/// `-(c ∫₀^t ∫_O G dy ds)` on the grid: the solution for σ ≡ 1 with no jumps.
pub fn drift_only_field(config: &SolverConfig, driver: Driver) -> Result<Vec<f64>> {
    let comp = compensator(&config.noise, driver)?;
    let (lo, hi) = (config.noise.domain.lo[0], config.noise.domain.hi[0]);
    let times = grid_times(config.noise.horizon, config.n_t);
    let xs: Vec<f64> = grid_cells(lo, hi, config.n_x).iter().map(|c| 0.5 * (c.0 + c.1)).collect();
    let mut out = Vec::with_capacity(times.len() * xs.len());
    for &t in &times {
        for &x in &xs {
            out.push(-comp * config.kernel.cell_mass_time_integral(0.0, t, x, lo, hi));
        }
    }
    Ok(out)
}

/// `b_K` as a band value, exposed for the K-doubling check.
pub fn drift_constant(noise: &NoiseConfig, k: f64) -> Result<f64> {
    Ok(compensator_band(&noise.measure, k, f64::INFINITY)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{simulate_jumps, Rect};
    use crate::stable::LevyMeasure;

    fn noise(alpha: f64, beta: f64, cutoff: f64, lo: f64, hi: f64, horizon: f64) -> NoiseConfig {
        NoiseConfig::new(LevyMeasure::from_beta(alpha, beta).unwrap(), horizon, Rect::interval(lo, hi), cutoff).unwrap()
    }

    fn wave_config(alpha: f64, beta: f64, cutoff: f64) -> SolverConfig {
        let p = if alpha < 1.0 { 0.5 * (alpha + 1.0) } else { 0.5 * (alpha + 2.0) };
        SolverConfig::new(KernelSpec::wave1d(), noise(alpha, beta, cutoff, 0.0, 1.0, 1.0), 1.0, p)
            .unwrap()
            .with_grid(8, 8)
            .unwrap()
    }

    fn jump(t: f64, x: f64, z: f64) -> Jump {
        Jump { t, x: [x, 0.0], z }
    }

    #[test]
    fn config_checks() {
        let n = noise(0.5, 0.0, 1e-3, 0.0, 1.0, 1.0);
        assert!(SolverConfig::new(KernelSpec::wave1d(), n, 1.0, 0.4).is_err());
        assert!(SolverConfig::new(KernelSpec::wave1d(), n, 1.0, 1.0).is_err());
        assert!(SolverConfig::new(KernelSpec::wave1d(), n, 1e-4, 0.75).is_err());
        assert!(SolverConfig::new(KernelSpec::wave2d(), n, 1.0, 0.75).is_err());
        let shifted = noise(0.5, 0.0, 1e-3, 0.0, 2.0, 1.0);
        assert!(SolverConfig::new(KernelSpec::heat_dirichlet(), shifted, 1.0, 0.75).is_err());
        let n = noise(1.5, 0.0, 1e-3, 0.0, 1.0, 1.0);
        assert!(SolverConfig::new(KernelSpec::heat_free(1).unwrap(), n, 1.0, 1.8).is_ok());
        assert!(SolverConfig::new(KernelSpec::heat_free(1).unwrap(), n, 1.0, 2.5).is_err());
        let frac = KernelSpec::fractional(0.25, 1).unwrap();
        let n = noise(1.7, 0.0, 1e-3, 0.0, 1.0, 1.0);
        assert!(matches!(SolverConfig::new(frac, n, 1.0, 1.8), Err(Error::InfiniteIntegrability { .. })));
    }

    #[test]
    fn sigma_checks() {
        assert!(LipschitzSigma::new("sin", 1.0, f64::sin).is_ok());
        assert!(LipschitzSigma::new("2u", 1.0, |u| 2.0 * u).is_err());
        assert_eq!(LipschitzSigma::affine(-2.0, 3.0).growth(), 3.0);
    }

    #[test]
    fn linear_single_jump() {
        let n = noise(0.5, 0.0, 1e-3, 0.0, 1.0, 1.0);
        let js = JumpSet::from_jumps(1, 1e-3, vec![jump(0.3, 0.5, 2.0)]);
        let k = KernelSpec::heat_dirichlet();
        assert_eq!(linear_value(&k, &js, &n, 0.3, 0.5).unwrap(), 0.0);
        let v = linear_value(&k, &js, &n, 0.7, 0.2).unwrap();
        assert_eq!(v, k.eval1(0.7 - 0.3, 0.2, 0.5) * 2.0);
        let empty = JumpSet::empty(1, 1e-3);
        assert_eq!(linear_value(&k, &empty, &n, 0.7, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn zero_and_constant_sigma() {
        let cfg = wave_config(0.5, 0.3, 1e-2);
        let js = simulate_jumps(&cfg.noise, &mut stream(4, 0)).unwrap();
        let z = picard_solve(&cfg, &LipschitzSigma::constant(0.0), &js).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
        assert_eq!(z.diagnostics.iterations, 1);
        let one = picard_solve(&cfg, &LipschitzSigma::constant(1.0), &js).unwrap();
        assert!(one.diagnostics.iterations <= 2);
        let truncated = js.truncate(1.0).unwrap();
        let lin = solve_linear(&cfg.kernel, &truncated, &cfg).unwrap();
        assert_eq!(one.values, lin.values);
    }

    #[test]
    fn identity_sigma_converges_from_linear_start() {
        let cfg = wave_config(0.5, 0.0, 1e-3);
        let js = simulate_jumps(&cfg.noise, &mut stream(9, 0)).unwrap();
        let a = picard_solve_with(&cfg, &LipschitzSigma::identity(), &js, Driver::Truncated(1.0), Start::Linear).unwrap();
        assert!(a.diagnostics.converged);
        assert!(a.diagnostics.residual < 1e-8);
        let b = picard_solve(&cfg, &LipschitzSigma::affine(1.0, 0.0), &js).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-7);
    }

    #[test]
    fn affine_sigma_fixed_point_by_recomputation() {
        let cfg = SolverConfig::new(KernelSpec::heat_dirichlet(), noise(0.5, 0.5, 1e-2, 0.0, 1.0, 1.0), 1.0, 0.75)
            .unwrap()
            .with_grid(6, 6)
            .unwrap();
        let js = simulate_jumps(&cfg.noise, &mut stream(10, 0)).unwrap();
        let sigma = LipschitzSigma::affine(0.8, 1.0);
        let u = picard_solve(&cfg, &sigma, &js).unwrap();
        assert!(u.diagnostics.converged);
        // Direct check of the fixed-point equation at a jump point.
        let (tj, xj, uj) = *u.jump_values.last().unwrap();
        let direct: f64 = u
            .jump_values
            .iter()
            .zip(js.truncate(1.0).unwrap().iter())
            .filter(|(jv, _)| jv.0 < tj)
            .map(|(jv, jp)| cfg.kernel.eval1(tj - jv.0, xj, jv.1) * sigma.eval(jv.2) * jp.z)
            .sum();
        assert!((direct - uj).abs() < 1e-12 * (1.0 + uj.abs()));
    }

    #[test]
    fn drifted_equation() {
        let cfg = wave_config(1.5, 0.7, 0.05);
        let empty = JumpSet::empty(1, 0.05);
        let u = picard_solve_drifted(&cfg, &LipschitzSigma::constant(1.0), &empty).unwrap();
        let oracle = drift_only_field(&cfg, Driver::Drifted(1.0)).unwrap();
        for (a, b) in u.values.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let sym = wave_config(1.5, 0.0, 0.05);
        let js = simulate_jumps(&sym.noise, &mut stream(1, 1)).unwrap();
        let s = LipschitzSigma::affine(0.5, 1.0);
        assert_eq!(picard_solve_drifted(&sym, &s, &js).unwrap().values, picard_solve(&sym, &s, &js).unwrap().values);
        let r = drift_constant(&cfg.noise, 2.0).unwrap() / drift_constant(&cfg.noise, 1.0).unwrap();
        assert!((r - 2f64.powf(-0.5)).abs() < 1e-14);
        assert!(picard_solve_drifted(&wave_config(0.5, 0.0, 0.05), &s, &empty).is_err());
    }

    #[test]
    fn drifted_matches_full_noise_when_no_large_jumps() {
        let cfg = wave_config(1.5, -0.6, 0.05);
        let sigma = LipschitzSigma::affine(0.5, 1.0);
        let mut checked = 0;
        for r in 0..20 {
            let js = simulate_jumps(&cfg.noise, &mut stream(21, r)).unwrap();
            if first_large_jump_time(&js, &cfg.noise.domain, 2.0) <= 1.0 {
                continue;
            }
            let cfg2 = cfg.clone().with_truncation(2.0).unwrap();
            let full = picard_solve_with(&cfg2, &sigma, &js, Driver::Full, Start::Zero).unwrap();
            let drifted = picard_solve_drifted(&cfg2, &sigma, &js).unwrap();
            assert!(full.max_abs_diff(&drifted) < 1e-9);
            checked += 1;
        }
        assert!(checked > 5);
    }

    #[test]
    fn glue_picks_smallest_level() {
        let cfg = wave_config(0.5, 0.0, 1e-2);
        let sigma = LipschitzSigma::affine(0.5, 1.0);
        let js = JumpSet::from_jumps(1, 1e-2, vec![jump(0.2, 0.5, 3.0), jump(0.4, 0.3, 0.5)]);
        match glue(&cfg, &sigma, &js, &[1.0, 4.0, 8.0]).unwrap() {
            GlueOutcome::Resolved { k, field } => {
                assert_eq!(k, 4.0);
                assert_eq!(field.diagnostics.k_used, Some(4.0));
            }
            GlueOutcome::Unresolved => panic!("should resolve"),
        }
        assert_eq!(glue(&cfg, &sigma, &js, &[1.0, 2.0]).unwrap(), GlueOutcome::Unresolved);
        assert!(glue(&cfg, &sigma, &js, &[]).is_err());
        assert!(glue(&cfg, &sigma, &js, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn batch_diagnostics_decay() {
        let cfg = wave_config(0.5, 0.0, 1e-2);
        let reps: Vec<JumpSet> = (0..50).map(|r| simulate_jumps(&cfg.noise, &mut stream(33, r)).unwrap()).collect();
        let b = picard_batch(&cfg, &LipschitzSigma::identity(), &reps, Driver::Truncated(1.0), Start::Linear).unwrap();
        assert!(b.all_converged);
        assert!(b.increments.last().copied().unwrap() < 1e-8);
        assert!(b.moments.iter().all(|m| m.is_finite()));
    }

    #[test]
    fn solution_dumps() {
        let cfg = wave_config(0.5, 0.0, 1e-2);
        let js = simulate_jumps(&cfg.noise, &mut stream(2, 2)).unwrap();
        let u = picard_solve(&cfg, &LipschitzSigma::affine(0.5, 1.0), &js).unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf, Some("seed=2")).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2 + 9 * 8);
        let d: Diagnostics = serde_json::from_str(&u.diagnostics_json()).unwrap();
        assert_eq!(d, u.diagnostics);
    }
}
