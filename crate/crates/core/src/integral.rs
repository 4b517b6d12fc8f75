//! Stochastic integrals against Z and Z_K as jump sums.
//!
//! `I(X)(t, B) = Σ_{T_i ≤ t, X_i ∈ B} X(T_i-, X_i) z_i - c ∫₀^t ∫_B X(s, y) dy ds`
//! where `c` is the compensator per unit volume (zero when α < 1). The jump at
//! exactly `t` is counted, matching the right-closed intervals of simple
//! integrands.

use std::cell::Cell;
use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::noise::{noise_of_box, truncated_noise_of_box, Jump, JumpSet, NoiseConfig, Rect, SpaceTimeBox};
use crate::quad::{self, gl32};

/// Read access to the jumps strictly before a time horizon. Requests for
/// later jumps are recorded as predictability violations.
pub struct History<'a> {
    jumps: &'a JumpSet,
    horizon: f64,
    violation: &'a Cell<Option<f64>>,
}

impl<'a> History<'a> {
    pub fn new(jumps: &'a JumpSet, horizon: f64, violation: &'a Cell<Option<f64>>) -> Self {
        Self { jumps, horizon, violation }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Jumps with timestamp < horizon.
    pub fn jumps(&self) -> &'a [Jump] {
        let n = self.jumps.jumps.partition_point(|j| j.t < self.horizon);
        &self.jumps.jumps[..n]
    }

    /// Jumps with timestamp < `r`; asking for `r` beyond the horizon is a
    /// violation.
    pub fn jumps_before(&self, r: f64) -> &'a [Jump] {
        if r > self.horizon {
            self.violation.set(Some(self.violation.get().map_or(r, |v: f64| v.max(r))));
        }
        let n = self.jumps.jumps.partition_point(|j| j.t < r);
        &self.jumps.jumps[..n]
    }
}

/// Integrand evaluated at `(s, x)` from the history strictly before `s`;
/// left-continuous in `s`.
pub trait PredictableField: Sync {
    fn value(&self, s: f64, x: &[f64; 2], past: &History<'_>) -> f64;

    /// Times where the field may jump, besides the jump times of the noise.
    fn time_breaks(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Coordinates along `axis` where the field may jump.
    fn space_breaks(&self, _axis: usize) -> Vec<f64> {
        Vec::new()
    }

    /// Whether the value can change at the jump times of the noise.
    fn reads_history(&self) -> bool {
        true
    }
}

/// A deterministic field given by a closure.
pub struct Deterministic<F>(pub F);

impl<F: Fn(f64, &[f64; 2]) -> f64 + Sync> PredictableField for Deterministic<F> {
    fn value(&self, s: f64, x: &[f64; 2], _past: &History<'_>) -> f64 {
        (self.0)(s, x)
    }

    fn reads_history(&self) -> bool {
        false
    }
}

/// Simple integrand `Σ_i 1_{(t_i, t_{i+1}]}(t) Σ_j Y_ij 1_{A_ij}(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleProcess {
    knots: Vec<f64>,
    cells: Vec<Vec<(Rect, f64)>>,
}

impl SimpleProcess {
    pub fn new(knots: Vec<f64>, cells: Vec<Vec<(Rect, f64)>>) -> Result<Self> {
        if knots.len() < 2 || knots[0] != 0.0 {
            return Err(Error::invalid("knots", "need 0 = t_0 < t_1 < ... with at least one interval"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("knots", "knots must increase strictly"));
        }
        if cells.len() != knots.len() - 1 {
            return Err(Error::invalid("cells", format!("{} cell lists for {} intervals", cells.len(), knots.len() - 1)));
        }
        for (i, row) in cells.iter().enumerate() {
            for (a, (ra, _)) in row.iter().enumerate() {
                if ra.volume() <= 0.0 {
                    return Err(Error::invalid("cells", format!("interval {i}: cell {a} is empty")));
                }
                for (rb, _) in &row[a + 1..] {
                    if ra.dim != rb.dim || ra.intersect(rb).volume() > 0.0 {
                        return Err(Error::invalid("cells", format!("interval {i}: cells overlap")));
                    }
                }
            }
        }
        Ok(Self { knots, cells })
    }

    /// Builds the process interval by interval; the values on `(t_i, t_{i+1}]`
    /// are computed from the jumps with timestamp ≤ `t_i` only.
    pub fn adapted<F>(knots: Vec<f64>, jumps: &JumpSet, mut rule: F) -> Result<Self>
    where
        F: FnMut(usize, &[Jump]) -> Vec<(Rect, f64)>,
    {
        let cells = (0..knots.len().saturating_sub(1))
            .map(|i| {
                let n = jumps.jumps.partition_point(|j| j.t <= knots[i]);
                rule(i, &jumps.jumps[..n])
            })
            .collect();
        Self::new(knots, cells)
    }

    /// Constant `c` on `(0, t_end] × region`.
    pub fn constant(c: f64, t_end: f64, region: Rect) -> Result<Self> {
        Self::new(vec![0.0, t_end], vec![vec![(region, c)]])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn cells(&self) -> &[Vec<(Rect, f64)>] {
        &self.cells
    }

    /// Value at (s, x), with intervals right-closed.
    pub fn at(&self, s: f64, x: &[f64; 2]) -> f64 {
        if !(s > self.knots[0]) || s > *self.knots.last().unwrap() {
            return 0.0;
        }
        let i = self.knots.partition_point(|&k| k < s) - 1;
        self.cells[i].iter().find(|(r, _)| r.contains(x)).map_or(0.0, |c| c.1)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            knots: self.knots.clone(),
            cells: self.cells.iter().map(|row| row.iter().map(|&(r, v)| (r, a * v)).collect()).collect(),
        }
    }
}

impl PredictableField for SimpleProcess {
    fn value(&self, s: f64, x: &[f64; 2], _past: &History<'_>) -> f64 {
        self.at(s, x)
    }

    fn time_breaks(&self) -> Vec<f64> {
        self.knots.clone()
    }

    fn space_breaks(&self, axis: usize) -> Vec<f64> {
        self.cells.iter().flatten().flat_map(|(r, _)| [r.lo[axis], r.hi[axis]]).collect()
    }

    fn reads_history(&self) -> bool {
        false
    }
}

fn check_level(truncation: Option<f64>, config: &NoiseConfig) -> Result<()> {
    if let Some(k) = truncation {
        if !(k > config.cutoff) {
            return Err(Error::invalid("K", format!("truncation level {k} must exceed the cutoff {}", config.cutoff)));
        }
    }
    Ok(())
}

fn check_target(t: f64, b: &Rect, config: &NoiseConfig) -> Result<()> {
    if !(0.0..=config.horizon).contains(&t) || !config.domain.includes(b) {
        return Err(Error::OutsideWindow(format!("t = {t}, B = {b:?}")));
    }
    Ok(())
}

/// `Σ_i Σ_j Y_ij Z((t_i ∧ t, t_{i+1} ∧ t] × (A_ij ∩ B))`, or the same against
/// Z_K when `truncation` is given.
pub fn integrate_simple(
    x: &SimpleProcess,
    jumps: &JumpSet,
    t: f64,
    b: &Rect,
    config: &NoiseConfig,
    truncation: Option<f64>,
) -> Result<f64> {
    check_target(t, b, config)?;
    check_level(truncation, config)?;
    let mut total = 0.0;
    for (i, row) in x.cells.iter().enumerate() {
        let t0 = x.knots[i].min(t);
        let t1 = x.knots[i + 1].min(t);
        if t1 <= t0 {
            continue;
        }
        for (cell, y) in row {
            if !config.domain.includes(cell) {
                return Err(Error::OutsideWindow(format!("cell {cell:?}")));
            }
            let region = cell.intersect(b);
            if region.volume() == 0.0 {
                continue;
            }
            let bx = SpaceTimeBox::new(t0, t1, region);
            let z = match truncation {
                None => noise_of_box(jumps, &bx, config)?,
                Some(k) => truncated_noise_of_box(jumps, &bx, k, config)?,
            };
            total += y * z;
        }
    }
    Ok(total)
}

fn sorted_breaks(lo: f64, hi: f64, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = extra.into_iter().filter(|&c| c > lo && c < hi).collect();
    v.push(lo);
    v.push(hi);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// `∫_{t0}^{t1} ∫_B X(s, y) dy ds` by tensor Gauss–Legendre (32 nodes per
/// axis) on the pieces cut by the field's and the noise's break points.
pub fn field_volume_integral(
    x: &dyn PredictableField,
    jumps: &JumpSet,
    t0: f64,
    t1: f64,
    b: &Rect,
    violation: &Cell<Option<f64>>,
) -> f64 {
    let rule = gl32();
    let jump_times: Vec<f64> = if x.reads_history() { jumps.iter().map(|j| j.t).collect() } else { Vec::new() };
    let tb = sorted_breaks(t0, t1, x.time_breaks().into_iter().chain(jump_times));
    let xb = sorted_breaks(b.lo[0], b.hi[0], x.space_breaks(0));
    let yb = if b.dim == 2 { sorted_breaks(b.lo[1], b.hi[1], x.space_breaks(1)) } else { vec![0.0, 1.0] };
    let mut total = 0.0;
    for tw in tb.windows(2) {
        for (s, ws) in rule.points(tw[0], tw[1]) {
            let past = History::new(jumps, s, violation);
            let mut inner = 0.0;
            for xw in xb.windows(2) {
                for (px, wx) in rule.points(xw[0], xw[1]) {
                    if b.dim == 1 {
                        inner += wx * x.value(s, &[px, 0.0], &past);
                    } else {
                        for yw in yb.windows(2) {
                            for (py, wy) in rule.points(yw[0], yw[1]) {
                                inner += wx * wy * x.value(s, &[px, py], &past);
                            }
                        }
                    }
                }
            }
            total += ws * inner;
        }
    }
    total
}

/// Jump-sum integral of a predictable field; see the module docs.
pub fn integrate_field(
    x: &dyn PredictableField,
    jumps: &JumpSet,
    t: f64,
    b: &Rect,
    config: &NoiseConfig,
    truncation: Option<f64>,
) -> Result<f64> {
    check_target(t, b, config)?;
    check_level(truncation, config)?;
    let violation = Cell::new(None);
    let mut total = 0.0;
    for j in jumps.in_time(0.0, t) {
        if !b.contains(&j.x) || truncation.is_some_and(|k| j.z.abs() > k) {
            continue;
        }
        let past = History::new(jumps, j.t, &violation);
        total += x.value(j.t, &j.x, &past) * j.z;
    }
    let comp = match truncation {
        None => config.full_compensator()?,
        Some(k) => config.truncated_compensator(k)?,
    };
    if comp != 0.0 {
        total -= comp * field_volume_integral(x, jumps, 0.0, t, b, &violation);
    }
    if let Some(requested) = violation.get() {
        return Err(Error::Predictability { at: t, requested });
    }
    Ok(total)
}

/// Sampled path `t ↦ I(X)(t, B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralPath {
    pub points: Vec<(f64, f64)>,
}

impl IntegralPath {
    pub fn sup_abs(&self) -> f64 {
        self.points.iter().map(|p| p.1.abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "t,value")?;
        let mut line = String::new();
        for (t, v) in &self.points {
            line.clear();
            write!(line, "{t:.16e},{v:.16e}").unwrap();
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// The path sampled at `grid` and at the jump times in `B`, evaluated at
/// each sample time and just before each jump.
pub fn integral_path(
    x: &dyn PredictableField,
    jumps: &JumpSet,
    b: &Rect,
    config: &NoiseConfig,
    truncation: Option<f64>,
    grid: &[f64],
) -> Result<IntegralPath> {
    let mut times: Vec<f64> = grid.to_vec();
    for j in jumps.iter() {
        if b.contains(&j.x) && j.t <= config.horizon && !truncation.is_some_and(|k| j.z.abs() > k) {
            times.push(j.t);
        }
    }
    times.retain(|t| (0.0..=config.horizon).contains(t));
    times.sort_by(f64::total_cmp);
    times.dedup();
    let points = times
        .into_iter()
        .map(|t| integrate_field(x, jumps, t, b, config, truncation).map(|v| (t, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(IntegralPath { points })
}

/// `(E ∫₀^T ∫_B |X|^p dy ds)^{1/p}`, averaging over the given realizations.
pub fn lp_norm(x: &dyn PredictableField, p: f64, horizon: f64, b: &Rect, replicates: &[JumpSet]) -> Result<f64> {
    if !(p > 0.0 && p <= 2.0) {
        return Err(Error::invalid("p", format!("{p} is outside (0, 2]")));
    }
    if replicates.is_empty() {
        return Err(Error::invalid("replicates", "need at least one realization"));
    }
    let rule = gl32();
    let mut sum = 0.0;
    for jumps in replicates {
        let violation = Cell::new(None);
        let jump_times: Vec<f64> = if x.reads_history() { jumps.iter().map(|j| j.t).collect() } else { Vec::new() };
        let tb = sorted_breaks(0.0, horizon, x.time_breaks().into_iter().chain(jump_times));
        let xb = sorted_breaks(b.lo[0], b.hi[0], x.space_breaks(0));
        let yb = if b.dim == 2 { sorted_breaks(b.lo[1], b.hi[1], x.space_breaks(1)) } else { vec![0.0, 1.0] };
        for tw in tb.windows(2) {
            sum += quad::tanh_sinh(tw[0], tw[1], 1e-10, |s| {
                let past = History::new(jumps, s, &violation);
                let mut inner = 0.0;
                for xw in xb.windows(2) {
                    for (px, wx) in rule.points(xw[0], xw[1]) {
                        if b.dim == 1 {
                            inner += wx * x.value(s, &[px, 0.0], &past).abs().powf(p);
                        } else {
                            for yw in yb.windows(2) {
                                for (py, wy) in rule.points(yw[0], yw[1]) {
                                    inner += wx * wy * x.value(s, &[px, py], &past).abs().powf(p);
                                }
                            }
                        }
                    }
                }
                inner
            })
            .value;
        }
        if let Some(requested) = violation.get() {
            return Err(Error::Predictability { at: horizon, requested });
        }
    }
    Ok((sum / replicates.len() as f64).powf(1.0 / p))
}
