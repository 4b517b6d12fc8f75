//! Poisson random measure realizations and the α-stable noise built on them.
//!
//! A [`JumpSet`] holds the atoms `(t, x, z)` of the measure inside the window
//! `(0, T] × O` with `|z| > ε`. Noise values of boxes are jump sums; for α > 1
//! the jumps are compensated by the exact band integral of `z ν(dz)`.
//!
//! Boxes are half-open, `(t0, t1] × (lo, hi]`, so that disjoint boxes tile
//! without double counting.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stable::LevyMeasure;

/// Axis-aligned box in one or two space dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub dim: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Rect {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Self { dim: 1, lo: [lo, 0.0], hi: [hi, 0.0] }
    }

    pub fn square(lo: [f64; 2], hi: [f64; 2]) -> Self {
        Self { dim: 2, lo, hi }
    }

    pub fn new(lo: &[f64], hi: &[f64]) -> Result<Self> {
        match (lo, hi) {
            ([a], [b]) => Ok(Self::interval(*a, *b)),
            ([a0, a1], [b0, b1]) => Ok(Self::square([*a0, *a1], [*b0, *b1])),
            _ => Err(Error::invalid("domain", "only dimensions 1 and 2 with matching corners are supported")),
        }
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|i| (self.hi[i] - self.lo[i]).max(0.0)).product()
    }

    pub fn contains(&self, x: &[f64; 2]) -> bool {
        (0..self.dim).all(|i| self.lo[i] < x[i] && x[i] <= self.hi[i])
    }

    pub fn includes(&self, other: &Rect) -> bool {
        self.dim == other.dim && (0..self.dim).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }

    pub fn intersect(&self, other: &Rect) -> Rect {
        let mut r = *self;
        for i in 0..self.dim {
            r.lo[i] = self.lo[i].max(other.lo[i]);
            r.hi[i] = self.hi[i].min(other.hi[i]).max(r.lo[i]);
        }
        r
    }

    fn validate(&self) -> Result<()> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(Error::invalid("domain", format!("dimension {} is not 1 or 2", self.dim)));
        }
        for i in 0..self.dim {
            if !(self.lo[i].is_finite() && self.hi[i].is_finite() && self.hi[i] > self.lo[i]) {
                return Err(Error::invalid("domain", format!("side {i} must satisfy lo < hi (finite)")));
            }
        }
        Ok(())
    }
}

/// Space-time box `(t0, t1] × region`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeBox {
    pub t0: f64,
    pub t1: f64,
    pub region: Rect,
}

impl SpaceTimeBox {
    pub fn new(t0: f64, t1: f64, region: Rect) -> Self {
        Self { t0, t1, region }
    }

    pub fn volume(&self) -> f64 {
        (self.t1 - self.t0).max(0.0) * self.region.volume()
    }

    pub fn contains(&self, j: &Jump) -> bool {
        self.t0 < j.t && j.t <= self.t1 && self.region.contains(&j.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    /// One marked Poisson process of rate |O| ε^{-α}.
    #[default]
    Homogeneous,
    /// Independent clocks per spatial cell and per jump-size band.
    Partitioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub measure: LevyMeasure,
    pub horizon: f64,
    pub domain: Rect,
    pub cutoff: f64,
    /// Largest admissible expected jump count.
    pub guard: f64,
    pub generator: Generator,
    /// Reserved: Gaussian replacement of the jumps below the cutoff.
    pub small_jump_gaussian: bool,
}

pub const DEFAULT_CUTOFF: f64 = 1e-3;
pub const DEFAULT_GUARD: f64 = 1e8;

impl NoiseConfig {
    pub fn new(measure: LevyMeasure, horizon: f64, domain: Rect, cutoff: f64) -> Result<Self> {
        let cfg = Self {
            measure,
            horizon,
            domain,
            cutoff,
            guard: DEFAULT_GUARD,
            generator: Generator::Homogeneous,
            small_jump_gaussian: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_guard(mut self, guard: f64) -> Result<Self> {
        self.guard = guard;
        self.validate()?;
        Ok(self)
    }

    pub fn with_generator(mut self, generator: Generator) -> Self {
        self.generator = generator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        LevyMeasure::new(self.measure.alpha, self.measure.p, self.measure.q)?;
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(Error::invalid("cutoff", format!("{} must be positive", self.cutoff)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("horizon", format!("{} must be finite and >= 0", self.horizon)));
        }
        self.domain.validate()?;
        if self.small_jump_gaussian {
            return Err(Error::Unsupported("Gaussian small-jump correction is not implemented".into()));
        }
        let expected = self.expected_jumps();
        if !(expected <= self.guard) {
            return Err(Error::TooManyJumps { expected, guard: self.guard });
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.measure.alpha
    }

    pub fn window_volume(&self) -> f64 {
        self.horizon * self.domain.volume()
    }

    pub fn window(&self) -> SpaceTimeBox {
        SpaceTimeBox::new(0.0, self.horizon, self.domain)
    }

    /// T·|O|·ε^{-α}.
    pub fn expected_jumps(&self) -> f64 {
        self.window_volume() * self.cutoff.powf(-self.measure.alpha)
    }

    /// Compensator per unit space-time volume for the untruncated noise.
    pub fn full_compensator(&self) -> Result<f64> {
        if self.measure.alpha < 1.0 {
            return Ok(0.0);
        }
        Ok(compensator_band(&self.measure, self.cutoff, f64::INFINITY)?.value)
    }

    /// Compensator per unit space-time volume for the noise truncated at K.
    pub fn truncated_compensator(&self, k: f64) -> Result<f64> {
        if self.measure.alpha < 1.0 {
            return Ok(0.0);
        }
        Ok(compensator_band(&self.measure, self.cutoff, k)?.value)
    }

    fn check_box(&self, b: &SpaceTimeBox) -> Result<()> {
        if b.t0 < 0.0 || b.t1 > self.horizon || b.t1 < b.t0 || !self.domain.includes(&b.region) {
            return Err(Error::OutsideWindow(format!("{b:?}")));
        }
        Ok(())
    }

    fn check_level(&self, k: f64) -> Result<()> {
        if !(k > self.cutoff) {
            return Err(Error::invalid("K", format!("truncation level {k} must exceed the cutoff {}", self.cutoff)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub t: f64,
    pub x: [f64; 2],
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpSet {
    pub dim: usize,
    pub cutoff: f64,
    pub seed: Option<u64>,
    pub jumps: Vec<Jump>,
}

impl JumpSet {
    pub fn empty(dim: usize, cutoff: f64) -> Self {
        Self { dim, cutoff, seed: None, jumps: Vec::new() }
    }

    pub fn from_jumps(dim: usize, cutoff: f64, mut jumps: Vec<Jump>) -> Self {
        jumps.sort_by(|a, b| a.t.total_cmp(&b.t));
        separate_ties(&mut jumps);
        Self { dim, cutoff, seed: None, jumps }
    }

    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Jump> {
        self.jumps.iter()
    }

    /// Keeps exactly the jumps with |z| ≤ K.
    pub fn truncate(&self, k: f64) -> Result<JumpSet> {
        if !(k > self.cutoff) {
            return Err(Error::invalid("K", format!("truncation level {k} must exceed the cutoff {}", self.cutoff)));
        }
        Ok(JumpSet {
            dim: self.dim,
            cutoff: self.cutoff,
            seed: self.seed,
            jumps: self.jumps.iter().copied().filter(|j| j.z.abs() <= k).collect(),
        })
    }

    /// Sum of the jump sizes inside `b`.
    pub fn raw_sum(&self, b: &SpaceTimeBox) -> f64 {
        self.in_time(b.t0, b.t1)
            .iter()
            .filter(|j| b.region.contains(&j.x))
            .map(|j| j.z)
            .sum()
    }

    /// Jumps with t0 < t ≤ t1.
    pub fn in_time(&self, t0: f64, t1: f64) -> &[Jump] {
        let a = self.jumps.partition_point(|j| j.t <= t0);
        let b = self.jumps.partition_point(|j| j.t <= t1);
        &self.jumps[a..b.max(a)]
    }

    /// Writes `t,x1[,x2],z` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        let header = if self.dim == 2 { "t,x1,x2,z" } else { "t,x1,z" };
        writeln!(w, "{header}")?;
        let mut line = String::new();
        for j in &self.jumps {
            line.clear();
            write!(line, "{:.16e},{:.16e}", j.t, j.x[0]).unwrap();
            if self.dim == 2 {
                write!(line, ",{:.16e}", j.x[1]).unwrap();
            }
            write!(line, ",{:.16e}", j.z).unwrap();
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Parses the output of [`JumpSet::write_csv`]. Lines starting with `#`
    /// are skipped, except that a `seed=<n>` token in them is recorded.
    pub fn read_csv<R: BufRead>(r: R, cutoff: f64) -> Result<JumpSet> {
        let mut dim = None;
        let mut seed = None;
        let mut jumps = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                for tok in c.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("seed=") {
                        seed = v.parse().ok();
                    }
                }
                continue;
            }
            let Some(d) = dim else {
                dim = Some(match line.trim() {
                    "t,x1,z" => 1,
                    "t,x1,x2,z" => 2,
                    other => {
                        return Err(Error::Parse { line: lineno, message: format!("unexpected header `{other}`") })
                    }
                });
                continue;
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 2 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {} fields, found {}", d + 2, fields.len()),
                });
            }
            let mut vals = [0.0; 4];
            for (k, f) in fields.iter().enumerate() {
                vals[k] = f.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno,
                    message: format!("field {}: {e}", k + 1),
                })?;
            }
            let jump = if d == 2 {
                Jump { t: vals[0], x: [vals[1], vals[2]], z: vals[3] }
            } else {
                Jump { t: vals[0], x: [vals[1], 0.0], z: vals[2] }
            };
            if !(jump.z.abs() > cutoff) {
                return Err(Error::Parse { line: lineno, message: format!("|z| = {} is not above the cutoff", jump.z.abs()) });
            }
            if let Some(prev) = jumps.last() {
                let prev: &Jump = prev;
                if !(jump.t > prev.t) {
                    return Err(Error::Parse { line: lineno, message: "timestamps must increase strictly".into() });
                }
            }
            jumps.push(jump);
        }
        let dim = dim.ok_or(Error::Parse { line: 0, message: "missing header".into() })?;
        Ok(JumpSet { dim, cutoff, seed, jumps })
    }
}

fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

/// Makes timestamps strictly increasing by nudging later duplicates upward.
fn separate_ties(jumps: &mut [Jump]) {
    for i in 1..jumps.len() {
        if jumps[i].t <= jumps[i - 1].t {
            jumps[i].t = next_up(jumps[i - 1].t);
        }
    }
}

#[inline]
fn point_in<R: Rng + ?Sized>(rect: &Rect, rng: &mut R) -> [f64; 2] {
    let mut x = [0.0; 2];
    for i in 0..rect.dim {
        x[i] = rect.hi[i] - (rect.hi[i] - rect.lo[i]) * rng.random::<f64>();
    }
    x
}

pub fn simulate_jumps<R: Rng + ?Sized>(config: &NoiseConfig, rng: &mut R) -> Result<JumpSet> {
    let mut set = JumpSet::empty(config.domain.dim, config.cutoff);
    simulate_into(config, rng, &mut set)?;
    Ok(set)
}

/// Like [`simulate_jumps`] but reuses the allocation of `set`.
pub fn simulate_into<R: Rng + ?Sized>(config: &NoiseConfig, rng: &mut R, set: &mut JumpSet) -> Result<()> {
    config.validate()?;
    set.dim = config.domain.dim;
    set.cutoff = config.cutoff;
    set.jumps.clear();
    if config.horizon == 0.0 {
        return Ok(());
    }
    match config.generator {
        Generator::Homogeneous => homogeneous(config, rng, &mut set.jumps),
        Generator::Partitioned => partitioned(config, rng, &mut set.jumps),
    }
    separate_ties(&mut set.jumps);
    Ok(())
}

fn homogeneous<R: Rng + ?Sized>(config: &NoiseConfig, rng: &mut R, out: &mut Vec<Jump>) {
    let m = &config.measure;
    let rate = config.domain.volume() * config.cutoff.powf(-m.alpha);
    let mean_gap = 1.0 / rate;
    let inv_alpha = 1.0 / m.alpha;
    let mut t = 0.0;
    loop {
        let e: f64 = Exp1.sample(rng);
        t += e * mean_gap;
        if t > config.horizon {
            break;
        }
        let x = point_in(&config.domain, rng);
        // ε·U^{-1/α} with U uniform is ε·exp(E/α) with E standard exponential.
        let e: f64 = Exp1.sample(rng);
        let modulus = config.cutoff * (e * inv_alpha).exp();
        let z = if rng.random::<f64>() < m.p { modulus } else { -modulus };
        out.push(Jump { t, x, z });
    }
}

/// Independent exponential clocks for every pair (spatial cell, size band):
/// the domain is cut into 4 slabs along its first axis and the sizes into
/// dyadic bands from the cutoff up to 1 plus the band (1, ∞).
fn partitioned<R: Rng + ?Sized>(config: &NoiseConfig, rng: &mut R, out: &mut Vec<Jump>) {
    let m = &config.measure;
    let a = m.alpha;
    let mut edges = vec![f64::INFINITY, 1.0];
    let mut e = 1.0;
    while e * 0.5 > config.cutoff {
        e *= 0.5;
        edges.push(e);
    }
    if *edges.last().unwrap() > config.cutoff {
        edges.push(config.cutoff);
    }
    let slabs = 4;
    let width = (config.domain.hi[0] - config.domain.lo[0]) / slabs as f64;
    for k in 0..slabs {
        let mut cell = config.domain;
        cell.lo[0] = config.domain.lo[0] + k as f64 * width;
        cell.hi[0] = if k + 1 == slabs { config.domain.hi[0] } else { cell.lo[0] + width };
        for band in edges.windows(2) {
            let (upper, lower) = (band[0], band[1]);
            let mass_lo = lower.powf(-a);
            let mass_hi = if upper.is_finite() { upper.powf(-a) } else { 0.0 };
            let rate = cell.volume() * (mass_lo - mass_hi);
            let mut t = 0.0;
            loop {
                let e: f64 = Exp1.sample(rng);
                t += e / rate;
                if t > config.horizon {
                    break;
                }
                let x = point_in(&cell, rng);
                let tail = mass_lo - (mass_lo - mass_hi) * rng.random::<f64>();
                let modulus = tail.powf(-1.0 / a).clamp(lower, upper);
                let z = if rng.random::<f64>() < m.p { modulus } else { -modulus };
                out.push(Jump { t, x, z });
            }
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
}

/// `∫_{a<|z|≤b} z ν(dz)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensatorBand {
    pub lower: f64,
    pub upper: f64,
    pub value: f64,
}

pub fn compensator_band(m: &LevyMeasure, a: f64, b: f64) -> Result<CompensatorBand> {
    let alpha = m.alpha;
    if !(a >= 0.0 && b > a) {
        return Err(Error::invalid("band", format!("need 0 <= a < b, got ({a}, {b}]")));
    }
    let divergent = Error::DivergentBand { alpha, lower: a, upper: b };
    if (b.is_infinite() && alpha < 1.0) || (a == 0.0 && alpha > 1.0) {
        return Err(divergent);
    }
    let e = 1.0 - alpha;
    let pow = |v: f64| if v.is_infinite() { 0.0 } else { v.powf(e) };
    let value = if m.beta() == 0.0 { 0.0 } else { m.beta() * alpha / (alpha - 1.0) * (pow(a) - pow(b)) };
    Ok(CompensatorBand { lower: a, upper: b, value })
}

/// b_K = ∫_{|z|>K} z ν(dz), the drift removed by truncating at K (α > 1).
pub fn truncation_drift(m: &LevyMeasure, k: f64) -> Result<f64> {
    Ok(compensator_band(m, k, f64::INFINITY)?.value)
}

/// Z(B): jump sum, compensated over (ε, ∞) when α > 1.
pub fn noise_of_box(jumps: &JumpSet, b: &SpaceTimeBox, config: &NoiseConfig) -> Result<f64> {
    config.check_box(b)?;
    let comp = config.full_compensator()?;
    Ok(jumps.raw_sum(b) - b.volume() * comp)
}

/// Z_K(B): jumps with |z| ≤ K, compensated over (ε, K] when α > 1.
pub fn truncated_noise_of_box(jumps: &JumpSet, b: &SpaceTimeBox, k: f64, config: &NoiseConfig) -> Result<f64> {
    config.check_box(b)?;
    config.check_level(k)?;
    let comp = config.truncated_compensator(k)?;
    let sum: f64 = jumps
        .in_time(b.t0, b.t1)
        .iter()
        .filter(|j| j.z.abs() <= k && b.region.contains(&j.x))
        .map(|j| j.z)
        .sum();
    Ok(sum - b.volume() * comp)
}

/// τ_K(B): time of the first jump in B with |z| > K, or +∞.
pub fn first_large_jump_time(jumps: &JumpSet, region: &Rect, k: f64) -> f64 {
    jumps
        .iter()
        .find(|j| j.z.abs() > k && region.contains(&j.x))
        .map_or(f64::INFINITY, |j| j.t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stable::LevyMeasure;
    use proptest::prelude::*;

    fn cfg(alpha: f64, beta: f64, cutoff: f64) -> NoiseConfig {
        NoiseConfig::new(LevyMeasure::from_beta(alpha, beta).unwrap(), 1.0, Rect::interval(0.0, 1.0), cutoff).unwrap()
    }

    fn jump(t: f64, x: f64, z: f64) -> Jump {
        Jump { t, x: [x, 0.0], z }
    }

    #[test]
    fn band_values() {
        let m = LevyMeasure::from_beta(1.5, 1.0).unwrap();
        assert!((compensator_band(&m, 1.0, f64::INFINITY).unwrap().value - 3.0).abs() < 1e-14);
        assert!((compensator_band(&m, 2.0, f64::INFINITY).unwrap().value - 2.121320).abs() < 1e-6);
        let sym = LevyMeasure::from_beta(1.5, 0.0).unwrap();
        assert_eq!(compensator_band(&sym, 0.1, 7.0).unwrap().value, 0.0);
        let m05 = LevyMeasure::from_beta(0.5, 1.0).unwrap();
        assert!(matches!(compensator_band(&m05, 1.0, f64::INFINITY), Err(Error::DivergentBand { .. })));
        assert!(compensator_band(&m05, 0.0, 1.0).is_ok());
        assert!(compensator_band(&m, 0.0, 1.0).is_err());
        assert!(compensator_band(&m, 2.0, 1.0).is_err());
    }

    #[test]
    fn band_matches_quadrature() {
        let m = LevyMeasure::new(1.5, 0.8, 0.2).unwrap();
        let q = crate::quad::semi_infinite(2.0, 1e-12, |z| z * (m.density(z) - m.density(-z))).value;
        assert!((compensator_band(&m, 2.0, f64::INFINITY).unwrap().value - q).abs() < 1e-9);
        let m = LevyMeasure::new(0.5, 0.8, 0.2).unwrap();
        let q = crate::quad::tanh_sinh(0.0, 3.0, 1e-12, |z| z * (m.density(z) - m.density(-z))).value;
        assert!((compensator_band(&m, 0.0, 3.0).unwrap().value - q).abs() < 1e-9);
    }

    #[test]
    fn drift_halves_by_power_when_level_doubles() {
        let m = LevyMeasure::from_beta(1.5, 0.7).unwrap();
        let r = truncation_drift(&m, 4.0).unwrap() / truncation_drift(&m, 2.0).unwrap();
        assert!((r - 2f64.powf(-0.5)).abs() < 1e-14);
    }

    #[test]
    fn pure_compensator_boxes() {
        let c = cfg(1.5, 1.0, 0.01);
        let empty = JumpSet::empty(1, 0.01);
        let b = c.window();
        assert!((noise_of_box(&empty, &b, &c).unwrap() + 30.0).abs() < 1e-12);
        let zk = truncated_noise_of_box(&empty, &b, 2.0, &c).unwrap();
        assert!((zk + 3.0 * (10.0 - 2f64.powf(-0.5))).abs() < 1e-12);
        assert!((zk + 27.8787).abs() < 1e-4);
        let sym = cfg(1.5, 0.0, 0.01);
        assert_eq!(truncated_noise_of_box(&empty, &b, 2.0, &sym).unwrap(), 0.0);
    }

    #[test]
    fn plain_sums_below_one() {
        let c = cfg(0.5, 0.0, 0.01);
        let b = c.window();
        assert_eq!(noise_of_box(&JumpSet::empty(1, 0.01), &b, &c).unwrap(), 0.0);
        let one = JumpSet::from_jumps(1, 0.01, vec![jump(0.3, 0.5, 2.0)]);
        assert_eq!(noise_of_box(&one, &b, &c).unwrap(), 2.0);
        let outside = SpaceTimeBox::new(0.0, 1.5, c.domain);
        assert!(matches!(noise_of_box(&one, &outside, &c), Err(Error::OutsideWindow(_))));
    }

    #[test]
    fn truncation_is_inclusive() {
        let set = JumpSet::from_jumps(1, 0.1, vec![jump(0.1, 0.5, 0.5), jump(0.2, 0.5, -3.0), jump(0.3, 0.5, 7.0)]);
        let kept = set.truncate(3.0).unwrap();
        let zs: Vec<f64> = kept.iter().map(|j| j.z).collect();
        assert_eq!(zs, vec![0.5, -3.0]);
        assert_eq!(set.truncate(10.0).unwrap(), set);
        assert!(set.truncate(0.2).unwrap().is_empty());
        assert!(set.truncate(0.1).is_err());
    }

    #[test]
    fn stopping_time() {
        let r = Rect::interval(0.0, 1.0);
        assert_eq!(first_large_jump_time(&JumpSet::empty(1, 0.1), &r, 1.0), f64::INFINITY);
        let set = JumpSet::from_jumps(1, 0.1, vec![jump(0.5, 0.4, 2.0)]);
        assert_eq!(first_large_jump_time(&set, &r, 1.0), 0.5);
        assert_eq!(first_large_jump_time(&set, &Rect::interval(0.5, 1.0), 1.0), f64::INFINITY);
    }

    #[test]
    fn empty_window_and_guard() {
        let mut c = cfg(0.5, 0.0, 0.01);
        c.horizon = 0.0;
        assert!(simulate_jumps(&c, &mut stream(1, 0)).unwrap().is_empty());
        let m = LevyMeasure::from_beta(1.5, 0.0).unwrap();
        let big = NoiseConfig::new(m, 1.0, Rect::interval(0.0, 1.0), 1e-6);
        assert!(matches!(big, Err(Error::TooManyJumps { .. })));
        assert!(cfg(1.5, 0.0, 1e-3).with_guard(1e3).is_err());
        let mut c = cfg(0.5, 0.0, 0.01);
        c.small_jump_gaussian = true;
        assert!(matches!(c.validate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let c = cfg(1.5, 0.3, 0.05);
        let mut set = simulate_jumps(&c, &mut stream(4, 2)).unwrap();
        set.seed = Some(4);
        let mut buf = Vec::new();
        set.write_csv(&mut buf, Some("levy-spde test seed=4")).unwrap();
        let back = JumpSet::read_csv(buf.as_slice(), 0.05).unwrap();
        assert_eq!(back, set);
        let bad = "t,x1,z\n0.5,0.1\n";
        assert!(matches!(JumpSet::read_csv(bad.as_bytes(), 0.05), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn generated_sets_are_ordered_and_inside() {
        for gen in [Generator::Homogeneous, Generator::Partitioned] {
            let c = NoiseConfig::new(
                LevyMeasure::from_beta(0.8, 0.2).unwrap(),
                2.0,
                Rect::square([0.0, -1.0], [1.0, 1.0]),
                0.01,
            )
            .unwrap()
            .with_generator(gen);
            let set = simulate_jumps(&c, &mut stream(9, 0)).unwrap();
            assert!(!set.is_empty());
            assert!(set.jumps.windows(2).all(|w| w[0].t < w[1].t));
            assert!(set.iter().all(|j| j.z.abs() > 0.01 && c.window().contains(j)));
        }
    }

    proptest! {
        #[test]
        fn additivity_over_split_boxes(seed in 0u64..1000, split in 0.01f64..0.99, tsplit in 0.01f64..0.99) {
            let c = cfg(1.3, 0.4, 0.05);
            let set = simulate_jumps(&c, &mut stream(seed, 0)).unwrap();
            let whole = noise_of_box(&set, &c.window(), &c).unwrap();
            let parts: f64 = [(0.0, tsplit), (tsplit, 1.0)]
                .iter()
                .flat_map(|&(t0, t1)| [Rect::interval(0.0, split), Rect::interval(split, 1.0)].map(move |r| SpaceTimeBox::new(t0, t1, r)))
                .map(|b| noise_of_box(&set, &b, &c).unwrap())
                .sum();
            prop_assert!((whole - parts).abs() <= 1e-9 * (1.0 + whole.abs()));
        }

        #[test]
        fn stopping_time_monotone_in_level(seed in 0u64..1000) {
            let c = cfg(0.6, 0.0, 0.05);
            let set = simulate_jumps(&c, &mut stream(seed, 1)).unwrap();
            let levels = [0.1, 0.5, 1.0, 2.0, 8.0, 64.0];
            let taus: Vec<f64> = levels.iter().map(|&k| first_large_jump_time(&set, &c.domain, k)).collect();
            prop_assert!(taus.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
