//! Green kernels G(t, x, y) and the functionals
//! `I_α(t) = ∫₀^t ∫_O G(s, x, y)^α dy ds` and `J_p(t) = sup_x ∫_O G(t, x, y)^p dy`.
//!
//! Free-space kernels are translation invariant, `G(t, x, y) = Ḡ(t, x - y)`.
//! The Dirichlet heat kernel lives on the interval (0, 1).

pub mod fractional;

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::quad;
use fractional::SubordinatorRule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    /// Heat kernel of ½Δ on ℝ^d.
    HeatFree,
    /// Heat kernel of ½Δ on (0, 1) with zero boundary values.
    HeatDirichletInterval,
    /// Kernel of ∂_t + (-Δ)^γ on ℝ^d.
    FractionalHeat { gamma: f64 },
    /// Kernel of ∂_t - ∂²_x + 1 on ℝ.
    Cable,
    Wave1d,
    Wave2d,
}

/// A finite value or the flag for a divergent integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Integral {
    Finite(f64),
    Infinite,
}

impl Integral {
    pub fn value(&self) -> f64 {
        match self {
            Integral::Finite(v) => *v,
            Integral::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Integral::Finite(_))
    }
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    kind: KernelKind,
    dim: usize,
    rule: Option<Arc<SubordinatorRule>>,
}

impl PartialEq for KernelSpec {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.dim == other.dim
    }
}

/// Images beyond this magnitude are dropped from the Dirichlet series.
const IMAGE_CUTOFF: f64 = 1e-14;
const MAX_IMAGES: i32 = 10_000;

impl KernelSpec {
    pub fn new(kind: KernelKind, dim: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::invalid("dimension", format!("{dim} is not 1 or 2")));
        }
        let mut rule = None;
        match kind {
            KernelKind::HeatDirichletInterval | KernelKind::Cable | KernelKind::Wave1d if dim != 1 => {
                return Err(Error::invalid("dimension", format!("{kind:?} is defined only for d = 1")));
            }
            KernelKind::Wave2d if dim != 2 => {
                return Err(Error::invalid("dimension", "Wave2d requires d = 2"));
            }
            KernelKind::FractionalHeat { gamma } => {
                if !(gamma > 0.0 && gamma <= 1.0) {
                    return Err(Error::invalid("gamma", format!("{gamma} is outside (0, 1]")));
                }
                if gamma < 1.0 {
                    rule = Some(Arc::new(SubordinatorRule::new(gamma)?));
                }
            }
            _ => {}
        }
        Ok(Self { kind, dim, rule })
    }

    pub fn heat_free(dim: usize) -> Result<Self> {
        Self::new(KernelKind::HeatFree, dim)
    }

    pub fn heat_dirichlet() -> Self {
        Self::new(KernelKind::HeatDirichletInterval, 1).expect("valid")
    }

    pub fn fractional(gamma: f64, dim: usize) -> Result<Self> {
        Self::new(KernelKind::FractionalHeat { gamma }, dim)
    }

    pub fn cable() -> Self {
        Self::new(KernelKind::Cable, 1).expect("valid")
    }

    pub fn wave1d() -> Self {
        Self::new(KernelKind::Wave1d, 1).expect("valid")
    }

    pub fn wave2d() -> Self {
        Self::new(KernelKind::Wave2d, 2).expect("valid")
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> String {
        match self.kind {
            KernelKind::HeatFree => format!("heat_free(d={})", self.dim),
            KernelKind::HeatDirichletInterval => "heat_dirichlet_interval".into(),
            KernelKind::FractionalHeat { gamma } => format!("fractional_heat(gamma={gamma},d={})", self.dim),
            KernelKind::Cable => "cable".into(),
            KernelKind::Wave1d => "wave1d".into(),
            KernelKind::Wave2d => "wave2d".into(),
        }
    }

    /// The interval the kernel is confined to, if any.
    pub fn bounded_domain(&self) -> Option<(f64, f64)> {
        match self.kind {
            KernelKind::HeatDirichletInterval => Some((0.0, 1.0)),
            _ => None,
        }
    }

    pub fn eval(&self, t: f64, x: &[f64; 2], y: &[f64; 2]) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::invalid("t", format!("kernel time {t} must be positive")));
        }
        if let Some((lo, hi)) = self.bounded_domain() {
            if !((lo..=hi).contains(&x[0]) && (lo..=hi).contains(&y[0])) {
                return Err(Error::invalid("x", "points must lie in the closed interval [0, 1]"));
            }
            return Ok(dirichlet_point(t, x[0], y[0]));
        }
        let r2: f64 = (0..self.dim).map(|i| (x[i] - y[i]).powi(2)).sum();
        Ok(self.free(t, r2))
    }

    /// Fast path for d = 1 callers that guarantee t > 0 and in-domain points.
    pub(crate) fn eval1(&self, t: f64, x: f64, y: f64) -> f64 {
        match self.kind {
            KernelKind::HeatDirichletInterval => dirichlet_point(t, x, y),
            _ => self.free(t, (x - y) * (x - y)),
        }
    }

    /// Ḡ(t, ·) at squared distance `r2` for the translation-invariant kernels.
    fn free(&self, t: f64, r2: f64) -> f64 {
        let d = self.dim as f64;
        match self.kind {
            KernelKind::HeatFree | KernelKind::HeatDirichletInterval => {
                (2.0 * PI * t).powf(-d / 2.0) * (-r2 / (2.0 * t)).exp()
            }
            KernelKind::Cable => (4.0 * PI * t).powf(-0.5) * (-r2 / (4.0 * t) - t).exp(),
            KernelKind::Wave1d => {
                if r2 < t * t {
                    0.5
                } else {
                    0.0
                }
            }
            KernelKind::Wave2d => {
                let gap = t * t - r2;
                if gap > 0.0 {
                    1.0 / (2.0 * PI * gap.sqrt())
                } else if gap == 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            KernelKind::FractionalHeat { gamma } => match &self.rule {
                None => fractional::laplacian_heat(t, r2, self.dim),
                Some(_) if gamma == 0.5 => fractional::cauchy_kernel(t, r2, self.dim),
                Some(rule) => fractional::subordinated_eval(rule, t, r2, self.dim),
            },
        }
    }

    /// `∫_a^b G(t, x, y) dy` in d = 1.
    pub fn cell_mass(&self, t: f64, x: f64, a: f64, b: f64) -> f64 {
        if !(t > 0.0) || b <= a {
            return 0.0;
        }
        match self.kind {
            KernelKind::HeatFree => gauss_mass(a - x, b - x, t),
            KernelKind::HeatDirichletInterval => dirichlet_mass(t, x, a, b),
            KernelKind::Cable => (-t).exp() * gauss_mass(a - x, b - x, 2.0 * t),
            KernelKind::Wave1d => 0.5 * wave_overlap(t, x, a, b),
            KernelKind::FractionalHeat { gamma } => match &self.rule {
                None => gauss_mass(a - x, b - x, 2.0 * t),
                Some(_) if gamma == 0.5 => (((b - x) / t).atan() - ((a - x) / t).atan()) / PI,
                Some(rule) => {
                    let c = 2.0 * t.powf(1.0 / gamma);
                    rule.integrate(|s| gauss_mass(a - x, b - x, c * s))
                }
            },
            KernelKind::Wave2d => f64::NAN,
        }
    }

    /// `∫_{t0}^{t1} ∫_a^b G(τ, x, y) dy dτ` in d = 1.
    pub fn cell_mass_time_integral(&self, t0: f64, t1: f64, x: f64, a: f64, b: f64) -> f64 {
        let t0 = t0.max(0.0);
        if t1 <= t0 || b <= a {
            return 0.0;
        }
        match self.kind {
            KernelKind::HeatFree => gauss_mass_time(a - x, b - x, t1) - gauss_mass_time(a - x, b - x, t0),
            KernelKind::HeatDirichletInterval => dirichlet_mass_time(t1, x, a, b) - dirichlet_mass_time(t0, x, a, b),
            KernelKind::Wave1d => wave_overlap_time(t0, t1, x, a, b),
            KernelKind::FractionalHeat { gamma } if gamma == 1.0 => {
                0.5 * (gauss_mass_time(a - x, b - x, 2.0 * t1) - gauss_mass_time(a - x, b - x, 2.0 * t0))
            }
            KernelKind::FractionalHeat { gamma } if gamma == 0.5 => {
                (atan_time(b - x, t1) - atan_time(a - x, t1) - atan_time(b - x, t0) + atan_time(a - x, t0)) / PI
            }
            _ => {
                quad::adaptive(t0.sqrt(), t1.sqrt(), 1e-13, 1e-11, |u| 2.0 * u * self.cell_mass(u * u, x, a, b)).value
            }
        }
    }

    /// Whether `I_α(t)` is finite.
    pub fn i_alpha_finite(&self, alpha: f64) -> bool {
        let d = self.dim as f64;
        match self.kind {
            KernelKind::HeatFree | KernelKind::HeatDirichletInterval => alpha < 1.0 + 2.0 / d,
            KernelKind::FractionalHeat { gamma } => {
                alpha < 1.0 + 2.0 * gamma / d && (gamma == 1.0 || alpha * (d + 2.0 * gamma) > d)
            }
            KernelKind::Cable | KernelKind::Wave1d | KernelKind::Wave2d => true,
        }
    }

    /// Whether `J_p(t)` is finite for t > 0.
    pub fn j_p_finite(&self, p: f64) -> bool {
        let d = self.dim as f64;
        match self.kind {
            KernelKind::Wave2d => p < 2.0,
            KernelKind::FractionalHeat { gamma } => gamma == 1.0 || p * (d + 2.0 * gamma) > d,
            _ => true,
        }
    }

    /// Whether `∫₀^T J_p(t) dt` is finite.
    pub fn j_p_time_integrable(&self, p: f64) -> bool {
        let d = self.dim as f64;
        self.j_p_finite(p)
            && match self.kind {
                KernelKind::HeatFree | KernelKind::HeatDirichletInterval => p < 1.0 + 2.0 / d,
                KernelKind::Cable => p < 3.0,
                KernelKind::FractionalHeat { gamma } => p < 1.0 + 2.0 * gamma / d,
                KernelKind::Wave1d | KernelKind::Wave2d => true,
            }
    }

    fn check_t_alpha(t: f64, alpha: f64) -> Result<()> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid("t", format!("{t} must be positive")));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::invalid("alpha", format!("{alpha} is outside (0, 2)")));
        }
        Ok(())
    }

    fn default_point(&self) -> f64 {
        self.bounded_domain().map_or(0.0, |(a, b)| 0.5 * (a + b))
    }

    /// `I_α(t)`; for the interval kernel evaluated at the interval centre.
    pub fn i_alpha(&self, t: f64, alpha: f64) -> Result<Integral> {
        self.i_alpha_at(t, alpha, self.default_point())
    }

    /// `I_α(t)` with the spatial integral taken from the point `x`, which only
    /// matters on a bounded domain. Closed forms where available, otherwise
    /// quadrature.
    pub fn i_alpha_at(&self, t: f64, alpha: f64, x: f64) -> Result<Integral> {
        Self::check_t_alpha(t, alpha)?;
        if !self.i_alpha_finite(alpha) {
            return Ok(Integral::Infinite);
        }
        let v = match self.kind {
            KernelKind::Wave1d => 2f64.powf(-alpha) * t * t,
            KernelKind::Wave2d => (2.0 * PI).powf(1.0 - alpha) / ((2.0 - alpha) * (3.0 - alpha)) * t.powf(3.0 - alpha),
            KernelKind::Cable => {
                quad::tanh_sinh(0.0, t, 1e-12, |s| {
                    alpha.powf(-0.5) * (4.0 * PI * s).powf(0.5 * (1.0 - alpha)) * (-alpha * s).exp()
                })
                .value
            }
            KernelKind::FractionalHeat { gamma } => {
                // ∫ Ḡ(s, ·)^α = s^{-d(α-1)/(2γ)} ∫ Ḡ(1, ·)^α by self-similarity.
                let kappa = 1.0 - self.dim as f64 * (alpha - 1.0) / (2.0 * gamma);
                self.space_power_integral(1.0, 0.0, alpha) * t.powf(kappa) / kappa
            }
            KernelKind::HeatFree | KernelKind::HeatDirichletInterval => return self.i_alpha_quadrature(t, alpha, x),
        };
        Ok(Integral::Finite(v))
    }

    /// `I_α(t)` by nested quadrature of the kernel itself.
    pub fn i_alpha_quadrature(&self, t: f64, alpha: f64, x: f64) -> Result<Integral> {
        Self::check_t_alpha(t, alpha)?;
        if !self.i_alpha_finite(alpha) {
            return Ok(Integral::Infinite);
        }
        let v = quad::tanh_sinh(0.0, t, 1e-11, |s| self.space_power_integral(s, x, alpha)).value;
        Ok(Integral::Finite(v))
    }

    /// `J_p(t)`: closed forms for the free kernels where known, quadrature
    /// otherwise; the interval kernel is maximized over a 64-point grid.
    pub fn j_p(&self, t: f64, p: f64) -> Result<Integral> {
        if !(t > 0.0) {
            return Err(Error::invalid("t", format!("{t} must be positive")));
        }
        if !(p > 0.0 && p <= 2.0) {
            return Err(Error::invalid("p", format!("{p} is outside (0, 2]")));
        }
        if !self.j_p_finite(p) {
            return Ok(Integral::Infinite);
        }
        let d = self.dim as f64;
        let v = match self.kind {
            KernelKind::HeatFree => p.powf(-d / 2.0) * (2.0 * PI * t).powf(d * (1.0 - p) / 2.0),
            KernelKind::Cable => (4.0 * PI * t).powf(0.5 * (1.0 - p)) * p.powf(-0.5) * (-p * t).exp(),
            KernelKind::Wave1d => 2.0 * t * 0.5f64.powf(p),
            KernelKind::Wave2d => (2.0 * PI).powf(1.0 - p) * t.powf(2.0 - p) / (2.0 - p),
            KernelKind::FractionalHeat { .. } => self.space_power_integral(t, 0.0, p),
            KernelKind::HeatDirichletInterval => (0..64)
                .map(|i| self.space_power_integral(t, (i as f64 + 0.5) / 64.0, p))
                .fold(0.0, f64::max),
        };
        Ok(Integral::Finite(v))
    }

    /// `∫_O G(t, x, y)^p dy` by quadrature (x only matters on a bounded domain).
    pub fn space_power_integral(&self, t: f64, x: f64, p: f64) -> f64 {
        let d = self.dim;
        match self.kind {
            KernelKind::HeatDirichletInterval => {
                let w = 6.0 * t.sqrt();
                let mut breaks = vec![0.0, x, 1.0];
                for c in [x - w, x + w] {
                    if c > 0.0 && c < 1.0 {
                        breaks.push(c);
                    }
                }
                breaks.sort_by(f64::total_cmp);
                breaks
                    .windows(2)
                    .map(|w| quad::adaptive(w[0], w[1], 1e-15, 1e-12, |y| dirichlet_point(t, x, y).powf(p)).value)
                    .sum()
            }
            KernelKind::Wave1d => 2.0 * t * 0.5f64.powf(p),
            KernelKind::Wave2d => {
                if p >= 2.0 {
                    return f64::INFINITY;
                }
                let c = (2.0 * PI).powf(1.0 - p) * t.powf(2.0 - p);
                c * quad::tanh_sinh(0.0, 0.5 * PI, 1e-12, |th| th.cos().powf(1.0 - p) * th.sin()).value
            }
            _ => {
                let scale = match self.kind {
                    KernelKind::HeatFree => t.sqrt(),
                    KernelKind::Cable => (2.0 * t).sqrt(),
                    KernelKind::FractionalHeat { gamma } => t.powf(0.5 / gamma),
                    _ => unreachable!(),
                };
                let radial = quad::semi_infinite(0.0, 1e-12, |rho| {
                    let r = scale * rho;
                    let v = self.free(t, r * r).powf(p);
                    if d == 1 {
                        v
                    } else {
                        v * rho
                    }
                })
                .value;
                if d == 1 {
                    2.0 * scale * radial
                } else {
                    2.0 * PI * scale * scale * radial
                }
            }
        }
    }

    /// `∫₀^T ∫_O |G(t+h, x, y) - G(t, x, y)|^p dy dt` for the interval kernel.
    pub fn time_modulus(&self, x: f64, horizon: f64, h: f64, p: f64) -> f64 {
        quad::tanh_sinh(0.0, horizon, 1e-6, |t| {
            let breaks = [0.0, x, 1.0];
            breaks
                .windows(2)
                .map(|w| {
                    quad::adaptive(w[0], w[1], 1e-12, 1e-8, |y| {
                        (self.eval1(t + h, x, y) - self.eval1(t, x, y)).abs().powf(p)
                    })
                    .value
                })
                .sum()
        })
        .value
    }

    /// `∫₀^T ∫_O |G(t, x+h, y) - G(t, x, y)|^p dy dt` for the interval kernel.
    pub fn space_modulus(&self, x: f64, horizon: f64, h: f64, p: f64) -> f64 {
        quad::tanh_sinh(0.0, horizon, 1e-6, |t| {
            let breaks = [0.0, x, x + h, 1.0];
            breaks
                .windows(2)
                .map(|w| {
                    quad::adaptive(w[0], w[1], 1e-12, 1e-8, |y| {
                        (self.eval1(t, x + h, y) - self.eval1(t, x, y)).abs().powf(p)
                    })
                    .value
                })
                .sum()
        })
        .value
    }
}

/// P(N(0, var) > d).
fn upper_tail(d: f64, var: f64) -> f64 {
    0.5 * erfc(d / (SQRT_2 * var.sqrt()))
}

/// P(lo < N(0, var) ≤ hi), accurate in either tail.
fn gauss_mass(lo: f64, hi: f64, var: f64) -> f64 {
    if hi <= lo {
        0.0
    } else if lo >= 0.0 {
        upper_tail(lo, var) - upper_tail(hi, var)
    } else if hi <= 0.0 {
        upper_tail(-hi, var) - upper_tail(-lo, var)
    } else {
        1.0 - upper_tail(hi, var) - upper_tail(-lo, var)
    }
}

/// `∫₀^τ P(N(0, s) > d) ds` for d ≥ 0.
fn tail_time(d: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    if d == 0.0 {
        return 0.5 * tau;
    }
    let z = d / (2.0 * tau).sqrt();
    0.5 * ((tau + d * d) * erfc(z) - d * (2.0 * tau / PI).sqrt() * (-z * z).exp())
}

/// `∫₀^τ P(lo < N(0, s) ≤ hi) ds`.
fn gauss_mass_time(lo: f64, hi: f64, tau: f64) -> f64 {
    if hi <= lo || tau <= 0.0 {
        0.0
    } else if lo >= 0.0 {
        tail_time(lo, tau) - tail_time(hi, tau)
    } else if hi <= 0.0 {
        tail_time(-hi, tau) - tail_time(-lo, tau)
    } else {
        tau - tail_time(hi, tau) - tail_time(-lo, tau)
    }
}

/// `∫₀^τ arctan(c/s) ds`.
fn atan_time(c: f64, tau: f64) -> f64 {
    if c == 0.0 || tau <= 0.0 {
        return 0.0;
    }
    tau * (c / tau).atan() + 0.5 * c * (tau / c).powi(2).ln_1p()
}

fn gaussian(w: f64, t: f64) -> f64 {
    (-w * w / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// Sums `term(n)` over n = 0, ±1, ±2, … until the images fall below `tol`.
fn image_sum<F: FnMut(i32) -> f64>(mut term: F, tol: f64) -> f64 {
    let mut total = term(0);
    for n in 1..MAX_IMAGES {
        let a = term(n);
        let b = term(-n);
        total += a + b;
        if a.abs().max(b.abs()) < tol {
            break;
        }
    }
    total
}

fn dirichlet_point(t: f64, x: f64, y: f64) -> f64 {
    let d = (x - y).abs();
    let s = x + y;
    let g = image_sum(
        |n| {
            let shift = 2.0 * n as f64;
            gaussian(d + shift, t) - gaussian(s + shift, t)
        },
        IMAGE_CUTOFF,
    );
    g.clamp(0.0, gaussian(d, t))
}

fn dirichlet_mass(t: f64, x: f64, a: f64, b: f64) -> f64 {
    let m = image_sum(
        |n| {
            let shift = 2.0 * n as f64;
            gauss_mass(a - x - shift, b - x - shift, t) - gauss_mass(x + a + shift, x + b + shift, t)
        },
        1e-17,
    );
    m.clamp(0.0, gauss_mass(a - x, b - x, t))
}

fn dirichlet_mass_time(tau: f64, x: f64, a: f64, b: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let m = image_sum(
        |n| {
            let shift = 2.0 * n as f64;
            gauss_mass_time(a - x - shift, b - x - shift, tau) - gauss_mass_time(x + a + shift, x + b + shift, tau)
        },
        1e-17,
    );
    m.clamp(0.0, gauss_mass_time(a - x, b - x, tau))
}

/// Length of (a, b) ∩ (x - t, x + t).
fn wave_overlap(t: f64, x: f64, a: f64, b: f64) -> f64 {
    (b.min(x + t) - a.max(x - t)).max(0.0)
}

/// `∫_{t0}^{t1} ½ |(a, b) ∩ (x - τ, x + τ)| dτ`, exact: the overlap is
/// piecewise linear in τ.
fn wave_overlap_time(t0: f64, t1: f64, x: f64, a: f64, b: f64) -> f64 {
    let mut knots = vec![t0, t1];
    for k in [b - x, x - a, a - x, x - b] {
        if k > t0 && k < t1 {
            knots.push(k);
        }
    }
    knots.sort_by(f64::total_cmp);
    let total: f64 = knots
        .windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (wave_overlap(w[0], x, a, b) + wave_overlap(w[1], x, a, b)))
        .sum();
    0.5 * total
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p1(x: f64) -> [f64; 2] {
        [x, 0.0]
    }

    #[test]
    fn construction_rules() {
        assert!(KernelSpec::new(KernelKind::Wave1d, 2).is_err());
        assert!(KernelSpec::new(KernelKind::Wave2d, 1).is_err());
        assert!(KernelSpec::new(KernelKind::HeatDirichletInterval, 2).is_err());
        assert!(KernelSpec::fractional(1.2, 1).is_err());
        assert!(KernelSpec::fractional(0.0, 1).is_err());
        assert!(KernelSpec::heat_free(3).is_err());
        assert!(KernelSpec::fractional(1.0, 2).is_ok());
    }

    #[test]
    fn heat_values_and_normalization() {
        let k = KernelSpec::heat_free(1).unwrap();
        assert!((k.eval(1.0, &p1(0.0), &p1(0.0)).unwrap() - 0.398942).abs() < 1e-6);
        for &t in &[0.01, 0.5, 3.0] {
            let mass = quad::adaptive(-60.0, 60.0, 1e-14, 1e-12, |x| k.eval(t, &p1(x), &p1(0.0)).unwrap()).value;
            assert!((mass - 1.0).abs() < 1e-10, "t {t}: {mass}");
        }
        assert!(k.eval(0.0, &p1(0.0), &p1(0.0)).is_err());
    }

    #[test]
    fn wave_values() {
        let k = KernelSpec::wave1d();
        assert_eq!(k.eval(1.0, &p1(0.3), &p1(-0.5)).unwrap(), 0.5);
        assert_eq!(k.eval(1.0, &p1(0.0), &p1(-1.5)).unwrap(), 0.0);
        assert_eq!(k.eval(1.0, &p1(0.0), &p1(1.0)).unwrap(), 0.0);
        let k2 = KernelSpec::wave2d();
        assert_eq!(k2.eval(1.0, &[0.0, 0.0], &[0.6, 0.8]).unwrap(), f64::INFINITY);
        assert!((k2.eval(2.0, &[0.0, 0.0], &[0.0, 0.0]).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn closed_form_i_alpha() {
        let i = KernelSpec::wave1d().i_alpha(2.0, 0.5).unwrap().value();
        assert!((i - 2.828427).abs() < 1e-6);
        let i = KernelSpec::wave2d().i_alpha(1.0, 0.5).unwrap().value();
        assert!((i - 0.6684342).abs() < 1e-7);
        let q = KernelSpec::wave2d().i_alpha_quadrature(1.0, 0.5, 0.0).unwrap().value();
        assert!((q / i - 1.0).abs() < 1e-6);
    }

    #[test]
    fn heat_i_alpha_against_gaussian_moment() {
        let k = KernelSpec::heat_free(1).unwrap();
        let a: f64 = 0.5;
        let kappa = (1.0 - a) / 2.0 + 1.0;
        let oracle = a.powf(-0.5) * (2.0 * PI).powf((1.0 - a) / 2.0) / kappa;
        assert!((oracle - 1.7912242).abs() < 1e-7);
        let q = k.i_alpha(1.0, a).unwrap().value();
        assert!((q / oracle - 1.0).abs() < 1e-6, "{q} vs {oracle}");
    }

    #[test]
    fn cable_i_alpha_routes_agree() {
        let k = KernelSpec::cable();
        let a = k.i_alpha(1.5, 1.3).unwrap().value();
        let b = k.i_alpha_quadrature(1.5, 1.3, 0.0).unwrap().value();
        assert!((a / b - 1.0).abs() < 1e-7, "{a} vs {b}");
    }

    #[test]
    fn j_p_values() {
        let k = KernelSpec::heat_free(1).unwrap();
        for &t in &[0.1, 1.0, 5.0] {
            assert!((k.j_p(t, 1.0).unwrap().value() - 1.0).abs() < 1e-14);
        }
        assert!((k.j_p(1.0, 2.0).unwrap().value() - 0.282095).abs() < 1e-6);
        for kernel in [k.clone(), KernelSpec::cable(), KernelSpec::wave1d(), KernelSpec::wave2d()] {
            let closed = kernel.j_p(0.7, 1.4).unwrap().value();
            let quad = kernel.space_power_integral(0.7, 0.0, 1.4);
            assert!((closed / quad - 1.0).abs() < 1e-8, "{}: {closed} vs {quad}", kernel.name());
        }
        assert_eq!(KernelSpec::wave2d().j_p(1.0, 2.0).unwrap(), Integral::Infinite);
    }

    #[test]
    fn dirichlet_dominated_by_free_kernel() {
        let free = KernelSpec::heat_free(1).unwrap();
        let dir = KernelSpec::heat_dirichlet();
        for &t in &[0.01, 0.1, 0.5] {
            for &p in &[0.5, 1.0, 1.5, 2.0] {
                let jd = dir.j_p(t, p).unwrap().value();
                let jf = free.j_p(t, p).unwrap().value();
                assert!(jd <= jf * (1.0 + 1e-12), "t {t} p {p}: {jd} > {jf}");
            }
        }
    }

    #[test]
    fn dirichlet_matches_eigenfunction_expansion() {
        let dir = KernelSpec::heat_dirichlet();
        for &t in &[0.05, 0.3, 1.0] {
            for &(x, y) in &[(0.5, 0.5), (0.1, 0.7), (0.95, 0.9)] {
                let eig: f64 = (1..400)
                    .map(|k| {
                        let kp = k as f64 * PI;
                        2.0 * (-0.5 * kp * kp * t).exp() * (kp * x).sin() * (kp * y).sin()
                    })
                    .sum();
                let img = dir.eval(t, &p1(x), &p1(y)).unwrap();
                assert!((eig - img).abs() < 1e-12, "t {t} ({x},{y}): {eig} vs {img}");
            }
        }
    }

    #[test]
    fn chapman_kolmogorov_for_heat() {
        let k = KernelSpec::heat_free(1).unwrap();
        let mut rng = crate::rng::stream(3, 0);
        use rand::Rng;
        for _ in 0..20 {
            let s = rng.random_range(0.1..2.0);
            let t = rng.random_range(0.1..2.0);
            let x: f64 = rng.random_range(-2.0..2.0);
            let y: f64 = rng.random_range(-2.0..2.0);
            let conv = quad::adaptive(-40.0, 40.0, 1e-14, 1e-12, |z| {
                k.eval(s, &p1(x), &p1(z)).unwrap() * k.eval(t, &p1(z), &p1(y)).unwrap()
            })
            .value;
            let direct = k.eval(s + t, &p1(x), &p1(y)).unwrap();
            assert!((conv - direct).abs() < 1e-6);
        }
    }

    #[test]
    fn cell_masses_match_pointwise_quadrature() {
        let kernels = [
            KernelSpec::heat_free(1).unwrap(),
            KernelSpec::heat_dirichlet(),
            KernelSpec::cable(),
            KernelSpec::wave1d(),
            KernelSpec::fractional(0.5, 1).unwrap(),
            KernelSpec::fractional(0.7, 1).unwrap(),
            KernelSpec::fractional(1.0, 1).unwrap(),
        ];
        for k in &kernels {
            for &(t, x, a, b) in &[(0.02, 0.5, 0.4, 0.6), (0.3, 0.2, 0.5, 0.9), (0.7, 0.9, 0.0, 0.1)] {
                let closed = k.cell_mass(t, x, a, b);
                let mut breaks = vec![a, b];
                for c in [x - t, x + t] {
                    if c > a && c < b {
                        breaks.push(c);
                    }
                }
                breaks.sort_by(f64::total_cmp);
                let quad: f64 = breaks
                    .windows(2)
                    .map(|w| quad::adaptive(w[0], w[1], 1e-15, 1e-12, |y| k.eval1(t, x, y)).value)
                    .sum();
                assert!((closed - quad).abs() < 1e-9, "{} {t} {x}: {closed} vs {quad}", k.name());
            }
        }
    }

    #[test]
    fn cell_mass_time_integrals_match_quadrature() {
        let kernels = [
            KernelSpec::heat_free(1).unwrap(),
            KernelSpec::heat_dirichlet(),
            KernelSpec::wave1d(),
            KernelSpec::fractional(0.5, 1).unwrap(),
            KernelSpec::fractional(1.0, 1).unwrap(),
        ];
        for k in &kernels {
            for &(t0, t1, x, a, b) in &[(0.0, 0.1, 0.5, 0.4, 0.6), (0.05, 0.6, 0.2, 0.5, 0.9), (0.0, 1.0, 0.93, 0.9, 1.0)] {
                let closed = k.cell_mass_time_integral(t0, t1, x, a, b);
                let mut breaks = vec![t0, t1];
                for c in [(x - a).abs(), (x - b).abs()] {
                    if c > t0 && c < t1 {
                        breaks.push(c);
                    }
                }
                breaks.sort_by(f64::total_cmp);
                let quad: f64 = breaks
                    .windows(2)
                    .map(|w| quad::tanh_sinh(w[0], w[1], 1e-12, |s| k.cell_mass(s, x, a, b)).value)
                    .sum();
                assert!((closed - quad).abs() < 1e-10, "{}: {closed} vs {quad}", k.name());
            }
        }
    }

    #[test]
    fn finiteness_flags() {
        let heat2 = KernelSpec::heat_free(2).unwrap();
        assert!(heat2.i_alpha(1.0, 1.9).unwrap().is_finite());
        let frac = KernelSpec::fractional(0.75, 1).unwrap();
        // exponent threshold 1 + 2γ/d = 2.5 for the time integral
        assert!(frac.i_alpha_finite(1.7));
        let frac = KernelSpec::fractional(0.25, 1).unwrap();
        assert!(!frac.i_alpha_finite(1.7));
        assert_eq!(frac.i_alpha(1.0, 1.7).unwrap(), Integral::Infinite);
        // spatial tails of the γ = 1/2 kernel need α·2 > 1
        let cauchy = KernelSpec::fractional(0.5, 1).unwrap();
        assert!(!cauchy.i_alpha_finite(0.4));
        assert!(cauchy.i_alpha_finite(0.6));
        assert!(!KernelSpec::wave2d().j_p_time_integrable(2.0));
    }

    #[test]
    fn fractional_i_alpha_scaling_matches_nested_quadrature() {
        let k = KernelSpec::fractional(0.5, 1).unwrap();
        let a = k.i_alpha(0.8, 1.3).unwrap().value();
        let b = k.i_alpha_quadrature(0.8, 1.3, 0.0).unwrap().value();
        assert!((a / b - 1.0).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn fractional_normalization() {
        for k in [KernelSpec::fractional(0.5, 1).unwrap(), KernelSpec::fractional(0.8, 1).unwrap()] {
            let m = k.space_power_integral(1.3, 0.0, 1.0);
            assert!((m - 1.0).abs() < 1e-6, "{}: {m}", k.name());
        }
    }

    #[test]
    fn interval_moduli_shrink() {
        let k = KernelSpec::heat_dirichlet();
        let hs = [0.1, 0.05, 0.025];
        let tm: Vec<f64> = hs.iter().map(|&h| k.time_modulus(0.5, 1.0, h, 1.2)).collect();
        let sm: Vec<f64> = hs.iter().map(|&h| k.space_modulus(0.4, 1.0, h, 1.2)).collect();
        assert!(tm.windows(2).all(|w| w[1] < w[0]), "{tm:?}");
        assert!(sm.windows(2).all(|w| w[1] < w[0]), "{sm:?}");
    }

    proptest! {
        #[test]
        fn dirichlet_symmetric_and_dominated(t in 1e-3f64..2.0, x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
            let dir = KernelSpec::heat_dirichlet();
            let free = KernelSpec::heat_free(1).unwrap();
            let g = dir.eval(t, &p1(x), &p1(y)).unwrap();
            prop_assert_eq!(g, dir.eval(t, &p1(y), &p1(x)).unwrap());
            prop_assert!(g >= 0.0);
            prop_assert!(g <= free.eval(t, &p1(x), &p1(y)).unwrap());
        }

        #[test]
        fn i_alpha_monotone_in_t(t in 0.05f64..2.0, dt in 0.01f64..1.0, alpha in 0.2f64..1.9) {
            for k in [KernelSpec::wave1d(), KernelSpec::wave2d(), KernelSpec::cable()] {
                let a = k.i_alpha(t, alpha).unwrap().value();
                let b = k.i_alpha(t + dt, alpha).unwrap().value();
                prop_assert!(b >= a);
            }
        }
    }
}
