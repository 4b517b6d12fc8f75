//! Stable laws S_α(σ, β, μ) and the Lévy measure ν_α.
//!
//! Parameterization: `E exp(iuX) = exp(-|u|^α σ^α (1 - iβ sgn(u) tan(πα/2)) + iuμ)`.
//! The index α = 1 is excluded throughout.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::invalid("alpha", format!("{alpha} is outside (0, 2)")));
    }
    if alpha == 1.0 {
        return Err(Error::invalid("alpha", "alpha = 1 is not supported"));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&beta) {
        return Err(Error::invalid("beta", format!("{beta} is outside [-1, 1]")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub sigma: f64,
    pub beta: f64,
    pub mu: f64,
}

impl StableParams {
    pub fn new(alpha: f64, sigma: f64, beta: f64, mu: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_beta(beta)?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", format!("{sigma} must be finite and >= 0")));
        }
        if !mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        Ok(Self { alpha, sigma, beta, mu })
    }

    /// Law of `c·X` for c > 0.
    pub fn scaled(&self, c: f64) -> Self {
        Self { sigma: c * self.sigma, mu: c * self.mu, ..*self }
    }
}

/// Jump intensity `pα z^{-α-1}` on z > 0 and `qα (-z)^{-α-1}` on z < 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyMeasure {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
}

impl LevyMeasure {
    pub fn new(alpha: f64, p: f64, q: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&q)) {
            return Err(Error::invalid("p", "p and q must lie in [0, 1]"));
        }
        if (p + q - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("p", format!("p + q = {} != 1", p + q)));
        }
        Ok(Self { alpha, p, q })
    }

    pub fn from_beta(alpha: f64, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Self::new(alpha, 0.5 * (1.0 + beta), 0.5 * (1.0 - beta))
    }

    pub fn beta(&self) -> f64 {
        self.p - self.q
    }

    pub fn density(&self, z: f64) -> f64 {
        if z > 0.0 {
            self.p * self.alpha * z.powf(-self.alpha - 1.0)
        } else if z < 0.0 {
            self.q * self.alpha * (-z).powf(-self.alpha - 1.0)
        } else {
            0.0
        }
    }

    /// ν({|z| > t}) = t^{-α}.
    pub fn tail_mass(&self, t: f64) -> Result<f64> {
        levy_tail_mass(self, t)
    }

    /// Law of Z(B) for a set of Lebesgue measure `volume`.
    pub fn box_law(&self, volume: f64) -> Result<StableParams> {
        let sigma = sigma_alpha_pow(self.alpha)?.powf(1.0 / self.alpha) * volume.powf(1.0 / self.alpha);
        StableParams::new(self.alpha, sigma, self.beta(), 0.0)
    }
}

pub fn levy_tail_mass(m: &LevyMeasure, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", format!("tail threshold {t} must be positive")));
    }
    Ok(t.powf(-m.alpha))
}

/// σ^α = ∫₀^∞ sin(x) x^{-α} dx = Γ(2-α)/(1-α)·cos(πα/2).
pub fn sigma_alpha_pow(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(gamma(2.0 - alpha) / (1.0 - alpha) * (0.5 * PI * alpha).cos())
}

/// The same constant by oscillatory quadrature over 100 periods.
pub fn sigma_alpha_pow_quadrature(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(quad::sine_integral(|x| x.powf(-alpha), 100).value)
}

/// μ = βα/(α-1).
pub fn mu_shift(alpha: f64, beta: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(beta * alpha / (alpha - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableConstants {
    pub sigma_alpha_pow: f64,
    pub mu_shift: f64,
    pub tail_const: f64,
}

impl StableConstants {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let s = sigma_alpha_pow(alpha)?;
        Ok(Self { sigma_alpha_pow: s, mu_shift: mu_shift(alpha, beta)?, tail_const: 1.0 / s })
    }
}

pub fn stable_cf(params: &StableParams, u: f64) -> Complex64 {
    if u == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let a = params.alpha;
    let scale = u.abs().powf(a) * params.sigma.powf(a);
    let skew = params.beta * u.signum() * (0.5 * PI * a).tan();
    let exponent = Complex64::new(-scale, scale * skew + u * params.mu);
    exponent.exp()
}

/// Chambers–Mallows–Stuck sampler with precomputed constants.
#[derive(Debug, Clone, Copy)]
pub struct StableSampler {
    params: StableParams,
    shift_b: f64,
    scale_s: f64,
    inv_alpha: f64,
    tail_exp: f64,
}

impl StableSampler {
    pub fn new(params: StableParams) -> Self {
        let a = params.alpha;
        let t = params.beta * (0.5 * PI * a).tan();
        Self {
            params,
            shift_b: t.atan() / a,
            scale_s: (1.0 + t * t).powf(0.5 / a),
            inv_alpha: 1.0 / a,
            tail_exp: (1.0 - a) / a,
        }
    }

    pub fn params(&self) -> &StableParams {
        &self.params
    }

    /// A standard S_α(1, β, 0) draw.
    pub fn standard<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.params.alpha;
        let v = PI * (rng.random::<f64>() - 0.5);
        let w: f64 = Exp1.sample(rng);
        let arg = a * (v + self.shift_b);
        let cv = v.cos();
        self.scale_s * arg.sin() / cv.powf(self.inv_alpha) * ((v - arg).cos() / w).powf(self.tail_exp)
    }
}

impl Distribution<f64> for StableSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.params.sigma * self.standard(rng) + self.params.mu
    }
}

pub fn sample_stable<R: Rng + ?Sized>(params: &StableParams, rng: &mut R) -> f64 {
    StableSampler::new(*params).sample(rng)
}
