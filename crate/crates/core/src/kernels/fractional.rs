//! Densities of the one-sided γ-stable subordinator and the subordinated
//! heat kernel of the fractional Laplacian.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad;

/// Density at `s` of the positive stable law with Laplace transform
/// `exp(-u^γ)`, 0 < γ < 1.
pub fn subordinator_density(gamma_: f64, s: f64) -> f64 {
    if !(s > 0.0) {
        return 0.0;
    }
    if gamma_ == 0.5 {
        return 0.5 / PI.sqrt() * s.powf(-1.5) * (-0.25 / s).exp();
    }
    let x = s.powf(-gamma_);
    if x <= 0.5 {
        large_argument_series(gamma_, s, x)
    } else {
        kanter_density(gamma_, s)
    }
}

/// `π⁻¹ Σ_k (-1)^{k+1} Γ(kγ+1)/k! sin(kπγ) s^{-kγ-1}`, convergent for every
/// s > 0 and fast once `s^{-γ}` is small.
fn large_argument_series(g: f64, s: f64, x: f64) -> f64 {
    let mut total = 0.0;
    let mut power = 1.0;
    let mut factorial = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        power *= x;
        factorial *= kf;
        let magnitude = gamma(kf * g + 1.0) / factorial * power;
        let term = magnitude * (kf * PI * g).sin();
        total += if k % 2 == 1 { term } else { -term };
        if magnitude < 1e-17 * total.abs() {
            break;
        }
    }
    total / (PI * s)
}

/// Kanter's integral representation of the positive stable density.
fn kanter_density(g: f64, s: f64) -> f64 {
    let r = 1.0 / (1.0 - g);
    let shape = |phi: f64| ((g * phi).sin().powf(g) * ((1.0 - g) * phi).sin().powf(1.0 - g) / phi.sin()).powf(r);
    let scale = s.powf(-g * r);
    let inner = quad::adaptive(0.0, PI, 0.0, 1e-11, |phi| {
        let a = shape(phi);
        let v = a * (-a * scale).exp();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    });
    g * r / PI * s.powf(-r) * inner.value
}

/// Quadrature rule for `∫₀^∞ f(s) g_{1,γ}(s) ds`: trapezoidal in `ln s`,
/// with the subordinator density folded into the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordinatorRule {
    pub gamma: f64,
    nodes: Vec<(f64, f64)>,
}

impl SubordinatorRule {
    pub fn new(gamma_: f64) -> Result<Self> {
        if !(gamma_ > 0.0 && gamma_ < 1.0) {
            return Err(Error::invalid("gamma", format!("{gamma_} is outside (0, 1)")));
        }
        let h = 0.1;
        let (v_lo, v_hi) = (-60.0, 80.0);
        let n = ((v_hi - v_lo) / h) as usize;
        let nodes = (0..=n)
            .filter_map(|i| {
                let s = (v_lo + i as f64 * h).exp();
                let w = h * s * subordinator_density(gamma_, s);
                (w > 1e-300).then_some((s, w))
            })
            .collect();
        Ok(Self { gamma: gamma_, nodes })
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().map(|&(s, w)| w * f(s)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Heat kernel of Δ (not ½Δ) in dimension `d` at squared distance `r2`.
pub fn laplacian_heat(t: f64, r2: f64, d: usize) -> f64 {
    (4.0 * PI * t).powf(-(d as f64) / 2.0) * (-r2 / (4.0 * t)).exp()
}

/// `∫₀^∞ 𝒢(t^{1/γ} s, x) g_{1,γ}(s) ds` by quadrature against the
/// subordinator density, for |x|² = `r2`.
pub fn subordinated_eval(rule: &SubordinatorRule, t: f64, r2: f64, d: usize) -> f64 {
    let c = t.powf(1.0 / rule.gamma);
    rule.integrate(|s| laplacian_heat(c * s, r2, d))
}

/// The same kernel in d = 1 from its Fourier representation,
/// `π⁻¹ ∫₀^∞ cos(ξx) exp(-t ξ^{2γ}) dξ`.
pub fn fourier_eval(gamma_: f64, t: f64, x: f64) -> f64 {
    let cut = (40.0 / t).powf(1.0 / (2.0 * gamma_));
    let mut total = 0.0;
    // Split so that each adaptive call sees a bounded number of oscillations.
    let pieces = ((cut * x.abs() / (2.0 * PI)).ceil() as usize).clamp(1, 4000);
    let width = cut / pieces as f64;
    for k in 0..pieces {
        let a = k as f64 * width;
        total += quad::adaptive(a, a + width, 1e-14, 1e-12, |xi| {
            (xi * x).cos() * (-t * xi.powf(2.0 * gamma_)).exp()
        })
        .value;
    }
    total / PI
}

/// Poisson kernel: the closed form of the γ = 1/2 kernel.
pub fn cauchy_kernel(t: f64, r2: f64, d: usize) -> f64 {
    let k = (d as f64 + 1.0) / 2.0;
    gamma(k) / PI.powf(k) * t / (t * t + r2).powf(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kanter_matches_closed_form_at_one_half() {
        for &s in &[0.05, 0.3, 1.0, 4.0, 40.0] {
            let closed = subordinator_density(0.5, s);
            let kanter = kanter_density(0.5, s);
            assert!((closed - kanter).abs() < 1e-10 * (1.0 + closed), "s {s}: {closed} vs {kanter}");
        }
    }

    #[test]
    fn density_branches_agree() {
        for &g in &[0.3, 0.75] {
            let s = 0.5f64.powf(-1.0 / g) * 1.3;
            let a = kanter_density(g, s);
            let b = large_argument_series(g, s, s.powf(-g));
            assert!((a / b - 1.0).abs() < 1e-9, "gamma {g}: {a} vs {b}");
        }
    }

    #[test]
    fn rule_reproduces_laplace_transform() {
        for &g in &[0.3, 0.5, 0.75] {
            let rule = SubordinatorRule::new(g).unwrap();
            for &u in &[0.5, 1.0, 3.0] {
                let lt = rule.integrate(|s| (-u * s).exp());
                assert!((lt - (-u.powf(g)).exp()).abs() < 1e-8, "gamma {g}, u {u}: {lt}");
            }
        }
        assert!(SubordinatorRule::new(1.0).is_err());
    }

    #[test]
    fn three_routes_agree_at_one_half() {
        let rule = SubordinatorRule::new(0.5).unwrap();
        let mut worst: f64 = 0.0;
        for &t in &[0.5, 1.0, 2.0] {
            for i in 0..21 {
                let x = -5.0 + 0.5 * i as f64;
                let sub = subordinated_eval(&rule, t, x * x, 1);
                let four = fourier_eval(0.5, t, x);
                let closed = cauchy_kernel(t, x * x, 1);
                worst = worst.max((sub - four).abs()).max((sub - closed).abs());
            }
        }
        assert!(worst < 1e-5, "sup error {worst}");
    }

    #[test]
    fn subordinated_kernel_against_fourier_for_other_gamma() {
        let rule = SubordinatorRule::new(0.75).unwrap();
        for &x in &[0.0, 0.3, 1.0, 2.5] {
            let sub = subordinated_eval(&rule, 1.0, x * x, 1);
            let four = fourier_eval(0.75, 1.0, x);
            assert!((sub - four).abs() < 1e-6, "x {x}: {sub} vs {four}");
        }
    }
}
