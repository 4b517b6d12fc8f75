//! Numerical integration routines.
//!
//! Fixed-order Gauss–Legendre for smooth integrands, adaptive Gauss–Kronrod
//! for moderately oscillatory ones, and double-exponential (tanh-sinh) rules
//! for integrable endpoint singularities.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Result of an adaptive rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn points(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.points(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule over the consecutive intervals of `breaks`.
    pub fn integrate_pieces<F: FnMut(f64) -> f64>(&self, breaks: &[f64], mut f: F) -> f64 {
        breaks
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| self.integrate(w[0], w[1], &mut f))
            .sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared 32-point rule.
pub fn gl32() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(32))
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = GK_WEIGHTS[7] * fc;
    let mut gauss = G7_WEIGHTS[3] * fc;
    for j in 0..7 {
        let dx = half * GK_NODES[j];
        let s = f(mid - dx) + f(mid + dx);
        kronrod += GK_WEIGHTS[j] * s;
        if j % 2 == 1 {
            gauss += G7_WEIGHTS[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) on a finite interval.
pub fn adaptive<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    mut f: F,
) -> Estimate {
    if a == b {
        return Estimate { value: 0.0, error: 0.0 };
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut value = v;
    let mut error = e;
    let max_pieces = 4000;
    while error > abs_tol.max(rel_tol * value.abs()) && pieces.len() < max_pieces {
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, pv, pe) = pieces.swap_remove(idx);
        let m = 0.5 * (lo + hi);
        if m <= lo || m >= hi {
            pieces.push((lo, hi, pv, 0.0));
            error -= pe;
            continue;
        }
        let (v1, e1) = gk15(&mut f, lo, m);
        let (v2, e2) = gk15(&mut f, m, hi);
        value += v1 + v2 - pv;
        error += e1 + e2 - pe;
        pieces.push((lo, m, v1, e1));
        pieces.push((m, hi, v2, e2));
    }
    // Re-sum to shed accumulated cancellation from the running updates.
    let value = pieces.iter().map(|p| p.2).sum();
    let error = pieces.iter().map(|p| p.3).sum();
    Estimate { value, error }
}

/// Tanh-sinh rule on (0, 1). The integrand receives `(s, 1 - s)` with both
/// coordinates computed without cancellation, so singular endpoints can be
/// resolved to the limits of floating point.
fn tanh_sinh_unit<F: FnMut(f64, f64) -> f64>(rel_tol: f64, mut f: F) -> Estimate {
    const T_MAX: f64 = 6.5;
    const MAX_LEVEL: u32 = 12;
    let half_pi = 0.5 * PI;

    // Contribution of the symmetric node pair at abscissa t > 0, or the
    // centre at t = 0.
    let mut pair = |t: f64| -> f64 {
        let u = half_pi * t.sinh();
        let cu = u.cosh();
        let w = 0.5 * half_pi * t.cosh() / (cu * cu);
        if t == 0.0 {
            return w * f(0.5, 0.5);
        }
        // distance of the node to the nearer endpoint
        let d = 1.0 / (1.0 + (2.0 * u).exp());
        if d <= 0.0 || !w.is_finite() || w == 0.0 {
            return 0.0;
        }
        // Nodes packed against an integrable singularity can overflow; their
        // true contribution is below the rule's resolution.
        let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
        let left = finite(f(d, 1.0 - d));
        let right = finite(f(1.0 - d, d));
        w * (left + right)
    };

    let mut h = 1.0;
    let mut sum = pair(0.0);
    let mut k = 1;
    while k as f64 * h <= T_MAX {
        sum += pair(k as f64 * h);
        k += 1;
    }
    let mut value = h * sum;
    let mut error = f64::INFINITY;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= T_MAX {
            sum += pair(k as f64 * h);
            k += 2;
        }
        let next = h * sum;
        error = (next - value).abs();
        value = next;
        if level >= 3 && error <= rel_tol * value.abs().max(1e-300) {
            break;
        }
    }
    Estimate { value, error }
}

/// Tanh-sinh integration over a finite interval; tolerates integrable
/// singularities at either endpoint.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(a: f64, b: f64, rel_tol: f64, mut f: F) -> Estimate {
    if a == b {
        return Estimate { value: 0.0, error: 0.0 };
    }
    let len = b - a;
    let est = tanh_sinh_unit(rel_tol, |s, r| {
        let x = if s <= 0.5 { a + len * s } else { b - len * r };
        if x <= a.min(b) || x >= a.max(b) {
            return 0.0;
        }
        f(x)
    });
    Estimate { value: est.value * len, error: est.error * len.abs() }
}

/// Integral over (a, ∞) via the map x = a + s/(1-s).
pub fn semi_infinite<F: FnMut(f64) -> f64>(a: f64, rel_tol: f64, mut f: F) -> Estimate {
    tanh_sinh_unit(rel_tol, |s, r| {
        let x = a + s / r;
        if !x.is_finite() {
            return 0.0;
        }
        let jac = 1.0 / (r * r);
        let v = f(x) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    })
}

/// ∫₀^∞ g(x)·sin(x) dx for slowly decaying, non-oscillatory `g` that may be
/// integrably singular at 0.
///
/// The range is split at the zeros of sin; full periods are integrated by
/// pairing adjacent half-periods, and the remaining alternating tail is
/// summed by repeated averaging of partial sums.
pub fn sine_integral<F: FnMut(f64) -> f64>(mut g: F, periods: usize) -> Estimate {
    let rule = gl32();
    let first = tanh_sinh(0.0, PI, 1e-13, |x| g(x) * x.sin());
    let half_periods = 2 * periods;
    let mut partial = Vec::with_capacity(half_periods);
    let mut acc = first.value;
    partial.push(acc);
    for k in 1..half_periods {
        let a = k as f64 * PI;
        let lobe = rule.integrate(a, a + PI, |x| g(x) * x.sin());
        acc += lobe;
        partial.push(acc);
    }
    // Repeated averaging of the final partial sums of the alternating series.
    let depth = 24.min(partial.len());
    let mut row: Vec<f64> = partial[partial.len() - depth..].to_vec();
    let mut prev_estimate = f64::NAN;
    let mut estimate = row[row.len() - 1];
    while row.len() > 1 {
        row = row.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        prev_estimate = estimate;
        estimate = row[row.len() - 1];
    }
    let error = (estimate - prev_estimate).abs().max(first.error);
    Estimate { value: estimate, error }
}
