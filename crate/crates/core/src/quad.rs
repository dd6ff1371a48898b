//! Numerical quadrature used throughout the crate.
//!
//! Adaptive Gauss-Kronrod (10/21 point) on finite intervals with a global
//! error heap, plus Gauss-Legendre rules for fixed-order product integration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

// Published 21-point Kronrod nodes and weights, kept at full listed precision.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_977_920_717,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            eps_abs: 1e-14,
            eps_rel: 1e-11,
            max_intervals: 20_000,
        }
    }
}

/// One 21-point Kronrod panel: returns (kronrod value, |kronrod - gauss|).
pub fn gk21<F>(f: &F, a: f64, b: f64) -> (Complex64, f64)
where
    F: Fn(f64) -> Complex64,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = Complex64::new(0.0, 0.0);
    for (j, (&x, &w)) in XGK[..10].iter().zip(&WGK[..10]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * w;
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).norm();
    (value, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration of `f` over the partition given by
/// `breakpoints` (sorted, at least two entries).
///
/// The panel with the largest error estimate is bisected until the summed
/// estimate falls under `max(eps_abs, eps_rel * |I|)` or the interval budget
/// is exhausted.
pub fn integrate_partitioned<F>(f: F, breakpoints: &[f64], cfg: QuadConfig) -> QuadResult
where
    F: Fn(f64) -> Complex64,
{
    let mut heap = BinaryHeap::new();
    let mut total = Complex64::new(0.0, 0.0);
    let mut total_err = 0.0;
    let mut evaluations = 0;
    for w in breakpoints.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (value, error) = gk21(&f, w[0], w[1]);
        evaluations += 21;
        total += value;
        total_err += error;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    let budget = cfg.max_intervals.max(heap.len());
    loop {
        let tol = cfg.eps_abs.max(cfg.eps_rel * total.norm());
        if total_err <= tol {
            return QuadResult {
                value: total,
                error: total_err,
                evaluations,
                converged: true,
            };
        }
        if heap.len() >= budget {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // cannot split further in floating point
            heap.push(worst);
            break;
        }
        let (lv, le) = gk21(&f, worst.a, mid);
        let (rv, re) = gk21(&f, mid, worst.b);
        evaluations += 42;
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
    }
    // re-sum to shed accumulated cancellation in the running totals
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.error).sum::<f64>();
    let tol = cfg.eps_abs.max(cfg.eps_rel * Complex64::norm(value));
    QuadResult {
        value,
        error,
        evaluations,
        converged: error <= tol,
    }
}

/// Adaptive integration over `[a, b]`.
pub fn integrate<F>(f: F, a: f64, b: f64, cfg: QuadConfig) -> QuadResult
where
    F: Fn(f64) -> Complex64,
{
    integrate_partitioned(f, &[a, b], cfg)
}

/// Breakpoints on `[0, t_max]` for an integrand oscillating like `e^{iλt}`:
/// one panel per period, with a handful of panels when `λ` is small.
pub fn oscillatory_breakpoints(t_max: f64, lambda: f64) -> Vec<f64> {
    let base_panels = 8usize;
    let panels = if lambda == 0.0 {
        base_panels
    } else {
        let period = 2.0 * std::f64::consts::PI / lambda.abs();
        ((t_max / period).ceil() as usize).max(base_panels)
    };
    (0..=panels)
        .map(|j| t_max * j as f64 / panels as f64)
        .collect()
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
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

/// Fixed-order Gauss-Legendre integration over `[a, b]`.
pub fn gauss_fixed<F>(f: F, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(&x, &w)| f(c + h * x) * w)
        .sum::<Complex64>()
        * h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(f: impl Fn(f64) -> f64) -> impl Fn(f64) -> Complex64 {
        move |x| Complex64::new(f(x), 0.0)
    }

    #[test]
    fn kronrod_panel_is_exact_for_high_degree_polynomials() {
        for deg in [0, 5, 19, 30, 31] {
            let (v, _) = gk21(&real(|x: f64| x.powi(deg)), 0.0, 1.0);
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((v.re - exact).abs() < 1e-14, "degree {deg}: {} vs {exact}", v.re);
        }
    }

    #[test]
    fn gauss_embedded_rule_is_exact_to_degree_nineteen() {
        // the error estimate vanishes when both rules are exact
        let (_, err) = gk21(&real(|x: f64| x.powi(19) + x.powi(4)), -0.3, 0.9);
        assert!(err < 1e-15);
        let (_, err) = gk21(&real(|x: f64| x.powi(24)), 0.0, 1.0);
        assert!(err > 1e-12);
    }

    #[test]
    fn adaptive_handles_decaying_oscillation() {
        let lambda = 37.0;
        let t_max = 60.0;
        let r = integrate_partitioned(
            |t| Complex64::new(0.0, lambda * t).exp() * (-t).exp(),
            &oscillatory_breakpoints(t_max, lambda),
            QuadConfig::default(),
        );
        let exact = Complex64::new(1.0, 0.0) / Complex64::new(1.0, -lambda);
        assert!(r.converged);
        assert!((r.value - exact).norm() < 1e-13);
    }

    #[test]
    fn adaptive_reports_nonconvergence_on_budget_exhaustion() {
        let cfg = QuadConfig {
            eps_abs: 1e-30,
            eps_rel: 1e-30,
            max_intervals: 4,
        };
        let r = integrate(real(|x: f64| x.abs().sqrt()), -1.0, 1.0, cfg);
        assert!(!r.converged);
    }

    #[test]
    fn gauss_legendre_matches_known_rules() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let rule = gauss_legendre(16);
        let v = gauss_fixed(real(|x: f64| x.powi(31)), 0.0, 2.0, &rule);
        assert!((v.re - 2f64.powi(32) / 32.0).abs() / (2f64.powi(32) / 32.0) < 1e-14);
        let odd = gauss_legendre(7);
        assert!(odd.0[3].abs() < 1e-15);
        assert!((odd.1.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }
}
