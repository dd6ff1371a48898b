use num_complex::Complex64;

use super::{factorial, KernelError};
use crate::quad::{gauss_fixed, gauss_legendre};

/// A tabulated half-line function: piecewise cubic Hermite between nodes,
/// `v_last * e^{-r (s - s_last)}` beyond the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfLineTable {
    s: Vec<f64>,
    v: Vec<Complex64>,
    slope: Vec<Complex64>,
    tail_rate: f64,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl HalfLineTable {
    /// Builds the table from samples at increasing `s >= 0`. A missing node at
    /// `s = 0` is extrapolated linearly from the first two samples.
    pub fn from_samples(s: &[f64], v: &[Complex64]) -> Result<Self, KernelError> {
        if s.len() < 2 || s.len() != v.len() {
            return Err(KernelError::InvalidSpec(
                "each half-line needs at least two samples".into(),
            ));
        }
        let mut s = s.to_vec();
        let mut v = v.to_vec();
        if s[0] > 0.0 {
            let slope = (v[1] - v[0]) / (s[1] - s[0]);
            let v0 = v[0] - slope * s[0];
            s.insert(0, 0.0);
            v.insert(0, v0);
        }
        let tail_rate = fit_tail_rate(&s, &v)?;
        let slope = node_slopes(&s, &v, tail_rate);
        Ok(Self {
            s,
            v,
            slope,
            tail_rate,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.s
    }

    pub fn values(&self) -> &[Complex64] {
        &self.v
    }

    pub fn tail_rate(&self) -> f64 {
        self.tail_rate
    }

    fn last(&self) -> (f64, Complex64) {
        let n = self.s.len() - 1;
        (self.s[n], self.v[n])
    }

    // Cubic coefficients of segment i in the local variable u = s - s_i.
    fn coeffs(&self, i: usize, secant: bool) -> [Complex64; 4] {
        let h = self.s[i + 1] - self.s[i];
        let (v0, v1) = (self.v[i], self.v[i + 1]);
        let d = (v1 - v0) / h;
        let (m0, m1) = if secant {
            (d, d)
        } else {
            (self.slope[i], self.slope[i + 1])
        };
        [
            v0,
            m0,
            (d * 3.0 - m0 * 2.0 - m1) / h,
            (m0 + m1 - d * 2.0) / (h * h),
        ]
    }

    pub fn eval(&self, s: f64) -> Complex64 {
        let (se, ve) = self.last();
        if s >= se {
            return ve * (-self.tail_rate * (s - se)).exp();
        }
        let i = self.s.partition_point(|&x| x <= s).saturating_sub(1);
        let c = self.coeffs(i, false);
        let u = s - self.s[i];
        c[0] + u * (c[1] + u * (c[2] + u * c[3]))
    }

    fn segments(&self) -> impl Iterator<Item = usize> + '_ {
        0..self.s.len() - 1
    }

    // ∫_{s_e}^∞ s^m e^{-r (s - s_e)} ds
    fn tail_moment_factor(&self, m: u32) -> f64 {
        let (se, _) = self.last();
        let r = self.tail_rate;
        (0..=m)
            .map(|j| factorial(m) / factorial(j) * se.powi(j as i32) / r.powi((m - j + 1) as i32))
            .sum()
    }

    fn moment_with(&self, m: u32, secant: bool) -> Complex64 {
        let rule = gauss_legendre(4);
        let body: Complex64 = self
            .segments()
            .map(|i| {
                let c = self.coeffs(i, secant);
                let s0 = self.s[i];
                gauss_fixed(
                    |s| {
                        let u = s - s0;
                        (c[0] + u * (c[1] + u * (c[2] + u * c[3]))) * s.powi(m as i32)
                    },
                    s0,
                    self.s[i + 1],
                    &rule,
                )
            })
            .sum();
        body + self.last().1 * self.tail_moment_factor(m)
    }

    /// `∫_0^∞ s^m h(s) ds` and the gap to the piecewise-linear interpolant as
    /// error estimate.
    pub fn moment(&self, m: u32) -> (Complex64, f64) {
        let cubic = self.moment_with(m, false);
        let linear = self.moment_with(m, true);
        (cubic, (cubic - linear).norm())
    }

    pub fn abs_moment(&self, m: u32) -> f64 {
        let rule = gauss_legendre(8);
        let body: f64 = self
            .segments()
            .map(|i| gauss_fixed(|s| Complex64::new(self.eval(s).norm() * s.powi(m as i32), 0.0), self.s[i], self.s[i + 1], &rule).re)
            .sum();
        body + self.last().1.norm() * self.tail_moment_factor(m)
    }

    /// The table of `s ↦ ∫_s^∞ h`; slopes are exact (`-h`).
    pub fn tail_integral(&self) -> Self {
        let n = self.s.len();
        let (_, ve) = self.last();
        let mut w = vec![ZERO; n];
        w[n - 1] = ve / self.tail_rate;
        for i in (0..n - 1).rev() {
            let h = self.s[i + 1] - self.s[i];
            let seg = (self.v[i] + self.v[i + 1]) * (h / 2.0)
                + (self.slope[i] - self.slope[i + 1]) * (h * h / 12.0);
            w[i] = w[i + 1] + seg;
        }
        Self {
            s: self.s.clone(),
            slope: self.v.iter().map(|&x| -x).collect(),
            v: w,
            tail_rate: self.tail_rate,
        }
    }

    fn transform_with(&self, lambda: f64, secant: bool) -> Complex64 {
        let rule = gauss_legendre(10);
        let i_unit = Complex64::new(0.0, 1.0);
        let body: Complex64 = self
            .segments()
            .map(|i| {
                let c = self.coeffs(i, secant);
                let h = self.s[i + 1] - self.s[i];
                let shift = (i_unit * lambda * self.s[i]).exp();
                shift * cubic_oscillatory(&c, h, lambda, &rule)
            })
            .sum();
        let (se, ve) = self.last();
        body + ve * (i_unit * lambda * se).exp() / Complex64::new(self.tail_rate, -lambda)
    }

    /// `∫_0^∞ e^{iλs} h(s) ds`, exact for the interpolant (Filon-type).
    pub fn transform(&self, lambda: f64) -> (Complex64, f64) {
        let cubic = self.transform_with(lambda, false);
        let linear = self.transform_with(lambda, true);
        (cubic, (cubic - linear).norm())
    }

    fn one_minus_transform_with(&self, lambda: f64, secant: bool) -> Complex64 {
        let rule = gauss_legendre(10);
        let i_unit = Complex64::new(0.0, 1.0);
        let body: Complex64 = self
            .segments()
            .map(|i| {
                let c = self.coeffs(i, secant);
                let s0 = self.s[i];
                let h = self.s[i + 1] - s0;
                if lambda.abs() * h <= 1.0 {
                    gauss_fixed(
                        |s| {
                            let u = s - s0;
                            let p = c[0] + u * (c[1] + u * (c[2] + u * c[3]));
                            one_minus_cis(lambda * s) * p
                        },
                        s0,
                        s0 + h,
                        &rule,
                    )
                } else {
                    let plain = c[0] * h + c[1] * h * h / 2.0 + c[2] * h.powi(3) / 3.0 + c[3] * h.powi(4) / 4.0;
                    plain - (i_unit * lambda * s0).exp() * cubic_oscillatory(&c, h, lambda, &rule)
                }
            })
            .sum();
        let (se, ve) = self.last();
        let r = self.tail_rate;
        let tail = ve * (one_minus_cis(lambda * se) * r - i_unit * lambda)
            / (Complex64::new(r, -lambda) * r);
        body + tail
    }

    /// `∫_0^∞ (1 - e^{iλs}) h(s) ds`, stable for small `λ`.
    pub fn one_minus_transform(&self, lambda: f64) -> (Complex64, f64) {
        let cubic = self.one_minus_transform_with(lambda, false);
        let linear = self.one_minus_transform_with(lambda, true);
        (cubic, (cubic - linear).norm())
    }

    pub fn truncation_point(&self, extra_power: u32, eps: f64) -> f64 {
        let (se, ve) = self.last();
        let r = self.tail_rate;
        let bound = |s: f64| ve.norm() * s.powi(extra_power as i32) * (-r * (s - se)).exp();
        let mut s = se.max(f64::from(extra_power) / r);
        while bound(s) > eps {
            s += 1.0 / r;
        }
        s
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            s: self.s.clone(),
            v: self.v.iter().map(|&x| x * factor).collect(),
            slope: self.slope.iter().map(|&x| x * factor).collect(),
            tail_rate: self.tail_rate,
        }
    }
}

/// `1 - e^{ix}` without cancellation for small `x`.
pub(crate) fn one_minus_cis(x: f64) -> Complex64 {
    Complex64::new(0.0, -2.0 * (0.5 * x).sin()) * Complex64::new(0.0, 0.5 * x).exp()
}

// ∫_0^h p(u) e^{iωu} du for the cubic with coefficients c.
fn cubic_oscillatory(c: &[Complex64; 4], h: f64, omega: f64, rule: &(Vec<f64>, Vec<f64>)) -> Complex64 {
    let i_unit = Complex64::new(0.0, 1.0);
    if omega.abs() * h <= 1.0 {
        return gauss_fixed(
            |u| (c[0] + u * (c[1] + u * (c[2] + u * c[3]))) * (i_unit * omega * u).exp(),
            0.0,
            h,
            rule,
        );
    }
    // repeated integration by parts terminates after the third derivative
    let iw = i_unit * omega;
    let antiderivative = |u: f64| {
        let p = c[0] + u * (c[1] + u * (c[2] + u * c[3]));
        let d1 = c[1] + u * (c[2] * 2.0 + u * c[3] * 3.0);
        let d2 = c[2] * 2.0 + u * c[3] * 6.0;
        let d3 = c[3] * 6.0;
        p / iw - d1 / iw.powu(2) + d2 / iw.powu(3) - d3 / iw.powu(4)
    };
    (iw * h).exp() * antiderivative(h) - antiderivative(0.0)
}

fn fit_tail_rate(s: &[f64], v: &[Complex64]) -> Result<f64, KernelError> {
    let n = s.len();
    if v[n - 1].norm() == 0.0 {
        // identically zero tail; any rate describes it
        return Ok(1.0);
    }
    let take = (n / 10).max(3).min(n);
    let pts: Vec<(f64, f64)> = s[n - take..]
        .iter()
        .zip(&v[n - take..])
        .filter(|(_, z)| z.norm() > 0.0)
        .map(|(&x, z)| (x, z.norm().ln()))
        .collect();
    if pts.len() < 2 {
        return Err(KernelError::NonIntegrableKernel(
            "not enough nonzero tail samples to fit a decay rate".into(),
        ));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let rate = -sxy / sxx;
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(KernelError::NonIntegrableKernel(format!(
            "tabulated tail does not decay (fitted rate {rate})"
        )));
    }
    Ok(rate)
}

fn node_slopes(s: &[f64], v: &[Complex64], tail_rate: f64) -> Vec<Complex64> {
    let n = s.len();
    let mut m = vec![ZERO; n];
    if n == 2 {
        m[0] = (v[1] - v[0]) / (s[1] - s[0]);
    } else {
        let (h0, h1) = (s[1] - s[0], s[2] - s[1]);
        m[0] = v[0] * (-(2.0 * h0 + h1) / (h0 * (h0 + h1)))
            + v[1] * ((h0 + h1) / (h0 * h1))
            - v[2] * (h0 / (h1 * (h0 + h1)));
    }
    for i in 1..n - 1 {
        let (h0, h1) = (s[i] - s[i - 1], s[i + 1] - s[i]);
        m[i] = v[i - 1] * (-h1 / (h0 * (h0 + h1)))
            + v[i] * ((h1 - h0) / (h0 * h1))
            + v[i + 1] * (h0 / (h1 * (h0 + h1)));
    }
    m[n - 1] = -v[n - 1] * tail_rate;
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampled(f: impl Fn(f64) -> f64, s_max: f64, n: usize) -> HalfLineTable {
        let s: Vec<f64> = (0..n).map(|j| s_max * j as f64 / (n - 1) as f64).collect();
        let v: Vec<Complex64> = s.iter().map(|&x| Complex64::new(f(x), 0.0)).collect();
        HalfLineTable::from_samples(&s, &v).unwrap()
    }

    #[test]
    fn exponential_tail_rate_is_recovered() {
        let t = sampled(|x| 2.0 * (-1.5 * x).exp(), 10.0, 201);
        assert!((t.tail_rate() - 1.5).abs() < 1e-9);
        assert!((t.eval(14.0).re - 2.0 * (-21.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn growing_tail_is_rejected() {
        let s: Vec<f64> = (0..20).map(f64::from).collect();
        let v: Vec<Complex64> = s.iter().map(|&x| Complex64::new(x.exp(), 0.0)).collect();
        assert!(matches!(
            HalfLineTable::from_samples(&s, &v),
            Err(KernelError::NonIntegrableKernel(_))
        ));
    }

    #[test]
    fn interpolant_and_moments_track_the_function() {
        let t = sampled(|x| (-x).exp(), 30.0, 1201);
        assert!((t.eval(0.37).re - (-0.37f64).exp()).abs() < 1e-5);
        let (m0, _) = t.moment(0);
        let (m2, err) = t.moment(2);
        assert!((m0.re - 1.0).abs() < 1e-6);
        assert!((m2.re - 2.0).abs() < 1e-5);
        assert!(err < 1e-2);
    }

    #[test]
    fn filon_transform_matches_closed_form() {
        let t = sampled(|x| (-x).exp(), 30.0, 3001);
        for lam in [0.0, 0.3, 1.0, 7.0, 120.0] {
            let (f, _) = t.transform(lam);
            let exact = Complex64::new(1.0, 0.0) / Complex64::new(1.0, -lam);
            assert!((f - exact).norm() < 1e-5, "λ = {lam}: {f} vs {exact}");
            let (omt, _) = t.one_minus_transform(lam);
            assert!((omt - (Complex64::new(1.0, 0.0) - exact)).norm() < 1e-5);
        }
    }

    #[test]
    fn tail_integral_of_exponential() {
        let t = sampled(|x| (-2.0 * x).exp(), 20.0, 801).tail_integral();
        for s in [0.0, 0.5, 3.0, 25.0] {
            assert!((t.eval(s).re - 0.5 * (-2.0 * s).exp()).abs() < 1e-7, "s = {s}");
        }
    }

    #[test]
    fn missing_origin_is_extrapolated() {
        let s = [0.5, 1.0, 1.5, 2.0];
        let v: Vec<Complex64> = s.iter().map(|&x| Complex64::new(3.0 - x, 0.0) * 0.1).collect();
        let t = HalfLineTable::from_samples(&s, &v).unwrap();
        assert_eq!(t.nodes()[0], 0.0);
        assert!((t.values()[0].re - 0.3).abs() < 1e-15);
    }
}
