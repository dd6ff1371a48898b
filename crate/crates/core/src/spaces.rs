//! Operators `B_α`, `B_∞`, `G_α`, `G_∞` on sampled functions over `[0, T]`.
//!
//! The half-line upper limit in `B_α` is truncated at `T` with a zero tail;
//! for inputs decaying like `e^{-t}` the truncation error at `t` is
//! `O(e^{-2(T - t)})`.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::gauss_legendre;

const I: Complex64 = Complex64::new(0.0, 1.0);
const MIN_SAMPLES: usize = 16;
/// Stencil width for the product-integration panels.
const STENCIL: usize = 6;
/// Relative norm change tolerated between a grid and its every-other subgrid.
const NOISE_TOL: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpacesError {
    #[error("invalid grid function: {0}")]
    InvalidGrid(String),
    #[error("not in {space}: {reason}")]
    NotInSpace { space: String, reason: String },
    #[error("multiplicity data: {0}")]
    Multiplicity(String),
    #[error("csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    #[default]
    Trapezoid,
    Simpson,
}

impl Quadrature {
    /// Composite weights for `n` equispaced nodes of spacing `h`. Simpson on
    /// an odd number of intervals closes with the 3/8 rule on the last three.
    pub fn weights(self, n: usize, h: f64) -> Vec<f64> {
        let mut w = vec![h; n];
        match self {
            Quadrature::Trapezoid => {
                w[0] = 0.5 * h;
                w[n - 1] = 0.5 * h;
            }
            Quadrature::Simpson => {
                let intervals = n - 1;
                let simpson_end = if intervals.is_multiple_of(2) { intervals } else { intervals - 3 };
                w.iter_mut().for_each(|x| *x = 0.0);
                for p in (0..simpson_end).step_by(2) {
                    w[p] += h / 3.0;
                    w[p + 1] += 4.0 * h / 3.0;
                    w[p + 2] += h / 3.0;
                }
                if simpson_end < intervals {
                    let s = simpson_end;
                    for (k, c) in [1.0, 3.0, 3.0, 1.0].into_iter().enumerate() {
                        w[s + k] += 3.0 * h / 8.0 * c;
                    }
                }
            }
        }
        w
    }
}

/// Samples at `t_j = j T / (n - 1)`, `j = 0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    t_max: f64,
    samples: Vec<Complex64>,
    quadrature: Quadrature,
}

impl GridFunction {
    pub fn new(t_max: f64, samples: Vec<Complex64>, quadrature: Quadrature) -> Result<Self, SpacesError> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(SpacesError::InvalidGrid(format!("T must be positive, got {t_max}")));
        }
        if samples.len() < MIN_SAMPLES {
            return Err(SpacesError::InvalidGrid(format!(
                "need at least {MIN_SAMPLES} samples, got {}",
                samples.len()
            )));
        }
        if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SpacesError::InvalidGrid(format!("sample {j} is not finite")));
        }
        Ok(Self {
            t_max,
            samples,
            quadrature,
        })
    }

    pub fn from_fn(t_max: f64, n: usize, f: impl Fn(f64) -> Complex64) -> Result<Self, SpacesError> {
        let h = t_max / (n.max(2) - 1) as f64;
        Self::new(t_max, (0..n).map(|j| f(j as f64 * h)).collect(), Quadrature::default())
    }

    pub fn zeros(t_max: f64, n: usize) -> Result<Self, SpacesError> {
        Self::new(t_max, vec![Complex64::new(0.0, 0.0); n], Quadrature::default())
    }

    pub fn with_quadrature(mut self, quadrature: Quadrature) -> Self {
        self.quadrature = quadrature;
        self
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn step(&self) -> f64 {
        self.t_max / (self.n() - 1) as f64
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.step()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.t(j)).collect()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quadrature
    }

    pub fn weights(&self) -> Vec<f64> {
        self.quadrature.weights(self.n(), self.step())
    }

    /// Discrete `L²(0, T)` norm.
    pub fn norm(&self) -> f64 {
        self.weights()
            .iter()
            .zip(&self.samples)
            .map(|(w, v)| w * v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn with_samples(&self, samples: Vec<Complex64>) -> Self {
        Self {
            t_max: self.t_max,
            samples,
            quadrature: self.quadrature,
        }
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.n() == other.n() && self.t_max == other.t_max
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        self.with_samples(
            self.samples
                .iter()
                .enumerate()
                .map(|(j, &v)| f(self.t(j), v))
                .collect(),
        )
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.map(|_, v| c * v)
    }

    /// `a·self + b·other`; panics if the grids differ.
    pub fn axpby(&self, a: Complex64, other: &Self, b: Complex64) -> Self {
        assert!(self.same_grid(other), "grid functions live on different grids");
        self.with_samples(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    /// `‖self - other‖ / ‖other‖`, or the absolute norm when `other` is zero.
    pub fn relative_error(&self, reference: &Self) -> f64 {
        let diff = self.axpby(Complex64::new(1.0, 0.0), reference, Complex64::new(-1.0, 0.0)).norm();
        let r = reference.norm();
        if r > 0.0 {
            diff / r
        } else {
            diff
        }
    }

    /// Every other sample, dropping the last one first when `n` is even.
    pub fn subsampled(&self) -> Option<Self> {
        let keep = if self.n().is_multiple_of(2) { self.n() - 1 } else { self.n() };
        let samples: Vec<_> = self.samples[..keep].iter().step_by(2).copied().collect();
        let t_max = (keep - 1) as f64 * self.step();
        Self::new(t_max, samples, self.quadrature).ok()
    }

    fn truncated(&self, n: usize) -> Option<Self> {
        Self::new((n - 1) as f64 * self.step(), self.samples[..n].to_vec(), self.quadrature).ok()
    }

    /// Two-column CSV `t,value` with values written as `re+imi`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value\n");
        for (j, v) in self.samples.iter().enumerate() {
            let _ = writeln!(out, "{:e},{}", self.t(j), format_complex(*v));
        }
        out
    }

    /// Parses [`GridFunction::to_csv`] output; nodes must be equispaced from 0.
    pub fn from_csv(text: &str) -> Result<Self, SpacesError> {
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (k == 0 && line.starts_with('t')) {
                continue;
            }
            let err = |reason: String| SpacesError::Csv { line: k + 1, reason };
            let (t, v) = line
                .split_once(',')
                .ok_or_else(|| err("expected two columns".into()))?;
            ts.push(t.trim().parse::<f64>().map_err(|e| err(format!("t: {e}")))?);
            vs.push(parse_complex(v.trim()).ok_or_else(|| err(format!("bad complex value {v:?}")))?);
        }
        if ts.len() < MIN_SAMPLES {
            return Err(SpacesError::InvalidGrid(format!(
                "need at least {MIN_SAMPLES} rows, got {}",
                ts.len()
            )));
        }
        let t_max = *ts.last().unwrap();
        let h = t_max / (ts.len() - 1) as f64;
        for (j, &t) in ts.iter().enumerate() {
            if (t - j as f64 * h).abs() > 1e-9 * t_max {
                return Err(SpacesError::Csv {
                    line: j + 2,
                    reason: format!("node {t} is not on the uniform grid starting at 0"),
                });
            }
        }
        Self::new(t_max, vs, Quadrature::default())
    }
}

fn format_complex(v: Complex64) -> String {
    format!("{:e}{}{:e}i", v.re, if v.im.is_sign_negative() { "" } else { "+" }, v.im)
}

/// `re+imi` as written by `to_csv`, or a bare real.
fn parse_complex(s: &str) -> Option<Complex64> {
    let Some(body) = s.strip_suffix('i') else {
        return s.parse().ok().map(|re| Complex64::new(re, 0.0));
    };
    // the imaginary sign is the last '+'/'-' that is not part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'))?;
    let re = body[..split].parse().ok()?;
    let im = body[split..].parse().ok()?;
    Some(Complex64::new(re, im))
}

/// A zero location on the compactified line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alpha {
    Finite(f64),
    Infinity,
}

/// Product-integration weights `∫_0^h w(u) L_k(t_j + u) du` for the six
/// Lagrange basis polynomials on nodes `start..start+6`, indexed by the
/// panel's offset `j - start ∈ 0..=4`.
fn panel_weights(h: f64, w: impl Fn(f64) -> Complex64) -> [[Complex64; STENCIL]; STENCIL - 1] {
    let (x, gw) = gauss_legendre(16);
    let mut out = [[Complex64::new(0.0, 0.0); STENCIL]; STENCIL - 1];
    for (offset, row) in out.iter_mut().enumerate() {
        for (xq, wq) in x.iter().zip(&gw) {
            // local coordinate in units of h, shifted to [0, 1]
            let y = 0.5 * (xq + 1.0);
            let node = offset as f64 + y;
            let weight = w(h * y) * (0.5 * h * wq);
            for (k, slot) in row.iter_mut().enumerate() {
                let lk: f64 = (0..STENCIL)
                    .filter(|&m| m != k)
                    .map(|m| (node - m as f64) / (k as f64 - m as f64))
                    .product();
                *slot += weight * lk;
            }
        }
    }
    out
}

fn stencil_start(j: usize, n: usize) -> usize {
    j.saturating_sub(2).min(n - STENCIL)
}

fn panel(samples: &[Complex64], weights: &[[Complex64; STENCIL]; STENCIL - 1], j: usize) -> Complex64 {
    let start = stencil_start(j, samples.len());
    weights[j - start]
        .iter()
        .zip(&samples[start..start + STENCIL])
        .map(|(w, v)| w * v)
        .sum()
}

/// `I(t) = ∫_t^T e^{-(s - t)} φ(s) ds` by backward recursion.
fn backward_exp_integral(phi: &GridFunction) -> Vec<Complex64> {
    let n = phi.n();
    let h = phi.step();
    let w = panel_weights(h, |u| Complex64::new((-u).exp(), 0.0));
    let decay = (-h).exp();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for j in (0..n - 1).rev() {
        out[j] = decay * out[j + 1] + panel(&phi.samples, &w, j);
    }
    out
}

/// `J(t) = ∫_0^t e^{-iα(t - s)} φ(s) ds` by forward recursion.
fn forward_osc_integral(phi: &GridFunction, alpha: f64) -> Vec<Complex64> {
    let n = phi.n();
    let h = phi.step();
    let w = panel_weights(h, |u| Complex64::new(0.0, -alpha * (h - u)).exp());
    let rot = Complex64::new(0.0, -alpha * h).exp();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n - 1 {
        out[j + 1] = rot * out[j] + panel(&phi.samples, &w, j);
    }
    out
}

/// First-derivative weights at `x0` for unit-spaced nodes `0..m` (Fornberg).
fn fd_weights(x0: f64, m: usize) -> Vec<f64> {
    // c[j][k]: weight of node j for the k-th derivative, k <= 1
    let mut c = vec![[0.0f64; 2]; m];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    for i in 1..m {
        let xi = i as f64;
        let mut c2 = 1.0;
        for j in 0..i {
            let c3 = xi - j as f64;
            c2 *= c3;
            if j == i - 1 {
                c[i][1] = c1 * (c[i - 1][0] - (xi - 1.0 - x0) * c[i - 1][1]) / c2;
                c[i][0] = -c1 * (xi - 1.0 - x0) * c[i - 1][0] / c2;
            }
            c[j][1] = ((xi - x0) * c[j][1] - c[j][0]) / c3;
            c[j][0] = (xi - x0) * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

const DIFF_WIDTH: usize = 7;

/// Sixth-order derivative from seven-point stencils: central inside,
/// shifted toward the interior at the three nodes nearest each end.
pub fn derivative(f: &GridFunction) -> GridFunction {
    let v = &f.samples;
    let n = v.len();
    let inv_h = 1.0 / f.step();
    let table: Vec<Vec<f64>> = (0..DIFF_WIDTH).map(|p| fd_weights(p as f64, DIFF_WIDTH)).collect();
    let d = (0..n)
        .map(|j| {
            let start = j.saturating_sub(DIFF_WIDTH / 2).min(n - DIFF_WIDTH);
            table[j - start]
                .iter()
                .zip(&v[start..start + DIFF_WIDTH])
                .map(|(w, x)| w * x)
                .sum::<Complex64>()
                * inv_h
        })
        .collect();
    f.with_samples(d)
}

/// `B_α φ = φ - (1 + iα) e^t ∫_t^∞ e^{-s} φ(s) ds`, `B_∞ φ = i e^t ∫_t^∞ e^{-s} φ(s) ds`.
pub fn apply_b(phi: &GridFunction, alpha: Alpha) -> GridFunction {
    let tail = backward_exp_integral(phi);
    match alpha {
        Alpha::Finite(a) => {
            let c = Complex64::new(1.0, a);
            phi.with_samples(phi.samples.iter().zip(&tail).map(|(p, t)| p - c * t).collect())
        }
        Alpha::Infinity => phi.with_samples(tail.into_iter().map(|t| I * t).collect()),
    }
}

/// `G_α φ = φ + (1 - iα) e^{-iαt} ∫_0^t e^{iαs} φ(s) ds` and, as printed,
/// `G_∞ f = i (f + f')`.
pub fn apply_g(phi: &GridFunction, alpha: Alpha) -> GridFunction {
    match alpha {
        Alpha::Finite(a) => {
            let head = forward_osc_integral(phi, a);
            let c = Complex64::new(1.0, -a);
            phi.with_samples(phi.samples.iter().zip(&head).map(|(p, h)| p + c * h).collect())
        }
        Alpha::Infinity => {
            let d = derivative(phi);
            phi.with_samples(phi.samples.iter().zip(&d.samples).map(|(f, df)| I * (f + df)).collect())
        }
    }
}

/// Zero multiplicities `m_j = m'_j + m''_j` at the finite points `α_j` and
/// `m_∞ = m'_∞ + m''_∞` at infinity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MultiplicityData {
    pub alphas: Vec<f64>,
    pub m_prime: Vec<u32>,
    pub m_dblprime: Vec<u32>,
    pub m_inf_prime: u32,
    pub m_inf_dblprime: u32,
}

impl MultiplicityData {
    pub fn validate(&self) -> Result<(), SpacesError> {
        if self.m_prime.len() != self.alphas.len() || self.m_dblprime.len() != self.alphas.len() {
            return Err(SpacesError::Multiplicity(format!(
                "{} points but {} / {} split multiplicities",
                self.alphas.len(),
                self.m_prime.len(),
                self.m_dblprime.len()
            )));
        }
        if let Some(a) = self.alphas.iter().find(|a| !a.is_finite()) {
            return Err(SpacesError::Multiplicity(format!("finite point {a} is not finite")));
        }
        Ok(())
    }

    pub fn total(&self) -> (Vec<u32>, u32) {
        (
            self.m_prime.iter().zip(&self.m_dblprime).map(|(a, b)| a + b).collect(),
            self.m_inf_prime + self.m_inf_dblprime,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    B,
    G,
}

/// Applies the product operator: `B` takes the `m''` exponents, `G` the `m'`
/// exponents; finite factors first in list order, then the factor at ∞.
pub fn compose(phi: &GridFunction, mult: &MultiplicityData, which: Which) -> Result<GridFunction, SpacesError> {
    mult.validate()?;
    let (powers, inf_power) = match which {
        Which::B => (&mult.m_dblprime, mult.m_inf_dblprime),
        Which::G => (&mult.m_prime, mult.m_inf_prime),
    };
    let op = match which {
        Which::B => apply_b,
        Which::G => apply_g,
    };
    let mut out = phi.clone();
    for (&a, &p) in mult.alphas.iter().zip(powers) {
        for _ in 0..p {
            out = op(&out, Alpha::Finite(a));
        }
    }
    for _ in 0..inf_power {
        out = op(&out, Alpha::Infinity);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub space: String,
    pub belongs: bool,
    pub recovered_preimage: Option<GridFunction>,
    pub preimage_norm: f64,
    /// Relative change of the preimage norm on the every-other subgrid.
    pub refinement_change: Option<f64>,
}

pub const EBAR_SPACE: &str = "Ē₊(1/(λ−i))";

fn preimage_of(f: &GridFunction) -> GridFunction {
    let d = derivative(f);
    f.with_samples(f.samples.iter().zip(&d.samples).map(|(v, dv)| I * (dv - v)).collect())
}

/// Recovers `φ = i (f' - f)` with `B_∞ φ = f` and tests it for stability on
/// the every-other subgrid.
pub fn invert_b_inf(f: &GridFunction) -> MembershipVerdict {
    let pre = preimage_of(f);
    let norm = pre.norm();
    let change = f.subsampled().map(|coarse| {
        let coarse_norm = preimage_of(&coarse).norm();
        let keep = 2 * (coarse.n() - 1) + 1;
        let fine_norm = pre.truncated(keep).map_or(norm, |p| p.norm());
        if fine_norm == 0.0 && coarse_norm == 0.0 {
            0.0
        } else {
            (coarse_norm - fine_norm).abs() / fine_norm.max(coarse_norm)
        }
    });
    let belongs = norm.is_finite() && change.is_none_or(|c| c < NOISE_TOL);
    MembershipVerdict {
        space: EBAR_SPACE.to_string(),
        belongs,
        recovered_preimage: belongs.then_some(pre),
        preimage_norm: norm,
        refinement_change: change,
    }
}

/// `‖f‖ = ‖B_∞^{-1} f‖` in the discrete `L²` norm.
pub fn ebar_norm(f: &GridFunction) -> Result<f64, SpacesError> {
    let v = invert_b_inf(f);
    if v.belongs {
        Ok(v.preimage_norm)
    } else {
        Err(SpacesError::NotInSpace {
            space: v.space,
            reason: format!(
                "preimage norm changes by {:.3} under subsampling",
                v.refinement_change.unwrap_or(f64::NAN)
            ),
        })
    }
}
