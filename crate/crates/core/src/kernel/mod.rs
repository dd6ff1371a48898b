//! Kernels at the three representation levels `K`, `K1`, `K0`.
//!
//! A kernel is stored as two half-line functions: `pos(s) = k(s)` and
//! `neg(s) = k(-s)` for `s > 0`. Each half is either an exp-polynomial
//! `sum c s^k e^{-a s}` or a tabulated cubic interpolant with a fitted
//! exponential tail. Both halves always share the same representation.

mod conditions;
mod table;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use conditions::{verify_conditions, ConditionConfig, ConditionId, ConditionVerdict};
pub use table::HalfLineTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("non-integrable kernel: {0}")]
    NonIntegrableKernel(String),
    #[error("moment of order {order} diverges: {detail}")]
    MomentDiverges { order: u32, detail: String },
    #[error("expected a kernel at level {expected:?}, got {found:?}")]
    LevelMismatch { expected: Level, found: Level },
    #[error("invalid kernel: {0}")]
    InvalidSpec(String),
}

/// Which function of the representation chain a spec describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    K,
    K1,
    K0,
}

/// One term `c * s^k * e^{-a s}` on a half-line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub c: Complex64,
    pub k: u32,
    pub a: f64,
}

impl ExpTerm {
    pub fn new(c: impl Into<Complex64>, k: u32, a: f64) -> Self {
        Self { c: c.into(), k, a }
    }
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * f64::from(n - j) / f64::from(j + 1))
}

/// A finite sum of exp-polynomial terms on `s >= 0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExpPoly {
    terms: Vec<ExpTerm>,
}

impl ExpPoly {
    pub fn new(terms: Vec<ExpTerm>) -> Result<Self, KernelError> {
        for t in &terms {
            if !(t.a > 0.0) || !t.a.is_finite() {
                return Err(KernelError::NonIntegrableKernel(format!(
                    "decay rate {} must be positive and finite",
                    t.a
                )));
            }
            if !t.c.re.is_finite() || !t.c.im.is_finite() {
                return Err(KernelError::InvalidSpec(format!(
                    "coefficient {} is not finite",
                    t.c
                )));
            }
        }
        Ok(Self { terms })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.c == Complex64::new(0.0, 0.0))
    }

    pub fn eval(&self, s: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.c * s.powi(t.k as i32) * (-t.a * s).exp())
            .sum()
    }

    /// `∫_0^∞ s^m h(s) ds`.
    pub fn moment(&self, m: u32) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.c * factorial(m + t.k) / t.a.powi((m + t.k + 1) as i32))
            .sum()
    }

    /// Upper bound for `∫_0^∞ s^m |h(s)| ds`.
    pub fn abs_moment_bound(&self, m: u32) -> f64 {
        self.terms
            .iter()
            .map(|t| t.c.norm() * factorial(m + t.k) / t.a.powi((m + t.k + 1) as i32))
            .sum()
    }

    /// The function `s ↦ ∫_s^∞ h`, again an exp-polynomial.
    pub fn tail_integral(&self) -> Self {
        let mut terms = Vec::new();
        for t in &self.terms {
            let kf = factorial(t.k);
            for j in 0..=t.k {
                let coeff = t.c * (kf / (factorial(j) * t.a.powi((t.k - j + 1) as i32)));
                terms.push(ExpTerm::new(coeff, j, t.a));
            }
        }
        Self { terms }
    }

    /// `∫_0^∞ e^{iλs} h(s) ds`.
    pub fn transform(&self, lambda: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|t| {
                let z = Complex64::new(t.a, -lambda);
                t.c * factorial(t.k) / z.powu(t.k + 1)
            })
            .sum()
    }

    /// `∫_0^∞ (1 - e^{iλs}) h(s) ds`, evaluated without cancellation near `λ = 0`.
    pub fn one_minus_transform(&self, lambda: f64) -> Complex64 {
        let mil = Complex64::new(0.0, -lambda);
        self.terms
            .iter()
            .map(|t| {
                let z = Complex64::new(t.a, -lambda);
                let n = t.k + 1;
                // (a - iλ)^n - a^n with the a^n term removed analytically
                let numer: Complex64 = (1..=n)
                    .map(|j| binomial(n, j) * t.a.powi((n - j) as i32) * mil.powu(j))
                    .sum();
                t.c * factorial(t.k) * numer / (t.a.powi(n as i32) * z.powu(n))
            })
            .sum()
    }

    /// A point beyond which `s^extra_power |h(s)|` stays below `eps`.
    pub fn truncation_point(&self, extra_power: u32, eps: f64) -> f64 {
        let bound = |s: f64| -> f64 {
            self.terms
                .iter()
                .map(|t| t.c.norm() * s.powi((t.k + extra_power) as i32) * (-t.a * s).exp())
                .sum()
        };
        let Some(slowest) = self
            .terms
            .iter()
            .filter(|t| t.c.norm() > 0.0)
            .map(|t| t.a)
            .reduce(f64::min)
        else {
            return 1.0;
        };
        let mut s = 1.0 / slowest;
        // past the maximum of every term, so the bound is decreasing from here
        let kmax = self.terms.iter().map(|t| t.k + extra_power).max().unwrap_or(0);
        s = s.max(f64::from(kmax) / slowest);
        while bound(s) > eps {
            s *= 1.25;
        }
        s
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| ExpTerm::new(t.c * factor, t.k, t.a))
                .collect(),
        }
    }
}

/// One half of a kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum HalfLine {
    Terms(ExpPoly),
    Table(HalfLineTable),
}

impl HalfLine {
    pub fn eval(&self, s: f64) -> Complex64 {
        match self {
            HalfLine::Terms(p) => p.eval(s),
            HalfLine::Table(t) => t.eval(s),
        }
    }

    /// `∫_0^∞ s^m h(s) ds` with an error estimate.
    pub fn moment(&self, m: u32) -> (Complex64, f64) {
        match self {
            HalfLine::Terms(p) => (p.moment(m), 0.0),
            HalfLine::Table(t) => t.moment(m),
        }
    }

    pub fn abs_moment(&self, m: u32) -> f64 {
        match self {
            HalfLine::Terms(p) => p.abs_moment_bound(m),
            HalfLine::Table(t) => t.abs_moment(m),
        }
    }

    pub fn tail_integral(&self) -> HalfLine {
        match self {
            HalfLine::Terms(p) => HalfLine::Terms(p.tail_integral()),
            HalfLine::Table(t) => HalfLine::Table(t.tail_integral()),
        }
    }

    /// `∫_0^∞ e^{iλs} h(s) ds` with an error estimate.
    pub fn transform(&self, lambda: f64) -> (Complex64, f64) {
        match self {
            HalfLine::Terms(p) => (p.transform(lambda), 0.0),
            HalfLine::Table(t) => t.transform(lambda),
        }
    }

    /// `∫_0^∞ (1 - e^{iλs}) h(s) ds` with an error estimate.
    pub fn one_minus_transform(&self, lambda: f64) -> (Complex64, f64) {
        match self {
            HalfLine::Terms(p) => (p.one_minus_transform(lambda), 0.0),
            HalfLine::Table(t) => t.one_minus_transform(lambda),
        }
    }

    /// Length of the half-line window outside which the function is negligible
    /// (below `eps` after weighting by `s^extra_power`).
    pub fn truncation_point(&self, extra_power: u32, eps: f64) -> f64 {
        match self {
            HalfLine::Terms(p) => p.truncation_point(extra_power, eps),
            HalfLine::Table(t) => t.truncation_point(extra_power, eps),
        }
    }

    /// Interior points where the function is only piecewise smooth.
    pub fn knots(&self) -> &[f64] {
        match self {
            HalfLine::Terms(_) => &[],
            HalfLine::Table(t) => t.nodes(),
        }
    }

    fn scaled(&self, factor: Complex64) -> HalfLine {
        match self {
            HalfLine::Terms(p) => HalfLine::Terms(p.scaled(factor)),
            HalfLine::Table(t) => HalfLine::Table(t.scaled(factor)),
        }
    }
}

/// A kernel at a given representation level.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    level: Level,
    pos: HalfLine,
    neg: HalfLine,
}

impl KernelSpec {
    /// `pos_terms` describe `t > 0`, `neg_terms` describe `t < 0` in `|t|`.
    pub fn closed_form(
        level: Level,
        pos_terms: Vec<ExpTerm>,
        neg_terms: Vec<ExpTerm>,
    ) -> Result<Self, KernelError> {
        Ok(Self {
            level,
            pos: HalfLine::Terms(ExpPoly::new(pos_terms)?),
            neg: HalfLine::Terms(ExpPoly::new(neg_terms)?),
        })
    }

    /// Tabulated kernel from a strictly increasing grid spanning both signs.
    ///
    /// A sample at `t = 0` is shared by both halves. Tails beyond the grid are
    /// exponential, fitted to the outermost tenth of each half's samples.
    pub fn tabulated(level: Level, t: &[f64], v: &[Complex64]) -> Result<Self, KernelError> {
        if t.len() != v.len() {
            return Err(KernelError::InvalidSpec(format!(
                "grid has {} points but {} values",
                t.len(),
                v.len()
            )));
        }
        if t.iter().any(|x| !x.is_finite()) || v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(KernelError::InvalidSpec("non-finite sample".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(KernelError::InvalidSpec(
                "tabulated grid must be strictly increasing".into(),
            ));
        }
        if t.first().is_none_or(|&x| x >= 0.0) || t.last().is_none_or(|&x| x <= 0.0) {
            return Err(KernelError::InvalidSpec(
                "tabulated grid must span both signs of t".into(),
            ));
        }
        let mut pos_s = Vec::new();
        let mut pos_v = Vec::new();
        let mut neg_s = Vec::new();
        let mut neg_v = Vec::new();
        for (&ti, &vi) in t.iter().zip(v) {
            if ti >= 0.0 {
                pos_s.push(ti);
                pos_v.push(vi);
            }
            if ti <= 0.0 {
                neg_s.push(-ti);
                neg_v.push(vi);
            }
        }
        neg_s.reverse();
        neg_v.reverse();
        Ok(Self {
            level,
            pos: HalfLine::Table(HalfLineTable::from_samples(&pos_s, &pos_v)?),
            neg: HalfLine::Table(HalfLineTable::from_samples(&neg_s, &neg_v)?),
        })
    }

    pub fn zero(level: Level) -> Self {
        Self {
            level,
            pos: HalfLine::Terms(ExpPoly::zero()),
            neg: HalfLine::Terms(ExpPoly::zero()),
        }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn pos(&self) -> &HalfLine {
        &self.pos
    }

    pub fn neg(&self) -> &HalfLine {
        &self.neg
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.pos, HalfLine::Terms(_))
    }

    /// Closed-form terms `(pos, neg)`, if this is an exp-polynomial kernel.
    pub fn terms(&self) -> Option<(&ExpPoly, &ExpPoly)> {
        match (&self.pos, &self.neg) {
            (HalfLine::Terms(p), HalfLine::Terms(n)) => Some((p, n)),
            _ => None,
        }
    }

    /// Kernel value; at `t = 0` the mean of the one-sided limits.
    pub fn eval(&self, t: f64) -> Complex64 {
        if t > 0.0 {
            self.pos.eval(t)
        } else if t < 0.0 {
            self.neg.eval(-t)
        } else {
            0.5 * (self.pos.eval(0.0) + self.neg.eval(0.0))
        }
    }

    pub fn is_real(&self) -> bool {
        let check = |h: &HalfLine| match h {
            HalfLine::Terms(p) => p.terms().iter().all(|t| t.c.im == 0.0),
            HalfLine::Table(t) => t.values().iter().all(|z| z.im == 0.0),
        };
        check(&self.pos) && check(&self.neg)
    }

    /// `∫ |k|`, the reference magnitude for strict-inequality tolerances.
    pub fn scale(&self) -> f64 {
        self.pos.abs_moment(0) + self.neg.abs_moment(0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let f = Complex64::new(factor, 0.0);
        Self {
            level: self.level,
            pos: self.pos.scaled(f),
            neg: self.neg.scaled(f),
        }
    }

}

fn expect_level(spec: &KernelSpec, level: Level) -> Result<(), KernelError> {
    if spec.level != level {
        return Err(KernelError::LevelMismatch {
            expected: level,
            found: spec.level,
        });
    }
    Ok(())
}

fn tail_integrate(spec: &KernelSpec, level: Level) -> KernelSpec {
    KernelSpec {
        level,
        pos: spec.pos.tail_integral(),
        neg: spec.neg.tail_integral(),
    }
}

/// `K(t) = ∫_t^∞ K1` for `t > 0` and `∫_{-∞}^t K1` for `t < 0`.
pub fn build_k_from_k1(spec: &KernelSpec) -> Result<KernelSpec, KernelError> {
    expect_level(spec, Level::K1)?;
    check_integrable(spec)?;
    Ok(tail_integrate(spec, Level::K))
}

/// `K1(t) = ∫_t^∞ K0` for `t > 0` and `∫_{-∞}^t K0` for `t < 0`.
pub fn build_k1_from_k0(spec: &KernelSpec) -> Result<KernelSpec, KernelError> {
    expect_level(spec, Level::K0)?;
    check_integrable(spec)?;
    Ok(tail_integrate(spec, Level::K1))
}

fn check_integrable(spec: &KernelSpec) -> Result<(), KernelError> {
    for m in 0..=1 {
        let v = spec.pos.abs_moment(m) + spec.neg.abs_moment(m);
        if !v.is_finite() {
            return Err(KernelError::NonIntegrableKernel(format!(
                "absolute moment of order {m} is not finite"
            )));
        }
    }
    Ok(())
}

/// Sign-flips the negative half-line part of a `K1` kernel.
pub fn tilde_of(spec: &KernelSpec) -> KernelSpec {
    KernelSpec {
        level: spec.level,
        pos: spec.pos.clone(),
        neg: spec.neg.scaled(Complex64::new(-1.0, 0.0)),
    }
}

/// A moment value with its quadrature error estimate (zero for closed forms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moment {
    pub value: Complex64,
    pub error: f64,
}

/// `ν_m(k) = ∫ t^m k(t) dt`.
pub fn moment(spec: &KernelSpec, m: u32) -> Result<Moment, KernelError> {
    let abs = spec.pos.abs_moment(m) + spec.neg.abs_moment(m);
    if !abs.is_finite() || abs > 1e300 {
        return Err(KernelError::MomentDiverges {
            order: m,
            detail: format!("absolute moment estimate {abs}"),
        });
    }
    let (p, pe) = spec.pos.moment(m);
    let (n, ne) = spec.neg.moment(m);
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(Moment {
        value: p + n * sign,
        error: pe + ne,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentSubject {
    #[serde(rename = "tildeK1")]
    TildeK1,
    K0,
}

/// The moments `ν0, ν1, ν2` of `K̃1` or of `K0`.
///
/// Values are real parts; the symbols of interest come from real kernels, and
/// `max_imag` records how far the moments are from being real.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub subject: MomentSubject,
    pub nu0: Option<f64>,
    pub nu1: Option<f64>,
    pub nu2: Option<f64>,
    pub abs_finite: [bool; 3],
    pub errors: [f64; 3],
    pub max_imag: f64,
}

impl MomentSet {
    /// Moments of `K̃1` for a `K1` spec.
    pub fn for_tilde_k1(k1: &KernelSpec) -> Result<Self, KernelError> {
        expect_level(k1, Level::K1)?;
        Ok(Self::collect(&tilde_of(k1), MomentSubject::TildeK1))
    }

    /// Moments of a `K0` spec.
    pub fn for_k0(k0: &KernelSpec) -> Result<Self, KernelError> {
        expect_level(k0, Level::K0)?;
        Ok(Self::collect(k0, MomentSubject::K0))
    }

    fn collect(spec: &KernelSpec, subject: MomentSubject) -> Self {
        let mut vals = [None; 3];
        let mut abs_finite = [false; 3];
        let mut errors = [f64::INFINITY; 3];
        let mut max_imag: f64 = 0.0;
        for m in 0..3u32 {
            if let Ok(mo) = moment(spec, m) {
                let i = m as usize;
                vals[i] = Some(mo.value.re);
                abs_finite[i] = true;
                errors[i] = mo.error;
                max_imag = max_imag.max(mo.value.im.abs());
            }
        }
        Self {
            subject,
            nu0: vals[0],
            nu1: vals[1],
            nu2: vals[2],
            abs_finite,
            errors,
            max_imag,
        }
    }
}
