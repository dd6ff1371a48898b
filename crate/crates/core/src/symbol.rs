//! Symbols on the compactified frequency line `-∞ <= λ <= +∞`.
//!
//! Samples live on `λ = L tan θ` with `θ` uniform in `(-π/2, π/2)`; the
//! points `λ = 0` and `λ = ±∞` are carried separately as analytic limits.
//! Winding numbers are accumulated from `-∞` through `0` to `+∞` and closed
//! through the common value at infinity.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::CaseLabel;
use crate::kernel::{ConditionId, ConditionVerdict, HalfLine, KernelError, KernelSpec, Level, MomentSet, MomentSubject};
use crate::quad::{integrate_partitioned, oscillatory_breakpoints, QuadConfig};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default relative floor for non-vanishing checks.
pub const NONVANISHING_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolError {
    #[error("oscillatory quadrature unresolved at λ = {lambda}: error estimate {error:e}")]
    UnresolvedOscillation { lambda: f64, error: f64 },
    #[error("symbol vanishes on the closed line (min modulus {min_modulus:e})")]
    VanishingSymbol { min_modulus: f64 },
    #[error("argument step {max_step} rad is too large to count windings reliably")]
    UnderResolved { max_step: f64 },
    #[error("moments contradict the requested case: {0}")]
    CaseMismatch(String),
    #[error("expected {expected:?} samples, got {found:?}")]
    LabelMismatch { expected: SymbolLabel, found: SymbolLabel },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Interior sample points of the compactified line.
///
/// `size` is the number of `θ`-intervals on `(-π/2, π/2)`; the interior
/// points are the `size - 2` interval ends other than `θ = 0`, so together
/// with `λ = 0` and `λ = ∞` a grid carries `size` samples. Doubling `size`
/// nests the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    size: usize,
    map_parameter: f64,
    interior: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(size: usize, map_parameter: f64) -> Result<Self, SymbolError> {
        if size < 8 || !size.is_power_of_two() {
            return Err(SymbolError::InvalidGrid(format!(
                "size must be a power of two >= 8, got {size}"
            )));
        }
        if !(map_parameter > 0.0) || !map_parameter.is_finite() {
            return Err(SymbolError::InvalidGrid(format!(
                "map parameter must be positive, got {map_parameter}"
            )));
        }
        let half = size / 2;
        let h = PI / size as f64;
        // mirrored from the positive half so the grid is exactly symmetric
        let positive: Vec<f64> = (1..half).map(|j| map_parameter * (j as f64 * h).tan()).collect();
        let mut interior: Vec<f64> = positive.iter().rev().map(|&x| -x).collect();
        interior.extend_from_slice(&positive);
        Ok(Self {
            size,
            map_parameter,
            interior,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn map_parameter(&self) -> f64 {
        self.map_parameter
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    pub fn includes_zero_limit(&self) -> bool {
        true
    }

    pub fn includes_infinity(&self) -> bool {
        true
    }

    /// The grid with twice as many `θ`-intervals.
    pub fn refined(&self) -> Self {
        Self::new(self.size * 2, self.map_parameter).expect("refinement of a valid grid")
    }

    /// `θ` of an interior point; used to check the nesting property.
    pub fn theta(&self, lambda: f64) -> f64 {
        (lambda / self.map_parameter).atan()
    }

    fn negative_count(&self) -> usize {
        self.interior.len() / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymbolLabel {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
    #[serde(rename = "c_I")]
    CI,
    #[serde(rename = "ctilde_II")]
    CtildeII,
    #[serde(rename = "c_III")]
    CIII,
    #[serde(rename = "d")]
    D,
    #[serde(rename = "e")]
    E,
    #[serde(rename = "c1")]
    C1,
    #[serde(rename = "custom")]
    Custom,
}

impl SymbolLabel {
    /// The serialized name, usable in file names.
    pub fn as_str(self) -> &'static str {
        match self {
            SymbolLabel::A => "a",
            SymbolLabel::B => "b",
            SymbolLabel::CI => "c_I",
            SymbolLabel::CtildeII => "ctilde_II",
            SymbolLabel::CIII => "c_III",
            SymbolLabel::D => "d",
            SymbolLabel::E => "e",
            SymbolLabel::C1 => "c1",
            SymbolLabel::Custom => "custom",
        }
    }
}

/// Rational multipliers used to move between the regular factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Multiplier {
    /// `i`
    ImagUnit,
    /// `(λ + i) / (λ - i)`
    PlusOverMinus,
    /// `(λ - i) / (λ + i)`
    MinusOverPlus,
}

impl Multiplier {
    fn at(self, lambda: f64) -> Complex64 {
        match self {
            Multiplier::ImagUnit => I,
            Multiplier::PlusOverMinus => Complex64::new(lambda, 1.0) / Complex64::new(lambda, -1.0),
            Multiplier::MinusOverPlus => Complex64::new(lambda, -1.0) / Complex64::new(lambda, 1.0),
        }
    }

    fn at_zero(self) -> Complex64 {
        match self {
            Multiplier::ImagUnit => I,
            _ => Complex64::new(-1.0, 0.0),
        }
    }

    fn at_infinity(self) -> Complex64 {
        match self {
            Multiplier::ImagUnit => I,
            _ => Complex64::new(1.0, 0.0),
        }
    }
}

/// Values of a symbol on a [`LambdaGrid`] plus its limits at `0` and `±∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSamples {
    pub grid: Arc<LambdaGrid>,
    pub values: Vec<Complex64>,
    pub value_at_zero: Complex64,
    pub value_at_infinity: Complex64,
    pub label: SymbolLabel,
}

impl SymbolSamples {
    pub fn from_fn(
        grid: Arc<LambdaGrid>,
        label: SymbolLabel,
        f: impl Fn(f64) -> Complex64,
        value_at_zero: Complex64,
        value_at_infinity: Complex64,
    ) -> Self {
        let values = grid.interior().iter().map(|&l| f(l)).collect();
        Self {
            grid,
            values,
            value_at_zero,
            value_at_infinity,
            label,
        }
    }

    fn try_from_fn(
        grid: Arc<LambdaGrid>,
        label: SymbolLabel,
        f: impl Fn(f64) -> Result<Complex64, SymbolError>,
        value_at_zero: Complex64,
        value_at_infinity: Complex64,
    ) -> Result<Self, SymbolError> {
        let values = grid
            .interior()
            .iter()
            .map(|&l| f(l))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            grid,
            values,
            value_at_zero,
            value_at_infinity,
            label,
        })
    }

    pub fn times(&self, m: Multiplier, label: SymbolLabel) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self
                .grid
                .interior()
                .iter()
                .zip(&self.values)
                .map(|(&l, &v)| m.at(l) * v)
                .collect(),
            value_at_zero: m.at_zero() * self.value_at_zero,
            value_at_infinity: m.at_infinity() * self.value_at_infinity,
            label,
        }
    }

    /// Pointwise product of two sample sets on the same grid.
    pub fn product(&self, other: &Self) -> Self {
        assert_eq!(self.grid, other.grid, "samples must share a grid");
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
            value_at_zero: self.value_at_zero * other.value_at_zero,
            value_at_infinity: self.value_at_infinity * other.value_at_infinity,
            label: SymbolLabel::Custom,
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            value_at_zero: self.value_at_zero * c,
            value_at_infinity: self.value_at_infinity * c,
            label: self.label,
        }
    }

    /// Samples in traversal order `-∞, λ < 0, 0, λ > 0, +∞`.
    pub fn traversal(&self) -> Vec<(f64, Complex64)> {
        let neg = self.grid.negative_count();
        let lam = self.grid.interior();
        let mut out = Vec::with_capacity(self.values.len() + 3);
        out.push((f64::NEG_INFINITY, self.value_at_infinity));
        out.extend(lam[..neg].iter().copied().zip(self.values[..neg].iter().copied()));
        out.push((0.0, self.value_at_zero));
        out.extend(lam[neg..].iter().copied().zip(self.values[neg..].iter().copied()));
        out.push((f64::INFINITY, self.value_at_infinity));
        out
    }

    /// Largest `|s(-λ) - conj s(λ)|` relative to the largest modulus.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let n = self.values.len();
        let scale = self
            .values
            .iter()
            .map(|v| v.norm())
            .fold(self.value_at_infinity.norm(), f64::max)
            .max(f64::MIN_POSITIVE);
        (0..n / 2)
            .map(|k| (self.values[n - 1 - k] - self.values[k].conj()).norm())
            .fold(0.0, f64::max)
            / scale
    }

    /// CSV rows `lambda,re,im,arg_unwrapped` in traversal order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,re,im,arg_unwrapped\n");
        let pts = self.traversal();
        let mut arg = pts[0].1.arg();
        for (k, (l, v)) in pts.iter().enumerate() {
            if k > 0 {
                let prev = pts[k - 1].1;
                if prev.norm() > 0.0 && v.norm() > 0.0 {
                    arg += (v / prev).arg();
                }
            }
            let lam = if l.is_infinite() {
                if *l < 0.0 { "-inf".to_string() } else { "inf".to_string() }
            } else {
                format!("{l:e}")
            };
            let _ = writeln!(out, "{lam},{:e},{:e},{:e}", v.re, v.im, arg);
        }
        out
    }
}

/// Tolerances for symbol evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SymbolConfig {
    /// Tabulated transforms fail when their error estimate exceeds this
    /// fraction of the kernel scale.
    pub oscillation_tol: f64,
    /// Absolute floor (relative to the kernel scale) for the adaptive route.
    pub quad_eps_abs: f64,
    pub quad_eps_rel: f64,
    pub quad_max_intervals: usize,
}

impl Default for SymbolConfig {
    fn default() -> Self {
        Self {
            oscillation_tol: 1e-3,
            quad_eps_abs: 1e-15,
            quad_eps_rel: 1e-11,
            quad_max_intervals: 50_000,
        }
    }
}

fn check_error(lambda: f64, err: f64, scale: f64, cfg: &SymbolConfig) -> Result<(), SymbolError> {
    if err > cfg.oscillation_tol * scale.max(f64::MIN_POSITIVE) || !err.is_finite() {
        return Err(SymbolError::UnresolvedOscillation { lambda, error: err });
    }
    Ok(())
}

/// `∫ e^{iλt} k(t) dt` on the grid: rational for exp-polynomials, Filon-type
/// for tabulated kernels. The limit at infinity is `0`.
pub fn fourier_transform(spec: &KernelSpec, grid: Arc<LambdaGrid>) -> Result<SymbolSamples, SymbolError> {
    fourier_transform_with(spec, grid, &SymbolConfig::default())
}

pub fn fourier_transform_with(
    spec: &KernelSpec,
    grid: Arc<LambdaGrid>,
    cfg: &SymbolConfig,
) -> Result<SymbolSamples, SymbolError> {
    let scale = spec.scale();
    let (p0, _) = spec.pos().moment(0);
    let (n0, _) = spec.neg().moment(0);
    SymbolSamples::try_from_fn(
        grid,
        SymbolLabel::Custom,
        |l| {
            let (p, pe) = spec.pos().transform(l);
            let (n, ne) = spec.neg().transform(-l);
            check_error(l, pe + ne, scale, cfg)?;
            Ok(p + n)
        },
        p0 + n0,
        Complex64::new(0.0, 0.0),
    )
}

fn quad_config(cfg: &SymbolConfig, scale: f64) -> QuadConfig {
    QuadConfig {
        eps_abs: cfg.quad_eps_abs * scale.max(f64::MIN_POSITIVE),
        eps_rel: cfg.quad_eps_rel,
        max_intervals: cfg.quad_max_intervals,
    }
}

fn window(spec: &KernelSpec, extra_power: u32) -> f64 {
    let eps = 1e-18 * spec.scale().max(f64::MIN_POSITIVE);
    spec.pos()
        .truncation_point(extra_power, eps)
        .max(spec.neg().truncation_point(extra_power, eps))
}

fn breakpoints(spec: &KernelSpec, t_max: f64, lambda: f64) -> Vec<f64> {
    let mut bp = oscillatory_breakpoints(t_max, lambda);
    for h in [spec.pos(), spec.neg()] {
        if let HalfLine::Table(_) = h {
            bp.extend(h.knots().iter().copied().filter(|&s| s > 0.0 && s < t_max));
        }
    }
    bp.sort_by(f64::total_cmp);
    bp.dedup();
    bp
}

/// `∫ e^{iλt} k(t) dt` by adaptive Gauss-Kronrod on kernel samples; an
/// independent route for checking [`fourier_transform`].
pub fn transform_by_quadrature(spec: &KernelSpec, lambda: f64, cfg: &SymbolConfig) -> Result<Complex64, SymbolError> {
    let t_max = window(spec, 0);
    let qc = quad_config(cfg, spec.scale());
    let bp = breakpoints(spec, t_max, lambda);
    let r = integrate_partitioned(
        |s| {
            let w = Complex64::new(0.0, lambda * s).exp();
            w * spec.pos().eval(s) + w.conj() * spec.neg().eval(s)
        },
        &bp,
        qc,
    );
    if !r.converged {
        return Err(SymbolError::UnresolvedOscillation { lambda, error: r.error });
    }
    Ok(r.value)
}

fn expect_label(s: &SymbolSamples, label: SymbolLabel) -> Result<(), SymbolError> {
    if s.label != label {
        return Err(SymbolError::LabelMismatch {
            expected: label,
            found: s.label,
        });
    }
    Ok(())
}

fn expect_subject(m: &MomentSet, subject: MomentSubject) -> Result<f64, SymbolError> {
    if m.subject != subject {
        return Err(SymbolError::CaseMismatch(format!(
            "moments describe {:?}, expected {subject:?}",
            m.subject
        )));
    }
    m.nu0.ok_or_else(|| SymbolError::CaseMismatch("ν0 is not available".into()))
}

fn expect_kernel_level(spec: &KernelSpec, level: Level) -> Result<(), SymbolError> {
    if spec.level() != level {
        return Err(KernelError::LevelMismatch {
            expected: level,
            found: spec.level(),
        }
        .into());
    }
    Ok(())
}

// ∫_0^∞ (1 - cos λs) h and ∫_0^∞ sin λs h from the one-sided transforms.
fn cos_sin_parts(h: &HalfLine, lambda: f64) -> (Complex64, Complex64, f64) {
    let (plus, e1) = h.one_minus_transform(lambda);
    let (minus, e2) = h.one_minus_transform(-lambda);
    ((plus + minus) * 0.5, (plus - minus) * (I * 0.5), e1 + e2)
}

/// `b(λ) = ν0(K̃1) - ∫ e^{iλt} K̃1(t) dt`, evaluated in the split form
/// `∫_0^∞ (1 - cos λt)[K1(t) - K1(-t)] dt - i ∫_0^∞ sin λt [K1(t) + K1(-t)] dt`.
///
/// `b(0) = 0` and `b(±∞) = ν0(K̃1)` are set from the limits.
pub fn eval_b(k1: &KernelSpec, moments: &MomentSet, grid: Arc<LambdaGrid>) -> Result<SymbolSamples, SymbolError> {
    eval_b_with(k1, moments, grid, &SymbolConfig::default())
}

pub fn eval_b_with(
    k1: &KernelSpec,
    moments: &MomentSet,
    grid: Arc<LambdaGrid>,
    cfg: &SymbolConfig,
) -> Result<SymbolSamples, SymbolError> {
    expect_kernel_level(k1, Level::K1)?;
    let nu0 = expect_subject(moments, MomentSubject::TildeK1)?;
    let scale = k1.scale();
    SymbolSamples::try_from_fn(
        grid,
        SymbolLabel::B,
        |l| {
            let (cp, sp, ep) = cos_sin_parts(k1.pos(), l);
            let (cn, sn, en) = cos_sin_parts(k1.neg(), l);
            check_error(l, ep + en, scale, cfg)?;
            Ok((cp - cn) - I * (sp + sn))
        },
        Complex64::new(0.0, 0.0),
        Complex64::new(nu0, 0.0),
    )
}

/// The split form of `b(λ)` with both integrals done by adaptive quadrature
/// of the kernel samples.
pub fn eval_b_quadrature(
    k1: &KernelSpec,
    moments: &MomentSet,
    grid: Arc<LambdaGrid>,
    cfg: &SymbolConfig,
) -> Result<SymbolSamples, SymbolError> {
    expect_kernel_level(k1, Level::K1)?;
    let nu0 = expect_subject(moments, MomentSubject::TildeK1)?;
    let t_max = window(k1, 0);
    let qc = quad_config(cfg, k1.scale());
    SymbolSamples::try_from_fn(
        grid,
        SymbolLabel::B,
        |l| {
            let bp = breakpoints(k1, t_max, l);
            let re = integrate_partitioned(
                |s| {
                    let w = 2.0 * (0.5 * l * s).sin().powi(2);
                    (k1.pos().eval(s) - k1.neg().eval(s)) * w
                },
                &bp,
                qc,
            );
            let im = integrate_partitioned(
                |s| (k1.pos().eval(s) + k1.neg().eval(s)) * (l * s).sin(),
                &bp,
                qc,
            );
            if !re.converged || !im.converged {
                return Err(SymbolError::UnresolvedOscillation {
                    lambda: l,
                    error: re.error + im.error,
                });
            }
            Ok(re.value - I * im.value)
        },
        Complex64::new(0.0, 0.0),
        Complex64::new(nu0, 0.0),
    )
}

/// `a(λ) = (i/λ) b(λ)` with `a(0) = ν1(K̃1)` and `a(±∞) = 0`.
pub fn eval_a(b: &SymbolSamples, moments: &MomentSet) -> Result<SymbolSamples, SymbolError> {
    expect_label(b, SymbolLabel::B)?;
    expect_subject(moments, MomentSubject::TildeK1)?;
    let nu1 = moments
        .nu1
        .ok_or_else(|| SymbolError::CaseMismatch("ν1 is not available".into()))?;
    Ok(SymbolSamples {
        grid: b.grid.clone(),
        values: b
            .grid
            .interior()
            .iter()
            .zip(&b.values)
            .map(|(&l, &v)| I / l * v)
            .collect(),
        value_at_zero: Complex64::new(nu1, 0.0),
        value_at_infinity: Complex64::new(0.0, 0.0),
        label: SymbolLabel::A,
    })
}

/// `d(λ) = ν0(K0) - ∫ e^{iλu} K0(u) du`, with `d(0) = 0`, `d(±∞) = ν0(K0)`.
pub fn eval_d(k0: &KernelSpec, moments: &MomentSet, grid: Arc<LambdaGrid>) -> Result<SymbolSamples, SymbolError> {
    eval_d_with(k0, moments, grid, &SymbolConfig::default())
}

pub fn eval_d_with(
    k0: &KernelSpec,
    moments: &MomentSet,
    grid: Arc<LambdaGrid>,
    cfg: &SymbolConfig,
) -> Result<SymbolSamples, SymbolError> {
    expect_kernel_level(k0, Level::K0)?;
    let nu0 = expect_subject(moments, MomentSubject::K0)?;
    let scale = k0.scale();
    SymbolSamples::try_from_fn(
        grid,
        SymbolLabel::D,
        |l| {
            let (cp, sp, ep) = cos_sin_parts(k0.pos(), l);
            let (cn, sn, en) = cos_sin_parts(k0.neg(), l);
            check_error(l, ep + en, scale, cfg)?;
            Ok((cp + cn) - I * (sp - sn))
        },
        Complex64::new(0.0, 0.0),
        Complex64::new(nu0, 0.0),
    )
}

/// The regular factor that removes the zero of `b` (or `d`) at `λ = 0`:
///
/// * case I: `c(λ) = (1 + i/λ) b(λ)`, `c(0) = ν1`
/// * case II: `c̃(λ) = (1 - i/λ) b(λ)`, `c̃(0) = -ν1`
/// * case III: `c(λ) = (1 + 1/λ²) b(λ)`, `c(0) = ν2/2`
/// * case (α, β): `e(λ) = (1 + 1/λ²) d(λ)`, `e(0) = ν2(K0)/2`
///
/// In every case the value at infinity is `ν0` of the underlying kernel.
pub fn eval_regular_factor(
    case: CaseLabel,
    b_or_d: &SymbolSamples,
    moments: &MomentSet,
) -> Result<SymbolSamples, SymbolError> {
    let moment = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| SymbolError::CaseMismatch(format!("{name} is not available")))
    };
    let (label, at_zero, factor): (SymbolLabel, f64, fn(f64) -> Complex64) = match case {
        CaseLabel::CaseI => {
            expect_label(b_or_d, SymbolLabel::B)?;
            expect_subject(moments, MomentSubject::TildeK1)?;
            let nu1 = moment(moments.nu1, "ν1")?;
            if !(nu1 > 0.0) {
                return Err(SymbolError::CaseMismatch(format!("case I needs ν1 > 0, got {nu1}")));
            }
            (SymbolLabel::CI, nu1, |l| Complex64::new(1.0, 1.0 / l))
        }
        CaseLabel::CaseII => {
            expect_label(b_or_d, SymbolLabel::B)?;
            expect_subject(moments, MomentSubject::TildeK1)?;
            let nu1 = moment(moments.nu1, "ν1")?;
            if !(nu1 < 0.0) {
                return Err(SymbolError::CaseMismatch(format!("case II needs ν1 < 0, got {nu1}")));
            }
            (SymbolLabel::CtildeII, -nu1, |l| Complex64::new(1.0, -1.0 / l))
        }
        CaseLabel::CaseIII => {
            expect_label(b_or_d, SymbolLabel::B)?;
            expect_subject(moments, MomentSubject::TildeK1)?;
            let nu2 = moment(moments.nu2, "ν2")?;
            if !(nu2 > 0.0) {
                return Err(SymbolError::CaseMismatch(format!("case III needs ν2 > 0, got {nu2}")));
            }
            (SymbolLabel::CIII, 0.5 * nu2, |l| Complex64::new(1.0 + 1.0 / (l * l), 0.0))
        }
        CaseLabel::AlphaBeta => {
            expect_label(b_or_d, SymbolLabel::D)?;
            expect_subject(moments, MomentSubject::K0)?;
            let nu2 = moment(moments.nu2, "ν2(K0)")?;
            if !(nu2 > 0.0) {
                return Err(SymbolError::CaseMismatch(format!("case (α, β) needs ν2(K0) > 0, got {nu2}")));
            }
            (SymbolLabel::E, 0.5 * nu2, |l| Complex64::new(1.0 + 1.0 / (l * l), 0.0))
        }
        CaseLabel::Unclassified => {
            return Err(SymbolError::CaseMismatch("no regular factor for an unclassified kernel".into()))
        }
    };
    Ok(SymbolSamples {
        grid: b_or_d.grid.clone(),
        values: b_or_d
            .grid
            .interior()
            .iter()
            .zip(&b_or_d.values)
            .map(|(&l, &v)| factor(l) * v)
            .collect(),
        value_at_zero: Complex64::new(at_zero, 0.0),
        value_at_infinity: b_or_d.value_at_infinity,
        label,
    })
}

/// `Re s(λ) > tol·|s(∞)|` at every interior point; margin is the smallest
/// real part, witness the `λ` where it occurs.
pub fn check_arg_halfplane(s: &SymbolSamples) -> ConditionVerdict {
    check_arg_halfplane_with(s, NONVANISHING_TOL)
}

pub fn check_arg_halfplane_with(s: &SymbolSamples, tol: f64) -> ConditionVerdict {
    let (witness, margin) = s
        .grid
        .interior()
        .iter()
        .zip(&s.values)
        .map(|(&l, v)| (l, v.re))
        .fold((f64::NAN, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let floor = tol * s.value_at_infinity.norm();
    ConditionVerdict {
        condition_id: ConditionId::ArgHalfPlane,
        holds: margin > floor,
        margin,
        witness: if witness.is_nan() { None } else { Some(witness) },
        values: BTreeMap::from([("floor".to_string(), floor)]),
    }
}

fn min_modulus(s: &SymbolSamples) -> (f64, Option<f64>) {
    let mut best = (s.value_at_zero.norm(), Some(0.0));
    if s.value_at_infinity.norm() < best.0 {
        best = (s.value_at_infinity.norm(), Some(f64::INFINITY));
    }
    for (&l, v) in s.grid.interior().iter().zip(&s.values) {
        if v.norm() < best.0 {
            best = (v.norm(), Some(l));
        }
    }
    best
}

/// `min(|values|, |s(0)|, |s(∞)|) > tol·|s(∞)|`.
pub fn check_nonvanishing(s: &SymbolSamples) -> ConditionVerdict {
    check_nonvanishing_with(s, NONVANISHING_TOL)
}

pub fn check_nonvanishing_with(s: &SymbolSamples, tol: f64) -> ConditionVerdict {
    let (margin, witness) = min_modulus(s);
    let floor = tol * s.value_at_infinity.norm();
    ConditionVerdict {
        condition_id: ConditionId::NonVanishing,
        holds: margin > floor,
        margin,
        witness,
        values: BTreeMap::from([("floor".to_string(), floor)]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindingResult {
    pub index: i64,
    pub raw_phase_turns: f64,
    pub max_phase_step: f64,
}

/// Winding number of the closed curve `λ ↦ s(λ)`, `λ` from `-∞` to `+∞`.
///
/// With this orientation `(λ - i)/(λ + i)` has index `+1`.
pub fn winding_index(s: &SymbolSamples) -> Result<WindingResult, SymbolError> {
    winding_index_with(s, NONVANISHING_TOL)
}

pub fn winding_index_with(s: &SymbolSamples, tol: f64) -> Result<WindingResult, SymbolError> {
    let (min_mod, _) = min_modulus(s);
    if !(min_mod > tol * s.value_at_infinity.norm()) {
        return Err(SymbolError::VanishingSymbol { min_modulus: min_mod });
    }
    let pts = s.traversal();
    let mut total = 0.0;
    let mut max_step: f64 = 0.0;
    for w in pts.windows(2) {
        let step = (w[1].1 / w[0].1).arg();
        total += step;
        max_step = max_step.max(step.abs());
    }
    if max_step >= FRAC_PI_2 {
        return Err(SymbolError::UnderResolved { max_step });
    }
    let turns = total / (2.0 * PI);
    Ok(WindingResult {
        index: turns.round() as i64,
        raw_phase_turns: turns,
        max_phase_step: max_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{ExpTerm, MomentSet};
    use proptest::prelude::*;

    fn gamma_family(gamma: f64) -> KernelSpec {
        KernelSpec::closed_form(
            Level::K1,
            vec![ExpTerm::new(1.0, 0, 1.0)],
            vec![ExpTerm::new(gamma, 0, 1.0)],
        )
        .unwrap()
    }

    fn half_exp(level: Level) -> KernelSpec {
        KernelSpec::closed_form(level, vec![ExpTerm::new(0.5, 0, 1.0)], vec![ExpTerm::new(0.5, 0, 1.0)])
            .unwrap()
    }

    fn grid(size: usize) -> Arc<LambdaGrid> {
        Arc::new(LambdaGrid::new(size, 1.0).unwrap())
    }

    fn at(s: &SymbolSamples, lambda: f64) -> Complex64 {
        let k = s
            .grid
            .interior()
            .iter()
            .position(|&l| (l - lambda).abs() < 1e-12)
            .expect("λ on grid");
        s.values[k]
    }

    fn b_of(gamma: f64, size: usize) -> (SymbolSamples, MomentSet) {
        let k1 = gamma_family(gamma);
        let m = MomentSet::for_tilde_k1(&k1).unwrap();
        (eval_b(&k1, &m, grid(size)).unwrap(), m)
    }

    fn b_closed(gamma: f64, l: f64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        (1.0 - gamma) - one / Complex64::new(1.0, -l) + gamma / Complex64::new(1.0, l)
    }

    #[test]
    fn grid_is_symmetric_nested_and_counts_samples() {
        let g = LambdaGrid::new(16, 2.0).unwrap();
        assert_eq!(g.interior().len() + 2, 16);
        let n = g.interior().len();
        for k in 0..n {
            assert_eq!(g.interior()[k], -g.interior()[n - 1 - k]);
            assert!(g.interior()[k] != 0.0);
        }
        assert!(g.interior().windows(2).all(|w| w[0] < w[1]));
        // λ = L at θ = π/4
        assert!(g.interior().iter().any(|&l| (l - 2.0).abs() < 1e-12));
        let r = g.refined();
        for l in g.interior() {
            assert!(r.interior().iter().any(|x| (x - l).abs() <= 1e-12 * l.abs().max(1.0)));
        }
        assert!(LambdaGrid::new(12, 1.0).is_err());
        assert!(LambdaGrid::new(16, 0.0).is_err());
    }

    #[test]
    fn transform_examples() {
        let k1 = gamma_family(0.0);
        let t = crate::kernel::tilde_of(&k1);
        let ft = fourier_transform(&t, grid(16)).unwrap();
        assert!((at(&ft, 1.0) - Complex64::new(0.5, 0.5)).norm() < 1e-15);
        assert_eq!(ft.value_at_infinity, Complex64::new(0.0, 0.0));
        let zero = fourier_transform(&KernelSpec::zero(Level::K1), grid(16)).unwrap();
        assert!(zero.values.iter().all(|v| v.norm() == 0.0));
        let k0 = half_exp(Level::K0);
        let ft = fourier_transform(&k0, grid(64)).unwrap();
        for (&l, v) in ft.grid.interior().iter().zip(&ft.values) {
            let exact = 1.0 / (1.0 + l * l);
            assert!((v - exact).norm() < 1e-14);
            let q = transform_by_quadrature(&k0, l, &SymbolConfig::default()).unwrap();
            assert!((q - exact).norm() < 1e-10 * exact.max(1e-3));
        }
    }

    #[test]
    fn b_examples_and_limits() {
        let (b, m) = b_of(0.0, 16);
        assert!((at(&b, 1.0) - Complex64::new(0.5, -0.5)).norm() < 1e-15);
        assert_eq!(b.value_at_zero, Complex64::new(0.0, 0.0));
        assert_eq!(b.value_at_infinity.re, m.nu0.unwrap());
        for gamma in [0.0, -1.0, -3.0] {
            let (b, _) = b_of(gamma, 256);
            for (&l, v) in b.grid.interior().iter().zip(&b.values) {
                let exact = b_closed(gamma, l);
                assert!((v - exact).norm() <= 1e-12 * exact.norm(), "γ={gamma} λ={l}");
            }
        }
    }

    #[test]
    fn split_form_matches_one_sided_transforms() {
        let k1 = KernelSpec::closed_form(
            Level::K1,
            vec![ExpTerm::new(1.5, 1, 2.0), ExpTerm::new(0.2, 0, 0.5)],
            vec![ExpTerm::new(-0.3, 2, 1.2)],
        )
        .unwrap();
        let m = MomentSet::for_tilde_k1(&k1).unwrap();
        let b = eval_b(&k1, &m, grid(32)).unwrap();
        let HalfLine::Terms(p) = k1.pos() else { unreachable!() };
        let HalfLine::Terms(n) = k1.neg() else { unreachable!() };
        for (&l, v) in b.grid.interior().iter().zip(&b.values) {
            let direct = p.one_minus_transform(l) - n.one_minus_transform(-l);
            assert!((v - direct).norm() < 1e-13 * direct.norm().max(1e-3));
        }
    }

    #[test]
    fn quadrature_route_agrees_with_closed_form() {
        for gamma in [0.0, -1.0, -3.0] {
            let k1 = gamma_family(gamma);
            let m = MomentSet::for_tilde_k1(&k1).unwrap();
            let q = eval_b_quadrature(&k1, &m, grid(128), &SymbolConfig::default()).unwrap();
            for (&l, v) in q.grid.interior().iter().zip(&q.values) {
                let exact = b_closed(gamma, l);
                assert!((v - exact).norm() <= 1e-6 * exact.norm(), "γ={gamma} λ={l}");
            }
        }
    }

    #[test]
    fn a_examples() {
        let (b, m) = b_of(0.0, 16);
        let a = eval_a(&b, &m).unwrap();
        assert_eq!(a.value_at_zero.re, 1.0);
        assert_eq!(a.value_at_infinity.norm(), 0.0);
        let (b, m) = b_of(-1.0, 16);
        let a = eval_a(&b, &m).unwrap();
        assert!((at(&a, 1.0) - I).norm() < 1e-15);
        for ((&l, av), bv) in a.grid.interior().iter().zip(&a.values).zip(&b.values) {
            assert!((av * l / I - bv).norm() <= 1e-12 * bv.norm());
        }
        assert!(matches!(eval_a(&a, &m), Err(SymbolError::LabelMismatch { .. })));
    }

    #[test]
    fn regular_factor_examples() {
        let (b, m) = b_of(0.0, 64);
        let c = eval_regular_factor(CaseLabel::CaseI, &b, &m).unwrap();
        assert_eq!(c.value_at_zero.re, 1.0);
        assert_eq!(c.value_at_infinity.re, 1.0);
        // (1 + i/λ) b ≡ 1 for γ = 0
        assert!(c.values.iter().all(|v| (v - 1.0).norm() < 1e-12));

        let (b, m) = b_of(-1.0, 64);
        let c = eval_regular_factor(CaseLabel::CaseIII, &b, &m).unwrap();
        assert!(c.values.iter().all(|v| (v - 2.0).norm() < 1e-12));
        assert_eq!(c.value_at_zero.re, 2.0);

        let k0 = half_exp(Level::K0);
        let m0 = MomentSet::for_k0(&k0).unwrap();
        let d = eval_d(&k0, &m0, grid(64)).unwrap();
        assert!((at(&d, 1.0) - 0.5).norm() < 1e-15);
        assert_eq!(d.value_at_zero.norm(), 0.0);
        assert_eq!(d.value_at_infinity.re, 1.0);
        let e = eval_regular_factor(CaseLabel::AlphaBeta, &d, &m0).unwrap();
        assert!(e.values.iter().all(|v| (v - 1.0).norm() < 1e-12));
        assert_eq!(e.value_at_zero.re, 1.0);

        let (b, m) = b_of(-3.0, 64);
        assert!(matches!(
            eval_regular_factor(CaseLabel::CaseI, &b, &m),
            Err(SymbolError::CaseMismatch(_))
        ));
        let ct = eval_regular_factor(CaseLabel::CaseII, &b, &m).unwrap();
        assert_eq!(ct.value_at_zero.re, 2.0);
        assert!(check_arg_halfplane(&ct).holds);
    }

    #[test]
    fn halfplane_examples() {
        let (b, _) = b_of(0.0, 256);
        let v = check_arg_halfplane(&b);
        assert!(v.holds);
        assert!(v.margin > 0.0);
        let (b, _) = b_of(1.0, 256);
        let v = check_arg_halfplane(&b);
        assert!(!v.holds);
        assert!(v.margin.abs() < 1e-15);
    }

    #[test]
    fn winding_calibration() {
        for size in [64, 1024, 2048] {
            let s = SymbolSamples::from_fn(
                grid(size),
                SymbolLabel::Custom,
                |l| Complex64::new(l, -1.0) / Complex64::new(l, 1.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(1.0, 0.0),
            );
            let w = winding_index(&s).unwrap();
            assert_eq!(w.index, 1);
            assert!((w.raw_phase_turns - 1.0).abs() < 1e-12);
        }
        let c = SymbolSamples::from_fn(grid(64), SymbolLabel::Custom, |_| 2.0 * I, 2.0 * I, 2.0 * I);
        assert_eq!(winding_index(&c).unwrap().index, 0);
    }

    #[test]
    fn case_two_c1_has_index_minus_one() {
        let (b, m) = b_of(-3.0, 2048);
        let ct = eval_regular_factor(CaseLabel::CaseII, &b, &m).unwrap();
        let c1 = ct.times(Multiplier::PlusOverMinus, SymbolLabel::Custom).times(Multiplier::ImagUnit, SymbolLabel::C1);
        assert_eq!(winding_index(&c1).unwrap().index, -1);
        assert_eq!(winding_index(&ct).unwrap().index, 0);
    }

    #[test]
    fn nonvanishing_examples() {
        let (b, m) = b_of(0.0, 256);
        let c1 = eval_regular_factor(CaseLabel::CaseI, &b, &m).unwrap().times(Multiplier::ImagUnit, SymbolLabel::C1);
        let v = check_nonvanishing(&c1);
        assert!(v.holds);
        assert!(v.margin >= 1.0 - 1e-12);
        let v = check_nonvanishing(&b);
        assert!(!v.holds);
        assert_eq!(v.witness, Some(0.0));
        assert!(matches!(winding_index(&b), Err(SymbolError::VanishingSymbol { .. })));
    }

    #[test]
    fn coarse_grid_is_under_resolved() {
        // e^{40 i θ}-like curve sampled on 8 intervals
        let s = SymbolSamples::from_fn(
            grid(8),
            SymbolLabel::Custom,
            |l| Complex64::new(0.0, 12.0 * l.atan()).exp(),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 6.0 * PI).exp(),
        );
        assert!(matches!(winding_index(&s), Err(SymbolError::UnderResolved { .. })));
    }

    #[test]
    fn csv_has_header_and_all_rows() {
        let (b, _) = b_of(0.0, 16);
        let csv = b.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "lambda,re,im,arg_unwrapped");
        assert_eq!(lines.len(), 1 + 16 + 1);
        assert!(lines[1].starts_with("-inf,"));
        assert!(lines.last().unwrap().starts_with("inf,"));
    }

    proptest! {
        #[test]
        fn winding_is_additive_and_scale_invariant(p in -3i32..=3, q in -3i32..=3, c in 0.1f64..10.0) {
            let g = grid(512);
            let pow = |n: i32| move |l: f64| (Complex64::new(l, -1.0) / Complex64::new(l, 1.0)).powi(n);
            let sign = |n: i32| if n % 2 == 0 { 1.0 } else { -1.0 };
            let s = SymbolSamples::from_fn(g.clone(), SymbolLabel::Custom, pow(p), Complex64::new(sign(p), 0.0), Complex64::new(1.0, 0.0));
            let t = SymbolSamples::from_fn(g.clone(), SymbolLabel::Custom, pow(q), Complex64::new(sign(q), 0.0), Complex64::new(1.0, 0.0));
            let ws = winding_index(&s).unwrap().index;
            let wt = winding_index(&t).unwrap().index;
            prop_assert_eq!(ws, i64::from(p));
            prop_assert_eq!(winding_index(&s.product(&t)).unwrap().index, ws + wt);
            prop_assert_eq!(winding_index(&s.scaled(Complex64::new(c, 0.0))).unwrap().index, ws);
        }

        #[test]
        fn b_is_conjugate_symmetric_for_real_kernels(
            c1 in 0.1f64..3.0, a1 in 0.2f64..4.0, c2 in -2.0f64..2.0, a2 in 0.2f64..4.0, k in 0u32..3
        ) {
            let k1 = KernelSpec::closed_form(
                Level::K1,
                vec![ExpTerm::new(c1, k, a1)],
                vec![ExpTerm::new(c2, 0, a2)],
            ).unwrap();
            let m = MomentSet::for_tilde_k1(&k1).unwrap();
            let b = eval_b(&k1, &m, grid(128)).unwrap();
            prop_assert!(b.conjugate_symmetry_defect() < 1e-12);
        }
    }
}
