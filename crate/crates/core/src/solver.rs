//! Nyström discretization of `∫_0^T K(t - τ) φ(τ) dτ = f(t)` with
//! regularized SVD solves.
//!
//! The operator is compact, so null-space estimates from the discrete
//! spectrum are heuristic and always carry a confidence flag.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{binomial, factorial, ExpPoly, KernelError, KernelSpec, Level};
use crate::spaces::{GridFunction, Quadrature, SpacesError};

pub const DEFAULT_T: f64 = 40.0;
pub const DEFAULT_N: usize = 1024;
pub const DEFAULT_TSVD_THRESHOLD: f64 = 1e-8;
/// Ratio separating a "clean" spectral gap from a gapless spectrum.
const GAP_RATIO: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("regularization removed every singular direction")]
    AllModesDropped,
    #[error("right-hand side has {found} samples on [0, {t_found}], operator expects {expected} on [0, {t_expected}]")]
    GridMismatch {
        expected: usize,
        found: usize,
        t_expected: f64,
        t_found: f64,
    },
    #[error("invalid regularization: {0}")]
    InvalidRegularization(String),
    #[error("SVD did not converge")]
    SvdFailed,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Grid(#[from] SpacesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Regularization {
    /// Keep modes with `σ >= threshold · σ_max`.
    TsvdThreshold { threshold: f64 },
    /// Keep the `rank` largest modes.
    TsvdRank { rank: usize },
    /// Filter factors `σ² / (σ² + μ²)`.
    Tikhonov { parameter: f64 },
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::TsvdThreshold {
            threshold: DEFAULT_TSVD_THRESHOLD,
        }
    }
}

/// `A[i][j] = w_j K(t_i - t_j)` on `t_j = j T / (n - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedOperator {
    t_max: f64,
    weights: Vec<f64>,
    matrix: DMatrix<Complex64>,
    real: bool,
}

impl DiscretizedOperator {
    /// Wraps an arbitrary square matrix on the grid `[0, T]`; used for
    /// synthetic spectra.
    pub fn from_matrix(t_max: f64, matrix: DMatrix<Complex64>) -> Result<Self, SolverError> {
        let n = matrix.nrows();
        if matrix.ncols() != n || n < 2 {
            return Err(SpacesError::InvalidGrid(format!("matrix must be square with n >= 2, got {}x{}", n, matrix.ncols())).into());
        }
        let real = matrix.iter().all(|z| z.im == 0.0);
        Ok(Self {
            t_max,
            weights: Quadrature::Trapezoid.weights(n, t_max / (n - 1) as f64),
            matrix,
            real,
        })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn step(&self) -> f64 {
        self.t_max / (self.n() - 1) as f64
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    fn check_grid(&self, f: &GridFunction) -> Result<(), SolverError> {
        if f.n() != self.n() || (f.t_max() - self.t_max).abs() > 1e-12 * self.t_max {
            return Err(SolverError::GridMismatch {
                expected: self.n(),
                found: f.n(),
                t_expected: self.t_max,
                t_found: f.t_max(),
            });
        }
        Ok(())
    }

    fn grid_function(&self, v: &DVector<Complex64>) -> GridFunction {
        GridFunction::new(self.t_max, v.iter().copied().collect(), Quadrature::Trapezoid)
            .expect("operator grid is valid")
    }

    /// `A φ` as a grid function.
    pub fn apply(&self, phi: &GridFunction) -> Result<GridFunction, SolverError> {
        self.check_grid(phi)?;
        let x = DVector::from_column_slice(phi.samples());
        Ok(self.grid_function(&(&self.matrix * x)))
    }
}

/// Trapezoid Nyström matrix for a level-`K` kernel, applied separately on
/// `[0, t_i]` and `[t_i, T]`: interior diagonal entries use the mean of the
/// one-sided limits `K(0±)`, the first row uses `K(0-)` and the last `K(0+)`.
pub fn discretize(k: &KernelSpec, t_max: f64, n: usize) -> Result<DiscretizedOperator, SolverError> {
    if k.level() != Level::K {
        return Err(KernelError::LevelMismatch {
            expected: Level::K,
            found: k.level(),
        }
        .into());
    }
    if n < 16 || !(t_max > 0.0) {
        return Err(SpacesError::InvalidGrid(format!("need n >= 16 and T > 0, got n = {n}, T = {t_max}")).into());
    }
    let h = t_max / (n - 1) as f64;
    let weights = Quadrature::Trapezoid.weights(n, h);
    // Toeplitz: one kernel value per lag
    let lag: Vec<Complex64> = (0..2 * n - 1).map(|d| k.eval((d as f64 - (n - 1) as f64) * h)).collect();
    let mut matrix = DMatrix::from_fn(n, n, |i, j| lag[i + n - 1 - j] * weights[j]);
    matrix[(0, 0)] = k.neg().eval(0.0) * weights[0];
    matrix[(n - 1, n - 1)] = k.pos().eval(0.0) * weights[n - 1];
    Ok(DiscretizedOperator {
        t_max,
        weights,
        real: lag.iter().all(|z| z.im == 0.0),
        matrix,
    })
}

/// `f = A φ*`.
pub fn manufacture_rhs(a: &DiscretizedOperator, phi_star: &GridFunction) -> Result<GridFunction, SolverError> {
    a.apply(phi_star)
}

// ∫_0^t τ^n e^{-βτ} dτ
fn lower_gamma_poly(n: u32, beta: f64, t: f64) -> f64 {
    let x = beta * t;
    if x.abs() <= 1.0 {
        // Σ (-β)^m t^{n+m+1} / (m! (n+m+1))
        let mut term = t.powi(n as i32 + 1);
        let mut sum = term / (n + 1) as f64;
        for m in 1..60 {
            term *= -x / m as f64;
            let add = term / (n + m + 1) as f64;
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        let mut partial = 0.0;
        let mut p = 1.0;
        for j in 0..=n {
            if j > 0 {
                p *= x / j as f64;
            }
            partial += p;
        }
        factorial(n) / beta.powi(n as i32 + 1) * (1.0 - (-x).exp() * partial)
    }
}

/// Exact half-line convolution `f(t) = ∫_0^∞ K(t - τ) φ*(τ) dτ` sampled on
/// the grid, for exp-polynomial `K` and `φ*`. Returns `None` for tabulated
/// kernels.
pub fn manufactured_closed_form(k: &KernelSpec, phi_star: &ExpPoly, t_max: f64, n: usize) -> Option<GridFunction> {
    let (pos, neg) = k.terms()?;
    let f = |t: f64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for p in phi_star.terms() {
            // τ < t: (t - τ)^k e^{-a(t-τ)} τ^q e^{-bτ}
            for kt in pos.terms() {
                let beta = p.a - kt.a;
                let mut s = 0.0;
                for i in 0..=kt.k {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    s += sign * binomial(kt.k, i) * t.powi((kt.k - i) as i32) * lower_gamma_poly(i + p.k, beta, t);
                }
                acc += kt.c * p.c * (-kt.a * t).exp() * s;
            }
            // τ > t: (τ - t)^k e^{-a(τ-t)} τ^q e^{-bτ}, τ = t + s
            for kt in neg.terms() {
                let rate = kt.a + p.a;
                let s: f64 = (0..=p.k)
                    .map(|i| {
                        binomial(p.k, i) * t.powi((p.k - i) as i32) * factorial(kt.k + i)
                            / rate.powi((kt.k + i + 1) as i32)
                    })
                    .sum();
                acc += kt.c * p.c * (-p.a * t).exp() * s;
            }
        }
        acc
    };
    GridFunction::from_fn(t_max, n, f)
        .ok()
        .map(|g| g.with_quadrature(Quadrature::Trapezoid))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullDimEstimate {
    pub count: usize,
    pub threshold_ratio: f64,
    pub confidence: Confidence,
    /// Above roundoff, the spectrum decays by at least the gap ratio while
    /// no consecutive ratio reaches it.
    pub gapless: bool,
    /// Ratio across the threshold: last kept over first dropped.
    pub boundary_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub solution: GridFunction,
    /// `‖A x - f‖` in the grid `L²` norm, recomputed by multiplication.
    pub residual_norm: f64,
    pub singular_values: Vec<f64>,
    pub regularization: Regularization,
    pub rank_used: usize,
    pub estimated_null_dim: NullDimEstimate,
}

impl SolveResult {
    /// `t,re,im` rows of the solution.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,re,im\n");
        for (j, v) in self.solution.samples().iter().enumerate() {
            out.push_str(&format!("{:e},{:e},{:e}\n", self.solution.t(j), v.re, v.im));
        }
        out
    }
}

/// Thin SVD `W^{1/2} A W^{-1/2} = U Σ V^H` with `W` the quadrature weights,
/// i.e. of the operator between grid `L²` spaces. Real when `A` is.
struct Svd {
    u: DMatrix<Complex64>,
    v_t: DMatrix<Complex64>,
    sigma: Vec<f64>,
    sqrt_w: Vec<f64>,
}

fn svd(a: &DiscretizedOperator) -> Result<Svd, SolverError> {
    let sqrt_w: Vec<f64> = a.weights.iter().map(|w| w.sqrt()).collect();
    let scale = |i: usize, j: usize| sqrt_w[i] / sqrt_w[j];
    let n = a.n();
    // faer's blocked SVD; nalgebra's is an order of magnitude slower at n = 1024
    let (u, v_t, s) = if a.real {
        let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a.matrix[(i, j)].re * scale(i, j));
        let d = m.thin_svd().map_err(|_| SolverError::SvdFailed)?;
        let (fu, fv, fs) = (d.U(), d.V(), d.S().column_vector());
        (
            DMatrix::from_fn(n, n, |i, j| Complex64::new(fu[(i, j)], 0.0)),
            DMatrix::from_fn(n, n, |i, j| Complex64::new(fv[(j, i)], 0.0)),
            (0..n).map(|k| fs[k]).collect::<Vec<f64>>(),
        )
    } else {
        let m = faer::Mat::<faer::c64>::from_fn(n, n, |i, j| {
            let z = a.matrix[(i, j)] * scale(i, j);
            faer::c64::new(z.re, z.im)
        });
        let d = m.thin_svd().map_err(|_| SolverError::SvdFailed)?;
        let (fu, fv, fs) = (d.U(), d.V(), d.S().column_vector());
        (
            DMatrix::from_fn(n, n, |i, j| Complex64::new(fu[(i, j)].re, fu[(i, j)].im)),
            DMatrix::from_fn(n, n, |i, j| Complex64::new(fv[(j, i)].re, -fv[(j, i)].im)),
            (0..n).map(|k| fs[k].re).collect::<Vec<f64>>(),
        )
    };
    // sort defensively; the filters below rely on a nonincreasing spectrum
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    Ok(Svd {
        u: DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]),
        v_t: DMatrix::from_fn(order.len(), v_t.ncols(), |r, c| v_t[(order[r], c)]),
        sigma: order.iter().map(|&k| s[k]).collect(),
        sqrt_w,
    })
}

impl Svd {
    /// Coefficients `u_k^H W^{1/2} f`.
    fn project(&self, f: &GridFunction) -> DVector<Complex64> {
        let rhs = DVector::from_fn(f.n(), |i, _| f.samples()[i] * self.sqrt_w[i]);
        self.u.adjoint() * rhs
    }

    /// `W^{-1/2} V y`.
    fn synthesize(&self, y: &DVector<Complex64>) -> DVector<Complex64> {
        let x = self.v_t.adjoint() * y;
        DVector::from_fn(x.len(), |i, _| x[i] / self.sqrt_w[i])
    }
}

fn null_estimate(sigma: &[f64], ratio: f64) -> NullDimEstimate {
    let smax = sigma.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return NullDimEstimate {
            count: sigma.len(),
            threshold_ratio: ratio,
            confidence: Confidence::High,
            gapless: false,
            boundary_gap: f64::INFINITY,
        };
    }
    let cut = ratio * smax;
    let count = sigma.iter().filter(|&&s| s < cut).count();
    let kept = sigma.len() - count;
    let boundary_gap = if count == 0 {
        sigma[kept - 1] / cut
    } else {
        sigma[kept - 1] / sigma[kept]
    };
    // roundoff-level values are exact discrete null directions, not spectrum
    let floor = sigma.len() as f64 * f64::EPSILON * smax;
    let significant: Vec<f64> = sigma.iter().copied().filter(|&s| s >= floor).collect();
    let decays = smax >= GAP_RATIO * significant.last().copied().unwrap_or(smax);
    let gapless = decays && significant.windows(2).all(|w| w[0] < GAP_RATIO * w[1]);
    let confidence = if !gapless && boundary_gap >= GAP_RATIO {
        Confidence::High
    } else {
        Confidence::Low
    };
    NullDimEstimate {
        count,
        threshold_ratio: ratio,
        confidence,
        gapless,
        boundary_gap,
    }
}

/// Counts singular values below `threshold_ratio · σ_max` and returns the
/// matching right singular functions, unit in the grid norm.
pub fn estimate_null_dim(
    a: &DiscretizedOperator,
    threshold_ratio: f64,
) -> Result<(NullDimEstimate, Vec<GridFunction>), SolverError> {
    let d = svd(a)?;
    let est = null_estimate(&d.sigma, threshold_ratio);
    let n = d.sigma.len();
    let basis = (n - est.count..n)
        .map(|k| {
            let e = DVector::from_fn(n, |i, _| Complex64::new(if i == k { 1.0 } else { 0.0 }, 0.0));
            a.grid_function(&d.synthesize(&e))
        })
        .collect();
    Ok((est, basis))
}

fn filter_factors(sigma: &[f64], method: Regularization) -> Result<Vec<f64>, SolverError> {
    let smax = sigma.first().copied().unwrap_or(0.0);
    let f: Vec<f64> = match method {
        Regularization::TsvdThreshold { threshold } => {
            if !(threshold >= 0.0) {
                return Err(SolverError::InvalidRegularization(format!("threshold {threshold}")));
            }
            sigma
                .iter()
                .map(|&s| if s > 0.0 && s >= threshold * smax { 1.0 } else { 0.0 })
                .collect()
        }
        Regularization::TsvdRank { rank } => sigma
            .iter()
            .enumerate()
            .map(|(k, &s)| if k < rank && s > 0.0 { 1.0 } else { 0.0 })
            .collect(),
        Regularization::Tikhonov { parameter } => {
            if !(parameter > 0.0) {
                return Err(SolverError::InvalidRegularization(format!("Tikhonov parameter {parameter}")));
            }
            sigma.iter().map(|&s| s * s / (s * s + parameter * parameter)).collect()
        }
    };
    if f.iter().all(|&x| x == 0.0) {
        return Err(SolverError::AllModesDropped);
    }
    Ok(f)
}

/// Filtered SVD solve in the grid `L²` geometry; with every mode kept this
/// is the minimum-norm least-squares solution.
pub fn solve_regularized(
    a: &DiscretizedOperator,
    f: &GridFunction,
    method: Regularization,
) -> Result<SolveResult, SolverError> {
    a.check_grid(f)?;
    let d = svd(a)?;
    let filt = filter_factors(&d.sigma, method)?;
    let rhs = DVector::from_column_slice(f.samples());
    let coeff = d.project(f);
    let scaled = DVector::from_fn(d.sigma.len(), |k, _| {
        if filt[k] == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            coeff[k] * (filt[k] / d.sigma[k])
        }
    });
    let x = d.synthesize(&scaled);
    let solution = a.grid_function(&x);
    let residual = a.grid_function(&(&a.matrix * &x - &rhs));
    let threshold = match method {
        Regularization::TsvdThreshold { threshold } => threshold,
        _ => DEFAULT_TSVD_THRESHOLD,
    };
    Ok(SolveResult {
        solution,
        residual_norm: residual.norm(),
        rank_used: filt.iter().filter(|&&x| x > 0.5).count(),
        estimated_null_dim: null_estimate(&d.sigma, threshold),
        singular_values: d.sigma,
        regularization: method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_k_from_k1, ExpTerm};
    use crate::quad::{integrate, QuadConfig};
    use proptest::prelude::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn kernel(pos: Vec<ExpTerm>, neg: Vec<ExpTerm>) -> KernelSpec {
        KernelSpec::closed_form(Level::K, pos, neg).unwrap()
    }

    fn gamma_k(gamma: f64) -> KernelSpec {
        let k1 = KernelSpec::closed_form(Level::K1, vec![ExpTerm::new(1.0, 0, 1.0)], vec![ExpTerm::new(gamma, 0, 1.0)]).unwrap();
        build_k_from_k1(&k1).unwrap()
    }

    fn half_exp() -> KernelSpec {
        kernel(vec![ExpTerm::new(0.5, 0, 1.0)], vec![ExpTerm::new(0.5, 0, 1.0)])
    }

    fn exp_decay() -> ExpPoly {
        ExpPoly::new(vec![ExpTerm::new(1.0, 0, 1.0)]).unwrap()
    }

    fn grid_fn(t_max: f64, n: usize, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_fn(t_max, n, |t| c(f(t))).unwrap()
    }

    // ∫_0^T K(t - τ) φ(τ) dτ by adaptive quadrature, split at τ = t
    fn convolution_oracle(k: &KernelSpec, phi: impl Fn(f64) -> f64, t: f64, t_max: f64) -> Complex64 {
        let g = |tau: f64| k.eval(t - tau) * phi(tau);
        let cfg = QuadConfig::default();
        integrate(g, 0.0, t, cfg).value + integrate(g, t, t_max, cfg).value
    }

    #[test]
    fn matrix_structure() {
        let a = discretize(&gamma_k(0.0), 10.0, 64).unwrap();
        assert!(a.is_real());
        for i in 0..64 {
            for j in i + 1..64 {
                assert_eq!(a.matrix()[(i, j)].norm(), 0.0);
            }
        }
        let z = discretize(&KernelSpec::zero(Level::K), 10.0, 32).unwrap();
        assert!(z.matrix().iter().all(|x| x.norm() == 0.0));
        let s = discretize(&half_exp(), 10.0, 64).unwrap();
        let w = s.weights();
        for i in 0..64 {
            for j in 0..64 {
                let lhs = s.matrix()[(i, j)] / w[j];
                let rhs = s.matrix()[(j, i)] / w[i];
                assert!((lhs - rhs).norm() < 1e-15);
            }
        }
        assert!(matches!(
            discretize(&KernelSpec::zero(Level::K1), 10.0, 32),
            Err(SolverError::Kernel(KernelError::LevelMismatch { .. }))
        ));
    }

    #[test]
    fn closed_form_rhs_matches_quadrature_oracle() {
        let k = kernel(
            vec![ExpTerm::new(1.0, 1, 2.0), ExpTerm::new(0.3, 0, 1.0)],
            vec![ExpTerm::new(-0.7, 2, 1.5)],
        );
        let phi = ExpPoly::new(vec![ExpTerm::new(1.0, 1, 1.0), ExpTerm::new(0.5, 0, 2.0)]).unwrap();
        let t_max = 40.0;
        let f = manufactured_closed_form(&k, &phi, t_max, 64).unwrap();
        for j in (0..64).step_by(7) {
            let t = f.t(j);
            let want = convolution_oracle(&k, |s| phi.eval(s).re, t, t_max);
            assert!((f.samples()[j] - want).norm() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn closed_form_examples() {
        let f = manufactured_closed_form(&gamma_k(0.0), &exp_decay(), 40.0, 256).unwrap();
        for j in 0..256 {
            let t = f.t(j);
            assert!((f.samples()[j] - t * (-t).exp()).norm() < 1e-14);
        }
        let f = manufactured_closed_form(&half_exp(), &exp_decay(), 40.0, 256).unwrap();
        for j in 0..256 {
            let t = f.t(j);
            assert!((f.samples()[j] - (0.5 * t + 0.25) * (-t).exp()).norm() < 1e-14);
        }
        let zero = ExpPoly::zero();
        let f = manufactured_closed_form(&half_exp(), &zero, 40.0, 32).unwrap();
        assert_eq!(f.norm(), 0.0);
    }

    #[test]
    fn lower_gamma_matches_quadrature() {
        for n in 0..4 {
            for beta in [-2.0, -0.01, 0.0, 1e-9, 0.3, 5.0] {
                for t in [0.1, 1.0, 7.0] {
                    let want = integrate(
                        |s| c(s.powi(n as i32) * (-beta * s).exp()),
                        0.0,
                        t,
                        QuadConfig::default(),
                    )
                    .value
                    .re;
                    let got = lower_gamma_poly(n, beta, t);
                    assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-300), "n={n} β={beta} t={t}");
                }
            }
        }
    }

    #[test]
    fn discretization_is_quadrature_consistent() {
        for k in [gamma_k(0.0), gamma_k(-1.0), gamma_k(-3.0), half_exp()] {
            let a = discretize(&k, 40.0, 1024).unwrap();
            let phi = grid_fn(40.0, 1024, |t| (-t).exp());
            let f = manufacture_rhs(&a, &phi).unwrap();
            let exact = manufactured_closed_form(&k, &exp_decay(), 40.0, 1024).unwrap();
            assert!(f.relative_error(&exact) <= 1e-3);
        }
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let a = discretize(&gamma_k(0.0), 10.0, 64).unwrap();
        let r = solve_regularized(&a, &GridFunction::zeros(10.0, 64).unwrap(), Regularization::default()).unwrap();
        assert_eq!(r.solution.norm(), 0.0);
        assert_eq!(r.residual_norm, 0.0);
    }

    #[test]
    fn zero_kernel_drops_everything() {
        let a = discretize(&KernelSpec::zero(Level::K), 10.0, 32).unwrap();
        let f = grid_fn(10.0, 32, |t| t);
        assert_eq!(solve_regularized(&a, &f, Regularization::default()), Err(SolverError::AllModesDropped));
        let (est, basis) = estimate_null_dim(&a, 1e-8).unwrap();
        assert_eq!(est.count, 32);
        assert_eq!(est.confidence, Confidence::High);
        assert_eq!(basis.len(), 32);
    }

    #[test]
    fn synthetic_gap_gives_confident_count() {
        let mut m = DMatrix::<Complex64>::identity(20, 20);
        m[(7, 7)] = c(0.0);
        let a = DiscretizedOperator::from_matrix(1.0, m).unwrap();
        let (est, basis) = estimate_null_dim(&a, 1e-8).unwrap();
        assert_eq!(est.count, 1);
        assert_eq!(est.confidence, Confidence::High);
        assert!(!est.gapless);
        assert!((basis[0].norm() - 1.0).abs() < 1e-12);
        assert!(basis[0].samples().iter().enumerate().all(|(j, v)| j == 7 || v.norm() == 0.0));
    }

    #[test]
    fn compact_operator_spectrum_is_gapless() {
        let a = discretize(&gamma_k(0.0), 20.0, 256).unwrap();
        let (est, basis) = estimate_null_dim(&a, 1e-8).unwrap();
        assert!(est.gapless);
        assert_eq!(est.confidence, Confidence::Low);
        // the zero first row leaves the parasitic mode (-1)^j e^{-t_j}
        assert_eq!(est.count, 1);
        let v = &basis[0];
        let ratio = v.samples()[1] / v.samples()[0];
        assert!((ratio + (-v.step()).exp()).norm() < 1e-8);
    }

    #[test]
    fn manufactured_recovery() {
        for k in [gamma_k(0.0), half_exp()] {
            let a = discretize(&k, 40.0, 1024).unwrap();
            let f = manufactured_closed_form(&k, &exp_decay(), 40.0, 1024).unwrap();
            let r = solve_regularized(&a, &f, Regularization::default()).unwrap();
            let phi = grid_fn(40.0, 1024, |t| (-t).exp());
            let err = r.solution.relative_error(&phi);
            assert!(err < 1e-2, "{err}");
            assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
            // residual recomputed by multiplication
            let direct = a.apply(&r.solution).unwrap().relative_error(&f) * f.norm();
            assert!((direct - r.residual_norm).abs() <= 1e-12 * f.norm());
        }
    }

    #[test]
    fn refinement_does_not_degrade_recovery() {
        let k = gamma_k(0.0);
        let err = |n: usize| {
            let a = discretize(&k, 40.0, n).unwrap();
            let f = manufactured_closed_form(&k, &exp_decay(), 40.0, n).unwrap();
            let r = solve_regularized(&a, &f, Regularization::default()).unwrap();
            r.solution.relative_error(&grid_fn(40.0, n, |t| (-t).exp()))
        };
        let (coarse, fine) = (err(256), err(512));
        assert!(fine <= 2.0 * coarse, "{coarse} -> {fine}");
    }

    #[test]
    fn tikhonov_and_rank_options() {
        let k = half_exp();
        let a = discretize(&k, 20.0, 128).unwrap();
        let f = manufactured_closed_form(&k, &exp_decay(), 20.0, 128).unwrap();
        let r = solve_regularized(&a, &f, Regularization::Tikhonov { parameter: 1e-6 }).unwrap();
        assert!(r.residual_norm < 1e-3 * f.norm());
        let r = solve_regularized(&a, &f, Regularization::TsvdRank { rank: 5 }).unwrap();
        assert_eq!(r.rank_used, 5);
        assert!(matches!(
            solve_regularized(&a, &f, Regularization::Tikhonov { parameter: 0.0 }),
            Err(SolverError::InvalidRegularization(_))
        ));
        let short = GridFunction::zeros(20.0, 64).unwrap();
        assert!(matches!(solve_regularized(&a, &short, Regularization::default()), Err(SolverError::GridMismatch { .. })));
    }

    #[test]
    fn complex_kernel_path() {
        let k = kernel(vec![ExpTerm::new(Complex64::new(1.0, 0.5), 0, 1.0)], vec![ExpTerm::new(0.2, 0, 2.0)]);
        let a = discretize(&k, 20.0, 128).unwrap();
        assert!(!a.is_real());
        let f = manufactured_closed_form(&k, &exp_decay(), 20.0, 128).unwrap();
        let r = solve_regularized(&a, &f, Regularization::default()).unwrap();
        assert!(r.residual_norm < 1e-6 * f.norm());
    }

    #[test]
    fn csv_has_three_columns() {
        let a = discretize(&gamma_k(0.0), 10.0, 32).unwrap();
        let f = grid_fn(10.0, 32, |t| t * (-t).exp());
        let r = solve_regularized(&a, &f, Regularization::default()).unwrap();
        let csv = r.to_csv();
        assert_eq!(csv.lines().next(), Some("t,re,im"));
        assert_eq!(csv.lines().count(), 33);
        assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 3));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn truncation_residual_is_bounded_by_dropped_energy(rank in 1usize..40, p in 0.3f64..3.0) {
            let k = half_exp();
            let n = 48;
            let a = discretize(&k, 12.0, n).unwrap();
            let f = grid_fn(12.0, n, |t| (-p * t).exp() * (1.0 + t).sin());
            let d = svd(&a).unwrap();
            let coeff = d.project(&f);
            let dropped: f64 = coeff.iter().skip(rank).map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let full = solve_regularized(&a, &f, Regularization::TsvdRank { rank: n }).unwrap();
            let cut = solve_regularized(&a, &f, Regularization::TsvdRank { rank }).unwrap();
            // the trapezoid grid norm is the weighted Euclidean norm of the SVD
            prop_assert!(cut.residual_norm <= (full.residual_norm + dropped) * (1.0 + 1e-9) + 1e-14);
        }
    }
}
