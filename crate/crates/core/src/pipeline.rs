//! End-to-end analysis: moments, conditions, symbols, winding, the
//! solvability report and, on request, a regularized solve.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{classify_with, solvability_report, CaseLabel, ClassifyConfig, ClassifyError, SolvabilityReport};
use crate::config::{AnalysisConfig, ConfigError};
use crate::kernel::{
    build_k1_from_k0, build_k_from_k1, tilde_of, verify_conditions, ConditionId, ConditionVerdict, ExpPoly, ExpTerm,
    HalfLine, KernelError, KernelSpec, Level, MomentSet,
};
use crate::quad::{integrate_partitioned, QuadConfig};
use crate::solver::{
    discretize, manufacture_rhs, manufactured_closed_form, solve_regularized, NullDimEstimate, Regularization,
    SolveResult, SolverError,
};
use crate::spaces::{GridFunction, SpacesError};
use crate::spec_file::SchemaError;
use crate::symbol::{
    check_arg_halfplane_with, check_nonvanishing_with, eval_a, eval_b_quadrature, eval_b_with, eval_d_with,
    eval_regular_factor, fourier_transform_with, winding_index_with, LambdaGrid, Multiplier, SymbolError,
    SymbolLabel, SymbolSamples, WindingResult,
};

pub const REPORT_SCHEMA: &str = "whfk-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Analyze,
    Classify,
    Solve,
    Verify,
}

/// Outcome of a run; each has a distinct process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    VerificationFailed,
    Unclassified,
    VanishingSymbol,
    IndexMismatch,
    UnderResolved,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::VerificationFailed => 1,
            Status::Unclassified => 3,
            Status::VanishingSymbol => 4,
            Status::IndexMismatch => 5,
            Status::UnderResolved => 6,
        }
    }
}

/// Exit code for malformed input (schema, config, missing right-hand side).
pub const EXIT_INPUT: i32 = 2;
/// Exit code for any other failure.
pub const EXIT_OTHER: i32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solve needs a right-hand side file or the manufactured-solution flag")]
    MissingRhs,
    #[error("kernel: {0}")]
    Kernel(#[from] KernelError),
    #[error("symbol: {0}")]
    Symbol(#[from] SymbolError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("grid function: {0}")]
    Grid(#[from] SpacesError),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Schema(_)
            | PipelineError::Config(_)
            | PipelineError::MissingRhs
            | PipelineError::Grid(_)
            | PipelineError::Solver(SolverError::GridMismatch { .. } | SolverError::InvalidRegularization(_)) => EXIT_INPUT,
            PipelineError::Symbol(SymbolError::VanishingSymbol { .. }) => Status::VanishingSymbol.exit_code(),
            PipelineError::Symbol(SymbolError::UnderResolved { .. }) => Status::UnderResolved.exit_code(),
            _ => EXIT_OTHER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RhsSource {
    None,
    Given(GridFunction),
    /// `φ* = e^{-t}`; `f` in closed form when the kernel is an exp-polynomial.
    Manufactured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "representation", rename_all = "snake_case")]
pub enum KernelEcho {
    ClosedForm {
        level: Level,
        pos_terms: Vec<ExpTerm>,
        neg_terms: Vec<ExpTerm>,
    },
    Tabulated {
        level: Level,
        pos_nodes: Vec<f64>,
        pos_values: Vec<Complex64>,
        pos_tail_rate: f64,
        neg_nodes: Vec<f64>,
        neg_values: Vec<Complex64>,
        neg_tail_rate: f64,
    },
}

impl KernelEcho {
    fn of(spec: &KernelSpec) -> Self {
        match (spec.pos(), spec.neg()) {
            (HalfLine::Table(p), HalfLine::Table(n)) => KernelEcho::Tabulated {
                level: spec.level(),
                pos_nodes: p.nodes().to_vec(),
                pos_values: p.values().to_vec(),
                pos_tail_rate: p.tail_rate(),
                neg_nodes: n.nodes().to_vec(),
                neg_values: n.values().to_vec(),
                neg_tail_rate: n.tail_rate(),
            },
            _ => {
                let (p, n) = spec.terms().expect("closed-form halves");
                KernelEcho::ClosedForm {
                    level: spec.level(),
                    pos_terms: p.terms().to_vec(),
                    neg_terms: n.terms().to_vec(),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSummary {
    pub label: SymbolLabel,
    pub description: String,
    pub grid_size: usize,
    pub map_parameter: f64,
    pub value_at_zero: Complex64,
    pub value_at_infinity: Complex64,
    pub min_modulus: f64,
    pub conjugate_symmetry_defect: f64,
    pub checks: Vec<ConditionVerdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindingRole {
    /// The case's regular factor before any rational correction.
    Regular,
    /// `C(λ)` of `a = ρ₊ C ρ₋`; its index is κ.
    Chosen,
    /// The bracket with the orientation as printed, `((λ-i)/(λ+i))·(…)`.
    PrintedOrientation,
    /// The Case II bracket on the `f`-route, with `ρ₋ = 1/(λ-i)`.
    FRoute,
    /// `C(λ)` on the grid refined by two.
    ChosenRefined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingEntry {
    pub factor: String,
    pub role: WindingRole,
    pub grid_size: usize,
    pub tol_nonvanishing: f64,
    pub result: Option<WindingResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub t_max: f64,
    pub n: usize,
    pub regularization: Regularization,
    pub rhs_source: String,
    pub residual_norm: f64,
    pub relative_residual: f64,
    pub rank_used: usize,
    pub solution_norm: f64,
    pub singular_values: Vec<f64>,
    pub estimated_null_dim: NullDimEstimate,
    /// Relative grid-`L²` error against `φ* = e^{-t}` for manufactured runs.
    pub manufactured_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: String,
    pub tool_version: String,
    pub command: Command,
    pub status: Status,
    pub exit_code: i32,
    pub messages: Vec<String>,
    pub config: AnalysisConfig,
    pub kernel: KernelEcho,
    pub moments: Vec<MomentSet>,
    pub conditions: Vec<ConditionVerdict>,
    pub symbols: Vec<SymbolSummary>,
    pub windings: Vec<WindingEntry>,
    pub case: Option<CaseLabel>,
    pub solvability: Option<SolvabilityReport>,
    pub solve: Option<SolveSummary>,
    pub verification: Vec<OracleCheck>,
}

impl ReportDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable") + "\n"
    }

    fn set_status(&mut self, status: Status, message: impl Into<String>) {
        if self.status == Status::Ok {
            self.status = status;
            self.exit_code = status.exit_code();
        }
        self.messages.push(message.into());
    }
}

/// Data for CSV side files; not part of the comparable report body.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: ReportDocument,
    pub symbols: Vec<SymbolSamples>,
    pub solution: Option<SolveResult>,
}

fn summarize(s: &SymbolSamples, description: &str, checks: Vec<ConditionVerdict>) -> SymbolSummary {
    let min_modulus = s
        .values
        .iter()
        .map(|v| v.norm())
        .fold(s.value_at_zero.norm().min(s.value_at_infinity.norm()), f64::min);
    SymbolSummary {
        label: s.label,
        description: description.to_string(),
        grid_size: s.grid.size(),
        map_parameter: s.grid.map_parameter(),
        value_at_zero: s.value_at_zero,
        value_at_infinity: s.value_at_infinity,
        min_modulus,
        conjugate_symmetry_defect: s.conjugate_symmetry_defect(),
        checks,
    }
}

/// Symbols evaluated for one kernel on one grid.
struct Symbols {
    b: Option<SymbolSamples>,
    d: Option<SymbolSamples>,
    a: SymbolSamples,
}

struct Levels {
    k: KernelSpec,
    k1: Option<KernelSpec>,
    k0: Option<KernelSpec>,
}

fn levels(spec: &KernelSpec) -> Result<Levels, KernelError> {
    Ok(match spec.level() {
        Level::K => Levels {
            k: spec.clone(),
            k1: None,
            k0: None,
        },
        Level::K1 => Levels {
            k: build_k_from_k1(spec)?,
            k1: Some(spec.clone()),
            k0: None,
        },
        Level::K0 => {
            let k1 = build_k1_from_k0(spec)?;
            Levels {
                k: build_k_from_k1(&k1)?,
                k1: Some(k1),
                k0: Some(spec.clone()),
            }
        }
    })
}

fn eval_symbols(
    lv: &Levels,
    m1: Option<&MomentSet>,
    m0: Option<&MomentSet>,
    grid: Arc<LambdaGrid>,
    cfg: &AnalysisConfig,
) -> Result<Symbols, PipelineError> {
    let b = match (&lv.k1, m1) {
        (Some(k1), Some(m)) => Some(eval_b_with(k1, m, grid.clone(), &cfg.symbol)?),
        _ => None,
    };
    let d = match (&lv.k0, m0) {
        (Some(k0), Some(m)) => Some(eval_d_with(k0, m, grid.clone(), &cfg.symbol)?),
        _ => None,
    };
    let a = match (&b, m1) {
        (Some(b), Some(m)) => eval_a(b, m)?,
        _ => {
            let mut a = fourier_transform_with(&lv.k, grid, &cfg.symbol)?;
            a.label = SymbolLabel::A;
            a
        }
    };
    Ok(Symbols { b, d, a })
}

struct Factors {
    regular: (String, SymbolSamples),
    chosen: (String, SymbolSamples),
    extra: Vec<(String, WindingRole, SymbolSamples)>,
}

fn factors(case: CaseLabel, sym: &Symbols, m1: &MomentSet, m0: Option<&MomentSet>) -> Result<Factors, SymbolError> {
    let b = || sym.b.as_ref().expect("b is evaluated for K1/K0 specs");
    Ok(match case {
        CaseLabel::CaseI => {
            let c = eval_regular_factor(case, b(), m1)?;
            let c1 = c.times(Multiplier::ImagUnit, SymbolLabel::C1);
            Factors {
                regular: ("c(λ) = (1 + i/λ) b(λ)".into(), c),
                chosen: ("c₁(λ) = i c(λ)".into(), c1),
                extra: vec![],
            }
        }
        CaseLabel::CaseII => {
            let ct = eval_regular_factor(case, b(), m1)?;
            let c1 = ct
                .times(Multiplier::PlusOverMinus, SymbolLabel::Custom)
                .times(Multiplier::ImagUnit, SymbolLabel::C1);
            let f_route = c1.times(Multiplier::MinusOverPlus, SymbolLabel::Custom);
            Factors {
                regular: ("c̃(λ) = (1 − i/λ) b(λ)".into(), ct),
                chosen: ("c₁(λ) = i ((λ+i)/(λ−i)) c̃(λ)".into(), c1),
                extra: vec![("((λ−i)/(λ+i)) c₁(λ)".into(), WindingRole::FRoute, f_route)],
            }
        }
        CaseLabel::CaseIII => {
            let c = eval_regular_factor(case, b(), m1)?;
            let c1 = c.times(Multiplier::ImagUnit, SymbolLabel::C1);
            let chosen = c1.times(Multiplier::PlusOverMinus, SymbolLabel::Custom);
            let printed = c1.times(Multiplier::MinusOverPlus, SymbolLabel::Custom);
            Factors {
                regular: ("c(λ) = (1 + 1/λ²) b(λ)".into(), c),
                chosen: ("((λ+i)/(λ−i)) c₁(λ), c₁ = i c".into(), chosen),
                extra: vec![("((λ−i)/(λ+i)) c₁(λ)".into(), WindingRole::PrintedOrientation, printed)],
            }
        }
        CaseLabel::AlphaBeta => {
            let d = sym.d.as_ref().expect("d is evaluated for K0 specs");
            let e = eval_regular_factor(case, d, m0.expect("K0 moments"))?;
            let chosen = e.times(Multiplier::PlusOverMinus, SymbolLabel::Custom);
            let printed = e.times(Multiplier::MinusOverPlus, SymbolLabel::Custom);
            Factors {
                regular: ("e(λ) = (1 + 1/λ²) d(λ)".into(), e),
                chosen: ("((λ+i)/(λ−i)) e(λ)".into(), chosen),
                extra: vec![("((λ−i)/(λ+i)) e(λ)".into(), WindingRole::PrintedOrientation, printed)],
            }
        }
        CaseLabel::Unclassified => unreachable!("factors are only built for classified kernels"),
    })
}

fn winding_entry(factor: &str, role: WindingRole, s: &SymbolSamples, tol: f64) -> WindingEntry {
    let (result, error) = match winding_index_with(s, tol) {
        Ok(w) => (Some(w), None),
        Err(e) => (None, Some(e.to_string())),
    };
    WindingEntry {
        factor: factor.to_string(),
        role,
        grid_size: s.grid.size(),
        tol_nonvanishing: tol,
        result,
        error,
    }
}

/// `ρ₊(λ)` for the case, as a function.
fn rho_plus(case: CaseLabel, lambda: f64) -> Complex64 {
    let p = Complex64::new(lambda, 1.0);
    match case {
        CaseLabel::CaseI | CaseLabel::CaseII => 1.0 / p,
        CaseLabel::CaseIII => lambda / (p * p),
        CaseLabel::AlphaBeta => 1.0 / (p * p),
        CaseLabel::Unclassified => Complex64::new(f64::NAN, 0.0),
    }
}

fn max_relative_gap(x: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).norm() / b.norm().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// `∫ t^m k(t) dt` by adaptive quadrature of the kernel samples.
pub fn moment_by_quadrature(spec: &KernelSpec, m: u32) -> Complex64 {
    let eps = 1e-18 * spec.scale().max(f64::MIN_POSITIVE);
    let cfg = QuadConfig::default();
    let half = |h: &HalfLine, sign: f64| -> Complex64 {
        let t_max = h.truncation_point(m, eps);
        let mut bp: Vec<f64> = (0..=16).map(|j| t_max * j as f64 / 16.0).collect();
        bp.extend(h.knots().iter().copied().filter(|&s| s > 0.0 && s < t_max));
        bp.sort_by(f64::total_cmp);
        bp.dedup();
        integrate_partitioned(|s| h.eval(s) * s.powi(m as i32), &bp, cfg).value * sign.powi(m as i32)
    };
    half(spec.pos(), 1.0) + half(spec.neg(), -1.0)
}

fn manufactured_phi() -> ExpPoly {
    ExpPoly::new(vec![ExpTerm::new(1.0, 0, 1.0)]).expect("valid term")
}

fn run_solve(
    k: &KernelSpec,
    cfg: &AnalysisConfig,
    rhs: &RhsSource,
) -> Result<(SolveSummary, SolveResult), PipelineError> {
    let (t_max, n) = match rhs {
        RhsSource::Given(f) => (f.t_max(), f.n()),
        _ => (cfg.solver.t_max, cfg.solver.n),
    };
    let a = discretize(k, t_max, n)?;
    let phi_star = manufactured_phi();
    let (f, source) = match rhs {
        RhsSource::None => return Err(PipelineError::MissingRhs),
        RhsSource::Given(f) => (f.clone(), "file"),
        RhsSource::Manufactured => match manufactured_closed_form(k, &phi_star, t_max, n) {
            Some(f) => (f, "manufactured_closed_form"),
            None => {
                let phi = GridFunction::from_fn(t_max, n, |t| phi_star.eval(t))?;
                (manufacture_rhs(&a, &phi)?, "manufactured_nystrom")
            }
        },
    };
    let r = solve_regularized(&a, &f, cfg.solver.regularization)?;
    let manufactured_error = match rhs {
        RhsSource::Manufactured => {
            let phi = GridFunction::from_fn(t_max, n, |t| phi_star.eval(t))?;
            Some(r.solution.relative_error(&phi))
        }
        _ => None,
    };
    let f_norm = f.norm();
    let summary = SolveSummary {
        t_max,
        n,
        regularization: r.regularization,
        rhs_source: source.to_string(),
        residual_norm: r.residual_norm,
        relative_residual: if f_norm > 0.0 { r.residual_norm / f_norm } else { r.residual_norm },
        rank_used: r.rank_used,
        solution_norm: r.solution.norm(),
        singular_values: r.singular_values.clone(),
        estimated_null_dim: r.estimated_null_dim,
        manufactured_error,
    };
    Ok((summary, r))
}

fn check(name: &str, value: f64, tolerance: f64) -> OracleCheck {
    OracleCheck {
        name: name.to_string(),
        value,
        tolerance,
        passed: value <= tolerance,
    }
}

/// Runs one command. Mathematical outcomes (unclassified, vanishing
/// symbol, index mismatch) are statuses in the report; malformed input and
/// numerical breakdowns are errors.
pub fn run(command: Command, config: &AnalysisConfig, spec: &KernelSpec, rhs: &RhsSource) -> Result<RunOutput, PipelineError> {
    config.validate()?;
    if command == Command::Solve && *rhs == RhsSource::None {
        return Err(PipelineError::MissingRhs);
    }
    let mut report = ReportDocument {
        schema_version: REPORT_SCHEMA.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command,
        status: Status::Ok,
        exit_code: 0,
        messages: Vec::new(),
        config: config.clone(),
        kernel: KernelEcho::of(spec),
        moments: Vec::new(),
        conditions: Vec::new(),
        symbols: Vec::new(),
        windings: Vec::new(),
        case: None,
        solvability: None,
        solve: None,
        verification: Vec::new(),
    };
    let lv = levels(spec)?;
    let m1 = lv.k1.as_ref().map(MomentSet::for_tilde_k1).transpose()?;
    let m0 = lv.k0.as_ref().map(MomentSet::for_k0).transpose()?;
    report.moments.extend(m1.iter().cloned());
    report.moments.extend(m0.iter().cloned());
    report.conditions = verify_conditions(spec, &config.conditions);

    let grid = Arc::new(LambdaGrid::new(config.grid_size, config.map_parameter)?);
    let sym = eval_symbols(&lv, m1.as_ref(), m0.as_ref(), grid, config)?;
    let tol = config.tol_nonvanishing;
    let mut side = Vec::new();
    if let Some(b) = &sym.b {
        report
            .symbols
            .push(summarize(b, "b(λ) = ν₀(K̃₁) − ∫ e^{iλt} K̃₁(t) dt", vec![check_arg_halfplane_with(b, tol)]));
        side.push(b.clone());
    }
    report.symbols.push(summarize(&sym.a, "a(λ) = ∫ e^{iλt} K(t) dt", vec![]));
    side.push(sym.a.clone());
    if let Some(d) = &sym.d {
        report.symbols.push(summarize(d, "d(λ) = ν₀(K₀) − ∫ e^{iλu} K₀(u) du", vec![]));
        side.push(d.clone());
    }

    let case = match &m1 {
        Some(m) => {
            let k1_verdicts: Vec<ConditionVerdict> = report
                .conditions
                .iter()
                .filter(|v| matches!(v.condition_id, ConditionId::SignCond | ConditionId::Positivity))
                .cloned()
                .collect();
            let k0_data = m0.as_ref().map(|m0| (report.conditions.as_slice(), m0));
            let ccfg = ClassifyConfig {
                zero_band: config.conditions.zero_band,
            };
            classify_with(&k1_verdicts, m, k0_data, &ccfg)
        }
        None => {
            report.messages.push("level K spec: admissibility conditions are stated for K1 and K0".into());
            CaseLabel::Unclassified
        }
    };
    report.case = Some(case);

    let mut chosen_samples = None;
    if case == CaseLabel::Unclassified {
        report.set_status(Status::Unclassified, "kernel is outside the four solvable cases");
    } else {
        let m1 = m1.as_ref().expect("classified kernels have K1 moments");
        let f = factors(case, &sym, m1, m0.as_ref())?;
        let nonvanishing = check_nonvanishing_with(&f.chosen.1, tol);
        report.symbols.push(summarize(&f.regular.1, &f.regular.0, vec![check_arg_halfplane_with(&f.regular.1, tol)]));
        report.symbols.push(summarize(&f.chosen.1, &f.chosen.0, vec![nonvanishing.clone()]));
        report.windings.push(winding_entry(&f.regular.0, WindingRole::Regular, &f.regular.1, tol));
        let chosen_entry = winding_entry(&f.chosen.0, WindingRole::Chosen, &f.chosen.1, tol);
        for (name, role, s) in &f.extra {
            report.windings.push(winding_entry(name, *role, s, tol));
        }
        side.push(f.regular.1.clone());
        side.push(f.chosen.1.clone());
        match winding_index_with(&f.chosen.1, tol) {
            Err(SymbolError::VanishingSymbol { min_modulus }) => {
                report.set_status(Status::VanishingSymbol, format!("C(λ) vanishes: min modulus {min_modulus:e}"))
            }
            Err(SymbolError::UnderResolved { max_step }) => report.set_status(
                Status::UnderResolved,
                format!("argument step {max_step:.3} rad; increase grid_size"),
            ),
            Err(e) => return Err(e.into()),
            Ok(w) => match solvability_report(case, &w, &nonvanishing) {
                Ok(r) => {
                    if command != Command::Analyze {
                        report.solvability = Some(r);
                    }
                }
                Err(ClassifyError::IndexMismatch { expected, found, .. }) => report.set_status(
                    Status::IndexMismatch,
                    format!("case {case:?} needs ind C = {expected}, winding gave {found}"),
                ),
                Err(ClassifyError::VanishingSymbol { margin }) => {
                    report.set_status(Status::VanishingSymbol, format!("C(λ) vanishes: margin {margin:e}"))
                }
                Err(ClassifyError::Unclassified) => unreachable!("case is classified"),
            },
        }
        report.windings.push(chosen_entry);
        chosen_samples = Some(f.chosen.1);
    }

    let mut solution = None;
    if command == Command::Solve {
        let (summary, result) = run_solve(&lv.k, config, rhs)?;
        report.solve = Some(summary);
        solution = Some(result);
    }

    if command == Command::Verify {
        verify(&mut report, &lv, m1.as_ref(), m0.as_ref(), &sym, case, chosen_samples.as_ref(), config)?;
    }

    Ok(RunOutput {
        report,
        symbols: side,
        solution,
    })
}

#[allow(clippy::too_many_arguments)]
fn verify(
    report: &mut ReportDocument,
    lv: &Levels,
    m1: Option<&MomentSet>,
    m0: Option<&MomentSet>,
    sym: &Symbols,
    case: CaseLabel,
    chosen: Option<&SymbolSamples>,
    config: &AnalysisConfig,
) -> Result<(), PipelineError> {
    let tol = config.verify_tol;
    let mut checks = Vec::new();
    if let (Some(k1), Some(m), Some(b)) = (&lv.k1, m1, &sym.b) {
        let q = eval_b_quadrature(k1, m, b.grid.clone(), &config.symbol)?;
        checks.push(check("b_split_form_vs_adaptive_quadrature", max_relative_gap(&b.values, &q.values), tol));
        let t = tilde_of(k1);
        let mut worst: f64 = 0.0;
        for (j, nu) in [m.nu0, m.nu1, m.nu2].into_iter().enumerate() {
            if let Some(nu) = nu {
                let q = moment_by_quadrature(&t, j as u32).re;
                worst = worst.max((nu - q).abs() / q.abs().max(k1.scale()));
            }
        }
        checks.push(check("moments_tilde_k1_vs_quadrature", worst, 1e-8));
        if k1.is_real() {
            checks.push(check("b_conjugate_symmetry", b.conjugate_symmetry_defect(), 1e-8));
        }
    }
    if let (Some(k0), Some(m)) = (&lv.k0, m0) {
        let mut worst: f64 = 0.0;
        for (j, nu) in [m.nu0, m.nu1, m.nu2].into_iter().enumerate() {
            if let Some(nu) = nu {
                let q = moment_by_quadrature(k0, j as u32).re;
                worst = worst.max((nu - q).abs() / q.abs().max(k0.scale()));
            }
        }
        checks.push(check("moments_k0_vs_quadrature", worst, 1e-8));
    }
    if let Some(c) = chosen {
        // a computed from K directly against ρ₊ C
        let direct = fourier_transform_with(&lv.k, c.grid.clone(), &config.symbol)?;
        let product: Vec<Complex64> = c
            .grid
            .interior()
            .iter()
            .zip(&c.values)
            .map(|(&l, v)| rho_plus(case, l) * v)
            .collect();
        let scale = direct.values.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let gap = direct
            .values
            .iter()
            .zip(&product)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
            / scale;
        checks.push(check("a_equals_rho_plus_times_C", gap, tol));

        // index under grid doubling
        let refined = Arc::new(c.grid.refined());
        let sym2 = eval_symbols(lv, m1, m0, refined, config)?;
        let f2 = factors(case, &sym2, m1.expect("K1 moments"), m0)?;
        let entry = winding_entry("C(λ) on the refined grid", WindingRole::ChosenRefined, &f2.chosen.1, config.tol_nonvanishing);
        let base = winding_index_with(c, config.tol_nonvanishing).ok().map(|w| w.index);
        let same = entry.result.map(|w| w.index) == base && base.is_some();
        report.windings.push(entry);
        checks.push(check("winding_stable_under_refinement", if same { 0.0 } else { 1.0 }, 0.0));
    }
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    report.verification = checks;
    if !failed.is_empty() {
        report.set_status(Status::VerificationFailed, format!("oracle checks failed: {}", failed.join(", ")));
    }
    Ok(())
}
