//! Four-case decision procedure and the solvability report.
//!
//! Dimensions are always computed on the `δ = 0` branch:
//! `dim ker = max(-κ, 0)`, `dim coker = max(κ, 0)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{ConditionId, ConditionVerdict, MomentSet, MomentSubject};
use crate::symbol::WindingResult;

pub const REPORT_SCHEMA: &str = "whfk-solvability/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    CaseI,
    CaseII,
    CaseIII,
    AlphaBeta,
    Unclassified,
}

impl CaseLabel {
    /// Index of the regular factor `C(λ)` the case requires.
    pub fn expected_kappa(self) -> Option<i64> {
        match self {
            CaseLabel::CaseI => Some(0),
            CaseLabel::CaseII | CaseLabel::CaseIII | CaseLabel::AlphaBeta => Some(-1),
            CaseLabel::Unclassified => None,
        }
    }

    pub fn rho_plus(self) -> Option<&'static str> {
        match self {
            CaseLabel::CaseI | CaseLabel::CaseII => Some(RHO_ONE_PLUS),
            CaseLabel::CaseIII => Some("λ/(λ+i)²"),
            CaseLabel::AlphaBeta => Some("1/(λ+i)²"),
            CaseLabel::Unclassified => None,
        }
    }
}

const RHO_ONE_PLUS: &str = "1/(λ+i)";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("case {case:?} requires index {expected}, winding gave {found}")]
    IndexMismatch { case: CaseLabel, expected: i64, found: i64 },
    #[error("regular factor vanishes on the closed line (margin {margin:e})")]
    VanishingSymbol { margin: f64 },
    #[error("no solvability report for an unclassified kernel")]
    Unclassified,
}

/// Tolerance settings for [`classify_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    /// `|ν1| <= zero_band * max(1, ν0)` counts as `ν1 = 0`.
    pub zero_band: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self { zero_band: 1e-9 }
    }
}

fn all_hold(verdicts: &[ConditionVerdict], ids: &[ConditionId]) -> bool {
    ids.iter().all(|id| {
        let mut matching = verdicts.iter().filter(|v| v.condition_id == *id).peekable();
        matching.peek().is_some() && matching.all(|v| v.holds)
    })
}

pub fn classify(
    k1_verdicts: &[ConditionVerdict],
    moments: &MomentSet,
    k0_data: Option<(&[ConditionVerdict], &MomentSet)>,
) -> CaseLabel {
    classify_with(k1_verdicts, moments, k0_data, &ClassifyConfig::default())
}

/// The `(α, β)` route takes precedence when `K0` data is supplied; otherwise
/// the sign and positivity conditions gate the trichotomy on `ν1(K̃1)`.
pub fn classify_with(
    k1_verdicts: &[ConditionVerdict],
    moments: &MomentSet,
    k0_data: Option<(&[ConditionVerdict], &MomentSet)>,
    cfg: &ClassifyConfig,
) -> CaseLabel {
    if let Some((v0, m0)) = k0_data {
        if m0.subject == MomentSubject::K0 && all_hold(v0, &[ConditionId::AlphaSign, ConditionId::BetaMoments]) {
            return CaseLabel::AlphaBeta;
        }
    }
    if moments.subject != MomentSubject::TildeK1
        || !all_hold(k1_verdicts, &[ConditionId::SignCond, ConditionId::Positivity])
    {
        return CaseLabel::Unclassified;
    }
    let (Some(nu0), Some(nu1)) = (moments.nu0, moments.nu1) else {
        return CaseLabel::Unclassified;
    };
    let band = cfg.zero_band * nu0.abs().max(1.0);
    if nu1 > band {
        CaseLabel::CaseI
    } else if nu1 < -band {
        CaseLabel::CaseII
    } else {
        match moments.nu2 {
            Some(nu2) if nu2.is_finite() && nu2 > band => CaseLabel::CaseIII,
            _ => CaseLabel::Unclassified,
        }
    }
}

/// A membership condition on `f` and the solution space it buys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FCondition {
    pub condition: String,
    pub upgraded_space: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvabilityReport {
    pub schema_version: String,
    pub case: CaseLabel,
    pub rho_plus: String,
    pub rho_minus: String,
    pub kappa: i64,
    pub dim_ker: u32,
    pub dim_coker: u32,
    pub solution_space: String,
    pub f_condition: Option<FCondition>,
    pub homogeneous_note: String,
    /// A second, differing placement of the homogeneous solution.
    pub homogeneous_alternative: Option<String>,
    pub discrepancy_flagged: bool,
}

impl SolvabilityReport {
    /// Line-oriented `key = value` rendering, one field per line.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "schema_version = {}", self.schema_version);
        let _ = writeln!(out, "case = {:?}", self.case);
        let _ = writeln!(out, "rho_plus = {}", self.rho_plus);
        let _ = writeln!(out, "rho_minus = {}", self.rho_minus);
        let _ = writeln!(out, "kappa = {}", self.kappa);
        let _ = writeln!(out, "dim_ker = {}", self.dim_ker);
        let _ = writeln!(out, "dim_coker = {}", self.dim_coker);
        let _ = writeln!(out, "solution_space = {}", self.solution_space);
        match &self.f_condition {
            Some(f) => {
                let _ = writeln!(out, "f_condition = {}", f.condition);
                let _ = writeln!(out, "f_condition_upgrade = {}", f.upgraded_space);
            }
            None => {
                let _ = writeln!(out, "f_condition = none");
            }
        }
        let _ = writeln!(out, "homogeneous_note = {}", self.homogeneous_note);
        if let Some(alt) = &self.homogeneous_alternative {
            let _ = writeln!(out, "homogeneous_alternative = {alt}");
        }
        let _ = writeln!(out, "discrepancy_flagged = {}", self.discrepancy_flagged);
        out
    }
}

const F_CONDITION: &str = "f ∈ Ē₊(1/(λ−i))";

/// Builds the report for a classified kernel.
///
/// `winding` is the index of the regular factor `C(λ)` chosen so that
/// `a(λ) = ρ₊(λ) C(λ)` (or `ρ₋ C` for case II on the `f` route).
pub fn solvability_report(
    case: CaseLabel,
    winding: &WindingResult,
    nonvanishing: &ConditionVerdict,
) -> Result<SolvabilityReport, ClassifyError> {
    let expected = case.expected_kappa().ok_or(ClassifyError::Unclassified)?;
    if !nonvanishing.holds {
        return Err(ClassifyError::VanishingSymbol {
            margin: nonvanishing.margin,
        });
    }
    if winding.index != expected {
        return Err(ClassifyError::IndexMismatch {
            case,
            expected,
            found: winding.index,
        });
    }
    let kappa = winding.index;
    let (solution_space, homogeneous_note, alternative, f_condition) = match case {
        CaseLabel::CaseI => ("Ẽ₊(1/(λ+i))", "only the trivial solution", None, None),
        CaseLabel::CaseII => (
            "Ẽ₊(1/(λ+i))",
            "one linearly independent solution in Ẽ(λ/(λ+i)²)\\Ẽ₊(λ/(λ+i))",
            Some("one linearly independent solution in Ẽ₊(1/(λ+i))"),
            Some("Ẽ₊(λ/(λ+i))"),
        ),
        CaseLabel::CaseIII => (
            "Ẽ₊(λ/(λ+i)²)",
            "one linearly independent solution in Ẽ₊(λ/(λ+i)²)",
            Some("one linearly independent solution in Ẽ(λ/(λ+i)²)\\Ẽ₊(λ/(λ+i))"),
            None,
        ),
        CaseLabel::AlphaBeta => (
            "Ẽ(1/(λ+i)²)",
            "one linearly independent solution in the difference set Ẽ(1/(λ+i)²)\\Ẽ₊(1/(λ+i))",
            None,
            Some("Ẽ₊(1/(λ+i))"),
        ),
        CaseLabel::Unclassified => unreachable!("rejected above"),
    };
    Ok(SolvabilityReport {
        schema_version: REPORT_SCHEMA.to_string(),
        case,
        rho_plus: case.rho_plus().expect("classified").to_string(),
        rho_minus: "1".to_string(),
        kappa,
        dim_ker: (-kappa).max(0) as u32,
        dim_coker: kappa.max(0) as u32,
        solution_space: solution_space.to_string(),
        f_condition: f_condition.map(|up| FCondition {
            condition: F_CONDITION.to_string(),
            upgraded_space: up.to_string(),
        }),
        homogeneous_note: homogeneous_note.to_string(),
        discrepancy_flagged: alternative.is_some(),
        homogeneous_alternative: alternative.map(str::to_string),
    })
}
