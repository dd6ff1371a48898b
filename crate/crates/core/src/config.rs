use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::ConditionConfig;
use crate::solver::{Regularization, DEFAULT_N, DEFAULT_T};
use crate::symbol::{SymbolConfig, NONVANISHING_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("config field {field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub t_max: f64,
    pub n: usize,
    pub regularization: Regularization,
    /// `σ < null_threshold · σ_max` counts toward the null-space estimate.
    pub null_threshold: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            t_max: DEFAULT_T,
            n: DEFAULT_N,
            regularization: Regularization::default(),
            null_threshold: crate::solver::DEFAULT_TSVD_THRESHOLD,
        }
    }
}

/// Every setting that influences a report; echoed into it verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Number of `θ`-intervals of the frequency grid, a power of two.
    pub grid_size: usize,
    /// `L` in `λ = L tan θ`.
    pub map_parameter: f64,
    /// Non-vanishing floor relative to the value at infinity.
    pub tol_nonvanishing: f64,
    pub conditions: ConditionConfig,
    pub symbol: SymbolConfig,
    pub solver: SolverSettings,
    /// Tolerance for oracle comparisons in `verify`.
    pub verify_tol: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            grid_size: 2048,
            map_parameter: 1.0,
            tol_nonvanishing: NONVANISHING_TOL,
            conditions: ConditionConfig::default(),
            symbol: SymbolConfig::default(),
            solver: SolverSettings::default(),
            verify_tol: 1e-6,
        }
    }
}

fn positive(field: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError {
            field: field.to_string(),
            message: format!("must be positive and finite, got {x}"),
        })
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.grid_size < 8 || !self.grid_size.is_power_of_two() {
            return Err(ConfigError {
                field: "grid_size".into(),
                message: format!("must be a power of two >= 8, got {}", self.grid_size),
            });
        }
        if self.solver.n < 16 {
            return Err(ConfigError {
                field: "solver.n".into(),
                message: format!("must be at least 16, got {}", self.solver.n),
            });
        }
        let c = &self.conditions;
        if c.points < 2 || !(c.t_min < c.t_max) {
            return Err(ConfigError {
                field: "conditions".into(),
                message: "need t_min < t_max and at least 2 points".into(),
            });
        }
        for (field, x) in [
            ("map_parameter", self.map_parameter),
            ("tol_nonvanishing", self.tol_nonvanishing),
            ("conditions.t_min", c.t_min),
            ("conditions.sign_slack", c.sign_slack),
            ("conditions.strict_tol", c.strict_tol),
            ("conditions.zero_band", c.zero_band),
            ("symbol.oscillation_tol", self.symbol.oscillation_tol),
            ("symbol.quad_eps_abs", self.symbol.quad_eps_abs),
            ("symbol.quad_eps_rel", self.symbol.quad_eps_rel),
            ("solver.t_max", self.solver.t_max),
            ("solver.null_threshold", self.solver.null_threshold),
            ("verify_tol", self.verify_tol),
        ] {
            positive(field, x)?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError {
            field: format!("<line {}>", e.line()),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = AnalysisConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(AnalysisConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg = AnalysisConfig::from_json(r#"{"grid_size": 256, "solver": {"n": 64}}"#).unwrap();
        assert_eq!(cfg.grid_size, 256);
        assert_eq!(cfg.solver.n, 64);
        assert_eq!(cfg.solver.t_max, DEFAULT_T);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert_eq!(AnalysisConfig::from_json(r#"{"grid_size": 1000}"#).unwrap_err().field, "grid_size");
        assert_eq!(
            AnalysisConfig::from_json(r#"{"conditions": {"zero_band": 0}}"#).unwrap_err().field,
            "conditions.zero_band"
        );
        assert!(AnalysisConfig::from_json(r#"{"grid": 64}"#).is_err());
        let e = AnalysisConfig::from_json(
            r#"{"solver": {"regularization": {"method": "tikhonov", "parameter": 1e-3}}}"#,
        )
        .unwrap();
        assert_eq!(e.solver.regularization, Regularization::Tikhonov { parameter: 1e-3 });
    }
}
