use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{build_k1_from_k0, moment, KernelSpec, Level};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionId {
    /// `K1(t) - K1(-t) >= 0` for all `t >= 0`.
    #[serde(rename = "SignCond_2_4")]
    SignCond,
    /// `∫_0^∞ [K1(t) - K1(-t)] dt > 0`.
    #[serde(rename = "Positivity_2_5")]
    Positivity,
    /// `K0(t) + K0(-t) >= 0` for all `t >= 0`.
    AlphaSign,
    /// `ν1(K0) = 0`, `ν0(K0) > 0`, `ν2(K0) > 0`.
    BetaMoments,
    /// `Re s(λ) > 0` at every interior grid point.
    ArgHalfPlane,
    /// `s(λ) != 0` on the closed line, endpoints included.
    NonVanishing,
}

/// Outcome of one admissibility check.
///
/// `margin` is the worst slack: the grid minimum for pointwise conditions,
/// the integral (or the smallest of the constrained quantities) otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub condition_id: ConditionId,
    pub holds: bool,
    pub margin: f64,
    pub witness: Option<f64>,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditionConfig {
    /// Geometric check grid `[t_min, t_max]`.
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    /// Negative slack tolerated in pointwise sign conditions.
    pub sign_slack: f64,
    /// Strict inequalities require `value > strict_tol * scale`.
    pub strict_tol: f64,
    /// `|ν1| <= zero_band * max(1, ν0)` counts as `ν1 = 0`.
    pub zero_band: f64,
}

impl Default for ConditionConfig {
    fn default() -> Self {
        Self {
            t_min: 1e-6,
            t_max: 50.0,
            points: 2001,
            sign_slack: 1e-10,
            strict_tol: 1e-10,
            zero_band: 1e-9,
        }
    }
}

impl ConditionConfig {
    fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.points.max(2);
        let ratio = (self.t_max / self.t_min).ln();
        (0..n).map(move |j| self.t_min * (ratio * j as f64 / (n - 1) as f64).exp())
    }
}

fn pointwise(
    id: ConditionId,
    cfg: &ConditionConfig,
    f: impl Fn(f64) -> f64,
) -> ConditionVerdict {
    let (witness, margin) = cfg
        .grid()
        .map(|t| (t, f(t)))
        .fold((cfg.t_min, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    ConditionVerdict {
        condition_id: id,
        holds: margin >= -cfg.sign_slack,
        margin,
        witness: Some(witness),
        values: BTreeMap::new(),
    }
}

fn sign_condition(k1: &KernelSpec, cfg: &ConditionConfig) -> ConditionVerdict {
    pointwise(ConditionId::SignCond, cfg, |t| (k1.eval(t) - k1.eval(-t)).re)
}

fn positivity_condition(k1: &KernelSpec, cfg: &ConditionConfig) -> ConditionVerdict {
    let (p, _) = k1.pos().moment(0);
    let (n, _) = k1.neg().moment(0);
    let value = (p - n).re;
    ConditionVerdict {
        condition_id: ConditionId::Positivity,
        holds: value > cfg.strict_tol * k1.scale(),
        margin: value,
        witness: None,
        values: BTreeMap::from([("integral".to_string(), value)]),
    }
}

fn failed(id: ConditionId, reason: f64) -> ConditionVerdict {
    ConditionVerdict {
        condition_id: id,
        holds: false,
        margin: reason,
        witness: None,
        values: BTreeMap::new(),
    }
}

/// Runs the admissibility checks appropriate for the spec's level.
///
/// `K1` specs get the sign and positivity conditions; `K0` specs get those
/// (on the derived `K1`) followed by the `(α)` sign and `(β)` moment checks.
/// Level `K` specs carry no checkable conditions.
pub fn verify_conditions(spec: &KernelSpec, cfg: &ConditionConfig) -> Vec<ConditionVerdict> {
    match spec.level() {
        Level::K => Vec::new(),
        Level::K1 => vec![sign_condition(spec, cfg), positivity_condition(spec, cfg)],
        Level::K0 => {
            let mut out = match build_k1_from_k0(spec) {
                Ok(k1) => vec![sign_condition(&k1, cfg), positivity_condition(&k1, cfg)],
                Err(_) => vec![
                    failed(ConditionId::SignCond, f64::NEG_INFINITY),
                    failed(ConditionId::Positivity, f64::NEG_INFINITY),
                ],
            };
            out.push(pointwise(ConditionId::AlphaSign, cfg, |t| {
                (spec.eval(t) + spec.eval(-t)).re
            }));
            out.push(beta_condition(spec, cfg));
            out
        }
    }
}

fn beta_condition(k0: &KernelSpec, cfg: &ConditionConfig) -> ConditionVerdict {
    let nus: Option<Vec<f64>> = (0..3).map(|m| moment(k0, m).ok().map(|x| x.value.re)).collect();
    let Some(nus) = nus else {
        return failed(ConditionId::BetaMoments, f64::NEG_INFINITY);
    };
    let (nu0, nu1, nu2) = (nus[0], nus[1], nus[2]);
    let floor = cfg.strict_tol * k0.scale();
    let band = cfg.zero_band * nu0.abs().max(1.0);
    let holds = nu0 > floor && nu2 > floor && nu1.abs() <= band;
    let margin = nu0.min(nu2).min(band - nu1.abs());
    ConditionVerdict {
        condition_id: ConditionId::BetaMoments,
        holds,
        margin,
        witness: None,
        values: BTreeMap::from([
            ("nu0".to_string(), nu0),
            ("nu1".to_string(), nu1),
            ("nu2".to_string(), nu2),
        ]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ExpTerm;

    fn k1(gamma: f64) -> KernelSpec {
        KernelSpec::closed_form(
            Level::K1,
            vec![ExpTerm::new(1.0, 0, 1.0)],
            vec![ExpTerm::new(gamma, 0, 1.0)],
        )
        .unwrap()
    }

    fn by_id(v: &[ConditionVerdict], id: ConditionId) -> &ConditionVerdict {
        v.iter().find(|c| c.condition_id == id).unwrap()
    }

    #[test]
    fn gamma_zero_satisfies_both() {
        let cfg = ConditionConfig::default();
        let v = verify_conditions(&k1(0.0), &cfg);
        let sign = by_id(&v, ConditionId::SignCond);
        assert!(sign.holds);
        assert!(sign.margin > 0.0);
        assert!((sign.witness.unwrap() - cfg.t_max).abs() < 1e-9);
        let pos = by_id(&v, ConditionId::Positivity);
        assert!(pos.holds);
        assert!((pos.values["integral"] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn positivity_integral_is_one_minus_gamma() {
        for gamma in [-3.0, -1.0, 0.5] {
            let v = verify_conditions(&k1(gamma), &ConditionConfig::default());
            let pos = by_id(&v, ConditionId::Positivity);
            assert!((pos.values["integral"] - (1.0 - gamma)).abs() < 1e-14);
        }
    }

    #[test]
    fn even_kernel_fails_positivity() {
        let v = verify_conditions(&k1(1.0), &ConditionConfig::default());
        let pos = by_id(&v, ConditionId::Positivity);
        assert!(!pos.holds);
        assert_eq!(pos.margin, 0.0);
        // the pointwise difference vanishes identically, which is allowed
        assert!(by_id(&v, ConditionId::SignCond).holds);
    }

    #[test]
    fn sign_violation_has_witness() {
        let bad = KernelSpec::closed_form(
            Level::K1,
            vec![ExpTerm::new(1.0, 0, 2.0)],
            vec![ExpTerm::new(1.0, 0, 1.0)],
        )
        .unwrap();
        let v = verify_conditions(&bad, &ConditionConfig::default());
        let sign = by_id(&v, ConditionId::SignCond);
        assert!(!sign.holds);
        let w = sign.witness.unwrap();
        // e^{-2t} - e^{-t} is most negative at t = ln 2
        assert!((w - 2f64.ln()).abs() < 0.01);
        assert!(sign.margin < 0.0);
    }

    #[test]
    fn symmetric_k0_satisfies_alpha_beta() {
        let k0 = KernelSpec::closed_form(
            Level::K0,
            vec![ExpTerm::new(0.5, 0, 1.0)],
            vec![ExpTerm::new(0.5, 0, 1.0)],
        )
        .unwrap();
        let v = verify_conditions(&k0, &ConditionConfig::default());
        assert_eq!(v.len(), 4);
        assert!(!by_id(&v, ConditionId::Positivity).holds);
        assert!(by_id(&v, ConditionId::AlphaSign).holds);
        let beta = by_id(&v, ConditionId::BetaMoments);
        assert!(beta.holds);
        assert!((beta.values["nu0"] - 1.0).abs() < 1e-15);
        assert!(beta.values["nu1"].abs() < 1e-15);
        assert!((beta.values["nu2"] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn level_k_has_no_conditions() {
        let k = KernelSpec::zero(Level::K);
        assert!(verify_conditions(&k, &ConditionConfig::default()).is_empty());
    }
}
