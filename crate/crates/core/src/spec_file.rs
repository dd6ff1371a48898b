//! JSON kernel-spec documents.
//!
//! ```json
//! { "level": "K1",
//!   "pos_terms": [{"c": 1, "k": 0, "a": 1}],
//!   "neg_terms": [{"c": [-1, 0], "k": 0, "a": 1}] }
//! ```
//!
//! or `{"level": "K0", "tabulated": {"t": [...], "v": [...]}}`. Complex
//! numbers are written as a bare real or as `[re, im]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{ExpTerm, KernelError, KernelSpec, Level};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{}{field}: {message}", line.map(|l| format!("line {l}, ")).unwrap_or_default())]
pub struct SchemaError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    /// Dotted path of the offending field, `"<document>"` for syntax errors.
    pub field: String,
    pub message: String,
}

impl SchemaError {
    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            line: None,
            column: None,
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexValue> for Complex64 {
    fn from(v: ComplexValue) -> Self {
        match v {
            ComplexValue::Real(x) => Complex64::new(x, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDoc {
    pub c: ComplexValue,
    pub k: u32,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableDoc {
    pub t: Vec<f64>,
    pub v: Vec<ComplexValue>,
}

/// The document as written; echoed verbatim into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpecDoc {
    pub level: Level,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_terms: Option<Vec<TermDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neg_terms: Option<Vec<TermDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tabulated: Option<TableDoc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSpec {
    pub doc: KernelSpecDoc,
    pub spec: KernelSpec,
    pub warnings: Vec<String>,
}

fn check_terms(name: &str, terms: &[TermDoc]) -> Result<Vec<ExpTerm>, SchemaError> {
    terms
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let c: Complex64 = t.c.into();
            if !c.is_finite() {
                return Err(SchemaError::field(format!("{name}[{j}].c"), "coefficient must be finite"));
            }
            if !(t.a > 0.0) || !t.a.is_finite() {
                return Err(SchemaError::field(
                    format!("{name}[{j}].a"),
                    format!("decay rate must be a positive finite number, got {}", t.a),
                ));
            }
            Ok(ExpTerm::new(c, t.k, t.a))
        })
        .collect()
}

impl KernelSpecDoc {
    pub fn to_spec(&self) -> Result<ParsedSpec, SchemaError> {
        let mut warnings = Vec::new();
        let has_terms = self.pos_terms.is_some() || self.neg_terms.is_some();
        let spec = match (&self.tabulated, has_terms) {
            (Some(_), true) => {
                return Err(SchemaError::field(
                    "tabulated",
                    "closed-form terms and tabulated samples are mutually exclusive",
                ))
            }
            (Some(tab), false) => {
                if tab.t.len() != tab.v.len() {
                    return Err(SchemaError::field(
                        "tabulated.v",
                        format!("{} values for {} nodes", tab.v.len(), tab.t.len()),
                    ));
                }
                if let Some(j) = tab.t.windows(2).position(|w| !(w[0] < w[1])) {
                    return Err(SchemaError::field(
                        format!("tabulated.t[{}]", j + 1),
                        "nodes must be strictly increasing",
                    ));
                }
                if let Some(j) = tab.t.iter().position(|x| !x.is_finite()) {
                    return Err(SchemaError::field(format!("tabulated.t[{j}]"), "node must be finite"));
                }
                let v: Vec<Complex64> = tab.v.iter().map(|&x| x.into()).collect();
                if let Some(j) = v.iter().position(|x| !x.is_finite()) {
                    return Err(SchemaError::field(format!("tabulated.v[{j}]"), "value must be finite"));
                }
                KernelSpec::tabulated(self.level, &tab.t, &v).map_err(|e| kernel_error("tabulated", e))?
            }
            (None, _) => {
                let pos = check_terms("pos_terms", self.pos_terms.as_deref().unwrap_or(&[]))?;
                let neg = check_terms("neg_terms", self.neg_terms.as_deref().unwrap_or(&[]))?;
                if pos.is_empty() && neg.is_empty() {
                    warnings.push("kernel has no terms on either half-line; treating it as identically zero".to_string());
                }
                KernelSpec::closed_form(self.level, pos, neg).map_err(|e| kernel_error("pos_terms", e))?
            }
        };
        Ok(ParsedSpec {
            doc: self.clone(),
            spec,
            warnings,
        })
    }
}

fn kernel_error(field: &str, e: KernelError) -> SchemaError {
    SchemaError::field(field, e.to_string())
}

/// Parses and validates a kernel-spec document.
pub fn parse_kernel_spec(text: &str) -> Result<ParsedSpec, SchemaError> {
    let doc: KernelSpecDoc = serde_json::from_str(text).map_err(|e| SchemaError {
        line: Some(e.line()),
        column: Some(e.column()),
        field: "<document>".to_string(),
        message: e.to_string(),
    })?;
    doc.to_spec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::HalfLine;

    #[test]
    fn gamma_minus_one_document() {
        let p = parse_kernel_spec(
            r#"{"level": "K1", "pos_terms": [{"c": 1, "k": 0, "a": 1}], "neg_terms": [{"c": -1, "k": 0, "a": 1}]}"#,
        )
        .unwrap();
        assert_eq!(p.spec.level(), Level::K1);
        assert!(p.warnings.is_empty());
        let expected = KernelSpec::closed_form(
            Level::K1,
            vec![ExpTerm::new(1.0, 0, 1.0)],
            vec![ExpTerm::new(-1.0, 0, 1.0)],
        )
        .unwrap();
        assert_eq!(p.spec, expected);
    }

    #[test]
    fn complex_pairs_are_accepted() {
        let p = parse_kernel_spec(r#"{"level": "K", "pos_terms": [{"c": [0.5, -2], "k": 1, "a": 3}]}"#).unwrap();
        let (pos, neg) = p.spec.terms().unwrap();
        assert_eq!(pos.terms()[0].c, Complex64::new(0.5, -2.0));
        assert!(neg.is_zero());
    }

    #[test]
    fn empty_terms_warn() {
        let p = parse_kernel_spec(r#"{"level": "K1", "pos_terms": [], "neg_terms": []}"#).unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert_eq!(p.spec, KernelSpec::zero(Level::K1));
    }

    #[test]
    fn decreasing_nodes_are_rejected() {
        let e = parse_kernel_spec(r#"{"level": "K0", "tabulated": {"t": [-1, 0, 2, 1], "v": [1, 1, 1, 1]}}"#)
            .unwrap_err();
        assert_eq!(e.field, "tabulated.t[3]");
    }

    #[test]
    fn tabulated_document() {
        let t: Vec<f64> = (-200..=200).map(|j| j as f64 * 0.1).collect();
        let v: Vec<String> = t.iter().map(|x| format!("{}", 0.5 * (-x.abs()).exp())).collect();
        let text = format!(
            r#"{{"level": "K0", "tabulated": {{"t": [{}], "v": [{}]}}}}"#,
            t.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
            v.join(",")
        );
        let p = parse_kernel_spec(&text).unwrap();
        assert!(matches!(p.spec.pos(), HalfLine::Table(_)));
        assert!((p.spec.eval(1.0).re - 0.5 * (-1f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn schema_errors_carry_location() {
        let e = parse_kernel_spec("{\n  \"level\": \"K1\",\n  \"pos_terms\": [{\"c\": 1, \"k\": -1, \"a\": 1}]\n}").unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = parse_kernel_spec(r#"{"level": "K2"}"#).unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = parse_kernel_spec(r#"{"level": "K1", "pos_terms": [{"c": 1, "k": 0, "a": 0}]}"#).unwrap_err();
        assert_eq!(e.field, "pos_terms[0].a");
        let e = parse_kernel_spec(r#"{"level": "K1", "pos_term": []}"#).unwrap_err();
        assert!(e.message.contains("pos_term"));
    }

    #[test]
    fn mixed_representations_are_rejected() {
        let e = parse_kernel_spec(
            r#"{"level": "K1", "pos_terms": [{"c": 1, "k": 0, "a": 1}], "tabulated": {"t": [-1, 1], "v": [0, 0]}}"#,
        )
        .unwrap_err();
        assert_eq!(e.field, "tabulated");
    }

    #[test]
    fn document_round_trips() {
        let text = r#"{"level":"K0","pos_terms":[{"c":0.5,"k":0,"a":1.0}],"neg_terms":[{"c":[0.5,0.0],"k":0,"a":1.0}]}"#;
        let p = parse_kernel_spec(text).unwrap();
        let again = parse_kernel_spec(&serde_json::to_string(&p.doc).unwrap()).unwrap();
        assert_eq!(again, p);
    }
}
