//! Linear witnesses given as locally measured decompositions `W = Σ c_i A_i⊗B_i`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{pauli_string, tensor, DensityMatrix, Operator};
use crate::subspace::{OperatorSubspace, SpanMembership};
use crate::tolerances::TOL_HERMITIAN;

#[derive(Clone, Debug, PartialEq)]
pub struct LocalTerm {
    pub coeff: f64,
    pub a: Operator,
    pub b: Operator,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalDecomposition {
    d_a: usize,
    d_b: usize,
    terms: Vec<LocalTerm>,
}

impl LocalDecomposition {
    pub fn new(d_a: usize, d_b: usize, terms: Vec<LocalTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidConfig(
                "decomposition needs at least one term".into(),
            ));
        }
        for (i, t) in terms.iter().enumerate() {
            if t.a.dim() != d_a || t.b.dim() != d_b {
                return Err(Error::DimensionMismatch {
                    context: "decomposition term",
                    expected: format!("A on {d_a}, B on {d_b}"),
                    found: format!("term {i}: A on {}, B on {}", t.a.dim(), t.b.dim()),
                });
            }
            for op in [&t.a, &t.b] {
                let deviation = op.hermiticity_deviation();
                if deviation > TOL_HERMITIAN {
                    return Err(Error::NotHermitian { deviation });
                }
            }
            if !t.coeff.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { d_a, d_b, terms })
    }

    /// Decomposition over Pauli strings, e.g. `[(0.25, "I", "I"), (0.25, "X", "X")]`.
    pub fn from_paulis(terms: &[(f64, &str, &str)]) -> Result<Self> {
        let built = terms
            .iter()
            .map(|&(coeff, a, b)| {
                Ok(LocalTerm {
                    coeff,
                    a: pauli_string(a)?,
                    b: pauli_string(b)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let d_a = built.first().map_or(0, |t| t.a.dim());
        let d_b = built.first().map_or(0, |t| t.b.dim());
        Self::new(d_a, d_b, built)
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[LocalTerm] {
        &self.terms
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coeff).collect()
    }

    /// `A_i ⊗ B_i`, relabelled as a bipartite `[dA, dB]` operator.
    pub fn term_operator(&self, i: usize) -> Operator {
        let t = &self.terms[i];
        tensor(&t.a, &t.b)
            .with_dims(vec![self.d_a, self.d_b])
            .expect("term shape")
    }

    pub fn term_operators(&self) -> Vec<Operator> {
        (0..self.len()).map(|i| self.term_operator(i)).collect()
    }

    /// `W = Σ c_i A_i⊗B_i`.
    pub fn assemble(&self) -> Operator {
        (0..self.len()).fold(Operator::zeros(&[self.d_a, self.d_b]), |acc, i| {
            &acc + &self.term_operator(i).scale_real(self.terms[i].coeff)
        })
    }

    /// Upper bound `‖A_i‖ ‖B_i‖` on `|⟨A_i⊗B_i⟩|`.
    pub fn term_bounds(&self) -> Vec<f64> {
        self.terms
            .iter()
            .map(|t| t.a.operator_norm() * t.b.operator_norm())
            .collect()
    }

    pub fn span_basis(&self) -> Result<AccessibleSpan> {
        span_basis(self)
    }
}

pub fn assemble(d: &LocalDecomposition) -> Operator {
    d.assemble()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    Simulated,
}

/// Measured (or exactly computed) expectation values `⟨A_i⊗B_i⟩`, one per term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationVector {
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl ExpectationVector {
    pub fn new(values: Vec<f64>, provenance: Provenance) -> Self {
        Self { values, provenance }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_against(&self, d: &LocalDecomposition) -> Result<()> {
        if self.len() != d.len() {
            return Err(Error::DimensionMismatch {
                context: "expectation vector",
                expected: format!("{} values", d.len()),
                found: format!("{}", self.len()),
            });
        }
        Ok(())
    }
}

/// The verification map `ρ ↦ (Tr(ρ A_i⊗B_i))_i`.
pub fn expectation_vector(
    rho: &DensityMatrix,
    d: &LocalDecomposition,
) -> Result<ExpectationVector> {
    if rho.dim() != d.d_a * d.d_b {
        return Err(Error::DimensionMismatch {
            context: "expectation vector",
            expected: format!("state on {}", d.d_a * d.d_b),
            found: format!("{}", rho.dim()),
        });
    }
    let values = (0..d.len())
        .map(|i| rho.expectation(&d.term_operator(i)).re)
        .collect();
    Ok(ExpectationVector::new(values, Provenance::Exact))
}

/// `Σ c_i v_i`.
pub fn linear_witness_value(v: &ExpectationVector, d: &LocalDecomposition) -> Result<f64> {
    v.check_against(d)?;
    Ok(d.terms
        .iter()
        .zip(&v.values)
        .map(|(t, x)| t.coeff * x)
        .sum())
}

/// Orthonormal basis of `V = span{A_i⊗B_i}`, remembering how each basis
/// element is built from the measured terms.
#[derive(Clone, Debug)]
pub struct AccessibleSpan {
    space: OperatorSubspace,
    to_terms: DMatrix<Complex64>,
}

impl AccessibleSpan {
    pub fn space(&self) -> &OperatorSubspace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn membership(&self, x: &Operator, tol: f64) -> Result<SpanMembership> {
        self.space.membership(x, tol)
    }

    /// Coefficients `a_i` with `x = Σ a_i A_i⊗B_i`, given basis coefficients.
    pub fn term_coefficients(&self, basis_coefficients: &DVector<Complex64>) -> DVector<Complex64> {
        &self.to_terms * basis_coefficients
    }

    /// `Tr(ρ x)` from the expectation vector alone, when `x ∈ V` within `tol`.
    pub fn evaluate(&self, x: &Operator, v: &ExpectationVector, tol: f64) -> Result<Complex64> {
        match self.membership(x, tol)? {
            SpanMembership::InSpan { coefficients, .. } => {
                let a = self.term_coefficients(&coefficients);
                Ok(a.iter().zip(&v.values).map(|(ai, vi)| ai * vi).sum())
            }
            SpanMembership::NotInSpan { residual } => Err(Error::NotAccessible(format!(
                "operator lies outside the measured span (residual {residual:.3e})"
            ))),
        }
    }
}

pub fn span_basis(d: &LocalDecomposition) -> Result<AccessibleSpan> {
    let (space, to_terms) = OperatorSubspace::spanned_by(&d.term_operators())?;
    Ok(AccessibleSpan { space, to_terms })
}

pub fn in_span(x: &Operator, basis: &AccessibleSpan, tol: f64) -> Result<SpanMembership> {
    basis.membership(x, tol)
}

/// The two example witnesses.
pub mod presets {
    use super::*;

    /// `W₀ = (1 + Σ_α σ_α⊗σ_α)/4`, equal to half the two-qubit swap.
    pub fn two_qubit() -> LocalDecomposition {
        LocalDecomposition::from_paulis(&[
            (0.25, "I", "I"),
            (0.25, "X", "X"),
            (0.25, "Y", "Y"),
            (0.25, "Z", "Z"),
        ])
        .expect("valid preset")
    }

    /// `(1 - Σ_α σ_α^{⊗4})/16` across the cut 12|34.
    pub fn smolin() -> LocalDecomposition {
        LocalDecomposition::from_paulis(&[
            (1.0 / 16.0, "II", "II"),
            (-1.0 / 16.0, "XX", "XX"),
            (-1.0 / 16.0, "YY", "YY"),
            (-1.0 / 16.0, "ZZ", "ZZ"),
        ])
        .expect("valid preset")
    }
}

/// On-disk witness decomposition.
///
/// ```json
/// {"dA": 2, "dB": 2, "terms": [{"coeff": 0.25, "A": "X", "B": "X"}]}
/// ```
///
/// Observables are Pauli strings over `{I,X,Y,Z}` or explicit row-major
/// complex matrices `[[[re, im], ...], ...]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionFile {
    #[serde(rename = "dA")]
    pub d_a: usize,
    #[serde(rename = "dB")]
    pub d_b: usize,
    pub terms: Vec<TermSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coeff: f64,
    #[serde(rename = "A")]
    pub a: ObservableSpec,
    #[serde(rename = "B")]
    pub b: ObservableSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    Pauli(String),
    Matrix(Vec<Vec<[f64; 2]>>),
}

impl ObservableSpec {
    fn build(&self, expected_dim: usize, field: &str) -> Result<Operator> {
        let op = match self {
            Self::Pauli(s) => {
                pauli_string(s).map_err(|e| Error::InvalidConfig(format!("{field}: {e}")))?
            }
            Self::Matrix(rows) => Operator::from_rows(rows)
                .map_err(|e| Error::InvalidConfig(format!("{field}: {e}")))?,
        };
        if op.dim() != expected_dim {
            return Err(Error::InvalidConfig(format!(
                "{field}: observable has dimension {}, expected {expected_dim}",
                op.dim()
            )));
        }
        let deviation = op.hermiticity_deviation();
        if deviation > TOL_HERMITIAN {
            return Err(Error::InvalidConfig(format!(
                "{field}: observable is not Hermitian (deviation {deviation:.3e})"
            )));
        }
        Ok(op)
    }
}

impl DecompositionFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("witness file: {e}")))
    }

    pub fn to_decomposition(&self) -> Result<LocalDecomposition> {
        if self.terms.is_empty() {
            return Err(Error::InvalidConfig(
                "terms: at least one term is required".into(),
            ));
        }
        for (name, d) in [("dA", self.d_a), ("dB", self.d_b)] {
            if d < 2 {
                return Err(Error::InvalidConfig(format!(
                    "{name}: dimension {d} must be at least 2"
                )));
            }
        }
        let terms = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if !t.coeff.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "terms[{i}].coeff: not finite"
                    )));
                }
                Ok(LocalTerm {
                    coeff: t.coeff,
                    a: t.a.build(self.d_a, &format!("terms[{i}].A"))?,
                    b: t.b.build(self.d_b, &format!("terms[{i}].B"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LocalDecomposition::new(self.d_a, self.d_b, terms)
    }

    /// Serializes a decomposition with explicit matrices for every observable.
    pub fn from_decomposition(d: &LocalDecomposition) -> Self {
        let rows = |op: &Operator| -> Vec<Vec<[f64; 2]>> {
            let m = op.matrix();
            (0..m.nrows())
                .map(|i| {
                    (0..m.ncols())
                        .map(|j| [m[(i, j)].re, m[(i, j)].im])
                        .collect()
                })
                .collect()
        };
        Self {
            d_a: d.d_a,
            d_b: d.d_b,
            terms: d
                .terms
                .iter()
                .map(|t| TermSpec {
                    coeff: t.coeff,
                    a: ObservableSpec::Matrix(rows(&t.a)),
                    b: ObservableSpec::Matrix(rows(&t.b)),
                })
                .collect(),
        }
    }
}
