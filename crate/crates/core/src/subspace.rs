//! Orthonormal (Hilbert–Schmidt) bases of operator subspaces.
//!
//! Operators are handled through their column-stacked vectorizations, so a
//! subspace of `B(C^D)` is an orthonormal set of columns in `C^{D²}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::Operator;
use crate::tolerances::TOL_RANK;

#[derive(Clone, Debug)]
pub struct OperatorSubspace {
    columns: DMatrix<Complex64>,
    dims: Vec<usize>,
}

/// Outcome of projecting an operator onto a subspace.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum SpanMembership {
    InSpan {
        #[serde(skip)]
        coefficients: DVector<Complex64>,
        residual: f64,
    },
    NotInSpan {
        residual: f64,
    },
}

impl SpanMembership {
    pub fn residual(&self) -> f64 {
        match self {
            Self::InSpan { residual, .. } | Self::NotInSpan { residual } => *residual,
        }
    }

    pub fn is_in_span(&self) -> bool {
        matches!(self, Self::InSpan { .. })
    }

    pub fn coefficients(&self) -> Option<&DVector<Complex64>> {
        match self {
            Self::InSpan { coefficients, .. } => Some(coefficients),
            Self::NotInSpan { .. } => None,
        }
    }
}

fn singular_cutoff(max_sv: f64) -> f64 {
    TOL_RANK * max_sv.max(1.0)
}

impl OperatorSubspace {
    /// Wraps already-orthonormal vectorized columns.
    pub fn from_orthonormal_columns(columns: DMatrix<Complex64>, dims: Vec<usize>) -> Self {
        Self { columns, dims }
    }

    pub fn zero(dims: &[usize]) -> Self {
        let d: usize = dims.iter().product();
        Self {
            columns: DMatrix::zeros(d * d, 0),
            dims: dims.to_vec(),
        }
    }

    pub fn full(dims: &[usize]) -> Self {
        let d: usize = dims.iter().product();
        Self {
            columns: DMatrix::identity(d * d, d * d),
            dims: dims.to_vec(),
        }
    }

    /// Orthonormal basis of `span{ops}` through a thin SVD of the stacked
    /// vectorizations. Also returns the `N × r` matrix expressing each basis
    /// element as a combination of the inputs: `E_k = Σ_i M[i,k] ops[i]`.
    pub fn spanned_by(ops: &[Operator]) -> Result<(Self, DMatrix<Complex64>)> {
        let first = ops
            .first()
            .ok_or_else(|| Error::InvalidConfig("empty spanning set".into()))?;
        let dims = first.dims().to_vec();
        let d2 = first.dim() * first.dim();
        for op in ops {
            if op.dim() != first.dim() {
                return Err(Error::DimensionMismatch {
                    context: "spanning set",
                    expected: format!("{}", first.dim()),
                    found: format!("{}", op.dim()),
                });
            }
        }
        let n = ops.len();
        let mut stacked = DMatrix::zeros(d2, n);
        for (k, op) in ops.iter().enumerate() {
            stacked.set_column(k, &op.vec());
        }
        // Pad so the SVD always yields all n right singular vectors.
        let rows = d2.max(n);
        let mut padded = DMatrix::zeros(rows, n);
        padded.view_mut((0, 0), (d2, n)).copy_from(&stacked);
        let svd = padded.svd(true, true);
        let u = svd.u.expect("requested U");
        let v_t = svd.v_t.expect("requested V^T");
        let max_sv = svd.singular_values.max();
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&k| max_sv > 0.0 && svd.singular_values[k] > singular_cutoff(max_sv))
            .collect();
        let r = keep.len();
        let mut columns = DMatrix::zeros(d2, r);
        let mut to_inputs = DMatrix::zeros(n, r);
        for (col, &k) in keep.iter().enumerate() {
            columns.set_column(col, &u.column(k).rows(0, d2));
            let sigma = svd.singular_values[k];
            for i in 0..n {
                to_inputs[(i, col)] = v_t[(k, i)].conj() / sigma;
            }
        }
        Ok((Self { columns, dims }, to_inputs))
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn columns(&self) -> &DMatrix<Complex64> {
        &self.columns
    }

    pub fn element(&self, k: usize) -> Operator {
        let d: usize = self.dims.iter().product();
        let col = self.columns.column(k).into_owned();
        Operator::new(
            DMatrix::from_column_slice(d, d, col.as_slice()),
            self.dims.clone(),
        )
        .expect("basis element shape")
    }

    pub fn elements(&self) -> Vec<Operator> {
        (0..self.dim()).map(|k| self.element(k)).collect()
    }

    fn check_ambient(&self, x: &Operator) -> Result<()> {
        if x.dim() * x.dim() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                context: "span membership",
                expected: format!(
                    "operator on dimension {}",
                    (self.ambient_dim() as f64).sqrt()
                ),
                found: format!("{}", x.dim()),
            });
        }
        Ok(())
    }

    /// Orthogonal projection coefficients and the residual norm.
    pub fn project(&self, x: &Operator) -> Result<(DVector<Complex64>, f64)> {
        self.check_ambient(x)?;
        let v = x.vec();
        let coeffs = self.columns.adjoint() * &v;
        let residual = (&v - &self.columns * &coeffs).norm();
        Ok((coeffs, residual))
    }

    /// Residual of projection only, for membership tests against the
    /// orthogonal complement basis.
    pub fn overlap_norm(&self, x: &Operator) -> Result<f64> {
        self.check_ambient(x)?;
        Ok((self.columns.adjoint() * x.vec()).norm())
    }

    pub fn membership(&self, x: &Operator, tol: f64) -> Result<SpanMembership> {
        let (coefficients, residual) = self.project(x)?;
        Ok(if residual < tol {
            SpanMembership::InSpan {
                coefficients,
                residual,
            }
        } else {
            SpanMembership::NotInSpan { residual }
        })
    }

    /// `I - ΠΠ†` as a dense matrix on the ambient vector space.
    pub fn complement_projector(&self) -> DMatrix<Complex64> {
        let n = self.ambient_dim();
        DMatrix::identity(n, n) - &self.columns * self.columns.adjoint()
    }
}

/// Null space and row space of `m` (as orthonormal column sets of `C^{ncols}`).
pub fn kernel_and_coimage(m: &DMatrix<Complex64>) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let (rows, cols) = m.shape();
    let padded_rows = rows.max(cols);
    let mut padded = DMatrix::zeros(padded_rows, cols);
    padded.view_mut((0, 0), (rows, cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let max_sv = svd.singular_values.max();
    let cutoff = singular_cutoff(max_sv);
    let (mut ker, mut img) = (Vec::new(), Vec::new());
    for k in 0..svd.singular_values.len() {
        let v: DVector<Complex64> = v_t.row(k).adjoint();
        if svd.singular_values[k] <= cutoff {
            ker.push(v);
        } else {
            img.push(v);
        }
    }
    let to_matrix = |vs: Vec<DVector<Complex64>>| {
        if vs.is_empty() {
            DMatrix::zeros(cols, 0)
        } else {
            DMatrix::from_columns(&vs)
        }
    };
    (to_matrix(ker), to_matrix(img))
}
