//! Dense operators on finite-dimensional multi-partite Hilbert spaces.
//!
//! Subsystem 0 is the most significant factor of the computational basis
//! index, matching the Kronecker product ordering.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerances::{TOL_HERMITIAN, TOL_PSD, TOL_TRACE};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A square complex matrix together with the subsystem dimensions it acts on.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    data: DMatrix<Complex64>,
    dims: Vec<usize>,
}

impl Operator {
    pub fn new(data: DMatrix<Complex64>, dims: Vec<usize>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if dims.is_empty() || !data.is_square() || data.nrows() != total {
            return Err(Error::DimensionMismatch {
                context: "operator construction",
                expected: format!("{total}x{total} for dims {dims:?}"),
                found: format!("{}x{}", data.nrows(), data.ncols()),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { data, dims })
    }

    /// Wraps a square matrix as a single-subsystem operator.
    pub fn from_matrix(data: DMatrix<Complex64>) -> Result<Self> {
        let d = data.nrows();
        Self::new(data, vec![d])
    }

    /// Builds an operator from row-major real/imaginary pairs.
    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                context: "explicit matrix",
                expected: "non-empty square matrix".into(),
                found: format!(
                    "{n} rows of lengths {:?}",
                    rows.iter().map(Vec::len).collect::<Vec<_>>()
                ),
            });
        }
        let data = DMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1]));
        Self::from_matrix(data)
    }

    pub fn identity(dims: &[usize]) -> Self {
        let d = dims.iter().product();
        Self {
            data: DMatrix::identity(d, d),
            dims: dims.to_vec(),
        }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let d = dims.iter().product();
        Self {
            data: DMatrix::zeros(d, d),
            dims: dims.to_vec(),
        }
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) ket.
    pub fn ket_bra(ket: &DVector<Complex64>, dims: &[usize]) -> Result<Self> {
        Self::new(ket * ket.adjoint(), dims.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.data
    }

    /// Same matrix, relabelled subsystem structure.
    pub fn with_dims(&self, dims: Vec<usize>) -> Result<Self> {
        Self::new(self.data.clone(), dims)
    }

    pub fn dagger(&self) -> Self {
        Self {
            data: self.data.adjoint(),
            dims: self.dims.clone(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.data.trace()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            data: &self.data * factor,
            dims: self.dims.clone(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// Hilbert–Schmidt inner product `Tr(self† other)`.
    pub fn hs_inner(&self, other: &Operator) -> Complex64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn hs_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> Complex64 {
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += self.data[(i, k)] * other.data[(k, i)];
            }
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.max_abs_diff(&self.dagger())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    pub fn hermitian_part(&self) -> Self {
        Self {
            data: (&self.data + self.data.adjoint()) * Complex64::new(0.5, 0.0),
            dims: self.dims.clone(),
        }
    }

    pub fn unitarity_deviation(&self) -> f64 {
        let prod = &self.data * self.data.adjoint();
        max_deviation_from_identity(&prod)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() <= tol
    }

    /// Max entrywise deviation of `self²` from the identity.
    pub fn involution_deviation(&self) -> f64 {
        max_deviation_from_identity(&(&self.data * &self.data))
    }

    /// Column-stacking vectorization.
    pub fn vec(&self) -> DVector<Complex64> {
        DVector::from_column_slice(self.data.as_slice())
    }

    pub fn from_vec(v: &DVector<Complex64>, dims: &[usize]) -> Result<Self> {
        let d: usize = dims.iter().product();
        if v.len() != d * d {
            return Err(Error::DimensionMismatch {
                context: "devectorization",
                expected: format!("{}", d * d),
                found: format!("{}", v.len()),
            });
        }
        Self::new(
            DMatrix::from_column_slice(d, d, v.as_slice()),
            dims.to_vec(),
        )
    }

    pub fn tensor(&self, other: &Operator) -> Operator {
        tensor(self, other)
    }

    fn check_subsystems(&self, subsystems: &[usize]) -> Result<()> {
        for &s in subsystems {
            if s >= self.dims.len() {
                return Err(Error::InvalidSubsystem {
                    index: s,
                    count: self.dims.len(),
                });
            }
        }
        Ok(())
    }

    /// Traces out the listed subsystems.
    pub fn partial_trace(&self, subsystems: &[usize]) -> Result<Operator> {
        self.check_subsystems(subsystems)?;
        let n = self.dims.len();
        let traced: Vec<bool> = (0..n).map(|k| subsystems.contains(&k)).collect();
        let kept_dims: Vec<usize> = (0..n)
            .filter(|&k| !traced[k])
            .map(|k| self.dims[k])
            .collect();
        let traced_dims: Vec<usize> = (0..n)
            .filter(|&k| traced[k])
            .map(|k| self.dims[k])
            .collect();
        let out_dims = if kept_dims.is_empty() {
            vec![1]
        } else {
            kept_dims.clone()
        };
        let d_out: usize = kept_dims.iter().product();
        let d_tr: usize = traced_dims.iter().product();
        let strides = strides(&self.dims);

        // Splice kept and traced digits back into a full index.
        let compose = |kept: usize, tr: usize| -> usize {
            let kd = digits(kept, &kept_dims);
            let td = digits(tr, &traced_dims);
            let (mut ki, mut ti) = (0, 0);
            let mut idx = 0;
            for k in 0..n {
                let digit = if traced[k] {
                    ti += 1;
                    td[ti - 1]
                } else {
                    ki += 1;
                    kd[ki - 1]
                };
                idx += digit * strides[k];
            }
            idx
        };

        let mut out = DMatrix::zeros(d_out, d_out);
        for r in 0..d_out {
            for c in 0..d_out {
                let mut acc = ZERO;
                for t in 0..d_tr {
                    acc += self.data[(compose(r, t), compose(c, t))];
                }
                out[(r, c)] = acc;
            }
        }
        Operator::new(out, out_dims)
    }

    /// Transposes the listed subsystems in the computational basis.
    pub fn partial_transpose(&self, subsystems: &[usize]) -> Result<Operator> {
        self.check_subsystems(subsystems)?;
        let strides = strides(&self.dims);
        let d = self.dim();
        let mut out = DMatrix::zeros(d, d);
        for i in 0..d {
            let ri = digits(i, &self.dims);
            for j in 0..d {
                let cj = digits(j, &self.dims);
                let (mut r, mut c) = (0, 0);
                for (k, stride) in strides.iter().enumerate() {
                    let (a, b) = if subsystems.contains(&k) {
                        (cj[k], ri[k])
                    } else {
                        (ri[k], cj[k])
                    };
                    r += a * stride;
                    c += b * stride;
                }
                out[(r, c)] = self.data[(i, j)];
            }
        }
        Operator::new(out, self.dims.clone())
    }

    /// Reorders tensor factors: output factor `k` is input factor `perm[k]`.
    pub fn permute_subsystems(&self, perm: &[usize]) -> Result<Operator> {
        let n = self.dims.len();
        let mut seen = vec![false; n];
        if perm.len() != n
            || perm
                .iter()
                .any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::InvalidConfig(format!(
                "{perm:?} is not a permutation of {n} subsystems"
            )));
        }
        let new_dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let old_strides = strides(&self.dims);
        let map_index = |new_idx: usize| -> usize {
            let nd = digits(new_idx, &new_dims);
            perm.iter()
                .enumerate()
                .map(|(k, &p)| nd[k] * old_strides[p])
                .sum()
        };
        let d = self.dim();
        let lookup: Vec<usize> = (0..d).map(map_index).collect();
        let out = DMatrix::from_fn(d, d, |i, j| self.data[(lookup[i], lookup[j])]);
        Operator::new(out, new_dims)
    }

    /// Eigen-decomposition of the Hermitian part, eigenvalues ascending.
    pub fn eigh(&self) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
        let deviation = self.hermiticity_deviation();
        if deviation > TOL_HERMITIAN {
            return Err(Error::NotHermitian { deviation });
        }
        let eig = SymmetricEigen::new(self.hermitian_part().data);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(self.dim(), order.len(), |i, j| {
            eig.eigenvectors[(i, order[j])]
        });
        Ok((values, vectors))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.eigh().map(|(v, _)| v)
    }

    /// Smallest eigenvalue of `(x + x†)/2`; errors when `x` is not Hermitian.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.data.clone().singular_values().max()
    }
}

fn max_deviation_from_identity(m: &DMatrix<Complex64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((m[(i, j)] - target).norm());
        }
    }
    worst
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

fn digits(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
    out
}

/// Kronecker product; the result's dims are the concatenation.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    let mut dims = a.dims.clone();
    dims.extend_from_slice(&b.dims);
    Operator {
        data: a.data.kronecker(&b.data),
        dims,
    }
}

pub fn tensor_all<'a>(ops: impl IntoIterator<Item = &'a Operator>) -> Option<Operator> {
    let mut iter = ops.into_iter();
    let first = iter.next()?.clone();
    Some(iter.fold(first, |acc, op| tensor(&acc, op)))
}

pub fn pauli(label: char) -> Result<Operator> {
    let m = match label {
        'I' => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ONE]),
        'X' => DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        'Y' => DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        'Z' => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        other => return Err(Error::UnknownPauliLabel(other)),
    };
    Ok(Operator {
        data: m,
        dims: vec![2],
    })
}

/// Tensor product of single-qubit Paulis, e.g. `"XZI"`.
pub fn pauli_string(labels: &str) -> Result<Operator> {
    let factors = labels.chars().map(pauli).collect::<Result<Vec<_>>>()?;
    tensor_all(&factors).ok_or(Error::EmptyPauliString)
}

/// Unnormalized `Σ_ij |ii⟩⟨jj|` on `C^d ⊗ C^d`; trace `d`, `P² = d·P`.
pub fn max_entangled_projector(d: usize) -> Result<Operator> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let mut m = DMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + i, j * d + j)] = ONE;
        }
    }
    Ok(Operator {
        data: m,
        dims: vec![d, d],
    })
}

/// Swap of the two factors of `C^d ⊗ C^d`.
pub fn swap(d: usize) -> Operator {
    let mut m = DMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(j * d + i, i * d + j)] = ONE;
        }
    }
    Operator {
        data: m,
        dims: vec![d, d],
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator dims={:?}", self.dims)?;
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| {
                    let z = self.data[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator {
            data: &self.data + &rhs.data,
            dims: self.dims.clone(),
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator {
            data: &self.data - &rhs.data,
            dims: self.dims.clone(),
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator {
            data: &self.data * &rhs.data,
            dims: self.dims.clone(),
        }
    }
}

impl Mul<Complex64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: Complex64) -> Operator {
        self.scale(rhs)
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scale_real(rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale_real(-1.0)
    }
}

/// A validated quantum state: Hermitian, unit trace, positive semi-definite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        Self::with_tolerance(op, TOL_PSD)
    }

    pub fn with_tolerance(op: Operator, tol_psd: f64) -> Result<Self> {
        let deviation = op.hermiticity_deviation();
        if deviation > TOL_HERMITIAN {
            return Err(Error::NotHermitian { deviation });
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > TOL_TRACE || tr.im.abs() > TOL_TRACE {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min = op.min_eigenvalue()?;
        if min < -tol_psd {
            return Err(Error::InvalidState(format!(
                "minimum eigenvalue {min:.3e} is negative"
            )));
        }
        Ok(Self(op.hermitian_part()))
    }

    /// Pure state from a ket; the ket is normalized first.
    pub fn pure(ket: &DVector<Complex64>, dims: &[usize]) -> Result<Self> {
        let norm = ket.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero ket".into()));
        }
        Self::new(Operator::ket_bra(&(ket / Complex64::new(norm, 0.0)), dims)?)
    }

    pub fn maximally_mixed(dims: &[usize]) -> Self {
        let d: usize = dims.iter().product();
        Self(Operator::identity(dims).scale_real(1.0 / d as f64))
    }

    pub fn op(&self) -> &Operator {
        &self.0
    }

    pub fn into_op(self) -> Operator {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// `Tr(ρ X)`.
    pub fn expectation(&self, x: &Operator) -> Complex64 {
        self.0.trace_product(x)
    }
}

impl AsRef<Operator> for DensityMatrix {
    fn as_ref(&self) -> &Operator {
        &self.0
    }
}
