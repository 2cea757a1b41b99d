//! Certificates that a nonlinear witness can be evaluated from the measured
//! expectation values alone.
//!
//! `V` is the span of the measured terms and `V′` the largest subspace of
//! `B(H_A ⊗ H_A′)` that `Λ̃_W` maps into `V`. A functional `x ↦ Tr(ρ Λ̃[x])`
//! is measurable exactly when `Λ̃[x] ∈ V`, i.e. when `x ∈ V′`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::cj_map::WitnessMap;
use crate::error::{Error, Result};
use crate::nonlinear::{check_involution, check_unitary};
use crate::operator::{max_entangled_projector, Operator};
use crate::subspace::{kernel_and_coimage, OperatorSubspace};
use crate::tolerances::TOL_SPAN;
use crate::witness::{span_basis, AccessibleSpan, LocalDecomposition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    SufficientAccessible,
    AnalyticAccessible,
    NotCertified,
}

impl Verdict {
    /// Both verdicts other than `NotCertified` cover the analytic quantities.
    pub fn is_analytic(self) -> bool {
        !matches!(self, Self::NotCertified)
    }
}

/// One entry per image operator `Λ̃[x]` tested against `V`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ImageChecks<T> {
    pub identity: T,
    pub u: T,
    pub projector_u: T,
    pub projector: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Checks<T> {
    #[serde(rename = "identity_in_V'")]
    pub identity_in_v_prime: T,
    #[serde(rename = "U_in_V'")]
    pub u_in_v_prime: T,
    /// Only evaluated by [`check_sufficient`].
    pub algebra_closed: Option<T>,
    #[serde(rename = "images_in_V")]
    pub images_in_v: ImageChecks<T>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AccessibilityCertificate {
    pub verdict: Verdict,
    pub v_dim: usize,
    pub v_prime_dim: usize,
    #[serde(skip)]
    pub v_prime_basis: OperatorSubspace,
    pub checks: Checks<bool>,
    pub residuals: Checks<f64>,
    pub tolerance: f64,
    /// The unitary the certificate was issued for.
    #[serde(skip)]
    pub unitary: Operator,
}

impl AccessibilityCertificate {
    /// Largest residual over every check that was run.
    pub fn worst_residual(&self) -> f64 {
        let r = &self.residuals;
        [
            r.identity_in_v_prime,
            r.u_in_v_prime,
            r.algebra_closed.unwrap_or(0.0),
            r.images_in_v.identity,
            r.images_in_v.u,
            r.images_in_v.projector_u,
            r.images_in_v.projector,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// `V′` together with its orthogonal complement in the domain.
struct Preimage {
    kernel: DMatrix<Complex64>,
    coimage: DMatrix<Complex64>,
    dims: Vec<usize>,
}

impl Preimage {
    fn compute(map: &WitnessMap, v: &OperatorSubspace) -> Self {
        let m = v.complement_projector() * map.forward();
        let (kernel, coimage) = kernel_and_coimage(&m);
        Self {
            kernel,
            coimage,
            dims: vec![map.d_a(), map.d_a()],
        }
    }

    /// Norm of the component of `x` outside `V′`.
    fn residual(&self, x: &Operator) -> f64 {
        let v = x.vec();
        if self.kernel.ncols() <= self.coimage.ncols() {
            (&v - &self.kernel * (self.kernel.adjoint() * &v)).norm()
        } else {
            (self.coimage.adjoint() * &v).norm()
        }
    }

    fn subspace(&self) -> OperatorSubspace {
        OperatorSubspace::from_orthonormal_columns(self.kernel.clone(), self.dims.clone())
    }

    /// Worst residual over all products of basis pairs.
    fn closure_residual(&self) -> f64 {
        let basis = self.subspace().elements();
        let mut worst: f64 = 0.0;
        for a in &basis {
            for b in &basis {
                worst = worst.max(self.residual(&(a * b)));
            }
        }
        worst
    }
}

/// Orthonormal basis of `V′ = {x : Λ̃[x] ∈ V}`.
pub fn preimage_subspace(map: &WitnessMap, v_basis: &OperatorSubspace) -> Result<OperatorSubspace> {
    let expected = map.d_a() * map.d_b();
    if v_basis.ambient_dim() != expected * expected {
        return Err(Error::DimensionMismatch {
            context: "V basis",
            expected: format!("operators on dimension {expected}"),
            found: format!("ambient dimension {}", v_basis.ambient_dim()),
        });
    }
    Ok(Preimage::compute(map, v_basis).subspace())
}

struct Setup {
    span: AccessibleSpan,
    preimage: Preimage,
    unitary: Operator,
    images: ImageChecks<f64>,
    identity_res: f64,
    u_res: f64,
}

fn setup(d: &LocalDecomposition, map: &WitnessMap, u: &Operator) -> Result<Setup> {
    if d.d_a() != map.d_a() || d.d_b() != map.d_b() {
        return Err(Error::DimensionMismatch {
            context: "decomposition vs map",
            expected: format!("{}x{}", map.d_a(), map.d_b()),
            found: format!("{}x{}", d.d_a(), d.d_b()),
        });
    }
    let d_a = map.d_a();
    check_unitary(u, d_a)?;
    let unitary = u.with_dims(vec![d_a, d_a])?;
    let span = span_basis(d)?;
    let preimage = Preimage::compute(map, span.space());
    let identity = Operator::identity(&[d_a, d_a]);
    let projector = max_entangled_projector(d_a)?;
    let image_residual = |x: &Operator| -> Result<f64> {
        Ok(span.membership(&map.apply(x)?, f64::INFINITY)?.residual())
    };
    let images = ImageChecks {
        identity: image_residual(&identity)?,
        u: image_residual(&unitary)?,
        projector_u: image_residual(&(&projector * &unitary))?,
        projector: image_residual(&projector)?,
    };
    let identity_res = preimage.residual(&identity);
    let u_res = preimage.residual(&unitary);
    Ok(Setup {
        span,
        preimage,
        unitary,
        images,
        identity_res,
        u_res,
    })
}

fn analytic_images_pass(images: &ImageChecks<bool>) -> bool {
    images.identity && images.u && images.projector_u
}

fn certificate(
    s: Setup,
    closure: Option<f64>,
    tol: f64,
    involution: bool,
) -> AccessibilityCertificate {
    let pass = |r: f64| r < tol;
    let images_in_v = ImageChecks {
        identity: pass(s.images.identity),
        u: pass(s.images.u),
        projector_u: pass(s.images.projector_u),
        projector: pass(s.images.projector),
    };
    let checks = Checks {
        identity_in_v_prime: pass(s.identity_res),
        u_in_v_prime: pass(s.u_res),
        algebra_closed: closure.map(pass),
        images_in_v,
    };
    let sufficient =
        checks.identity_in_v_prime && checks.u_in_v_prime && checks.algebra_closed == Some(true);
    let verdict = if sufficient {
        Verdict::SufficientAccessible
    } else if involution && analytic_images_pass(&checks.images_in_v) {
        Verdict::AnalyticAccessible
    } else {
        Verdict::NotCertified
    };
    let v_prime_basis = s.preimage.subspace();
    AccessibilityCertificate {
        verdict,
        v_dim: s.span.dim(),
        v_prime_dim: v_prime_basis.dim(),
        v_prime_basis,
        checks,
        residuals: Checks {
            identity_in_v_prime: s.identity_res,
            u_in_v_prime: s.u_res,
            algebra_closed: closure,
            images_in_v: s.images,
        },
        tolerance: tol,
        unitary: s.unitary,
    }
}

/// Unital-algebra test: `1, U ∈ V′` and `V′·V′ ⊆ V′`.
///
/// Falls back to the analytic verdict when only the image checks pass and `U² = 1`.
pub fn check_sufficient(
    d: &LocalDecomposition,
    map: &WitnessMap,
    u: &Operator,
) -> Result<AccessibilityCertificate> {
    check_sufficient_with_tol(d, map, u, TOL_SPAN)
}

pub fn check_sufficient_with_tol(
    d: &LocalDecomposition,
    map: &WitnessMap,
    u: &Operator,
    tol: f64,
) -> Result<AccessibilityCertificate> {
    let s = setup(d, map, u)?;
    let closure = s.preimage.closure_residual();
    let involution = s.unitary.involution_deviation() <= crate::tolerances::TOL_UNITARY;
    Ok(certificate(s, Some(closure), tol, involution))
}

/// `Λ̃[1], Λ̃[U], Λ̃[P U] ∈ V` for an involutive `U`.
pub fn check_analytic(
    d: &LocalDecomposition,
    map: &WitnessMap,
    u: &Operator,
) -> Result<AccessibilityCertificate> {
    check_analytic_with_tol(d, map, u, TOL_SPAN)
}

pub fn check_analytic_with_tol(
    d: &LocalDecomposition,
    map: &WitnessMap,
    u: &Operator,
    tol: f64,
) -> Result<AccessibilityCertificate> {
    check_involution(u)?;
    let s = setup(d, map, u)?;
    Ok(certificate(s, None, tol, true))
}
