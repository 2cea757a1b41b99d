//! Nonlinear improvements of a linear witness.
//!
//! Everything here runs on the rescaled pair `(d_A·Λ̃_W, P/d_A)` where
//! `P = Σ_ij |ii⟩⟨jj|`. The normalized projector satisfies `(P/d)² = P/d`
//! and `d·Λ̃_W[P/d] = W`, so the moment matrix below is a genuine Gram matrix
//! `Tr(σ O_i O_j†)` with `σ = (d·Λ̃_W)†[ρ]`, and the recurrence
//!
//! ```text
//! Q_0 = P/d,  Q_n = Q_{n-1}U_{n-1} - κ Tr(ρ Λ̃[Q_{n-1}U_{n-1}]) 1
//! w_n = Tr(ρ Λ̃[Q_n Q_n†]) = w_{n-1} - κ c_{n-1},  c_{n-1} = |Tr(ρ Λ̃[Q_{n-1}U_{n-1}])|²
//! ```
//!
//! holds exactly with `w_0 = Tr(ρW)` and `κ⁻¹ = Tr(ρ Λ̃[1])`. For the
//! two-qubit witness `(1 + Σ σ_α⊗σ_α)/4` the rescaled map is the partial
//! transposition and `κ⁻¹ = 1`.
//!
//! Every quantity is computed through `x ↦ Tr(ρ Λ̃[x])`, either from the
//! density matrix or from the measured expectation vector when the operator
//! `Λ̃[x]` lies in the measured span.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;

use crate::accessibility::{AccessibilityCertificate, Verdict};
use crate::cj_map::WitnessMap;
use crate::error::{Error, Result};
use crate::operator::{max_entangled_projector, DensityMatrix, Operator};
use crate::tolerances::{DIVERGENCE_FLOOR, TOL_D, TOL_DIV, TOL_SPAN, TOL_UNITARY};
use crate::witness::{span_basis, AccessibleSpan, ExpectationVector, LocalDecomposition};

#[derive(Clone, Debug)]
pub enum UnitarySchedule {
    Constant(Operator),
    /// `U_0, U_1, …`; must hold at least `n_max` entries.
    Sequence(Vec<Operator>),
}

impl UnitarySchedule {
    pub fn at(&self, n: usize) -> &Operator {
        match self {
            Self::Constant(u) => u,
            Self::Sequence(us) => &us[n],
        }
    }

    pub fn first(&self) -> Option<&Operator> {
        match self {
            Self::Constant(u) => Some(u),
            Self::Sequence(us) => us.first(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterationMode {
    FullState,
    RestrictedData,
}

#[derive(Clone, Debug)]
pub struct IterationConfig {
    pub unitaries: UnitarySchedule,
    pub n_max: usize,
    /// Which evaluation path a front end should take.
    pub mode: IterationMode,
}

impl IterationConfig {
    pub fn constant(u: Operator, n_max: usize) -> Self {
        Self {
            unitaries: UnitarySchedule::Constant(u),
            n_max,
            mode: IterationMode::FullState,
        }
    }

    pub fn with_mode(mut self, mode: IterationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self, d_a: usize) -> Result<()> {
        match &self.unitaries {
            UnitarySchedule::Constant(u) => check_unitary(u, d_a),
            UnitarySchedule::Sequence(us) => {
                if us.len() < self.n_max.max(1) {
                    return Err(Error::InvalidConfig(format!(
                        "unitary sequence has {} entries, need {}",
                        us.len(),
                        self.n_max.max(1)
                    )));
                }
                us.iter().try_for_each(|u| check_unitary(u, d_a))
            }
        }
    }
}

pub(crate) fn check_unitary(u: &Operator, d_a: usize) -> Result<()> {
    if u.dim() != d_a * d_a {
        return Err(Error::DimensionMismatch {
            context: "unitary on A⊗A′",
            expected: format!("{}", d_a * d_a),
            found: format!("{}", u.dim()),
        });
    }
    let deviation = u.unitarity_deviation();
    if deviation > TOL_UNITARY {
        return Err(Error::NotUnitary { deviation });
    }
    Ok(())
}

pub(crate) fn check_involution(u: &Operator) -> Result<()> {
    let deviation = u.involution_deviation();
    if deviation > TOL_UNITARY {
        return Err(Error::NotInvolution { deviation });
    }
    Ok(())
}

/// The recurrence output.
#[derive(Clone, Debug)]
pub struct IterationState {
    /// `Q_n` for the last computed `n`.
    pub q_current: Operator,
    /// `w_0 … w_n`.
    pub w_values: Vec<f64>,
    /// `c_0 … c_{n-1}`.
    pub c_values: Vec<f64>,
    pub kappa_inv: f64,
    /// `Tr(ρ Λ̃[U_0])`.
    pub k_value: Complex64,
    /// `Tr(ρ Λ̃[P U_0])`.
    pub c_value: Complex64,
    /// `Tr(ρ Λ̃[P]) - κ c k`.
    pub d_value: Complex64,
}

impl IterationState {
    pub fn kappa(&self) -> f64 {
        1.0 / self.kappa_inv
    }

    pub fn linear_value(&self) -> f64 {
        self.w_values[0]
    }

    pub fn last(&self) -> f64 {
        *self.w_values.last().expect("w_0 always present")
    }

    pub fn min_value(&self) -> f64 {
        self.w_values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Some `w_n < 0`.
    pub fn detected(&self) -> bool {
        self.min_value() < 0.0
    }

    pub fn kappa_abs_k(&self) -> f64 {
        self.kappa() * self.k_value.norm()
    }
}

/// `x ↦ Tr(ρ (d·Λ̃)[x])`.
trait ImageFunctional {
    fn value(&self, x: &Operator) -> Result<Complex64>;
}

struct FromState<'a> {
    rho: &'a DensityMatrix,
    map: &'a WitnessMap,
}

impl ImageFunctional for FromState<'_> {
    fn value(&self, x: &Operator) -> Result<Complex64> {
        let scale = self.map.d_a() as f64;
        Ok(self.map.expectation(self.rho, x)? * scale)
    }
}

struct FromData<'a> {
    values: &'a ExpectationVector,
    span: AccessibleSpan,
    map: &'a WitnessMap,
}

impl ImageFunctional for FromData<'_> {
    fn value(&self, x: &Operator) -> Result<Complex64> {
        let scale = self.map.d_a() as f64;
        let image = self.map.apply(x)?;
        Ok(self.span.evaluate(&image, self.values, TOL_SPAN)? * scale)
    }
}

fn check_state(rho: &DensityMatrix, map: &WitnessMap) -> Result<()> {
    let d = map.d_a() * map.d_b();
    if rho.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "state",
            expected: format!("{d}"),
            found: format!("{}", rho.dim()),
        });
    }
    Ok(())
}

fn normalized_projector(d_a: usize) -> Result<Operator> {
    Ok(max_entangled_projector(d_a)?.scale_real(1.0 / d_a as f64))
}

fn kappa_inverse(f: &dyn ImageFunctional, d_a: usize) -> Result<f64> {
    let value = f.value(&Operator::identity(&[d_a, d_a]))?.re;
    if value <= TOL_DIV {
        return Err(Error::VanishingDenominator { value });
    }
    Ok(value)
}

/// Scalars shared by the first step and the analytic limit.
struct Moments {
    kappa_inv: f64,
    linear: Complex64,
    k: Complex64,
    c: Complex64,
}

impl Moments {
    fn compute(f: &dyn ImageFunctional, d_a: usize, u: &Operator) -> Result<Self> {
        let p = normalized_projector(d_a)?;
        let u = u.with_dims(vec![d_a, d_a])?;
        Ok(Self {
            kappa_inv: kappa_inverse(f, d_a)?,
            linear: f.value(&p)?,
            k: f.value(&u)?,
            c: f.value(&(&p * &u))?,
        })
    }

    fn kappa(&self) -> f64 {
        1.0 / self.kappa_inv
    }

    fn d(&self) -> Complex64 {
        self.linear - self.c * self.k * self.kappa()
    }
}

/// The 2×2 matrix `[[Tr σ, Tr σPU], [conj, Tr σP]]` with `σ = (d·Λ̃)†[ρ]`
/// and `P` the normalized projector; positive semi-definite on separable states.
pub fn moment_matrix(
    rho: &DensityMatrix,
    map: &WitnessMap,
    u: &Operator,
) -> Result<Matrix2<Complex64>> {
    check_state(rho, map)?;
    let d_a = map.d_a();
    check_unitary(u, d_a)?;
    let sigma = map.apply_adjoint(rho.op())?.scale_real(d_a as f64);
    let p = normalized_projector(d_a)?;
    let pu = &p * &u.with_dims(vec![d_a, d_a])?;
    let m11 = sigma.trace();
    let m12 = sigma.trace_product(&pu);
    let m22 = sigma.trace_product(&p);
    Ok(Matrix2::new(
        Complex64::new(m11.re, 0.0),
        m12,
        m12.conj(),
        Complex64::new(m22.re, 0.0),
    ))
}

/// `Tr(ρW) - |Tr(ρ Λ̃[PU])|² / Tr(ρ Λ̃[1])`.
pub fn w_nl_first(rho: &DensityMatrix, map: &WitnessMap, u: &Operator) -> Result<f64> {
    check_state(rho, map)?;
    check_unitary(u, map.d_a())?;
    let m = Moments::compute(&FromState { rho, map }, map.d_a(), u)?;
    Ok(m.linear.re - m.c.norm_sqr() * m.kappa())
}

fn run_recurrence(
    f: &dyn ImageFunctional,
    d_a: usize,
    cfg: &IterationConfig,
) -> Result<IterationState> {
    let first = cfg
        .unitaries
        .first()
        .ok_or_else(|| Error::InvalidConfig("empty unitary sequence".into()))?;
    let moments = Moments::compute(f, d_a, first)?;
    let kappa = moments.kappa();
    let identity = Operator::identity(&[d_a, d_a]);

    let mut q = normalized_projector(d_a)?;
    let mut w_values = Vec::with_capacity(cfg.n_max + 1);
    let mut c_values = Vec::with_capacity(cfg.n_max);
    w_values.push(moments.linear.re);
    for n in 0..cfg.n_max {
        let u = cfg.unitaries.at(n).with_dims(vec![d_a, d_a])?;
        let qu = &q * &u;
        let t = f.value(&qu)?;
        let c_n = t.norm_sqr();
        c_values.push(c_n);
        w_values.push(w_values[n] - kappa * c_n);
        q = &qu - &identity.scale(t * kappa);
    }
    Ok(IterationState {
        q_current: q,
        w_values,
        c_values,
        kappa_inv: moments.kappa_inv,
        k_value: moments.k,
        c_value: moments.c,
        d_value: moments.d(),
    })
}

/// `w_0 … w_{n_max}` from the full density matrix.
pub fn iterate(
    rho: &DensityMatrix,
    map: &WitnessMap,
    cfg: &IterationConfig,
) -> Result<IterationState> {
    check_state(rho, map)?;
    cfg.validate(map.d_a())?;
    run_recurrence(&FromState { rho, map }, map.d_a(), cfg)
}

fn restricted_functional<'a>(
    v: &'a ExpectationVector,
    d: &LocalDecomposition,
    map: &'a WitnessMap,
    u: Option<&Operator>,
    access: &AccessibilityCertificate,
) -> Result<FromData<'a>> {
    v.check_against(d)?;
    if d.d_a() != map.d_a() || d.d_b() != map.d_b() {
        return Err(Error::DimensionMismatch {
            context: "decomposition vs map",
            expected: format!("{}x{}", map.d_a(), map.d_b()),
            found: format!("{}x{}", d.d_a(), d.d_b()),
        });
    }
    if access.verdict == Verdict::NotCertified {
        return Err(Error::NotAccessible(
            "accessibility certificate failed".into(),
        ));
    }
    if let Some(u) = u {
        if access.unitary.matrix() != u.matrix() {
            return Err(Error::NotAccessible(
                "certificate was issued for a different unitary".into(),
            ));
        }
    }
    if map.witness().max_abs_diff(&d.assemble()) > TOL_SPAN {
        return Err(Error::NotAccessible(
            "map witness does not match the decomposition".into(),
        ));
    }
    Ok(FromData {
        values: v,
        span: span_basis(d)?,
        map,
    })
}

/// Same recurrence as [`iterate`], evaluated from the expectation vector only.
///
/// Refuses to run without a passing certificate for `U_0`; every further
/// image operator is checked for membership in the measured span.
pub fn iterate_restricted(
    v: &ExpectationVector,
    d: &LocalDecomposition,
    map: &WitnessMap,
    cfg: &IterationConfig,
    access: &AccessibilityCertificate,
) -> Result<IterationState> {
    cfg.validate(map.d_a())?;
    let f = restricted_functional(v, d, map, cfg.unitaries.first(), access)?;
    run_recurrence(&f, map.d_a(), cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum LimitOutcome {
    /// `κ|k| < 1`: the series converges.
    Convergent { value: f64 },
    /// `κ|k| ≥ 1` with `d = 0`: every `w_n` for `n ≥ 1` equals `Tr(ρW) - κ|c|²`.
    Degenerate { value: f64 },
    /// `κ|k| ≥ 1` with `d ≠ 0`: `w_n → -∞`.
    Diverges { first_below_floor: u64 },
}

impl LimitOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Convergent { value } | Self::Degenerate { value } => Some(*value),
            Self::Diverges { .. } => None,
        }
    }

    pub fn diverges(&self) -> bool {
        matches!(self, Self::Diverges { .. })
    }

    /// Negative limit or divergence.
    pub fn detected(&self) -> bool {
        self.value().is_none_or(|v| v < 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnalyticLimit {
    pub kappa_inv: f64,
    pub k: Complex64,
    pub c: Complex64,
    pub d: Complex64,
    pub linear: f64,
    pub outcome: LimitOutcome,
}

impl AnalyticLimit {
    pub fn kappa(&self) -> f64 {
        1.0 / self.kappa_inv
    }

    pub fn kappa_abs_k(&self) -> f64 {
        self.kappa() * self.k.norm()
    }

    /// Closed-form `w_n` for constant involutive `U`, `n ≥ 0`.
    pub fn partial_value(&self, n: usize) -> f64 {
        if n == 0 {
            return self.linear;
        }
        let kappa = self.kappa();
        let r = self.kappa_abs_k().powi(2);
        let tail: f64 = (1..n).map(|m| r.powi(m as i32 - 1)).sum();
        self.linear - kappa * self.c.norm_sqr() - kappa * self.d.norm_sqr() * tail
    }
}

/// Smallest `n` with closed-form `w_n < floor`.
fn first_below_floor(linear: f64, base: f64, a: f64, r: f64, floor: f64) -> u64 {
    if linear < floor {
        return 0;
    }
    if base < floor {
        return 1;
    }
    let need = (base - floor) / a;
    // smallest m = n - 1 with S(m) = Σ_{j<m} r^j > need
    let m = if (r - 1.0).abs() < 1e-15 {
        need.floor() + 1.0
    } else {
        ((1.0 + need * (r - 1.0)).ln() / r.ln()).floor() + 1.0
    };
    (m as u64).saturating_add(1)
}

fn analytic_limit(
    f: &dyn ImageFunctional,
    d_a: usize,
    u: &Operator,
    floor: f64,
) -> Result<AnalyticLimit> {
    let m = Moments::compute(f, d_a, u)?;
    let kappa = m.kappa();
    let linear = m.linear.re;
    let d = m.d();
    let kk = kappa * m.k.norm();
    let base = linear - kappa * m.c.norm_sqr();
    let outcome = if kk < 1.0 {
        LimitOutcome::Convergent {
            value: base - kappa * d.norm_sqr() / (1.0 - kk * kk),
        }
    } else if d.norm() <= TOL_D {
        LimitOutcome::Degenerate { value: base }
    } else {
        LimitOutcome::Diverges {
            first_below_floor: first_below_floor(
                linear,
                base,
                kappa * d.norm_sqr(),
                kk * kk,
                floor,
            ),
        }
    };
    Ok(AnalyticLimit {
        kappa_inv: m.kappa_inv,
        k: m.k,
        c: m.c,
        d,
        linear,
        outcome,
    })
}

/// `lim w_n` for constant `U` with `U² = 1`.
pub fn w_infinity(rho: &DensityMatrix, map: &WitnessMap, u: &Operator) -> Result<AnalyticLimit> {
    w_infinity_with_floor(rho, map, u, DIVERGENCE_FLOOR)
}

pub fn w_infinity_with_floor(
    rho: &DensityMatrix,
    map: &WitnessMap,
    u: &Operator,
    floor: f64,
) -> Result<AnalyticLimit> {
    check_state(rho, map)?;
    check_unitary(u, map.d_a())?;
    check_involution(u)?;
    analytic_limit(&FromState { rho, map }, map.d_a(), u, floor)
}

/// [`w_infinity`] from the expectation vector only.
pub fn w_infinity_restricted(
    v: &ExpectationVector,
    d: &LocalDecomposition,
    map: &WitnessMap,
    u: &Operator,
    access: &AccessibilityCertificate,
) -> Result<AnalyticLimit> {
    check_unitary(u, map.d_a())?;
    check_involution(u)?;
    let f = restricted_functional(v, d, map, Some(u), access)?;
    analytic_limit(&f, map.d_a(), u, DIVERGENCE_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accessibility::check_analytic;
    use crate::operator::{pauli_string, swap};
    use crate::random::{random_density_matrix, random_separable};
    use crate::states::{self, BellState, StateSpec};
    use crate::witness::{expectation_vector, presets};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn w0_map() -> WitnessMap {
        WitnessMap::from_witness(&presets::two_qubit().assemble(), 2, 2).unwrap()
    }

    fn bell() -> DensityMatrix {
        states::make(&StateSpec::Bell {
            which: BellState::PhiPlus,
        })
        .unwrap()
    }

    /// `Tr(ρ (d·Λ̃)[Q_n Q_n†])` with the `Q_n` built by hand, no recurrence shortcuts.
    fn direct_sequence(
        rho: &DensityMatrix,
        map: &WitnessMap,
        u: &Operator,
        n_max: usize,
    ) -> Vec<f64> {
        let d = map.d_a();
        let scale = d as f64;
        let image_value = |x: &Operator| rho.expectation(&map.apply(x).unwrap()) * scale;
        let id = Operator::identity(&[d, d]);
        let kappa = 1.0 / image_value(&id).re;
        let u = u.with_dims(vec![d, d]).unwrap();
        let mut q = max_entangled_projector(d).unwrap().scale_real(1.0 / scale);
        let mut out = vec![image_value(&(&q * &q.dagger())).re];
        for _ in 0..n_max {
            let qu = &q * &u;
            let t = image_value(&qu);
            q = &qu - &id.scale(t * kappa);
            out.push(image_value(&(&q * &q.dagger())).re);
        }
        out
    }

    #[test]
    fn bell_moment_matrix() {
        let m = moment_matrix(&bell(), &w0_map(), &swap(2)).unwrap();
        let expected = [[1.0, 0.5], [0.5, 0.5]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[(i, j)] - Complex64::new(expected[i][j], 0.0)).norm() < 1e-12);
            }
        }
        let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
        assert!((det - 0.25).abs() < 1e-12);
    }

    #[test]
    fn moment_matrix_of_separable_states_is_psd() {
        let map = w0_map();
        let rho = states::computational_basis_state(&[2, 2], &[0, 0]).unwrap();
        for u in [
            swap(2),
            pauli_string("ZZ").unwrap(),
            pauli_string("XI").unwrap(),
        ] {
            let m = moment_matrix(&rho, &map, &u).unwrap();
            let op =
                Operator::new(nalgebra::DMatrix::from_fn(2, 2, |i, j| m[(i, j)]), vec![2]).unwrap();
            assert!(op.min_eigenvalue().unwrap() >= -1e-9);
        }
        let mixed = DensityMatrix::maximally_mixed(&[2, 2]);
        let m = moment_matrix(&mixed, &map, &swap(2)).unwrap();
        // [[1, 1/4], [1/4, 1/4]]: SWAP fixes the projector, so c = Tr(ρW) = 1/4.
        assert!((m[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!((m[(0, 1)].re - 0.25).abs() < 1e-12);
        assert!((m[(1, 1)].re - 0.25).abs() < 1e-12);
    }

    #[test]
    fn moment_matrix_rejects_non_unitary() {
        let half_sum = &swap(2) + &Operator::identity(&[2, 2]);
        assert!(matches!(
            moment_matrix(&bell(), &w0_map(), &half_sum),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn first_improvement() {
        let map = w0_map();
        assert!((w_nl_first(&bell(), &map, &swap(2)).unwrap() - 0.25).abs() < 1e-12);
        // c(ρ) = 0 leaves the linear value untouched: ρ = 1/4 with U = Z⊗1.
        let mixed = DensityMatrix::maximally_mixed(&[2, 2]);
        let xx = pauli_string("ZI").unwrap();
        let m = moment_matrix(&mixed, &map, &xx).unwrap();
        assert!(m[(0, 1)].norm() < 1e-15);
        assert_eq!(
            w_nl_first(&mixed, &map, &xx).unwrap(),
            mixed.expectation(map.witness()).re
        );
    }

    #[test]
    fn determinant_sign_matches_first_improvement() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let map = w0_map();
        for _ in 0..30 {
            let rho = random_density_matrix(&mut rng, &[2, 2]);
            let m = moment_matrix(&rho, &map, &swap(2)).unwrap();
            let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
            let w = w_nl_first(&rho, &map, &swap(2)).unwrap();
            let kappa_inv = m[(0, 0)].re;
            assert!((det - w * kappa_inv).abs() < 1e-10);
        }
    }

    #[test]
    fn bell_sequence_matches_direct_matrix_evaluation() {
        let map = w0_map();
        let state = iterate(&bell(), &map, &IterationConfig::constant(swap(2), 3)).unwrap();
        let direct = direct_sequence(&bell(), &map, &swap(2), 3);
        let expected = [0.5, 0.25, 0.0, -1.0];
        for ((got, oracle), want) in state.w_values.iter().zip(&direct).zip(expected) {
            assert!((got - want).abs() < 1e-10, "{:?}", state.w_values);
            assert!((oracle - want).abs() < 1e-10, "{direct:?}");
        }
        assert!((state.kappa_inv - 1.0).abs() < 1e-12);
        assert!((state.k_value.re - 2.0).abs() < 1e-12);
        assert!((state.c_value.re - 0.5).abs() < 1e-12);
        assert!((state.d_value.re + 0.5).abs() < 1e-12);
    }

    #[test]
    fn recurrence_equals_direct_evaluation_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let smolin_map = WitnessMap::from_witness(&presets::smolin().assemble(), 4, 4).unwrap();
        for (map, u) in [
            (w0_map(), swap(2)),
            (w0_map(), pauli_string("ZZ").unwrap()),
            (w0_map(), pauli_string("XY").unwrap()),
            (smolin_map, swap(4)),
        ] {
            let dims = [map.d_a(), map.d_b()];
            for _ in 0..5 {
                let rho = random_density_matrix(&mut rng, &dims);
                let state = iterate(&rho, &map, &IterationConfig::constant(u.clone(), 6)).unwrap();
                let direct = direct_sequence(&rho, &map, &u, 6);
                for (a, b) in state.w_values.iter().zip(&direct) {
                    assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn separable_states_stay_non_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let map = w0_map();
        for u in [swap(2), pauli_string("ZZ").unwrap()] {
            for s in 0..200 {
                let rho = random_separable(&mut rng, 2, 2, 1 + s % 8);
                let state = iterate(&rho, &map, &IterationConfig::constant(u.clone(), 10)).unwrap();
                assert!(state.min_value() >= -1e-9, "{:?}", state.w_values);
            }
        }
        let product = states::computational_basis_state(&[2, 2], &[0, 0]).unwrap();
        let limit = w_infinity(&product, &map, &swap(2)).unwrap();
        assert!(limit.outcome.value().unwrap() >= -1e-9);
    }

    #[test]
    fn vanishing_c_keeps_first_step() {
        let mixed = DensityMatrix::maximally_mixed(&[2, 2]);
        let state = iterate(
            &mixed,
            &w0_map(),
            &IterationConfig::constant(pauli_string("ZI").unwrap(), 5),
        )
        .unwrap();
        assert!(state.c_values[0] < 1e-30);
        assert_eq!(state.w_values[1], state.w_values[0]);
        // Q_1 = P U, so the second step sees |Tr(ρW)|² again
        assert!((state.c_values[1] - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn bell_limit_diverges() {
        let limit = w_infinity(&bell(), &w0_map(), &swap(2)).unwrap();
        assert!(limit.kappa_abs_k() >= 1.0);
        assert!(limit.d.norm() > 0.0);
        // w_n = 1/4 - (4^{n-1} - 1)/12 first drops below -1e6 at n = 13.
        assert_eq!(
            limit.outcome,
            LimitOutcome::Diverges {
                first_below_floor: 13
            }
        );
        let state = iterate(&bell(), &w0_map(), &IterationConfig::constant(swap(2), 13)).unwrap();
        assert!(state.w_values[12] > DIVERGENCE_FLOOR);
        assert!(state.w_values[13] < DIVERGENCE_FLOOR);
    }

    #[test]
    fn first_below_floor_linear_growth() {
        // r = 1: w_n = base - a (n - 1); base = 1, a = 1, floor = -10 → n = 13
        assert_eq!(first_below_floor(2.0, 1.0, 1.0, 1.0, -10.0), 13);
        assert_eq!(first_below_floor(-20.0, -30.0, 1.0, 1.0, -10.0), 0);
        assert_eq!(first_below_floor(2.0, -30.0, 1.0, 1.0, -10.0), 1);
    }

    #[test]
    fn degenerate_boundary_for_computational_product() {
        // |00⟩ with U = SWAP sits on κ|k| = 1 with d = 0.
        let rho = states::computational_basis_state(&[2, 2], &[0, 0]).unwrap();
        let limit = w_infinity(&rho, &w0_map(), &swap(2)).unwrap();
        assert!((limit.kappa_abs_k() - 1.0).abs() < 1e-12);
        match limit.outcome {
            LimitOutcome::Degenerate { value } => assert!((value - 0.25).abs() < 1e-12),
            other => panic!("expected degenerate limit, got {other:?}"),
        }
    }

    #[test]
    fn analytic_limit_matches_partial_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let map = w0_map();
        let zz = pauli_string("ZZ").unwrap();
        let mut checked = 0;
        for _ in 0..40 {
            let rho = random_density_matrix(&mut rng, &[2, 2]);
            let limit = w_infinity(&rho, &map, &zz).unwrap();
            let state = iterate(&rho, &map, &IterationConfig::constant(zz.clone(), 20)).unwrap();
            for (n, w) in state.w_values.iter().enumerate() {
                assert!((w - limit.partial_value(n)).abs() < 1e-9 * w.abs().max(1.0));
            }
            if let LimitOutcome::Convergent { value } = limit.outcome {
                checked += 1;
                let gaps: Vec<f64> = state.w_values.iter().map(|w| w - value).collect();
                for pair in gaps.windows(2) {
                    assert!(pair[1] <= pair[0] + 1e-12);
                    assert!(pair[1] >= -1e-9);
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn phi_family_with_zz_detects_at_pi() {
        let map = w0_map();
        let rho = states::make(&StateSpec::PhiFamily {
            phi: std::f64::consts::PI,
            weight: None,
        })
        .unwrap();
        let limit = w_infinity(&rho, &map, &pauli_string("ZZ").unwrap()).unwrap();
        let t: f64 = 5.0 / 12.0;
        // κ = 1, k = -2/3, c = t, d = 5t/3 → w∞ = t - 6t²
        assert_eq!(
            limit.outcome,
            LimitOutcome::Convergent {
                value: limit.outcome.value().unwrap()
            }
        );
        assert!((limit.outcome.value().unwrap() - (t - 6.0 * t * t)).abs() < 1e-12);
    }

    #[test]
    fn smolin_limit_closed_form() {
        let d = presets::smolin();
        let map = WitnessMap::from_witness(&d.assemble(), 4, 4).unwrap();
        for k in 0..=10 {
            let p = k as f64 / 10.0;
            let rho = states::make(&StateSpec::Smolin { p }).unwrap();
            let t = (3.0 * p - 2.0) / 16.0;
            let limit = w_infinity(&rho, &map, &swap(4)).unwrap();
            let expected = t - 2.0 * t * t / (1.0 + 4.0 * t);
            assert!((limit.outcome.value().unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn w_infinity_requires_involution() {
        let s = Complex64::new(0.0, 1.0);
        let phase = Operator::new(
            nalgebra::DMatrix::from_fn(4, 4, |i, j| {
                if i != j {
                    Complex64::new(0.0, 0.0)
                } else if i == 3 {
                    s
                } else {
                    Complex64::new(1.0, 0.0)
                }
            }),
            vec![2, 2],
        )
        .unwrap();
        assert!(matches!(
            w_infinity(&bell(), &w0_map(), &phase),
            Err(Error::NotInvolution { .. })
        ));
        // plain iteration accepts it
        assert!(iterate(&bell(), &w0_map(), &IterationConfig::constant(phase, 4)).is_ok());
    }

    #[test]
    fn vanishing_denominator_is_reported() {
        // A witness whose map kills the identity: W = σ_z ⊗ σ_z.
        let w = pauli_string("ZZ").unwrap();
        let map = WitnessMap::from_witness(&w, 2, 2).unwrap();
        let err = iterate(&bell(), &map, &IterationConfig::constant(swap(2), 2)).unwrap_err();
        assert!(matches!(err, Error::VanishingDenominator { .. }));
    }

    #[test]
    fn sequence_schedule_needs_enough_entries() {
        let cfg = IterationConfig {
            unitaries: UnitarySchedule::Sequence(vec![swap(2)]),
            n_max: 3,
            mode: IterationMode::FullState,
        };
        assert!(matches!(
            iterate(&bell(), &w0_map(), &cfg),
            Err(Error::InvalidConfig(_))
        ));
        let cfg = IterationConfig {
            unitaries: UnitarySchedule::Sequence(vec![
                swap(2),
                pauli_string("ZZ").unwrap(),
                swap(2),
            ]),
            n_max: 3,
            mode: IterationMode::FullState,
        };
        let state = iterate(&bell(), &w0_map(), &cfg).unwrap();
        assert_eq!(state.w_values.len(), 4);
    }

    #[test]
    fn restricted_path_matches_full_state() {
        let d = presets::two_qubit();
        let map = w0_map();
        let cert = check_analytic(&d, &map, &swap(2)).unwrap();
        let v = expectation_vector(&bell(), &d).unwrap();
        let cfg = IterationConfig::constant(swap(2), 3);
        let restricted = iterate_restricted(&v, &d, &map, &cfg, &cert).unwrap();
        let full = iterate(&bell(), &map, &cfg).unwrap();
        for (a, b) in restricted.w_values.iter().zip(&full.w_values) {
            assert!((a - b).abs() < 1e-12);
        }
        let lim = w_infinity_restricted(&v, &d, &map, &swap(2), &cert).unwrap();
        assert!(lim.outcome.diverges());

        let s = presets::smolin();
        let smap = WitnessMap::from_witness(&s.assemble(), 4, 4).unwrap();
        let scert = check_analytic(&s, &smap, &swap(4)).unwrap();
        let rho = states::make(&StateSpec::Smolin { p: 2.0 / 3.0 }).unwrap();
        let sv = expectation_vector(&rho, &s).unwrap();
        let state = iterate_restricted(
            &sv,
            &s,
            &smap,
            &IterationConfig::constant(swap(4), 4),
            &scert,
        )
        .unwrap();
        assert!(state.w_values[0].abs() < 1e-15);
    }

    #[test]
    fn restricted_path_refuses_without_certificate() {
        let d = presets::two_qubit();
        let map = w0_map();
        let xi = pauli_string("XI").unwrap();
        let cert = check_analytic(&d, &map, &xi).unwrap();
        assert_eq!(cert.verdict, Verdict::NotCertified);
        let v = expectation_vector(&bell(), &d).unwrap();
        let err =
            iterate_restricted(&v, &d, &map, &IterationConfig::constant(xi, 3), &cert).unwrap_err();
        assert!(matches!(err, Error::NotAccessible(_)));

        // certificate for another unitary is rejected too
        let good = check_analytic(&d, &map, &swap(2)).unwrap();
        let zz = pauli_string("ZZ").unwrap();
        let err =
            iterate_restricted(&v, &d, &map, &IterationConfig::constant(zz, 3), &good).unwrap_err();
        assert!(matches!(err, Error::NotAccessible(_)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]

            #[test]
            fn sequence_is_non_increasing(seed in any::<u64>(), which in 0usize..3) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rho = random_density_matrix(&mut rng, &[2, 2]);
                let u = [swap(2), pauli_string("ZZ").unwrap(), crate::random::haar_unitary(&mut rng, 4)
                    .with_dims(vec![2, 2]).unwrap()][which].clone();
                let state = iterate(&rho, &w0_map(), &IterationConfig::constant(u, 8)).unwrap();
                prop_assert!(state.kappa() > 0.0);
                for pair in state.w_values.windows(2) {
                    prop_assert!(pair[1] <= pair[0] + 1e-12);
                }
                prop_assert!(state.c_values.iter().all(|&c| c >= 0.0));
            }

            #[test]
            fn scaling_the_map_scales_the_sequence(seed in any::<u64>(), s in 0.2f64..5.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rho = random_density_matrix(&mut rng, &[2, 2]);
                let map = w0_map();
                let scaled = map.scaled(s).unwrap();
                let cfg = IterationConfig::constant(swap(2), 6);
                let a = iterate(&rho, &map, &cfg).unwrap();
                let b = iterate(&rho, &scaled, &cfg).unwrap();
                for (x, y) in a.w_values.iter().zip(&b.w_values) {
                    prop_assert!((s * x - y).abs() < 1e-9 * y.abs().max(1.0));
                }
                prop_assert!((a.kappa_abs_k() - b.kappa_abs_k()).abs() < 1e-10);
            }
        }
    }
}
