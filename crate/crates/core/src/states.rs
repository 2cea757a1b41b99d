//! State families used by the worked examples and the property tests.
//!
//! Bell states are indexed `Ψ_0..Ψ_3 = Φ+, Φ−, Ψ+, Ψ−` in the computational basis.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{tensor, tensor_all, DensityMatrix, Operator};
use crate::random;

/// Pure-state weight of the two-qubit phase family.
pub const PHI_FAMILY_WEIGHT: f64 = 2.0 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BellState {
    #[serde(rename = "phi+")]
    PhiPlus,
    #[serde(rename = "phi-")]
    PhiMinus,
    #[serde(rename = "psi+")]
    PsiPlus,
    #[serde(rename = "psi-")]
    PsiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [Self::PhiPlus, Self::PhiMinus, Self::PsiPlus, Self::PsiMinus];

    pub fn ket(self) -> DVector<Complex64> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = match self {
            Self::PhiPlus => [h, 0.0, 0.0, h],
            Self::PhiMinus => [h, 0.0, 0.0, -h],
            Self::PsiPlus => [0.0, h, h, 0.0],
            Self::PsiMinus => [0.0, h, -h, 0.0],
        };
        DVector::from_iterator(4, amps.iter().map(|&a| Complex64::new(a, 0.0)))
    }

    pub fn projector(self) -> Operator {
        Operator::ket_bra(&self.ket(), &[2, 2]).expect("4x4")
    }
}

/// Declarative state description; the CLI reads it as JSON,
/// e.g. `{"family":"smolin","p":0.5}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Bell {
        which: BellState,
    },
    /// `w|φ⟩⟨φ| + (1-w)/4·1` with `|φ⟩ = (|01⟩ - e^{iφ}|10⟩)/√2`; `w = 2/3` by default.
    PhiFamily {
        phi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<f64>,
    },
    /// `(1-p)ρ_S + p·1/16`.
    Smolin {
        p: f64,
    },
    /// Product of local kets given as `[[re, im], ...]` amplitude lists.
    Product {
        kets: Vec<Vec<[f64; 2]>>,
    },
    RandomSeparable {
        seed: u64,
        #[serde(default = "default_components")]
        components: usize,
        #[serde(default = "default_dim", rename = "dA")]
        d_a: usize,
        #[serde(default = "default_dim", rename = "dB")]
        d_b: usize,
    },
    RandomState {
        seed: u64,
        #[serde(default = "default_dims")]
        dims: Vec<usize>,
    },
}

fn default_components() -> usize {
    4
}

fn default_dim() -> usize {
    2
}

fn default_dims() -> Vec<usize> {
    vec![2, 2]
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::OutOfRange {
            name,
            value: p,
            range: "[0, 1]",
        });
    }
    Ok(())
}

pub fn make(spec: &StateSpec) -> Result<DensityMatrix> {
    match spec {
        StateSpec::Bell { which } => DensityMatrix::new(which.projector()),
        StateSpec::PhiFamily { phi, weight } => {
            phi_family(*phi, weight.unwrap_or(PHI_FAMILY_WEIGHT))
        }
        StateSpec::Smolin { p } => white_noise_mix(&smolin_state(), *p),
        StateSpec::Product { kets } => product_state(kets),
        StateSpec::RandomSeparable {
            seed,
            components,
            d_a,
            d_b,
        } => {
            if *d_a < 2 || *d_b < 2 || *components == 0 {
                return Err(Error::InvalidConfig(
                    "random_separable needs dA, dB >= 2 and components >= 1".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok(random::random_separable(&mut rng, *d_a, *d_b, *components))
        }
        StateSpec::RandomState { seed, dims } => {
            if dims.is_empty() || dims.contains(&0) {
                return Err(Error::InvalidConfig(
                    "random_state needs non-empty positive dims".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok(random::random_density_matrix(&mut rng, dims))
        }
    }
}

pub fn phi_family(phi: f64, weight: f64) -> Result<DensityMatrix> {
    check_probability("weight", weight)?;
    if !phi.is_finite() {
        return Err(Error::NonFinite);
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let zero = Complex64::new(0.0, 0.0);
    let ket = DVector::from_vec(vec![
        zero,
        Complex64::new(h, 0.0),
        -Complex64::from_polar(h, phi),
        zero,
    ]);
    let pure = Operator::ket_bra(&ket, &[2, 2])?;
    let noise = Operator::identity(&[2, 2]).scale_real((1.0 - weight) / 4.0);
    DensityMatrix::new(&pure.scale_real(weight) + &noise)
}

/// `(1/4) Σ_k P_{Ψk} ⊗ P_{Ψk}` on qubits (12)(34).
pub fn smolin_state() -> DensityMatrix {
    let mut acc = Operator::zeros(&[2, 2, 2, 2]);
    for b in BellState::ALL {
        let p = b.projector();
        acc = &acc + &tensor(&p, &p).scale_real(0.25);
    }
    DensityMatrix::new(acc).expect("Smolin state is valid")
}

/// `(1-p)ρ + p·1/D`.
pub fn white_noise_mix(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    check_probability("p", p)?;
    let d = rho.dim() as f64;
    let dims = rho.op().dims().to_vec();
    let mixed = &rho.op().scale_real(1.0 - p) + &Operator::identity(&dims).scale_real(p / d);
    DensityMatrix::new(mixed)
}

pub fn product_state(kets: &[Vec<[f64; 2]>]) -> Result<DensityMatrix> {
    if kets.is_empty() {
        return Err(Error::InvalidState(
            "product state needs at least one ket".into(),
        ));
    }
    let factors = kets
        .iter()
        .enumerate()
        .map(|(i, amps)| {
            let v =
                DVector::from_iterator(amps.len(), amps.iter().map(|a| Complex64::new(a[0], a[1])));
            let norm = v.norm();
            if amps.is_empty() || norm == 0.0 || !norm.is_finite() {
                return Err(Error::InvalidState(format!(
                    "kets[{i}] is empty, zero or non-finite"
                )));
            }
            Operator::ket_bra(&(v / Complex64::new(norm, 0.0)), &[amps.len()])
        })
        .collect::<Result<Vec<_>>>()?;
    DensityMatrix::new(tensor_all(&factors).expect("non-empty"))
}

/// `|i_1 … i_n⟩⟨i_1 … i_n|`.
pub fn computational_basis_state(dims: &[usize], digits: &[usize]) -> Result<DensityMatrix> {
    if dims.len() != digits.len() || digits.iter().zip(dims).any(|(i, d)| i >= d) {
        return Err(Error::InvalidState(format!(
            "basis label {digits:?} does not fit dims {dims:?}"
        )));
    }
    let kets: Vec<Vec<[f64; 2]>> = dims
        .iter()
        .zip(digits)
        .map(|(&d, &i)| {
            (0..d)
                .map(|k| [if k == i { 1.0 } else { 0.0 }, 0.0])
                .collect()
        })
        .collect();
    product_state(&kets)
}
