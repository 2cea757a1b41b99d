//! The extended Choi–Jamiołkowski map of a witness.
//!
//! For a witness `W` on `H_A ⊗ H_B` the map `Λ_W(X) = Tr_A(W^{T_A} (X ⊗ 1_B))`
//! sends `B(H_A)` to `B(H_B)`. Its extension `Λ̃_W = 1_A ⊗ Λ_W` acts on the
//! second (`A′`) factor of `B(H_A ⊗ H_A′)` and inverts the isomorphism:
//! `Λ̃_W[Σ_ij |ii⟩⟨jj|] = W`.
//!
//! Both `Λ̃_W` and its Hilbert–Schmidt adjoint are stored as explicit
//! superoperator matrices on column-stacked vectorizations.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{max_entangled_projector, DensityMatrix, Operator};
use crate::tolerances::TOL_HERMITIAN;

/// `Λ̃[U]` and `Λ̃[P_Ψ+ U]` for one configured unitary.
#[derive(Clone, Debug)]
pub struct UnitaryImages {
    pub unitary: Operator,
    pub image_u: Operator,
    pub image_projector_u: Operator,
}

#[derive(Clone, Debug)]
pub struct WitnessMap {
    witness: Operator,
    d_a: usize,
    d_b: usize,
    scale: f64,
    forward: DMatrix<Complex64>,
    adjoint: DMatrix<Complex64>,
    image_identity: Operator,
    image_projector: Operator,
    unitaries: Vec<UnitaryImages>,
}

impl WitnessMap {
    pub fn from_witness(w: &Operator, d_a: usize, d_b: usize) -> Result<Self> {
        if w.dim() != d_a * d_b {
            return Err(Error::DimensionMismatch {
                context: "witness map",
                expected: format!("{d_a}x{d_b} = {}", d_a * d_b),
                found: format!("{}", w.dim()),
            });
        }
        let deviation = w.hermiticity_deviation();
        if deviation > TOL_HERMITIAN {
            return Err(Error::NotHermitian { deviation });
        }
        let witness = w.with_dims(vec![d_a, d_b])?;
        let forward = build_forward(witness.matrix(), d_a, d_b);
        let adjoint = forward.adjoint();
        let mut map = Self {
            witness,
            d_a,
            d_b,
            scale: 1.0,
            forward,
            adjoint,
            image_identity: Operator::zeros(&[d_a, d_b]),
            image_projector: Operator::zeros(&[d_a, d_b]),
            unitaries: Vec::new(),
        };
        map.refresh_cache()?;
        Ok(map)
    }

    fn refresh_cache(&mut self) -> Result<()> {
        self.image_identity = self.apply(&Operator::identity(&[self.d_a, self.d_a]))?;
        self.image_projector = self.apply(&max_entangled_projector(self.d_a)?)?;
        for entry in &mut self.unitaries {
            let fresh = images_for(&self.forward, self.d_a, self.d_b, &entry.unitary)?;
            *entry = fresh;
        }
        Ok(())
    }

    /// The same map multiplied by `s`; the stored witness is unchanged.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        let factor = Complex64::new(s, 0.0);
        let mut map = self.clone();
        map.scale *= s;
        map.forward *= factor;
        map.adjoint *= factor;
        map.refresh_cache()?;
        Ok(map)
    }

    /// Precomputes and caches `Λ̃[U]` and `Λ̃[P_Ψ+ U]`.
    pub fn with_unitary(mut self, u: &Operator) -> Result<Self> {
        let images = images_for(&self.forward, self.d_a, self.d_b, u)?;
        self.unitaries.push(images);
        Ok(self)
    }

    /// Cached images for `u`, computed on the fly when `u` was not configured.
    pub fn unitary_images(&self, u: &Operator) -> Result<UnitaryImages> {
        if let Some(hit) = self
            .unitaries
            .iter()
            .find(|e| e.unitary.matrix() == u.matrix())
        {
            return Ok(hit.clone());
        }
        images_for(&self.forward, self.d_a, self.d_b, u)
    }

    pub fn witness(&self) -> &Operator {
        &self.witness
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn forward(&self) -> &DMatrix<Complex64> {
        &self.forward
    }

    pub fn adjoint(&self) -> &DMatrix<Complex64> {
        &self.adjoint
    }

    pub fn image_identity(&self) -> &Operator {
        &self.image_identity
    }

    pub fn image_projector(&self) -> &Operator {
        &self.image_projector
    }

    /// `Λ̃_W[x]` for `x` on `H_A ⊗ H_A′`.
    pub fn apply(&self, x: &Operator) -> Result<Operator> {
        apply_forward(&self.forward, self.d_a, self.d_b, x)
    }

    /// `Λ̃†_W[ρ]` for `ρ` on `H_A ⊗ H_B`.
    pub fn apply_adjoint(&self, rho: &Operator) -> Result<Operator> {
        let d_out = self.d_a * self.d_b;
        if rho.dim() != d_out {
            return Err(Error::DimensionMismatch {
                context: "adjoint map input",
                expected: format!("{d_out}"),
                found: format!("{}", rho.dim()),
            });
        }
        let v = &self.adjoint * rho.vec();
        Operator::from_vec(&v, &[self.d_a, self.d_a])
    }

    /// `Tr(ρ Λ̃[x])`.
    pub fn expectation(&self, rho: &DensityMatrix, x: &Operator) -> Result<Complex64> {
        Ok(rho.expectation(&self.apply(x)?))
    }
}

fn images_for(
    forward: &DMatrix<Complex64>,
    d_a: usize,
    d_b: usize,
    u: &Operator,
) -> Result<UnitaryImages> {
    let p = max_entangled_projector(d_a)?;
    let image_u = apply_forward(forward, d_a, d_b, u)?;
    let pu = &p * &u.with_dims(vec![d_a, d_a])?;
    let image_projector_u = apply_forward(forward, d_a, d_b, &pu)?;
    Ok(UnitaryImages {
        unitary: u.clone(),
        image_u,
        image_projector_u,
    })
}

fn apply_forward(
    forward: &DMatrix<Complex64>,
    d_a: usize,
    d_b: usize,
    x: &Operator,
) -> Result<Operator> {
    let d_in = d_a * d_a;
    if x.dim() != d_in {
        return Err(Error::DimensionMismatch {
            context: "witness map input",
            expected: format!("{d_in}"),
            found: format!("{}", x.dim()),
        });
    }
    let v = forward * x.vec();
    Operator::from_vec(&v, &[d_a, d_b])
}

/// Superoperator of `Λ̃_W`, one column per matrix unit `|p⟩⟨q|` of `H_A ⊗ H_A′`.
///
/// With `p = (a, i)`, `q = (b, j)`: `Λ̃[|a i⟩⟨b j|] = |a⟩⟨b| ⊗ W_{ij}` where
/// `W_{ij} = (⟨i| ⊗ 1) W (|j⟩ ⊗ 1)` is the `(i, j)` block of `W`.
fn build_forward(w: &DMatrix<Complex64>, d_a: usize, d_b: usize) -> DMatrix<Complex64> {
    let d_in = d_a * d_a;
    let d_out = d_a * d_b;
    let mut forward = DMatrix::zeros(d_out * d_out, d_in * d_in);
    for a in 0..d_a {
        for i in 0..d_a {
            let p = a * d_a + i;
            for b in 0..d_a {
                for j in 0..d_a {
                    let q = b * d_a + j;
                    let col = p + q * d_in;
                    for k in 0..d_b {
                        for l in 0..d_b {
                            let row = (a * d_b + k) + (b * d_b + l) * d_out;
                            forward[(row, col)] = w[(i * d_b + k, j * d_b + l)];
                        }
                    }
                }
            }
        }
    }
    forward
}
