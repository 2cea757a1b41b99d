//! Seeded random kets, unitaries and states.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::operator::{tensor, DensityMatrix, Operator};

fn gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random unit vector in `C^d`.
pub fn haar_ket(rng: &mut impl Rng, d: usize) -> DVector<Complex64> {
    let v = DVector::from_fn(d, |_, _| gaussian(rng));
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

/// Haar-random unitary via QR of a Ginibre matrix with the phase correction of Mezzadri.
pub fn haar_unitary(rng: &mut impl Rng, d: usize) -> Operator {
    let g = DMatrix::from_fn(d, d, |_, _| gaussian(rng));
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let diag = r[(j, j)];
        let phase = if diag.norm() > 0.0 {
            diag / diag.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    Operator::from_matrix(q).expect("finite unitary")
}

/// Matrix with i.i.d. complex Gaussian entries; not Hermitian.
pub fn random_operator(rng: &mut impl Rng, dims: &[usize]) -> Operator {
    let d: usize = dims.iter().product();
    Operator::new(DMatrix::from_fn(d, d, |_, _| gaussian(rng)), dims.to_vec()).expect("finite")
}

pub fn random_hermitian(rng: &mut impl Rng, dims: &[usize]) -> Operator {
    random_operator(rng, dims).hermitian_part()
}

/// Full-rank random state `GG†/Tr(GG†)` with `G` Ginibre.
pub fn random_density_matrix(rng: &mut impl Rng, dims: &[usize]) -> DensityMatrix {
    let g = random_operator(rng, dims);
    let gg = &g * &g.dagger();
    let tr = gg.trace().re;
    DensityMatrix::new(gg.scale_real(1.0 / tr)).expect("Ginibre state is valid")
}

/// Convex mixture of `components` Haar-random pure product states across `d_a ⊗ d_b`.
pub fn random_separable(
    rng: &mut impl Rng,
    d_a: usize,
    d_b: usize,
    components: usize,
) -> DensityMatrix {
    let components = components.max(1);
    let weights: Vec<f64> = (0..components)
        .map(|_| rng.random::<f64>() + 1e-3)
        .collect();
    let total: f64 = weights.iter().sum();
    let mut acc = Operator::zeros(&[d_a, d_b]);
    for w in weights {
        let a = Operator::ket_bra(&haar_ket(rng, d_a), &[d_a]).expect("square");
        let b = Operator::ket_bra(&haar_ket(rng, d_b), &[d_b]).expect("square");
        acc = &acc + &tensor(&a, &b).scale_real(w / total);
    }
    DensityMatrix::new(acc).expect("mixture of product states is valid")
}

/// Convex mixture of `components` pure states that are products over every factor in `local_dims`.
pub fn random_fully_separable(
    rng: &mut impl Rng,
    local_dims: &[usize],
    components: usize,
) -> DensityMatrix {
    let components = components.max(1);
    let weights: Vec<f64> = (0..components)
        .map(|_| rng.random::<f64>() + 1e-3)
        .collect();
    let total: f64 = weights.iter().sum();
    let mut acc = Operator::zeros(local_dims);
    for w in weights {
        let factors: Vec<Operator> = local_dims
            .iter()
            .map(|&d| Operator::ket_bra(&haar_ket(rng, d), &[d]).expect("square"))
            .collect();
        let product = crate::operator::tensor_all(&factors).expect("at least one factor");
        acc = &acc + &product.scale_real(w / total);
    }
    DensityMatrix::new(acc).expect("mixture of product states is valid")
}
