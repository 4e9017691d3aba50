//! Random instances for property tests and demos.

use rand::Rng;

use crate::error::Result;
use crate::framework::{InstrumentModel, MicroState, MicroSystem};
use crate::linalg::{ComplexOperator, DensityOperator, ProjectorOperator};
use crate::scalar::{c, Complex, Real};

fn unit<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.gen_range(-1.0..1.0))
}

pub fn random_complex_matrix<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
) -> ComplexOperator<T> {
    ComplexOperator::from_fn(dim, |_, _| c(unit(rng), unit(rng)))
}

/// Hermitian matrix with entries of order `scale`.
pub fn random_hermitian<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    scale: T,
) -> ComplexOperator<T> {
    let a = random_complex_matrix(rng, dim);
    (&a + &a.adjoint()).scale_real(scale * T::HALF)
}

/// Unitary whose columns are the eigenvectors of a random Hermitian matrix.
pub fn random_unitary<T: Real, R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexOperator<T> {
    random_hermitian(rng, dim, T::ONE).hermitian_eigen().1
}

/// Full-rank random density operator `G G† / Tr(G G†)`.
pub fn random_density<T: Real, R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityOperator<T> {
    let g = random_complex_matrix::<T, R>(rng, dim);
    let gg = &g * &g.adjoint();
    let tr = gg.trace().re;
    DensityOperator::new(gg.scale_real(T::ONE / tr)).expect("G G† is positive")
}

pub fn random_microstate<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> MicroState<T> {
    let raw: Vec<Complex<T>> = (0..n).map(|_| c(unit(rng), unit(rng))).collect();
    let norm = raw.iter().fold(T::ZERO, |acc, z| acc + z.norm_sqr()).sqrt();
    MicroState::new(raw.into_iter().map(|z| z / c(norm, T::ZERO)).collect()).expect("normalized")
}

/// `n` mutually orthogonal projectors summing to the identity, each of rank at
/// least one, built from a random orthonormal basis.
pub fn random_cells<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    n: usize,
) -> Result<Vec<ProjectorOperator<T>>> {
    assert!(
        n >= 1 && dim >= n,
        "need at least one basis vector per cell"
    );
    let q = random_unitary::<T, R>(rng, dim);
    let mut owner: Vec<usize> = (0..dim)
        .map(|k| if k < n { k } else { rng.gen_range(0..n) })
        .collect();
    for k in (1..dim).rev() {
        owner.swap(k, rng.gen_range(0..=k));
    }
    (0..n)
        .map(|alpha| {
            let vectors: Vec<Vec<Complex<T>>> = (0..dim)
                .filter(|&k| owner[k] == alpha)
                .map(|k| (0..dim).map(|i| q.get(i, k)).collect())
                .collect();
            ProjectorOperator::from_orthonormal(&vectors, dim)
        })
        .collect()
}

/// A random composite: energies, instrument with random `K`, `V_r`, cells, and
/// a random initial instrument state.
#[derive(Debug, Clone)]
pub struct RandomInstance<T: Real> {
    pub system: MicroSystem<T>,
    pub instrument: InstrumentModel<T>,
    pub omega: DensityOperator<T>,
}

pub fn random_instance<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    dim: usize,
) -> Result<RandomInstance<T>> {
    let energies = (0..n).map(|_| unit::<T, R>(rng)).collect();
    let free = random_hermitian(rng, dim, T::ONE);
    let couplings = (0..n).map(|_| random_hermitian(rng, dim, T::ONE)).collect();
    let cells = random_cells(rng, dim, n)?;
    Ok(RandomInstance {
        system: MicroSystem::new(energies)?,
        instrument: InstrumentModel::new(free, couplings, cells)?,
        omega: random_density(rng, dim),
    })
}
