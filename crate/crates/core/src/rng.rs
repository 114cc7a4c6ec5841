//! Seeded random matrices and states.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::qmat::{CMatrix, DensityMatrix, C64};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream for sub-task `index` of a run seeded with `seed`.
pub fn substream(seed: u64, index: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

pub fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Complex Ginibre matrix with standard normal entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian_c64(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    ginibre(rng, dim, dim).hermitian_part()
}

/// Haar-random pure state vector.
pub fn random_ket<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..dim).map(|_| gaussian_c64(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

pub fn random_pure<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    DensityMatrix::pure(&random_ket(rng, dim)).expect("nonzero Gaussian vector")
}

/// Hilbert-Schmidt random mixed state `G G^dagger / Tr`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    let g = ginibre(rng, dim, dim);
    DensityMatrix::from_psd(g.mul_adjoint(&g)).expect("Ginibre Gram matrix is PSD")
}

/// Random state whose smallest eigenvalue is at least `floor`, obtained by
/// mixing a Hilbert-Schmidt state with the maximally mixed state.
pub fn random_full_rank<R: Rng + ?Sized>(rng: &mut R, dim: usize, floor: f64) -> DensityMatrix {
    assert!(floor * dim as f64 <= 1.0);
    let rho = random_density(rng, dim);
    let t = floor * dim as f64;
    let mixed = &rho.matrix().scale_real(1.0 - t) + &CMatrix::identity(dim).scale_real(floor);
    DensityMatrix::from_psd(mixed).expect("convex combination of states")
}

/// Isometry (`rows >= cols`) from Gram-Schmidt on a Ginibre matrix.
pub fn random_isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = ginibre(rng, rows, cols);
    let mut q = CMatrix::zeros(rows, cols);
    for k in 0..cols {
        let mut v = g.col(k);
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for j in 0..k {
                let proj: C64 = (0..rows).map(|r| q[(r, j)].conj() * v[r]).sum();
                for (r, x) in v.iter_mut().enumerate() {
                    *x -= proj * q[(r, j)];
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for (r, x) in v.iter().enumerate() {
            q[(r, k)] = x / norm;
        }
    }
    q
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    random_isometry(rng, dim, dim)
}

/// Uniform point on the probability simplex.
pub fn random_probabilities<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}
