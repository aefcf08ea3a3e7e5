//! Random operators and states for sweeps and property checks.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::operator::{CMatrix, DensityMatrix, HermitianOperator, StateVector};

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    })
}

/// GUE-like Hermitian matrix with spectrum of width roughly `4 * scale`.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> HermitianOperator {
    let g = ginibre(dim, dim, rng);
    let norm = scale / (2.0 * dim as f64).sqrt();
    HermitianOperator::hermitian_part(&(g.scale(norm)))
}

/// Real diagonal operator with entries uniform in `[-scale, scale]`.
pub fn random_diagonal<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> HermitianOperator {
    let diag: Vec<f64> = (0..dim).map(|_| rng.random_range(-scale..scale)).collect();
    HermitianOperator::from_real_diagonal(&diag)
}

/// Haar-random pure state.
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> StateVector {
    let g = ginibre(dim, 1, rng);
    StateVector::normalized(g.iter().copied().collect()).expect("Gaussian vector is nonzero")
}

/// Full-rank random density matrix `G G^dagger / tr(G G^dagger)`.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    random_density_matrix_with_rank(dim, dim, rng)
}

pub fn random_density_matrix_with_rank<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(dim, rank.max(1), rng);
    let m = &g * g.adjoint();
    let tr: f64 = m.diagonal().iter().map(|z| z.re).sum();
    let m = HermitianOperator::hermitian_part(&m.unscale(tr)).into_matrix();
    DensityMatrix::new(m).expect("Wishart matrix is a valid state")
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(dim, dim, rng).qr();
    let (q, r) = qr.unpack();
    let mut u = q;
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for row in 0..dim {
            u[(row, k)] *= phase;
        }
    }
    u
}

/// Random probability vector, uniform on the simplex.
pub fn random_probabilities<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}
