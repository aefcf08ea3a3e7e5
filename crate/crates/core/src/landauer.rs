//! Entropy bookkeeping for a block-structured memory.
//!
//! The memory space is a direct sum `V = V_0 ⊕ V_1 ⊕ ... ⊕ V_K`. Record `n`
//! is the state `ϱ_n` on block `n`, held with probability `p_n`. Resetting
//! moves the mixture unitarily into block 0, `ϱ₀' = U (Σ p_n ϱ_n) U†`, and
//! since the blocks are orthogonal
//!
//! ```text
//! H({p_n}) = S(ϱ₀') - Σ p_n S(ϱ_n).
//! ```
//!
//! Klein's inequality bounds `S(ϱ₀')` by the cross entropy against a block-0
//! canonical state.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{
    dagger, hermitian_eigen, spectrum_entropy, trace, unitarity_defect, CMatrix, DensityMatrix, HermitianOperator,
};

/// Tolerance on the identity and on the weight left outside block 0.
pub const LANDAUER_TOL: f64 = 1e-10;
/// Eigenvalues above this count towards a block's rank.
pub const RANK_TOL: f64 = 1e-12;

/// `-Σ p ln p` in nats, with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    if p.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::config("probabilities must be nonnegative"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::config(format!("probabilities sum to {total}, expected 1")));
    }
    Ok(p.iter().filter(|x| **x > 0.0).map(|x| -x * x.ln()).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryState {
    block_dimensions: Vec<usize>,
    blocks: Vec<DensityMatrix>,
    probabilities: Vec<f64>,
    beta: f64,
}

impl MemoryState {
    pub fn new(blocks: Vec<DensityMatrix>, probabilities: Vec<f64>, beta: f64) -> Result<Self> {
        if blocks.is_empty() || blocks.len() != probabilities.len() {
            return Err(Error::config(format!(
                "{} blocks with {} probabilities",
                blocks.len(),
                probabilities.len()
            )));
        }
        for (n, block) in blocks.iter().enumerate() {
            block
                .validate()
                .map_err(|e| Error::config(format!("block {n}: {e}")))?;
        }
        shannon_entropy(&probabilities)?;
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::config(format!("beta must be finite and nonnegative, got {beta}")));
        }
        let memory = MemoryState {
            block_dimensions: blocks.iter().map(DensityMatrix::dimension).collect(),
            blocks,
            probabilities,
            beta,
        };
        let needed = memory.support_rank();
        if memory.block_dimensions[0] < needed {
            return Err(Error::config(format!(
                "block 0 has dimension {} but the records need rank {needed}",
                memory.block_dimensions[0]
            )));
        }
        Ok(memory)
    }

    pub fn block_dimensions(&self) -> &[usize] {
        &self.block_dimensions
    }

    pub fn blocks(&self) -> &[DensityMatrix] {
        &self.blocks
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dimension(&self) -> usize {
        self.block_dimensions.iter().sum()
    }

    /// Total rank of the blocks that carry weight.
    pub fn support_rank(&self) -> usize {
        self.blocks
            .iter()
            .zip(&self.probabilities)
            .filter(|(_, p)| **p > 0.0)
            .map(|(b, _)| b.eigenvalues().iter().filter(|l| **l > RANK_TOL).count())
            .sum()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.block_dimensions.len());
        let mut acc = 0;
        for d in &self.block_dimensions {
            offsets.push(acc);
            acc += d;
        }
        offsets
    }

    /// Block-diagonal `Σ p_n ϱ_n` on the full memory space.
    pub fn mixture(&self) -> CMatrix {
        let dim = self.dimension();
        let mut m = CMatrix::zeros(dim, dim);
        for ((block, p), offset) in self.blocks.iter().zip(&self.probabilities).zip(self.offsets()) {
            let d = block.dimension();
            m.view_mut((offset, offset), (d, d))
                .copy_from(&block.matrix().scale(*p));
        }
        m
    }

    /// A unitary that sends the support of the mixture into block 0: the
    /// eigenvectors with nonzero weight go to the first basis states, the
    /// rest fill the remaining ones in order.
    pub fn default_embedding(&self) -> CMatrix {
        let dim = self.dimension();
        let mut columns: Vec<(bool, nalgebra::DVector<Complex64>)> = Vec::with_capacity(dim);
        for ((block, p), offset) in self.blocks.iter().zip(&self.probabilities).zip(self.offsets()) {
            let (values, vectors) = hermitian_eigen(block.matrix());
            for k in (0..values.len()).rev() {
                let mut v = nalgebra::DVector::zeros(dim);
                v.rows_mut(offset, block.dimension()).copy_from(&vectors.column(k));
                columns.push((*p > 0.0 && values[k] > RANK_TOL, v));
            }
        }
        // support vectors first, stable within each group
        columns.sort_by_key(|(support, _)| !*support);
        let mut u = CMatrix::zeros(dim, dim);
        for (target, (_, v)) in columns.iter().enumerate() {
            // U = Σ |e_target><v|
            for j in 0..dim {
                u[(target, j)] = v[j].conj();
            }
        }
        u
    }
}

fn check_embedding(memory: &MemoryState, unitary: &CMatrix) -> Result<CMatrix> {
    let dim = memory.dimension();
    if unitary.shape() != (dim, dim) {
        return Err(Error::config(format!(
            "embedding is {}x{}, memory dimension is {dim}",
            unitary.nrows(),
            unitary.ncols()
        )));
    }
    let defect = unitarity_defect(unitary);
    if defect > 1e-10 {
        return Err(Error::config(format!("embedding is not unitary (defect {defect:e})")));
    }
    let post = unitary * memory.mixture() * dagger(unitary);
    let d0 = memory.block_dimensions[0];
    let outside: f64 = (d0..dim).map(|i| post[(i, i)].re).sum();
    if outside.abs() > LANDAUER_TOL {
        return Err(Error::config(format!("embedding leaves weight {outside:e} outside block 0")));
    }
    Ok(post)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityRecord {
    pub lhs: f64,
    pub rhs: f64,
    pub difference: f64,
    pub holds: bool,
}

/// Evaluates `H(p)` against `S(ϱ₀') - Σ p_n S(ϱ_n)`.
pub fn landauer_identity(memory: &MemoryState, embedding: &CMatrix) -> Result<IdentityRecord> {
    let post = check_embedding(memory, embedding)?;
    let lhs = shannon_entropy(&memory.probabilities)?;
    let (post_values, _) = hermitian_eigen(&post);
    let mut rhs = spectrum_entropy(&post_values)?;
    for (block, p) in memory.blocks.iter().zip(&memory.probabilities) {
        rhs -= p * spectrum_entropy(&block.eigenvalues())?;
    }
    let difference = (lhs - rhs).abs();
    let record = IdentityRecord {
        lhs,
        rhs,
        difference,
        holds: difference < LANDAUER_TOL,
    };
    if !record.holds {
        return Err(Error::invariant(format!(
            "Landauer identity off by {difference:e} (lhs {lhs}, rhs {rhs})"
        )));
    }
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KleinRecord {
    pub cross_entropy: f64,
    pub entropy: f64,
    pub holds: bool,
}

/// `-tr(ϱ₀' ln ϱ_can) ≥ S(ϱ₀')` with `ϱ_can = e^{-βH_0}/Z` on block 0.
pub fn klein_bound(memory: &MemoryState, embedding: &CMatrix, block0_hamiltonian: &HermitianOperator) -> Result<KleinRecord> {
    let d0 = memory.block_dimensions[0];
    if block0_hamiltonian.dimension() != d0 {
        return Err(Error::config(format!(
            "block-0 Hamiltonian has dimension {}, block 0 has {d0}",
            block0_hamiltonian.dimension()
        )));
    }
    let post = check_embedding(memory, embedding)?;
    let restricted: CMatrix = post.view((0, 0), (d0, d0)).into_owned();
    let beta = memory.beta;
    let energies = block0_hamiltonian.eigenvalues();
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    if weights.iter().any(|w| *w < 1e-300) {
        return Err(Error::config("canonical state is rank deficient at this beta"));
    }
    // ln ϱ_can = -β(H - e0) - ln Σ w
    let log_z = weights.iter().sum::<f64>().ln();
    let shifted = block0_hamiltonian.shifted(-e0);
    let mean_energy = trace(&(shifted.matrix() * &restricted)).re;
    let cross_entropy = beta * mean_energy + log_z * trace(&restricted).re;
    let (values, _) = hermitian_eigen(&restricted);
    let entropy = spectrum_entropy(&values)?;
    Ok(KleinRecord {
        cross_entropy,
        entropy,
        holds: cross_entropy >= entropy - LANDAUER_TOL,
    })
}

/// `lhs=.. rhs=.. difference=.. holds=..`.
pub fn identity_summary(record: &IdentityRecord) -> String {
    format!(
        "lhs={:.16e} rhs={:.16e} difference={:.16e} holds={}",
        record.lhs, record.rhs, record.difference, record.holds
    )
}

/// Swap of basis states `a` and `b` on a `dim`-dimensional space.
pub fn swap_embedding(dim: usize, a: usize, b: usize) -> CMatrix {
    let mut u = DMatrix::identity(dim, dim);
    u[(a, a)] = Complex64::new(0.0, 0.0);
    u[(b, b)] = Complex64::new(0.0, 0.0);
    u[(a, b)] = Complex64::new(1.0, 0.0);
    u[(b, a)] = Complex64::new(1.0, 0.0);
    u
}
