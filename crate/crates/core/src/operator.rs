//! Dense complex operator algebra.
//!
//! Everything here works on small (`dim <= 64`) dense matrices stored as
//! [`nalgebra::DMatrix<Complex64>`]. Kronecker products use the left factor as
//! the slow index, so a composite basis state `|a, b>` of dimensions
//! `(da, db)` sits at row `a * db + b`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Tolerance on `|<psi|psi> - 1|` for normalized state vectors.
pub const NORM_TOL: f64 = 1e-12;
/// Tolerance on `max |A - A^dagger|` for Hermitian operators.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted for a density matrix.
pub const NEGATIVITY_TOL: f64 = 1e-10;
/// Tolerance on `|tr rho - nominal_trace|`.
pub const TRACE_TOL: f64 = 1e-10;
/// Tolerance for projector idempotence, orthogonality and completeness.
pub const PROJECTOR_TOL: f64 = 1e-10;
/// Eigenvalues below `-ENTROPY_NEGATIVITY_TOL` make the entropy undefined.
pub const ENTROPY_NEGATIVITY_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Largest entrywise modulus of `a - b`. Shapes must agree.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `max |U^dagger U - 1|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let prod = u.adjoint() * u;
    max_abs_diff(&prod, &CMatrix::identity(u.nrows(), u.ncols()))
}

/// Kronecker product with `a` as the slow index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    factors
        .into_iter()
        .fold(CMatrix::from_element(1, 1, ONE), |acc, f| kron(&acc, f))
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
///
/// Returns `(eigenvalues, eigenvectors)` where column `k` of the second matrix
/// is the eigenvector for `eigenvalues[k]`.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `V diag(f(lambda)) V^dagger` for a Hermitian `m = V diag(lambda) V^dagger`.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> Complex64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    spectral_recompose(&values, &vectors, f)
}

fn spectral_recompose(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> Complex64) -> CMatrix {
    let mut scaled = vectors.clone();
    for (k, &lambda) in values.iter().enumerate() {
        let fk = f(lambda);
        for r in 0..scaled.nrows() {
            scaled[(r, k)] *= fk;
        }
    }
    scaled * vectors.adjoint()
}

/// Pure state `|psi>` of a finite-dimensional system.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
}

impl StateVector {
    /// Builds a state and checks that it is normalized.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::config("state vector must have positive dimension"));
        }
        let state = StateVector {
            amplitudes: CVector::from_vec(amplitudes),
        };
        let defect = (state.norm_sqr() - 1.0).abs();
        if defect > NORM_TOL {
            return Err(Error::invariant(format!(
                "state vector not normalized: |<psi|psi> - 1| = {defect:e}"
            )));
        }
        Ok(state)
    }

    /// Builds a state from arbitrary nonzero amplitudes, rescaling to unit norm.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.is_empty() || norm == 0.0 {
            return Err(Error::config("cannot normalize a zero vector"));
        }
        Ok(StateVector {
            amplitudes: CVector::from_iterator(amplitudes.len(), amplitudes.into_iter().map(|a| a / norm)),
        })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index {index} out of range for dimension {dim}");
        let mut amplitudes = CVector::zeros(dim);
        amplitudes[index] = ONE;
        StateVector { amplitudes }
    }

    pub(crate) fn from_vector_unchecked(amplitudes: CVector) -> Self {
        StateVector { amplitudes }
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `|psi><psi|`.
    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }
}

/// Hermitian operator: observables and Hamiltonians.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    entries: CMatrix,
}

impl HermitianOperator {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::config(format!(
                "operator must be square with positive dimension, got {:?}",
                entries.shape()
            )));
        }
        let defect = hermiticity_defect(&entries);
        if defect > HERMITIAN_TOL {
            return Err(Error::invariant(format!("operator not Hermitian: defect {defect:e}")));
        }
        Ok(HermitianOperator { entries })
    }

    /// Hermitian part `(m + m^dagger) / 2` of an arbitrary square matrix.
    pub fn hermitian_part(m: &CMatrix) -> Self {
        assert!(m.is_square(), "hermitian_part needs a square matrix");
        HermitianOperator {
            entries: (m + m.adjoint()).scale(0.5),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = CVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex64::new(x, 0.0)));
        HermitianOperator {
            entries: CMatrix::from_diagonal(&d),
        }
    }

    pub fn identity(dim: usize) -> Self {
        HermitianOperator {
            entries: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOperator {
            entries: CMatrix::zeros(dim, dim),
        }
    }

    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn scaled(&self, factor: f64) -> Self {
        HermitianOperator {
            entries: self.entries.scale(factor),
        }
    }

    pub fn shifted(&self, constant: f64) -> Self {
        let n = self.dimension();
        HermitianOperator {
            entries: &self.entries + CMatrix::identity(n, n).scale(constant),
        }
    }

    /// Ascending eigenvalues and matching eigenvectors.
    pub fn eigen(&self) -> (Vec<f64>, CMatrix) {
        hermitian_eigen(&self.entries)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().0
    }

    /// `exp(coefficient * H)` through the spectral decomposition.
    pub fn exp_scaled(&self, coefficient: Complex64) -> CMatrix {
        hermitian_function(&self.entries, |lambda| (coefficient * lambda).exp())
    }

    /// Time-evolution operator `exp(-i H dt)`.
    pub fn evolution(&self, dt: f64) -> CMatrix {
        self.exp_scaled(Complex64::new(0.0, -dt))
    }

    /// Groups eigenvectors into spectral projectors.
    ///
    /// Consecutive sorted eigenvalues closer than `tol * max(1, |lambda|)` share
    /// one projector; the reported eigenvalue is the mean of the cluster.
    pub fn spectral_projectors(&self, tol: f64) -> Vec<(f64, CMatrix)> {
        let (values, vectors) = self.eigen();
        let n = values.len();
        let mut out = Vec::new();
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && (values[end] - values[end - 1]).abs() <= tol * values[end].abs().max(1.0) {
                end += 1;
            }
            let cols = vectors.columns(start, end - start);
            let proj = cols * cols.adjoint();
            let mean = values[start..end].iter().sum::<f64>() / (end - start) as f64;
            out.push((mean, proj));
            start = end;
        }
        out
    }

    /// `tr(self * rho)`, real part.
    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        trace(&(&self.entries * rho.matrix())).re
    }
}

/// Density matrix with an explicit nominal trace.
///
/// The nominal trace is 1 for ordinary states. Entropy-transferred states carry
/// `exp(-sigma)` instead, and that value is part of the type so such states are
/// never silently mistaken for normalized ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
    nominal_trace: f64,
}

impl DensityMatrix {
    /// Validated trace-one density matrix.
    pub fn new(entries: CMatrix) -> Result<Self> {
        Self::with_nominal_trace(entries, 1.0)
    }

    /// Validated density matrix whose trace must equal `nominal_trace`.
    pub fn with_nominal_trace(entries: CMatrix, nominal_trace: f64) -> Result<Self> {
        let rho = DensityMatrix { entries, nominal_trace };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(entries: CMatrix, nominal_trace: f64) -> Self {
        DensityMatrix { entries, nominal_trace }
    }

    pub fn from_state(state: &StateVector) -> Self {
        DensityMatrix {
            entries: state.projector(),
            nominal_trace: 1.0,
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            entries: CMatrix::identity(dim, dim).scale(1.0 / dim as f64),
            nominal_trace: 1.0,
        }
    }

    /// Diagonal density matrix; the entries must form a probability vector.
    pub fn from_diagonal(probabilities: &[f64]) -> Result<Self> {
        let d = CVector::from_iterator(
            probabilities.len(),
            probabilities.iter().map(|&p| Complex64::new(p, 0.0)),
        );
        Self::new(CMatrix::from_diagonal(&d))
    }

    /// Canonical state `exp(-beta H) / Z`.
    pub fn canonical(hamiltonian: &HermitianOperator, beta: f64) -> Self {
        let (values, vectors) = hamiltonian.eigen();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = values.iter().map(|&e| (-beta * (e - min)).exp()).collect();
        let z: f64 = weights.iter().sum();
        let mut scaled = vectors.clone();
        for (k, w) in weights.iter().enumerate() {
            for r in 0..scaled.nrows() {
                scaled[(r, k)] *= w / z;
            }
        }
        DensityMatrix {
            entries: scaled * vectors.adjoint(),
            nominal_trace: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.entries;
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::config(format!(
                "density matrix must be square with positive dimension, got {:?}",
                m.shape()
            )));
        }
        let defect = hermiticity_defect(m);
        if defect > HERMITIAN_TOL {
            return Err(Error::invariant(format!("density matrix not Hermitian: defect {defect:e}")));
        }
        let tr = self.trace();
        if (tr - self.nominal_trace).abs() > TRACE_TOL {
            return Err(Error::invariant(format!(
                "density matrix trace {tr} differs from nominal {}",
                self.nominal_trace
            )));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -NEGATIVITY_TOL {
            return Err(Error::invariant(format!("density matrix has negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn nominal_trace(&self) -> f64 {
        self.nominal_trace
    }

    pub fn trace(&self) -> f64 {
        trace(&self.entries).re
    }

    /// `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        // tr(rho^2) = sum_ij |rho_ij|^2 for Hermitian rho
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.entries).0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.entries.diagonal().iter().map(|z| z.re).collect()
    }

    /// Multiplies the matrix and its nominal trace by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        DensityMatrix {
            entries: self.entries.scale(factor),
            nominal_trace: self.nominal_trace * factor,
        }
    }

    /// Largest modulus among off-diagonal entries.
    pub fn max_abs_offdiagonal(&self) -> f64 {
        let n = self.dimension();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(self.entries[(i, j)].norm());
                }
            }
        }
        worst
    }
}

/// A complete family of mutually orthogonal projectors `{P(y)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorFamily {
    projectors: Vec<CMatrix>,
    labels: Vec<usize>,
}

impl ProjectorFamily {
    /// Validates idempotence, pairwise orthogonality and completeness.
    pub fn new(projectors: Vec<CMatrix>) -> Result<Self> {
        let labels = (0..projectors.len()).collect();
        Self::with_labels(projectors, labels)
    }

    pub fn with_labels(projectors: Vec<CMatrix>, labels: Vec<usize>) -> Result<Self> {
        if projectors.is_empty() {
            return Err(Error::config("projector family is empty"));
        }
        if labels.len() != projectors.len() {
            return Err(Error::config("one label per projector required"));
        }
        let dim = projectors[0].nrows();
        for (k, p) in projectors.iter().enumerate() {
            if p.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: p.nrows(),
                });
            }
            let herm = hermiticity_defect(p);
            let idem = max_abs_diff(&(p * p), p);
            if herm > PROJECTOR_TOL || idem > PROJECTOR_TOL {
                return Err(Error::invariant(format!(
                    "P({k}) is not an orthogonal projector (hermiticity {herm:e}, idempotence {idem:e})"
                )));
            }
        }
        let zero = CMatrix::zeros(dim, dim);
        for a in 0..projectors.len() {
            for b in a + 1..projectors.len() {
                let overlap = max_abs_diff(&(&projectors[a] * &projectors[b]), &zero);
                if overlap > PROJECTOR_TOL {
                    return Err(Error::invariant(format!(
                        "P({a}) P({b}) != 0 (defect {overlap:e})"
                    )));
                }
            }
        }
        let sum = projectors.iter().fold(zero, |acc, p| acc + p);
        let completeness = max_abs_diff(&sum, &CMatrix::identity(dim, dim));
        if completeness > PROJECTOR_TOL {
            return Err(Error::invariant(format!(
                "projector family does not resolve the identity (defect {completeness:e})"
            )));
        }
        Ok(ProjectorFamily { projectors, labels })
    }

    /// Rank-one projectors onto the computational basis.
    pub fn computational(dim: usize) -> Self {
        let projectors = (0..dim).map(|k| StateVector::basis(dim, k).projector()).collect();
        ProjectorFamily {
            projectors,
            labels: (0..dim).collect(),
        }
    }

    /// Consecutive computational-basis blocks of the given sizes.
    pub fn from_block_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.contains(&0) {
            return Err(Error::config("block sizes must be positive"));
        }
        let dim: usize = sizes.iter().sum();
        let mut offset = 0;
        let mut projectors = Vec::with_capacity(sizes.len());
        for &size in sizes {
            let mut p = CMatrix::zeros(dim, dim);
            for k in offset..offset + size {
                p[(k, k)] = ONE;
            }
            offset += size;
            projectors.push(p);
        }
        Ok(ProjectorFamily {
            projectors,
            labels: (0..sizes.len()).collect(),
        })
    }

    /// Spectral projectors of a Hermitian operator, eigenvalues merged within `tol`.
    pub fn spectral(op: &HermitianOperator, tol: f64) -> Self {
        let projectors: Vec<CMatrix> = op.spectral_projectors(tol).into_iter().map(|(_, p)| p).collect();
        let labels = (0..projectors.len()).collect();
        ProjectorFamily { projectors, labels }
    }

    /// Embeds the family into a composite space as `1 ⊗ .. ⊗ P(y) ⊗ .. ⊗ 1`.
    pub fn lift(&self, dims: &[usize], position: usize) -> Result<Self> {
        if position >= dims.len() {
            return Err(Error::config(format!("subsystem {position} out of range")));
        }
        if dims[position] != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: dims[position],
                actual: self.dimension(),
            });
        }
        let before: usize = dims[..position].iter().product();
        let after: usize = dims[position + 1..].iter().product();
        let left = CMatrix::identity(before, before);
        let right = CMatrix::identity(after, after);
        let projectors = self
            .projectors
            .iter()
            .map(|p| kron(&kron(&left, p), &right))
            .collect();
        Ok(ProjectorFamily {
            projectors,
            labels: self.labels.clone(),
        })
    }

    /// `{U^dagger P(y) U}` for a unitary `U`.
    pub fn conjugated(&self, unitary: &CMatrix) -> Self {
        let u_dag = unitary.adjoint();
        ProjectorFamily {
            projectors: self.projectors.iter().map(|p| &u_dag * p * unitary).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.projectors[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Largest `|[P(y), op]|` entry over the family.
    pub fn commutator_defect(&self, op: &CMatrix) -> f64 {
        self.projectors
            .iter()
            .map(|p| {
                let c = p * op - op * p;
                c.iter().map(|z| z.norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// `sum_y P(y) m P(y)` for any square matrix on the family's space.
    pub fn dephase_matrix(&self, m: &CMatrix) -> CMatrix {
        let dim = self.dimension();
        self.projectors
            .iter()
            .fold(CMatrix::zeros(dim, dim), |acc, p| acc + p * m * p)
    }

    /// `exp(-theta (1 - Delta))` applied to `m`: family-diagonal blocks kept,
    /// family-off-diagonal blocks scaled by `exp(-theta)`.
    pub fn decay_offdiagonal(&self, m: &CMatrix, theta: f64) -> CMatrix {
        let diag = self.dephase_matrix(m);
        let factor = (-theta).exp();
        &diag + (m - &diag).scale(factor)
    }
}

/// The kinds of superoperators used in the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Superoperator {
    /// `rho -> sum_y P(y) rho P(y)`.
    Dephasing(ProjectorFamily),
    /// `rho -> U rho U^dagger`.
    UnitaryConjugation(CMatrix),
    /// Applied first to last.
    Composition(Vec<Superoperator>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuperoperatorKind {
    Dephasing,
    UnitaryConjugation,
    Composition,
}

impl Superoperator {
    pub fn kind(&self) -> SuperoperatorKind {
        match self {
            Superoperator::Dephasing(_) => SuperoperatorKind::Dephasing,
            Superoperator::UnitaryConjugation(_) => SuperoperatorKind::UnitaryConjugation,
            Superoperator::Composition(_) => SuperoperatorKind::Composition,
        }
    }

    pub fn apply_matrix(&self, m: &CMatrix) -> CMatrix {
        match self {
            Superoperator::Dephasing(family) => family.dephase_matrix(m),
            Superoperator::UnitaryConjugation(u) => u * m * u.adjoint(),
            Superoperator::Composition(parts) => parts.iter().fold(m.clone(), |acc, s| s.apply_matrix(&acc)),
        }
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_dimension(rho.dimension())?;
        Ok(DensityMatrix::from_matrix_unchecked(
            self.apply_matrix(rho.matrix()),
            rho.nominal_trace(),
        ))
    }

    fn check_dimension(&self, dim: usize) -> Result<()> {
        let expected = match self {
            Superoperator::Dephasing(f) => f.dimension(),
            Superoperator::UnitaryConjugation(u) => u.nrows(),
            Superoperator::Composition(parts) => {
                return parts.iter().try_for_each(|p| p.check_dimension(dim));
            }
        };
        if expected != dim {
            return Err(Error::DimensionMismatch { expected, actual: dim });
        }
        Ok(())
    }
}

/// `⊗` for operators and states.
pub trait TensorProduct<Rhs = Self> {
    type Output;
    fn tensor(&self, rhs: &Rhs) -> Self::Output;
}

impl TensorProduct for CMatrix {
    type Output = CMatrix;
    fn tensor(&self, rhs: &CMatrix) -> CMatrix {
        kron(self, rhs)
    }
}

impl TensorProduct for StateVector {
    type Output = StateVector;
    fn tensor(&self, rhs: &StateVector) -> StateVector {
        let a = &self.amplitudes;
        let b = &rhs.amplitudes;
        let amps = CVector::from_iterator(a.len() * b.len(), a.iter().flat_map(|x| b.iter().map(move |y| x * y)));
        StateVector::from_vector_unchecked(amps)
    }
}

impl TensorProduct for DensityMatrix {
    type Output = DensityMatrix;
    fn tensor(&self, rhs: &DensityMatrix) -> DensityMatrix {
        DensityMatrix::from_matrix_unchecked(
            kron(&self.entries, &rhs.entries),
            self.nominal_trace * rhs.nominal_trace,
        )
    }
}

impl TensorProduct for HermitianOperator {
    type Output = HermitianOperator;
    fn tensor(&self, rhs: &HermitianOperator) -> HermitianOperator {
        HermitianOperator {
            entries: kron(&self.entries, &rhs.entries),
        }
    }
}

pub fn tensor_product<T: TensorProduct>(a: &T, b: &T) -> T::Output {
    a.tensor(b)
}

/// Partial trace of a square matrix over every subsystem except `keep`.
pub fn partial_trace_matrix(m: &CMatrix, dims: &[usize], keep: usize) -> Result<CMatrix> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::config("subsystem dimensions must be positive"));
    }
    if keep >= dims.len() {
        return Err(Error::config(format!(
            "kept subsystem {keep} out of range for {} subsystems",
            dims.len()
        )));
    }
    let total: usize = dims.iter().product();
    if m.nrows() != total || m.ncols() != total {
        return Err(Error::DimensionMismatch {
            expected: total,
            actual: m.nrows(),
        });
    }
    let before: usize = dims[..keep].iter().product();
    let kept = dims[keep];
    let after: usize = dims[keep + 1..].iter().product();
    let mut out = CMatrix::zeros(kept, kept);
    for i in 0..kept {
        for j in 0..kept {
            let mut acc = ZERO;
            for a in 0..before {
                for c in 0..after {
                    let row = (a * kept + i) * after + c;
                    let col = (a * kept + j) * after + c;
                    acc += m[(row, col)];
                }
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Reduced state of subsystem `keep` of a composite with dimensions `dims`.
pub fn partial_trace(rho: &DensityMatrix, dims: &[usize], keep: usize) -> Result<DensityMatrix> {
    let reduced = partial_trace_matrix(rho.matrix(), dims, keep)?;
    Ok(DensityMatrix::from_matrix_unchecked(reduced, rho.nominal_trace()))
}

/// Non-selective measurement `sum_y P(y) rho P(y)`.
pub fn dephase(rho: &DensityMatrix, family: &ProjectorFamily) -> Result<DensityMatrix> {
    Superoperator::Dephasing(family.clone()).apply(rho)
}

/// `exp(-i H dt) rho exp(i H dt)` with `hbar = 1`.
pub fn unitary_evolve(rho: &DensityMatrix, hamiltonian: &HermitianOperator, dt: f64) -> Result<DensityMatrix> {
    if hamiltonian.dimension() != rho.dimension() {
        return Err(Error::DimensionMismatch {
            expected: rho.dimension(),
            actual: hamiltonian.dimension(),
        });
    }
    let defect = hermiticity_defect(hamiltonian.matrix());
    if defect > HERMITIAN_TOL {
        return Err(Error::invariant(format!("Hamiltonian not Hermitian: defect {defect:e}")));
    }
    if dt == 0.0 {
        return Ok(rho.clone());
    }
    let u = hamiltonian.evolution(dt);
    Superoperator::UnitaryConjugation(u).apply(rho)
}

/// `-sum lambda ln lambda` over a spectrum, with `0 ln 0 = 0`.
///
/// Eigenvalues in `[-ENTROPY_NEGATIVITY_TOL, 0)` are rounding noise and are
/// clipped to zero; anything more negative is an error.
pub fn spectrum_entropy(eigenvalues: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &lambda in eigenvalues {
        if lambda < -ENTROPY_NEGATIVITY_TOL {
            return Err(Error::invariant(format!("negative eigenvalue {lambda:e} in entropy")));
        }
        if lambda > 0.0 {
            s -= lambda * lambda.ln();
        }
    }
    Ok(s)
}

/// Von Neumann entropy `-tr(rho ln rho)` in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    spectrum_entropy(&rho.eigenvalues())
}

/// Born-rule outcome probabilities `tr(P(y) rho)`.
pub fn born_probabilities(rho: &DensityMatrix, family: &ProjectorFamily) -> Result<Vec<f64>> {
    if family.dimension() != rho.dimension() {
        return Err(Error::DimensionMismatch {
            expected: rho.dimension(),
            actual: family.dimension(),
        });
    }
    let probs: Vec<f64> = family
        .projectors()
        .iter()
        .map(|p| trace(&(p * rho.matrix())).re)
        .collect();
    if let Some(&bad) = probs.iter().find(|&&p| p < -1e-12) {
        return Err(Error::invariant(format!("negative Born probability {bad:e}")));
    }
    Ok(probs)
}
