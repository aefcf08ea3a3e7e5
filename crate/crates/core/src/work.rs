//! Two-energy-measurement work statistics for a driven system and the
//! Jarzynski equality, with and without event readings.
//!
//! The protocol is piecewise constant: on `[t_k, t_{k+1})` the Hamiltonian is
//! `H(t_k)`, so `U(t_n) = e^{-iH(t_{n-1})δt} ... e^{-iH(t_0)δt}` with the
//! earliest factor rightmost. Heisenberg operators are `A_H(t) = U†(t) A U(t)`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operator::{dagger, hermitian_eigen, trace, CMatrix, HermitianOperator, ProjectorFamily};
use crate::seeds::{derive_indexed_seed, SimRng};

/// Work values closer than this are one atom.
pub const WORK_MERGE_TOL: f64 = 1e-9;
/// Minimum gap in the initial spectrum for event-reading evaluations.
pub const NONDEGENERACY_TOL: f64 = 1e-10;
/// Transition probabilities below this are treated as exactly zero.
pub const FORBIDDEN_TRANSITION_TOL: f64 = 1e-13;
/// Tolerance on the Jarzynski identities.
pub const JARZYNSKI_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DrivingProtocol {
    hamiltonians: Vec<HermitianOperator>,
    step: f64,
    beta: f64,
}

impl DrivingProtocol {
    /// `hamiltonians[k] = H(t_k)` for `k = 0..=N`.
    pub fn new(hamiltonians: Vec<HermitianOperator>, step: f64, beta: f64) -> Result<Self> {
        if hamiltonians.len() < 2 {
            return Err(Error::config("a protocol needs at least one step (two Hamiltonians)"));
        }
        let dim = hamiltonians[0].dimension();
        if let Some(h) = hamiltonians.iter().find(|h| h.dimension() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: h.dimension(),
            });
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::config(format!("time step must be positive, got {step}")));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::config(format!("beta must be positive, got {beta}")));
        }
        Ok(DrivingProtocol {
            hamiltonians,
            step,
            beta,
        })
    }

    /// Same Hamiltonian at every grid point.
    pub fn constant(h: HermitianOperator, steps: usize, step: f64, beta: f64) -> Result<Self> {
        Self::new(vec![h; steps + 1], step, beta)
    }

    pub fn hamiltonians(&self) -> &[HermitianOperator] {
        &self.hamiltonians
    }

    pub fn hamiltonian(&self, k: usize) -> &HermitianOperator {
        &self.hamiltonians[k]
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.hamiltonians.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dimension(&self) -> usize {
        self.hamiltonians[0].dimension()
    }

    pub fn initial(&self) -> &HermitianOperator {
        &self.hamiltonians[0]
    }

    pub fn last(&self) -> &HermitianOperator {
        &self.hamiltonians[self.steps()]
    }

    /// `U(t_to, t_from)`, the ordered product of the step propagators.
    pub fn propagator(&self, from_step: usize, to_step: usize) -> Result<CMatrix> {
        if from_step > to_step || to_step > self.steps() {
            return Err(Error::config(format!(
                "invalid propagator range {from_step}..{to_step} for {} steps",
                self.steps()
            )));
        }
        let mut u = CMatrix::identity(self.dimension(), self.dimension());
        for k in from_step..to_step {
            u = self.hamiltonians[k].evolution(self.step) * u;
        }
        Ok(u)
    }

    /// `U(t_k)` for every `k = 0..=N`.
    pub fn propagators(&self) -> Vec<CMatrix> {
        let mut out = Vec::with_capacity(self.hamiltonians.len());
        let mut u = CMatrix::identity(self.dimension(), self.dimension());
        out.push(u.clone());
        for h in &self.hamiltonians[..self.steps()] {
            u = h.evolution(self.step) * u;
            out.push(u.clone());
        }
        out
    }
}

/// `ln tr e^{-βH}`, stabilized by the ground-state energy.
pub fn log_partition_function(h: &HermitianOperator, beta: f64) -> f64 {
    let energies = h.eigenvalues();
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = energies.iter().map(|e| (-beta * (e - e0)).exp()).sum();
    -beta * e0 + sum.ln()
}

/// `e^{-β(H - c)}` through the spectral decomposition.
fn boltzmann_operator(h: &HermitianOperator, beta: f64, shift: f64) -> CMatrix {
    h.exp_scaled(Complex64::new(-beta, 0.0)).scale((beta * shift).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkDistribution {
    /// `(W, p(W))` sorted by `W`.
    pub atoms: Vec<(f64, f64)>,
}

impl WorkDistribution {
    /// Sorts raw `(W, p)` pairs and merges values within [`WORK_MERGE_TOL`].
    pub fn from_raw(mut raw: Vec<(f64, f64)>) -> Self {
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut anchor = f64::NEG_INFINITY;
        for (w, p) in raw {
            match atoms.last_mut() {
                Some(last) if w - anchor <= WORK_MERGE_TOL => last.1 += p,
                _ => {
                    anchor = w;
                    atoms.push((w, p));
                }
            }
        }
        WorkDistribution { atoms }
    }

    pub fn total_probability(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(w, p)| w * p).sum()
    }

    /// `sum_W p(W) e^{-βW}`.
    pub fn exp_average(&self, beta: f64) -> f64 {
        self.atoms.iter().map(|(w, p)| p * (-beta * w).exp()).sum()
    }

    /// Probability of the atom at `w`, if present.
    pub fn probability_at(&self, w: f64, tol: f64) -> Option<f64> {
        self.atoms.iter().find(|a| (a.0 - w).abs() <= tol).map(|a| a.1)
    }

    /// CSV with header `W,p`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("W,p\n");
        for (w, p) in &self.atoms {
            writeln!(out, "{w:.16e},{p:.16e}").expect("writing to a String cannot fail");
        }
        out
    }
}

fn boltzmann_weights(energies: &[f64], degeneracies: &[f64], beta: f64) -> Vec<f64> {
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = energies.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = raw.iter().zip(degeneracies).map(|(w, d)| w * d).sum();
    raw.iter().map(|w| w / z).collect()
}

/// Projector-resolved two-measurement distribution
/// `p(E_m(t_f) - E_n(0)) = tr[Π_m U Π_n U†] e^{-βE_n(0)} / Z_0`.
pub fn work_distribution(protocol: &DrivingProtocol) -> Result<WorkDistribution> {
    let u = protocol.propagator(0, protocol.steps())?;
    let u_dag = dagger(&u);
    let initial = protocol.initial().spectral_projectors(WORK_MERGE_TOL);
    let last = protocol.last().spectral_projectors(WORK_MERGE_TOL);
    let energies: Vec<f64> = initial.iter().map(|(e, _)| *e).collect();
    let degeneracies: Vec<f64> = initial.iter().map(|(_, p)| trace(p).re.round()).collect();
    let weights = boltzmann_weights(&energies, &degeneracies, protocol.beta());
    let mut raw = Vec::with_capacity(initial.len() * last.len());
    for ((e_n, p_n), w_n) in initial.iter().zip(&weights) {
        let evolved = &u * p_n * &u_dag;
        for (e_m, p_m) in &last {
            let transition = trace(&(p_m * &evolved)).re;
            // Forbidden transitions come out as rounding noise.
            if transition.abs() > FORBIDDEN_TRANSITION_TOL {
                raw.push((e_m - e_n, transition * w_n));
            }
        }
    }
    let dist = WorkDistribution::from_raw(raw);
    if let Some(&(w, p)) = dist.atoms.iter().find(|a| a.1 < -1e-12) {
        return Err(Error::invariant(format!("negative work probability {p:e} at W = {w}")));
    }
    if (dist.total_probability() - 1.0).abs() > JARZYNSKI_TOL {
        return Err(Error::invariant(format!(
            "work probabilities sum to {}",
            dist.total_probability()
        )));
    }
    Ok(dist)
}

/// `⟨e^{-βW}⟩` from the work distribution.
pub fn mgf_work(protocol: &DrivingProtocol) -> Result<f64> {
    Ok(work_distribution(protocol)?.exp_average(protocol.beta()))
}

/// `tr[e^{-βH_H(t_f)}] / Z_0`, evaluated with the Heisenberg operator.
pub fn mgf_heisenberg(protocol: &DrivingProtocol) -> Result<f64> {
    let beta = protocol.beta();
    let u = protocol.propagator(0, protocol.steps())?;
    let e_last = min_energy(protocol.last());
    let e_first = min_energy(protocol.initial());
    let heisenberg = dagger(&u) * boltzmann_operator(protocol.last(), beta, e_last) * &u;
    let ratio = trace(&heisenberg).re / (log_partition_function(protocol.initial(), beta) + beta * e_first).exp();
    Ok(ratio * (-beta * (e_last - e_first)).exp())
}

fn min_energy(h: &HermitianOperator) -> f64 {
    h.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
}

/// `ΔF = -β⁻¹ ln(Z_{t_f} / Z_0)`.
pub fn free_energy_difference(protocol: &DrivingProtocol) -> f64 {
    let beta = protocol.beta();
    -(log_partition_function(protocol.last(), beta) - log_partition_function(protocol.initial(), beta)) / beta
}

/// `tr[H_H(t_f) ϱ_can(0)] - tr[H(0) ϱ_can(0)]`.
pub fn average_work(protocol: &DrivingProtocol) -> Result<f64> {
    let rho = crate::operator::DensityMatrix::canonical(protocol.initial(), protocol.beta());
    let u = protocol.propagator(0, protocol.steps())?;
    let heisenberg = dagger(&u) * protocol.last().matrix() * &u;
    let final_energy = trace(&(heisenberg * rho.matrix())).re;
    Ok(final_energy - protocol.initial().expectation(&rho))
}

/// The set of grid indices at which event readings happen.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventReadingSchedule {
    reading_steps: Vec<usize>,
}

impl EventReadingSchedule {
    /// Sorts and deduplicates the given indices.
    pub fn new(mut steps: Vec<usize>) -> Self {
        steps.sort_unstable();
        steps.dedup();
        EventReadingSchedule { reading_steps: steps }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> &[usize] {
        &self.reading_steps
    }

    pub fn len(&self) -> usize {
        self.reading_steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reading_steps.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.reading_steps.binary_search(&k).is_ok()
    }
}

/// Where the dephasing superoperator of a reading acts in the time-ordered
/// product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadingPlacement {
    /// `e^{-βH_H(t_j)} Δ̃_j(e^{βH_H(t_j)} · X)`: the dephasing sits between
    /// the two equal-time Boltzmann factors, so it acts on the identity.
    Sandwiched,
    /// `Δ̃_j(X)` applied to the accumulated product itself.
    OnAccumulated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModifiedJarzynski {
    pub lhs: f64,
    pub rhs: f64,
    pub work_shift: f64,
    pub n_readings: usize,
}

impl ModifiedJarzynski {
    pub fn error(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

fn check_nondegenerate(h: &HermitianOperator) -> Result<()> {
    let energies = h.eigenvalues();
    if let Some(w) = energies.windows(2).find(|w| w[1] - w[0] < NONDEGENERACY_TOL) {
        return Err(Error::config(format!(
            "initial state is degenerate: eigenvalues {} and {} closer than {NONDEGENERACY_TOL:e}",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Evaluates the event-reading trace
///
/// ```text
/// tr[ T{ Π_n e^{-β(H_H(t_{n+1}) - H_H(t_n))} Π_j Δ̃_j Π_j e^{σ_{M→S}} } Π_j e^{σ_{S→M}} ϱ_can(0) ]
/// ```
///
/// with `σ_{M→S} = -1`, `σ_{S→M} = +1` and `Δ̃_j` the family conjugated into
/// the Heisenberg picture at `t_j`.
pub fn evaluate_modified_jarzynski(
    protocol: &DrivingProtocol,
    schedule: &EventReadingSchedule,
    family: &ProjectorFamily,
    placement: ReadingPlacement,
) -> Result<ModifiedJarzynski> {
    let n = protocol.steps();
    if let Some(&k) = schedule.steps().iter().find(|&&k| k > n) {
        return Err(Error::config(format!("reading step {k} outside the grid 0..={n}")));
    }
    if family.dimension() != protocol.dimension() {
        return Err(Error::config(format!(
            "family dimension {} does not match protocol dimension {}",
            family.dimension(),
            protocol.dimension()
        )));
    }
    check_nondegenerate(protocol.initial())?;
    let beta = protocol.beta();
    let sigma_m_to_s: f64 = -1.0;
    let sigma_s_to_m: f64 = 1.0;

    let propagators = protocol.propagators();
    // e^{∓βH_H(t_k)} with a per-step shift; shifts cancel in the product.
    let shifts: Vec<f64> = protocol.hamiltonians().iter().map(min_energy).collect();
    let heisenberg = |k: usize, sign: f64| -> CMatrix {
        let h = &protocol.hamiltonians()[k];
        let local = h.exp_scaled(Complex64::new(-sign * beta, 0.0)).scale((sign * beta * shifts[k]).exp());
        dagger(&propagators[k]) * local * &propagators[k]
    };

    let z0 = (log_partition_function(protocol.initial(), beta) + beta * shifts[0]).exp();
    let mut acc = boltzmann_operator(protocol.initial(), beta, shifts[0]).unscale(z0);
    let mut scalar = 1.0;
    let read = |acc: &CMatrix, k: usize| -> CMatrix {
        let dephasing = family.conjugated(&propagators[k]);
        match placement {
            ReadingPlacement::Sandwiched => {
                let inner = heisenberg(k, -1.0) * acc;
                heisenberg(k, 1.0) * dephasing.dephase_matrix(&inner)
            }
            ReadingPlacement::OnAccumulated => dephasing.dephase_matrix(acc),
        }
    };
    if schedule.contains(0) {
        acc = read(&acc, 0);
        scalar *= sigma_m_to_s.exp();
    }
    for k in 0..n {
        acc = heisenberg(k + 1, 1.0) * (heisenberg(k, -1.0) * acc);
        if schedule.contains(k + 1) {
            acc = read(&acc, k + 1);
            scalar *= sigma_m_to_s.exp();
        }
    }
    for _ in 0..schedule.len() {
        scalar *= sigma_s_to_m.exp();
    }
    // The per-step shifts e^{β(c_{k+1} - c_k)} telescope to e^{β(c_N - c_0)}.
    let lhs = scalar * trace(&acc).re * (-beta * (shifts[n] - shifts[0])).exp();
    Ok(ModifiedJarzynski {
        lhs,
        rhs: (-beta * free_energy_difference(protocol)).exp(),
        work_shift: schedule.len() as f64 / beta,
        n_readings: schedule.len(),
    })
}

/// [`evaluate_modified_jarzynski`] with the sandwiched placement, asserting
/// `lhs = e^{-βΔF}` within [`JARZYNSKI_TOL`].
pub fn modified_jarzynski(
    protocol: &DrivingProtocol,
    schedule: &EventReadingSchedule,
    family: &ProjectorFamily,
) -> Result<ModifiedJarzynski> {
    let record = evaluate_modified_jarzynski(protocol, schedule, family, ReadingPlacement::Sandwiched)?;
    if record.error() > JARZYNSKI_TOL {
        return Err(Error::invariant(format!(
            "modified Jarzynski trace {} differs from exp(-beta dF) = {}",
            record.lhs, record.rhs
        )));
    }
    Ok(record)
}

/// The generating function re-expressed with the density matrix defined at
/// grid index `pivot`:
///
/// ```text
/// tr[ O'(t_p) ϱ_0(t_p) ],   O'(t_p) = e^{-βH'_H(t_N)} e^{βH_p} ϱ_can(t_p) ϱ_0(t_p)⁻¹ Z_p / Z_0,
/// ```
///
/// where `U'` starts at `t_p` and `ϱ_0(t_p) = U(t_p) ϱ_can(0) U†(t_p)`.
pub fn renew_definition_time(protocol: &DrivingProtocol, pivot: usize) -> Result<f64> {
    let n = protocol.steps();
    if pivot > n {
        return Err(Error::config(format!("pivot {pivot} outside the grid 0..={n}")));
    }
    let beta = protocol.beta();
    let h_p = protocol.hamiltonian(pivot);
    let h_n = protocol.last();
    let (c_p, c_n) = (min_energy(h_p), min_energy(h_n));

    let u_renewed = protocol.propagator(pivot, n)?;
    let final_factor = dagger(&u_renewed) * boltzmann_operator(h_n, beta, c_n) * &u_renewed;
    let pivot_factor = h_p.exp_scaled(Complex64::new(beta, 0.0)).scale((-beta * c_p).exp());
    let z_p_shifted = (log_partition_function(h_p, beta) + beta * c_p).exp();
    let rho_can_p = boltzmann_operator(h_p, beta, c_p).unscale(z_p_shifted);

    let u_p = protocol.propagator(0, pivot)?;
    let rho_can_0 = crate::operator::DensityMatrix::canonical(protocol.initial(), beta);
    let rho_0p = &u_p * rho_can_0.matrix() * dagger(&u_p);
    let rho_0p_inv = hermitian_inverse(&rho_0p)?;

    let log_ratio = log_partition_function(h_p, beta) - log_partition_function(protocol.initial(), beta);
    let observable = (final_factor * pivot_factor * rho_can_p * rho_0p_inv).scale(log_ratio.exp());
    let value = trace(&(observable * rho_0p)).re;
    // Undo the shifts applied to e^{-βH_N} and e^{βH_p}.
    Ok(value * (-beta * (c_n - c_p)).exp())
}

fn hermitian_inverse(m: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eigen(m);
    if let Some(v) = values.iter().find(|v| v.abs() < 1e-300) {
        return Err(Error::config(format!("density matrix is singular (eigenvalue {v:e})")));
    }
    let mut scaled = vectors.clone();
    for (k, v) in values.iter().enumerate() {
        scaled.column_mut(k).iter_mut().for_each(|z| *z /= *v);
    }
    Ok(scaled * dagger(&vectors))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalWork {
    pub distribution: WorkDistribution,
    pub trials: usize,
    /// Sample mean of `e^{-βW}`.
    pub exp_average: f64,
    /// Standard error of [`EmpiricalWork::exp_average`].
    pub exp_average_std_error: f64,
}

/// Monte Carlo two-measurement sampling; trial `i` uses the seed
/// `derive_indexed_seed(master_seed, "work-trial", i)`.
pub fn sample_work(protocol: &DrivingProtocol, trials: usize, master_seed: u64) -> Result<EmpiricalWork> {
    if trials == 0 {
        return Err(Error::config("trials must be positive"));
    }
    let beta = protocol.beta();
    let u = protocol.propagator(0, protocol.steps())?;
    let (energies, vectors) = hermitian_eigen(protocol.initial().matrix());
    let initial_weights = boltzmann_weights(&energies, &vec![1.0; energies.len()], beta);
    let last = protocol.last().spectral_projectors(WORK_MERGE_TOL);
    let transitions: Vec<Vec<f64>> = (0..energies.len())
        .map(|n| {
            let psi = &u * vectors.column(n);
            last.iter()
                .map(|(_, p)| (psi.adjoint() * p * &psi)[(0, 0)].re.max(0.0))
                .collect()
        })
        .collect();

    let works: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = SimRng::seed_from_u64(derive_indexed_seed(master_seed, "work-trial", i as u64));
            let n = crate::scheme::sample_index(&initial_weights, rng.random::<f64>());
            let m = crate::scheme::sample_index(&transitions[n], rng.random::<f64>());
            last[m].0 - energies[n]
        })
        .collect();

    let exps: Vec<f64> = works.iter().map(|w| (-beta * w).exp()).collect();
    let mean = exps.iter().sum::<f64>() / trials as f64;
    let var = if trials > 1 {
        exps.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
    } else {
        0.0
    };
    let weight = 1.0 / trials as f64;
    let distribution = WorkDistribution::from_raw(works.into_iter().map(|w| (w, weight)).collect());
    Ok(EmpiricalWork {
        distribution,
        trials,
        exp_average: mean,
        exp_average_std_error: (var / trials as f64).sqrt(),
    })
}

/// A smooth random protocol `H(s) = (1-s)A + sB + s(1-s)C`, `s = k/N`.
pub fn random_protocol<R: Rng + ?Sized>(dim: usize, steps: usize, beta: f64, total_time: f64, rng: &mut R) -> Result<DrivingProtocol> {
    let a = crate::random::random_hermitian(dim, 1.0, rng);
    let b = crate::random::random_hermitian(dim, 1.0, rng);
    let c = crate::random::random_hermitian(dim, 1.0, rng);
    let hamiltonians = (0..=steps)
        .map(|k| {
            let s = k as f64 / steps as f64;
            let m = a.matrix().scale(1.0 - s) + b.matrix().scale(s) + c.matrix().scale(s * (1.0 - s));
            HermitianOperator::hermitian_part(&m)
        })
        .collect();
    DrivingProtocol::new(hamiltonians, total_time / steps as f64, beta)
}

/// A random protocol whose Hamiltonians are block diagonal in `blocks`, so
/// each one commutes with the returned projector family.
pub fn random_block_protocol<R: Rng + ?Sized>(
    blocks: &[usize],
    steps: usize,
    step: f64,
    beta: f64,
    rng: &mut R,
) -> Result<(DrivingProtocol, ProjectorFamily)> {
    let family = ProjectorFamily::from_block_sizes(blocks)?;
    let dim = family.dimension();
    let hamiltonians = (0..=steps)
        .map(|_| {
            let mut m = CMatrix::zeros(dim, dim);
            let mut offset = 0;
            for &b in blocks {
                let block = crate::random::random_hermitian(b, 1.0, rng);
                m.view_mut((offset, offset), (b, b)).copy_from(block.matrix());
                offset += b;
            }
            HermitianOperator::hermitian_part(&m)
        })
        .collect();
    Ok((DrivingProtocol::new(hamiltonians, step, beta)?, family))
}

/// Summary record
/// `beta=.. dF=.. mgf=.. lhs=.. rhs=.. work_shift=.. n_readings=.. max_error=..`.
pub fn jarzynski_summary(protocol: &DrivingProtocol, mgf: f64, record: &ModifiedJarzynski) -> String {
    let d_f = free_energy_difference(protocol);
    let max_error = record.error().max((mgf - record.rhs).abs());
    format!(
        "beta={:.16e} dF={:.16e} mgf={:.16e} lhs={:.16e} rhs={:.16e} work_shift={:.16e} n_readings={} max_error={:.16e}",
        protocol.beta(),
        d_f,
        mgf,
        record.lhs,
        record.rhs,
        record.work_shift,
        record.n_readings,
        max_error
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{max_abs_diff, unitarity_defect};
    use crate::random::{random_diagonal, random_hermitian};
    use crate::seeds::rng_for;

    fn quench(eps: f64, beta: f64) -> DrivingProtocol {
        let h0 = HermitianOperator::from_real_diagonal(&[-eps, eps]);
        let h1 = HermitianOperator::from_real_diagonal(&[-2.0 * eps, 2.0 * eps]);
        DrivingProtocol::new(vec![h0, h1], 0.1, beta).unwrap()
    }

    fn sigma_x_quench(beta: f64) -> DrivingProtocol {
        // H(0) = σ_z, then σ_x for one step, final 2σ_z
        let z = HermitianOperator::from_real_diagonal(&[1.0, -1.0]);
        let mut x = CMatrix::zeros(2, 2);
        x[(0, 1)] = Complex64::new(1.0, 0.0);
        x[(1, 0)] = Complex64::new(1.0, 0.0);
        let x = HermitianOperator::new(x).unwrap();
        DrivingProtocol::new(vec![z.clone(), x, z.scaled(2.0)], 0.4, beta).unwrap()
    }

    #[test]
    fn propagator_basics() {
        let mut rng = rng_for(21, "work-prop");
        let h = random_hermitian(3, 1.0, &mut rng);
        let p = DrivingProtocol::constant(h.clone(), 10, 0.05, 1.0).unwrap();
        assert!(max_abs_diff(&p.propagator(4, 4).unwrap(), &CMatrix::identity(3, 3)) < 1e-15);
        assert!(max_abs_diff(&p.propagator(0, 10).unwrap(), &h.evolution(0.5)) < 1e-10);
        let p = random_protocol(5, 30, 1.0, 2.0, &mut rng).unwrap();
        assert!(unitarity_defect(&p.propagator(0, 30).unwrap()) < 1e-10);
        assert!(p.propagator(3, 2).is_err());
        let all = p.propagators();
        assert!(max_abs_diff(&all[17], &p.propagator(0, 17).unwrap()) < 1e-13);
    }

    #[test]
    fn protocol_validation() {
        let h = HermitianOperator::identity(2);
        assert!(DrivingProtocol::new(vec![h.clone()], 0.1, 1.0).is_err());
        assert!(DrivingProtocol::new(vec![h.clone(), h.clone()], 0.1, 0.0).is_err());
        assert!(DrivingProtocol::new(vec![h.clone(), HermitianOperator::identity(3)], 0.1, 1.0).is_err());
    }

    #[test]
    fn constant_protocol_does_no_work() {
        let mut rng = rng_for(22, "work-const");
        let h = random_hermitian(4, 1.0, &mut rng);
        let p = DrivingProtocol::constant(h, 20, 0.1, 1.3).unwrap();
        let dist = work_distribution(&p).unwrap();
        assert_eq!(dist.atoms.len(), 1);
        assert!(dist.atoms[0].0.abs() < 1e-12);
        assert!((dist.atoms[0].1 - 1.0).abs() < 1e-12);
        assert!((mgf_work(&p).unwrap() - 1.0).abs() < 1e-12);
        assert!(free_energy_difference(&p).abs() < 1e-12);
        assert!(average_work(&p).unwrap().abs() < 1e-12);
        let samples = sample_work(&p, 1000, 3).unwrap();
        assert!(samples.distribution.atoms.iter().all(|(w, _)| w.abs() < 1e-12));
    }

    #[test]
    fn quench_distribution_against_enumeration() {
        let p = sigma_x_quench(1.0);
        let dist = work_distribution(&p).unwrap();
        // exhaustive (m, n) enumeration with explicit basis vectors
        let u = p.propagator(0, 2).unwrap();
        let e0 = [1.0, -1.0];
        let e1 = [2.0, -2.0];
        let z0: f64 = e0.iter().map(|e: &f64| (-e).exp()).sum();
        for n in 0..2 {
            for m in 0..2 {
                let amp = u[(m, n)].norm_sqr();
                let expected = amp * (-e0[n]).exp() / z0;
                let got = dist.probability_at(e1[m] - e0[n], 1e-12).unwrap();
                assert!((got - expected).abs() < 1e-14);
            }
        }
        assert_eq!(dist.atoms.len(), 4);
    }

    #[test]
    fn quench_mgf_matches_partition_ratio() {
        let eps = 0.7;
        let p = quench(eps, 1.0);
        let ratio = (2.0 * (2.0 * eps).cosh()) / (2.0 * eps.cosh());
        assert!((mgf_work(&p).unwrap() - ratio).abs() < 1e-12);
        let p = quench(1.0, 1.0);
        assert!((free_energy_difference(&p) + (2.0f64.cosh() / 1.0f64.cosh()).ln()).abs() < 1e-12);
    }

    #[test]
    fn uniform_shift_changes_free_energy_by_the_shift() {
        let mut rng = rng_for(23, "work-shift");
        let h = random_hermitian(4, 1.0, &mut rng);
        let p = DrivingProtocol::new(vec![h.clone(), h.shifted(0.37)], 0.1, 2.0).unwrap();
        assert!((free_energy_difference(&p) - 0.37).abs() < 1e-12);
    }

    #[test]
    fn jarzynski_for_random_protocols() {
        let mut rng = rng_for(24, "work-jarzynski");
        for _ in 0..20 {
            let dim = rng.random_range(2..=8);
            let steps = rng.random_range(1..=100);
            let beta = rng.random_range(0.1..5.0);
            let p = random_protocol(dim, steps, beta, 3.0, &mut rng).unwrap();
            let dist = work_distribution(&p).unwrap();
            let target = (-beta * free_energy_difference(&p)).exp();
            assert!((dist.total_probability() - 1.0).abs() < 1e-10);
            assert!((dist.exp_average(beta) - target).abs() < 1e-10);
            assert!((mgf_heisenberg(&p).unwrap() - target).abs() < 1e-10);
            assert!((dist.mean() - average_work(&p).unwrap()).abs() < 1e-10);
            assert!(average_work(&p).unwrap() >= free_energy_difference(&p) - 1e-12);
        }
    }

    #[test]
    fn degenerate_levels_merge() {
        let h0 = HermitianOperator::from_real_diagonal(&[0.0, 0.0, 1.0]);
        let h1 = HermitianOperator::from_real_diagonal(&[0.0, 0.0, 2.0]);
        let p = DrivingProtocol::new(vec![h0, h1], 0.3, 1.0).unwrap();
        let dist = work_distribution(&p).unwrap();
        assert_eq!(dist.atoms.len(), 2);
    }

    fn block_compatible_protocol<R: Rng>(blocks: &[usize], steps: usize, beta: f64, rng: &mut R) -> (DrivingProtocol, ProjectorFamily) {
        random_block_protocol(blocks, steps, 0.2, beta, rng).unwrap()
    }

    #[test]
    fn empty_schedule_reduces_to_the_plain_equality() {
        let mut rng = rng_for(25, "work-empty");
        let p = random_protocol(4, 40, 1.0, 2.0, &mut rng).unwrap();
        let family = ProjectorFamily::computational(4);
        let r = modified_jarzynski(&p, &EventReadingSchedule::empty(), &family).unwrap();
        assert!((r.lhs - mgf_work(&p).unwrap()).abs() < 1e-10);
        assert_eq!(r.work_shift, 0.0);
    }

    #[test]
    fn readings_on_compatible_protocols() {
        let mut rng = rng_for(26, "work-readings");
        for readings in 1..=3usize {
            let beta = 0.5 + readings as f64 * 0.4;
            let (p, family) = block_compatible_protocol(&[2, 1, 2], 30, beta, &mut rng);
            let steps: Vec<usize> = (0..readings).map(|i| i * 10 + 3).collect();
            let schedule = EventReadingSchedule::new(steps);
            for placement in [ReadingPlacement::Sandwiched, ReadingPlacement::OnAccumulated] {
                let r = evaluate_modified_jarzynski(&p, &schedule, &family, placement).unwrap();
                assert!(r.error() < 1e-10, "{placement:?}: {}", r.error());
                assert_eq!(r.work_shift, readings as f64 / beta);
            }
        }
    }

    #[test]
    fn sandwiched_placement_holds_beyond_compatible_protocols() {
        let mut rng = rng_for(27, "work-placement");
        let p = random_protocol(3, 25, 1.0, 2.0, &mut rng).unwrap();
        let family = ProjectorFamily::computational(3);
        let schedule = EventReadingSchedule::new(vec![0, 12, 25]);
        let sandwiched = evaluate_modified_jarzynski(&p, &schedule, &family, ReadingPlacement::Sandwiched).unwrap();
        let alternative = evaluate_modified_jarzynski(&p, &schedule, &family, ReadingPlacement::OnAccumulated).unwrap();
        assert!(sandwiched.error() < 1e-10);
        assert!(alternative.error() > 1e-6);
    }

    #[test]
    fn lhs_is_invariant_under_schedule_changes() {
        let mut rng = rng_for(28, "work-invariant");
        let (p, family) = block_compatible_protocol(&[1, 3], 20, 1.0, &mut rng);
        let values: Vec<f64> = [vec![], vec![5], vec![0, 5], vec![0, 5, 20]]
            .into_iter()
            .map(|s| modified_jarzynski(&p, &EventReadingSchedule::new(s), &family).unwrap().lhs)
            .collect();
        for v in &values {
            assert!((v - values[0]).abs() < 1e-10);
        }
        let r = modified_jarzynski(&p, &EventReadingSchedule::new(vec![1, 2, 3]), &family).unwrap();
        assert_eq!(r.work_shift, 3.0);
        let w0 = average_work(&p).unwrap();
        assert!(free_energy_difference(&p) + 3.0 / p.beta() <= w0 + r.work_shift + 1e-12);
    }

    #[test]
    fn schedule_and_degeneracy_errors() {
        let mut rng = rng_for(29, "work-errors");
        let p = random_protocol(2, 5, 1.0, 1.0, &mut rng).unwrap();
        let family = ProjectorFamily::computational(2);
        assert!(matches!(
            modified_jarzynski(&p, &EventReadingSchedule::new(vec![6]), &family),
            Err(Error::Configuration(_))
        ));
        let degenerate = DrivingProtocol::constant(HermitianOperator::identity(2), 3, 0.1, 1.0).unwrap();
        assert!(matches!(
            modified_jarzynski(&degenerate, &EventReadingSchedule::new(vec![1]), &family),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn definition_time_renewal() {
        let mut rng = rng_for(30, "work-renewal");
        let p = random_protocol(3, 3, 1.0, 1.5, &mut rng).unwrap();
        let mgf = mgf_work(&p).unwrap();
        let values: Vec<f64> = (0..=3).map(|k| renew_definition_time(&p, k).unwrap()).collect();
        for v in &values {
            assert!((v - mgf).abs() < 1e-10, "{values:?} vs {mgf}");
        }
        assert!(renew_definition_time(&p, 4).is_err());
        let p = random_protocol(5, 40, 2.0, 3.0, &mut rng).unwrap();
        let mgf = mgf_work(&p).unwrap();
        for k in [0, 17, 40] {
            assert!((renew_definition_time(&p, k).unwrap() - mgf).abs() < 1e-10);
        }
    }

    #[test]
    fn sampled_work_converges() {
        let p = quench(0.8, 1.0);
        let exact = work_distribution(&p).unwrap();
        let target = (-free_energy_difference(&p)).exp();
        let samples = sample_work(&p, 100_000, 7).unwrap();
        assert!((samples.exp_average - target).abs() < 4.0 * samples.exp_average_std_error);
        for (w, prob) in &exact.atoms {
            let freq = samples.distribution.probability_at(*w, 1e-9).unwrap_or(0.0);
            let sigma = (prob * (1.0 - prob) / 100_000.0).sqrt();
            assert!((freq - prob).abs() < 3.0 * sigma.max(1e-12));
        }
        assert_eq!(sample_work(&p, 500, 9).unwrap(), sample_work(&p, 500, 9).unwrap());
    }

    #[test]
    fn crooks_relation_for_time_reversed_protocol() {
        let mut rng = rng_for(31, "work-crooks");
        let beta = 0.8;
        let mut hs: Vec<HermitianOperator> = (0..6).map(|_| random_hermitian(3, 1.0, &mut rng)).collect();
        hs.push(hs[5].clone());
        let forward = DrivingProtocol::new(hs.clone(), 0.3, beta).unwrap();
        let reversed: Vec<HermitianOperator> = hs
            .iter()
            .rev()
            .skip(1)
            .chain(std::iter::once(&hs[0]))
            .map(|h| HermitianOperator::new(h.matrix().map(|z| z.conj())).unwrap())
            .collect();
        let reverse = DrivingProtocol::new(reversed, 0.3, beta).unwrap();
        let pf = work_distribution(&forward).unwrap();
        let pr = work_distribution(&reverse).unwrap();
        let d_f = free_energy_difference(&forward);
        let mut shared = 0;
        for (w, p) in &pf.atoms {
            if let Some(q) = pr.probability_at(-w, 1e-9) {
                if *p > 1e-12 && q > 1e-12 {
                    assert!((p / q - (beta * (w - d_f)).exp()).abs() < 1e-8 * (beta * (w - d_f)).exp().max(1.0));
                    shared += 1;
                }
            }
        }
        assert!(shared >= 4);
    }

    #[test]
    fn diagonal_protocols_have_a_deterministic_work_per_level() {
        let mut rng = rng_for(32, "work-diag");
        let h0 = random_diagonal(3, 1.0, &mut rng);
        let h1 = random_diagonal(3, 1.0, &mut rng);
        let p = DrivingProtocol::new(vec![h0.clone(), h0.clone(), h1.clone()], 0.5, 1.0).unwrap();
        let dist = work_distribution(&p).unwrap();
        assert_eq!(dist.atoms.len(), 3);
    }

    #[test]
    fn csv_and_summary() {
        let p = quench(0.5, 1.0);
        let csv = work_distribution(&p).unwrap().to_csv();
        assert!(csv.starts_with("W,p\n"));
        assert_eq!(csv.lines().count(), 3);
        let family = ProjectorFamily::computational(2);
        let r = modified_jarzynski(&p, &EventReadingSchedule::new(vec![0]), &family).unwrap();
        let s = jarzynski_summary(&p, mgf_work(&p).unwrap(), &r);
        assert!(s.starts_with("beta=1.0000000000000000e0 dF="));
        assert!(s.contains("n_readings=1"));
    }
}
