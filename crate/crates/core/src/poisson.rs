//! One non-selective measurement occurrence described statistically.
//!
//! An enlarged ensemble carries many copies of the system. Each copy is
//! dephased exactly once, at its own occurrence time drawn from the
//! exponential density `(1/δτ) e^{-τ/δτ}`. The member average at `τ` then
//! keeps a fraction `e^{-τ/δτ}` of the Schrödinger off-diagonals. Reported at
//! the cut-off `τ = δτ`, this is the factor `e^{-1}` of the reduced solution
//!
//! ```text
//! ρ(τ) = e^{-θ(τ)(1 - Δ)} ρ_Sch(τ) = Δ ρ_Sch + e^{-θ(τ)} (1 - Δ) ρ_Sch.
//! ```

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operator::{hermitian_eigen, CMatrix, DensityMatrix, HermitianOperator, ProjectorFamily};

/// Draws `count` i.i.d. occurrence times with mean `delta_tau`.
pub fn sample_occurrence_times<R: Rng + ?Sized>(count: usize, delta_tau: f64, rng: &mut R) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::config("occurrence time count must be positive"));
    }
    if !(delta_tau > 0.0) || !delta_tau.is_finite() {
        return Err(Error::config(format!("delta_tau must be positive, got {delta_tau}")));
    }
    let exp = Exp::new(1.0 / delta_tau).map_err(|e| Error::config(e.to_string()))?;
    Ok((0..count).map(|_| exp.sample(rng)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMember {
    pub rho: CMatrix,
    pub occurrence_time: f64,
    pub measured: bool,
}

#[derive(Debug, Clone)]
pub struct EnlargedEnsemble {
    members: Vec<EnsembleMember>,
    characteristic_time: f64,
    family: ProjectorFamily,
    time: f64,
}

impl EnlargedEnsemble {
    /// Every member starts in `initial` at `τ = 0`.
    pub fn new(initial: &DensityMatrix, occurrence_times: Vec<f64>, delta_tau: f64, family: ProjectorFamily) -> Result<Self> {
        if occurrence_times.is_empty() {
            return Err(Error::config("ensemble needs at least one member"));
        }
        if !(delta_tau > 0.0) {
            return Err(Error::config("delta_tau must be positive"));
        }
        if family.dimension() != initial.dimension() {
            return Err(Error::DimensionMismatch {
                expected: initial.dimension(),
                actual: family.dimension(),
            });
        }
        if let Some(t) = occurrence_times.iter().find(|t| !(**t >= 0.0)) {
            return Err(Error::config(format!("occurrence time {t} is negative")));
        }
        let members = occurrence_times
            .into_iter()
            .map(|occurrence_time| EnsembleMember {
                rho: initial.matrix().clone(),
                occurrence_time,
                measured: false,
            })
            .collect();
        let mut ensemble = EnlargedEnsemble {
            members,
            characteristic_time: delta_tau,
            family,
            time: 0.0,
        };
        ensemble.dephase_due(0.0);
        Ok(ensemble)
    }

    /// Samples `count` occurrence times from `rng`.
    pub fn sample<R: Rng + ?Sized>(
        initial: &DensityMatrix,
        count: usize,
        delta_tau: f64,
        family: ProjectorFamily,
        rng: &mut R,
    ) -> Result<Self> {
        let times = sample_occurrence_times(count, delta_tau, rng)?;
        Self::new(initial, times, delta_tau, family)
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn characteristic_time(&self) -> f64 {
        self.characteristic_time
    }

    pub fn family(&self) -> &ProjectorFamily {
        &self.family
    }

    /// Time the ensemble has been evolved to.
    pub fn time(&self) -> f64 {
        self.time
    }

    fn dephase_due(&mut self, now: f64) {
        let family = &self.family;
        self.members.par_iter_mut().for_each(|m| {
            if !m.measured && m.occurrence_time <= now {
                m.rho = family.dephase_matrix(&m.rho);
                m.measured = true;
            }
        });
    }

    /// Member average with a fixed pairwise summation tree.
    pub fn average(&self) -> DensityMatrix {
        let sum = tree_sum(&self.members, &|m: &EnsembleMember| m.rho.clone());
        DensityMatrix::from_matrix_unchecked(sum.unscale(self.members.len() as f64), 1.0)
    }

    /// Average over members whose occurrence time is at most `tau`.
    pub fn conditioned_average(&self, tau: f64) -> Option<DensityMatrix> {
        let selected: Vec<&EnsembleMember> = self.members.iter().filter(|m| m.occurrence_time <= tau).collect();
        if selected.is_empty() {
            return None;
        }
        let sum = tree_sum(&selected, &|m: &&EnsembleMember| m.rho.clone());
        Some(DensityMatrix::from_matrix_unchecked(sum.unscale(selected.len() as f64), 1.0))
    }
}

fn tree_sum<T: Sync>(items: &[T], f: &(dyn Fn(&T) -> CMatrix + Sync)) -> CMatrix {
    const LEAF: usize = 64;
    if items.len() <= LEAF {
        let mut iter = items.iter();
        let mut acc = f(iter.next().expect("tree_sum over a nonempty slice"));
        for item in iter {
            acc += f(item);
        }
        return acc;
    }
    let (left, right) = items.split_at(items.len() / 2);
    let (a, b) = rayon::join(|| tree_sum(left, f), || tree_sum(right, f));
    a + b
}

/// Fraction of members not yet measured at `tau`.
pub fn survival_fraction(ensemble: &EnlargedEnsemble, tau: f64) -> Result<f64> {
    if tau > ensemble.time {
        return Err(Error::Protocol(format!(
            "ensemble evolved to {} only, survival requested at {tau}",
            ensemble.time
        )));
    }
    let alive = ensemble.members.iter().filter(|m| m.occurrence_time > tau).count();
    Ok(alive as f64 / ensemble.members.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub tau: f64,
    pub average: DensityMatrix,
    pub survival_fraction: f64,
}

/// A time-dependent Hamiltonian; `None` stands for the zero operator.
pub type HamiltonianSchedule<'a> = dyn Fn(f64) -> Option<HermitianOperator> + Sync + 'a;

/// Evolves every member over `grid` and returns the member average at each
/// grid point.
///
/// On `[τ_k, τ_{k+1}]` the Hamiltonian is `H(τ_k)`. A member whose occurrence
/// time falls inside the interval is evolved up to it, dephased, then evolved
/// for the remainder.
pub fn evolve_ensemble(
    ensemble: &mut EnlargedEnsemble,
    grid: &[f64],
    hamiltonian: &HamiltonianSchedule<'_>,
) -> Result<Vec<TrajectoryPoint>> {
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("time grid must be sorted ascending"));
    }
    if let Some(&first) = grid.first() {
        if first < ensemble.time {
            return Err(Error::config(format!(
                "time grid starts at {first}, before the ensemble time {}",
                ensemble.time
            )));
        }
    }
    let mut trajectory = Vec::with_capacity(grid.len());
    for &tau in grid {
        let start = ensemble.time;
        if tau > start {
            match hamiltonian(start) {
                None => ensemble.dephase_due(tau),
                Some(h) => step_with_hamiltonian(ensemble, &h, start, tau)?,
            }
            ensemble.time = tau;
        }
        trajectory.push(TrajectoryPoint {
            tau,
            average: ensemble.average(),
            survival_fraction: survival_fraction(ensemble, tau)?,
        });
    }
    Ok(trajectory)
}

fn step_with_hamiltonian(ensemble: &mut EnlargedEnsemble, h: &HermitianOperator, start: f64, end: f64) -> Result<()> {
    if h.dimension() != ensemble.family.dimension() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.family.dimension(),
            actual: h.dimension(),
        });
    }
    let (values, vectors) = hermitian_eigen(h.matrix());
    let propagator = |dt: f64| -> CMatrix {
        let mut scaled = vectors.clone();
        for (k, lambda) in values.iter().enumerate() {
            let phase = Complex64::cis(-lambda * dt);
            scaled.column_mut(k).iter_mut().for_each(|z| *z *= phase);
        }
        &scaled * vectors.adjoint()
    };
    let full = propagator(end - start);
    let full_dag = full.adjoint();
    let family = &ensemble.family;
    ensemble.members.par_iter_mut().for_each(|m| {
        if !m.measured && m.occurrence_time <= end {
            let before = propagator(m.occurrence_time - start);
            let after = propagator(end - m.occurrence_time);
            let rho = &before * &m.rho * before.adjoint();
            let rho = family.dephase_matrix(&rho);
            m.rho = &after * rho * after.adjoint();
            m.measured = true;
        } else {
            m.rho = &full * &m.rho * &full_dag;
        }
    });
    Ok(())
}

/// Schrödinger evolution of a single state over `grid` with the same
/// piecewise-constant convention as [`evolve_ensemble`].
pub fn schrodinger_trajectory(
    initial: &DensityMatrix,
    grid: &[f64],
    hamiltonian: &HamiltonianSchedule<'_>,
) -> Result<Vec<DensityMatrix>> {
    let mut rho = initial.clone();
    let mut time = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    for &tau in grid {
        if tau < time {
            return Err(Error::config("time grid must be sorted ascending and nonnegative"));
        }
        if tau > time {
            if let Some(h) = hamiltonian(time) {
                rho = crate::operator::unitary_evolve(&rho, &h, tau - time)?;
            }
            time = tau;
        }
        out.push(rho.clone());
    }
    Ok(out)
}

/// `Δ ρ_Sch + e^{-θ(τ)} (1 - Δ) ρ_Sch` with `θ(τ) = 1` for `τ ≥ 0`.
pub fn analytic_solution(rho_sch: &DensityMatrix, family: &ProjectorFamily, tau: f64) -> Result<DensityMatrix> {
    if family.dimension() != rho_sch.dimension() {
        return Err(Error::DimensionMismatch {
            expected: rho_sch.dimension(),
            actual: family.dimension(),
        });
    }
    let theta = if tau >= 0.0 { 1.0 } else { 0.0 };
    let m = family.decay_offdiagonal(rho_sch.matrix(), theta);
    Ok(DensityMatrix::from_matrix_unchecked(m, rho_sch.nominal_trace()))
}

/// Largest entry of `(1 - Δ) ρ`.
pub fn family_offdiagonal_magnitude(rho: &CMatrix, family: &ProjectorFamily) -> f64 {
    let off = rho - family.dephase_matrix(rho);
    off.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// CSV with header `tau,survival_fraction,max_abs_offdiagonal,diag_0,..`.
pub fn trajectory_csv(trajectory: &[TrajectoryPoint], family: &ProjectorFamily) -> String {
    let dim = family.dimension();
    let mut out = String::from("tau,survival_fraction,max_abs_offdiagonal");
    for k in 0..dim {
        write!(out, ",diag_{k}").expect("writing to a String cannot fail");
    }
    out.push('\n');
    for point in trajectory {
        write!(
            out,
            "{:.16e},{:.16e},{:.16e}",
            point.tau,
            point.survival_fraction,
            family_offdiagonal_magnitude(point.average.matrix(), family)
        )
        .expect("writing to a String cannot fail");
        for d in point.average.diagonal() {
            write!(out, ",{d:.16e}").expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{dephase, max_abs_diff, StateVector};
    use crate::random::{random_density_matrix, random_hermitian};
    use crate::seeds::rng_for;
    use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

    fn plus() -> DensityMatrix {
        DensityMatrix::from_state(&StateVector::new(vec![Complex64::new(FRAC_1_SQRT_2, 0.0); 2]).unwrap())
    }

    fn zero_h(_: f64) -> Option<HermitianOperator> {
        None
    }

    #[test]
    fn occurrence_time_mean_and_sign() {
        let mut rng = rng_for(1, "poisson-mean");
        let dt = 0.7;
        let n = 100_000;
        let times = sample_occurrence_times(n, dt, &mut rng).unwrap();
        assert!(times.iter().all(|t| *t >= 0.0));
        let mean = times.iter().sum::<f64>() / n as f64;
        assert!((mean - dt).abs() < 3.0 * dt / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn occurrence_times_pass_kolmogorov_smirnov() {
        let mut rng = rng_for(2, "poisson-ks");
        let dt = 2.0;
        let n = 20_000;
        let mut times = sample_occurrence_times(n, dt, &mut rng).unwrap();
        times.sort_by(f64::total_cmp);
        let mut d: f64 = 0.0;
        for (i, t) in times.iter().enumerate() {
            let cdf = 1.0 - (-t / dt).exp();
            d = d.max((cdf - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - cdf).abs());
        }
        // asymptotic 1% critical value
        assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn invalid_sampling_parameters() {
        let mut rng = rng_for(0, "x");
        assert!(sample_occurrence_times(0, 1.0, &mut rng).is_err());
        assert!(sample_occurrence_times(5, 0.0, &mut rng).is_err());
    }

    #[test]
    fn immediate_occurrences_give_the_dephased_state() {
        let family = ProjectorFamily::computational(2);
        let mut ens = EnlargedEnsemble::new(&plus(), vec![0.0; 10], 1.0, family.clone()).unwrap();
        let traj = evolve_ensemble(&mut ens, &[0.5, 1.0, 2.0], &zero_h).unwrap();
        let dephased = dephase(&plus(), &family).unwrap();
        for point in traj {
            assert!(max_abs_diff(point.average.matrix(), dephased.matrix()) < 1e-15);
            assert_eq!(point.survival_fraction, 0.0);
        }
    }

    #[test]
    fn offdiagonal_follows_the_survival_law() {
        let family = ProjectorFamily::computational(2);
        let mut rng = rng_for(3, "poisson-survival");
        let n = 100_000;
        let mut ens = EnlargedEnsemble::sample(&plus(), n, 1.0, family.clone(), &mut rng).unwrap();
        let traj = evolve_ensemble(&mut ens, &[0.0, LN_2, 1.0, 3.0], &zero_h).unwrap();
        let tol = 3.0 / (n as f64).sqrt();
        assert_eq!(traj[0].survival_fraction, 1.0);
        assert!((traj[1].survival_fraction - 0.5).abs() < tol);
        assert!((traj[2].survival_fraction - (-1.0f64).exp()).abs() < tol);
        let off = |p: &TrajectoryPoint| p.average.matrix()[(0, 1)].norm();
        assert!((off(&traj[2]) / 0.5 - (-1.0f64).exp()).abs() / (-1.0f64).exp() < tol);
        assert!((off(&traj[3]) / 0.5 - (-3.0f64).exp()).abs() < tol);
        for p in &traj {
            assert!((p.average.matrix()[(0, 0)].re - 0.5).abs() < 1e-12);
            assert!((p.average.trace() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn average_matches_analytic_solution_at_the_cutoff() {
        let family = ProjectorFamily::from_block_sizes(&[1, 2]).unwrap();
        let mut rng = rng_for(4, "poisson-analytic");
        let rho = random_density_matrix(3, &mut rng);
        let exact = analytic_solution(&rho, &family, 1.0).unwrap();
        let mut errors = Vec::new();
        for n in [1_000, 10_000, 100_000] {
            let mut ens = EnlargedEnsemble::sample(&rho, n, 1.0, family.clone(), &mut rng).unwrap();
            let traj = evolve_ensemble(&mut ens, &[1.0], &zero_h).unwrap();
            errors.push(max_abs_diff(traj[0].average.matrix(), exact.matrix()));
        }
        assert!(errors[0] > errors[2], "errors {errors:?}");
        assert!(errors[2] < 3.0 / (1e5f64).sqrt());
    }

    #[test]
    fn analytic_solution_properties() {
        let family = ProjectorFamily::computational(2);
        let out = analytic_solution(&plus(), &family, 0.3).unwrap();
        assert!((out.matrix()[(0, 1)].re - 0.5 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((out.trace() - 1.0).abs() < 1e-12);
        let diag = DensityMatrix::from_diagonal(&[0.3, 0.7]).unwrap();
        assert_eq!(analytic_solution(&diag, &family, 5.0).unwrap().matrix(), diag.matrix());
        assert_eq!(analytic_solution(&plus(), &family, -1.0).unwrap().matrix(), plus().matrix());
    }

    #[test]
    fn conditioned_average_is_one_dephasing() {
        let family = ProjectorFamily::computational(2);
        let mut rng = rng_for(5, "poisson-conditioned");
        let mut ens = EnlargedEnsemble::sample(&plus(), 10_000, 1.0, family.clone(), &mut rng).unwrap();
        evolve_ensemble(&mut ens, &[1.0, 2.0], &zero_h).unwrap();
        let direct = dephase(&plus(), &family).unwrap();
        let conditioned = ens.conditioned_average(1.5).unwrap();
        assert!(max_abs_diff(conditioned.matrix(), direct.matrix()) < 1e-12);
    }

    #[test]
    fn hamiltonian_evolution_keeps_members_valid_and_matches_oracle() {
        let mut rng = rng_for(6, "poisson-h");
        let h = random_hermitian(2, 1.0, &mut rng);
        let family = ProjectorFamily::computational(2);
        let times = vec![0.25, 10.0];
        let mut ens = EnlargedEnsemble::new(&plus(), times, 1.0, family.clone()).unwrap();
        let hc = h.clone();
        let schedule = move |_: f64| Some(hc.clone());
        evolve_ensemble(&mut ens, &[0.0, 0.5, 1.0], &schedule).unwrap();
        for m in ens.members() {
            assert!((crate::operator::trace(&m.rho).re - 1.0).abs() < 1e-10);
        }
        // member 0: evolve 0.25, dephase, evolve 0.75
        let u = |t: f64| h.evolution(t);
        let a = &u(0.25) * plus().matrix() * u(0.25).adjoint();
        let a = family.dephase_matrix(&a);
        let a = &u(0.75) * a * u(0.75).adjoint();
        assert!(max_abs_diff(&ens.members()[0].rho, &a) < 1e-12);
        let b = &u(1.0) * plus().matrix() * u(1.0).adjoint();
        assert!(max_abs_diff(&ens.members()[1].rho, &b) < 1e-12);
        assert!(ens.members()[0].measured && !ens.members()[1].measured);
    }

    #[test]
    fn schrodinger_trajectory_matches_single_step() {
        let mut rng = rng_for(7, "poisson-sch");
        let h = random_hermitian(3, 1.0, &mut rng);
        let rho = random_density_matrix(3, &mut rng);
        let hc = h.clone();
        let traj = schrodinger_trajectory(&rho, &[0.0, 0.4, 1.0], &move |_| Some(hc.clone())).unwrap();
        let u = h.evolution(1.0);
        assert!(max_abs_diff(traj[2].matrix(), &(&u * rho.matrix() * u.adjoint())) < 1e-12);
    }

    #[test]
    fn averages_are_bit_reproducible() {
        let family = ProjectorFamily::computational(2);
        let run = || {
            let mut rng = rng_for(8, "poisson-repro");
            let mut ens = EnlargedEnsemble::sample(&plus(), 5_000, 1.0, family.clone(), &mut rng).unwrap();
            evolve_ensemble(&mut ens, &[0.5, 1.0], &zero_h).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn survival_requires_evolution() {
        let family = ProjectorFamily::computational(2);
        let ens = EnlargedEnsemble::new(&plus(), vec![1.0], 1.0, family).unwrap();
        assert!(survival_fraction(&ens, 0.5).is_err());
        assert_eq!(survival_fraction(&ens, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn csv_layout() {
        let family = ProjectorFamily::computational(2);
        let mut ens = EnlargedEnsemble::new(&plus(), vec![0.5, 2.0], 1.0, family.clone()).unwrap();
        let traj = evolve_ensemble(&mut ens, &[0.0, 1.0], &zero_h).unwrap();
        let csv = trajectory_csv(&traj, &family);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "tau,survival_fraction,max_abs_offdiagonal,diag_0,diag_1");
        assert_eq!(lines.count(), 2);
    }
}
