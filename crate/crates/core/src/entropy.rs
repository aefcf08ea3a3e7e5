//! Entropy transfer between a measured system `S` and a measuring system `M`.
//!
//! Without transfer the reduced state of subsystem `Y` is
//! `ρ₀ʸ = tr_Ȳ e^{-(1 - Δ̃)} ρ_Sch`, a trace-one state. Assuming the event
//! reading moves entropy `σ` into `Y` rescales it to `ρʸ = e^{-σ} ρ₀ʸ`, and
//! observables are starred, `Oʸ★ = e^{σ} Oʸ`, so that expectation values are
//! unchanged. Transfers pair to zero: `σ_{M→S} + σ_{S→M} = 0`.

use std::fmt;

use crate::error::{Error, Result};
use crate::operator::{kron, partial_trace_matrix, trace, CMatrix, DensityMatrix, HermitianOperator, ProjectorFamily};

/// Tolerance on `tr[(1_S★ ⊗ 1_M★) ρ] = 1`.
pub const PAIRING_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    System,
    Meter,
}

/// `tr_Ȳ e^{-(1 - Δ̃)} ρ_Sch` for a bipartite `S ⊗ M` state, where the family
/// acts on `S` and is lifted to `Δ̃ = Δ ⊗ 1_M`.
pub fn reduced_state_no_transfer(
    rho_sch: &DensityMatrix,
    family: &ProjectorFamily,
    dims: [usize; 2],
    keep: Subsystem,
) -> Result<DensityMatrix> {
    if dims[0] * dims[1] != rho_sch.dimension() {
        return Err(Error::config(format!(
            "dims {:?} do not match state dimension {}",
            dims,
            rho_sch.dimension()
        )));
    }
    if family.dimension() != dims[0] {
        return Err(Error::config(format!(
            "family dimension {} does not match system dimension {}",
            family.dimension(),
            dims[0]
        )));
    }
    let lifted = family.lift(&dims, 0)?;
    let decayed = lifted.decay_offdiagonal(rho_sch.matrix(), 1.0);
    let index = match keep {
        Subsystem::System => 0,
        Subsystem::Meter => 1,
    };
    let reduced = partial_trace_matrix(&decayed, &dims, index)?;
    let out = DensityMatrix::from_matrix_unchecked(reduced, 1.0);
    if (out.trace() - 1.0).abs() > 1e-10 {
        return Err(Error::invariant(format!("reduced trace {} differs from 1", out.trace())));
    }
    Ok(out)
}

/// A reduced state carrying transferred entropy `σ`; its trace is `e^{-σ}`
/// and only starred observables give meaningful averages against it.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferredState {
    pub rho: DensityMatrix,
    pub sigma: f64,
    pub base_observables_scale: f64,
}

pub fn apply_transfer(rho0: &DensityMatrix, sigma: f64) -> TransferredState {
    TransferredState {
        rho: rho0.scaled((-sigma).exp()),
        sigma,
        base_observables_scale: sigma.exp(),
    }
}

/// `O★ = e^{σ} O`.
pub fn star_observable(obs: &HermitianOperator, sigma: f64) -> HermitianOperator {
    obs.scaled(sigma.exp())
}

impl TransferredState {
    /// `tr(O★ ρʸ)`, which equals `tr(O ρ₀ʸ)`.
    pub fn expectation(&self, obs: &HermitianOperator) -> f64 {
        let starred = star_observable(obs, self.sigma);
        trace(&(starred.matrix() * self.rho.matrix())).re
    }
}

/// Whether `tr[(1_S★ ⊗ 1_M★) ρ] = 1` within [`PAIRING_TOL`].
pub fn check_pairing(rho: &DensityMatrix, dims: [usize; 2], sigma_s: f64, sigma_m: f64) -> Result<bool> {
    if dims[0] * dims[1] != rho.dimension() {
        return Err(Error::config(format!(
            "dims {:?} do not match state dimension {}",
            dims,
            rho.dimension()
        )));
    }
    let one_s = star_observable(&HermitianOperator::identity(dims[0]), sigma_s);
    let one_m = star_observable(&HermitianOperator::identity(dims[1]), sigma_m);
    let joint: CMatrix = kron(one_s.matrix(), one_m.matrix());
    let value = trace(&(joint * rho.matrix())).re;
    Ok((value - 1.0).abs() < PAIRING_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    /// Event reading by a measuring system independent of the measured one.
    TypeI,
    /// The mixed factorization with weight `α` on the measuring system.
    DisqualifiedAlpha(f64),
    /// Event reading by the combined system itself.
    TypeII,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::TypeI => write!(f, "type_I"),
            Scenario::DisqualifiedAlpha(alpha) => write!(f, "disqualified_alpha({alpha})"),
            Scenario::TypeII => write!(f, "type_II"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyLedger {
    pub sigma_m_to_s: f64,
    pub sigma_s_to_m: f64,
    pub scenario: Scenario,
}

impl EntropyLedger {
    pub fn net(&self) -> f64 {
        self.sigma_m_to_s + self.sigma_s_to_m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub scenario: Scenario,
    pub reason: &'static str,
}

pub const REASON_INDEPENDENCE: &str = "violates independence condition B1";
pub const REASON_S_CLOSED: &str = "S closed, M disqualified";

/// Fixed transfer constants per factorization scenario.
///
/// `α = 1` puts the whole reading on the independent measuring system and is
/// the type I factorization.
pub fn ledger_for_scenario(scenario: Scenario) -> std::result::Result<EntropyLedger, Rejection> {
    let (sigma_m_to_s, sigma_s_to_m) = match scenario {
        Scenario::TypeI => (-1.0, 1.0),
        Scenario::TypeII => (0.0, 0.0),
        Scenario::DisqualifiedAlpha(1.0) => (-1.0, 1.0),
        Scenario::DisqualifiedAlpha(0.0) => {
            return Err(Rejection {
                scenario,
                reason: REASON_S_CLOSED,
            })
        }
        Scenario::DisqualifiedAlpha(_) => {
            return Err(Rejection {
                scenario,
                reason: REASON_INDEPENDENCE,
            })
        }
    };
    Ok(EntropyLedger {
        sigma_m_to_s,
        sigma_s_to_m,
        scenario,
    })
}

/// `scenario=<s> sigma_M_to_S=<x> sigma_S_to_M=<x> accepted=<bool> reason=<r>`.
pub fn ledger_record(result: &std::result::Result<EntropyLedger, Rejection>) -> String {
    match result {
        Ok(l) => format!(
            "scenario={} sigma_M_to_S={} sigma_S_to_M={} accepted=true reason=-",
            l.scenario, l.sigma_m_to_s, l.sigma_s_to_m
        ),
        Err(r) => format!(
            "scenario={} sigma_M_to_S=- sigma_S_to_M=- accepted=false reason={}",
            r.scenario, r.reason
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{hermiticity_defect, max_abs_diff, partial_trace, StateVector};
    use crate::random::{random_density_matrix, random_hermitian};
    use crate::seeds::rng_for;
    use num_complex::Complex64;
    use std::f64::consts::{E, FRAC_1_SQRT_2};

    /// `exp(-(1 - Δ))` applied through its Taylor series.
    fn superoperator_exp_oracle(rho: &CMatrix, family: &ProjectorFamily) -> CMatrix {
        let generator = |m: &CMatrix| family.dephase_matrix(m) - m;
        let mut term = rho.clone();
        let mut sum = rho.clone();
        for k in 1..40 {
            term = generator(&term).unscale(k as f64);
            sum += &term;
        }
        sum
    }

    #[test]
    fn block_diagonal_input_reduces_to_plain_partial_trace() {
        let rho = DensityMatrix::from_diagonal(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let family = ProjectorFamily::computational(2);
        for (keep, index) in [(Subsystem::System, 0), (Subsystem::Meter, 1)] {
            let out = reduced_state_no_transfer(&rho, &family, [2, 2], keep).unwrap();
            let plain = partial_trace(&rho, &[2, 2], index).unwrap();
            assert!(max_abs_diff(out.matrix(), plain.matrix()) < 1e-15);
        }
    }

    #[test]
    fn equal_superposition_with_trivial_meter() {
        let psi = StateVector::new(vec![Complex64::new(FRAC_1_SQRT_2, 0.0); 2]).unwrap();
        let rho = DensityMatrix::from_state(&psi);
        let out = reduced_state_no_transfer(&rho, &ProjectorFamily::computational(2), [2, 1], Subsystem::System).unwrap();
        assert!((out.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((out.matrix()[(0, 1)].re - 0.5 / E).abs() < 1e-15);
    }

    #[test]
    fn matches_taylor_series_oracle_and_is_a_state() {
        let mut rng = rng_for(11, "entropy-oracle");
        for _ in 0..20 {
            let rho = random_density_matrix(6, &mut rng);
            let family = ProjectorFamily::from_block_sizes(&[1, 2]).unwrap();
            let lifted = family.lift(&[3, 2], 0).unwrap();
            let oracle = superoperator_exp_oracle(rho.matrix(), &lifted);
            for (keep, index) in [(Subsystem::System, 0), (Subsystem::Meter, 1)] {
                let out = reduced_state_no_transfer(&rho, &family, [3, 2], keep).unwrap();
                let expected = partial_trace_matrix(&oracle, &[3, 2], index).unwrap();
                assert!(max_abs_diff(out.matrix(), &expected) < 1e-13);
                assert!((out.trace() - 1.0).abs() < 1e-10);
                assert!(hermiticity_defect(out.matrix()) < 1e-14);
                assert!(out.eigenvalues()[0] > -1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_a_configuration_error() {
        let rho = DensityMatrix::maximally_mixed(4);
        let family = ProjectorFamily::computational(2);
        assert!(matches!(
            reduced_state_no_transfer(&rho, &family, [3, 2], Subsystem::System),
            Err(Error::Configuration(_))
        ));
        assert!(matches!(
            reduced_state_no_transfer(&rho, &ProjectorFamily::computational(4), [2, 2], Subsystem::System),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn transfer_traces() {
        let rho = DensityMatrix::maximally_mixed(3);
        assert_eq!(apply_transfer(&rho, 0.0).rho, rho);
        let up = apply_transfer(&rho, -1.0);
        assert!((up.rho.trace() - E).abs() < 1e-10);
        assert!((up.rho.nominal_trace() - E).abs() < 1e-15);
        let down = apply_transfer(&rho, 1.0);
        assert!((down.rho.trace() - 1.0 / E).abs() < 1e-10);
    }

    #[test]
    fn starred_expectations_are_invariant() {
        let mut rng = rng_for(12, "entropy-star");
        for i in 0..50 {
            let rho = random_density_matrix(4, &mut rng);
            let obs = random_hermitian(4, 2.0, &mut rng);
            let sigma = -3.0 + 6.0 * i as f64 / 49.0;
            let transferred = apply_transfer(&rho, sigma);
            let direct = trace(&(obs.matrix() * rho.matrix())).re;
            assert!((transferred.expectation(&obs) - direct).abs() < 1e-12);
        }
        let one = star_observable(&HermitianOperator::identity(2), -1.0);
        assert!((one.matrix()[(0, 0)].re - 1.0 / E).abs() < 1e-15);
        let t = apply_transfer(&DensityMatrix::maximally_mixed(2), -1.0);
        assert!((t.expectation(&HermitianOperator::identity(2)) - 1.0).abs() < 1e-12);
        assert_eq!(star_observable(&one, 0.0), one);
    }

    #[test]
    fn pairing_requires_zero_net_transfer() {
        let mut rng = rng_for(13, "entropy-pairing");
        let rho = random_density_matrix(6, &mut rng);
        assert!(check_pairing(&rho, [2, 3], -1.0, 1.0).unwrap());
        assert!(check_pairing(&rho, [2, 3], 0.0, 0.0).unwrap());
        assert!(!check_pairing(&rho, [2, 3], -1.0, 0.0).unwrap());
        for i in 0..61 {
            let s = -3.0 + 0.1 * i as f64;
            assert!(check_pairing(&rho, [2, 3], s, -s).unwrap());
            assert!(!check_pairing(&rho, [2, 3], s, -s + 2e-6).unwrap());
        }
        assert!(check_pairing(&rho, [3, 3], 0.0, 0.0).is_err());
    }

    #[test]
    fn scenario_ledgers() {
        let one = ledger_for_scenario(Scenario::TypeI).unwrap();
        assert_eq!((one.sigma_m_to_s, one.sigma_s_to_m), (-1.0, 1.0));
        assert_eq!(one.net(), 0.0);
        let two = ledger_for_scenario(Scenario::TypeII).unwrap();
        assert_eq!((two.sigma_m_to_s, two.sigma_s_to_m), (0.0, 0.0));
        assert_eq!(ledger_for_scenario(Scenario::DisqualifiedAlpha(0.5)).unwrap_err().reason, REASON_INDEPENDENCE);
        assert_eq!(ledger_for_scenario(Scenario::DisqualifiedAlpha(0.0)).unwrap_err().reason, REASON_S_CLOSED);
        assert_eq!(ledger_for_scenario(Scenario::DisqualifiedAlpha(1.0)).unwrap().sigma_m_to_s, -1.0);
    }

    #[test]
    fn ledger_records() {
        assert_eq!(
            ledger_record(&ledger_for_scenario(Scenario::TypeI)),
            "scenario=type_I sigma_M_to_S=-1 sigma_S_to_M=1 accepted=true reason=-"
        );
        assert_eq!(
            ledger_record(&ledger_for_scenario(Scenario::DisqualifiedAlpha(0.25))),
            "scenario=disqualified_alpha(0.25) sigma_M_to_S=- sigma_S_to_M=- accepted=false reason=violates independence condition B1"
        );
    }
}
