//! The four-stage selective measurement of a system `S0` with apparatus `A`
//! and measuring pointer `M`.
//!
//! The composite space is ordered `S0 ⊗ A ⊗ M`. The apparatus stays in its
//! reference state `|A0> = |0>` throughout. The pointer starts in the ready
//! state `|M0> = |0>` and outcome `n` is recorded in pointer state `|n + 1>`,
//! reached by the controlled cyclic shift
//!
//! ```text
//! U_fb = sum_n |x_n><x_n| ⊗ 1_A ⊗ Shift^(n + 1),   Shift |j> = |j + 1 mod D>.
//! ```

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::operator::{
    born_probabilities, dephase, kron_all, max_abs_diff, partial_trace_matrix, CMatrix, DensityMatrix,
    ProjectorFamily, StateVector, Superoperator,
};
use crate::seeds::{derive_indexed_seed, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub coefficients: Vec<Complex64>,
    pub eigenvalues: Vec<f64>,
    pub apparatus_dimension: usize,
    pub pointer_dimension: usize,
    pub seed: u64,
    pub lambda_a: f64,
    pub lambda_m: f64,
}

impl SchemeConfig {
    /// Config with a one-dimensional apparatus, the smallest admissible pointer
    /// and unit couplings.
    pub fn new(coefficients: Vec<Complex64>, eigenvalues: Vec<f64>, seed: u64) -> Self {
        let pointer_dimension = coefficients.len() + 1;
        SchemeConfig {
            coefficients,
            eigenvalues,
            apparatus_dimension: 1,
            pointer_dimension,
            seed,
            lambda_a: 1.0,
            lambda_m: 1.0,
        }
    }

    pub fn outcomes(&self) -> usize {
        self.coefficients.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.coefficients.len();
        if k == 0 {
            return Err(Error::config("at least one coefficient is required"));
        }
        if self.eigenvalues.len() != k {
            return Err(Error::config(format!(
                "{} eigenvalues given for {k} coefficients",
                self.eigenvalues.len()
            )));
        }
        let norm: f64 = self.coefficients.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("sum |c_n|^2 = {norm}, expected 1")));
        }
        for a in 0..k {
            for b in a + 1..k {
                if self.eigenvalues[a] == self.eigenvalues[b] {
                    return Err(Error::config(format!(
                        "eigenvalues {a} and {b} coincide ({})",
                        self.eigenvalues[a]
                    )));
                }
            }
        }
        if self.apparatus_dimension == 0 {
            return Err(Error::config("apparatus_dimension must be positive"));
        }
        if self.pointer_dimension <= k {
            return Err(Error::config(format!(
                "pointer_dimension {} must exceed the number of outcomes {k}",
                self.pointer_dimension
            )));
        }
        if !(self.lambda_a > 0.0 && self.lambda_m > 0.0) {
            return Err(Error::config("coupling strengths lambda_a, lambda_m must be positive"));
        }
        Ok(())
    }

    /// Born weights `|c_n|^2`.
    pub fn weights(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.norm_sqr()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Initial,
    PostNonselective,
    PostEntangling,
    PostReading,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Initial => "initial",
            Stage::PostNonselective => "post_nonselective",
            Stage::PostEntangling => "post_entangling",
            Stage::PostReading => "post_reading",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    stage: Stage,
    rho: DensityMatrix,
    outcome: Option<usize>,
}

impl SchemeState {
    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    /// Present exactly at [`Stage::PostReading`].
    pub fn outcome(&self) -> Option<usize> {
        self.outcome
    }

    fn expect_stage(&self, expected: Stage) -> Result<()> {
        if self.stage != expected {
            return Err(Error::Protocol(format!(
                "expected stage {}, found {}",
                expected.name(),
                self.stage.name()
            )));
        }
        Ok(())
    }
}

/// Precomputed operators for one [`SchemeConfig`].
#[derive(Debug, Clone)]
pub struct MeasurementScheme {
    config: SchemeConfig,
    dims: [usize; 3],
    system_family: ProjectorFamily,
    pointer_shift: CMatrix,
}

impl MeasurementScheme {
    pub fn new(config: SchemeConfig) -> Result<Self> {
        config.validate()?;
        let dims = [config.outcomes(), config.apparatus_dimension, config.pointer_dimension];
        let system_family = ProjectorFamily::computational(dims[0]).lift(&dims, 0)?;
        let pointer_shift = controlled_shift(dims);
        Ok(MeasurementScheme {
            config,
            dims,
            system_family,
            pointer_shift,
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    /// `[dim S0, dim A, dim M]`.
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// `{|x_n><x_n| ⊗ 1_A ⊗ 1_M}`.
    pub fn system_family(&self) -> &ProjectorFamily {
        &self.system_family
    }

    pub fn pointer_shift(&self) -> &CMatrix {
        &self.pointer_shift
    }

    /// Pointer basis index recording outcome `n`.
    pub fn pointer_index(outcome: usize) -> usize {
        outcome + 1
    }

    /// `(sum_n c_n |x_n, A0>) |M0>` as a pure density matrix.
    pub fn prepare_initial(&self) -> Result<SchemeState> {
        let system = StateVector::new(self.config.coefficients.clone())
            .map_err(|e| Error::config(format!("coefficients do not form a normalized state: {e}")))?;
        let apparatus = StateVector::basis(self.dims[1], 0);
        let pointer = StateVector::basis(self.dims[2], 0);
        let rho = kron_all([&system.projector(), &apparatus.projector(), &pointer.projector()]);
        Ok(SchemeState {
            stage: Stage::Initial,
            rho: DensityMatrix::from_matrix_unchecked(rho, 1.0),
            outcome: None,
        })
    }

    /// Dephasing in the eigenbasis of the measured observable.
    pub fn apply_nonselective(&self, state: &SchemeState) -> Result<SchemeState> {
        state.expect_stage(Stage::Initial)?;
        Ok(SchemeState {
            stage: Stage::PostNonselective,
            rho: dephase(&state.rho, &self.system_family)?,
            outcome: None,
        })
    }

    /// Conjugation by the controlled pointer shift.
    pub fn apply_entangling(&self, state: &SchemeState) -> Result<SchemeState> {
        state.expect_stage(Stage::PostNonselective)?;
        let rho = Superoperator::UnitaryConjugation(self.pointer_shift.clone()).apply(&state.rho)?;
        Ok(SchemeState {
            stage: Stage::PostEntangling,
            rho,
            outcome: None,
        })
    }

    /// Samples an outcome by the Born rule and collapses onto it.
    pub fn read_event<R: Rng + ?Sized>(&self, state: &SchemeState, rng: &mut R) -> Result<SchemeState> {
        state.expect_stage(Stage::PostEntangling)?;
        let probs = born_probabilities(&state.rho, &self.system_family)?;
        let outcome = sample_index(&probs, rng.random::<f64>());
        let p = &self.system_family.projectors()[outcome];
        let weight = probs[outcome];
        let collapsed = (p * state.rho.matrix() * p).unscale(weight);
        Ok(SchemeState {
            stage: Stage::PostReading,
            rho: DensityMatrix::from_matrix_unchecked(collapsed, 1.0),
            outcome: Some(outcome),
        })
    }

    pub fn run(&self) -> Result<Transcript> {
        let mut rng = SimRng::seed_from_u64(self.config.seed);
        let initial = self.prepare_initial()?;
        let nonselective = self.apply_nonselective(&initial)?;
        let entangled = self.apply_entangling(&nonselective)?;
        let read = self.read_event(&entangled, &mut rng)?;
        let outcome = read.outcome.expect("post-reading state carries an outcome");
        Ok(Transcript {
            states: vec![initial, nonselective, entangled, read],
            outcome,
        })
    }

    /// Checks trace, purity and marginal invariants of a transcript.
    ///
    /// Returns the name of the first violated invariant.
    pub fn check_invariants(&self, transcript: &Transcript, tol: f64) -> std::result::Result<(), String> {
        for state in &transcript.states {
            if (state.rho.trace() - 1.0).abs() > tol {
                return Err(format!("trace_{}", state.stage.name()));
            }
        }
        if (transcript.states[0].rho.purity() - 1.0).abs() > tol {
            return Err("purity_initial".into());
        }
        if (transcript.states[3].rho.purity() - 1.0).abs() > tol {
            return Err("purity_post_reading".into());
        }
        let post_reading = transcript.states[3].rho.matrix();
        if max_abs_diff(&(post_reading * post_reading), post_reading) > tol {
            return Err("idempotence_post_reading".into());
        }
        let before = self.system_marginal(transcript.states[1].rho.matrix());
        let after = self.system_marginal(transcript.states[2].rho.matrix());
        if max_abs_diff(&before, &after) > tol {
            return Err("system_marginal_preserved".into());
        }
        Ok(())
    }

    /// Reduced state of `S0 ⊗ A`, tracing out the pointer.
    pub fn system_marginal(&self, rho: &CMatrix) -> CMatrix {
        let sa = self.dims[0] * self.dims[1];
        partial_trace_matrix(rho, &[sa, self.dims[2]], 0).expect("dims match the scheme layout")
    }
}

fn controlled_shift(dims: [usize; 3]) -> CMatrix {
    let [k, a, d] = dims;
    let total = k * a * d;
    let mut u = CMatrix::zeros(total, total);
    for n in 0..k {
        for app in 0..a {
            for j in 0..d {
                let from = (n * a + app) * d + j;
                let to = (n * a + app) * d + (j + n + 1) % d;
                u[(to, from)] = Complex64::new(1.0, 0.0);
            }
        }
    }
    u
}

/// Inverse-CDF sampling; `u` uniform in `[0, 1)`.
pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last_positive = k;
        acc += p;
        if target < acc {
            return k;
        }
    }
    last_positive
}

/// The four states of one run and its sampled outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub states: Vec<SchemeState>,
    pub outcome: usize,
}

impl Transcript {
    /// One line per stage:
    /// `stage=<name> trace=<x> purity=<x> diagonal=<x;x;..> outcome=<n|->`.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for state in &self.states {
            let diagonal: Vec<String> = state.rho.diagonal().iter().map(|d| format!("{d:.16e}")).collect();
            let outcome = state.outcome.map_or("-".to_string(), |o| o.to_string());
            writeln!(
                out,
                "stage={} trace={:.16e} purity={:.16e} diagonal={} outcome={}",
                state.stage.name(),
                state.rho.trace(),
                state.rho.purity(),
                diagonal.join(";"),
                outcome
            )
            .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Runs the scheme for a full transcript.
pub fn run_scheme(config: SchemeConfig) -> Result<Transcript> {
    MeasurementScheme::new(config)?.run()
}

/// Outcome counts over `runs` independent runs, run `i` seeded with
/// `derive_indexed_seed(config.seed, "scheme-run", i)`.
pub fn outcome_histogram(config: &SchemeConfig, runs: usize) -> Result<Vec<usize>> {
    let base = MeasurementScheme::new(config.clone())?;
    let initial = base.prepare_initial()?;
    let entangled = base.apply_entangling(&base.apply_nonselective(&initial)?)?;
    let mut counts = vec![0usize; config.outcomes()];
    for i in 0..runs {
        let mut rng = SimRng::seed_from_u64(derive_indexed_seed(config.seed, "scheme-run", i as u64));
        let read = base.read_event(&entangled, &mut rng)?;
        counts[read.outcome.expect("post-reading state carries an outcome")] += 1;
    }
    Ok(counts)
}

/// Pearson chi-squared statistic of observed counts against expected weights.
pub fn chi_squared(counts: &[usize], weights: &[f64]) -> f64 {
    let total: usize = counts.iter().sum();
    counts
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&c, &w)| {
            let expected = w * total as f64;
            (c as f64 - expected).powi(2) / expected
        })
        .sum()
}
