//! Can a selective-measurement outcome be written as a mixture of
//! unitarily post-processed non-selective states?
//!
//! Matching coefficients gives the linear constraints
//!
//! ```text
//! u_r |c_n|² = δ_mn χ_r     for every pointer label r and outcome n,
//! ```
//!
//! in the real unknowns `u_r`. They are consistent only when the initial
//! state is the eigenstate of the target outcome `m`; otherwise the least
//! squares residual is bounded away from zero.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Residuals below this certify solvability.
pub const SOLVABLE_TOL: f64 = 1e-10;
/// `|c_n|²` at or below this is treated as zero.
pub const ZERO_WEIGHT_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionInstance {
    pub coefficients: Vec<Complex64>,
    pub chi: Vec<f64>,
    pub target_outcome: usize,
}

impl RegressionInstance {
    pub fn new(coefficients: Vec<Complex64>, chi: Vec<f64>, target_outcome: usize) -> Result<Self> {
        let instance = RegressionInstance {
            coefficients,
            chi,
            target_outcome,
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn validate(&self) -> Result<()> {
        let norm: f64 = self.coefficients.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("sum |c_n|^2 = {norm}, expected 1")));
        }
        if self.target_outcome >= self.coefficients.len() {
            return Err(Error::config(format!(
                "target outcome {} out of range for {} coefficients",
                self.target_outcome,
                self.coefficients.len()
            )));
        }
        if self.chi.is_empty() || self.chi.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::config("chi must be a nonempty nonnegative vector"));
        }
        let total: f64 = self.chi.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("chi sums to {total}, expected 1")));
        }
        Ok(())
    }

    pub fn weights(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn pointer_labels(&self) -> usize {
        self.chi.len()
    }
}

/// Dense system `A u = b`; row `(r, n)` reads `|c_n|² u_r = δ_mn χ_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// `(r, n)` for each row.
    pub rows: Vec<(usize, usize)>,
}

/// One row per `(r, n)` with nonzero `|c_n|²`. Rows for the target outcome
/// are kept even when `c_m = 0`, since `0 = χ_r` is still a constraint.
pub fn build_constraints(instance: &RegressionInstance) -> LinearSystem {
    let weights = instance.weights();
    let m = instance.target_outcome;
    let r_count = instance.pointer_labels();
    let mut rows = Vec::new();
    for r in 0..r_count {
        for (n, w) in weights.iter().enumerate() {
            if *w > ZERO_WEIGHT_TOL || n == m {
                rows.push((r, n));
            }
        }
    }
    let mut matrix = DMatrix::zeros(rows.len(), r_count);
    let mut rhs = DVector::zeros(rows.len());
    for (i, &(r, n)) in rows.iter().enumerate() {
        matrix[(i, r)] = if weights[n] > ZERO_WEIGHT_TOL { weights[n] } else { 0.0 };
        if n == m {
            rhs[i] = instance.chi[r];
        }
    }
    LinearSystem { matrix, rhs, rows }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub best_u: Vec<f64>,
    /// `min ‖A u - b‖₂` over real `u`.
    pub residual: f64,
    pub solvable: bool,
    /// The same minimum over the simplex `u ≥ 0`, `sum u = 1`.
    pub constrained_residual: f64,
}

fn residual_norm(system: &LinearSystem, u: &DVector<f64>) -> f64 {
    (&system.matrix * u - &system.rhs).norm()
}

/// Unconstrained minimum-norm least squares via SVD.
pub fn solve_least_squares(system: &LinearSystem) -> Result<ResidualReport> {
    if system.matrix.nrows() == 0 || system.matrix.ncols() == 0 {
        return Err(Error::config("empty linear system"));
    }
    let svd = system.matrix.clone().svd(true, true);
    let u = svd
        .solve(&system.rhs, 1e-14)
        .map_err(|e| Error::invariant(format!("least squares solve failed: {e}")))?;
    let residual = residual_norm(system, &u);
    let constrained = solve_on_simplex(system);
    Ok(ResidualReport {
        best_u: u.iter().copied().collect(),
        residual,
        solvable: residual < SOLVABLE_TOL,
        constrained_residual: residual_norm(system, &constrained),
    })
}

/// Euclidean projection onto `{u ≥ 0, sum u = 1}`.
fn project_to_simplex(v: &DVector<f64>) -> DVector<f64> {
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, s) in sorted.iter().enumerate() {
        cumulative += s;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if s - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}

/// Accelerated projected gradient for `min ‖A u - b‖²` on the simplex.
fn solve_on_simplex(system: &LinearSystem) -> DVector<f64> {
    let a = &system.matrix;
    let ata = a.transpose() * a;
    let atb = a.transpose() * &system.rhs;
    let lipschitz = ata.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
    let n = a.ncols();
    let mut u = DVector::from_element(n, 1.0 / n as f64);
    if lipschitz <= 0.0 {
        return u;
    }
    let mut y = u.clone();
    let mut t: f64 = 1.0;
    for _ in 0..20_000 {
        let grad = &ata * &y - &atb;
        let next = project_to_simplex(&(&y - grad / lipschitz));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &next + (&next - &u) * ((t - 1.0) / t_next);
        let change = (&next - &u).norm();
        u = next;
        t = t_next;
        if change < 1e-15 {
            break;
        }
    }
    u
}

pub fn verify_regression(instance: &RegressionInstance) -> Result<ResidualReport> {
    instance.validate()?;
    solve_least_squares(&build_constraints(instance))
}

/// Closed-form squared residual
/// `sum_r χ_r² (1 - |c_m|⁴ / sum_n |c_n|⁴)`.
pub fn closed_form_squared_residual(instance: &RegressionInstance) -> f64 {
    let weights = instance.weights();
    let fourth: f64 = weights.iter().map(|w| w * w).sum();
    let wm = weights[instance.target_outcome];
    let chi_sq: f64 = instance.chi.iter().map(|x| x * x).sum();
    chi_sq * (1.0 - wm * wm / fourth)
}

/// Report record: `coefficients=.. chi=.. residual=.. solvable=.. constrained_residual=..`.
pub struct ReportRecord<'a> {
    pub instance: &'a RegressionInstance,
    pub report: &'a ResidualReport,
}

impl fmt::Display for ReportRecord<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let coefficients: Vec<String> = self
            .instance
            .coefficients
            .iter()
            .map(|c| format!("{:.16e}:{:.16e}", c.re, c.im))
            .collect();
        let chi: Vec<String> = self.instance.chi.iter().map(|x| format!("{x:.16e}")).collect();
        write!(
            f,
            "coefficients={} chi={} residual={:.16e} solvable={} constrained_residual={:.16e}",
            coefficients.join(";"),
            chi.join(";"),
            self.report.residual,
            self.report.solvable,
            self.report.constrained_residual
        )
    }
}
