//! Decoherence of a system coupled to an apparatus with a continuous
//! superselection momentum `p`, discretized on a uniform grid.
//!
//! Under the von Neumann coupling (kinetic term neglected, coupling rescaled
//! to one) the sector state at momentum `p` evolves as
//! `Ψ_n(p, t) = c_n e^{i t x_n p}`, so the momentum-averaged state has
//! off-diagonals `c_m c̄_n K_mn(t)` with
//!
//! ```text
//! K_mn(t) = sum_p q(p) e^{i t (x_m - x_n) p},
//! ```
//!
//! where `q` are the quadrature weights of `|φ(p)|²`. For a smooth density the
//! kernel vanishes as `t → ∞`; on a finite grid it is almost periodic.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{CMatrix, DensityMatrix, StateVector};

/// Default half-width of the Gaussian grid in units of `σ_p`.
pub const DEFAULT_GAUSSIAN_HALF_WIDTH: f64 = 10.0;
pub const DEFAULT_GRID_POINTS: usize = 4001;

#[derive(Debug, Clone, PartialEq)]
pub struct SectorField {
    momenta: Vec<f64>,
    /// Quadrature weights `|φ(p)|² Δp` (trapezoidal), summing to one.
    weights: Vec<f64>,
    coefficients: Vec<Complex64>,
    eigenvalues: Vec<f64>,
    time: f64,
}

impl SectorField {
    /// Builds a field from arbitrary nonnegative sample weights; they are
    /// normalized so that they sum to one.
    pub fn new(momenta: Vec<f64>, weights: Vec<f64>, coefficients: Vec<Complex64>, eigenvalues: Vec<f64>) -> Result<Self> {
        if momenta.is_empty() || momenta.len() != weights.len() {
            return Err(Error::config(format!(
                "{} momenta with {} weights",
                momenta.len(),
                weights.len()
            )));
        }
        if coefficients.is_empty() || coefficients.len() != eigenvalues.len() {
            return Err(Error::config(format!(
                "{} coefficients with {} eigenvalues",
                coefficients.len(),
                eigenvalues.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::config("momentum weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::config("momentum weights sum to zero"));
        }
        // Validates the normalization of the coefficients.
        StateVector::new(coefficients.clone())?;
        Ok(SectorField {
            momenta,
            weights: weights.iter().map(|w| w / total).collect(),
            coefficients,
            eigenvalues,
            time: 0.0,
        })
    }

    /// Gaussian `|φ(p)|²` with standard deviation `sigma_p`, sampled on
    /// `points` nodes over `[-half_width σ_p, half_width σ_p]`.
    pub fn gaussian(
        coefficients: Vec<Complex64>,
        eigenvalues: Vec<f64>,
        sigma_p: f64,
        half_width: f64,
        points: usize,
    ) -> Result<Self> {
        if !(sigma_p > 0.0) || !(half_width > 0.0) {
            return Err(Error::config("sigma_p and half_width must be positive"));
        }
        let momenta = uniform_grid(half_width * sigma_p, points)?;
        let density: Vec<f64> = momenta.iter().map(|p| (-0.5 * (p / sigma_p).powi(2)).exp()).collect();
        Self::new(momenta, trapezoid(&density), coefficients, eigenvalues)
    }

    /// Uniform `|φ(p)|²` on `[-a, a]`.
    pub fn box_weights(coefficients: Vec<Complex64>, eigenvalues: Vec<f64>, a: f64, points: usize) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::config("box half-width must be positive"));
        }
        let momenta = uniform_grid(a, points)?;
        let density = vec![1.0; points];
        Self::new(momenta, trapezoid(&density), coefficients, eigenvalues)
    }

    /// Two equally weighted sectors at `±p0`.
    pub fn two_point(coefficients: Vec<Complex64>, eigenvalues: Vec<f64>, p0: f64) -> Result<Self> {
        Self::new(vec![-p0, p0], vec![0.5, 0.5], coefficients, eigenvalues)
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn outcomes(&self) -> usize {
        self.coefficients.len()
    }

    /// Coupling time accumulated by [`evolve_sectors`].
    pub fn time(&self) -> f64 {
        self.time
    }

    /// Sector state `|Ψ(p)>` at grid index `i`.
    pub fn sector_state(&self, i: usize) -> StateVector {
        let p = self.momenta[i];
        let amplitudes = self
            .coefficients
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, x)| c * Complex64::cis(self.time * x * p))
            .collect::<Vec<_>>();
        StateVector::from_vector_unchecked(amplitudes.into())
    }

    /// First time at which a two-sector grid returns to full coherence for
    /// the pair `(m, n)`.
    pub fn recurrence_time(&self, m: usize, n: usize) -> Option<f64> {
        if self.momenta.len() != 2 {
            return None;
        }
        let freq = (self.eigenvalues[m] - self.eigenvalues[n]) * (self.momenta[1] - self.momenta[0]);
        (freq != 0.0).then(|| 2.0 * std::f64::consts::PI / freq.abs())
    }
}

fn uniform_grid(half_width: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::config("momentum grid needs at least two points"));
    }
    let step = 2.0 * half_width / (points - 1) as f64;
    Ok((0..points).map(|i| -half_width + step * i as f64).collect())
}

fn trapezoid(density: &[f64]) -> Vec<f64> {
    let last = density.len() - 1;
    density
        .iter()
        .enumerate()
        .map(|(i, d)| if i == 0 || i == last { 0.5 * d } else { *d })
        .collect()
}

/// Advances every sector by coupling time `t`.
pub fn evolve_sectors(field: &SectorField, t: f64) -> SectorField {
    SectorField {
        time: field.time + t,
        ..field.clone()
    }
}

/// `K_mn(t) = sum_p q(p) e^{i t (x_m - x_n) p}`, summed in grid order.
pub fn offdiagonal_kernel(field: &SectorField, m: usize, n: usize, t: f64) -> Complex64 {
    let omega = t * (field.eigenvalues[m] - field.eigenvalues[n]);
    if omega == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    field
        .momenta
        .iter()
        .zip(&field.weights)
        .fold(Complex64::new(0.0, 0.0), |acc, (p, q)| acc + Complex64::cis(omega * p) * q)
}

/// `sum_p q(p) |Ψ(p)><Ψ(p)|` at the field's current time.
pub fn averaged_state(field: &SectorField) -> DensityMatrix {
    let k = field.outcomes();
    let c = &field.coefficients;
    let mut rho = CMatrix::zeros(k, k);
    for m in 0..k {
        rho[(m, m)] = Complex64::new(c[m].norm_sqr(), 0.0);
        for n in m + 1..k {
            let entry = c[m] * c[n].conj() * offdiagonal_kernel(field, m, n, field.time);
            rho[(m, n)] = entry;
            rho[(n, m)] = entry.conj();
        }
    }
    DensityMatrix::from_matrix_unchecked(rho, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayRecord {
    pub times: Vec<f64>,
    pub outcomes: usize,
    /// Indexed by `(t, m, n)` in row-major order.
    pub kernel_values: Vec<Complex64>,
}

impl DecayRecord {
    pub fn kernel(&self, time_index: usize, m: usize, n: usize) -> Complex64 {
        let k = self.outcomes;
        self.kernel_values[(time_index * k + m) * k + n]
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `t,m,n,re_kernel,im_kernel,abs_kernel`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,m,n,re_kernel,im_kernel,abs_kernel\n");
        let k = self.outcomes;
        for (ti, t) in self.times.iter().enumerate() {
            for m in 0..k {
                for n in 0..k {
                    let z = self.kernel(ti, m, n);
                    writeln!(out, "{t:.16e},{m},{n},{:.16e},{:.16e},{:.16e}", z.re, z.im, z.norm())
                        .expect("writing to a String cannot fail");
                }
            }
        }
        out
    }
}

/// Tabulates the kernel for every ordered outcome pair at each time.
pub fn decay_scan(field: &SectorField, times: &[f64]) -> Result<DecayRecord> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("decay scan times must be sorted ascending"));
    }
    let k = field.outcomes();
    let mut kernel_values = Vec::with_capacity(times.len() * k * k);
    for &t in times {
        for m in 0..k {
            for n in 0..k {
                kernel_values.push(offdiagonal_kernel(field, m, n, t));
            }
        }
    }
    Ok(DecayRecord {
        times: times.to_vec(),
        outcomes: k,
        kernel_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::max_abs_diff;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn equal() -> Vec<Complex64> {
        vec![Complex64::new(FRAC_1_SQRT_2, 0.0); 2]
    }

    fn gaussian(sigma: f64) -> SectorField {
        SectorField::gaussian(equal(), vec![1.0, -1.0], sigma, DEFAULT_GAUSSIAN_HALF_WIDTH, DEFAULT_GRID_POINTS).unwrap()
    }

    /// Independent grid sum of the averaged off-diagonal.
    fn direct_offdiagonal(field: &SectorField, t: f64) -> Complex64 {
        let evolved = evolve_sectors(field, t);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..evolved.momenta().len() {
            let psi = evolved.sector_state(i);
            acc += psi.amplitudes()[0] * psi.amplitudes()[1].conj() * evolved.weights()[i];
        }
        acc
    }

    #[test]
    fn weights_are_normalized() {
        let f = gaussian(0.7);
        assert!((f.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(f.weights().iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn zero_time_leaves_field_unchanged() {
        let f = gaussian(1.0);
        assert_eq!(evolve_sectors(&f, 0.0), f);
        let rho = averaged_state(&f);
        assert!((rho.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_is_one_on_diagonal_and_at_zero_time() {
        let f = gaussian(1.3);
        for t in [0.0, 0.5, 3.0] {
            for m in 0..2 {
                assert!((offdiagonal_kernel(&f, m, m, t) - 1.0).norm() < 1e-12);
            }
        }
        assert!((offdiagonal_kernel(&f, 0, 1, 0.0) - 1.0).norm() < 1e-12);
    }

    #[test]
    fn single_sector_keeps_coherence() {
        let f = SectorField::new(vec![0.8], vec![1.0], equal(), vec![1.0, -1.0]).unwrap();
        for t in [0.0, 1.0, 17.0] {
            let rho = averaged_state(&evolve_sectors(&f, t));
            assert!((rho.matrix()[(0, 1)].norm() - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_offdiagonal_decreases_and_matches_grid_sum() {
        let f = gaussian(1.0);
        let mut previous = f64::INFINITY;
        for i in 0..20 {
            let t = 0.1 * i as f64;
            let rho = averaged_state(&evolve_sectors(&f, t));
            let direct = direct_offdiagonal(&f, t);
            assert!((rho.matrix()[(0, 1)] - direct).norm() < 1e-12);
            let mag = rho.matrix()[(0, 1)].norm();
            assert!(mag < previous || i == 0);
            previous = mag;
        }
    }

    #[test]
    fn gaussian_kernel_matches_closed_form_envelope() {
        for sigma in [0.5, 1.0, 2.5] {
            let f = gaussian(sigma);
            let dx = 2.0;
            let times: Vec<f64> = (0..50).map(|i| i as f64 * 4.0 / (sigma * dx * 49.0)).collect();
            let record = decay_scan(&f, &times).unwrap();
            for (ti, t) in times.iter().enumerate() {
                let expected = (-0.5 * sigma * sigma * dx * dx * t * t).exp();
                assert!((record.kernel(ti, 0, 1).norm() - expected).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn six_sigma_grid_also_meets_envelope_tolerance() {
        let f = SectorField::gaussian(equal(), vec![0.5, -0.5], 1.0, 6.0, 2001).unwrap();
        for i in 0..50 {
            let t = i as f64 * 0.1;
            assert!((offdiagonal_kernel(&f, 0, 1, t).norm() - (-0.5 * t * t).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn box_kernel_is_sinc() {
        let a = 1.5;
        let f = SectorField::box_weights(equal(), vec![0.5, -0.5], a, 20_001).unwrap();
        for i in 1..60 {
            let t = 0.25 * i as f64;
            let arg = a * t;
            let expected = arg.sin() / arg;
            let k = offdiagonal_kernel(&f, 0, 1, t);
            assert!((k.re - expected).abs() < 1e-6, "t = {t}");
            assert!(k.im.abs() < 1e-12);
        }
    }

    #[test]
    fn long_time_state_is_dephased() {
        let coeffs = vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let sigma = 0.8;
        let f = SectorField::gaussian(coeffs.clone(), vec![0.3, -0.7], sigma, DEFAULT_GAUSSIAN_HALF_WIDTH, DEFAULT_GRID_POINTS).unwrap();
        // t σ_p |Δx| = 10 and 20
        for scale in [10.0, 20.0] {
            let rho = averaged_state(&evolve_sectors(&f, scale / sigma));
            assert!(rho.max_abs_offdiagonal() < 1e-15);
            for (n, c) in coeffs.iter().enumerate() {
                assert!((rho.matrix()[(n, n)].re - c.norm_sqr()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn offdiagonal_factorizes_through_the_kernel() {
        let coeffs = [
            Complex64::new(0.5, 0.1),
            Complex64::new(-0.3, 0.6),
            Complex64::new(0.0, 0.0),
        ];
        let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let mut coeffs: Vec<Complex64> = coeffs.iter().map(|c| c / norm).collect();
        coeffs[2] = Complex64::new(0.0, 0.0);
        let f = SectorField::gaussian(coeffs.clone(), vec![1.0, 0.2, -2.0], 1.0, 10.0, 4001).unwrap();
        let t = 0.9;
        let rho = averaged_state(&evolve_sectors(&f, t));
        let expected = coeffs[0] * coeffs[1].conj() * offdiagonal_kernel(&f, 0, 1, t);
        assert!((rho.matrix()[(0, 1)] - expected).norm() < 1e-12);
    }

    #[test]
    fn diagonal_is_time_independent_and_trace_one() {
        let f = gaussian(1.0);
        let a = averaged_state(&evolve_sectors(&f, 0.3));
        let b = averaged_state(&evolve_sectors(&f, 7.0));
        for i in 0..2 {
            assert!((a.matrix()[(i, i)] - b.matrix()[(i, i)]).norm() < 1e-12);
        }
        assert!((a.trace() - 1.0).abs() < 1e-10);
        assert!(max_abs_diff(&a.matrix().adjoint(), a.matrix()) < 1e-15);
    }

    #[test]
    fn kernel_magnitude_is_bounded() {
        let f = SectorField::box_weights(equal(), vec![1.0, -1.0], 1.0, 101).unwrap();
        for i in 0..200 {
            assert!(offdiagonal_kernel(&f, 0, 1, i as f64 * 0.37).norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn two_point_grid_recurs() {
        let f = SectorField::two_point(equal(), vec![1.0, -1.0], 0.5).unwrap();
        let t = f.recurrence_time(0, 1).unwrap();
        assert!((t - PI).abs() < 1e-15);
        assert!(offdiagonal_kernel(&f, 0, 1, t).norm() > 1e-3);
        assert!((offdiagonal_kernel(&f, 0, 1, t).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decay_scan_edge_cases_and_csv() {
        let f = gaussian(1.0);
        let empty = decay_scan(&f, &[]).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.to_csv(), "t,m,n,re_kernel,im_kernel,abs_kernel\n");
        assert!(decay_scan(&f, &[1.0, 0.5]).is_err());
        let record = decay_scan(&f, &[0.0, 1.0]).unwrap();
        assert_eq!(record.to_csv().lines().count(), 1 + 2 * 4);
        for m in 0..2 {
            for n in 0..2 {
                assert!((record.kernel(0, m, n) - 1.0).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_fields_are_rejected() {
        assert!(SectorField::new(vec![0.0], vec![-1.0], equal(), vec![1.0, -1.0]).is_err());
        assert!(SectorField::new(vec![0.0, 1.0], vec![1.0], equal(), vec![1.0, -1.0]).is_err());
        assert!(SectorField::gaussian(equal(), vec![1.0], 1.0, 10.0, 11).is_err());
        assert!(SectorField::gaussian(equal(), vec![1.0, -1.0], 0.0, 10.0, 11).is_err());
    }
}
