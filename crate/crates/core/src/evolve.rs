//! Reference integration of dρ/dt = T·𝓛(t/T)ρ and state comparison.
//!
//! Each step applies exp(T·Δs·𝓛(s_mid)), the exponential of the generator
//! at the step midpoint, which is second-order accurate in Δs. The step
//! exponentials are independent and are evaluated in parallel chunks.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::operator::{devectorize, CoherenceVector, DensityTolerance, OperatorBasis, OperatorMatrix};
use crate::superop::GeneratorFamily;
use crate::{par, CMatrix, CVector, C64};

pub const DEFAULT_STEPS: usize = 2000;
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Number of midpoint steps across s ∈ [0, 1].
    pub steps: usize,
    /// Keep every n-th state (the final state is always kept).
    pub record_every: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { steps: DEFAULT_STEPS, record_every: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t_total: f64,
    pub s: Vec<f64>,
    pub states: Vec<CVector>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn final_state(&self) -> CoherenceVector {
        CoherenceVector::new(self.states.last().expect("trajectory is never empty").clone())
    }

    pub fn state(&self, k: usize) -> CoherenceVector {
        CoherenceVector::new(self.states[k].clone())
    }
}

/// exp(dt·L), using a real exponential when L has no imaginary part.
pub fn step_exp(l: &CMatrix, dt: f64) -> CMatrix {
    let real = l.iter().all(|z| z.im == 0.0);
    if real {
        let r: DMatrix<f64> = l.map(|z| z.re * dt);
        r.exp().map(|x| C64::new(x, 0.0))
    } else {
        (l * C64::new(dt, 0.0)).exp()
    }
}

fn check_inputs(fam: &dyn GeneratorFamily, rho0: &CoherenceVector, t_total: f64) -> Result<()> {
    if !t_total.is_finite() || t_total < 0.0 {
        return invalid(format!("total time must be finite and non-negative, got {t_total}"));
    }
    if rho0.dim() != fam.basis().len() {
        return invalid(format!(
            "initial state has {} components, generator acts on {}",
            rho0.dim(),
            fam.basis().len()
        ));
    }
    Ok(())
}

/// Step propagators exp(T·(b − a)·𝓛((a + b)/2)) for consecutive grid pairs.
fn step_maps(fam: &dyn GeneratorFamily, t_total: f64, edges: &[(f64, f64)]) -> Result<Vec<CMatrix>> {
    par::try_map(edges, |&(a, b)| {
        let l = fam.generator(0.5 * (a + b))?;
        let u = step_exp(l.matrix(), t_total * (b - a));
        if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NumericalFailure(format!("step exponential overflowed on [{a}, {b}]")));
        }
        Ok(u)
    })
}

fn uniform(steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 / steps as f64).collect()
}

/// Integrates from s = 0 to 1 on a uniform grid.
pub fn exact_evolve(fam: &dyn GeneratorFamily, rho0: &CoherenceVector, t_total: f64, opts: &EvolveOptions) -> Result<Trajectory> {
    if opts.steps == 0 || opts.record_every == 0 {
        return invalid("steps and record_every must be positive");
    }
    let grid = uniform(opts.steps);
    evolve_on_grid(fam, rho0, t_total, &grid, opts.record_every)
}

/// Integrates along `grid` (one midpoint step per interval), recording every
/// `record_every`-th grid point plus the last.
pub fn evolve_on_grid(
    fam: &dyn GeneratorFamily,
    rho0: &CoherenceVector,
    t_total: f64,
    grid: &[f64],
    record_every: usize,
) -> Result<Trajectory> {
    check_inputs(fam, rho0, t_total)?;
    crate::spectral::validate_grid(grid)?;
    let record_every = record_every.max(1);
    let edges: Vec<(f64, f64)> = grid.windows(2).map(|w| (w[0], w[1])).collect();
    let mut v = rho0.as_vector().clone();
    let mut s = vec![grid[0]];
    let mut states = vec![v.clone()];
    let mut k = 0;
    for chunk in edges.chunks(CHUNK) {
        for u in step_maps(fam, t_total, chunk)? {
            v = u * v;
            k += 1;
            if k % record_every == 0 || k == edges.len() {
                s.push(grid[k]);
                states.push(v.clone());
            }
        }
    }
    Ok(Trajectory { t_total, s, states })
}

/// The full propagator Φ(1, 0) on a uniform grid.
pub fn propagator(fam: &dyn GeneratorFamily, t_total: f64, steps: usize) -> Result<CMatrix> {
    if steps == 0 || !t_total.is_finite() || t_total < 0.0 {
        return invalid("propagator needs steps > 0 and finite T >= 0");
    }
    let grid = uniform(steps);
    let edges: Vec<(f64, f64)> = grid.windows(2).map(|w| (w[0], w[1])).collect();
    let n = fam.basis().len();
    let mut p = CMatrix::identity(n, n);
    for chunk in edges.chunks(CHUNK) {
        for u in step_maps(fam, t_total, chunk)? {
            p = u * p;
        }
    }
    Ok(p)
}

/// tr(Pρ) for a projector (or any Hermitian observable) P.
pub fn projector_probability(rho: &CoherenceVector, basis: &OperatorBasis, projector: &OperatorMatrix) -> Result<f64> {
    let m = devectorize(rho, basis)?;
    basis.check_dim(projector.dim(), "projector")?;
    Ok((projector.matrix() * m.matrix()).trace().re)
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasurementReport {
    pub labels: Vec<String>,
    pub probabilities: Vec<f64>,
    /// |1 − Σ p| over the reported outcomes.
    pub completeness_error: f64,
}

/// Probabilities of a set of projectors; `completeness_error` is meaningful
/// when they form a complete measurement.
pub fn measure(
    rho: &CoherenceVector,
    basis: &OperatorBasis,
    outcomes: &[(String, OperatorMatrix)],
) -> Result<MeasurementReport> {
    let mut probabilities = Vec::with_capacity(outcomes.len());
    for (_, p) in outcomes {
        probabilities.push(projector_probability(rho, basis, p)?);
    }
    let total: f64 = probabilities.iter().sum();
    Ok(MeasurementReport {
        labels: outcomes.iter().map(|(l, _)| l.clone()).collect(),
        probabilities,
        completeness_error: (1.0 - total).abs(),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StateComparison {
    /// ½‖ρ_a − ρ_b‖₁
    pub trace_distance: f64,
    /// ‖ρ_a − ρ_b‖_F
    pub hilbert_schmidt: f64,
}

pub fn compare_states(a: &CoherenceVector, b: &CoherenceVector, basis: &OperatorBasis) -> Result<StateComparison> {
    if a.dim() != b.dim() {
        return invalid("states have different dimensions");
    }
    let diff = CoherenceVector::new(a.as_vector() - b.as_vector());
    let m = devectorize(&diff, basis)?;
    // hermitize to guard the eigen-solver against rounding asymmetry
    let h = OperatorMatrix::new((m.matrix() + m.matrix().adjoint()) * C64::new(0.5, 0.0))?;
    let trace_distance = 0.5 * h.hermitian_eigenvalues().iter().map(|x| x.abs()).sum::<f64>();
    Ok(StateComparison { trace_distance, hilbert_schmidt: m.matrix().norm() })
}

/// Checks that `rho` is a valid density matrix within `tol`.
pub fn validate_state(rho: &CoherenceVector, basis: &OperatorBasis, tol: &DensityTolerance) -> Result<()> {
    devectorize(rho, basis)?.validate_density(tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{pauli, pauli_basis, vectorize};
    use crate::superop::{lindblad_superop, MatrixFamily};
    use std::sync::Arc;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn plus(basis: &OperatorBasis) -> CoherenceVector {
        let rho = OperatorMatrix::from_real_rows(2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        vectorize(&rho, basis).unwrap()
    }

    #[test]
    fn constant_generator_matches_single_exponential() {
        let basis = Arc::new(pauli_basis(1).unwrap());
        let h = OperatorMatrix::new(pauli('Z').unwrap() * c(0.7)).unwrap();
        let g = OperatorMatrix::new(pauli('Z').unwrap() * c(0.2)).unwrap();
        let l = lindblad_superop(&h, &[g], &basis).unwrap();
        let fam = MatrixFamily::constant(l.clone());
        let rho0 = plus(&basis);
        let traj = exact_evolve(&fam, &rho0, 3.0, &EvolveOptions { steps: 10, record_every: 5 }).unwrap();
        assert_eq!(traj.len(), 3);
        let want = (l.matrix() * c(3.0)).exp() * rho0.as_vector();
        assert!((traj.final_state().as_vector() - want).camax() < 1e-12);
    }

    #[test]
    fn zero_time_is_identity() {
        let basis = Arc::new(pauli_basis(1).unwrap());
        let fam = MatrixFamily::constant(crate::superop::Supermatrix::zeros(basis.clone()));
        let rho0 = plus(&basis);
        let traj = exact_evolve(&fam, &rho0, 0.0, &EvolveOptions::default()).unwrap();
        assert_eq!(traj.final_state(), rho0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let basis = Arc::new(pauli_basis(1).unwrap());
        let fam = MatrixFamily::constant(crate::superop::Supermatrix::zeros(basis.clone()));
        let rho0 = plus(&basis);
        assert!(exact_evolve(&fam, &rho0, -1.0, &EvolveOptions::default()).is_err());
        assert!(exact_evolve(&fam, &rho0, f64::NAN, &EvolveOptions::default()).is_err());
        assert!(exact_evolve(&fam, &CoherenceVector::from_real(&[1.0, 0.0]), 1.0, &EvolveOptions::default()).is_err());
    }

    #[test]
    fn trace_distance_of_orthogonal_pure_states() {
        let basis = pauli_basis(1).unwrap();
        let up = vectorize(&OperatorMatrix::from_real_rows(2, &[1.0, 0.0, 0.0, 0.0]).unwrap(), &basis).unwrap();
        let down = vectorize(&OperatorMatrix::from_real_rows(2, &[0.0, 0.0, 0.0, 1.0]).unwrap(), &basis).unwrap();
        let d = compare_states(&up, &down, &basis).unwrap();
        assert!((d.trace_distance - 1.0).abs() < 1e-14);
        assert!((d.hilbert_schmidt - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn measurement_of_plus_state() {
        let basis = pauli_basis(1).unwrap();
        let rho = plus(&basis);
        let p_plus = OperatorMatrix::from_real_rows(2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        let p_minus = OperatorMatrix::from_real_rows(2, &[0.5, -0.5, -0.5, 0.5]).unwrap();
        let r = measure(&rho, &basis, &[("+".into(), p_plus), ("-".into(), p_minus)]).unwrap();
        assert!((r.probabilities[0] - 1.0).abs() < 1e-14);
        assert!(r.probabilities[1].abs() < 1e-14);
        assert!(r.completeness_error < 1e-14);
    }
}
