//! Checks for constant Lindblad spectra under unitary interpolation.
//!
//! With u(s) the interpolating unitary, V(s) is the supermatrix of
//! ρ ↦ u†(s)ρu(s), so that 𝓗(s) = V†(s)𝓗(0)V(s). The spectrum of
//! 𝓛(s) = 𝓗(s) + 𝓡(s) is then constant whenever 𝓡(s) = V†(s)𝓡(0)V(s),
//! which for s-independent 𝓡 reduces to [𝓡, V(s)] = 0.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::models::InterpolatedModel;
use crate::operator::OperatorBasis;
use crate::spectral::{spectrum_of, track_eigenvalues, SpectralOptions, TrackOptions};
use crate::superop::{superop_from_map, GeneratorFamily};
use crate::{par, CMatrix, C64};

pub const UNITARY_TOL: f64 = 1e-12;
pub const ORTHOGONAL_TOL: f64 = 1e-11;
/// Drift threshold relative to ‖𝓛(0)‖_max.
pub const DRIFT_REL_TOL: f64 = 1e-9;
/// Residual below which a condition counts as satisfied.
pub const CONDITION_TOL: f64 = 1e-10;
pub const NECESSITY_TOL: f64 = 1e-8;

fn max_norm(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |a, z| a.max(z.norm()))
}

fn identity_error(m: &CMatrix) -> f64 {
    max_norm(&(m - CMatrix::identity(m.nrows(), m.ncols())))
}

/// V for a single unitary u.
pub fn conjugation_superop(u: &CMatrix, basis: &Arc<OperatorBasis>) -> Result<CMatrix> {
    basis.check_dim(u.nrows(), "unitary")?;
    if u.nrows() != u.ncols() {
        return invalid("unitary must be square");
    }
    let err = identity_error(&(u * u.adjoint()));
    if err > UNITARY_TOL {
        return invalid(format!("interpolation operator is not unitary (error {err:e})"));
    }
    let ud = u.adjoint();
    let v = superop_from_map(basis, |f| &ud * f * u).into_matrix();
    let orth = identity_error(&(&v * v.adjoint()));
    if orth > ORTHOGONAL_TOL {
        return Err(Error::NumericalFailure(format!("conjugation supermatrix is not orthogonal (error {orth:e})")));
    }
    Ok(v)
}

#[derive(Debug, Clone)]
pub struct ConjugationFamily {
    pub grid: Vec<f64>,
    pub v: Vec<CMatrix>,
    /// max over s of ‖V V† − I‖_max
    pub unitarity_residual: f64,
}

pub fn conjugation_family<F>(grid: &[f64], u: F, basis: &Arc<OperatorBasis>) -> Result<ConjugationFamily>
where
    F: Fn(f64) -> CMatrix + Sync,
{
    crate::spectral::validate_grid(grid)?;
    let v = par::try_map(grid, |&s| conjugation_superop(&u(s), basis))?;
    if grid[0] == 0.0 && identity_error(&v[0]) > ORTHOGONAL_TOL {
        return invalid("interpolation must start at the identity");
    }
    let unitarity_residual = v.iter().map(|m| identity_error(&(m * m.adjoint()))).fold(0.0, f64::max);
    Ok(ConjugationFamily { grid: grid.to_vec(), v, unitarity_residual })
}

fn safe_ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// max over s of ‖𝓡(s) − V†𝓡(0)V‖_max / ‖𝓡(0)‖_max.
pub fn sufficient_condition_check<F>(r: F, v: &ConjugationFamily) -> Result<f64>
where
    F: Fn(f64) -> Result<CMatrix> + Sync,
{
    let r0 = r(0.0)?;
    let den = max_norm(&r0);
    let res = par::try_map(&(0..v.grid.len()).collect::<Vec<_>>(), |&k| {
        let vk = &v.v[k];
        Ok(max_norm(&(r(v.grid[k])? - vk.adjoint() * &r0 * vk)))
    })?;
    Ok(safe_ratio(res.into_iter().fold(0.0, f64::max), den))
}

/// max over s of ‖[𝓡, V]‖_max / (‖𝓡‖_max ‖V‖_max) for s-independent 𝓡.
pub fn commutator_check(r: &CMatrix, v: &ConjugationFamily) -> f64 {
    let rn = max_norm(r);
    v.v.iter()
        .map(|vk| safe_ratio(max_norm(&(r * vk - vk * r)), rn * max_norm(vk)))
        .fold(0.0, f64::max)
}

/// max over s of ‖V𝓡(s)V† − 𝓡(0)‖_max / ‖𝓡(0)‖_max.
pub fn necessity_probe<F>(r: F, v: &ConjugationFamily) -> Result<f64>
where
    F: Fn(f64) -> Result<CMatrix> + Sync,
{
    let r0 = r(0.0)?;
    let den = max_norm(&r0);
    let res = par::try_map(&(0..v.grid.len()).collect::<Vec<_>>(), |&k| {
        let vk = &v.v[k];
        Ok(max_norm(&(vk * r(v.grid[k])? * vk.adjoint() - &r0)))
    })?;
    Ok(safe_ratio(res.into_iter().fold(0.0, f64::max), den))
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralDriftReport {
    pub grid: Vec<f64>,
    /// Eigenvalue paths on the grid, one per eigenvalue of 𝓛(grid[0]).
    #[serde(skip)]
    pub paths: Vec<Vec<C64>>,
    pub drift: Vec<f64>,
    pub max_drift: f64,
    /// ‖𝓛(grid[0])‖_max
    pub scale: f64,
    pub threshold: f64,
    pub constant: bool,
    /// All Jordan blocks of 𝓛(grid[0]) are one-dimensional.
    pub one_dimensional_blocks: bool,
}

pub fn constant_spectrum_check(fam: &dyn GeneratorFamily, grid: &[f64], opts: &TrackOptions) -> Result<SpectralDriftReport> {
    let paths = track_eigenvalues(grid, |s| fam.generator(s).map(|l| l.into_matrix()), opts)?;
    let l0 = fam.generator(grid[0])?.into_matrix();
    let scale = max_norm(&l0);
    let drift: Vec<f64> = paths
        .iter()
        .map(|p| p.iter().map(|g| (g - p[0]).norm()).fold(0.0, f64::max))
        .collect();
    let max_drift = drift.iter().copied().fold(0.0, f64::max);
    let threshold = DRIFT_REL_TOL * scale;
    let one_dimensional_blocks = spectrum_of(&l0, &opts.spectral)?.all_one_dimensional();
    Ok(SpectralDriftReport {
        grid: grid.to_vec(),
        paths,
        drift,
        max_drift,
        scale,
        threshold,
        constant: max_drift <= threshold,
        one_dimensional_blocks,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    pub model: String,
    pub n_qubits: usize,
    pub grid_points: usize,
    pub unitarity_residual: f64,
    pub sufficient_residual: f64,
    pub sufficient_holds: bool,
    /// Only defined when 𝓡 does not depend on s.
    pub commutator_residual: Option<f64>,
    pub commutator_holds: Option<bool>,
    pub max_drift: f64,
    pub drift_threshold: f64,
    pub constant_spectrum: bool,
    pub one_dimensional_blocks: bool,
    /// Run when the spectrum is constant and all blocks are one-dimensional.
    pub necessity_residual: Option<f64>,
    pub necessity_holds: Option<bool>,
    /// Sufficient condition satisfied implies constant spectrum.
    pub implication_consistent: bool,
}

impl TheoremReport {
    pub fn all_pass(&self) -> bool {
        self.sufficient_holds
            && self.commutator_holds.unwrap_or(true)
            && self.constant_spectrum
            && self.necessity_holds.unwrap_or(true)
    }
}

pub fn uniform_grid(points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return invalid("grid needs at least two points");
    }
    Ok((0..points).map(|k| k as f64 / (points - 1) as f64).collect())
}

/// Runs every check on an interpolation model.
pub fn check_model(model: &InterpolatedModel, grid: &[f64]) -> Result<TheoremReport> {
    let basis = model.basis().clone();
    let v = conjugation_family(grid, |s| model.interpolation(s), &basis)?;
    let r = |s: f64| model.dissipator(s);
    let sufficient_residual = sufficient_condition_check(r, &v)?;
    let commutator_residual = if model.constant_dissipator() { Some(commutator_check(&model.dissipator(0.0)?, &v)) } else { None };
    let fam = model.family()?;
    let opts = TrackOptions { spectral: SpectralOptions::default(), ..TrackOptions::default() };
    let drift = constant_spectrum_check(&fam, grid, &opts)?;
    let necessity_residual =
        if drift.constant && drift.one_dimensional_blocks { Some(necessity_probe(r, &v)?) } else { None };
    let sufficient_holds = sufficient_residual < CONDITION_TOL;
    Ok(TheoremReport {
        model: model.name.clone(),
        n_qubits: model.n_qubits(),
        grid_points: grid.len(),
        unitarity_residual: v.unitarity_residual,
        sufficient_residual,
        sufficient_holds,
        commutator_residual,
        commutator_holds: commutator_residual.map(|c| c < CONDITION_TOL),
        max_drift: drift.max_drift,
        drift_threshold: drift.threshold,
        constant_spectrum: drift.constant,
        one_dimensional_blocks: drift.one_dimensional_blocks,
        necessity_residual,
        necessity_holds: necessity_residual.map(|c| c < NECESSITY_TOL),
        implication_consistent: !sufficient_holds || drift.constant,
    })
}
