//! Jordan structure of (generally non-normal) supermatrices.
//!
//! Eigenvalues come from a Schur-based eigenvalue solver and are clustered
//! within `cluster_tol·‖𝓛‖`. Block sizes inside a cluster are read off the
//! nullities of (𝓛 − γ)^k, determined from singular-value gaps; anything
//! falling between the "zero" and "nonzero" thresholds is rejected as
//! ambiguous instead of being guessed.

mod frame;
mod track;

pub use frame::{biorthonormal_frame, jordan_frame, verify_jordan_relations, FrameBlock, JordanFrame, JordanResidual};
pub use track::{track_eigenvalues, track_frames, track_path, FrameFamily, TrackOptions};
pub(crate) use track::validate_grid;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::superop::Supermatrix;
use crate::{CMatrix, CVector, C64};

/// Normalization applied to right vectors (left vectors follow from
/// biorthonormality).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum Gauge {
    /// Unit Euclidean norm, largest-magnitude component real positive.
    #[default]
    UnitNorm,
    /// Largest-magnitude component equal to 1.
    MaxComponent,
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions {
    /// Eigenvalues closer than `cluster_tol·‖𝓛‖_F` share a cluster.
    pub cluster_tol: f64,
    /// Singular values below `rank_gap·σ_max` count as zero.
    pub rank_gap: f64,
    /// Singular values in `[ambiguity_floor, rank_gap]·σ_max` make the
    /// block structure ambiguous.
    pub ambiguity_floor: f64,
    /// ‖E_α‖·‖D_α‖ above this triggers a near-defective warning.
    pub condition_limit: f64,
    pub gauge: Gauge,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            cluster_tol: 1e-8,
            rank_gap: 1e-6,
            ambiguity_floor: 1e-10,
            condition_limit: 1e8,
            gauge: Gauge::UnitNorm,
        }
    }
}

/// Eigenvalues sharing one cluster, with the Jordan partition of the cluster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub eigenvalue: C64,
    pub multiplicity: usize,
    /// Block sizes, descending.
    pub partition: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub eigenvalue: C64,
    pub dim: usize,
    pub cluster: usize,
}

/// Lindblad-Jordan spectrum: one entry per Jordan block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LJSpectrum {
    pub blocks: Vec<Block>,
    pub clusters: Vec<Cluster>,
    pub diagonalizable: bool,
    /// Frobenius norm of the analysed matrix.
    pub scale: f64,
}

impl LJSpectrum {
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        self.blocks.iter().map(|b| b.eigenvalue).collect()
    }

    pub fn all_one_dimensional(&self) -> bool {
        self.blocks.iter().all(|b| b.dim == 1)
    }

    /// True when every cluster holds exactly one block of size one.
    pub fn non_degenerate(&self) -> bool {
        self.clusters.iter().all(|c| c.multiplicity == 1)
    }
}

pub fn spectrum(l: &Supermatrix, opts: &SpectralOptions) -> Result<LJSpectrum> {
    spectrum_of(l.matrix(), opts)
}

/// Eigenvalues with multiplicity, ordered by descending real part and then
/// ascending imaginary part.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    let n = m.nrows();
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalFailure("matrix has non-finite entries".into()));
    }
    let fail = |e: faer::linalg::evd::EvdError| Error::NumericalFailure(format!("eigenvalue iteration failed (n = {n}): {e:?}"));
    let ev: Vec<C64> = if m.iter().all(|z| z.im == 0.0) {
        faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re).eigenvalues().map_err(fail)?
    } else {
        faer::Mat::<C64>::from_fn(n, n, |i, j| m[(i, j)]).eigenvalues().map_err(fail)?
    };
    let mut v = ev;
    v.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    Ok(v)
}

/// Single-linkage clustering of eigenvalues within `tol`.
fn cluster_eigenvalues(ev: &[C64], tol: f64) -> Vec<Vec<C64>> {
    let n = ev.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(l: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while l[r] != r {
            r = l[r];
        }
        l[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (ev[i] - ev[j]).norm() <= tol {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<C64>)> = Vec::new();
    for i in 0..n {
        let r = find(&mut label, i);
        match groups.iter_mut().find(|(k, _)| *k == r) {
            Some((_, g)) => g.push(ev[i]),
            None => groups.push((r, vec![ev[i]])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

/// Singular values in descending order with matching singular vectors.
pub(crate) struct Svd {
    pub s: Vec<f64>,
    pub u: Vec<CVector>,
    pub v: Vec<CVector>,
}

pub(crate) fn svd(m: &CMatrix) -> Result<Svd> {
    let first = faer_svd(m);
    if first.is_ok() {
        return first;
    }
    // the iteration occasionally stalls; exact reorderings of the input take a different path
    if let Ok(d) = faer_svd(&m.adjoint()) {
        return Ok(Svd { s: d.s, u: d.v, v: d.u });
    }
    let (r, c) = m.shape();
    let flipped = CMatrix::from_fn(r, c, |i, j| m[(r - 1 - i, c - 1 - j)]);
    if let Ok(d) = faer_svd(&flipped) {
        let rev = |x: CVector| CVector::from_iterator(x.len(), x.iter().rev().copied());
        return Ok(Svd { s: d.s, u: d.u.into_iter().map(rev).collect(), v: d.v.into_iter().map(rev).collect() });
    }
    first
}

fn faer_svd(m: &CMatrix) -> Result<Svd> {
    let (r, c) = m.shape();
    let f = faer::Mat::<C64>::from_fn(r, c, |i, j| m[(i, j)]);
    let d = f.svd().map_err(|e| Error::NumericalFailure(format!("SVD did not converge: {e:?}")))?;
    let sv: Vec<f64> = d.S().column_vector().iter().map(|z| z.re).collect();
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let col = |mat: faer::MatRef<'_, C64>, j: usize| CVector::from_iterator(mat.nrows(), (0..mat.nrows()).map(|i| mat[(i, j)]));
    let (uu, vv) = (d.U(), d.V());
    Ok(Svd {
        s: idx.iter().map(|&i| sv[i]).collect(),
        u: (0..uu.ncols()).map(|j| if j < idx.len() { col(uu, idx[j]) } else { col(uu, j) }).collect(),
        v: (0..vv.ncols()).map(|j| if j < idx.len() { col(vv, idx[j]) } else { col(vv, j) }).collect(),
    })
}

/// Nullity of `m` with the two-threshold ambiguity test.
pub(crate) fn nullity(m: &CMatrix, opts: &SpectralOptions, reference: f64) -> Result<usize> {
    let s = svd(m)?.s;
    let scale = s.first().copied().unwrap_or(0.0).max(reference).max(f64::MIN_POSITIVE);
    let zero = opts.rank_gap * scale;
    let floor = opts.ambiguity_floor * scale;
    if let Some(bad) = s.iter().find(|&&x| x > floor && x <= zero) {
        return Err(Error::NumericalFailure(format!(
            "ambiguous rank: singular value {bad:e} lies between {floor:e} and {zero:e}"
        )));
    }
    Ok(s.iter().filter(|&&x| x <= zero).count())
}

/// Jordan partition of the cluster at `gamma` with algebraic multiplicity `mult`.
pub(crate) fn jordan_partition(l: &CMatrix, gamma: C64, mult: usize, opts: &SpectralOptions) -> Result<Vec<usize>> {
    let n = l.nrows();
    let shifted = l - CMatrix::identity(n, n) * gamma;
    let reference = l.norm() * opts.ambiguity_floor;
    let mut nullities = vec![0usize];
    let mut power = shifted.clone();
    for k in 1..=mult {
        let nu = nullity(&power, opts, reference.powi(k as i32))?;
        if nu > mult || nu < nullities[k - 1] {
            return Err(Error::NumericalFailure(format!(
                "inconsistent nullity {nu} for cluster at {gamma} with multiplicity {mult}"
            )));
        }
        nullities.push(nu);
        if nu == mult {
            break;
        }
        if nu == nullities[k - 1] {
            return Err(Error::NumericalFailure(format!(
                "nullity stalled at {nu} < {mult} for cluster at {gamma}"
            )));
        }
        power = &power * &shifted;
    }
    if *nullities.last().unwrap() != mult {
        return Err(Error::NumericalFailure(format!("could not resolve Jordan structure at {gamma}")));
    }
    // number of blocks of size >= k is ν_k − ν_{k−1}
    let at_least: Vec<usize> = nullities.windows(2).map(|w| w[1] - w[0]).collect();
    let mut partition = Vec::new();
    for k in (1..=at_least.len()).rev() {
        let bigger = if k < at_least.len() { at_least[k] } else { 0 };
        for _ in 0..(at_least[k - 1] - bigger) {
            partition.push(k);
        }
    }
    partition.sort_by(|a, b| b.cmp(a));
    Ok(partition)
}

pub fn spectrum_of(m: &CMatrix, opts: &SpectralOptions) -> Result<LJSpectrum> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument("spectrum needs a square matrix".into()));
    }
    let ev = eigenvalues(m)?;
    let scale = m.norm();
    let groups = cluster_eigenvalues(&ev, opts.cluster_tol * scale.max(f64::MIN_POSITIVE));
    let mut clusters = Vec::with_capacity(groups.len());
    let mut blocks = Vec::new();
    for g in groups {
        let mult = g.len();
        let center = g.iter().fold(C64::new(0.0, 0.0), |a, &z| a + z) / mult as f64;
        let partition = jordan_partition(m, center, mult, opts)?;
        let ci = clusters.len();
        for &d in &partition {
            blocks.push(Block { eigenvalue: center, dim: d, cluster: ci });
        }
        clusters.push(Cluster { eigenvalue: center, multiplicity: mult, partition });
    }
    let diagonalizable = blocks.iter().all(|b| b.dim == 1);
    Ok(LJSpectrum { blocks, clusters, diagonalizable, scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn distinct_diagonal() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(-2.0, 0.0), c(0.0, 1.0), c(-0.5, -1.0)]));
        let s = spectrum_of(&m, &SpectralOptions::default()).unwrap();
        assert_eq!(s.block_count(), 4);
        assert!(s.diagonalizable);
        assert!(s.non_degenerate());
        assert_eq!(s.total_dim(), 4);
        assert_eq!(s.eigenvalues()[0], c(1.0, 0.0));
    }

    #[test]
    fn jordan_block_detected() {
        let g = c(-0.3, 0.7);
        let m = CMatrix::from_row_slice(3, 3, &[g, c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), g, c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
        let s = spectrum_of(&m, &SpectralOptions::default()).unwrap();
        assert!(!s.diagonalizable);
        let dims: Vec<usize> = s.blocks.iter().map(|b| b.dim).collect();
        assert_eq!(dims.iter().sum::<usize>(), 3);
        assert!(dims.contains(&2));
    }

    #[test]
    fn semisimple_degenerate_cluster() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]));
        let s = spectrum_of(&m, &SpectralOptions::default()).unwrap();
        assert_eq!(s.clusters.len(), 2);
        assert_eq!(s.clusters[0].partition, vec![1, 1]);
        assert!(s.diagonalizable);
        assert!(!s.non_degenerate());
    }

    #[test]
    fn partition_of_mixed_cluster() {
        // J_3(0) ⊕ J_1(0)
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 1)] = c(1.0, 0.0);
        m[(1, 2)] = c(1.0, 0.0);
        let p = jordan_partition(&m, c(0.0, 0.0), 4, &SpectralOptions::default()).unwrap();
        assert_eq!(p, vec![3, 1]);
    }

    #[test]
    fn ambiguous_rank_fails_loudly() {
        // two eigenvalues 1e-8 apart relative: inside the gray zone
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(1.0, 0.0);
        m[(1, 1)] = c(1.0 + 1e-8, 0.0);
        m[(0, 1)] = c(1.0, 0.0);
        let opts = SpectralOptions { cluster_tol: 1e-6, ..Default::default() };
        assert!(matches!(spectrum_of(&m, &opts), Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn scale_covariance() {
        let m = CMatrix::from_row_slice(2, 2, &[c(-1.0, 0.0), c(2.0, 0.0), c(-3.0, 0.0), c(0.5, 0.0)]);
        let a = spectrum_of(&m, &SpectralOptions::default()).unwrap().eigenvalues();
        let b = spectrum_of(&(&m * c(3.5, 0.0)), &SpectralOptions::default()).unwrap().eigenvalues();
        for (x, y) in a.iter().zip(&b) {
            assert!((x * 3.5 - y).norm() < 1e-12);
        }
    }
}
