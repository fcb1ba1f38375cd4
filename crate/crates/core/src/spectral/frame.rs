//! Biorthonormal right/left bases adapted to the Jordan structure.
//!
//! Right vectors of a block form a chain 𝓛|D⁽ʲ⁾⟩⟩ = |D⁽ʲ⁻¹⁾⟩⟩ + γ|D⁽ʲ⁾⟩⟩
//! (|D⁽⁻¹⁾⟩⟩ = 0). Left vectors are the rows of the inverse of the full right
//! basis, so ⟨⟨E_α⁽ⁱ⁾|D_β⁽ʲ⁾⟩⟩ = δ_αβ δ_ij and the left chain
//! ⟨⟨E⁽ⁱ⁾|𝓛 = ⟨⟨E⁽ⁱ⁺¹⁾| + γ⟨⟨E⁽ⁱ⁾| hold automatically. Left vectors are
//! stored as plain rows: ⟨⟨E|x⟩⟩ = Σ_k E_k x_k, no conjugation.

use log::warn;
use serde::Serialize;

use super::{svd, Gauge, LJSpectrum, SpectralOptions};
use crate::error::{Error, Result};
use crate::superop::Supermatrix;
use crate::{CMatrix, CVector, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct FrameBlock {
    pub eigenvalue: C64,
    pub cluster: usize,
    /// D⁽⁰⁾ (the eigenvector) first.
    pub right: Vec<CVector>,
    /// E⁽⁰⁾ first; E⁽ⁿ⁻¹⁾ is the left eigenvector.
    pub left: Vec<CVector>,
}

impl FrameBlock {
    pub fn dim(&self) -> usize {
        self.right.len()
    }

    /// ⟨⟨E⁽ⁱ⁾|x⟩⟩.
    pub fn project(&self, i: usize, x: &CVector) -> C64 {
        self.left[i].iter().zip(x.iter()).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JordanFrame {
    pub blocks: Vec<FrameBlock>,
    pub gauge: Gauge,
    /// max_α ‖E_α‖·‖D_α‖ over all frame vectors.
    pub max_condition: f64,
}

impl JordanFrame {
    pub fn new(blocks: Vec<FrameBlock>, gauge: Gauge) -> Self {
        let max_condition = condition(&blocks);
        Self { blocks, gauge, max_condition }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(FrameBlock::dim).sum()
    }

    pub fn all_one_dimensional(&self) -> bool {
        self.blocks.iter().all(|b| b.dim() == 1)
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        self.blocks.iter().map(|b| b.eigenvalue).collect()
    }

    /// Right vectors as columns, block by block.
    pub fn right_matrix(&self) -> CMatrix {
        let cols: Vec<CVector> = self.blocks.iter().flat_map(|b| b.right.iter().cloned()).collect();
        CMatrix::from_columns(&cols)
    }

    /// Left vectors as rows, block by block.
    pub fn left_matrix(&self) -> CMatrix {
        let rows: Vec<_> = self.blocks.iter().flat_map(|b| b.left.iter().map(|e| e.transpose())).collect();
        CMatrix::from_rows(&rows)
    }

    /// The Jordan matrix in this frame's ordering.
    pub fn jordan_matrix(&self) -> CMatrix {
        let n = self.dim();
        let mut j = CMatrix::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            for i in 0..b.dim() {
                j[(off + i, off + i)] = b.eigenvalue;
                if i + 1 < b.dim() {
                    j[(off + i, off + i + 1)] = C64::new(1.0, 0.0);
                }
            }
            off += b.dim();
        }
        j
    }

    /// Σ |D⟩⟩ J ⟨⟨E|, which rebuilds 𝓛.
    pub fn reconstruct(&self) -> CMatrix {
        self.right_matrix() * self.jordan_matrix() * self.left_matrix()
    }
}

fn condition(blocks: &[FrameBlock]) -> f64 {
    blocks
        .iter()
        .flat_map(|b| b.right.iter().zip(&b.left).map(|(d, e)| d.norm() * e.norm()))
        .fold(0.0, f64::max)
}

/// Orthonormal basis of the numerical null space of `m`.
fn null_space(m: &CMatrix, count: usize) -> Result<Vec<CVector>> {
    let d = svd(m)?;
    Ok(d.v.iter().rev().take(count).cloned().collect())
}

/// Orthonormal basis for span(cols) via SVD, dropping directions below `tol`.
fn orthonormalize(cols: &[CVector], tol: f64) -> Result<Vec<CVector>> {
    if cols.is_empty() {
        return Ok(Vec::new());
    }
    let d = svd(&CMatrix::from_columns(cols))?;
    let top = d.s.first().copied().unwrap_or(0.0);
    Ok(d.s.iter().zip(&d.u).filter(|(s, _)| **s > tol * top.max(1.0)).map(|(_, u)| u.clone()).collect())
}

/// Right chains for one cluster with the given partition (descending).
fn cluster_chains(l: &CMatrix, gamma: C64, partition: &[usize], opts: &SpectralOptions) -> Result<Vec<Vec<CVector>>> {
    let n = l.nrows();
    let shifted = l - CMatrix::identity(n, n) * gamma;
    let mult: usize = partition.iter().sum();
    if partition.iter().all(|&d| d == 1) {
        return Ok(null_space(&shifted, mult)?.into_iter().map(|v| vec![v]).collect());
    }
    let kmax = partition[0];
    // kernels of N^k, k = 0..=kmax
    let mut kernels: Vec<Vec<CVector>> = vec![Vec::new()];
    let mut power = CMatrix::identity(n, n);
    for k in 1..=kmax {
        power = &power * &shifted;
        let dim = partition.iter().map(|&d| d.min(k)).sum();
        kernels.push(null_space(&power, dim)?);
    }
    // chain tops, longest first
    let mut chains: Vec<Vec<CVector>> = Vec::new();
    for k in (1..=kmax).rev() {
        let count = partition.iter().filter(|&&d| d == k).count();
        if count == 0 {
            continue;
        }
        let mut avoid = kernels[k - 1].clone();
        for ch in &chains {
            // vector at level k of a longer chain (index k−1 from the bottom)
            avoid.push(ch[k - 1].clone());
        }
        let q = orthonormalize(&avoid, opts.rank_gap)?;
        let projected: Vec<CVector> = kernels[k]
            .iter()
            .map(|v| {
                let mut w = v.clone();
                for b in &q {
                    w -= b * b.dotc(v);
                }
                w
            })
            .collect();
        let a = CMatrix::from_columns(&projected);
        let d = svd(&a)?;
        let s = &d.s;
        if s.len() < count || s[count - 1] < opts.rank_gap {
            return Err(Error::NumericalFailure(format!(
                "cannot isolate {count} Jordan chain(s) of length {k} at {gamma}"
            )));
        }
        for top in d.u.iter().take(count) {
            let top = top.clone();
            let mut chain = vec![top];
            for _ in 1..k {
                let next = &shifted * chain.last().unwrap();
                chain.push(next);
            }
            chain.reverse();
            chains.push(chain);
        }
    }
    chains.sort_by(|a, b| b.len().cmp(&a.len()));
    Ok(chains)
}

/// Index of the first component whose modulus is within rounding of the maximum.
fn leading_index(v: &CVector) -> usize {
    let m = v.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    v.iter().position(|z| z.norm() >= m * (1.0 - 1e-9)).unwrap_or(0)
}

/// Scalar that puts `v` (the block's eigenvector) in the requested gauge.
pub(crate) fn gauge_factor(v: &CVector, gauge: Gauge) -> C64 {
    let lead = v[leading_index(v)];
    if lead.norm() == 0.0 {
        return C64::new(1.0, 0.0);
    }
    match gauge {
        Gauge::UnitNorm => (lead.conj() / lead.norm()) / v.norm(),
        Gauge::MaxComponent => C64::new(1.0, 0.0) / lead,
    }
}

pub(crate) fn rescale_block(b: &mut FrameBlock, c: C64) {
    for d in b.right.iter_mut() {
        *d *= c;
    }
    for e in b.left.iter_mut() {
        *e /= c;
    }
}

/// Frame for `l` with a precomputed spectrum.
pub fn jordan_frame(l: &CMatrix, spec: &LJSpectrum, opts: &SpectralOptions) -> Result<JordanFrame> {
    let mut chains_by_cluster = Vec::with_capacity(spec.clusters.len());
    for c in &spec.clusters {
        chains_by_cluster.push(cluster_chains(l, c.eigenvalue, &c.partition, opts)?);
    }
    let cols: Vec<CVector> = chains_by_cluster.iter().flatten().flatten().cloned().collect();
    let s = CMatrix::from_columns(&cols);
    let inv = s.clone().try_inverse().ok_or_else(|| {
        Error::NumericalFailure("right basis is singular: Jordan structure could not be separated".into())
    })?;
    let mut blocks = Vec::with_capacity(spec.blocks.len());
    let mut row = 0;
    for (ci, chains) in chains_by_cluster.into_iter().enumerate() {
        for chain in chains {
            let k = chain.len();
            let left = (0..k).map(|i| inv.row(row + i).transpose()).collect();
            row += k;
            let mut block = FrameBlock { eigenvalue: spec.clusters[ci].eigenvalue, cluster: ci, right: chain, left };
            let c = gauge_factor(&block.right[0], opts.gauge);
            rescale_block(&mut block, c);
            blocks.push(block);
        }
    }
    let frame = JordanFrame::new(blocks, opts.gauge);
    if frame.max_condition > opts.condition_limit {
        warn!("near-defective frame: max ‖E‖·‖D‖ = {:e}", frame.max_condition);
    }
    Ok(frame)
}

pub fn biorthonormal_frame(l: &Supermatrix, spec: &LJSpectrum, opts: &SpectralOptions) -> Result<JordanFrame> {
    jordan_frame(l.matrix(), spec, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JordanResidual {
    /// max ‖𝓛D⁽ʲ⁾ − D⁽ʲ⁻¹⁾ − γD⁽ʲ⁾‖ / ‖D⁽ʲ⁾‖
    pub right_chain: f64,
    /// max ‖E⁽ⁱ⁾𝓛 − E⁽ⁱ⁺¹⁾ − γE⁽ⁱ⁾‖ / ‖E⁽ⁱ⁾‖
    pub left_chain: f64,
    /// max |⟨⟨E_α⁽ⁱ⁾|D_β⁽ʲ⁾⟩⟩ − δ|
    pub biorthonormality: f64,
    /// ‖𝓛‖_F, the scale chain residuals are compared against.
    pub scale: f64,
}

impl JordanResidual {
    pub fn max_chain(&self) -> f64 {
        self.right_chain.max(self.left_chain)
    }

    /// Chain residuals within `rel·‖𝓛‖` and biorthonormality within `bio`.
    pub fn passes(&self, rel: f64, bio: f64) -> bool {
        self.max_chain() <= rel * self.scale.max(1.0) && self.biorthonormality <= bio
    }
}

pub fn verify_jordan_relations(l: &CMatrix, frame: &JordanFrame) -> JordanResidual {
    let mut right_chain = 0.0_f64;
    let mut left_chain = 0.0_f64;
    let lt = l.transpose();
    for b in &frame.blocks {
        let k = b.dim();
        for j in 0..k {
            let d = &b.right[j];
            let mut r = l * d - d * b.eigenvalue;
            if j > 0 {
                r -= &b.right[j - 1];
            }
            right_chain = right_chain.max(r.norm() / d.norm().max(f64::MIN_POSITIVE));
            let e = &b.left[j];
            let mut r = &lt * e - e * b.eigenvalue;
            if j + 1 < k {
                r -= &b.left[j + 1];
            }
            left_chain = left_chain.max(r.norm() / e.norm().max(f64::MIN_POSITIVE));
        }
    }
    let g = frame.left_matrix() * frame.right_matrix();
    let n = g.nrows();
    let biorthonormality = (g - CMatrix::identity(n, n)).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    JordanResidual { right_chain, left_chain, biorthonormality, scale: l.norm() }
}
