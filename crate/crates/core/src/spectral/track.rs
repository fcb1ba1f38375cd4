//! Continuous labelling and gauge transport of Jordan frames along a grid.
//!
//! Clusters at neighbouring grid points are matched by the gauge-invariant
//! overlap tr(P_a(s_k) P_b(s_{k+1}))/m of their spectral projectors together
//! with an eigenvalue-jump bound. The frame at s₀ is put in the requested
//! gauge; later frames are rescaled so that the discrete connection
//! ⟨⟨E(s_k)|D(s_{k+1})⟩⟩ − 1 vanishes to second order in the step.

use super::frame::{gauge_factor, jordan_frame, rescale_block, FrameBlock};
use super::{spectrum_of, JordanFrame, SpectralOptions};
use crate::error::{Error, Result};
use crate::superop::GeneratorFamily;
use crate::{par, CMatrix, C64};

#[derive(Debug, Clone, Copy)]
pub struct TrackOptions {
    pub spectral: SpectralOptions,
    /// Minimum normalized projector overlap between matched clusters.
    pub overlap_min: f64,
    /// Fraction of the smallest inter-cluster gap an eigenvalue may move in one step.
    pub max_jump_fraction: f64,
    /// Parallel-transport the gauge from s₀; otherwise apply `spectral.gauge` pointwise.
    pub transport: bool,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self { spectral: SpectralOptions::default(), overlap_min: 0.5, max_jump_fraction: 0.5, transport: true }
    }
}

#[derive(Debug, Clone)]
pub struct FrameFamily {
    pub grid: Vec<f64>,
    /// One frame per grid point with a common block labelling.
    pub frames: Vec<JordanFrame>,
}

impl FrameFamily {
    pub fn block_count(&self) -> usize {
        self.frames.first().map_or(0, |f| f.blocks.len())
    }

    pub fn eigenvalue(&self, k: usize, alpha: usize) -> C64 {
        self.frames[k].blocks[alpha].eigenvalue
    }

    pub fn eigenvalue_path(&self, alpha: usize) -> Vec<C64> {
        self.frames.iter().map(|f| f.blocks[alpha].eigenvalue).collect()
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.frames.first().map_or_else(Vec::new, |f| f.blocks.iter().map(FrameBlock::dim).collect())
    }

    /// Cluster index of each block (shared eigenvalue group).
    pub fn clusters(&self) -> Vec<usize> {
        self.frames.first().map_or_else(Vec::new, |f| f.blocks.iter().map(|b| b.cluster).collect())
    }

    pub fn max_condition(&self) -> f64 {
        self.frames.iter().map(|f| f.max_condition).fold(0.0, f64::max)
    }

    /// Reorders blocks so that block α starts nearest to `reference[α]`.
    pub fn align_to(&mut self, reference: &[C64]) -> Result<()> {
        let n = self.block_count();
        if reference.len() != n {
            return Err(Error::InvalidArgument(format!("{} reference eigenvalues for {n} blocks", reference.len())));
        }
        let start = &self.frames[0];
        let mut perm = Vec::with_capacity(n);
        for r in reference {
            let best = (0..n)
                .filter(|i| !perm.contains(i))
                .min_by(|&a, &b| (start.blocks[a].eigenvalue - r).norm().total_cmp(&(start.blocks[b].eigenvalue - r).norm()))
                .ok_or_else(|| Error::InvalidArgument("reference eigenvalues do not match the blocks".into()))?;
            perm.push(best);
        }
        for f in self.frames.iter_mut() {
            let old = std::mem::take(&mut f.blocks);
            f.blocks = perm.iter().map(|&i| old[i].clone()).collect();
        }
        Ok(())
    }
}

pub fn track_frames(family: &dyn GeneratorFamily, grid: &[f64], opts: &TrackOptions) -> Result<FrameFamily> {
    track_path(grid, |s| family.generator(s).map(|l| l.into_matrix()), opts)
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidArgument("grid needs at least two points".into()));
    }
    if grid.iter().any(|s| !s.is_finite() || !(0.0..=1.0).contains(s)) {
        return Err(Error::InvalidArgument("grid points must lie in [0, 1]".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("grid must be strictly increasing".into()));
    }
    Ok(())
}

pub fn track_path<F>(grid: &[f64], generator: F, opts: &TrackOptions) -> Result<FrameFamily>
where
    F: Fn(f64) -> Result<CMatrix> + Sync,
{
    validate_grid(grid)?;
    let raw: Vec<JordanFrame> = par::try_map(grid, |&s| {
        let l = generator(s)?;
        let spec = spectrum_of(&l, &opts.spectral)?;
        jordan_frame(&l, &spec, &opts.spectral)
    })?;
    let mut frames: Vec<JordanFrame> = Vec::with_capacity(raw.len());
    for (k, next) in raw.into_iter().enumerate() {
        if k == 0 {
            frames.push(next);
            continue;
        }
        let prev = &frames[k - 1];
        let mut f = match_frame(prev, next, grid[k - 1], grid[k], opts)?;
        if !opts.transport {
            for b in f.blocks.iter_mut() {
                let c = gauge_factor(&b.right[0], opts.spectral.gauge);
                rescale_block(b, c);
            }
        }
        frames.push(f);
    }
    Ok(FrameFamily { grid: grid.to_vec(), frames })
}

/// Eigenvalue paths without frames: `paths[i][k]` is the i-th eigenvalue at
/// `grid[k]`. Each step assigns new eigenvalues to old ones greedily by
/// distance. A move larger than `max_jump_fraction` of the distance to the
/// nearest distinct old eigenvalue makes the step ambiguous; ambiguous steps
/// are bisected, and a crossing is reported only if the ambiguity survives
/// down to steps of 2⁻³⁰.
pub fn track_eigenvalues<F>(grid: &[f64], generator: F, opts: &TrackOptions) -> Result<Vec<Vec<C64>>>
where
    F: Fn(f64) -> Result<CMatrix> + Sync,
{
    validate_grid(grid)?;
    let eig = |s: f64| -> Result<(Vec<C64>, f64)> {
        let l = generator(s)?;
        Ok((super::eigenvalues(&l)?, l.norm()))
    };
    let raw: Vec<(Vec<C64>, f64)> = par::try_map(grid, |&s| eig(s))?;
    let mut paths: Vec<Vec<C64>> = raw[0].0.iter().map(|&g| vec![g]).collect();
    let mut prev = raw[0].clone();
    for k in 1..grid.len() {
        let next = advance(&prev, grid[k - 1], grid[k], raw[k].clone(), &eig, opts, 0)?;
        for (p, g) in paths.iter_mut().zip(&next.0) {
            p.push(*g);
        }
        prev = next;
    }
    Ok(paths)
}

type Eigs = (Vec<C64>, f64);

/// Eigenvalues at `s_hi` ordered to continue `prev` from `s_lo`.
fn advance(
    prev: &Eigs,
    s_lo: f64,
    s_hi: f64,
    next: Eigs,
    eig: &dyn Fn(f64) -> Result<Eigs>,
    opts: &TrackOptions,
    depth: usize,
) -> Result<Eigs> {
    if let Some(v) = greedy_match(prev, &next, opts) {
        return Ok((v, next.1));
    }
    if depth >= 30 {
        let blocks = (0..prev.0.len()).collect();
        return Err(Error::Crossing { s_lo, s_hi, blocks });
    }
    let mid = 0.5 * (s_lo + s_hi);
    let half = advance(prev, s_lo, mid, eig(mid)?, eig, opts, depth + 1)?;
    advance(&half, mid, s_hi, next, eig, opts, depth + 1)
}

fn greedy_match(prev: &Eigs, next: &Eigs, opts: &TrackOptions) -> Option<Vec<C64>> {
    let (old, new) = (&prev.0, &next.0);
    let n = old.len();
    let tol = opts.spectral.cluster_tol * prev.1.max(next.1);
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, a) in old.iter().enumerate() {
        for (j, b) in new.iter().enumerate() {
            pairs.push(((a - b).norm(), i, j));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut old_done = vec![false; n];
    let mut new_done = vec![false; n];
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (d, i, j) in pairs {
        if old_done[i] || new_done[j] {
            continue;
        }
        old_done[i] = true;
        new_done[j] = true;
        if d > tol {
            let room = old.iter().map(|g| (g - old[i]).norm()).filter(|&r| r > tol).fold(f64::INFINITY, f64::min);
            if d > opts.max_jump_fraction * room {
                return None;
            }
        }
        out[i] = new[j];
    }
    Some(out)
}

/// Groups of block indices sharing a cluster, in cluster order.
fn cluster_groups(f: &JordanFrame) -> Vec<Vec<usize>> {
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, b) in f.blocks.iter().enumerate() {
        match groups.iter_mut().find(|(c, _)| *c == b.cluster) {
            Some((_, g)) => g.push(i),
            None => groups.push((b.cluster, vec![i])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

fn dims(f: &JordanFrame, g: &[usize]) -> Vec<usize> {
    g.iter().map(|&i| f.blocks[i].dim()).collect()
}

fn min_gap(f: &JordanFrame, groups: &[Vec<usize>]) -> f64 {
    let mut gap = f64::INFINITY;
    for (i, a) in groups.iter().enumerate() {
        for b in &groups[i + 1..] {
            gap = gap.min((f.blocks[a[0]].eigenvalue - f.blocks[b[0]].eigenvalue).norm());
        }
    }
    gap
}

fn dot(e: &crate::CVector, d: &crate::CVector) -> C64 {
    e.iter().zip(d.iter()).map(|(a, b)| a * b).sum()
}

/// Relabel `next` to follow `prev` and transport its gauge.
fn match_frame(prev: &JordanFrame, next: JordanFrame, s_lo: f64, s_hi: f64, opts: &TrackOptions) -> Result<JordanFrame> {
    let gp = cluster_groups(prev);
    let gn = cluster_groups(&next);
    let crossing = |blocks: Vec<usize>| Error::Crossing { s_lo, s_hi, blocks };
    if gp.len() != gn.len() {
        return Err(crossing((0..prev.blocks.len()).collect()));
    }
    let mut sig_p: Vec<Vec<usize>> = gp.iter().map(|g| dims(prev, g)).collect();
    let mut sig_n: Vec<Vec<usize>> = gn.iter().map(|g| dims(&next, g)).collect();
    sig_p.sort();
    sig_n.sort();
    if sig_p != sig_n {
        return Err(crossing((0..prev.blocks.len()).collect()));
    }

    let jump_tol = if gp.len() > 1 { opts.max_jump_fraction * min_gap(prev, &gp) } else { f64::INFINITY };
    let mut taken = vec![false; gn.len()];
    let mut assignment = Vec::with_capacity(gp.len());
    for a in &gp {
        let mut best: Option<(usize, f64)> = None;
        for (bi, b) in gn.iter().enumerate() {
            if dims(prev, a) != dims(&next, b) {
                continue;
            }
            let mut tr = C64::new(0.0, 0.0);
            for &i in a {
                for &j in b {
                    let pi = &prev.blocks[i];
                    let nj = &next.blocks[j];
                    for (di, ei) in pi.right.iter().zip(&pi.left) {
                        for (dj, ej) in nj.right.iter().zip(&nj.left) {
                            tr += dot(ei, dj) * dot(ej, di);
                        }
                    }
                }
            }
            let m: usize = dims(prev, a).iter().sum();
            let score = tr.norm() / m as f64;
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((bi, score));
            }
        }
        let (bi, score) = best.ok_or_else(|| crossing(a.clone()))?;
        let jump = (next.blocks[gn[bi][0]].eigenvalue - prev.blocks[a[0]].eigenvalue).norm();
        if score <= opts.overlap_min || taken[bi] || jump > jump_tol {
            return Err(crossing(a.clone()));
        }
        taken[bi] = true;
        assignment.push(bi);
    }

    let mut blocks: Vec<FrameBlock> = Vec::with_capacity(next.blocks.len());
    for (ci, (a, &bi)) in gp.iter().zip(&assignment).enumerate() {
        let mut group: Vec<FrameBlock> = gn[bi].iter().map(|&j| next.blocks[j].clone()).collect();
        let semisimple = group.iter().all(|b| b.dim() == 1);
        if semisimple && group.len() > 1 {
            // G = Ê·D_prev, D' = D̂G, E' = G⁻¹Ê
            let m = group.len();
            let g = CMatrix::from_fn(m, m, |r, c| dot(&group[r].left[0], &prev.blocks[a[c]].right[0]));
            let ginv = g.clone().try_inverse().ok_or_else(|| crossing(a.clone()))?;
            let dn: Vec<_> = (0..m)
                .map(|c| (0..m).fold(group[0].right[0].clone() * C64::new(0.0, 0.0), |acc, r| acc + &group[r].right[0] * g[(r, c)]))
                .collect();
            let en: Vec<_> = (0..m)
                .map(|r| (0..m).fold(group[0].left[0].clone() * C64::new(0.0, 0.0), |acc, c| acc + &group[c].left[0] * ginv[(r, c)]))
                .collect();
            for (i, b) in group.iter_mut().enumerate() {
                b.right[0] = dn[i].clone();
                b.left[0] = en[i].clone();
            }
        } else {
            for (b, &i) in group.iter_mut().zip(a) {
                let p = &prev.blocks[i];
                let x = dot(&p.left[0], &b.right[0]);
                let y = dot(&b.left[0], &p.right[0]);
                let mut c = (y / x).sqrt();
                if (c * x).re < 0.0 {
                    c = -c;
                }
                if !c.re.is_finite() || !c.im.is_finite() || c.norm() == 0.0 {
                    return Err(crossing(vec![i]));
                }
                rescale_block(b, c);
            }
        }
        for mut b in group {
            b.cluster = ci;
            blocks.push(b);
        }
    }
    Ok(JordanFrame::new(blocks, next.gauge))
}
