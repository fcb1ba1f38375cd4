//! Block decoupling: gap integrals, couplings, crossover times and the
//! block-decoupled (adiabatic) propagation.
//!
//! For one-dimensional blocks with eigenvalues γ_α(s) and frames
//! |D_α(s)⟩⟩, ⟨⟨E_α(s)|,
//!
//! ```text
//! ω_βα = γ_β − γ_α,  Ω_βα(s) = ∫₀ˢ ω_βα,
//! V_βα = p_β ⟨⟨E_α| d𝓛/ds |D_β⟩⟩,  Q_βα = V_βα / ω_βα²,
//! T_α^c = max_s |Σ_{β≠α} [Q_βα(0) − Q_βα(s)e^{TΩ_βα(s)} + ∫₀ˢ e^{TΩ_βα} dQ_βα/ds′]|.
//! ```
//!
//! Amplitudes p_β can come from the decoupled transport law or from
//! projecting the exact trajectory, p_β(s) = e^{−TΩ_β(s)}⟨⟨E_β(s)|ρ(s)⟩⟩.
//! Exponentials are carried with an explicit log scale so that the exploding
//! curves of long run times stay representable.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::evolve::{evolve_on_grid, Trajectory};
use crate::operator::CoherenceVector;
use crate::spectral::{spectrum, track_frames, FrameFamily, Gauge, SpectralOptions, TrackOptions};
use crate::superop::{superop_derivative, GeneratorFamily, DEFAULT_FD_STEP};
use crate::{par, CMatrix, CVector, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum AmplitudeSource {
    /// Project the exact trajectory onto each block.
    #[default]
    ProjectedExact,
    /// Decoupled transport dp_β/ds = −⟨⟨E_β|dD_β/ds⟩⟩ p_β from p_β(0).
    Transport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum AmplitudeScale {
    /// Coefficients of ρ = Σ c_k F_k (ρ = (I+σx)/2 ↦ (½, ½, 0, 0)).
    #[default]
    Expansion,
    /// Components tr(F_k ρ)/√D of the isometric coherence vector.
    Isometric,
}

#[derive(Debug, Clone, Copy)]
pub struct CrossoverOptions {
    pub source: AmplitudeSource,
    pub scale: AmplitudeScale,
    pub fd_step: f64,
    /// Log-magnitudes above this are reported as overflow (divergent).
    pub log_limit: f64,
    /// Smallest admissible |ω_βα| between distinct clusters.
    pub gap_min: f64,
}

impl Default for CrossoverOptions {
    fn default() -> Self {
        Self {
            source: AmplitudeSource::default(),
            scale: AmplitudeScale::default(),
            fd_step: DEFAULT_FD_STEP,
            log_limit: 700.0,
            gap_min: 1e-10,
        }
    }
}

/// Tracking options used for crossover analysis: largest component set to 1
/// at s = 0, parallel transport afterwards.
pub fn crossover_track_options() -> TrackOptions {
    TrackOptions { spectral: SpectralOptions { gauge: Gauge::MaxComponent, ..Default::default() }, ..Default::default() }
}

fn require_one_dimensional(frames: &FrameFamily) -> Result<()> {
    if let Some(d) = frames.block_dims().iter().find(|&&d| d > 1) {
        return Err(Error::UnsupportedStructure(format!(
            "crossover analysis needs one-dimensional Jordan blocks, found a block of size {d}"
        )));
    }
    Ok(())
}

/// Trapezoidal cumulative integral of `f` on `grid`.
pub fn cumulative_trapezoid(grid: &[f64], f: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = ZERO;
    out.push(acc);
    for k in 1..f.len() {
        acc += (f[k] + f[k - 1]) * (0.5 * (grid[k] - grid[k - 1]));
        out.push(acc);
    }
    out
}

/// Three-point derivative on a possibly non-uniform grid.
pub fn grid_derivative(grid: &[f64], f: &[C64]) -> Vec<C64> {
    let n = f.len();
    if n < 3 {
        let d = (f[n - 1] - f[0]) / (grid[n - 1] - grid[0]);
        return vec![d; n];
    }
    let mut out = vec![ZERO; n];
    for k in 1..n - 1 {
        let (h0, h1) = (grid[k] - grid[k - 1], grid[k + 1] - grid[k]);
        out[k] = (f[k + 1] * (h0 / (h1 * (h0 + h1))) - f[k - 1] * (h1 / (h0 * (h0 + h1))))
            + f[k] * ((h1 - h0) / (h0 * h1));
    }
    let (h0, h1) = (grid[1] - grid[0], grid[2] - grid[1]);
    out[0] = f[0] * (-(2.0 * h0 + h1) / (h0 * (h0 + h1))) + f[1] * ((h0 + h1) / (h0 * h1)) - f[2] * (h0 / (h1 * (h0 + h1)));
    let (h0, h1) = (grid[n - 2] - grid[n - 3], grid[n - 1] - grid[n - 2]);
    out[n - 1] = f[n - 3] * (h1 / (h0 * (h0 + h1))) - f[n - 2] * ((h0 + h1) / (h0 * h1))
        + f[n - 1] * ((2.0 * h1 + h0) / (h1 * (h0 + h1)));
    out
}

/// γ_α(s) and Ω_α(s) = ∫₀ˢ γ_α per block; pair quantities follow by difference.
#[derive(Debug, Clone)]
pub struct GapTables {
    pub grid: Vec<f64>,
    pub gamma: Vec<Vec<C64>>,
    pub big_omega: Vec<Vec<C64>>,
    pub clusters: Vec<usize>,
}

impl GapTables {
    pub fn omega(&self, beta: usize, alpha: usize, k: usize) -> C64 {
        self.gamma[beta][k] - self.gamma[alpha][k]
    }

    pub fn big_omega_pair(&self, beta: usize, alpha: usize, k: usize) -> C64 {
        self.big_omega[beta][k] - self.big_omega[alpha][k]
    }

    pub fn same_cluster(&self, beta: usize, alpha: usize) -> bool {
        self.clusters[beta] == self.clusters[alpha]
    }

    /// Largest |ω_βα| over all pairs and grid points.
    pub fn max_frequency(&self) -> f64 {
        let n = self.gamma.len();
        let mut m = 0.0_f64;
        for k in 0..self.grid.len() {
            for b in 0..n {
                for a in 0..n {
                    m = m.max(self.omega(b, a, k).norm());
                }
            }
        }
        m
    }
}

pub fn gap_integrals(frames: &FrameFamily) -> GapTables {
    let gamma: Vec<Vec<C64>> = (0..frames.block_count()).map(|a| frames.eigenvalue_path(a)).collect();
    let big_omega = gamma.iter().map(|g| cumulative_trapezoid(&frames.grid, g)).collect();
    GapTables { grid: frames.grid.clone(), gamma, big_omega, clusters: frames.clusters() }
}

/// Amplitudes p_β(s_k), stored as `p[β][k]·e^{log_scale[β]}`.
#[derive(Debug, Clone)]
pub struct TransportCoefficients {
    pub grid: Vec<f64>,
    pub p: Vec<Vec<C64>>,
    pub log_scale: Vec<f64>,
    pub source: AmplitudeSource,
}

impl TransportCoefficients {
    /// p_β(s_k) as a plain number (may overflow to infinity).
    pub fn value(&self, beta: usize, k: usize) -> C64 {
        self.p[beta][k] * self.log_scale[beta].exp()
    }
}

fn scaled_state(rho0: &CoherenceVector, scale: AmplitudeScale, basis_norm: f64) -> CoherenceVector {
    match scale {
        AmplitudeScale::Isometric => rho0.clone(),
        AmplitudeScale::Expansion => CoherenceVector::new(rho0.as_vector() / C64::new(basis_norm.sqrt(), 0.0)),
    }
}

/// p_β(0) = ⟨⟨E_β(0)|ρ(0)⟩⟩ carried along by the decoupled transport law.
/// Blocks sharing a cluster are transported together.
pub fn transport_coefficients(frames: &FrameFamily, rho0: &CoherenceVector) -> Result<TransportCoefficients> {
    require_one_dimensional(frames)?;
    let n = frames.block_count();
    let len = frames.grid.len();
    if rho0.dim() != frames.frames[0].blocks[0].right[0].len() {
        return invalid("initial state dimension does not match the frames");
    }
    let clusters = frames.clusters();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &c) in clusters.iter().enumerate() {
        match groups.iter_mut().find(|g| clusters[g[0]] == c) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    let mut p = vec![vec![ZERO; len]; n];
    for (b, row) in p.iter_mut().enumerate() {
        row[0] = frames.frames[0].blocks[b].project(0, rho0.as_vector());
    }
    for k in 0..len - 1 {
        let (f0, f1) = (&frames.frames[k], &frames.frames[k + 1]);
        for g in &groups {
            let m = g.len();
            // A_ij = ½(E_i(k) + E_i(k+1))·(D_j(k+1) − D_j(k))
            let a = CMatrix::from_fn(m, m, |i, j| {
                let e = &f0.blocks[g[i]].left[0] + &f1.blocks[g[i]].left[0];
                let d = &f1.blocks[g[j]].right[0] - &f0.blocks[g[j]].right[0];
                e.iter().zip(d.iter()).map(|(x, y)| x * y).sum::<C64>() * 0.5
            });
            let step = (-a).exp();
            let cur = CVector::from_iterator(m, g.iter().map(|&b| p[b][k]));
            let next = step * cur;
            for (i, &b) in g.iter().enumerate() {
                p[b][k + 1] = next[i];
            }
        }
    }
    Ok(TransportCoefficients { grid: frames.grid.clone(), p, log_scale: vec![0.0; n], source: AmplitudeSource::Transport })
}

/// p_β(s_k) = e^{−TΩ_β(s_k)}⟨⟨E_β(s_k)|ρ(s_k)⟩⟩ from states on the frame grid.
pub fn projected_coefficients(
    frames: &FrameFamily,
    gaps: &GapTables,
    states: &[CVector],
    t_total: f64,
) -> Result<TransportCoefficients> {
    require_one_dimensional(frames)?;
    if states.len() != frames.grid.len() {
        return invalid(format!("{} states for a grid of {} points", states.len(), frames.grid.len()));
    }
    let n = frames.block_count();
    let mut p = Vec::with_capacity(n);
    let mut log_scale = Vec::with_capacity(n);
    for b in 0..n {
        let shift = gaps.big_omega[b].iter().map(|w| -t_total * w.re).fold(0.0_f64, f64::max);
        let row: Vec<C64> = states
            .iter()
            .enumerate()
            .map(|(k, rho)| {
                let e = (-(gaps.big_omega[b][k] * t_total) - shift).exp();
                frames.frames[k].blocks[b].project(0, rho) * e
            })
            .collect();
        p.push(row);
        log_scale.push(shift);
    }
    Ok(TransportCoefficients { grid: frames.grid.clone(), p, log_scale, source: AmplitudeSource::ProjectedExact })
}

/// V, Q and dQ/ds per ordered pair, each carrying the log scale of p_β.
#[derive(Debug, Clone)]
pub struct CouplingTables {
    pub grid: Vec<f64>,
    /// `v[β][α][k]`; zero on the diagonal and within clusters.
    pub v: Vec<Vec<Vec<C64>>>,
    pub q: Vec<Vec<Vec<C64>>>,
    pub dq: Vec<Vec<Vec<C64>>>,
    pub log_scale: Vec<f64>,
    pub gaps: GapTables,
}

/// ⟨⟨E_α(s_k)| d𝓛/ds |D_β(s_k)⟩⟩ as `[k][(α, β)]`.
pub fn derivative_elements(fam: &dyn GeneratorFamily, frames: &FrameFamily, fd_step: f64) -> Result<Vec<CMatrix>> {
    require_one_dimensional(frames)?;
    let idx: Vec<usize> = (0..frames.grid.len()).collect();
    par::try_map(&idx, |&k| {
        let dl = superop_derivative(fam, frames.grid[k], fd_step)?;
        let f = &frames.frames[k];
        Ok(f.left_matrix() * dl.matrix() * f.right_matrix())
    })
}

pub fn coupling_matrix(
    elements: &[CMatrix],
    p: &TransportCoefficients,
    gaps: &GapTables,
    gap_min: f64,
) -> Result<CouplingTables> {
    let n = gaps.gamma.len();
    let len = gaps.grid.len();
    if elements.len() != len || p.p.len() != n {
        return invalid("coupling inputs are on different grids");
    }
    let empty = vec![vec![vec![ZERO; len]; n]; n];
    let (mut v, mut q, mut dq) = (empty.clone(), empty.clone(), empty);
    for b in 0..n {
        for a in 0..n {
            if a == b || gaps.same_cluster(b, a) {
                continue;
            }
            for k in 0..len {
                let w = gaps.omega(b, a, k);
                if w.norm() < gap_min {
                    return Err(Error::GapCollapse { beta: b, alpha: a, s: gaps.grid[k], gap: w.norm() });
                }
                v[b][a][k] = p.p[b][k] * elements[k][(a, b)];
                q[b][a][k] = v[b][a][k] / (w * w);
            }
            dq[b][a] = grid_derivative(&gaps.grid, &q[b][a]);
        }
    }
    Ok(CouplingTables { grid: gaps.grid.clone(), v, q, dq, log_scale: p.log_scale.clone(), gaps: gaps.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossoverValue {
    /// T_α^c, or +∞ when its logarithm exceeds the overflow limit.
    pub value: f64,
    /// ln T_α^c (−∞ when T_α^c = 0).
    pub ln_value: f64,
    /// Some exponent exceeded the log limit.
    pub overflow: bool,
    /// Grid point where the maximum is attained.
    pub s_at_max: f64,
}

pub fn crossover_time(tables: &CouplingTables, alpha: usize, t_total: f64, log_limit: f64) -> Result<CrossoverValue> {
    let n = tables.q.len();
    if alpha >= n {
        return invalid(format!("block {alpha} out of range ({n} blocks)"));
    }
    let len = tables.grid.len();
    let gaps = &tables.gaps;
    let betas: Vec<usize> = (0..n).filter(|&b| b != alpha && !gaps.same_cluster(b, alpha)).collect();
    // common shift keeping every exponent ≤ 0
    let mut shift = f64::NEG_INFINITY;
    for &b in &betas {
        let ls = tables.log_scale[b];
        shift = shift.max(ls);
        for k in 0..len {
            shift = shift.max(ls + t_total * gaps.big_omega_pair(b, alpha, k).re);
        }
    }
    if !shift.is_finite() {
        return Ok(CrossoverValue { value: 0.0, ln_value: f64::NEG_INFINITY, overflow: false, s_at_max: 0.0 });
    }
    let mut bracket = vec![ZERO; len];
    for &b in &betas {
        let ls = tables.log_scale[b];
        let q = &tables.q[b][alpha];
        let dq = &tables.dq[b][alpha];
        let expo: Vec<C64> =
            (0..len).map(|k| (gaps.big_omega_pair(b, alpha, k) * t_total + (ls - shift)).exp()).collect();
        let integrand: Vec<C64> = (0..len).map(|k| expo[k] * dq[k]).collect();
        let integral = cumulative_trapezoid(&tables.grid, &integrand);
        let q0 = q[0] * (ls - shift).exp();
        for k in 0..len {
            bracket[k] += q0 - q[k] * expo[k] + integral[k];
        }
    }
    let (kmax, m) = bracket
        .iter()
        .enumerate()
        .map(|(k, z)| (k, z.norm()))
        .fold((0, 0.0_f64), |acc, x| if x.1 > acc.1 { x } else { acc });
    let ln_value = if m > 0.0 { m.ln() + shift } else { f64::NEG_INFINITY };
    let overflow = shift > log_limit || ln_value > log_limit;
    let value = if ln_value > 709.0 { f64::INFINITY } else { ln_value.exp() };
    Ok(CrossoverValue { value, ln_value, overflow, s_at_max: tables.grid[kmax] })
}

/// Frames, gap integrals and derivative matrix elements on one s-grid,
/// reusable across run times.
pub struct CrossoverAnalysis<'a> {
    pub family: &'a dyn GeneratorFamily,
    pub frames: FrameFamily,
    pub gaps: GapTables,
    pub elements: Vec<CMatrix>,
    pub opts: CrossoverOptions,
}

impl<'a> CrossoverAnalysis<'a> {
    pub fn new(
        family: &'a dyn GeneratorFamily,
        grid: &[f64],
        track: &TrackOptions,
        opts: &CrossoverOptions,
    ) -> Result<Self> {
        let frames = track_frames(family, grid, track)?;
        Self::from_frames(family, frames, opts)
    }

    pub fn from_frames(family: &'a dyn GeneratorFamily, frames: FrameFamily, opts: &CrossoverOptions) -> Result<Self> {
        require_one_dimensional(&frames)?;
        let gaps = gap_integrals(&frames);
        let elements = derivative_elements(family, &frames, opts.fd_step)?;
        Ok(Self { family, frames, gaps, elements, opts: *opts })
    }

    pub fn block_count(&self) -> usize {
        self.frames.block_count()
    }

    /// The same analysis on every `stride`-th grid point.
    pub fn subsample(&self, stride: usize) -> CrossoverAnalysis<'a> {
        let stride = stride.max(1);
        let frames = FrameFamily {
            grid: self.frames.grid.iter().step_by(stride).copied().collect(),
            frames: self.frames.frames.iter().step_by(stride).cloned().collect(),
        };
        let gaps = gap_integrals(&frames);
        let elements = self.elements.iter().step_by(stride).cloned().collect();
        CrossoverAnalysis { family: self.family, frames, gaps, elements, opts: self.opts }
    }

    pub fn coefficients(&self, rho0: &CoherenceVector, t_total: f64) -> Result<TransportCoefficients> {
        let rho = scaled_state(rho0, self.opts.scale, self.family.basis().norm());
        match self.opts.source {
            AmplitudeSource::Transport => transport_coefficients(&self.frames, &rho),
            AmplitudeSource::ProjectedExact => {
                let traj = evolve_on_grid(self.family, &rho, t_total, &self.frames.grid, 1)?;
                projected_coefficients(&self.frames, &self.gaps, &traj.states, t_total)
            }
        }
    }

    pub fn tables(&self, rho0: &CoherenceVector, t_total: f64) -> Result<CouplingTables> {
        let p = self.coefficients(rho0, t_total)?;
        coupling_matrix(&self.elements, &p, &self.gaps, self.opts.gap_min)
    }

    /// T_α^c for every block at run time `t_total`.
    pub fn crossover_times(&self, rho0: &CoherenceVector, t_total: f64) -> Result<Vec<CrossoverValue>> {
        if !(t_total > 0.0) || !t_total.is_finite() {
            return invalid(format!("run time must be positive, got {t_total}"));
        }
        let tables = self.tables(rho0, t_total)?;
        (0..self.block_count()).map(|a| crossover_time(&tables, a, t_total, self.opts.log_limit)).collect()
    }
}

/// Largest |γ_β − γ_α| sampled at s ∈ {0, ½, 1}.
pub fn max_pair_frequency(family: &dyn GeneratorFamily, opts: &SpectralOptions) -> Result<f64> {
    let mut m = 0.0_f64;
    for s in [0.0, 0.5, 1.0] {
        let ev = spectrum(&family.generator(s)?, opts)?.eigenvalues();
        for a in &ev {
            for b in &ev {
                m = m.max((a - b).norm());
            }
        }
    }
    Ok(m)
}

/// Grid size resolving the fastest phase e^{TΩ} with ~20 points per radian.
pub fn recommended_grid_points(t_max: f64, max_frequency: f64, min_points: usize) -> usize {
    let need = (20.0 * t_max * max_frequency).ceil() as usize + 1;
    need.max(min_points)
}

pub fn uniform_grid(points: usize) -> Vec<f64> {
    let n = points.max(2) - 1;
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossoverPoint {
    pub t_total: f64,
    /// s-grid size used for this run time.
    pub grid_points: usize,
    pub times: Vec<CrossoverValue>,
    pub max: f64,
    /// T / max_α T_α^c.
    pub ratio: f64,
    pub in_window: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceFlag {
    pub divergent: bool,
    /// Start of the final run of log-slopes above one.
    pub onset: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossoverReport {
    pub eigenvalues: Vec<C64>,
    /// Size of the finest s-grid.
    pub grid_points: usize,
    pub margin: f64,
    pub source: AmplitudeSource,
    pub scale: AmplitudeScale,
    pub points: Vec<CrossoverPoint>,
    /// Maximal runs of consecutive T values inside the window.
    pub window: Vec<(f64, f64)>,
    pub divergence: Vec<DivergenceFlag>,
}

impl CrossoverReport {
    pub fn series(&self, alpha: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.times[alpha].value).collect()
    }

    pub fn ln_series(&self, alpha: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.times[alpha].ln_value).collect()
    }

    pub fn t_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t_total).collect()
    }

    pub fn window_contains(&self, t: f64) -> bool {
        self.window.iter().any(|&(a, b)| t >= a && t <= b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WindowOptions {
    pub margin: f64,
    /// Fixed s-grid size; `None` sizes it from T_max and the largest gap.
    pub grid_points: Option<usize>,
    pub min_grid_points: usize,
    pub track: TrackOptions,
    pub crossover: CrossoverOptions,
}

impl Default for WindowOptions {
    fn default() -> Self {
        Self {
            margin: 10.0,
            grid_points: None,
            min_grid_points: 2001,
            track: crossover_track_options(),
            crossover: CrossoverOptions::default(),
        }
    }
}

/// Log-slope divergence test over the last decade of `t`.
pub fn divergence_flag(t: &[f64], ln_tc: &[f64]) -> DivergenceFlag {
    let n = t.len();
    if n < 2 {
        return DivergenceFlag { divergent: false, onset: None };
    }
    let slope = |i: usize| {
        let d = ln_tc[i + 1] - ln_tc[i];
        if !d.is_finite() {
            return if ln_tc[i + 1].is_finite() { f64::INFINITY } else { 0.0 };
        }
        d / (t[i + 1].ln() - t[i].ln())
    };
    let t_last = t[n - 1];
    let first = t.iter().position(|&x| x >= t_last / 10.0).unwrap_or(0).min(n - 2);
    let divergent = (first..n - 1).all(|i| slope(i) > 1.0);
    let onset = if divergent {
        let mut i = first;
        while i > 0 && slope(i - 1) > 1.0 {
            i -= 1;
        }
        Some(t[i])
    } else {
        None
    };
    DivergenceFlag { divergent, onset }
}

/// T_α^c over a grid of run times, the window {T ≥ margin·max_α T_α^c} and
/// per-block divergence flags. Block order follows `reference` when given.
pub fn adiabaticity_window(
    family: &dyn GeneratorFamily,
    rho0: &CoherenceVector,
    t_grid: &[f64],
    reference: Option<&[C64]>,
    opts: &WindowOptions,
) -> Result<CrossoverReport> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return invalid("run-time grid must be non-empty and positive");
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("run-time grid must be ascending");
    }
    if !(opts.margin > 0.0) {
        return invalid("margin must be positive");
    }
    let t_max = *t_grid.last().unwrap();
    // one fine grid; each run time uses the coarsest nested sub-grid that resolves it
    let (points, strides) = match opts.grid_points {
        Some(p) => (p, vec![1; t_grid.len()]),
        None => {
            let w = max_pair_frequency(family, &opts.track.spectral)?;
            let base = opts.min_grid_points.max(3) - 1;
            let level = |t: f64| {
                let mut j = 0u32;
                while ((base << j) as f64) < 20.0 * t * w {
                    j += 1;
                }
                j
            };
            let top = level(t_max);
            ((base << top) + 1, t_grid.iter().map(|&t| 1usize << (top - level(t))).collect())
        }
    };
    let mut frames = track_frames(family, &uniform_grid(points), &opts.track)?;
    if let Some(r) = reference {
        frames.align_to(r)?;
    }
    let analysis = CrossoverAnalysis::from_frames(family, frames, &opts.crossover)?;
    let mut all: Vec<Option<Vec<CrossoverValue>>> = vec![None; t_grid.len()];
    let mut distinct = strides.clone();
    distinct.sort_unstable();
    distinct.dedup();
    for stride in distinct {
        let sub = analysis.subsample(stride);
        let idx: Vec<usize> = (0..t_grid.len()).filter(|&i| strides[i] == stride).collect();
        let res = par::try_map(&idx, |&i| sub.crossover_times(rho0, t_grid[i]))?;
        for (i, r) in idx.into_iter().zip(res) {
            all[i] = Some(r);
        }
    }
    let mut pts = Vec::with_capacity(t_grid.len());
    for (i, (&t, times)) in t_grid.iter().zip(all).enumerate() {
        let times = times.expect("every run time evaluated");
        let max = times.iter().map(|c| c.value).fold(0.0, f64::max);
        let ratio = if max > 0.0 { t / max } else { f64::INFINITY };
        let grid_points = (points - 1) / strides[i] + 1;
        pts.push(CrossoverPoint { t_total: t, grid_points, times, max, ratio, in_window: ratio >= opts.margin });
    }
    let mut window = Vec::new();
    let mut start: Option<f64> = None;
    for (i, p) in pts.iter().enumerate() {
        match (p.in_window, start) {
            (true, None) => start = Some(p.t_total),
            (false, Some(a)) => {
                window.push((a, pts[i - 1].t_total));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        window.push((a, pts.last().unwrap().t_total));
    }
    let n = analysis.block_count();
    let divergence = (0..n)
        .map(|a| {
            let ln: Vec<f64> = pts.iter().map(|p| p.times[a].ln_value).collect();
            divergence_flag(t_grid, &ln)
        })
        .collect();
    Ok(CrossoverReport {
        eigenvalues: analysis.frames.frames[0].eigenvalues(),
        grid_points: points,
        margin: opts.margin,
        source: opts.crossover.source,
        scale: opts.crossover.scale,
        points: pts,
        window,
        divergence,
    })
}

/// |ρ_a(s)⟩⟩ = Σ_β p_β(s) e^{TΩ_β(s)} |D_β(s)⟩⟩ with transported p_β.
pub fn adiabatic_evolve(frames: &FrameFamily, rho0: &CoherenceVector, t_total: f64) -> Result<Trajectory> {
    if !t_total.is_finite() || t_total < 0.0 {
        return invalid(format!("run time must be finite and non-negative, got {t_total}"));
    }
    let p = transport_coefficients(frames, rho0)?;
    let gaps = gap_integrals(frames);
    let states = (0..frames.grid.len())
        .map(|k| {
            let f = &frames.frames[k];
            f.blocks.iter().enumerate().fold(CVector::zeros(rho0.dim()), |acc, (b, blk)| {
                acc + &blk.right[0] * (p.p[b][k] * (gaps.big_omega[b][k] * t_total).exp())
            })
        })
        .collect();
    Ok(Trajectory { t_total, s: frames.grid.clone(), states })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn trapezoid_of_linear_is_exact() {
        let grid: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        let f: Vec<C64> = grid.iter().map(|&s| c(s)).collect();
        let i = cumulative_trapezoid(&grid, &f);
        for (s, v) in grid.iter().zip(&i) {
            assert!((v.re - s * s / 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn grid_derivative_is_exact_for_quadratics() {
        let grid: Vec<f64> = vec![0.0, 0.1, 0.25, 0.3, 0.6, 1.0];
        let f: Vec<C64> = grid.iter().map(|&s| c(3.0 * s * s - s + 2.0)).collect();
        let d = grid_derivative(&grid, &f);
        for (s, v) in grid.iter().zip(&d) {
            assert!((v.re - (6.0 * s - 1.0)).abs() < 1e-12, "s = {s}");
        }
    }

    #[test]
    fn divergence_detection() {
        let t: Vec<f64> = (0..30).map(|k| 10f64.powf(k as f64 / 10.0)).collect();
        let grow: Vec<f64> = t.iter().map(|&x| 0.05 * x + 0.1).collect();
        let flat: Vec<f64> = t.iter().map(|_| 1.43f64.ln()).collect();
        let g = divergence_flag(&t, &grow);
        assert!(g.divergent);
        assert!(g.onset.unwrap() <= t[29] / 10.0);
        assert!(!divergence_flag(&t, &flat).divergent);
    }

    #[test]
    fn grid_sizing() {
        assert_eq!(recommended_grid_points(11.0, 2.0, 2001), 2001);
        assert_eq!(recommended_grid_points(2000.0, 2.0, 2001), 80001);
    }
}
