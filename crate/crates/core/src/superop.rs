//! Lindblad supermatrices in a Hermitian operator basis and time-dependent
//! generator families s ↦ 𝓛(s).

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::operator::{commutator, max_abs, trace_product, CoherenceVector, OperatorBasis, OperatorMatrix};
use crate::{CMatrix, C64};

/// Default central-difference step for numerical d𝓛/ds.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// A D²×D² matrix acting on coherence vectors expanded in `basis`.
#[derive(Debug, Clone, PartialEq)]
pub struct Supermatrix {
    matrix: CMatrix,
    basis: Arc<OperatorBasis>,
}

impl Supermatrix {
    pub fn new(matrix: CMatrix, basis: Arc<OperatorBasis>) -> Result<Self> {
        let n = basis.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return invalid(format!("supermatrix must be {n}x{n}, got {}x{}", matrix.nrows(), matrix.ncols()));
        }
        Ok(Self { matrix, basis })
    }

    pub fn zeros(basis: Arc<OperatorBasis>) -> Self {
        let n = basis.len();
        Self { matrix: CMatrix::zeros(n, n), basis }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn basis(&self) -> &Arc<OperatorBasis> {
        &self.basis
    }

    /// Number of rows, D².
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    pub fn max_imag(&self) -> f64 {
        self.matrix.iter().fold(0.0_f64, |a, z| a.max(z.im.abs()))
    }

    /// Largest entry of the identity row; zero for trace-preserving generators.
    pub fn trace_row_max(&self) -> f64 {
        self.matrix.row(0).iter().fold(0.0_f64, |a, z| a.max(z.norm()))
    }

    pub fn apply(&self, v: &CoherenceVector) -> CoherenceVector {
        CoherenceVector::new(&self.matrix * v.as_vector())
    }

    pub fn with_matrix(&self, matrix: CMatrix) -> Self {
        Self { matrix, basis: self.basis.clone() }
    }

    pub fn add(&self, other: &Supermatrix) -> Self {
        self.with_matrix(&self.matrix + &other.matrix)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.with_matrix(&self.matrix * C64::new(c, 0.0))
    }
}

/// Expands a linear map on operators into a supermatrix:
/// S_jk = tr(F_j · map(F_k)) / c.
pub fn superop_from_map(basis: &Arc<OperatorBasis>, map: impl Fn(&CMatrix) -> CMatrix) -> Supermatrix {
    let n = basis.len();
    let c = basis.norm();
    let els = basis.elements();
    let mut m = CMatrix::zeros(n, n);
    for (k, fk) in els.iter().enumerate() {
        let image = map(fk);
        for (j, fj) in els.iter().enumerate() {
            m[(j, k)] = trace_product(fj, &image) / c;
        }
    }
    Supermatrix { matrix: m, basis: basis.clone() }
}

/// Supermatrix of ρ ↦ −i[H, ρ].
pub fn hamiltonian_superop(h: &OperatorMatrix, basis: &Arc<OperatorBasis>) -> Result<Supermatrix> {
    basis.check_dim(h.dim(), "Hamiltonian")?;
    if !h.is_hermitian(1e-12) {
        return invalid(format!("Hamiltonian is not Hermitian (error {:e})", h.hermiticity_error()));
    }
    Ok(commutator_superop(h.matrix(), basis))
}

/// ρ ↦ −i[A, ρ] without the Hermiticity check (A = dH/ds is Hermitian too,
/// but finite-difference callers may carry roundoff).
pub(crate) fn commutator_superop(a: &CMatrix, basis: &Arc<OperatorBasis>) -> Supermatrix {
    let mi = C64::new(0.0, -1.0);
    superop_from_map(basis, |f| commutator(a, f) * mi)
}

/// Supermatrix of ρ ↦ Σ_i (Γ_i ρ Γ_i† − ½{Γ_i†Γ_i, ρ}).
pub fn dissipator_superop(gammas: &[OperatorMatrix], basis: &Arc<OperatorBasis>) -> Result<Supermatrix> {
    for g in gammas {
        basis.check_dim(g.dim(), "Lindblad operator")?;
    }
    let d = basis.dim();
    let half = C64::new(0.5, 0.0);
    let ops: Vec<(CMatrix, CMatrix, CMatrix)> = gammas
        .iter()
        .map(|g| {
            let gd = g.matrix().adjoint();
            let gdg = &gd * g.matrix();
            (g.matrix().clone(), gd, gdg)
        })
        .collect();
    Ok(superop_from_map(basis, |f| {
        let mut acc = CMatrix::zeros(d, d);
        for (g, gd, gdg) in &ops {
            acc += g * f * gd - (gdg * f + f * gdg) * half;
        }
        acc
    }))
}

pub fn lindblad_superop(
    h: &OperatorMatrix,
    gammas: &[OperatorMatrix],
    basis: &Arc<OperatorBasis>,
) -> Result<Supermatrix> {
    Ok(hamiltonian_superop(h, basis)?.add(&dissipator_superop(gammas, basis)?))
}

/// A map s ↦ 𝓛(s) on s ∈ [0, 1].
pub trait GeneratorFamily: Send + Sync {
    fn basis(&self) -> &Arc<OperatorBasis>;

    fn generator(&self, s: f64) -> Result<Supermatrix>;

    /// d𝓛/ds when known in closed form.
    fn analytic_derivative(&self, _s: f64) -> Option<Result<Supermatrix>> {
        None
    }

    fn name(&self) -> String {
        "generator".to_string()
    }
}

type OpFn = dyn Fn(f64) -> OperatorMatrix + Send + Sync;
type OpListFn = dyn Fn(f64) -> Vec<OperatorMatrix> + Send + Sync;

/// 𝓛(s) = 𝓗(s) + 𝓡(s) built from a Hamiltonian path and Lindblad operators.
pub struct LindbladFamily {
    name: String,
    basis: Arc<OperatorBasis>,
    hamiltonian: Box<OpFn>,
    hamiltonian_derivative: Option<Box<OpFn>>,
    lindblad_ops: Box<OpListFn>,
    constant_dissipator: bool,
}

impl LindbladFamily {
    /// Family with s-independent Lindblad operators.
    pub fn new(
        name: impl Into<String>,
        basis: Arc<OperatorBasis>,
        hamiltonian: impl Fn(f64) -> OperatorMatrix + Send + Sync + 'static,
        lindblad_ops: Vec<OperatorMatrix>,
    ) -> Result<Self> {
        for g in &lindblad_ops {
            basis.check_dim(g.dim(), "Lindblad operator")?;
        }
        let fam = Self {
            name: name.into(),
            basis,
            hamiltonian: Box::new(hamiltonian),
            hamiltonian_derivative: None,
            lindblad_ops: Box::new(move |_| lindblad_ops.clone()),
            constant_dissipator: true,
        };
        fam.generator(0.0)?;
        Ok(fam)
    }

    /// Family whose Lindblad operators also depend on s.
    pub fn with_time_dependent_ops(
        name: impl Into<String>,
        basis: Arc<OperatorBasis>,
        hamiltonian: impl Fn(f64) -> OperatorMatrix + Send + Sync + 'static,
        lindblad_ops: impl Fn(f64) -> Vec<OperatorMatrix> + Send + Sync + 'static,
    ) -> Result<Self> {
        let fam = Self {
            name: name.into(),
            basis,
            hamiltonian: Box::new(hamiltonian),
            hamiltonian_derivative: None,
            lindblad_ops: Box::new(lindblad_ops),
            constant_dissipator: false,
        };
        fam.generator(0.0)?;
        Ok(fam)
    }

    /// Supplies dH/ds; with constant Lindblad operators this gives an exact d𝓛/ds.
    pub fn with_hamiltonian_derivative(
        mut self,
        dh: impl Fn(f64) -> OperatorMatrix + Send + Sync + 'static,
    ) -> Self {
        self.hamiltonian_derivative = Some(Box::new(dh));
        self
    }

    pub fn hamiltonian(&self, s: f64) -> OperatorMatrix {
        (self.hamiltonian)(s)
    }

    pub fn lindblad_ops(&self, s: f64) -> Vec<OperatorMatrix> {
        (self.lindblad_ops)(s)
    }

    pub fn hamiltonian_part(&self, s: f64) -> Result<Supermatrix> {
        hamiltonian_superop(&self.hamiltonian(s), &self.basis)
    }

    pub fn dissipative_part(&self, s: f64) -> Result<Supermatrix> {
        dissipator_superop(&self.lindblad_ops(s), &self.basis)
    }
}

impl GeneratorFamily for LindbladFamily {
    fn basis(&self) -> &Arc<OperatorBasis> {
        &self.basis
    }

    fn generator(&self, s: f64) -> Result<Supermatrix> {
        lindblad_superop(&self.hamiltonian(s), &self.lindblad_ops(s), &self.basis)
    }

    fn analytic_derivative(&self, s: f64) -> Option<Result<Supermatrix>> {
        match (&self.hamiltonian_derivative, self.constant_dissipator) {
            (Some(dh), true) => Some(Ok(commutator_superop(dh(s).matrix(), &self.basis))),
            _ => None,
        }
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

type SuperFn = dyn Fn(f64) -> CMatrix + Send + Sync;

/// Family given directly as a matrix-valued function (synthetic test
/// families, perturbed generators).
pub struct MatrixFamily {
    name: String,
    basis: Arc<OperatorBasis>,
    f: Box<SuperFn>,
    df: Option<Box<SuperFn>>,
}

impl MatrixFamily {
    pub fn new(
        name: impl Into<String>,
        basis: Arc<OperatorBasis>,
        f: impl Fn(f64) -> CMatrix + Send + Sync + 'static,
    ) -> Result<Self> {
        let fam = Self { name: name.into(), basis, f: Box::new(f), df: None };
        fam.generator(0.0)?;
        Ok(fam)
    }

    pub fn with_derivative(mut self, df: impl Fn(f64) -> CMatrix + Send + Sync + 'static) -> Self {
        self.df = Some(Box::new(df));
        self
    }

    /// A constant family.
    pub fn constant(m: Supermatrix) -> Self {
        let basis = m.basis().clone();
        let mat = m.into_matrix();
        let n = mat.nrows();
        Self {
            name: "constant".into(),
            basis,
            f: Box::new(move |_| mat.clone()),
            df: Some(Box::new(move |_| CMatrix::zeros(n, n))),
        }
    }
}

impl GeneratorFamily for MatrixFamily {
    fn basis(&self) -> &Arc<OperatorBasis> {
        &self.basis
    }

    fn generator(&self, s: f64) -> Result<Supermatrix> {
        Supermatrix::new((self.f)(s), self.basis.clone())
    }

    fn analytic_derivative(&self, s: f64) -> Option<Result<Supermatrix>> {
        self.df.as_ref().map(|df| Supermatrix::new(df(s), self.basis.clone()))
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// d𝓛/ds at `s`: the analytic derivative when the family has one, otherwise a
/// central difference with step `h`, switching to second-order one-sided
/// stencils when [s − h, s + h] leaves [0, 1].
pub fn superop_derivative(fam: &dyn GeneratorFamily, s: f64, h: f64) -> Result<Supermatrix> {
    if let Some(d) = fam.analytic_derivative(s) {
        return d;
    }
    finite_difference(fam, s, h)
}

pub fn finite_difference(fam: &dyn GeneratorFamily, s: f64, h: f64) -> Result<Supermatrix> {
    if !(h > 0.0) || !h.is_finite() {
        return invalid("finite-difference step must be positive");
    }
    let l = |x: f64| fam.generator(x).map(Supermatrix::into_matrix);
    let inv = C64::new(1.0 / (2.0 * h), 0.0);
    let m = if s - h < 0.0 {
        (l(s)? * C64::new(-3.0, 0.0) + l(s + h)? * C64::new(4.0, 0.0) - l(s + 2.0 * h)?) * inv
    } else if s + h > 1.0 {
        (l(s)? * C64::new(3.0, 0.0) - l(s - h)? * C64::new(4.0, 0.0) + l(s - 2.0 * h)?) * inv
    } else {
        (l(s + h)? - l(s - h)?) * inv
    };
    Supermatrix::new(m, fam.basis().clone())
}
