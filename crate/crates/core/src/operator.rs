//! Operators on a D-dimensional Hilbert space, Hermitian operator bases and
//! the coherence-vector representation of density matrices.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::{CMatrix, CVector, C64};

/// Largest supported qubit count for dense superoperators (D <= 64).
pub const MAX_QUBITS: usize = 6;

/// Complex D×D matrix: a Hamiltonian, a Lindblad operator or a density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix(CMatrix);

impl OperatorMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return invalid(format!("operator must be square and non-empty, got {}x{}", m.nrows(), m.ncols()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("operator has non-finite entries");
        }
        Ok(Self(m))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    /// Builds an operator from real row-major entries.
    pub fn from_real_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return invalid("row data does not match dimension");
        }
        Self::new(CMatrix::from_row_iterator(dim, dim, rows.iter().map(|&x| C64::new(x, 0.0))))
    }

    /// Projector |ψ⟩⟨ψ| onto a (not necessarily normalized) state vector.
    pub fn projector(psi: &CVector) -> Self {
        let n = psi.norm_squared();
        Self(psi * psi.adjoint() / C64::new(n, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self(&self.0 * c)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.0)
    }

    /// Largest entry of |A − A†|.
    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.0 - self.0.adjoint()))
    }

    /// Hermitian to `rel_tol` relative to the largest entry.
    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermiticity_error() <= rel_tol * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.0, &self.0).re
    }

    /// Checks the density-matrix invariants: unit trace, Hermiticity and
    /// positivity within the given tolerances.
    pub fn validate_density(&self, tol: &DensityTolerance) -> Result<()> {
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol.trace {
            return invalid(format!("density matrix trace {tr} differs from 1"));
        }
        let herm = self.hermiticity_error();
        if herm > tol.hermiticity {
            return invalid(format!("density matrix not Hermitian (error {herm:e})"));
        }
        let min_ev = self.hermitian_eigenvalues()[0];
        if min_ev < -tol.positivity {
            return invalid(format!("density matrix has negative eigenvalue {min_ev:e}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DensityTolerance {
    pub trace: f64,
    pub hermiticity: f64,
    pub positivity: f64,
}

impl Default for DensityTolerance {
    fn default() -> Self {
        Self { trace: 1e-12, hermiticity: 1e-12, positivity: 1e-10 }
    }
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// tr(A·B) without forming the product.
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub(crate) fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Single-qubit Pauli matrix by label.
pub fn pauli(label: char) -> Result<CMatrix> {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let m = match label {
        'I' => [o, z, z, o],
        'X' => [z, o, o, z],
        'Y' => [z, -i, i, z],
        'Z' => [o, z, z, -o],
        _ => return invalid(format!("unknown Pauli label '{label}'")),
    };
    Ok(DMatrix::from_row_slice(2, 2, &m))
}

/// Tensor-product Pauli string, first character acts on the most significant qubit.
pub fn pauli_string(label: &str) -> Result<CMatrix> {
    let mut acc = CMatrix::identity(1, 1);
    for c in label.chars() {
        acc = kron(&acc, &pauli(c.to_ascii_uppercase())?);
    }
    if acc.nrows() == 1 {
        return invalid("empty Pauli string");
    }
    Ok(acc)
}

/// Single-qubit operator `op` acting on qubit `k` (0 = most significant) of `n`.
pub fn embed_single(op: &CMatrix, k: usize, n: usize) -> CMatrix {
    let mut acc = CMatrix::identity(1, 1);
    for q in 0..n {
        if q == k {
            acc = kron(&acc, op);
        } else {
            acc = kron(&acc, &CMatrix::identity(2, 2));
        }
    }
    acc
}

/// Hermitian operator basis with tr(F_j F_k) = c·δ_jk and F_0 ∝ I.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBasis {
    dim: usize,
    elements: Vec<CMatrix>,
    labels: Vec<String>,
    norm: f64,
}

impl OperatorBasis {
    /// Builds a basis from explicit elements, verifying Hermiticity,
    /// Hilbert-Schmidt orthogonality and that the first element is ∝ I.
    pub fn new(elements: Vec<CMatrix>, labels: Vec<String>) -> Result<Self> {
        let dim = elements.first().map(|m| m.nrows()).unwrap_or(0);
        if dim == 0 || elements.len() != dim * dim {
            return invalid(format!("basis needs D² elements, got {} for D = {dim}", elements.len()));
        }
        if labels.len() != elements.len() {
            return invalid("label count does not match element count");
        }
        let norm = trace_product(&elements[0], &elements[0]).re;
        let tol = 1e-12 * norm.max(1.0);
        for (j, fj) in elements.iter().enumerate() {
            if fj.nrows() != dim || fj.ncols() != dim {
                return invalid("basis elements have inconsistent dimensions");
            }
            if max_abs(&(fj - fj.adjoint())) > tol {
                return invalid(format!("basis element {j} is not Hermitian"));
            }
            for (k, fk) in elements.iter().enumerate().skip(j) {
                let g = trace_product(fj, fk);
                let want = if j == k { norm } else { 0.0 };
                if (g - C64::new(want, 0.0)).norm() > tol {
                    return invalid(format!("basis elements {j},{k} violate tr(F_j F_k) = c δ_jk"));
                }
            }
        }
        let id_part = &elements[0] - CMatrix::identity(dim, dim) * elements[0][(0, 0)];
        if max_abs(&id_part) > tol {
            return invalid("first basis element must be proportional to the identity");
        }
        Ok(Self { dim, elements, labels, norm })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of elements, D².
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// The constant c in tr(F_j F_k) = c·δ_jk.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Basis rotated by a real orthogonal matrix acting on the non-identity
    /// elements, F'_j = Σ_k O_jk F_k. `o` is (D²−1)×(D²−1).
    pub fn rotated(&self, o: &DMatrix<f64>) -> Result<Self> {
        let m = self.len() - 1;
        if o.nrows() != m || o.ncols() != m {
            return invalid("rotation has wrong size");
        }
        let mut els = vec![self.elements[0].clone()];
        let mut labels = vec![self.labels[0].clone()];
        for j in 0..m {
            let mut acc = CMatrix::zeros(self.dim, self.dim);
            for k in 0..m {
                acc += &self.elements[k + 1] * C64::new(o[(j, k)], 0.0);
            }
            els.push(acc);
            labels.push(format!("R{j}"));
        }
        Self::new(els, labels)
    }

    pub(crate) fn check_dim(&self, dim: usize, what: &str) -> Result<()> {
        if dim != self.dim {
            return invalid(format!("{what} has dimension {dim}, basis has {}", self.dim));
        }
        Ok(())
    }
}

/// The 4^N Pauli strings, identity first, then lexicographic in (I, X, Y, Z)
/// with the first qubit most significant.
pub fn pauli_basis(n_qubits: usize) -> Result<OperatorBasis> {
    if n_qubits == 0 {
        return invalid("n_qubits must be at least 1");
    }
    if n_qubits > MAX_QUBITS {
        return Err(Error::Capacity(format!("{n_qubits} qubits exceeds the dense cap of {MAX_QUBITS}")));
    }
    const LETTERS: [char; 4] = ['I', 'X', 'Y', 'Z'];
    let count = 4usize.pow(n_qubits as u32);
    let mut elements = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for idx in 0..count {
        let label: String = (0..n_qubits)
            .map(|q| LETTERS[(idx / 4usize.pow((n_qubits - 1 - q) as u32)) % 4])
            .collect();
        elements.push(pauli_string(&label)?);
        labels.push(label);
    }
    Ok(OperatorBasis { dim: 1 << n_qubits, elements, labels, norm: (1u64 << n_qubits) as f64 })
}

/// A density matrix (or any operator) expanded in an operator basis,
/// component k = tr(F_k ρ)/√c.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceVector(CVector);

impl CoherenceVector {
    pub fn new(v: CVector) -> Self {
        Self(v)
    }

    pub fn from_real(v: &[f64]) -> Self {
        Self(CVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0))))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn into_vector(self) -> CVector {
        self.0
    }

    pub fn component(&self, k: usize) -> C64 {
        self.0[k]
    }

    pub fn max_imag(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, z| acc.max(z.im.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Coefficients c_k of ρ = Σ_k c_k F_k (the isometric components divided by √c).
    pub fn expansion_coefficients(&self, basis: &OperatorBasis) -> CVector {
        &self.0 / C64::new(basis.norm().sqrt(), 0.0)
    }

    /// Inverse of [`CoherenceVector::expansion_coefficients`].
    pub fn from_expansion_coefficients(c: &CVector, basis: &OperatorBasis) -> Self {
        Self(c * C64::new(basis.norm().sqrt(), 0.0))
    }
}

pub fn vectorize(rho: &OperatorMatrix, basis: &OperatorBasis) -> Result<CoherenceVector> {
    basis.check_dim(rho.dim(), "operator")?;
    let s = basis.norm().sqrt();
    let v = CVector::from_iterator(
        basis.len(),
        basis.elements().iter().map(|f| trace_product(f, rho.matrix()) / s),
    );
    Ok(CoherenceVector(v))
}

pub fn devectorize(v: &CoherenceVector, basis: &OperatorBasis) -> Result<OperatorMatrix> {
    if v.dim() != basis.len() {
        return invalid(format!("coherence vector has {} components, basis has {}", v.dim(), basis.len()));
    }
    let s = basis.norm().sqrt();
    let mut acc = CMatrix::zeros(basis.dim(), basis.dim());
    for (f, &c) in basis.elements().iter().zip(v.0.iter()) {
        if c != C64::new(0.0, 0.0) {
            acc += f * (c / s);
        }
    }
    Ok(OperatorMatrix(acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_hermitian(rng: &mut impl Rng, d: usize) -> CMatrix {
        let a = CMatrix::from_fn(d, d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn pauli_basis_shape_and_order() {
        let b = pauli_basis(1).unwrap();
        assert_eq!(b.labels(), &["I", "X", "Y", "Z"]);
        let b2 = pauli_basis(2).unwrap();
        assert_eq!(b2.len(), 16);
        assert_eq!(b2.labels()[0], "II");
        assert_eq!(b2.labels()[1], "IX");
        assert_eq!(b2.labels()[4], "XI");
        assert_eq!(b2.norm(), 4.0);
        assert!(matches!(pauli_basis(0), Err(Error::InvalidArgument(_))));
        assert!(matches!(pauli_basis(7), Err(Error::Capacity(_))));
    }

    #[test]
    fn pauli_traces() {
        let x = pauli('X').unwrap();
        let y = pauli('Y').unwrap();
        assert!(trace_product(&x, &y).norm() < 1e-15);
        assert!((trace_product(&x, &x) - C64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn vectorize_plus_state() {
        let b = pauli_basis(1).unwrap();
        let rho = OperatorMatrix::from_real_rows(2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        let v = vectorize(&rho, &b).unwrap();
        let s = 2f64.sqrt();
        let want = [1.0 / s, 1.0 / s, 0.0, 0.0];
        for k in 0..4 {
            assert!((v.component(k) - C64::new(want[k], 0.0)).norm() < 1e-15);
        }
        let mixed = OperatorMatrix::identity(2).scale(C64::new(0.5, 0.0));
        let v = vectorize(&mixed, &b).unwrap();
        assert!(v.as_vector().iter().skip(1).all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn devectorize_known_states() {
        let b = pauli_basis(1).unwrap();
        let s = 2f64.sqrt();
        let rho = devectorize(&CoherenceVector::from_real(&[1.0 / s, 0.0, 0.0, 0.0]), &b).unwrap();
        assert!((rho.matrix() - CMatrix::identity(2, 2) * C64::new(0.5, 0.0)).norm() < 1e-15);
        let rho = devectorize(&CoherenceVector::from_real(&[1.0 / s, 1.0 / s, 0.0, 0.0]), &b).unwrap();
        let plus = OperatorMatrix::from_real_rows(2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        assert!((rho.matrix() - plus.matrix()).norm() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let b = pauli_basis(1).unwrap();
        assert!(vectorize(&OperatorMatrix::identity(4), &b).is_err());
        assert!(devectorize(&CoherenceVector::from_real(&[1.0; 3]), &b).is_err());
    }

    #[test]
    fn round_trip_random_hermitian() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for n in 1..=2 {
            let b = pauli_basis(n).unwrap();
            for _ in 0..100 {
                let h = OperatorMatrix::new(random_hermitian(&mut rng, 1 << n)).unwrap();
                let back = devectorize(&vectorize(&h, &b).unwrap(), &b).unwrap();
                assert!(max_abs(&(back.matrix() - h.matrix())) < 1e-13);
                // Hermitian in a Hermitian basis gives real components
                assert!(vectorize(&h, &b).unwrap().max_imag() < 1e-14);
            }
        }
    }

    #[test]
    fn round_trip_random_vectors() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let b = pauli_basis(2).unwrap();
        for _ in 0..50 {
            let v = CoherenceVector::new(CVector::from_fn(16, |_, _| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            }));
            let back = vectorize(&devectorize(&v, &b).unwrap(), &b).unwrap();
            assert!((back.as_vector() - v.as_vector()).camax() < 1e-13);
        }
    }

    #[test]
    fn rotated_basis_is_valid() {
        let b = pauli_basis(1).unwrap();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let o = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        assert!(b.rotated(&o).is_ok());
        let bad = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(b.rotated(&bad).is_err());
    }

    #[test]
    fn density_validation() {
        let tol = DensityTolerance::default();
        let plus = OperatorMatrix::from_real_rows(2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        assert!(plus.validate_density(&tol).is_ok());
        let bad = OperatorMatrix::from_real_rows(2, &[1.5, 0.0, 0.0, -0.5]).unwrap();
        assert!(bad.validate_density(&tol).is_err());
        assert!((plus.purity() - 1.0).abs() < 1e-15);
    }
}
