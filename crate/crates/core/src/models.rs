//! Unitary-interpolation models H(s) = u(s)H₀u†(s), u(s) = exp(iπsG/2),
//! with s-independent Lindblad operators and an optional linear drift of
//! the dissipator. The DJ family is the case G = U; custom models are given
//! as Pauli sums.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::SymmetricEigen;

use crate::dj::DjInstance;
use crate::error::{invalid, Result};
use crate::operator::{embed_single, pauli, pauli_basis, pauli_string, OperatorBasis, OperatorMatrix};
use crate::superop::{commutator_superop, dissipator_superop, MatrixFamily};
use crate::{CMatrix, CVector, C64};

#[derive(Debug, Clone)]
pub struct InterpolatedModel {
    pub name: String,
    basis: Arc<OperatorBasis>,
    h0: CMatrix,
    generator: CMatrix,
    gen_vectors: CMatrix,
    gen_values: Vec<f64>,
    lindblad_ops: Vec<CMatrix>,
    drift: Option<CMatrix>,
}

fn check_hermitian(m: &CMatrix, what: &str) -> Result<()> {
    let err = (m - m.adjoint()).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    let scale = m.iter().fold(1.0_f64, |a, z| a.max(z.norm()));
    if err > 1e-12 * scale {
        return invalid(format!("{what} is not Hermitian (error {err:e})"));
    }
    Ok(())
}

impl InterpolatedModel {
    pub fn new(
        name: impl Into<String>,
        n_qubits: usize,
        h0: CMatrix,
        generator: CMatrix,
        lindblad_ops: Vec<CMatrix>,
    ) -> Result<Self> {
        let basis = Arc::new(pauli_basis(n_qubits)?);
        let d = basis.dim();
        for (m, what) in [(&h0, "H0"), (&generator, "interpolation generator")] {
            if m.nrows() != d || m.ncols() != d {
                return invalid(format!("{what} must be {d}x{d}"));
            }
            check_hermitian(m, what)?;
        }
        if lindblad_ops.iter().any(|g| g.nrows() != d || g.ncols() != d) {
            return invalid(format!("Lindblad operators must be {d}x{d}"));
        }
        let eig = SymmetricEigen::new(generator.clone());
        Ok(Self {
            name: name.into(),
            basis,
            h0,
            generator,
            gen_vectors: eig.eigenvectors,
            gen_values: eig.eigenvalues.iter().copied().collect(),
            lindblad_ops,
            drift: None,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.basis.dim().trailing_zeros() as usize
    }

    pub fn basis(&self) -> &Arc<OperatorBasis> {
        &self.basis
    }

    pub fn h0(&self) -> &CMatrix {
        &self.h0
    }

    pub fn generator(&self) -> &CMatrix {
        &self.generator
    }

    pub fn lindblad_ops(&self) -> &[CMatrix] {
        &self.lindblad_ops
    }

    pub fn with_lindblad_op(mut self, op: CMatrix) -> Result<Self> {
        let d = self.basis.dim();
        if op.nrows() != d || op.ncols() != d {
            return invalid(format!("Lindblad operator must be {d}x{d}"));
        }
        self.lindblad_ops.push(op);
        self.name.push_str("+op");
        Ok(self)
    }

    /// Adds s·Δ to the dissipator (Δ given as a supermatrix).
    pub fn with_linear_drift(mut self, delta: CMatrix) -> Result<Self> {
        let n = self.basis.len();
        if delta.nrows() != n || delta.ncols() != n {
            return invalid(format!("drift must be {n}x{n}"));
        }
        self.drift = Some(delta);
        self.name.push_str("+drift");
        Ok(self)
    }

    /// True when the dissipator does not depend on s.
    pub fn constant_dissipator(&self) -> bool {
        self.drift.is_none()
    }

    /// u(s) = exp(iπsG/2).
    pub fn interpolation(&self, s: f64) -> CMatrix {
        let phases = CVector::from_iterator(
            self.gen_values.len(),
            self.gen_values.iter().map(|&g| C64::from_polar(1.0, PI * s * g / 2.0)),
        );
        &self.gen_vectors * CMatrix::from_diagonal(&phases) * self.gen_vectors.adjoint()
    }

    pub fn hamiltonian(&self, s: f64) -> CMatrix {
        let u = self.interpolation(s);
        &u * &self.h0 * u.adjoint()
    }

    /// dH/ds = (iπ/2)[G, H(s)].
    pub fn hamiltonian_derivative(&self, s: f64) -> CMatrix {
        let h = self.hamiltonian(s);
        (&self.generator * &h - &h * &self.generator) * C64::new(0.0, PI / 2.0)
    }

    /// Dissipative part 𝓡(s) as a supermatrix.
    pub fn dissipator(&self, s: f64) -> Result<CMatrix> {
        let ops = self.lindblad_ops.iter().cloned().map(OperatorMatrix::new).collect::<Result<Vec<_>>>()?;
        let mut r = dissipator_superop(&ops, &self.basis)?.into_matrix();
        if let Some(d) = &self.drift {
            r += d * C64::new(s, 0.0);
        }
        Ok(r)
    }

    pub fn hamiltonian_superop(&self, s: f64) -> CMatrix {
        commutator_superop(&self.hamiltonian(s), &self.basis).into_matrix()
    }

    /// 𝓛(s) = 𝓗(s) + 𝓡(s) with exact derivative.
    pub fn family(&self) -> Result<MatrixFamily> {
        let r0 = self.dissipator(0.0)?;
        let (a, b) = (self.clone(), self.clone());
        let fam = MatrixFamily::new(self.name.clone(), self.basis.clone(), move |s| {
            let mut l = a.hamiltonian_superop(s) + &r0;
            if let Some(d) = &a.drift {
                l += d * C64::new(s, 0.0);
            }
            l
        })?;
        Ok(fam.with_derivative(move |s| {
            let mut dl = commutator_superop(&b.hamiltonian_derivative(s), &b.basis).into_matrix();
            if let Some(d) = &b.drift {
                dl += d;
            }
            dl
        }))
    }
}

impl DjInstance {
    /// The DJ path as an interpolation model (G = U).
    pub fn model(&self) -> Result<InterpolatedModel> {
        InterpolatedModel::new(
            format!("dj(n={}, f={})", self.n_qubits(), self.f),
            self.n_qubits(),
            self.h0(),
            self.oracle(),
            self.lindblad_ops(),
        )
    }
}

/// σ₋ = |1⟩⟨0| with σz|0⟩ = |0⟩.
pub fn sigma_minus() -> CMatrix {
    (pauli('X').unwrap() - pauli('Y').unwrap() * C64::new(0.0, 1.0)) * C64::new(0.5, 0.0)
}

/// The DJ Hamiltonian path with spontaneous emission √(κω)σ₋ on every qubit
/// in place of dephasing.
pub fn spontaneous_emission(inst: &DjInstance, kappa: f64) -> Result<InterpolatedModel> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return invalid(format!("emission rate must be non-negative, got {kappa}"));
    }
    let n = inst.n_qubits();
    let ops = (0..n).map(|k| embed_single(&sigma_minus(), k, n) * C64::new((kappa * inst.omega).sqrt(), 0.0)).collect();
    InterpolatedModel::new(format!("emission(n={n}, f={})", inst.f), n, inst.h0(), inst.oracle(), ops)
}

/// Adds σx dephasing of strength μ on the first qubit, which does not
/// commute with the z-diagonal interpolation.
pub fn with_transverse_dephasing(model: InterpolatedModel, mu: f64) -> Result<InterpolatedModel> {
    let n = model.n_qubits();
    let op = embed_single(&pauli('X')?, 0, n) * C64::new(mu.sqrt(), 0.0);
    model.with_lindblad_op(op)
}

/// Parses sums such as `0.5*XZ - 0.25i*YI + ZZ` into a 2^N×2^N matrix.
/// Coefficients are real or imaginary (`i`/`j` suffix); labels are
/// upper-case Pauli strings of length N.
pub fn parse_pauli_sum(expr: &str, n_qubits: usize) -> Result<CMatrix> {
    let compact: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return invalid("empty Pauli sum");
    }
    let mut terms: Vec<String> = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = compact.chars().collect();
    for (i, &ch) in chars.iter().enumerate() {
        let exponent_sign = i > 0 && matches!(chars[i - 1], 'e' | 'E') && chars[..i - 1].last().is_some_and(|c| c.is_ascii_digit() || *c == '.');
        let has_label = cur.chars().any(|c| "IXYZ".contains(c));
        if (ch == '+' || ch == '-') && has_label && !exponent_sign {
            terms.push(std::mem::take(&mut cur));
        }
        cur.push(ch);
    }
    terms.push(cur);
    let d = 1usize << n_qubits;
    let mut acc = CMatrix::zeros(d, d);
    for t in terms {
        let split = t.find(|c: char| "IXYZ".contains(c)).ok_or_else(|| {
            crate::error::Error::InvalidArgument(format!("term '{t}' has no Pauli label"))
        })?;
        let (coef, label) = t.split_at(split);
        if label.len() != n_qubits || !label.chars().all(|c| "IXYZ".contains(c)) {
            return invalid(format!("label '{label}' must be {n_qubits} characters from I, X, Y, Z"));
        }
        acc += pauli_string(label)? * parse_coefficient(coef.trim_end_matches('*'))?;
    }
    Ok(acc)
}

fn parse_coefficient(s: &str) -> Result<C64> {
    let body = s.trim_start_matches(['+', '-']);
    let negatives = s[..s.len() - body.len()].matches('-').count();
    let sign = if negatives % 2 == 1 { -1.0 } else { 1.0 };
    let (imag, num) = match body.strip_suffix(['i', 'j']) {
        Some(rest) => (true, rest),
        None => (false, body),
    };
    let num = num.trim_end_matches('*');
    let x: f64 = if num.is_empty() {
        1.0
    } else {
        num.parse().map_err(|_| crate::error::Error::InvalidArgument(format!("bad coefficient '{s}'")))?
    };
    Ok(if imag { C64::new(0.0, sign * x) } else { C64::new(sign * x, 0.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dj::FunctionSpec;
    use crate::superop::GeneratorFamily;

    #[test]
    fn pauli_sum_parsing() {
        let m = parse_pauli_sum("0.5*X - 0.5i*Y", 1).unwrap();
        assert!((m - sigma_minus()).camax() < 1e-15);
        let m = parse_pauli_sum("ZZ + 2.5e-1 XI - i YY", 2).unwrap();
        let want = pauli_string("ZZ").unwrap()
            + pauli_string("XI").unwrap() * C64::new(0.25, 0.0)
            - pauli_string("YY").unwrap() * C64::new(0.0, 1.0);
        assert!((m - want).camax() < 1e-15);
        assert!(parse_pauli_sum("", 1).is_err());
        assert!(parse_pauli_sum("0.5*XX", 1).is_err());
        assert!(parse_pauli_sum("abc*X", 1).is_err());
        let m = parse_pauli_sum("X + -2*Z - -Y", 1).unwrap();
        let want = pauli('X').unwrap() - pauli('Z').unwrap() * C64::new(2.0, 0.0) + pauli('Y').unwrap();
        assert!((m - want).camax() < 1e-15);
    }

    #[test]
    fn dj_model_matches_dj_family() {
        for n in [1, 2] {
            let inst = DjInstance::uniform(FunctionSpec::first_bit(n).unwrap(), 0.2).unwrap();
            let a = inst.family().unwrap();
            let b = inst.model().unwrap().family().unwrap();
            for s in [0.0, 0.3, 0.8] {
                let d = (a.generator(s).unwrap().into_matrix() - b.generator(s).unwrap().into_matrix()).camax();
                assert!(d < 1e-12, "n={n} s={s} d={d}");
                let da = a.analytic_derivative(s).unwrap().unwrap().into_matrix();
                let db = b.analytic_derivative(s).unwrap().unwrap().into_matrix();
                assert!((da - db).camax() < 1e-12);
            }
        }
    }

    #[test]
    fn interpolation_is_unitary_and_starts_at_identity() {
        let inst = DjInstance::uniform(FunctionSpec::first_bit(2).unwrap(), 0.1).unwrap();
        let m = inst.model().unwrap();
        assert!((m.interpolation(0.0) - CMatrix::identity(4, 4)).camax() < 1e-14);
        let u = m.interpolation(0.37);
        assert!((&u * u.adjoint() - CMatrix::identity(4, 4)).camax() < 1e-14);
        assert!((u - inst.interpolation(0.37)).camax() < 1e-14);
    }
}
