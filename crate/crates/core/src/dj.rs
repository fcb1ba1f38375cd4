//! Deutsch-Jozsa under dephasing as a built-in model family.
//!
//! H(0) = ω Σ_i |−_i⟩⟨−_i|, U = Σ_x (−1)^{f(x)} |x⟩⟨x|, Ũ(s) = exp(iπsU/2)
//! and H(s) = Ũ(s)H(0)Ũ†(s); each qubit dephases through Γ_i = λ_i√ω σ_z^i.
//! Since U² = I, Ũ(s) = cos(πs/2) + i sin(πs/2) U.
//!
//! For one qubit the generator is, in the basis (I, σx, σy, σz),
//!
//! ```text
//! 𝓛(s) = ω [[0,  0,    0,   0],
//!           [0, −2λ²,  0,   q],
//!           [0,  0,   −2λ², −r],
//!           [0, −q,    r,   0]]
//! ```
//!
//! with q = sin(πFs/2), r = −cos(πFs/2) and F = (−1)^{f(0)} − (−1)^{f(1)}.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::operator::{embed_single, pauli, pauli_basis, vectorize, CoherenceVector, OperatorBasis, OperatorMatrix};
use crate::superop::{LindbladFamily, Supermatrix};
use crate::{CMatrix, C64};

/// A promised-constant or promised-balanced Boolean function on N bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpec {
    n_qubits: usize,
    table: Vec<bool>,
}

impl FunctionSpec {
    /// Parses `constant0`, `constant1` or `balanced:<hex>`; bit x of the hex
    /// integer (least significant first) is f(x).
    pub fn parse(spec: &str, n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > crate::operator::MAX_QUBITS {
            return Err(Error::Capacity(format!("unsupported qubit count {n_qubits}")));
        }
        let size = 1usize << n_qubits;
        let spec = spec.trim();
        let table = match spec {
            "constant0" => vec![false; size],
            "constant1" => vec![true; size],
            _ => {
                let hex = spec
                    .strip_prefix("balanced:")
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown function spec '{spec}'")))?;
                let hex = hex.trim_start_matches("0x");
                let bits = u64::from_str_radix(hex, 16)
                    .map_err(|_| Error::InvalidArgument(format!("bad hex bit table '{hex}'")))?;
                if size < 64 && bits >> size != 0 {
                    return invalid(format!("bit table 0x{hex} has bits beyond 2^{n_qubits} entries"));
                }
                let table: Vec<bool> = (0..size).map(|x| bits >> x & 1 == 1).collect();
                let ones = table.iter().filter(|&&b| b).count();
                if ones != size / 2 {
                    return invalid(format!("bit table 0x{hex} is not balanced: {ones} of {size} ones"));
                }
                table
            }
        };
        Ok(Self { n_qubits, table })
    }

    pub fn constant(value: bool, n_qubits: usize) -> Result<Self> {
        Self::parse(if value { "constant1" } else { "constant0" }, n_qubits)
    }

    /// f(x) = leading bit of x, the simplest balanced function.
    pub fn first_bit(n_qubits: usize) -> Result<Self> {
        let size = 1u64 << n_qubits;
        let bits: u64 = (size / 2..size).fold(0, |acc, x| acc | 1 << x);
        Self::parse(&format!("balanced:{bits:x}"), n_qubits)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    pub fn value(&self, x: usize) -> bool {
        self.table[x]
    }

    pub fn is_constant(&self) -> bool {
        self.table.iter().all(|&b| b == self.table[0])
    }

    /// (−1)^{f(0)} − (−1)^{f(1)} for one qubit.
    pub fn big_f(&self) -> Option<f64> {
        (self.n_qubits == 1).then(|| sign(self.table[0]) - sign(self.table[1]))
    }

    /// (−1)^{f(0)+f(1)} for one qubit.
    pub fn parity(&self) -> Option<f64> {
        (self.n_qubits == 1).then(|| sign(self.table[0]) * sign(self.table[1]))
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_constant() {
            return write!(f, "constant{}", u8::from(self.table[0]));
        }
        let bits: u64 = self.table.iter().enumerate().fold(0, |acc, (x, &b)| acc | u64::from(b) << x);
        write!(f, "balanced:{bits:x}")
    }
}

fn sign(b: bool) -> f64 {
    if b {
        -1.0
    } else {
        1.0
    }
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Debug, Clone)]
pub struct DjInstance {
    pub f: FunctionSpec,
    pub omega: f64,
    pub lambdas: Vec<f64>,
}

impl DjInstance {
    pub fn new(f: FunctionSpec, omega: f64, lambdas: Vec<f64>) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return invalid(format!("energy scale must be positive, got {omega}"));
        }
        let n = f.n_qubits();
        let lambdas = match lambdas.len() {
            1 => vec![lambdas[0]; n],
            k if k == n => lambdas,
            k => return invalid(format!("{k} dephasing strengths given for {n} qubits")),
        };
        if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return invalid(format!("dephasing strength must be finite and non-negative, got {l}"));
        }
        Ok(Self { f, omega, lambdas })
    }

    /// ω = 1 and a common λ on every qubit.
    pub fn uniform(f: FunctionSpec, lambda: f64) -> Result<Self> {
        Self::new(f, 1.0, vec![lambda])
    }

    pub fn n_qubits(&self) -> usize {
        self.f.n_qubits()
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits()
    }

    pub fn oracle(&self) -> CMatrix {
        let d = self.dim();
        CMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |x, _| c(sign(self.f.value(x)))))
    }

    /// Ũ(s) = exp(iπsU/2).
    pub fn interpolation(&self, s: f64) -> CMatrix {
        let d = self.dim();
        let th = PI * s / 2.0;
        CMatrix::identity(d, d) * c(th.cos()) + self.oracle() * C64::new(0.0, th.sin())
    }

    pub fn h0(&self) -> CMatrix {
        let n = self.n_qubits();
        let minus = (pauli('I').unwrap() - pauli('X').unwrap()) * c(0.5);
        (0..n).fold(CMatrix::zeros(self.dim(), self.dim()), |acc, k| acc + embed_single(&minus, k, n)) * c(self.omega)
    }

    pub fn hamiltonian(&self, s: f64) -> CMatrix {
        let u = self.interpolation(s);
        &u * self.h0() * u.adjoint()
    }

    /// dH/ds = (iπ/2)[U, H(s)].
    pub fn hamiltonian_derivative(&self, s: f64) -> CMatrix {
        let h = self.hamiltonian(s);
        let u = self.oracle();
        (&u * &h - &h * &u) * C64::new(0.0, PI / 2.0)
    }

    pub fn lindblad_ops(&self) -> Vec<CMatrix> {
        let n = self.n_qubits();
        let z = pauli('Z').unwrap();
        self.lambdas
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != 0.0)
            .map(|(k, &l)| embed_single(&z, k, n) * c(l * self.omega.sqrt()))
            .collect()
    }

    pub fn basis(&self) -> Result<Arc<OperatorBasis>> {
        Ok(Arc::new(pauli_basis(self.n_qubits())?))
    }

    /// The generator family with exact d𝓛/ds.
    pub fn family(&self) -> Result<LindbladFamily> {
        let basis = self.basis()?;
        let ops = self.lindblad_ops().into_iter().map(OperatorMatrix::new).collect::<Result<Vec<_>>>()?;
        let (a, b) = (self.clone(), self.clone());
        let fam = LindbladFamily::new(
            format!("dj(n={}, f={})", self.n_qubits(), self.f),
            basis,
            move |s| OperatorMatrix::new(a.hamiltonian(s)).expect("finite Hamiltonian"),
            ops,
        )?;
        Ok(fam.with_hamiltonian_derivative(move |s| OperatorMatrix::new(b.hamiltonian_derivative(s)).expect("finite derivative")))
    }

    /// |+…+⟩⟨+…+|, the ground state of H(0).
    pub fn plus_projector(&self) -> OperatorMatrix {
        let d = self.dim();
        let v = nalgebra::DVector::from_element(d, c(1.0 / (d as f64).sqrt()));
        OperatorMatrix::projector(&v)
    }

    pub fn initial_state(&self) -> Result<CoherenceVector> {
        vectorize(&self.plus_projector(), &*self.basis()?)
    }

    /// Projector onto the outcomes that answer correctly: all-plus for a
    /// constant f, its complement for a balanced f.
    pub fn success_projector(&self) -> OperatorMatrix {
        let p = self.plus_projector();
        if self.f.is_constant() {
            p
        } else {
            let d = self.dim();
            OperatorMatrix::new(CMatrix::identity(d, d) - p.matrix()).expect("finite projector")
        }
    }

    pub fn success_probability_of(&self, rho: &CoherenceVector) -> Result<f64> {
        crate::evolve::projector_probability(rho, &*self.basis()?, &self.success_projector())
    }

    /// The common λ of a one-qubit instance, checked to lie in [0, 1).
    fn single_lambda(&self) -> Result<f64> {
        if self.n_qubits() != 1 {
            return invalid("closed forms are available for one qubit only");
        }
        let l = self.lambdas[0];
        if l >= 1.0 {
            return invalid(format!("closed forms need 0 <= λ < 1, got {l}"));
        }
        Ok(l)
    }

    pub fn final_state_analytic(&self, t_total: f64) -> Result<OperatorMatrix> {
        final_state_analytic(t_total, self.single_lambda()?, self.omega, &self.f)
    }

    pub fn success_probability_analytic(&self, t_total: f64) -> Result<f64> {
        let (pp, pm) = success_probabilities(t_total, self.single_lambda()?, self.omega, &self.f)?;
        Ok(if self.f.is_constant() { pp } else { pm })
    }
}

/// Closed-form generator for one qubit.
pub fn superop_analytic(s: f64, lambda: f64, big_f: f64, omega: f64) -> CMatrix {
    let th = PI * big_f * s / 2.0;
    let (q, r) = (th.sin(), -th.cos());
    let d = -2.0 * lambda * lambda;
    #[rustfmt::skip]
    let m = [
        0.0, 0.0, 0.0, 0.0,
        0.0, d,   0.0, q,
        0.0, 0.0, d,   -r,
        0.0, -q,  r,   0.0,
    ];
    CMatrix::from_row_slice(4, 4, &m.map(|x| c(omega * x)))
}

pub fn superop_analytic_in(s: f64, lambda: f64, big_f: f64, omega: f64) -> Result<Supermatrix> {
    Supermatrix::new(superop_analytic(s, lambda, big_f, omega), Arc::new(pauli_basis(1)?))
}

/// d/ds of [`superop_analytic`].
pub fn superop_analytic_derivative(s: f64, big_f: f64, omega: f64) -> CMatrix {
    let k = PI * big_f / 2.0;
    let th = k * s;
    let (dq, dr) = (k * th.cos(), k * th.sin());
    let mut m = CMatrix::zeros(4, 4);
    m[(1, 3)] = c(omega * dq);
    m[(2, 3)] = c(-omega * dr);
    m[(3, 1)] = c(-omega * dq);
    m[(3, 2)] = c(omega * dr);
    m
}

/// One-qubit eigenvalues (γ₁, γ₂, γ₃, γ₄) = ω(0, −2λ², −λ² − i√(1−λ⁴), −λ² + i√(1−λ⁴)).
pub fn eigenvalues_analytic(lambda: f64, omega: f64) -> [C64; 4] {
    let l2 = lambda * lambda;
    let w = C64::new(1.0 - l2 * l2, 0.0).sqrt();
    [
        c(0.0),
        c(-2.0 * l2 * omega),
        (c(-l2) - C64::new(0.0, 1.0) * w) * omega,
        (c(-l2) + C64::new(0.0, 1.0) * w) * omega,
    ]
}

/// ρ(1) = [I + e^{−2λ²ωT}(−1)^{f(0)+f(1)}σx]/2.
pub fn final_state_analytic(t_total: f64, lambda: f64, omega: f64, f: &FunctionSpec) -> Result<OperatorMatrix> {
    let parity = f.parity().ok_or_else(|| Error::InvalidArgument("closed forms need one qubit".into()))?;
    let x = parity * (-2.0 * lambda * lambda * omega * t_total).exp();
    OperatorMatrix::new((pauli('I')? + pauli('X')? * c(x)) * c(0.5))
}

/// (p₊, p₋) = [1 ± e^{−2λ²ωT}(−1)^{f(0)+f(1)}]/2.
pub fn success_probabilities(t_total: f64, lambda: f64, omega: f64, f: &FunctionSpec) -> Result<(f64, f64)> {
    let parity = f.parity().ok_or_else(|| Error::InvalidArgument("closed forms need one qubit".into()))?;
    let x = parity * (-2.0 * lambda * lambda * omega * t_total).exp();
    Ok(((1.0 + x) / 2.0, (1.0 - x) / 2.0))
}

/// T* = −ln(2p − 1)/(2λ²ω), the longest run time whose dephased success still reaches p.
pub fn optimal_runtime(lambda: f64, target: f64, omega: f64) -> Result<f64> {
    if !(target > 0.5 && target < 1.0) {
        return invalid(format!("target success probability must lie in (0.5, 1), got {target}"));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return invalid(format!("optimal run time needs λ > 0, got {lambda}"));
    }
    Ok(-(2.0 * target - 1.0).ln() / (2.0 * lambda * lambda * omega))
}

/// Closed-system adiabatic scale π/(2ω).
pub fn closed_system_bound(omega: f64) -> f64 {
    PI / (2.0 * omega)
}

/// Probability that a majority of `runs` independent executions answer
/// correctly; ties (even `runs`) are broken by a fair coin.
pub fn majority_vote_success(p: f64, runs: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("per-run probability must lie in [0, 1], got {p}"));
    }
    if runs == 0 {
        return invalid("at least one run is needed");
    }
    let k = runs as usize;
    let mut total = 0.0;
    let mut binom = 1.0_f64;
    for j in 0..=k {
        if j > 0 {
            binom *= (k - j + 1) as f64 / j as f64;
        }
        let term = binom * p.powi(j as i32) * (1.0 - p).powi((k - j) as i32);
        if 2 * j > k {
            total += term;
        } else if 2 * j == k {
            total += 0.5 * term;
        }
    }
    Ok(total)
}

/// Smallest odd number of runs whose majority vote reaches `target`.
pub fn runs_for_target(p: f64, target: f64, max_runs: u32) -> Result<Option<u32>> {
    if !(0.0..1.0).contains(&target) {
        return invalid(format!("target must lie in [0, 1), got {target}"));
    }
    let mut k = 1;
    while k <= max_runs {
        if majority_vote_success(p, k)? >= target {
            return Ok(Some(k));
        }
        k += 2;
    }
    Ok(None)
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedForms {
    pub big_f: f64,
    pub eigenvalues: [C64; 4],
    pub p_plus: f64,
    pub p_minus: f64,
    pub closed_system_bound: f64,
}

pub fn closed_forms(inst: &DjInstance, t_total: f64) -> Result<ClosedForms> {
    let l = inst.single_lambda()?;
    let (p_plus, p_minus) = success_probabilities(t_total, l, inst.omega, &inst.f)?;
    Ok(ClosedForms {
        big_f: inst.f.big_f().unwrap_or(0.0),
        eigenvalues: eigenvalues_analytic(l, inst.omega),
        p_plus,
        p_minus,
        closed_system_bound: closed_system_bound(inst.omega),
    })
}
