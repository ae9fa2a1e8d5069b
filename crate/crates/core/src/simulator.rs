//! Dense statevector simulation of the eight-gate operation pool.
//!
//! Conventions:
//! - `R_a(θ) = exp(-iθ a / 2)` for `a ∈ {X, Y, Z}`.
//! - Controlled rotations apply `R_a(θ)` to the target when the control is `|1⟩`.
//! - Qubit 0 is the most significant bit of the basis index, so on two qubits
//!   `|q0 q1⟩ = |10⟩` is amplitude index 2.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// The gate alphabet. Discriminants are the 3-bit TYPE codes of a gene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum GateKind {
    Rx = 0b000,
    Ry = 0b001,
    Rz = 0b010,
    H = 0b011,
    Cnot = 0b100,
    Crx = 0b101,
    Cry = 0b110,
    Crz = 0b111,
}

impl GateKind {
    pub const ALL: [GateKind; 8] = [
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::H,
        GateKind::Cnot,
        GateKind::Crx,
        GateKind::Cry,
        GateKind::Crz,
    ];

    pub const SINGLE_QUBIT: [GateKind; 4] = [GateKind::Rx, GateKind::Ry, GateKind::Rz, GateKind::H];
    pub const TWO_QUBIT: [GateKind; 4] = [GateKind::Cnot, GateKind::Crx, GateKind::Cry, GateKind::Crz];

    pub fn from_code(code: u8) -> Option<GateKind> {
        GateKind::ALL.get(code as usize).copied()
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn is_parameterized(self) -> bool {
        !matches!(self, GateKind::H | GateKind::Cnot)
    }

    pub fn is_two_qubit(self) -> bool {
        self.code() & 0b100 != 0
    }

    fn axis(self) -> Option<Pauli> {
        match self {
            GateKind::Rx | GateKind::Crx => Some(Pauli::X),
            GateKind::Ry | GateKind::Cry => Some(Pauli::Y),
            GateKind::Rz | GateKind::Crz => Some(Pauli::Z),
            GateKind::H | GateKind::Cnot => None,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::H => "H",
            GateKind::Cnot => "CNOT",
            GateKind::Crx => "CRX",
            GateKind::Cry => "CRY",
            GateKind::Crz => "CRZ",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pauli {
    X,
    Y,
    Z,
}

type Mat2 = [[Complex64; 2]; 2];

fn rotation(axis: Pauli, theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    match axis {
        Pauli::X => [
            [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
            [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
        ],
        Pauli::Y => [
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ],
        Pauli::Z => [[Complex64::new(c, -s), ZERO], [ZERO, Complex64::new(c, s)]],
    }
}

fn pauli(axis: Pauli) -> Mat2 {
    let i = Complex64::new(0.0, 1.0);
    match axis {
        Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
        Pauli::Y => [[ZERO, -i], [i, ZERO]],
        Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

const HADAMARD: Mat2 = [
    [Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(FRAC_1_SQRT_2, 0.0)],
    [Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(-FRAC_1_SQRT_2, 0.0)],
];

const PAULI_X: Mat2 = [[ZERO, ONE], [ONE, ZERO]];

/// One gate placed on the register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateInstance {
    pub kind: GateKind,
    /// Control qubit; `Some` exactly for two-qubit gates.
    pub control: Option<usize>,
    pub target: usize,
    /// Index into the circuit's parameter vector; `Some` exactly for rotations.
    pub param_slot: Option<usize>,
}

impl GateInstance {
    fn check(&self, n_qubits: usize) -> Result<()> {
        if self.target >= n_qubits {
            return Err(Error::QubitIndex {
                index: self.target,
                n_qubits,
            });
        }
        match (self.kind.is_two_qubit(), self.control) {
            (true, Some(c)) if c >= n_qubits => Err(Error::QubitIndex { index: c, n_qubits }),
            (true, Some(c)) if c == self.target => Err(Error::InvalidGate(format!(
                "{} control and target are both q{c}",
                self.kind
            ))),
            (true, None) => Err(Error::InvalidGate(format!("{} needs a control qubit", self.kind))),
            (false, Some(_)) => Err(Error::InvalidGate(format!(
                "{} is single-qubit but has a control",
                self.kind
            ))),
            _ => Ok(()),
        }?;
        if self.kind.is_parameterized() != self.param_slot.is_some() {
            return Err(Error::InvalidGate(format!(
                "{} parameter slot must be present iff the gate is parameterized",
                self.kind
            )));
        }
        Ok(())
    }
}

/// An executable gate sequence with parameter slots `0..n_params` assigned in
/// gate order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<GateInstance>,
    n_params: usize,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        Ok(Circuit {
            n_qubits,
            gates: Vec::new(),
            n_params: 0,
        })
    }

    /// Appends a gate; two-qubit kinds require `control`.
    pub fn push(&mut self, kind: GateKind, control: Option<usize>, target: usize) -> Result<&mut Self> {
        let gate = GateInstance {
            kind,
            control,
            target,
            param_slot: kind.is_parameterized().then_some(self.n_params),
        };
        gate.check(self.n_qubits)?;
        if gate.param_slot.is_some() {
            self.n_params += 1;
        }
        self.gates.push(gate);
        Ok(self)
    }

    pub fn single(&mut self, kind: GateKind, qubit: usize) -> Result<&mut Self> {
        self.push(kind, None, qubit)
    }

    pub fn controlled(&mut self, kind: GateKind, control: usize, target: usize) -> Result<&mut Self> {
        self.push(kind, Some(control), target)
    }

    /// `self ++ other`, renumbering `other`'s parameter slots after ours.
    pub fn concat(&self, other: &Circuit) -> Result<Circuit> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                actual: other.n_qubits,
            });
        }
        let mut out = self.clone();
        for g in &other.gates {
            out.push(g.kind, g.control, g.target)?;
        }
        Ok(out)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[GateInstance] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    fn check_inputs(&self, params: &[f64], input: &StateVector) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::Dimension {
                expected: self.n_params,
                actual: params.len(),
            });
        }
        if input.n_qubits() != self.n_qubits {
            return Err(Error::Dimension {
                expected: 1 << self.n_qubits,
                actual: input.len(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .gates
            .iter()
            .map(|g| match g.control {
                Some(c) => format!("{}(q{}->q{})", g.kind, c, g.target),
                None => format!("{}(q{})", g.kind, g.target),
            })
            .collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Complex amplitude vector of length `2^n_qubits`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[0] = ONE;
        Ok(StateVector { n_qubits, amplitudes })
    }

    /// Wraps raw amplitudes. The length must be a power of two; normalization
    /// is the caller's business.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Dimension {
                expected: len.next_power_of_two().max(2),
                actual: len,
            });
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        Ok(StateVector { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    /// Applies `gate` in place. `theta` must be present iff the gate is
    /// parameterized.
    pub fn apply(&mut self, gate: &GateInstance, theta: Option<f64>) -> Result<()> {
        gate.check(self.n_qubits)?;
        match (gate.kind.is_parameterized(), theta) {
            (true, None) => {
                return Err(Error::InvalidGate(format!("{} requires an angle", gate.kind)));
            }
            (false, Some(_)) => {
                return Err(Error::InvalidGate(format!("{} takes no angle", gate.kind)));
            }
            _ => {}
        }
        self.apply_unchecked(gate, theta.unwrap_or(0.0));
        Ok(())
    }

    fn apply_unchecked(&mut self, gate: &GateInstance, theta: f64) {
        let m = match gate.kind.axis() {
            Some(axis) => rotation(axis, theta),
            None if gate.kind == GateKind::H => HADAMARD,
            None => PAULI_X,
        };
        self.apply_matrix(&m, gate.control, gate.target);
    }

    fn apply_matrix(&mut self, m: &Mat2, control: Option<usize>, target: usize) {
        let t = self.mask(target);
        let c = control.map(|q| self.mask(q)).unwrap_or(0);
        for i in 0..self.amplitudes.len() {
            if i & t != 0 || i & c != c {
                continue;
            }
            let j = i | t;
            let (a, b) = (self.amplitudes[i], self.amplitudes[j]);
            self.amplitudes[i] = m[0][0] * a + m[0][1] * b;
            self.amplitudes[j] = m[1][0] * a + m[1][1] * b;
        }
    }

    /// Applies the inverse of `gate` at angle `theta`.
    fn apply_inverse_unchecked(&mut self, gate: &GateInstance, theta: f64) {
        self.apply_unchecked(gate, -theta);
    }

    /// Multiplies by the Hermitian generator `G` of a rotation gate, where
    /// `U(θ) = exp(-iθG/2)`: the Pauli on the target, projected onto
    /// control `|1⟩` for controlled kinds.
    fn apply_generator(&mut self, gate: &GateInstance) {
        let axis = gate.kind.axis().expect("generator of a parameter-free gate");
        let c = gate.control.map(|q| self.mask(q)).unwrap_or(0);
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i & c != c {
                *a = ZERO;
            }
        }
        self.apply_matrix(&pauli(axis), gate.control, gate.target);
    }

    /// `⟨Z⟩` on `qubit`: `Σ_b (±1)|amp_b|²`, `+` where the qubit's bit is 0.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(self.expectation_z_unchecked(qubit))
    }

    fn expectation_z_unchecked(&self, qubit: usize) -> f64 {
        let m = self.mask(qubit);
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| if i & m == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }

    fn apply_z(&mut self, qubit: usize) {
        let m = self.mask(qubit);
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i & m != 0 {
                *a = -*a;
            }
        }
    }
}

/// `|0…0⟩` on `n_qubits` qubits (1 ≤ n ≤ 12).
pub fn init_state(n_qubits: usize) -> Result<StateVector> {
    StateVector::zero(n_qubits)
}

/// Returns `gate` applied to a copy of `state`.
pub fn apply_gate(state: &StateVector, gate: &GateInstance, theta: Option<f64>) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply(gate, theta)?;
    Ok(out)
}

pub fn expectation_z(state: &StateVector, qubit: usize) -> Result<f64> {
    state.expectation_z(qubit)
}

fn theta_of(gate: &GateInstance, params: &[f64]) -> f64 {
    gate.param_slot.map(|s| params[s]).unwrap_or(0.0)
}

/// Applies every gate of `circuit` to `input` in list order.
pub fn run_circuit(circuit: &Circuit, params: &[f64], input: &StateVector) -> Result<StateVector> {
    circuit.check_inputs(params, input)?;
    let mut state = input.clone();
    for gate in circuit.gates() {
        state.apply_unchecked(gate, theta_of(gate, params));
    }
    Ok(state)
}

/// Exact `∂ψ/∂θ_k` for every parameter slot, by inserting `-iG/2` after
/// the differentiated gate.
pub fn statevector_jacobian(circuit: &Circuit, params: &[f64], input: &StateVector) -> Result<Vec<StateVector>> {
    circuit.check_inputs(params, input)?;
    let gates = circuit.gates();
    let mut jac = Vec::with_capacity(circuit.n_params());
    let mut state = input.clone();
    let minus_half_i = Complex64::new(0.0, -0.5);
    for (idx, gate) in gates.iter().enumerate() {
        state.apply_unchecked(gate, theta_of(gate, params));
        if gate.param_slot.is_none() {
            continue;
        }
        let mut d = state.clone();
        d.apply_generator(gate);
        d.amplitudes.iter_mut().for_each(|a| *a *= minus_half_i);
        for rest in &gates[idx + 1..] {
            d.apply_unchecked(rest, theta_of(rest, params));
        }
        jac.push(d);
    }
    Ok(jac)
}

/// `⟨Z_readout⟩` and its gradient in one forward/backward sweep (adjoint
/// differentiation).
pub fn expectation_and_gradient(
    circuit: &Circuit,
    params: &[f64],
    input: &StateVector,
    readout_qubit: usize,
) -> Result<(f64, Vec<f64>)> {
    circuit.check_inputs(params, input)?;
    if readout_qubit >= circuit.n_qubits() {
        return Err(Error::QubitIndex {
            index: readout_qubit,
            n_qubits: circuit.n_qubits(),
        });
    }
    let mut psi = run_circuit(circuit, params, input)?;
    let mut lambda = psi.clone();
    lambda.apply_z(readout_qubit);
    let value = psi.inner(&lambda).re;

    let mut grad = vec![0.0; circuit.n_params()];
    let mut scratch = psi.clone();
    for gate in circuit.gates().iter().rev() {
        let theta = theta_of(gate, params);
        if let Some(slot) = gate.param_slot {
            // d⟨O⟩/dθ = 2 Re⟨λ|(-iG/2)ψ⟩ = Im⟨λ|Gψ⟩
            scratch.amplitudes.copy_from_slice(&psi.amplitudes);
            scratch.apply_generator(gate);
            grad[slot] = lambda.inner(&scratch).im;
        }
        psi.apply_inverse_unchecked(gate, theta);
        lambda.apply_inverse_unchecked(gate, theta);
    }
    Ok((value, grad))
}

/// Gradient of `⟨Z_readout⟩` with respect to the circuit parameters.
pub fn loss_gradient(circuit: &Circuit, params: &[f64], input: &StateVector, readout_qubit: usize) -> Result<Vec<f64>> {
    expectation_and_gradient(circuit, params, input, readout_qubit).map(|(_, g)| g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_state(state: &StateVector, expected: &[Complex64]) {
        assert_eq!(state.len(), expected.len());
        for (a, b) in state.amplitudes().iter().zip(expected) {
            assert!((a - b).norm() < 1e-12, "{:?} vs {:?}", state.amplitudes(), expected);
        }
    }

    #[test]
    fn init_state_is_all_zeros_ket() {
        assert_state(&init_state(1).unwrap(), &[c(1.0, 0.0), c(0.0, 0.0)]);
        assert_state(&init_state(2).unwrap(), &[c(1.0, 0.0), ZERO, ZERO, ZERO]);
        let s = init_state(4).unwrap();
        assert_eq!(s.len(), 16);
        assert_eq!(s.amplitudes()[0], ONE);
        assert!(s.amplitudes()[1..].iter().all(|a| *a == ZERO));
        assert!(matches!(init_state(0), Err(Error::QubitCount(0))));
        assert!(matches!(init_state(13), Err(Error::QubitCount(13))));
    }

    #[test]
    fn single_gate_examples() {
        let mut circ = Circuit::new(1).unwrap();
        circ.single(GateKind::H, 0).unwrap();
        let s = apply_gate(&init_state(1).unwrap(), &circ.gates()[0], None).unwrap();
        assert_state(&s, &[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]);

        let mut circ = Circuit::new(1).unwrap();
        circ.single(GateKind::Rx, 0).unwrap();
        let s = apply_gate(&init_state(1).unwrap(), &circ.gates()[0], Some(PI)).unwrap();
        assert_state(&s, &[ZERO, c(0.0, -1.0)]);
    }

    #[test]
    fn controlled_gate_examples() {
        let mut circ = Circuit::new(2).unwrap();
        circ.controlled(GateKind::Cnot, 0, 1).unwrap();
        // |10⟩: q0 = 1 is the high bit
        let input = StateVector::from_amplitudes(vec![ZERO, ZERO, ONE, ZERO]).unwrap();
        let out = run_circuit(&circ, &[], &input).unwrap();
        assert_state(&out, &[ZERO, ZERO, ZERO, ONE]);

        let mut circ = Circuit::new(2).unwrap();
        circ.controlled(GateKind::Crz, 0, 1).unwrap();
        for theta in [0.0, 0.3, PI, 5.0] {
            let out = run_circuit(&circ, &[theta], &init_state(2).unwrap()).unwrap();
            assert_state(&out, &[ONE, ZERO, ZERO, ZERO]);
        }
    }

    #[test]
    fn theta_presence_is_enforced() {
        let mut circ = Circuit::new(2).unwrap();
        circ.single(GateKind::Rx, 0).unwrap().single(GateKind::H, 1).unwrap();
        let mut s = init_state(2).unwrap();
        assert!(s.apply(&circ.gates()[0], None).is_err());
        assert!(s.apply(&circ.gates()[1], Some(1.0)).is_err());
        let bad = GateInstance {
            kind: GateKind::H,
            control: None,
            target: 5,
            param_slot: None,
        };
        assert!(matches!(s.apply(&bad, None), Err(Error::QubitIndex { index: 5, .. })));
        assert!(Circuit::new(2).unwrap().controlled(GateKind::Cnot, 1, 1).is_err());
        assert!(Circuit::new(2).unwrap().single(GateKind::Cnot, 1).is_err());
    }

    #[test]
    fn run_circuit_examples() {
        let input = init_state(2).unwrap();
        let empty = Circuit::new(2).unwrap();
        assert_eq!(run_circuit(&empty, &[], &input).unwrap(), input);

        let mut bell = Circuit::new(2).unwrap();
        bell.single(GateKind::H, 0)
            .unwrap()
            .controlled(GateKind::Cnot, 0, 1)
            .unwrap();
        let out = run_circuit(&bell, &[], &input).unwrap();
        assert_state(&out, &[c(FRAC_1_SQRT_2, 0.0), ZERO, ZERO, c(FRAC_1_SQRT_2, 0.0)]);

        let mut rz = Circuit::new(1).unwrap();
        rz.single(GateKind::Rz, 0).unwrap();
        for theta in [0.0, 0.7, 2.0, -1.3] {
            let out = run_circuit(&rz, &[theta], &init_state(1).unwrap()).unwrap();
            assert_state(&out, &[Complex64::from_polar(1.0, -theta / 2.0), ZERO]);
            assert!((out.expectation_z(0).unwrap().abs() - 1.0).abs() < 1e-12);
        }

        assert!(matches!(
            run_circuit(&rz, &[], &init_state(1).unwrap()),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            run_circuit(&rz, &[0.1], &init_state(2).unwrap()),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn expectation_examples() {
        assert_eq!(init_state(1).unwrap().expectation_z(0).unwrap(), 1.0);
        let plus = StateVector::from_amplitudes(vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]).unwrap();
        assert!(plus.expectation_z(0).unwrap().abs() < 1e-15);
        assert!(plus.expectation_z(1).is_err());

        // RX(θ)|0⟩ = [cos θ/2, -i sin θ/2] by direct 2x2 algebra
        let mut rx = Circuit::new(1).unwrap();
        rx.single(GateKind::Rx, 0).unwrap();
        for theta in [0.0, 0.4, 1.9, PI, 4.4] {
            let oracle = [c((theta / 2.0).cos(), 0.0), c(0.0, -(theta / 2.0).sin())];
            let oracle_z = oracle[0].norm_sqr() - oracle[1].norm_sqr();
            let out = run_circuit(&rx, &[theta], &init_state(1).unwrap()).unwrap();
            assert_state(&out, &oracle);
            assert!((out.expectation_z(0).unwrap() - oracle_z).abs() < 1e-12);
            assert!((oracle_z - theta.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn qubit_zero_is_most_significant_bit() {
        let mut circ = Circuit::new(3).unwrap();
        circ.single(GateKind::Rx, 0).unwrap();
        let out = run_circuit(&circ, &[PI], &init_state(3).unwrap()).unwrap();
        // |100⟩ = index 4
        assert!((out.amplitudes()[4].norm() - 1.0).abs() < 1e-12);
        assert!((out.expectation_z(0).unwrap() + 1.0).abs() < 1e-12);
        assert!((out.expectation_z(2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jacobian_at_identity() {
        let mut rx = Circuit::new(1).unwrap();
        rx.single(GateKind::Rx, 0).unwrap();
        let jac = statevector_jacobian(&rx, &[0.0], &init_state(1).unwrap()).unwrap();
        assert_eq!(jac.len(), 1);
        assert_state(&jac[0], &[ZERO, c(0.0, -0.5)]);
    }

    #[test]
    fn gradient_of_rx_readout() {
        let mut rx = Circuit::new(1).unwrap();
        rx.single(GateKind::Rx, 0).unwrap();
        for theta in [0.0, 0.3, 1.0, 2.5, 4.0] {
            let (v, g) = expectation_and_gradient(&rx, &[theta], &init_state(1).unwrap(), 0).unwrap();
            assert!((v - theta.cos()).abs() < 1e-12);
            assert!((g[0] + theta.sin()).abs() < 1e-12);
        }
        let mut fixed = Circuit::new(2).unwrap();
        fixed
            .single(GateKind::H, 0)
            .unwrap()
            .controlled(GateKind::Cnot, 0, 1)
            .unwrap();
        assert!(loss_gradient(&fixed, &[], &init_state(2).unwrap(), 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn concat_renumbers_slots() {
        let mut a = Circuit::new(2).unwrap();
        a.single(GateKind::Rx, 0).unwrap();
        let mut b = Circuit::new(2).unwrap();
        b.single(GateKind::H, 1)
            .unwrap()
            .controlled(GateKind::Cry, 1, 0)
            .unwrap();
        let ab = a.concat(&b).unwrap();
        assert_eq!(ab.n_params(), 2);
        let slots: Vec<_> = ab.gates().iter().map(|g| g.param_slot).collect();
        assert_eq!(slots, vec![Some(0), None, Some(1)]);
    }
}
