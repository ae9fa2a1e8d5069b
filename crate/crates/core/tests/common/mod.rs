//! Shared generators and independent oracles for the integration tests.
#![allow(dead_code)]

use eqas::simulator::{run_circuit, Circuit, GateKind, StateVector};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Random circuit on `n` qubits with `n_gates` gates drawn from the full
/// pool; two-qubit gates use a random control and a random distinct target.
pub fn random_circuit<R: Rng>(rng: &mut R, n: usize, n_gates: usize) -> Circuit {
    let mut circuit = Circuit::new(n).unwrap();
    for _ in 0..n_gates {
        let kind = if n == 1 {
            GateKind::SINGLE_QUBIT[rng.gen_range(0..4)]
        } else {
            GateKind::ALL[rng.gen_range(0..8)]
        };
        if kind.is_two_qubit() {
            let control = rng.gen_range(0..n);
            let target = (control + rng.gen_range(1..n)) % n;
            circuit.controlled(kind, control, target).unwrap();
        } else {
            circuit.single(kind, rng.gen_range(0..n)).unwrap();
        }
    }
    circuit
}

/// Random circuit with exactly `n_params` parameterized gates mixed with
/// `n_fixed` parameter-free ones.
pub fn random_param_circuit<R: Rng>(rng: &mut R, n: usize, n_params: usize, n_fixed: usize) -> Circuit {
    let mut kinds: Vec<bool> = (0..n_params).map(|_| true).chain((0..n_fixed).map(|_| false)).collect();
    for i in (1..kinds.len()).rev() {
        kinds.swap(i, rng.gen_range(0..=i));
    }
    let mut circuit = Circuit::new(n).unwrap();
    for parameterized in kinds {
        let pool: Vec<GateKind> = GateKind::ALL
            .iter()
            .copied()
            .filter(|k| k.is_parameterized() == parameterized && (n > 1 || !k.is_two_qubit()))
            .collect();
        let kind = pool[rng.gen_range(0..pool.len())];
        if kind.is_two_qubit() {
            let control = rng.gen_range(0..n);
            let target = (control + rng.gen_range(1..n)) % n;
            circuit.controlled(kind, control, target).unwrap();
        } else {
            circuit.single(kind, rng.gen_range(0..n)).unwrap();
        }
    }
    circuit
}

/// Haar-ish random normalized state from Gaussian amplitudes.
pub fn random_state<R: Rng>(rng: &mut R, n: usize) -> StateVector {
    let mut amps: Vec<Complex64> = (0..1 << n).map(|_| c(gaussian(rng), gaussian(rng))).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    StateVector::from_amplitudes(amps).unwrap()
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn random_params<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()
}

/// 2x2 matrix of a single-qubit gate, written out from its definition.
pub fn gate_matrix(kind: GateKind, theta: f64) -> DMatrix<Complex64> {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let m = match kind {
        GateKind::Rx | GateKind::Crx => [c(co, 0.0), c(0.0, -si), c(0.0, -si), c(co, 0.0)],
        GateKind::Ry | GateKind::Cry => [c(co, 0.0), c(-si, 0.0), c(si, 0.0), c(co, 0.0)],
        GateKind::Rz | GateKind::Crz => [c(co, -si), c(0.0, 0.0), c(0.0, 0.0), c(co, si)],
        GateKind::H => [c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)],
        GateKind::Cnot => [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
    };
    DMatrix::from_row_slice(2, 2, &m)
}

fn kron_all(factors: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    factors
        .iter()
        .skip(1)
        .fold(factors[0].clone(), |acc, f| acc.kronecker(f))
}

/// Full `2^n x 2^n` matrix of one gate; qubit 0 is the leftmost factor.
pub fn dense_gate(n: usize, kind: GateKind, control: Option<usize>, target: usize, theta: f64) -> DMatrix<Complex64> {
    let eye = DMatrix::<Complex64>::identity(2, 2);
    let u = gate_matrix(kind, theta);
    match control {
        None => {
            let factors: Vec<_> = (0..n)
                .map(|q| if q == target { u.clone() } else { eye.clone() })
                .collect();
            kron_all(&factors)
        }
        Some(ctrl) => {
            let p0 = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
            let p1 = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
            let off: Vec<_> = (0..n)
                .map(|q| if q == ctrl { p0.clone() } else { eye.clone() })
                .collect();
            let on: Vec<_> = (0..n)
                .map(|q| {
                    if q == ctrl {
                        p1.clone()
                    } else if q == target {
                        u.clone()
                    } else {
                        eye.clone()
                    }
                })
                .collect();
            kron_all(&off) + kron_all(&on)
        }
    }
}

/// Product of dense gate matrices applied to `input`.
pub fn dense_run(circuit: &Circuit, params: &[f64], input: &StateVector) -> Vec<Complex64> {
    let n = circuit.n_qubits();
    let mut v = nalgebra::DVector::from_column_slice(input.amplitudes());
    for g in circuit.gates() {
        let theta = g.param_slot.map_or(0.0, |s| params[s]);
        v = dense_gate(n, g.kind, g.control, g.target, theta) * v;
    }
    v.iter().copied().collect()
}

/// Central finite-difference gradient of `f`.
pub fn fd_gradient(params: &[f64], step: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..params.len())
        .map(|k| {
            let mut plus = params.to_vec();
            let mut minus = params.to_vec();
            plus[k] += step;
            minus[k] -= step;
            (f(&plus) - f(&minus)) / (2.0 * step)
        })
        .collect()
}

/// QFIM from the fidelity `|⟨ψ(θ)|ψ(θ+δ)⟩|²` by central second differences:
/// `F_jk = -2 ∂²fid/∂δ_j∂δ_k` at `δ = 0`.
pub fn fidelity_qfim(circuit: &Circuit, params: &[f64], input: &StateVector, h: f64) -> Vec<Vec<f64>> {
    let psi = run_circuit(circuit, params, input).unwrap();
    let fid = |delta: &[f64]| {
        let shifted: Vec<f64> = params.iter().zip(delta).map(|(p, d)| p + d).collect();
        psi.inner(&run_circuit(circuit, &shifted, input).unwrap()).norm_sqr()
    };
    let n = params.len();
    let mut f = vec![vec![0.0; n]; n];
    for j in 0..n {
        for k in 0..n {
            let mut d = vec![0.0; n];
            let mut eval = |sj: f64, sk: f64| {
                d.iter_mut().for_each(|x| *x = 0.0);
                d[j] += sj * h;
                d[k] += sk * h;
                fid(&d)
            };
            let second = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h * h);
            f[j][k] = -2.0 * second;
        }
    }
    f
}

/// Relative error with an absolute floor for entries near zero.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(a.abs()).max(1e-3)
}

/// Block-layout genome with each gene's INCLUDED bit set by a fair coin.
pub fn random_masked_genome<R: Rng>(rng: &mut R, n: usize, blocks: usize) -> eqas::genome::Genome {
    let layout = eqas::genome::LayoutSpec::blocks(n, blocks, 0);
    let g = eqas::genome::random_genome(&layout, rng).unwrap();
    let genes = g
        .genes()
        .iter()
        .map(|gene| eqas::genome::Gene::new(gene.kind, gene.place, rng.gen_bool(0.5)))
        .collect();
    eqas::genome::Genome::new(n, genes).unwrap()
}

/// Proptest settings without on-disk regression files.
pub fn pt(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases,
        failure_persistence: None,
        ..Default::default()
    }
}
