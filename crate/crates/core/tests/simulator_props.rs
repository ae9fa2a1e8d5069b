mod common;

use common::*;
use eqas::simulator::{
    apply_gate, expectation_and_gradient, loss_gradient, run_circuit, statevector_jacobian, GateInstance, GateKind,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn unitarity_over_random_gate_applications() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..10_000 {
        let n = rng.gen_range(1..=4);
        let state = random_state(&mut rng, n);
        let circuit = random_circuit(&mut rng, n, 1);
        let gate: GateInstance = circuit.gates()[0];
        let theta = gate.param_slot.map(|_| rng.gen_range(-10.0..10.0));
        let out = apply_gate(&state, &gate, theta).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-10, "trial {trial}: norm {}", out.norm());
    }
}

#[test]
fn gradient_matches_finite_differences_on_100_circuits() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..100 {
        let n = rng.gen_range(1..=4);
        let n_params = rng.gen_range(1..=12);
        let n_fixed = rng.gen_range(0..6);
        let circuit = random_param_circuit(&mut rng, n, n_params, n_fixed);
        let params = random_params(&mut rng, n_params);
        let input = random_state(&mut rng, n);
        let readout = rng.gen_range(0..n);
        let grad = loss_gradient(&circuit, &params, &input, readout).unwrap();
        let fd = fd_gradient(&params, 1e-5, |p| {
            run_circuit(&circuit, p, &input)
                .unwrap()
                .expectation_z(readout)
                .unwrap()
        });
        for (k, (g, f)) in grad.iter().zip(&fd).enumerate() {
            assert!(
                (g - f).abs() <= 1e-5 * f.abs().max(1e-2),
                "case {case}, param {k}: adjoint {g} vs fd {f} on {circuit}"
            );
        }
    }
}

#[test]
fn four_qubit_eight_param_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let circuit = random_param_circuit(&mut rng, 4, 8, 4);
    let params = random_params(&mut rng, 8);
    let input = random_state(&mut rng, 4);
    let (value, grad) = expectation_and_gradient(&circuit, &params, &input, 0).unwrap();
    let direct = run_circuit(&circuit, &params, &input)
        .unwrap()
        .expectation_z(0)
        .unwrap();
    assert!((value - direct).abs() < 1e-14);
    let fd = fd_gradient(&params, 1e-5, |p| {
        run_circuit(&circuit, p, &input).unwrap().expectation_z(0).unwrap()
    });
    for (g, f) in grad.iter().zip(&fd) {
        assert!((g - f).abs() <= 1e-5 * f.abs().max(1e-2));
    }
}

#[test]
fn parameter_free_circuit_has_empty_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let circuit = random_param_circuit(&mut rng, 3, 0, 5);
    let input = random_state(&mut rng, 3);
    assert!(loss_gradient(&circuit, &[], &input, 1).unwrap().is_empty());
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let n = rng.gen_range(1..=3);
        let np = rng.gen_range(1..=6);
        let circuit = random_param_circuit(&mut rng, n, np, 3);
        let params = random_params(&mut rng, np);
        let input = random_state(&mut rng, n);
        let jac = statevector_jacobian(&circuit, &params, &input).unwrap();
        let h = 1e-6;
        for k in 0..np {
            let mut plus = params.clone();
            let mut minus = params.clone();
            plus[k] += h;
            minus[k] -= h;
            let sp = run_circuit(&circuit, &plus, &input).unwrap();
            let sm = run_circuit(&circuit, &minus, &input).unwrap();
            for (i, d) in jac[k].amplitudes().iter().enumerate() {
                let fd = (sp.amplitudes()[i] - sm.amplitudes()[i]) / (2.0 * h);
                assert!((d - fd).norm() < 1e-7, "param {k} amp {i}: {d} vs {fd}");
            }
        }
    }
}

proptest! {
    #![proptest_config(pt(200))]

    #[test]
    fn matches_dense_matrix_oracle(seed in any::<u64>(), n in 1usize..=3, n_gates in 0usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let circuit = random_circuit(&mut rng, n, n_gates);
        let params = random_params(&mut rng, circuit.n_params());
        let input = random_state(&mut rng, n);
        let fast = run_circuit(&circuit, &params, &input).unwrap();
        let dense = dense_run(&circuit, &params, &input);
        for (a, b) in fast.amplitudes().iter().zip(&dense) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn composition_is_sequential_application(seed in any::<u64>(), n in 1usize..=4, g1 in 0usize..8, g2 in 0usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_circuit(&mut rng, n, g1);
        let b = random_circuit(&mut rng, n, g2);
        let pa = random_params(&mut rng, a.n_params());
        let pb = random_params(&mut rng, b.n_params());
        let input = random_state(&mut rng, n);
        let joined = a.concat(&b).unwrap();
        let params: Vec<f64> = pa.iter().chain(&pb).copied().collect();
        let whole = run_circuit(&joined, &params, &input).unwrap();
        let staged = run_circuit(&b, &pb, &run_circuit(&a, &pa, &input).unwrap()).unwrap();
        prop_assert_eq!(whole, staged);
    }

    #[test]
    fn jacobian_is_orthogonal_to_state(seed in any::<u64>(), n in 1usize..=4, np in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let circuit = random_param_circuit(&mut rng, n, np, 2);
        let params = random_params(&mut rng, np);
        let input = random_state(&mut rng, n);
        let psi = run_circuit(&circuit, &params, &input).unwrap();
        for d in statevector_jacobian(&circuit, &params, &input).unwrap() {
            prop_assert!(psi.inner(&d).re.abs() < 1e-10);
        }
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let circuit = random_circuit(&mut rng, 3, 12);
        let params = random_params(&mut rng, circuit.n_params());
        let input = random_state(&mut rng, 3);
        let a = run_circuit(&circuit, &params, &input).unwrap();
        let b = run_circuit(&circuit, &params, &input).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn gate_matrices_are_unitary() {
    for kind in GateKind::ALL {
        let m = gate_matrix(kind, 0.7);
        let prod = m.adjoint() * &m;
        assert!((prod - nalgebra::DMatrix::identity(2, 2)).norm() < 1e-14, "{kind}");
    }
}
