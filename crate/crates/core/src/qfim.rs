//! Quantum Fisher information of a parameterized circuit and the
//! zero-eigenvalue pruning of redundant parameters.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::genome::Genome;
use crate::simulator::{run_circuit, statevector_jacobian, Circuit, StateVector};

/// Relative threshold under which an eigenvalue is counted as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

/// Real symmetric positive semi-definite matrix over the circuit parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct QfimMatrix(DMatrix<f64>);

impl QfimMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        Ok(QfimMatrix(m))
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                actual: r.len(),
            });
        }
        Ok(QfimMatrix(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim() == 0 {
            return Vec::new();
        }
        let mut eig: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eig.sort_by(f64::total_cmp);
        eig
    }

    /// Principal submatrix over `keep` (indices into this matrix).
    pub fn submatrix(&self, keep: &[usize]) -> QfimMatrix {
        QfimMatrix(DMatrix::from_fn(keep.len(), keep.len(), |i, j| {
            self.0[(keep[i], keep[j])]
        }))
    }

    /// `dim − zero-count`.
    pub fn rank(&self, tol: f64) -> usize {
        self.dim() - count_zero_eigs(self, tol)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (self.0[(i, j)] - self.0[(j, i)]).abs())
            .fold(0.0, f64::max)
    }
}

/// Pure-state QFIM `F_jk = 4 Re[⟨∂_jψ|∂_kψ⟩ − ⟨∂_jψ|ψ⟩⟨ψ|∂_kψ⟩]`.
pub fn compute_qfim(circuit: &Circuit, params: &[f64], input: &StateVector) -> Result<QfimMatrix> {
    if circuit.n_params() == 0 {
        return Err(Error::Empty("parameter set: QFIM needs at least one parameter"));
    }
    let psi = run_circuit(circuit, params, input)?;
    let jac = statevector_jacobian(circuit, params, input)?;
    let overlaps: Vec<_> = jac.iter().map(|d| psi.inner(d)).collect();
    let n = jac.len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let value = 4.0 * (jac[j].inner(&jac[k]) - overlaps[j].conj() * overlaps[k]).re;
            m[(j, k)] = value;
            m[(k, j)] = value;
        }
    }
    Ok(QfimMatrix(m))
}

/// Number of eigenvalues `λ < tol · max(λ_max, 1)`.
pub fn count_zero_eigs(f: &QfimMatrix, tol: f64) -> usize {
    let eig = f.eigenvalues();
    let scale = eig.last().copied().unwrap_or(0.0).max(1.0);
    eig.iter().filter(|&&l| l < tol * scale).count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneConfig {
    pub tol: f64,
    /// Independent random parameter draws. With several, an eigenvalue counts
    /// as zero only when it is zero for every draw (the minimum zero-count).
    pub draws: usize,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            tol: DEFAULT_ZERO_TOL,
            draws: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneResult {
    /// Original parameter indices removed, ascending.
    pub removed: Vec<usize>,
    /// Zero-count before pruning followed by the zero-count after each
    /// committed removal. Empty when the circuit has no parameters.
    pub zero_count_trace: Vec<usize>,
    /// Input genome with the removed parameterized genes made recessive.
    pub pruned_genome: Genome,
    /// Parameter count before pruning.
    pub initial_params: usize,
    /// The matrices the decisions were made on, one per draw.
    pub qfims: Vec<QfimMatrix>,
}

impl PruneResult {
    pub fn kept(&self) -> Vec<usize> {
        (0..self.initial_params).filter(|i| !self.removed.contains(i)).collect()
    }
}

fn zero_count(qfims: &[QfimMatrix], keep: &[usize], tol: f64) -> usize {
    if keep.is_empty() {
        return 0;
    }
    qfims
        .iter()
        .map(|f| count_zero_eigs(&f.submatrix(keep), tol))
        .min()
        .unwrap_or(0)
}

/// Removes redundant parameters with [`PruneConfig::default`].
pub fn prune_redundant<R: Rng + ?Sized>(genome: &Genome, input: &StateVector, rng: &mut R) -> Result<PruneResult> {
    prune_redundant_with(genome, input, rng, &PruneConfig::default())
}

/// Zero-eigenvalue pruning at random parameters `θ ~ U[0, 2π)`.
///
/// Row `k` of the current matrix is tentatively deleted (with its column);
/// the deletion is committed if the zero-count drops, in which case `k`
/// now names the next surviving parameter. Otherwise the row is restored and
/// `k` advances. Stops once the zero-count reaches 0 or `k` passes the last
/// row.
pub fn prune_redundant_with<R: Rng + ?Sized>(
    genome: &Genome,
    input: &StateVector,
    rng: &mut R,
    cfg: &PruneConfig,
) -> Result<PruneResult> {
    let circuit = genome.to_circuit();
    let n_params = circuit.n_params();
    if n_params == 0 {
        return Ok(PruneResult {
            removed: Vec::new(),
            zero_count_trace: Vec::new(),
            pruned_genome: genome.clone(),
            initial_params: 0,
            qfims: Vec::new(),
        });
    }
    let qfims = (0..cfg.draws.max(1))
        .map(|_| {
            let theta: Vec<f64> = (0..n_params).map(|_| rng.gen_range(0.0..TAU)).collect();
            compute_qfim(&circuit, &theta, input)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut alive: Vec<usize> = (0..n_params).collect();
    let mut zeros = zero_count(&qfims, &alive, cfg.tol);
    let mut trace = vec![zeros];
    let mut removed = Vec::new();
    let mut k = 0;
    while zeros > 0 && k < alive.len() {
        let candidate: Vec<usize> = alive
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k)
            .map(|(_, &p)| p)
            .collect();
        let probe = zero_count(&qfims, &candidate, cfg.tol);
        if probe < zeros {
            removed.push(alive[k]);
            alive = candidate;
            zeros = probe;
            trace.push(zeros);
        } else {
            k += 1;
        }
    }

    let mut pruned_genome = genome.clone();
    let gene_of_param = genome.param_gene_indices();
    for &p in &removed {
        pruned_genome.genes_mut()[gene_of_param[p]].included = false;
    }
    Ok(PruneResult {
        removed,
        zero_count_trace: trace,
        pruned_genome,
        initial_params: n_params,
        qfims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::Gene;
    use crate::simulator::{init_state, GateKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plus() -> StateVector {
        let mut c = Circuit::new(1).unwrap();
        c.single(GateKind::H, 0).unwrap();
        run_circuit(&c, &[], &init_state(1).unwrap()).unwrap()
    }

    fn one_gate(kind: GateKind) -> Circuit {
        let mut c = Circuit::new(1).unwrap();
        c.single(kind, 0).unwrap();
        c
    }

    #[test]
    fn qfim_of_rz_on_eigenstate_is_zero() {
        let f = compute_qfim(&one_gate(GateKind::Rz), &[0.9], &init_state(1).unwrap()).unwrap();
        assert_eq!(f.dim(), 1);
        assert!(f.get(0, 0).abs() < 1e-14);
    }

    #[test]
    fn qfim_of_rx_is_one() {
        for theta in [0.0, 0.5, 2.0, 5.5] {
            let f = compute_qfim(&one_gate(GateKind::Rx), &[theta], &init_state(1).unwrap()).unwrap();
            assert!((f.get(0, 0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn qfim_of_repeated_generator_is_rank_one() {
        let mut c = Circuit::new(1).unwrap();
        c.single(GateKind::Rz, 0).unwrap().single(GateKind::Rz, 0).unwrap();
        let f = compute_qfim(&c, &[0.4, 1.7], &plus()).unwrap();
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((f.get(i, j) - 1.0).abs() < 1e-12);
        }
        assert_eq!(count_zero_eigs(&f, DEFAULT_ZERO_TOL), 1);
    }

    #[test]
    fn qfim_needs_parameters() {
        let c = one_gate(GateKind::H);
        assert!(matches!(
            compute_qfim(&c, &[], &init_state(1).unwrap()),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn zero_eig_counts() {
        let tol = DEFAULT_ZERO_TOL;
        assert_eq!(count_zero_eigs(&QfimMatrix::from_rows(&[&[0.0]]).unwrap(), tol), 1);
        assert_eq!(
            count_zero_eigs(&QfimMatrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap(), tol),
            1
        );
        let id = QfimMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap();
        assert_eq!(count_zero_eigs(&id, tol), 0);
        assert_eq!(id.rank(tol), 3);
    }

    fn genome_1q(kinds: &[GateKind]) -> Genome {
        // single-qubit gates on q0 of a 2-qubit register
        Genome::new(2, kinds.iter().map(|&k| Gene::new(k, 0, true)).collect()).unwrap()
    }

    fn lift(state: &StateVector) -> StateVector {
        // state ⊗ |0⟩
        let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); 4];
        amps[0] = state.amplitudes()[0];
        amps[2] = state.amplitudes()[1];
        StateVector::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn prune_lone_rz_on_zero_state() {
        let genome = genome_1q(&[GateKind::Rz]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = prune_redundant(&genome, &init_state(2).unwrap(), &mut rng).unwrap();
        assert_eq!(r.removed, vec![0]);
        assert_eq!(r.zero_count_trace, vec![1, 0]);
        assert_eq!(r.pruned_genome.to_circuit().n_params(), 0);
    }

    #[test]
    fn prune_keeps_lone_rx() {
        let genome = genome_1q(&[GateKind::Rx]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = prune_redundant(&genome, &init_state(2).unwrap(), &mut rng).unwrap();
        assert!(r.removed.is_empty());
        assert_eq!(r.zero_count_trace, vec![0]);
        assert_eq!(r.pruned_genome, genome);
    }

    #[test]
    fn prune_redundant_rz_pair() {
        // Hand trace: F = [[1,1],[1,1]], E = 1. Deleting row 0 leaves [[1]], E' = 0 < 1:
        // commit, record parameter 0, E = 0, loop ends.
        let genome = genome_1q(&[GateKind::Rz, GateKind::Rz]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = prune_redundant(&genome, &lift(&plus()), &mut rng).unwrap();
        assert_eq!(r.removed, vec![0]);
        assert_eq!(r.zero_count_trace, vec![1, 0]);
        let survivor = r.qfims[0].submatrix(&r.kept());
        assert!((survivor.get(0, 0) - 1.0).abs() < 1e-12);
        assert!(!r.pruned_genome.genes()[0].included);
        assert!(r.pruned_genome.genes()[1].included);
    }

    #[test]
    fn prune_parameter_free_genome_is_noop() {
        let genome = genome_1q(&[GateKind::H]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = prune_redundant(&genome, &init_state(2).unwrap(), &mut rng).unwrap();
        assert!(r.removed.is_empty());
        assert!(r.zero_count_trace.is_empty());
    }

    #[test]
    fn multiple_draws_take_min_zero_count() {
        let genome = genome_1q(&[GateKind::Rz, GateKind::Rz]);
        let cfg = PruneConfig {
            tol: DEFAULT_ZERO_TOL,
            draws: 3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = prune_redundant_with(&genome, &lift(&plus()), &mut rng, &cfg).unwrap();
        assert_eq!(r.qfims.len(), 3);
        assert_eq!(r.removed, vec![0]);
    }
}
