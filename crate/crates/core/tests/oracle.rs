//! Cross-checks of the density-matrix engine against an independent
//! state-vector oracle.
//!
//! The oracle builds every gate's full `2^n x 2^n` unitary by Kronecker
//! products and applies it with a dense mat-vec, sharing no code with the
//! stride kernels under test. Noiseless circuits on pure states must agree
//! to 1e-10.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vqc_core::circuits::build_haa;
use vqc_core::sim::{rotation_matrix, Axis, DensityMatrix, Gate};

type C64 = Complex<f64>;

fn kron(a: &[C64], da: usize, b: &[C64], db: usize) -> Vec<C64> {
    let dim = da * db;
    let mut out = vec![C64::new(0.0, 0.0); dim * dim];
    for ia in 0..da {
        for ja in 0..da {
            for ib in 0..db {
                for jb in 0..db {
                    out[(ia * db + ib) * dim + (ja * db + jb)] = a[ia * da + ja] * b[ib * db + jb];
                }
            }
        }
    }
    out
}

fn identity(dim: usize) -> Vec<C64> {
    let mut m = vec![C64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        m[i * dim + i] = C64::new(1.0, 0.0);
    }
    m
}

/// Full unitary of a gate on an `n`-qubit register, index bit `q` = qubit
/// `q` (so qubit `n-1` is the most significant Kronecker factor).
fn full_unitary(gate: &Gate<f64>, n: usize) -> Vec<C64> {
    let dim = 1usize << n;
    match *gate {
        Gate::Rot { axis, qubit, angle } => {
            let u = rotation_matrix(axis, angle).to_vec();
            let mut total = vec![C64::new(1.0, 0.0)];
            let mut total_dim = 1usize;
            for q in (0..n).rev() {
                let factor = if q == qubit { u.clone() } else { identity(2) };
                total = kron(&total, total_dim, &factor, 2);
                total_dim *= 2;
            }
            total
        }
        Gate::Cz { a, b } => {
            let both = (1usize << a) | (1usize << b);
            let mut m = vec![C64::new(0.0, 0.0); dim * dim];
            for i in 0..dim {
                let sign = if i & both == both { -1.0 } else { 1.0 };
                m[i * dim + i] = C64::new(sign, 0.0);
            }
            m
        }
        Gate::Cnot { control, target } => {
            let mut m = vec![C64::new(0.0, 0.0); dim * dim];
            for j in 0..dim {
                let i = if j >> control & 1 == 1 { j ^ (1 << target) } else { j };
                m[i * dim + j] = C64::new(1.0, 0.0);
            }
            m
        }
    }
}

struct SvOracle {
    n: usize,
    amps: Vec<C64>,
}

impl SvOracle {
    fn new(n: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[0] = C64::new(1.0, 0.0);
        Self { n, amps }
    }

    fn apply(&mut self, gate: &Gate<f64>) {
        let dim = self.amps.len();
        let u = full_unitary(gate, self.n);
        let mut next = vec![C64::new(0.0, 0.0); dim];
        for i in 0..dim {
            for j in 0..dim {
                next[i] += u[i * dim + j] * self.amps[j];
            }
        }
        self.amps = next;
    }

    fn ground_expectation(&self, qubit: usize) -> f64 {
        let mask = 1usize << qubit;
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Outer product |psi><psi| for entrywise comparison.
    fn density(&self) -> Vec<C64> {
        let dim = self.amps.len();
        let mut rho = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                rho[i * dim + j] = self.amps[i] * self.amps[j].conj();
            }
        }
        rho
    }
}

fn random_gate(rng: &mut ChaCha8Rng, n: usize) -> Gate<f64> {
    let q = rng.gen_range(0..n);
    match rng.gen_range(0..5) {
        0 => Gate::rx(q, rng.gen_range(-3.2..3.2)),
        1 => Gate::ry(q, rng.gen_range(-3.2..3.2)),
        2 => Gate::rz(q, rng.gen_range(-3.2..3.2)),
        kind => {
            let mut p = rng.gen_range(0..n);
            while p == q {
                p = rng.gen_range(0..n);
            }
            if kind == 3 {
                Gate::cz(q, p)
            } else {
                Gate::cnot(q, p)
            }
        }
    }
}

#[test]
fn random_noiseless_circuits_match_state_vector_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..50 {
        let n = 4;
        let gate_count = rng.gen_range(1..=12);
        let mut sim = DensityMatrix::<f64>::ground_state(n).unwrap();
        let mut oracle = SvOracle::new(n);
        for _ in 0..gate_count {
            let gate = random_gate(&mut rng, n);
            sim.apply_gate(&gate).unwrap();
            oracle.apply(&gate);
        }
        for q in 0..n {
            let got = sim
                .expectation(&vqc_core::sim::Observable::ground_projector(q))
                .unwrap();
            let want = oracle.ground_expectation(q);
            assert!((got - want).abs() < 1e-10, "qubit {q}: {got} vs {want}");
        }
    }
}

#[test]
fn ry_half_pi_density_matches_oracle_outer_product() {
    let gate = Gate::ry(0, std::f64::consts::FRAC_PI_2);
    let mut sim = DensityMatrix::<f64>::ground_state(1).unwrap();
    sim.apply_gate(&gate).unwrap();
    let mut oracle = SvOracle::new(1);
    oracle.apply(&gate);
    let rho = oracle.density();
    for i in 0..2 {
        for j in 0..2 {
            let d = sim.entry(i, j) - rho[i * 2 + j];
            assert!(d.norm() < 1e-14);
        }
    }
    // Off-diagonal magnitude is exactly 1/2; the sign is fixed by the
    // exp(-i theta Y / 2) convention (positive here).
    assert!((sim.entry(0, 1).re - 0.5).abs() < 1e-14);
    assert!((sim.entry(0, 0).re - 0.5).abs() < 1e-14);
}

#[test]
fn compiled_haa_block_equals_raw_nonadjacent_circuit() {
    // The chain-routed block (SWAP insertions, CZ-native CNOTs) must act
    // exactly like the ideal all-to-all circuit it compiles:
    // RY rotations then CNOT(0,2) and CNOT(1,3).
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let template = build_haa::<f64>(1).unwrap();
    for _ in 0..5 {
        let params: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.2..3.2)).collect();

        let mut compiled = DensityMatrix::<f64>::ground_state(4).unwrap();
        template.apply_all(&mut compiled, &params).unwrap();

        let mut oracle = SvOracle::new(4);
        for (q, &theta) in params.iter().enumerate() {
            oracle.apply(&Gate::ry(q, theta));
        }
        oracle.apply(&Gate::cnot(0, 2));
        oracle.apply(&Gate::cnot(1, 3));

        for q in 0..4 {
            let got = compiled
                .expectation(&vqc_core::sim::Observable::ground_projector(q))
                .unwrap();
            let want = oracle.ground_expectation(q);
            assert!((got - want).abs() < 1e-10, "qubit {q}: {got} vs {want}");
        }
        let rho = oracle.density();
        for i in 0..16 {
            for j in 0..16 {
                let d = compiled.entry(i, j) - rho[i * 16 + j];
                assert!(d.norm() < 1e-12, "entry ({i},{j}) differs by {}", d.norm());
            }
        }
    }
}

#[test]
fn encoding_expectations_follow_the_closed_form() {
    // One RY(x_j) per qubit: each qubit reads cos^2(x_j / 2).
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    for _ in 0..10 {
        let features: [f64; 4] = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
        let gates = vqc_core::classifier::encode(&features).unwrap();
        let mut sim = DensityMatrix::<f64>::ground_state(4).unwrap();
        let mut oracle = SvOracle::new(4);
        for gate in &gates {
            sim.apply_gate(gate).unwrap();
            oracle.apply(gate);
        }
        for q in 0..4 {
            let closed = (features[q] / 2.0).cos().powi(2);
            let got = sim
                .expectation(&vqc_core::sim::Observable::ground_projector(q))
                .unwrap();
            assert!((got - closed).abs() < 1e-12);
            assert!((oracle.ground_expectation(q) - closed).abs() < 1e-12);
        }
    }
}
