//! Exact density-matrix simulation of small qubit registers.
//!
//! States are dense `2^n x 2^n` complex matrices with `n <= 8`. Basis index
//! bit `q` holds the computational value of qubit `q`, so basis label
//! `b_0 b_1 .. b_{n-1}` (qubit 0 written first) maps to index
//! `sum_q b_q * 2^q`. Gates are applied as stride kernels rather than full
//! `2^n x 2^n` unitaries, and the dephasing channel acts entrywise.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Largest supported register, matching an 8-qubit chain processor.
pub const MAX_QUBITS: usize = 8;

/// Rotation generator axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// Single-letter name used in genotype strings and reports.
    pub fn letter(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'X' => Some(Axis::X),
            'Y' => Some(Axis::Y),
            'Z' => Some(Axis::Z),
            _ => None,
        }
    }
}

/// A gate instance with concrete qubits and angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate<T> {
    /// Rotation `exp(-i * angle * A / 2)` about Pauli axis `A`.
    Rot { axis: Axis, qubit: usize, angle: T },
    /// Controlled-Z: `diag(1, 1, 1, -1)` on the two-qubit subspace.
    Cz { a: usize, b: usize },
    /// Controlled-X: flips `target` when `control` is set.
    Cnot { control: usize, target: usize },
}

impl<T: Scalar> Gate<T> {
    pub fn rx(qubit: usize, angle: T) -> Self {
        Gate::Rot {
            axis: Axis::X,
            qubit,
            angle,
        }
    }

    pub fn ry(qubit: usize, angle: T) -> Self {
        Gate::Rot {
            axis: Axis::Y,
            qubit,
            angle,
        }
    }

    pub fn rz(qubit: usize, angle: T) -> Self {
        Gate::Rot {
            axis: Axis::Z,
            qubit,
            angle,
        }
    }

    pub fn cz(a: usize, b: usize) -> Self {
        Gate::Cz { a, b }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    /// Qubits the gate touches.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Rot { qubit, .. } => vec![qubit],
            Gate::Cz { a, b } => vec![a, b],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        let check = |qubit: usize| {
            if qubit >= num_qubits {
                Err(Error::QubitIndex { qubit, num_qubits })
            } else {
                Ok(())
            }
        };
        match *self {
            Gate::Rot { qubit, .. } => check(qubit),
            Gate::Cz { a, b } | Gate::Cnot {
                control: a,
                target: b,
            } => {
                check(a)?;
                check(b)?;
                if a == b {
                    return Err(Error::DuplicateQubit { qubit: a });
                }
                Ok(())
            }
        }
    }
}

/// 2x2 unitary `exp(-i * angle * A / 2)` in row-major order
/// `[u00, u01, u10, u11]`.
pub fn rotation_matrix<T: Scalar>(axis: Axis, angle: T) -> [Complex<T>; 4] {
    let half = angle / T::of(2.0);
    let c = half.cos();
    let s = half.sin();
    let zero = T::zero();
    match axis {
        Axis::X => [
            Complex::new(c, zero),
            Complex::new(zero, -s),
            Complex::new(zero, -s),
            Complex::new(c, zero),
        ],
        Axis::Y => [
            Complex::new(c, zero),
            Complex::new(-s, zero),
            Complex::new(s, zero),
            Complex::new(c, zero),
        ],
        Axis::Z => [
            Complex::new(c, -s),
            Complex::new(zero, zero),
            Complex::new(zero, zero),
            Complex::new(c, s),
        ],
    }
}

/// Where the dephasing channel is inserted while running a circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoisePlacement {
    /// Applied to every qubit after each block (the encoding layer counts as
    /// one block). Noise then scales with circuit depth.
    #[default]
    AfterEachBlock,
    /// Applied to the acted-on qubits after every individual gate.
    AfterEachGate,
}

/// Single-qubit dephasing channel `rho -> (1-p) rho + p Z rho Z`.
///
/// On the affected qubit, populations are untouched and coherences shrink
/// by `1 - 2p`, so `p = 0` is the identity map and `p = 0.5` erases the
/// qubit's coherence entirely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingChannel<T> {
    strength: T,
    placement: NoisePlacement,
}

impl<T: Scalar> DephasingChannel<T> {
    pub fn new(strength: T, placement: NoisePlacement) -> Result<Self> {
        validate_strength(strength)?;
        Ok(Self {
            strength,
            placement,
        })
    }

    /// The identity channel.
    pub fn noiseless() -> Self {
        Self {
            strength: T::zero(),
            placement: NoisePlacement::AfterEachBlock,
        }
    }

    pub fn strength(&self) -> T {
        self.strength
    }

    pub fn placement(&self) -> NoisePlacement {
        self.placement
    }

    pub fn is_noiseless(&self) -> bool {
        self.strength == T::zero()
    }
}

fn validate_strength<T: Scalar>(strength: T) -> Result<()> {
    if !(strength >= T::zero() && strength <= T::of(0.5)) {
        return Err(Error::NoiseStrength {
            got: strength.as_f64(),
        });
    }
    Ok(())
}

/// Measured operator: a ground-state projector, either on one qubit
/// (extended by identity) or on the whole register. Both have
/// expectations in `[0, 1]` for any valid state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// `|0><0|` on `qubit`, identity on the rest.
    QubitGround { qubit: usize },
    /// `|0..0><0..0|` on the register: the all-zeros population.
    AllGround,
}

impl Observable {
    pub fn ground_projector(qubit: usize) -> Self {
        Self::QubitGround { qubit }
    }

    pub fn all_ground() -> Self {
        Self::AllGround
    }

    fn validate(&self, num_qubits: usize) -> Result<()> {
        match *self {
            Observable::QubitGround { qubit } if qubit >= num_qubits => {
                Err(Error::QubitIndex { qubit, num_qubits })
            }
            _ => Ok(()),
        }
    }

    /// Expectation over a diagonal outcome distribution.
    pub fn marginal<T: Scalar>(&self, probabilities: &[T]) -> T {
        match *self {
            Observable::QubitGround { qubit } => {
                let mask = 1usize << qubit;
                probabilities
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i & mask == 0)
                    .map(|(_, &p)| p)
                    .sum()
            }
            Observable::AllGround => probabilities[0],
        }
    }
}

/// Mixed state of an `n`-qubit register as a dense density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T> {
    num_qubits: usize,
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> DensityMatrix<T> {
    /// The pure state `|0..0><0..0|`.
    pub fn ground_state(num_qubits: usize) -> Result<Self> {
        if num_qubits < 1 || num_qubits > MAX_QUBITS {
            return Err(Error::QubitCount {
                got: num_qubits,
                max: MAX_QUBITS,
            });
        }
        let dim = 1 << num_qubits;
        let mut data = vec![Complex::new(T::zero(), T::zero()); dim * dim];
        data[0] = Complex::new(T::one(), T::zero());
        Ok(Self {
            num_qubits,
            dim,
            data,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex<T> {
        self.data[row * self.dim + col]
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn trace(&self) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..self.dim {
            acc = acc + self.data[i * self.dim + i];
        }
        acc
    }

    /// `Tr(rho^2)`, assuming Hermiticity.
    pub fn purity(&self) -> T {
        self.data
            .iter()
            .map(|z| z.re * z.re + z.im * z.im)
            .sum()
    }

    /// Real parts of the diagonal: outcome probabilities over the
    /// computational basis.
    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim).map(|i| self.data[i * self.dim + i].re).collect()
    }

    /// Applies `U rho U^dagger` in place.
    pub fn apply_gate(&mut self, gate: &Gate<T>) -> Result<()> {
        gate.validate(self.num_qubits)?;
        match *gate {
            Gate::Rot { axis, qubit, angle } => {
                let u = rotation_matrix(axis, angle);
                self.apply_single_qubit(qubit, &u);
            }
            Gate::Cz { a, b } => self.apply_cz(a, b),
            Gate::Cnot { control, target } => self.apply_cnot(control, target),
        }
        Ok(())
    }

    fn apply_single_qubit(&mut self, qubit: usize, u: &[Complex<T>; 4]) {
        let dim = self.dim;
        let mask = 1usize << qubit;
        // Left multiply by U: mix row pairs within each column.
        for r0 in 0..dim {
            if r0 & mask != 0 {
                continue;
            }
            let r1 = r0 | mask;
            for col in 0..dim {
                let a = self.data[r0 * dim + col];
                let b = self.data[r1 * dim + col];
                self.data[r0 * dim + col] = u[0] * a + u[1] * b;
                self.data[r1 * dim + col] = u[2] * a + u[3] * b;
            }
        }
        // Right multiply by U^dagger: mix column pairs within each row.
        let u00 = u[0].conj();
        let u01 = u[1].conj();
        let u10 = u[2].conj();
        let u11 = u[3].conj();
        for row in 0..dim {
            let base = row * dim;
            for c0 in 0..dim {
                if c0 & mask != 0 {
                    continue;
                }
                let c1 = c0 | mask;
                let a = self.data[base + c0];
                let b = self.data[base + c1];
                self.data[base + c0] = a * u00 + b * u01;
                self.data[base + c1] = a * u10 + b * u11;
            }
        }
    }

    fn apply_cz(&mut self, a: usize, b: usize) {
        let dim = self.dim;
        let both = (1usize << a) | (1usize << b);
        for i in 0..dim {
            let fi = i & both == both;
            for j in 0..dim {
                let fj = j & both == both;
                if fi != fj {
                    self.data[i * dim + j] = -self.data[i * dim + j];
                }
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let dim = self.dim;
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        // The permutation i -> i ^ tmask (when the control bit is set) is an
        // involution; conjugating rho swaps row pairs then column pairs.
        for r0 in 0..dim {
            if r0 & cmask == 0 || r0 & tmask != 0 {
                continue;
            }
            let r1 = r0 | tmask;
            for col in 0..dim {
                self.data.swap(r0 * dim + col, r1 * dim + col);
            }
        }
        for row in 0..dim {
            let base = row * dim;
            for c0 in 0..dim {
                if c0 & cmask == 0 || c0 & tmask != 0 {
                    continue;
                }
                self.data.swap(base + c0, base + (c0 | tmask));
            }
        }
    }

    /// Dephasing on one qubit: coherences involving that qubit shrink by
    /// `1 - 2p`, diagonal entries are untouched.
    pub fn apply_dephasing(&mut self, qubit: usize, strength: T) -> Result<()> {
        validate_strength(strength)?;
        if qubit >= self.num_qubits {
            return Err(Error::QubitIndex {
                qubit,
                num_qubits: self.num_qubits,
            });
        }
        if strength == T::zero() {
            return Ok(());
        }
        let factor = Complex::new(T::one() - T::of(2.0) * strength, T::zero());
        let dim = self.dim;
        let mask = 1usize << qubit;
        for i in 0..dim {
            for j in 0..dim {
                if (i ^ j) & mask != 0 {
                    self.data[i * dim + j] = self.data[i * dim + j] * factor;
                }
            }
        }
        Ok(())
    }

    /// Dephasing with the same strength on every qubit, as a single
    /// entrywise pass: entry `(i, j)` shrinks by `(1-2p)^popcount(i^j)`.
    /// Equivalent to applying [`Self::apply_dephasing`] per qubit.
    pub fn apply_dephasing_all(&mut self, strength: T) -> Result<()> {
        validate_strength(strength)?;
        if strength == T::zero() {
            return Ok(());
        }
        let factor = T::one() - T::of(2.0) * strength;
        let mut powers = [T::one(); MAX_QUBITS + 1];
        for k in 1..=self.num_qubits {
            powers[k] = powers[k - 1] * factor;
        }
        let dim = self.dim;
        for i in 0..dim {
            for j in 0..dim {
                let k = ((i ^ j) as u32).count_ones() as usize;
                if k > 0 {
                    let p = Complex::new(powers[k], T::zero());
                    self.data[i * dim + j] = self.data[i * dim + j] * p;
                }
            }
        }
        Ok(())
    }

    /// `Tr(Pi rho)` for the projector observable.
    pub fn expectation(&self, obs: &Observable) -> Result<T> {
        obs.validate(self.num_qubits)?;
        match *obs {
            Observable::QubitGround { qubit } => {
                let mask = 1usize << qubit;
                let mut acc = T::zero();
                for i in 0..self.dim {
                    if i & mask == 0 {
                        acc += self.data[i * self.dim + i].re;
                    }
                }
                Ok(acc)
            }
            Observable::AllGround => Ok(self.data[0].re),
        }
    }

    /// `|Tr(rho) - 1|`.
    pub fn trace_error(&self) -> T {
        let t = self.trace();
        ((t.re - T::one()) * (t.re - T::one()) + t.im * t.im).sqrt()
    }

    /// Largest entrywise deviation from `rho = rho^dagger`.
    pub fn hermiticity_error(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in i..self.dim {
                let d = self.data[i * self.dim + j] - self.data[j * self.dim + i].conj();
                let mag = (d.re * d.re + d.im * d.im).sqrt();
                if mag > worst {
                    worst = mag;
                }
            }
        }
        worst
    }

    /// Smallest eigenvalue; `>= -1e-10` for a numerically valid state.
    pub fn min_eigenvalue(&self) -> T {
        linalg::hermitian_min_eigenvalue(&self.data, self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Dm = DensityMatrix<f64>;

    fn assert_entry(state: &Dm, i: usize, j: usize, re: f64, im: f64) {
        let z = state.entry(i, j);
        assert!(
            (z.re - re).abs() < 1e-12 && (z.im - im).abs() < 1e-12,
            "entry ({i},{j}) = {z}, expected {re}+{im}i"
        );
    }

    #[test]
    fn ground_state_is_rank_one() {
        let s = Dm::ground_state(1).unwrap();
        assert_entry(&s, 0, 0, 1.0, 0.0);
        assert_entry(&s, 1, 1, 0.0, 0.0);

        let s2 = Dm::ground_state(2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert_entry(&s2, i, j, expect, 0.0);
            }
        }

        let s4 = Dm::ground_state(4).unwrap();
        assert!((s4.trace().re - 1.0).abs() < 1e-15);
        assert!((s4.purity() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ground_state_rejects_out_of_range() {
        assert!(Dm::ground_state(0).is_err());
        assert!(Dm::ground_state(9).is_err());
        assert!(Dm::ground_state(8).is_ok());
    }

    #[test]
    fn ry_pi_is_a_bit_flip() {
        let mut s = Dm::ground_state(1).unwrap();
        s.apply_gate(&Gate::ry(0, std::f64::consts::PI)).unwrap();
        assert_entry(&s, 0, 0, 0.0, 0.0);
        assert_entry(&s, 1, 1, 1.0, 0.0);
    }

    #[test]
    fn rz_leaves_basis_state_unchanged() {
        let mut s = Dm::ground_state(1).unwrap();
        s.apply_gate(&Gate::rz(0, 0.731)).unwrap();
        assert_entry(&s, 0, 0, 1.0, 0.0);
        assert_entry(&s, 0, 1, 0.0, 0.0);
    }

    #[test]
    fn ry_half_pi_gives_plus_state() {
        // With R_Y(theta) = exp(-i theta Y / 2) the |0> column is
        // (cos(theta/2), sin(theta/2)), so all four entries are +1/2.
        let mut s = Dm::ground_state(1).unwrap();
        s.apply_gate(&Gate::ry(0, std::f64::consts::FRAC_PI_2))
            .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_entry(&s, i, j, 0.5, 0.0);
            }
        }
    }

    #[test]
    fn cz_flips_coherence_sign() {
        // Qubit 1 in |1>, qubit 0 in |+>: coherence between indices 2 and 3.
        let mut s = Dm::ground_state(2).unwrap();
        s.apply_gate(&Gate::ry(1, std::f64::consts::PI)).unwrap();
        s.apply_gate(&Gate::ry(0, std::f64::consts::FRAC_PI_2))
            .unwrap();
        assert_entry(&s, 2, 3, 0.5, 0.0);
        s.apply_gate(&Gate::cz(0, 1)).unwrap();
        assert_entry(&s, 2, 3, -0.5, 0.0);
        assert_entry(&s, 2, 2, 0.5, 0.0);
        assert_entry(&s, 3, 3, 0.5, 0.0);
    }

    #[test]
    fn cnot_permutes_one_zero_and_one_one() {
        // |control=1, target=0| is index 2 (control on qubit 1); CNOT maps
        // it to index 3 and back.
        let mut s = Dm::ground_state(2).unwrap();
        s.apply_gate(&Gate::ry(1, std::f64::consts::PI)).unwrap();
        assert_entry(&s, 2, 2, 1.0, 0.0);
        s.apply_gate(&Gate::cnot(1, 0)).unwrap();
        assert_entry(&s, 3, 3, 1.0, 0.0);
        assert_entry(&s, 2, 2, 0.0, 0.0);
        s.apply_gate(&Gate::cnot(1, 0)).unwrap();
        assert_entry(&s, 2, 2, 1.0, 0.0);
    }

    #[test]
    fn gate_rejects_bad_qubits() {
        let mut s = Dm::ground_state(2).unwrap();
        assert!(s.apply_gate(&Gate::ry(2, 1.0)).is_err());
        assert!(s.apply_gate(&Gate::cz(0, 2)).is_err());
        assert!(s.apply_gate(&Gate::cz(1, 1)).is_err());
        assert!(s.apply_gate(&Gate::cnot(0, 0)).is_err());
    }

    #[test]
    fn dephasing_zero_is_identity_and_half_fully_mixes() {
        let mut plus = Dm::ground_state(1).unwrap();
        plus.apply_gate(&Gate::ry(0, std::f64::consts::FRAC_PI_2))
            .unwrap();

        let mut s = plus.clone();
        s.apply_dephasing(0, 0.0).unwrap();
        assert_eq!(s, plus);

        let mut s = plus.clone();
        s.apply_dephasing(0, 0.5).unwrap();
        assert_entry(&s, 0, 0, 0.5, 0.0);
        assert_entry(&s, 1, 1, 0.5, 0.0);
        assert_entry(&s, 0, 1, 0.0, 0.0);

        let mut s = plus;
        s.apply_dephasing(0, 0.1).unwrap();
        assert_entry(&s, 0, 1, 0.4, 0.0);
        assert_entry(&s, 1, 0, 0.4, 0.0);
        assert_entry(&s, 0, 0, 0.5, 0.0);
    }

    #[test]
    fn dephasing_rejects_out_of_range_strength() {
        let mut s = Dm::ground_state(1).unwrap();
        assert!(s.apply_dephasing(0, -0.01).is_err());
        assert!(s.apply_dephasing(0, 0.51).is_err());
        assert!(s.apply_dephasing(0, f64::NAN).is_err());
        assert!(s.apply_dephasing(1, 0.1).is_err());
        assert!(DephasingChannel::new(0.6, NoisePlacement::AfterEachBlock).is_err());
    }

    #[test]
    fn expectation_tracks_qubit_population() {
        let obs = Observable::ground_projector(0);
        let mut s = Dm::ground_state(1).unwrap();
        assert!((s.expectation(&obs).unwrap() - 1.0).abs() < 1e-15);

        s.apply_gate(&Gate::ry(0, std::f64::consts::PI)).unwrap();
        assert!(s.expectation(&obs).unwrap().abs() < 1e-15);

        let mut s = Dm::ground_state(1).unwrap();
        s.apply_gate(&Gate::ry(0, std::f64::consts::FRAC_PI_2))
            .unwrap();
        assert!((s.expectation(&obs).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rotation_matrices_are_unitary_for_random_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let angle = rng.gen_range(-10.0..10.0);
            for axis in [Axis::X, Axis::Y, Axis::Z] {
                let u = rotation_matrix::<f64>(axis, angle);
                // U U^dagger entries.
                let c =
                    |i: usize, j: usize| u[i * 2] * u[j * 2].conj() + u[i * 2 + 1] * u[j * 2 + 1].conj();
                assert!((c(0, 0).re - 1.0).abs() < 1e-12 && c(0, 0).im.abs() < 1e-12);
                assert!((c(1, 1).re - 1.0).abs() < 1e-12 && c(1, 1).im.abs() < 1e-12);
                assert!(c(0, 1).norm() < 1e-12 && c(1, 0).norm() < 1e-12);
            }
        }
    }

    fn random_state(rng: &mut ChaCha8Rng, num_qubits: usize, gates: usize) -> Dm {
        let mut s = Dm::ground_state(num_qubits).unwrap();
        for _ in 0..gates {
            let q = rng.gen_range(0..num_qubits);
            match rng.gen_range(0..4) {
                0 => s.apply_gate(&Gate::rx(q, rng.gen_range(-3.2..3.2))).unwrap(),
                1 => s.apply_gate(&Gate::ry(q, rng.gen_range(-3.2..3.2))).unwrap(),
                2 => s.apply_gate(&Gate::rz(q, rng.gen_range(-3.2..3.2))).unwrap(),
                _ => {
                    if num_qubits > 1 {
                        let mut p = rng.gen_range(0..num_qubits);
                        while p == q {
                            p = rng.gen_range(0..num_qubits);
                        }
                        s.apply_gate(&Gate::cz(q, p)).unwrap();
                    }
                }
            }
        }
        s
    }

    #[test]
    fn dephasing_composition_law() {
        // p1 then p2 equals p' with (1 - 2p') = (1 - 2p1)(1 - 2p2).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let s0 = random_state(&mut rng, 3, 8);
            let p1: f64 = rng.gen_range(0.0..0.5);
            let p2: f64 = rng.gen_range(0.0..0.5);
            let combined = (1.0 - (1.0 - 2.0 * p1) * (1.0 - 2.0 * p2)) / 2.0;

            let mut seq = s0.clone();
            seq.apply_dephasing(1, p1).unwrap();
            seq.apply_dephasing(1, p2).unwrap();

            let mut once = s0;
            once.apply_dephasing(1, combined).unwrap();

            for (a, b) in seq.data().iter().zip(once.data()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dephasing_all_matches_per_qubit_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let s0 = random_state(&mut rng, 4, 10);
            let p: f64 = rng.gen_range(0.0..0.5);

            let mut all = s0.clone();
            all.apply_dephasing_all(p).unwrap();

            let mut seq = s0;
            for q in 0..4 {
                seq.apply_dephasing(q, p).unwrap();
            }
            for (a, b) in all.data().iter().zip(seq.data()) {
                assert!((a - b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn random_pure_states_have_valid_expectations() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let obs = Observable::ground_projector(0);
        for _ in 0..100 {
            let s = random_state(&mut rng, 4, 12);
            let e = s.expectation(&obs).unwrap();
            assert!((-1e-12..=1.0 + 1e-12).contains(&e), "expectation {e}");
        }
    }

    #[test]
    fn state_invariants_hold_under_gates_and_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let mut s = random_state(&mut rng, 3, 10);
            s.apply_dephasing_all(rng.gen_range(0.0..0.5)).unwrap();
            assert!(s.trace_error() < 1e-12);
            assert!(s.hermiticity_error() < 1e-12);
            assert!(s.min_eigenvalue() > -1e-10);
        }
    }
}
