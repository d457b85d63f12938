//! Circuit templates, baseline ansatz layouts, and the architecture search
//! space.
//!
//! A template is an ordered list of blocks; rotation gates either carry a
//! trainable parameter slot or a fixed angle (fixed angles appear when
//! routing non-adjacent two-qubit gates to the chain). The search space
//! varies, per block, the single-qubit rotation axis on each qubit and a
//! CZ on/off mask over the chain-adjacent pairs.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim::{Axis, DensityMatrix, Gate};

/// The classifier register: a 4-qubit segment of the chain.
pub const CHAIN_QUBITS: usize = 4;

/// Angle source for a rotation gate inside a template.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Param<T> {
    /// Trainable angle, read from the parameter vector.
    Slot(usize),
    /// Structural angle fixed by the layout (e.g. routing rotations).
    Fixed(T),
}

/// One gate inside a template block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemplateOp<T> {
    Rot {
        axis: Axis,
        qubit: usize,
        param: Param<T>,
    },
    Cz {
        a: usize,
        b: usize,
    },
}

/// A layered parameterized circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitTemplate<T> {
    num_qubits: usize,
    blocks: Vec<Vec<TemplateOp<T>>>,
    num_params: usize,
}

impl<T: Scalar> CircuitTemplate<T> {
    /// Builds a template, checking qubit indices and that parameter slots
    /// are exactly `0..num_params`, each used once.
    pub fn new(num_qubits: usize, blocks: Vec<Vec<TemplateOp<T>>>) -> Result<Self> {
        let mut slots = Vec::new();
        for block in &blocks {
            for op in block {
                match *op {
                    TemplateOp::Rot { qubit, param, .. } => {
                        if qubit >= num_qubits {
                            return Err(Error::QubitIndex { qubit, num_qubits });
                        }
                        if let Param::Slot(s) = param {
                            slots.push(s);
                        }
                    }
                    TemplateOp::Cz { a, b } => {
                        Gate::<T>::cz(a, b).validate(num_qubits)?;
                    }
                }
            }
        }
        let num_params = slots.len();
        slots.sort_unstable();
        for (want, got) in slots.iter().enumerate() {
            if *got != want {
                return Err(Error::TemplateShape(format!(
                    "parameter slots must be 0..{num_params} each used once, found slot {got}"
                )));
            }
        }
        Ok(Self {
            num_qubits,
            blocks,
            num_params,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<TemplateOp<T>>] {
        &self.blocks
    }

    /// Total CZ gates across all blocks.
    pub fn cz_count(&self) -> usize {
        self.blocks
            .iter()
            .flatten()
            .filter(|op| matches!(op, TemplateOp::Cz { .. }))
            .count()
    }

    /// Parameter slots appearing in one block, in gate order.
    pub fn block_slots(&self, block: usize) -> impl Iterator<Item = usize> + '_ {
        self.blocks[block].iter().filter_map(|op| match op {
            TemplateOp::Rot {
                param: Param::Slot(s),
                ..
            } => Some(*s),
            _ => None,
        })
    }

    pub fn check_params(&self, params: &[T]) -> Result<()> {
        if params.len() != self.num_params {
            return Err(Error::ParamCount {
                expected: self.num_params,
                got: params.len(),
            });
        }
        Ok(())
    }

    /// Concrete gates of one block under `params`, with slot `shift.0`
    /// offset by `shift.1` (the parameter-shift evaluation hook).
    pub fn bound_block_gates<'a>(
        &'a self,
        block: usize,
        params: &'a [T],
        shift: Option<(usize, T)>,
    ) -> impl Iterator<Item = Gate<T>> + 'a {
        self.blocks[block].iter().map(move |op| match *op {
            TemplateOp::Rot { axis, qubit, param } => {
                let mut angle = match param {
                    Param::Slot(s) => params[s],
                    Param::Fixed(v) => v,
                };
                if let (Some((slot, delta)), Param::Slot(s)) = (shift, param) {
                    if s == slot {
                        angle += delta;
                    }
                }
                Gate::Rot { axis, qubit, angle }
            }
            TemplateOp::Cz { a, b } => Gate::Cz { a, b },
        })
    }

    /// Runs the whole template on `state` without any noise channel.
    pub fn apply_all(&self, state: &mut DensityMatrix<T>, params: &[T]) -> Result<()> {
        self.check_params(params)?;
        for block in 0..self.blocks.len() {
            for gate in self.bound_block_gates(block, params, None) {
                state.apply_gate(&gate)?;
            }
        }
        Ok(())
    }
}

/// Hardware-efficient ansatz on the 4-qubit chain: per block, one trainable
/// RY per qubit followed by CZ on every adjacent pair.
pub fn build_hea<T: Scalar>(layers: usize) -> Result<CircuitTemplate<T>> {
    if layers < 1 {
        return Err(Error::BlockCount);
    }
    let mut blocks = Vec::with_capacity(layers);
    for l in 0..layers {
        let mut ops = Vec::with_capacity(CHAIN_QUBITS + 3);
        for q in 0..CHAIN_QUBITS {
            ops.push(TemplateOp::Rot {
                axis: Axis::Y,
                qubit: q,
                param: Param::Slot(l * CHAIN_QUBITS + q),
            });
        }
        for q in 0..CHAIN_QUBITS - 1 {
            ops.push(TemplateOp::Cz { a: q, b: q + 1 });
        }
        blocks.push(ops);
    }
    CircuitTemplate::new(CHAIN_QUBITS, blocks)
}

/// Hadamard as native rotations, up to global phase: `H = RY(pi/2) RZ(pi)`
/// (RZ applied first). Global phase cancels under density-matrix
/// conjugation.
fn hadamard_ops<T: Scalar>(qubit: usize) -> [TemplateOp<T>; 2] {
    [
        TemplateOp::Rot {
            axis: Axis::Z,
            qubit,
            param: Param::Fixed(T::PI()),
        },
        TemplateOp::Rot {
            axis: Axis::Y,
            qubit,
            param: Param::Fixed(T::FRAC_PI_2()),
        },
    ]
}

/// CNOT between adjacent wires, using the native CZ:
/// `CNOT(c, t) = H_t CZ(c, t) H_t`.
fn cnot_ops<T: Scalar>(control: usize, target: usize, out: &mut Vec<TemplateOp<T>>) {
    out.extend(hadamard_ops(target));
    out.push(TemplateOp::Cz {
        a: control,
        b: target,
    });
    out.extend(hadamard_ops(target));
}

/// SWAP between adjacent wires as three CNOTs.
fn swap_ops<T: Scalar>(a: usize, b: usize, out: &mut Vec<TemplateOp<T>>) {
    cnot_ops(a, b, out);
    cnot_ops(b, a, out);
    cnot_ops(a, b, out);
}

/// Hardware-agnostic ansatz on the 4-qubit chain: per block, one trainable
/// RY per qubit followed by CNOTs on the non-adjacent pairs (0,2) and
/// (1,3), routed to the chain with SWAP insertions. Every two-qubit gate in
/// the compiled output is a CZ on an adjacent pair.
pub fn build_haa<T: Scalar>(layers: usize) -> Result<CircuitTemplate<T>> {
    if layers < 1 {
        return Err(Error::BlockCount);
    }
    let mut blocks = Vec::with_capacity(layers);
    for l in 0..layers {
        let mut ops = Vec::new();
        for q in 0..CHAIN_QUBITS {
            ops.push(TemplateOp::Rot {
                axis: Axis::Y,
                qubit: q,
                param: Param::Slot(l * CHAIN_QUBITS + q),
            });
        }
        // CNOT(0, 2): route qubit 0 next to 2 and back.
        swap_ops(0, 1, &mut ops);
        cnot_ops(1, 2, &mut ops);
        swap_ops(0, 1, &mut ops);
        // CNOT(1, 3): route qubit 3 next to 1 and back.
        swap_ops(2, 3, &mut ops);
        cnot_ops(1, 2, &mut ops);
        swap_ops(2, 3, &mut ops);
        blocks.push(ops);
    }
    CircuitTemplate::new(CHAIN_QUBITS, blocks)
}

/// The pool of candidate architectures: per block, a rotation-axis choice
/// per qubit and a CZ mask over chain-adjacent pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpace {
    num_qubits: usize,
    num_blocks: usize,
    single_candidates: Vec<Axis>,
    cz_pairs: Vec<(usize, usize)>,
}

impl SearchSpace {
    /// The experiment's space: 4 qubits, `{RY, RZ}` per position, CZ
    /// candidates on pairs (0,1), (1,2), (2,3).
    pub fn chain(num_blocks: usize) -> Result<Self> {
        Self::custom(
            CHAIN_QUBITS,
            num_blocks,
            vec![Axis::Y, Axis::Z],
            vec![(0, 1), (1, 2), (2, 3)],
        )
    }

    pub fn custom(
        num_qubits: usize,
        num_blocks: usize,
        single_candidates: Vec<Axis>,
        cz_pairs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if num_blocks < 1 {
            return Err(Error::BlockCount);
        }
        if single_candidates.is_empty() {
            return Err(Error::Config(
                "search space needs at least one single-qubit gate candidate".into(),
            ));
        }
        for &(a, b) in &cz_pairs {
            if a >= num_qubits || b >= num_qubits {
                return Err(Error::QubitIndex {
                    qubit: a.max(b),
                    num_qubits,
                });
            }
            if a.abs_diff(b) != 1 {
                return Err(Error::Config(format!(
                    "CZ pair ({a}, {b}) is not chain-adjacent"
                )));
            }
        }
        Ok(Self {
            num_qubits,
            num_blocks,
            single_candidates,
            cz_pairs,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn single_candidates(&self) -> &[Axis] {
        &self.single_candidates
    }

    pub fn cz_pairs(&self) -> &[(usize, usize)] {
        &self.cz_pairs
    }
}

/// Per-block architecture choice.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockChoice {
    /// Rotation axis per qubit.
    pub gates: Vec<Axis>,
    /// One bit per search-space CZ pair.
    pub cz_mask: Vec<bool>,
}

/// A discrete point of the search space: gate choices plus CZ masks for
/// every block.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Genotype {
    pub blocks: Vec<BlockChoice>,
}

impl Genotype {
    pub fn validate_for(&self, space: &SearchSpace) -> Result<()> {
        if self.blocks.len() != space.num_blocks {
            return Err(Error::GenotypeShape(format!(
                "{} blocks, space has {}",
                self.blocks.len(),
                space.num_blocks
            )));
        }
        for (i, block) in self.blocks.iter().enumerate() {
            if block.gates.len() != space.num_qubits {
                return Err(Error::GenotypeShape(format!(
                    "block {i} has {} gate choices, space has {} qubits",
                    block.gates.len(),
                    space.num_qubits
                )));
            }
            if block.cz_mask.len() != space.cz_pairs.len() {
                return Err(Error::GenotypeShape(format!(
                    "block {i} has {} mask bits, space has {} pairs",
                    block.cz_mask.len(),
                    space.cz_pairs.len()
                )));
            }
            for axis in &block.gates {
                if !space.single_candidates.contains(axis) {
                    return Err(Error::GenotypeShape(format!(
                        "block {i} uses gate {} outside the candidate set",
                        axis.letter()
                    )));
                }
            }
        }
        Ok(())
    }

    /// The HEA point of the space: RY everywhere, every CZ enabled.
    pub fn hea(space: &SearchSpace) -> Self {
        Self {
            blocks: (0..space.num_blocks)
                .map(|_| BlockChoice {
                    gates: vec![Axis::Y; space.num_qubits],
                    cz_mask: vec![true; space.cz_pairs.len()],
                })
                .collect(),
        }
    }

    pub fn cz_count(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.cz_mask.iter().filter(|&&m| m).count())
            .sum()
    }
}

impl fmt::Display for Genotype {
    /// Flat run-record form: per block, gate letters then `|` then mask
    /// bits; blocks joined with `;`. Example: `YZYY|101;ZZYZ|010`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, block) in self.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            for axis in &block.gates {
                write!(f, "{}", axis.letter())?;
            }
            f.write_str("|")?;
            for &m in &block.cz_mask {
                f.write_str(if m { "1" } else { "0" })?;
            }
        }
        Ok(())
    }
}

impl FromStr for Genotype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        for part in s.split(';') {
            let (gates_str, mask_str) = part
                .split_once('|')
                .ok_or_else(|| Error::Parse(format!("genotype block `{part}` missing `|`")))?;
            let gates = gates_str
                .chars()
                .map(|c| {
                    Axis::from_letter(c)
                        .ok_or_else(|| Error::Parse(format!("unknown gate letter `{c}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            let cz_mask = mask_str
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(Error::Parse(format!("mask bit `{c}` must be 0 or 1"))),
                })
                .collect::<Result<Vec<_>>>()?;
            blocks.push(BlockChoice { gates, cz_mask });
        }
        Ok(Self { blocks })
    }
}

impl Serialize for Genotype {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Genotype {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Instantiates the genotype as a circuit template: per block, the chosen
/// rotation per qubit (slot order block-major, then qubit), then CZ on each
/// masked pair.
pub fn realize<T: Scalar>(space: &SearchSpace, genotype: &Genotype) -> Result<CircuitTemplate<T>> {
    genotype.validate_for(space)?;
    let nq = space.num_qubits;
    let mut blocks = Vec::with_capacity(space.num_blocks);
    for (l, choice) in genotype.blocks.iter().enumerate() {
        let mut ops = Vec::with_capacity(nq + space.cz_pairs.len());
        for (q, &axis) in choice.gates.iter().enumerate() {
            ops.push(TemplateOp::Rot {
                axis,
                qubit: q,
                param: Param::Slot(l * nq + q),
            });
        }
        for (&(a, b), &enabled) in space.cz_pairs.iter().zip(&choice.cz_mask) {
            if enabled {
                ops.push(TemplateOp::Cz { a, b });
            }
        }
        blocks.push(ops);
    }
    CircuitTemplate::new(nq, blocks)
}

/// Number of distinct genotypes:
/// `(candidates^qubits * 2^pairs)^blocks`, saturating on overflow.
pub fn pool_size(space: &SearchSpace) -> u128 {
    let per_block = (space.single_candidates.len() as u128)
        .saturating_pow(space.num_qubits as u32)
        .saturating_mul(1u128 << space.cz_pairs.len());
    per_block.saturating_pow(space.num_blocks as u32)
}

/// Uniform draw over all genotypes of the space.
pub fn random_genotype<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> Genotype {
    let blocks = (0..space.num_blocks)
        .map(|_| BlockChoice {
            gates: (0..space.num_qubits)
                .map(|_| space.single_candidates[rng.gen_range(0..space.single_candidates.len())])
                .collect(),
            cz_mask: (0..space.cz_pairs.len()).map(|_| rng.gen()).collect(),
        })
        .collect();
    Genotype { blocks }
}
