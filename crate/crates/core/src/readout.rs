//! Readout-error modelling and correction.
//!
//! A calibration matrix `F` is column-stochastic: entry `(i, j)` is the
//! probability of measuring basis state `i` given prepared basis state `j`.
//! Measured distributions relate to prepared ones by `p_measured = F p`,
//! and correction solves the linear system back (never forming `F^{-1}`
//! explicitly), then clips and renormalizes to stay on the simplex.
//!
//! CSV layout (row-major): a `basis` header column, then one column per
//! basis label; labels write qubit 0 first, matching the simulator's index
//! convention.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

const ENTRY_SLACK: f64 = 1e-9;
const COLUMN_SUM_TOL: f64 = 1e-9;
const PROB_SUM_TOL: f64 = 1e-9;
const PROB_NEG_TOL: f64 = -1e-12;

/// Basis label for index `i`: bit `q` of `i` printed at position `q`.
pub fn basis_label(index: usize, num_qubits: usize) -> String {
    (0..num_qubits)
        .map(|q| if index >> q & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Distribution over computational-basis outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> ProbabilityVector<T> {
    /// Validates the simplex conditions: entries `>= -1e-12` and sum within
    /// `1e-9` of one.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty {
                what: "probability vector",
            });
        }
        let neg_tol = T::of(PROB_NEG_TOL);
        for (i, &v) in values.iter().enumerate() {
            if !(v >= neg_tol) {
                return Err(Error::Probability(format!("entry {i} = {v}")));
            }
        }
        let sum: T = values.iter().copied().sum();
        if (sum - T::one()).abs() > T::of(PROB_SUM_TOL) {
            return Err(Error::Probability(format!("entries sum to {sum}")));
        }
        Ok(Self { values })
    }

    pub(crate) fn from_simplex(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Probability that `qubit` reads 0.
    pub fn ground_marginal(&self, qubit: usize) -> T {
        let mask = 1usize << qubit;
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == 0)
            .map(|(_, &v)| v)
            .sum()
    }
}

/// Structural and numerical diagnostics for a candidate calibration matrix.
#[derive(Debug, Clone)]
pub struct CalibrationDiagnostics<T> {
    /// `|column sum - 1|` per column.
    pub column_sum_deviation: Vec<T>,
    /// Count of entries outside `[0, 1]` beyond slack.
    pub entry_violations: usize,
    /// 2-norm condition number.
    pub condition_number: T,
}

impl<T: Scalar> CalibrationDiagnostics<T> {
    /// Inspects raw row-major entries without enforcing validity; errors
    /// only when the input is not square.
    pub fn inspect(entries: &[T], dim: usize) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        let mut column_sum_deviation = Vec::with_capacity(dim);
        for j in 0..dim {
            let sum: T = (0..dim).map(|i| entries[i * dim + j]).sum();
            column_sum_deviation.push((sum - T::one()).abs());
        }
        let slack = T::of(ENTRY_SLACK);
        let entry_violations = entries
            .iter()
            .filter(|&&v| !(v >= -slack && v <= T::one() + slack))
            .count();
        let condition_number = linalg::condition_number(entries, dim);
        Ok(Self {
            column_sum_deviation,
            entry_violations,
            condition_number,
        })
    }

    pub fn max_column_deviation(&self) -> T {
        self.column_sum_deviation
            .iter()
            .fold(T::zero(), |acc, &d| if d > acc { d } else { acc })
    }
}

/// Result of a correction solve, with the mass removed by clipping.
#[derive(Debug, Clone)]
pub struct CorrectionOutcome<T> {
    pub probabilities: ProbabilityVector<T>,
    /// Total negative mass clipped from the raw solution; zero when the raw
    /// solution already lay on the simplex.
    pub clipped_mass: T,
}

/// Column-stochastic readout confusion matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMatrix<T> {
    num_qubits: usize,
    dim: usize,
    entries: Vec<T>,
}

impl<T: Scalar> CalibrationMatrix<T> {
    /// Builds and validates a matrix from row-major entries.
    pub fn new(num_qubits: usize, entries: Vec<T>) -> Result<Self> {
        let dim = 1usize << num_qubits;
        if entries.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        let slack = T::of(ENTRY_SLACK);
        for (k, &v) in entries.iter().enumerate() {
            if !(v >= -slack && v <= T::one() + slack) {
                return Err(Error::Calibration(format!(
                    "entry ({}, {}) = {v} outside [0, 1]",
                    k / dim,
                    k % dim
                )));
            }
        }
        for j in 0..dim {
            let sum: T = (0..dim).map(|i| entries[i * dim + j]).sum();
            if (sum - T::one()).abs() > T::of(COLUMN_SUM_TOL) {
                return Err(Error::Calibration(format!("column {j} sums to {sum}")));
            }
        }
        Ok(Self {
            num_qubits,
            dim,
            entries,
        })
    }

    pub fn identity(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        let mut entries = vec![T::zero(); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = T::one();
        }
        Self {
            num_qubits,
            dim,
            entries,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> T {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    /// Measured distribution `F p` for prepared distribution `p`.
    pub fn apply(&self, p: &ProbabilityVector<T>) -> Result<ProbabilityVector<T>> {
        if p.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: p.len(),
            });
        }
        let mut out = vec![T::zero(); self.dim];
        for i in 0..self.dim {
            let mut acc = T::zero();
            for j in 0..self.dim {
                acc += self.entries[i * self.dim + j] * p.values[j];
            }
            out[i] = acc;
        }
        // A stochastic matrix maps the simplex into itself.
        Ok(ProbabilityVector::from_simplex(out))
    }

    /// Recovers the prepared distribution from a measured one by solving
    /// `F p = measured`, clipping negatives, and renormalizing.
    pub fn correct(&self, measured: &ProbabilityVector<T>) -> Result<ProbabilityVector<T>> {
        Ok(self.correct_detailed(measured)?.probabilities)
    }

    /// [`Self::correct`] plus the clipped negative mass, for run records.
    pub fn correct_detailed(&self, measured: &ProbabilityVector<T>) -> Result<CorrectionOutcome<T>> {
        if measured.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: measured.len(),
            });
        }
        let mut raw = linalg::lu_solve(&self.entries, self.dim, &measured.values, "calibration matrix F")?;
        let mut clipped = T::zero();
        for v in raw.iter_mut() {
            if *v < T::zero() {
                clipped += -*v;
                *v = T::zero();
            }
        }
        let sum: T = raw.iter().copied().sum();
        if sum <= T::zero() {
            return Err(Error::Probability(
                "corrected distribution has no positive mass".into(),
            ));
        }
        for v in raw.iter_mut() {
            *v /= sum;
        }
        Ok(CorrectionOutcome {
            probabilities: ProbabilityVector::from_simplex(raw),
            clipped_mass: clipped,
        })
    }

    pub fn diagnostics(&self) -> CalibrationDiagnostics<T> {
        CalibrationDiagnostics::inspect(&self.entries, self.dim).expect("square by construction")
    }

    /// Parses the CSV layout described in the module docs.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let (num_qubits, entries) = parse_csv(text)?;
        Self::new(num_qubits, entries)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("basis");
        for j in 0..self.dim {
            let _ = write!(out, ",{}", basis_label(j, self.num_qubits));
        }
        out.push('\n');
        for i in 0..self.dim {
            let _ = write!(out, "{}", basis_label(i, self.num_qubits));
            for j in 0..self.dim {
                let _ = write!(out, ",{}", self.entries[i * self.dim + j]);
            }
            out.push('\n');
        }
        out
    }
}

/// Parses the CSV layout into `(num_qubits, row-major entries)` with shape
/// checks only, so invalid matrices can still be diagnosed.
pub fn parse_csv<T: Scalar>(text: &str) -> Result<(usize, Vec<T>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or(Error::Empty {
        what: "calibration CSV",
    })?;
    let labels: Vec<&str> = header.split(',').skip(1).collect();
    let dim = labels.len();
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::Calibration(format!(
            "header declares {dim} basis states; expected a power of two"
        )));
    }
    let num_qubits = dim.trailing_zeros() as usize;
    let mut entries = Vec::with_capacity(dim * dim);
    let mut rows = 0usize;
    for (line_no, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let label = fields.next().unwrap_or_default();
        let expected = basis_label(rows, num_qubits);
        if label != expected {
            return Err(Error::Calibration(format!(
                "row {} labelled `{label}`, expected `{expected}`",
                line_no + 2
            )));
        }
        let values: Vec<T> = fields
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map(T::of)
                    .map_err(|e| Error::Parse(format!("row {}: {e}", line_no + 2)))
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::Calibration(format!(
                "row {} has {} values, expected {dim}",
                line_no + 2,
                values.len()
            )));
        }
        entries.extend(values);
        rows += 1;
    }
    if rows != dim {
        return Err(Error::Calibration(format!(
            "{rows} rows for {dim} basis states"
        )));
    }
    Ok((num_qubits, entries))
}

/// Generates a random diagonally-dominant column-stochastic matrix:
/// every diagonal entry is at least `dominance`.
pub fn synthetic_calibration<T: Scalar, R: Rng + ?Sized>(
    num_qubits: usize,
    dominance: f64,
    rng: &mut R,
) -> Result<CalibrationMatrix<T>> {
    if !(0.0..=1.0).contains(&dominance) {
        return Err(Error::Config(format!(
            "diagonal dominance {dominance} outside [0, 1]"
        )));
    }
    let dim = 1usize << num_qubits;
    let mut entries = vec![T::zero(); dim * dim];
    for j in 0..dim {
        let diag = dominance + (1.0 - dominance) * 0.9 * rng.gen::<f64>();
        let mut weights: Vec<f64> = (0..dim - 1).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w *= (1.0 - diag) / total;
        }
        let mut k = 0;
        for i in 0..dim {
            if i == j {
                entries[i * dim + j] = T::of(diag);
            } else {
                entries[i * dim + j] = T::of(weights[k]);
                k += 1;
            }
        }
    }
    CalibrationMatrix::new(num_qubits, entries)
}
