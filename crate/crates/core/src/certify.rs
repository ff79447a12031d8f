//! Measurement-side certification: classical truth-table fidelities in the
//! complementary ZZ/XX bases, process-fidelity and concurrence bounds, the
//! error-syndrome decomposition, the 16 syndrome unitaries with operator-sum
//! application, and extremal completions of the chi diagonal.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{
    choi_vector, hermitian_eigenvalues, hermiticity_deviation, kron2, max_abs_diff, re, Op16, Op4, C64,
};
use crate::qubits::{cnot, pauli_x, pauli_z, Basis, TwoQubitState};

/// Bit-flip classification of a truth-table outcome relative to the ideal
/// output. Bit masks act on the `2 * control + target` index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Syndrome {
    #[serde(rename = "0")]
    None,
    #[serde(rename = "C")]
    Control,
    #[serde(rename = "T")]
    Target,
    #[serde(rename = "B")]
    Both,
}

impl Syndrome {
    /// Table order 0, C, T, B.
    pub const ALL: [Syndrome; 4] = [Syndrome::None, Syndrome::Control, Syndrome::Target, Syndrome::Both];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn mask(self) -> usize {
        match self {
            Syndrome::None => 0b00,
            Syndrome::Control => 0b10,
            Syndrome::Target => 0b01,
            Syndrome::Both => 0b11,
        }
    }

    pub fn from_mask(mask: usize) -> Syndrome {
        match mask & 0b11 {
            0b00 => Syndrome::None,
            0b10 => Syndrome::Control,
            0b01 => Syndrome::Target,
            _ => Syndrome::Both,
        }
    }

    pub fn symbol(self) -> char {
        ['0', 'C', 'T', 'B'][self.index()]
    }
}

impl fmt::Display for Syndrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Ideal output index for each input index: CNOT in ZZ, reverse CNOT in XX.
pub fn expected_permutation(basis: Basis) -> [usize; 4] {
    match basis {
        Basis::ZZ => [0, 1, 3, 2],
        Basis::XX => [0, 3, 2, 1],
    }
}

/// Row-stochastic input -> output probability table in a declared basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTable {
    basis: Basis,
    probs: [[f64; 4]; 4],
}

impl TruthTable {
    /// Row-sum tolerance for simulated tables.
    pub const SIMULATED_TOL: f64 = 1e-9;
    /// Row-sum tolerance for tables derived from measured data.
    pub const DATA_TOL: f64 = 1e-6;

    pub fn new(basis: Basis, probs: [[f64; 4]; 4], row_tol: f64) -> Result<Self> {
        for (i, row) in probs.iter().enumerate() {
            if let Some(p) = row.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
                return Err(Error::TruthTable(format!("row {} has invalid entry {p}", basis.label(i))));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > row_tol {
                return Err(Error::TruthTable(format!("row {} sums to {sum}", basis.label(i))));
            }
        }
        Ok(TruthTable { basis, probs })
    }

    /// The ideal permutation table of the CNOT in `basis`.
    pub fn ideal(basis: Basis) -> Self {
        let mut probs = [[0.0; 4]; 4];
        for (i, &o) in expected_permutation(basis).iter().enumerate() {
            probs[i][o] = 1.0;
        }
        TruthTable { basis, probs }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn probs(&self) -> &[[f64; 4]; 4] {
        &self.probs
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TruthTableDoc::from(self)).expect("table serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TruthTableDoc =
            serde_json::from_str(text).map_err(|e| Error::Malformed(format!("truth table: {e}")))?;
        let labels = doc.basis.labels().map(String::from).to_vec();
        if doc.inputs != labels || doc.outputs != labels {
            return Err(Error::TruthTable("labels do not match the declared basis".into()));
        }
        TruthTable::new(doc.basis, doc.probs, Self::DATA_TOL)
    }
}

#[derive(Serialize, Deserialize)]
struct TruthTableDoc {
    basis: Basis,
    inputs: Vec<String>,
    outputs: Vec<String>,
    probs: [[f64; 4]; 4],
}

impl From<&TruthTable> for TruthTableDoc {
    fn from(t: &TruthTable) -> Self {
        let labels: Vec<String> = t.basis.labels().map(String::from).to_vec();
        TruthTableDoc { basis: t.basis, inputs: labels.clone(), outputs: labels, probs: t.probs }
    }
}

/// Mean over inputs of the probability of observing syndrome `s`.
fn syndrome_mass(table: &TruthTable, s: Syndrome) -> f64 {
    let perm = expected_permutation(table.basis);
    let mut acc = 0.0;
    for (i, row) in table.probs.iter().enumerate() {
        acc += row[perm[i] ^ s.mask()];
    }
    acc / 4.0
}

/// Probability of the correct output averaged over the four inputs.
pub fn classical_fidelity(table: &TruthTable) -> f64 {
    syndrome_mass(table, Syndrome::None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessBounds {
    pub lower: f64,
    pub upper: f64,
}

/// `max(0, F_zz + F_xx - 1) <= F_process <= min(F_zz, F_xx)`.
pub fn process_bounds(f_zz: f64, f_xx: f64) -> Result<ProcessBounds> {
    for (name, f) in [("F_zz", f_zz), ("F_xx", f_xx)] {
        if !(-1e-9..=1.0 + 1e-9).contains(&f) {
            return Err(Error::Parameter(format!("{name} = {f} outside [0, 1]")));
        }
    }
    Ok(ProcessBounds { lower: (f_zz + f_xx - 1.0).max(0.0), upper: f_zz.min(f_xx) })
}

/// Minimal concurrence generated from product inputs, `max(0, 2 F - 1)`.
pub fn concurrence_bound(f_lower: f64) -> f64 {
    (2.0 * f_lower - 1.0).max(0.0)
}

/// Per-syndrome error probabilities of the ZZ and XX operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyndromeMarginals {
    pub zz: [f64; 4],
    pub xx: [f64; 4],
}

impl SyndromeMarginals {
    pub fn new(zz: [f64; 4], xx: [f64; 4]) -> Result<Self> {
        for (name, v) in [("zz", &zz), ("xx", &xx)] {
            if v.iter().any(|p| !(p.is_finite() && *p >= -1e-12)) {
                return Err(Error::Marginals(format!("{name} has a negative entry: {v:?}")));
            }
            let sum: f64 = v.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::Marginals(format!("{name} sums to {sum}")));
            }
        }
        Ok(SyndromeMarginals { zz, xx })
    }
}

pub fn syndrome_marginals(zz: &TruthTable, xx: &TruthTable) -> Result<SyndromeMarginals> {
    for (table, expected) in [(zz, Basis::ZZ), (xx, Basis::XX)] {
        if table.basis != expected {
            return Err(Error::BasisMismatch { expected: expected.to_string(), found: table.basis.to_string() });
        }
    }
    SyndromeMarginals::new(
        Syndrome::ALL.map(|s| syndrome_mass(zz, s)),
        Syndrome::ALL.map(|s| syndrome_mass(xx, s)),
    )
}

/// Diagonal chi elements arranged as rows = ZZ syndrome, columns = XX syndrome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiDiagonal {
    pub values: [[f64; 4]; 4],
}

impl ChiDiagonal {
    pub fn row_sums(&self) -> [f64; 4] {
        self.values.map(|r| r.iter().sum())
    }

    pub fn column_sums(&self) -> [f64; 4] {
        std::array::from_fn(|j| self.values.iter().map(|r| r[j]).sum())
    }

    /// The process fidelity, `chi_{00,00}`.
    pub fn fidelity(&self) -> f64 {
        self.values[0][0]
    }

    pub fn max_margin_error(&self, m: &SyndromeMarginals) -> f64 {
        let r = self.row_sums();
        let c = self.column_sums();
        (0..4).map(|i| (r[i] - m.zz[i]).abs().max((c[i] - m.xx[i]).abs())).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    /// Lowest process fidelity consistent with the marginals.
    Worst,
    /// Highest process fidelity consistent with the marginals.
    Best,
}

/// Extremal completion of the chi diagonal with fixed row (ZZ) and column
/// (XX) sums. `Worst` attains `chi_00 = max(0, p0 + q0 - 1)` by keeping ZZ
/// and XX errors in disjoint syndromes; `Best` attains `min(p0, q0)` and
/// spreads the remaining mass as a proportional outer product.
pub fn extremal_chi(m: &SyndromeMarginals, mode: Extremum) -> Result<ChiDiagonal> {
    let m = SyndromeMarginals::new(m.zz, m.xx)?;
    let (p, q) = (m.zz, m.xx);
    let mut v = [[0.0; 4]; 4];
    match mode {
        Extremum::Worst => {
            let f = (p[0] + q[0] - 1.0).max(0.0);
            v[0][0] = f;
            let mut col_left = q;
            let mut row_left = p;
            // Remaining correct-ZZ mass goes onto XX-error columns.
            let mut rest = p[0] - f;
            for j in 1..4 {
                let x = rest.min(col_left[j]).max(0.0);
                v[0][j] = x;
                col_left[j] -= x;
                rest -= x;
            }
            // Remaining correct-XX mass goes onto ZZ-error rows.
            let mut rest = q[0] - f;
            for i in 1..4 {
                let x = rest.min(row_left[i]).max(0.0);
                v[i][0] = x;
                row_left[i] -= x;
                rest -= x;
            }
            // Northwest-corner fill of the error-error block (empty when f > 0).
            let (mut i, mut j) = (1, 1);
            while i < 4 && j < 4 {
                let x = row_left[i].min(col_left[j]).max(0.0);
                v[i][j] += x;
                row_left[i] -= x;
                col_left[j] -= x;
                if row_left[i] <= col_left[j] {
                    i += 1;
                } else {
                    j += 1;
                }
            }
        }
        Extremum::Best => {
            let f = p[0].min(q[0]);
            let mut pr = p;
            let mut qr = q;
            pr[0] -= f;
            qr[0] -= f;
            let s: f64 = qr.iter().sum();
            v[0][0] = f;
            if s > 1e-15 {
                for i in 0..4 {
                    for j in 0..4 {
                        v[i][j] += pr[i] * qr[j] / s;
                    }
                }
            }
        }
    }
    Ok(ChiDiagonal { values: v })
}

/// One of the 16 orthogonal error unitaries `E_a F_b U_CNOT`: `E_a` realizes
/// ZZ syndrome `a` (bit flips), `F_b` realizes XX syndrome `b` (phase flips).
#[derive(Debug, Clone, PartialEq)]
pub struct SyndromeUnitary {
    pub zz: Syndrome,
    pub xx: Syndrome,
    pub matrix: Op4,
}

impl SyndromeUnitary {
    /// Position in the 16-element basis, `4 * zz + xx`.
    pub fn index(&self) -> usize {
        4 * self.zz.index() + self.xx.index()
    }

    pub fn name(&self) -> String {
        format!("{}{}", self.zz, self.xx)
    }
}

fn flips(s: Syndrome, op: crate::linalg::Op2) -> Op4 {
    let id = crate::linalg::Op2::identity();
    let mask = s.mask();
    let control = if mask & 0b10 != 0 { op } else { id };
    let target = if mask & 0b01 != 0 { op } else { id };
    kron2(&control, &target)
}

pub fn syndrome_unitaries() -> Vec<SyndromeUnitary> {
    let u = cnot();
    let mut out = Vec::with_capacity(16);
    for a in Syndrome::ALL {
        for b in Syndrome::ALL {
            let matrix = flips(a, pauli_x()) * flips(b, pauli_z()) * u;
            out.push(SyndromeUnitary { zz: a, xx: b, matrix });
        }
    }
    out
}

/// Full process matrix in the syndrome-unitary basis:
/// `rho_out = sum_{k,l} chi_kl U_k rho_in U_l^†`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiMatrix {
    pub values: Op16,
}

impl ChiMatrix {
    /// Converts a trace-one Choi matrix (`4 * input + output` indexing) into
    /// the syndrome basis.
    pub fn from_choi(choi: &Op16) -> Self {
        let vecs: Vec<_> = syndrome_unitaries().iter().map(|u| choi_vector(&u.matrix)).collect();
        let values = Op16::from_fn(|k, l| (vecs[k].adjoint() * choi * vecs[l])[(0, 0)] / re(4.0));
        ChiMatrix { values }
    }

    pub fn from_diagonal(d: &ChiDiagonal) -> Self {
        let mut values = Op16::zeros();
        for a in 0..4 {
            for b in 0..4 {
                values[(4 * a + b, 4 * a + b)] = re(d.values[a][b]);
            }
        }
        ChiMatrix { values }
    }

    pub fn diagonal(&self) -> ChiDiagonal {
        let mut values = [[0.0; 4]; 4];
        for (a, row) in values.iter_mut().enumerate() {
            for (b, cell) in row.iter_mut().enumerate() {
                *cell = self.values[(4 * a + b, 4 * a + b)].re;
            }
        }
        ChiDiagonal { values }
    }

    /// The operator sum applied literally to any 4x4 operator.
    pub fn apply(&self, input: &Op4) -> Op4 {
        let us = syndrome_unitaries();
        let mut out = Op4::zeros();
        for (k, uk) in us.iter().enumerate() {
            let left = uk.matrix * input;
            for (l, ul) in us.iter().enumerate() {
                let w = self.values[(k, l)];
                if w != C64::default() {
                    out += left * ul.matrix.adjoint() * w;
                }
            }
        }
        out
    }

    /// `sum_{k,l} chi_kl U_l^† U_k`; the identity for trace-preserving chi.
    pub fn trace_operator(&self) -> Op4 {
        let us = syndrome_unitaries();
        let mut out = Op4::zeros();
        for (k, uk) in us.iter().enumerate() {
            for (l, ul) in us.iter().enumerate() {
                out += ul.matrix.adjoint() * uk.matrix * self.values[(k, l)];
            }
        }
        out
    }
}

/// Applies a trace-preserving, completely positive process matrix to a state.
pub fn apply_operator_sum(chi: &ChiMatrix, rho_in: &TwoQubitState) -> Result<TwoQubitState> {
    let herm = hermiticity_deviation(&chi.values);
    if herm > 1e-10 {
        return Err(Error::ProcessMatrix(format!("not Hermitian (deviation {herm:.3e})")));
    }
    let min = hermitian_eigenvalues(&chi.values).last().copied().unwrap_or(0.0);
    if min < -1e-10 {
        return Err(Error::ProcessMatrix(format!("not positive semidefinite (eigenvalue {min:.3e})")));
    }
    let total: f64 = (0..16).map(|k| chi.values[(k, k)].re).sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::ProcessMatrix(format!("diagonal sums to {total}")));
    }
    let tp = max_abs_diff(&chi.trace_operator(), &Op4::identity());
    if tp > 1e-8 {
        return Err(Error::ProcessMatrix(format!("not trace preserving (deviation {tp:.3e})")));
    }
    let out = chi.apply(rho_in.density());
    TwoQubitState::new((out + out.adjoint()).map(|z| z * 0.5))
}
