//! Logical two-qubit primitives: measurement bases, the CNOT unitary and
//! validated density matrices. Index convention: `2 * control + target`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermiticity_deviation, re, trace, Ket4, Op2, Op4, C64};

/// The two complementary product bases in which truth tables are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    ZZ,
    XX,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::ZZ, Basis::XX];

    /// Row/column labels in table order, control bit first.
    pub fn labels(self) -> [&'static str; 4] {
        match self {
            Basis::ZZ => ["0z0z", "0z1z", "1z0z", "1z1z"],
            Basis::XX => ["0x0x", "0x1x", "1x0x", "1x1x"],
        }
    }

    pub fn label(self, index: usize) -> &'static str {
        self.labels()[index]
    }

    pub fn index_of(self, label: &str) -> Option<usize> {
        self.labels().iter().position(|l| *l == label)
    }

    /// Single-qubit basis kets in the logical computational basis.
    pub fn single_qubit(self) -> [[C64; 2]; 2] {
        let s = FRAC_1_SQRT_2;
        match self {
            Basis::ZZ => [[re(1.0), re(0.0)], [re(0.0), re(1.0)]],
            Basis::XX => [[re(s), re(s)], [re(s), re(-s)]],
        }
    }

    /// Two-qubit basis ket for table index `index` (control bit high).
    pub fn ket(self, index: usize) -> Ket4 {
        let q = self.single_qubit();
        product_ket(q[index >> 1], q[index & 1])
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::ZZ => "ZZ",
            Basis::XX => "XX",
        })
    }
}

impl std::str::FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ZZ" => Ok(Basis::ZZ),
            "XX" => Ok(Basis::XX),
            other => Err(Error::Malformed(format!("unknown basis `{other}`"))),
        }
    }
}

pub fn product_ket(control: [C64; 2], target: [C64; 2]) -> Ket4 {
    Ket4::from_fn(|i, _| control[i >> 1] * target[i & 1])
}

pub fn cnot() -> Op4 {
    let mut m = Op4::zeros();
    for (input, output) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        m[(output, input)] = re(1.0);
    }
    m
}

pub fn pauli_x() -> Op2 {
    Op2::new(re(0.0), re(1.0), re(1.0), re(0.0))
}

pub fn pauli_y() -> Op2 {
    Op2::new(re(0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), re(0.0))
}

pub fn pauli_z() -> Op2 {
    Op2::new(re(1.0), re(0.0), re(0.0), re(-1.0))
}

/// A two-qubit density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    density: Op4,
}

impl TwoQubitState {
    pub fn new(density: Op4) -> Result<Self> {
        let herm = hermiticity_deviation(&density);
        if herm > 1e-12 {
            return Err(Error::DensityMatrix(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = trace(&density).re;
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::DensityMatrix(format!("trace {tr} != 1")));
        }
        let min = hermitian_eigenvalues(&density).last().copied().unwrap_or(0.0);
        if min < -1e-10 {
            return Err(Error::DensityMatrix(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(TwoQubitState { density })
    }

    /// Pure state from an arbitrary nonzero ket (normalized here).
    pub fn pure(ket: &Ket4) -> Result<Self> {
        let n = ket.norm_squared();
        if n == 0.0 {
            return Err(Error::DensityMatrix("zero ket".into()));
        }
        let rho = ket * ket.adjoint() / re(n);
        // Outer products are Hermitian only up to rounding in the conjugation.
        Self::new((rho + rho.adjoint()).map(|z| z * 0.5))
    }

    pub fn density(&self) -> &Op4 {
        &self.density
    }

    pub fn into_inner(self) -> Op4 {
        self.density
    }
}
