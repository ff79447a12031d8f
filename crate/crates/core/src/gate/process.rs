use crate::certify::{expected_permutation, ChiMatrix};
use crate::error::{Error, Result};
use crate::linalg::{choi_vector, hermitian_eigenvalues, hermiticity_deviation, re, trace, Ket4, Op16, Op4};
use crate::qubits::{cnot, Basis, TwoQubitState};

use super::{check_lambda, GateKraus};

/// The coincidence-conditioned process: a trace-one Choi matrix together with
/// the average success probability that was divided out.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalProcess {
    pub choi: Op16,
    pub avg_success: f64,
    pub lambda: f64,
}

impl ConditionalProcess {
    pub fn from_kraus(kraus: &GateKraus, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let outer = |k: &Op4| {
            let v = choi_vector(k);
            v * v.adjoint()
        };
        let choi = outer(&kraus.coherent) * re(lambda)
            + (outer(&kraus.straight) + outer(&kraus.swapped)) * re(1.0 - lambda);
        Self::from_unnormalized(choi, lambda)
    }

    /// Normalizes a Choi matrix of a trace-decreasing map.
    pub fn from_unnormalized(choi: Op16, lambda: f64) -> Result<Self> {
        let tr = trace(&choi).re;
        if tr <= 1e-15 {
            return Err(Error::Degenerate("zero coincidence probability for every input".into()));
        }
        let choi = choi / re(tr);
        let choi = (choi + choi.adjoint()) * re(0.5);
        Ok(ConditionalProcess { choi, avg_success: tr / 4.0, lambda })
    }

    /// Checks the stored invariants: Hermitian, PSD and unit trace.
    pub fn validate(&self) -> Result<()> {
        let herm = hermiticity_deviation(&self.choi);
        if herm > 1e-10 {
            return Err(Error::ProcessMatrix(format!("Choi not Hermitian ({herm:.3e})")));
        }
        let min = hermitian_eigenvalues(&self.choi).last().copied().unwrap_or(0.0);
        if min < -1e-10 {
            return Err(Error::ProcessMatrix(format!("Choi eigenvalue {min:.3e}")));
        }
        let tr = trace(&self.choi).re;
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::ProcessMatrix(format!("Choi trace {tr}")));
        }
        Ok(())
    }

    /// The normalized map applied to any operator:
    /// `E(X)[o, o'] = 4 sum_{i,j} X[i, j] J[4i + o, 4j + o']`.
    pub fn apply(&self, x: &Op4) -> Op4 {
        Op4::from_fn(|o, p| {
            let mut acc = re(0.0);
            for i in 0..4 {
                for j in 0..4 {
                    acc += x[(i, j)] * self.choi[(4 * i + o, 4 * j + p)];
                }
            }
            acc * re(4.0)
        })
    }

    /// Success probability of a pure input relative to the average.
    pub fn relative_success(&self, ket: &Ket4) -> f64 {
        let rho = ket * ket.adjoint() / re(ket.norm_squared());
        trace(&self.apply(&rho)).re
    }

    /// Post-selected output for a pure input, normalized by that input's own
    /// success probability.
    pub fn output_state(&self, ket: &Ket4) -> Result<TwoQubitState> {
        let rho = ket * ket.adjoint() / re(ket.norm_squared());
        let out = self.apply(&rho);
        let tr = trace(&out).re;
        if tr <= 1e-15 {
            return Err(Error::Degenerate("input is never post-selected".into()));
        }
        let out = out / re(tr);
        TwoQubitState::new((out + out.adjoint()) * re(0.5))
    }

    /// Ratio of the largest to the smallest success probability over the
    /// eight ZZ and XX basis inputs; 1 when success is input-independent.
    pub fn success_ratio(&self) -> f64 {
        let s: Vec<f64> = Basis::ALL
            .iter()
            .flat_map(|b| (0..4).map(move |i| self.relative_success(&b.ket(i))))
            .collect();
        let max = s.iter().copied().fold(f64::MIN, f64::max);
        let min = s.iter().copied().fold(f64::MAX, f64::min);
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Correct-output probability averaged over the basis inputs, computed
    /// from the average-success-normalized map. Equals the sum of the chi
    /// diagonal over the syndromes that are invisible in `basis`.
    pub fn implied_fidelity(&self, basis: Basis) -> f64 {
        let perm = expected_permutation(basis);
        let mut acc = 0.0;
        for (i, &o) in perm.iter().enumerate() {
            let ki = basis.ket(i);
            let ko = basis.ket(o);
            acc += (ko.adjoint() * self.apply(&(ki * ki.adjoint())) * ko)[(0, 0)].re;
        }
        acc / 4.0
    }

    pub fn chi(&self) -> ChiMatrix {
        ChiMatrix::from_choi(&self.choi)
    }
}

/// `<<U_CNOT| J |U_CNOT>> / 4`, the chi element of the ideal operation.
pub fn process_fidelity_exact(process: &ConditionalProcess) -> f64 {
    let v = choi_vector(&cnot());
    (v.adjoint() * process.choi * v)[(0, 0)].re / 4.0
}
