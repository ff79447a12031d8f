use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{kron2, psd_factor, Op4};
use crate::qubits::{pauli_y, product_ket, Basis, TwoQubitState};

use super::ConditionalProcess;

/// Wootters concurrence, `max(0, l1 - l2 - l3 - l4)`. The `l_i` are the
/// square roots of the eigenvalues of `rho (Y x Y) rho* (Y x Y)`, computed as
/// the singular values of `W^T (Y x Y) W` for `rho = W W^†`; this keeps
/// near-zero `l_i` at rounding level instead of the square root of it.
pub fn concurrence(state: &TwoQubitState) -> f64 {
    let yy = kron2(&pauli_y(), &pauli_y());
    let w = psd_factor(state.density(), 1e-13);
    let tau: Op4 = w.transpose() * yy * w;
    let mut l: Vec<f64> = tau.singular_values().iter().copied().collect();
    l.sort_by(|a, b| b.total_cmp(a));
    (l[0] - l[1] - l[2] - l[3]).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capability {
    pub concurrence: f64,
    /// Maximizing product input, e.g. `0x` for the control and `0z` for the
    /// target.
    pub control: String,
    pub target: String,
}

const SINGLE: [(Basis, usize, &str); 4] =
    [(Basis::ZZ, 0, "0z"), (Basis::ZZ, 1, "1z"), (Basis::XX, 0, "0x"), (Basis::XX, 1, "1x")];

/// Largest output concurrence over the 16 product inputs built from the Z
/// and X eigenstates of each qubit. Inputs that are never post-selected are
/// skipped; the first maximizer in scan order is reported.
pub fn entanglement_capability_sim(process: &ConditionalProcess) -> Result<Capability> {
    let mut best: Option<Capability> = None;
    for (cb, cbit, cname) in SINGLE {
        for (tb, tbit, tname) in SINGLE {
            let ket = product_ket(cb.single_qubit()[cbit], tb.single_qubit()[tbit]);
            if process.relative_success(&ket) <= 1e-12 {
                continue;
            }
            let c = concurrence(&process.output_state(&ket)?);
            if best.as_ref().map_or(true, |b| c > b.concurrence + 1e-12) {
                best = Some(Capability { concurrence: c, control: cname.into(), target: tname.into() });
            }
        }
    }
    Ok(best.unwrap_or(Capability { concurrence: 0.0, control: String::new(), target: String::new() }))
}
