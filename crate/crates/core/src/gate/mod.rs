//! Post-selected gate execution on logical two-qubit inputs.
//!
//! A circuit is composed once over a registry carrying two photon tags.
//! Equal tags give the indistinguishable (interfering) photon pair; distinct
//! tags give fully distinguishable photons whose coincidence events split
//! into a "straight" branch (the control photon leaves through the control
//! output) and a "swapped" branch. Each branch is a 4x4 Kraus operator on
//! the logical space.

mod encoding;
mod entanglement;
mod process;

use std::sync::Arc;

pub use encoding::{basis_qubit, check_normalized, compensate_input, decode_weight, encode, Qubit, Role};
pub use entanglement::{concurrence, entanglement_capability_sim, Capability};
pub use process::{process_fidelity_exact, ConditionalProcess};

use crate::certify::TruthTable;
use crate::error::{Error, Result};
use crate::fock::{
    apply_mode_transform, coincidence_project, make_two_photon_state, FockState, ModeLabel, ModeRegistry,
    ModeTransform, Polarization,
};
use crate::linalg::{fix_global_phase, re, Op4, C64};
use crate::optics::{compose_circuit, perturb, CircuitSpec, Ports};
use crate::qubits::Basis;

/// A circuit with its noise offsets applied and its unitary lifted onto a
/// two-tag mode registry.
#[derive(Debug, Clone)]
pub struct PreparedGate {
    registry: Arc<ModeRegistry>,
    transform: ModeTransform,
    ports: Ports,
    compensate: bool,
    clamped: bool,
}

#[derive(Debug, Clone)]
pub struct GateOutput {
    /// Coincidence-projected output, sub-normalized.
    pub state: FockState,
    pub success: f64,
}

impl PreparedGate {
    pub fn new(circuit: &CircuitSpec) -> Result<Self> {
        let perturbed = perturb(circuit, &circuit.noise)?;
        let circuit = perturbed.circuit;
        let ports = &circuit.ports;
        if ports.control_in == ports.target_in || ports.control_out == ports.target_out {
            return Err(Error::Circuit("control and target must use distinct arms".into()));
        }
        let registry = Arc::new(ModeRegistry::from_arms(&circuit.registry, 2)?);
        let transform = compose_circuit(&circuit)?.on_registry(&registry)?;
        Ok(PreparedGate {
            registry,
            transform,
            ports: circuit.ports.clone(),
            compensate: circuit.compensate_inputs,
            clamped: perturbed.clamped,
        })
    }

    /// True when a transmittance offset pushed a PPBS outside [0, 1].
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    fn prepare(&self, role: Role, q: Qubit) -> Result<crate::fock::PolarizationAmplitudes> {
        check_normalized(&q)?;
        let amp = encode(role, q);
        if self.compensate {
            compensate_input(amp)
        } else {
            Ok(amp)
        }
    }

    fn run_tagged(&self, control: Qubit, target: Qubit, tags: (u8, u8)) -> Result<FockState> {
        let input = make_two_photon_state(
            self.registry.clone(),
            (&self.ports.control_in, self.prepare(Role::Control, control)?),
            (&self.ports.target_in, self.prepare(Role::Target, target)?),
            tags,
        )?;
        let out = apply_mode_transform(&input, &self.transform)?;
        coincidence_project(&out, &self.ports.control_out, &self.ports.target_out)
    }

    /// Indistinguishable photons through the circuit, post-selected on one
    /// photon in each output arm.
    pub fn run(&self, control: Qubit, target: Qubit) -> Result<GateOutput> {
        let state = self.run_tagged(control, target, (0, 0))?;
        let success = state.norm_sqr();
        Ok(GateOutput { state, success })
    }

    /// Logical output amplitudes, `out[2 * c + t]`, with the control read
    /// from a photon of tag `control_tag` in the control output arm and the
    /// target from a photon of tag `target_tag` in the target output arm.
    fn readout(&self, state: &FockState, control_tag: u8, target_tag: u8) -> Result<[C64; 4]> {
        let mut out = [C64::default(); 4];
        for p in Polarization::BOTH {
            for q in Polarization::BOTH {
                let a = ModeLabel::new(self.ports.control_out.as_str(), p, control_tag);
                let b = ModeLabel::new(self.ports.target_out.as_str(), q, target_tag);
                let amp = state.amplitude(&self.registry.occupation(&[&a, &b])?);
                if amp == C64::default() {
                    continue;
                }
                for (k, slot) in out.iter_mut().enumerate() {
                    let w = decode_weight(Role::Control, k >> 1, p) * decode_weight(Role::Target, k & 1, q);
                    *slot += amp * w;
                }
            }
        }
        Ok(out)
    }

    pub fn kraus(&self) -> Result<GateKraus> {
        let mut coherent = Op4::zeros();
        let mut straight = Op4::zeros();
        let mut swapped = Op4::zeros();
        for i in 0..4 {
            let control = basis_qubit(Basis::ZZ, i >> 1);
            let target = basis_qubit(Basis::ZZ, i & 1);
            let same = self.run_tagged(control, target, (0, 0))?;
            let tagged = self.run_tagged(control, target, (0, 1))?;
            let cols = [
                (&mut coherent, self.readout(&same, 0, 0)?),
                (&mut straight, self.readout(&tagged, 0, 1)?),
                (&mut swapped, self.readout(&tagged, 1, 0)?),
            ];
            for (m, col) in cols {
                for (o, a) in col.into_iter().enumerate() {
                    m[(o, i)] = a;
                }
            }
        }
        Ok(GateKraus { coherent, straight, swapped })
    }
}

/// Logical Kraus operators of one circuit. For indistinguishable photons the
/// two branches add coherently: `coherent = straight + swapped`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateKraus {
    pub coherent: Op4,
    pub straight: Op4,
    pub swapped: Op4,
}

impl GateKraus {
    pub fn from_circuit(circuit: &CircuitSpec) -> Result<Self> {
        PreparedGate::new(circuit)?.kraus()
    }

    /// Unconditioned coincidence probabilities `p(o|i)` in `basis` at
    /// indistinguishability `lambda`.
    pub fn joint_probabilities(&self, basis: Basis, lambda: f64) -> Result<[[f64; 4]; 4]> {
        check_lambda(lambda)?;
        let prob = |k: &Op4, i: usize, o: usize| (basis.ket(o).adjoint() * k * basis.ket(i))[(0, 0)].norm_sqr();
        let mut p = [[0.0; 4]; 4];
        for (i, row) in p.iter_mut().enumerate() {
            for (o, cell) in row.iter_mut().enumerate() {
                *cell = lambda * prob(&self.coherent, i, o)
                    + (1.0 - lambda) * (prob(&self.straight, i, o) + prob(&self.swapped, i, o));
            }
        }
        Ok(p)
    }

    /// Per-input conditional truth table; each row is normalized by that
    /// input's own coincidence probability.
    pub fn truth_table(&self, basis: Basis, lambda: f64) -> Result<TruthTable> {
        let joint = self.joint_probabilities(basis, lambda)?;
        let mut probs = [[0.0; 4]; 4];
        for (i, row) in joint.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if total <= 1e-15 {
                return Err(Error::DegenerateRow(basis.label(i).to_string()));
            }
            probs[i] = row.map(|p| p / total);
        }
        TruthTable::new(basis, probs, TruthTable::SIMULATED_TOL)
    }

    pub fn process(&self, lambda: f64) -> Result<ConditionalProcess> {
        ConditionalProcess::from_kraus(self, lambda)
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Parameter(format!("lambda = {lambda} outside [0, 1]")));
    }
    Ok(())
}

pub fn run_gate(circuit: &CircuitSpec, control: Qubit, target: Qubit) -> Result<GateOutput> {
    PreparedGate::new(circuit)?.run(control, target)
}

pub fn conditional_process(circuit: &CircuitSpec, lambda: f64) -> Result<ConditionalProcess> {
    check_lambda(lambda)?;
    GateKraus::from_circuit(circuit)?.process(lambda)
}

pub fn truth_table(circuit: &CircuitSpec, basis: Basis, lambda: f64) -> Result<TruthTable> {
    check_lambda(lambda)?;
    GateKraus::from_circuit(circuit)?.truth_table(basis, lambda)
}

/// The indistinguishable-photon operator scaled to unit average success and
/// with its global phase fixed.
pub fn post_selected_operator(circuit: &CircuitSpec) -> Result<Op4> {
    let k = GateKraus::from_circuit(circuit)?.coherent;
    let avg = (k.adjoint() * k).trace().re / 4.0;
    if avg <= 1e-30 {
        return Err(Error::Degenerate("no coincidence events".into()));
    }
    Ok(fix_global_phase(&(k / re(avg.sqrt()))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{classical_fidelity, expected_permutation};
    use crate::linalg::max_abs_diff;
    use crate::optics::{build_compact_cnot, CnotVariant, NoiseParams, TransmittanceOffset};
    use crate::qubits::cnot;

    fn full() -> CircuitSpec {
        build_compact_cnot(CnotVariant::FullPpbs)
    }

    fn compensated() -> CircuitSpec {
        build_compact_cnot(CnotVariant::CompensatedInput)
    }

    #[test]
    fn ideal_operator_is_cnot() {
        for circuit in [full(), compensated()] {
            let u = post_selected_operator(&circuit).unwrap();
            assert!(max_abs_diff(&u, &cnot()) < 1e-10, "{u}");
        }
    }

    #[test]
    fn zz_examples() {
        let gate = PreparedGate::new(&full()).unwrap();
        let z = |b| basis_qubit(Basis::ZZ, b);
        let out = gate.run(z(1), z(0)).unwrap();
        assert!((out.success - 1.0 / 9.0).abs() < 1e-12);
        let amps = gate.readout(&out.state, 0, 0).unwrap();
        assert!((amps[3].norm_sqr() - 1.0 / 9.0).abs() < 1e-12);

        let out = gate.run(z(0), z(0)).unwrap();
        let amps = gate.readout(&out.state, 0, 0).unwrap();
        assert!((amps[0].norm_sqr() - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn xx_reverse_cnot_example() {
        let gate = PreparedGate::new(&compensated()).unwrap();
        let x = |b| basis_qubit(Basis::XX, b);
        let out = gate.run(x(0), x(1)).unwrap();
        assert!((out.success - 1.0 / 9.0).abs() < 1e-12);
        let amps = gate.readout(&out.state, 0, 0).unwrap();
        let ket = crate::linalg::Ket4::from_fn(|i, _| amps[i]);
        let p = (Basis::XX.ket(3).adjoint() * ket)[(0, 0)].norm_sqr();
        assert!((p - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn branches_add_coherently() {
        for circuit in [full(), compensated()] {
            let k = GateKraus::from_circuit(&circuit).unwrap();
            assert!(max_abs_diff(&k.coherent, &(k.straight + k.swapped)) < 1e-12);
        }
    }

    #[test]
    fn distinguishable_branches_of_the_ideal_gate() {
        let k = GateKraus::from_circuit(&compensated()).unwrap();
        // Logical HH is control 1, target (|0> - |1>)/sqrt2.
        let straight = Op4::identity() * re(-1.0 / 3.0);
        assert!(max_abs_diff(&k.straight, &straight) < 1e-12, "{}", k.straight);
        let hh = crate::qubits::product_ket([re(0.0), re(1.0)], {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            [re(s), re(-s)]
        });
        let swapped = hh * hh.adjoint() * re(2.0 / 3.0);
        assert!(max_abs_diff(&k.swapped, &swapped) < 1e-12, "{}", k.swapped);
    }

    #[test]
    fn ideal_truth_tables_are_permutations() {
        for basis in Basis::ALL {
            let t = truth_table(&full(), basis, 1.0).unwrap();
            let perm = expected_permutation(basis);
            for i in 0..4 {
                for o in 0..4 {
                    let want = if o == perm[i] { 1.0 } else { 0.0 };
                    assert!((t.probs()[i][o] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn transmittance_offset_reduces_fidelity_but_rows_stay_normalized() {
        let mut circuit = full();
        circuit.noise = NoiseParams {
            ppbs_offsets: vec![
                TransmittanceOffset::default(),
                TransmittanceOffset::default(),
                TransmittanceOffset { d_t_h: -0.05, d_t_v: 0.0 },
            ],
            ..NoiseParams::ideal()
        };
        let t = truth_table(&circuit, Basis::ZZ, 1.0).unwrap();
        assert!(classical_fidelity(&t) < 1.0 - 1e-6);
        for row in t.probs() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_row_is_reported() {
        let mut circuit = compensated();
        circuit.registry.push("d".into());
        circuit.elements = vec![crate::optics::ElementSpec::ppbs(1.0, 1.0, "c", "t")];
        circuit.ports.control_out = "c".into();
        circuit.ports.target_out = "d".into();
        let err = truth_table(&circuit, Basis::XX, 1.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateRow(ref row) if row == "0x0x"), "{err}");
    }

    #[test]
    fn lambda_out_of_range() {
        assert!(matches!(conditional_process(&full(), 1.5), Err(Error::Parameter(_))));
        assert!(matches!(truth_table(&full(), Basis::ZZ, -0.1), Err(Error::Parameter(_))));
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let err = run_gate(&full(), [re(1.0), re(1.0)], basis_qubit(Basis::ZZ, 0)).unwrap_err();
        assert!(matches!(err, Error::NotNormalized(_)));
    }
}
