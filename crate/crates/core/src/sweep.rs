//! Batch evaluation of noise settings. Each setting is independent, so
//! batches fan out through [`crate::par::map`]; results come back in input
//! order either way.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::certify::{classical_fidelity, process_bounds, ProcessBounds};
use crate::error::Result;
use crate::gate::{entanglement_capability_sim, process_fidelity_exact, GateKraus, PreparedGate};
use crate::optics::{CircuitSpec, NoiseParams, TransmittanceOffset};
use crate::par::{self, Execution};
use crate::qubits::Basis;

/// Half-widths of the uniform distributions used by [`random_settings`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRanges {
    pub lambda: (f64, f64),
    pub transmittance: f64,
    /// Radians.
    pub plate_angle: f64,
}

impl Default for NoiseRanges {
    fn default() -> Self {
        NoiseRanges { lambda: (0.0, 1.0), transmittance: 0.05, plate_angle: 0.05 }
    }
}

/// `n` reproducible noise settings for `circuit`, one offset per PPBS and
/// per wave plate.
pub fn random_settings(circuit: &CircuitSpec, n: usize, seed: u64, ranges: NoiseRanges) -> Vec<NoiseParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sym = |rng: &mut ChaCha8Rng, w: f64| if w > 0.0 { rng.gen_range(-w..=w) } else { 0.0 };
    (0..n)
        .map(|_| {
            let lambda = rng.gen_range(ranges.lambda.0..=ranges.lambda.1);
            let ppbs_offsets = (0..circuit.ppbs_count())
                .map(|_| TransmittanceOffset {
                    d_t_h: sym(&mut rng, ranges.transmittance),
                    d_t_v: sym(&mut rng, ranges.transmittance),
                })
                .collect();
            let plate_offsets = (0..circuit.plate_count()).map(|_| sym(&mut rng, ranges.plate_angle)).collect();
            NoiseParams { lambda, ppbs_offsets, plate_offsets }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub lambda: f64,
    /// A transmittance offset had to be clamped into [0, 1].
    pub clamped: bool,
    /// Classical fidelities of the per-input-normalized truth tables.
    pub f_zz_rows: f64,
    pub f_xx_rows: f64,
    /// Classical fidelities implied by the trace-normalized process.
    pub f_zz: f64,
    pub f_xx: f64,
    pub bounds: ProcessBounds,
    pub exact: f64,
    pub capability: f64,
    pub success: f64,
    pub success_ratio: f64,
}

impl Outcome {
    pub fn contained(&self, tol: f64) -> bool {
        self.exact >= self.bounds.lower - tol && self.exact <= self.bounds.upper + tol
    }

    /// Containment judged against the bounds of the row-normalized tables.
    pub fn contained_rows(&self, tol: f64) -> bool {
        let lower = (self.f_zz_rows + self.f_xx_rows - 1.0).max(0.0);
        let upper = self.f_zz_rows.min(self.f_xx_rows);
        self.exact >= lower - tol && self.exact <= upper + tol
    }
}

pub fn evaluate(circuit: &CircuitSpec, noise: &NoiseParams) -> Result<Outcome> {
    let mut c = circuit.clone();
    c.noise = noise.clone();
    let gate = PreparedGate::new(&c)?;
    let kraus: GateKraus = gate.kraus()?;
    let process = kraus.process(noise.lambda)?;
    let f_zz = process.implied_fidelity(Basis::ZZ);
    let f_xx = process.implied_fidelity(Basis::XX);
    Ok(Outcome {
        lambda: noise.lambda,
        clamped: gate.clamped(),
        f_zz_rows: classical_fidelity(&kraus.truth_table(Basis::ZZ, noise.lambda)?),
        f_xx_rows: classical_fidelity(&kraus.truth_table(Basis::XX, noise.lambda)?),
        f_zz,
        f_xx,
        bounds: process_bounds(f_zz, f_xx)?,
        exact: process_fidelity_exact(&process),
        capability: entanglement_capability_sim(&process)?.concurrence,
        success: process.avg_success,
        success_ratio: process.success_ratio(),
    })
}

pub fn evaluate_all(circuit: &CircuitSpec, settings: &[NoiseParams], exec: Execution) -> Vec<Result<Outcome>> {
    par::map(settings, exec, |s| evaluate(circuit, s))
}

/// Evenly spaced `0, 1/(n-1), ..., 1`.
pub fn lambda_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Outcomes at each `lambda`, keeping the circuit's own offsets.
pub fn lambda_sweep(circuit: &CircuitSpec, lambdas: &[f64], exec: Execution) -> Result<Vec<Outcome>> {
    let settings: Vec<NoiseParams> =
        lambdas.iter().map(|&lambda| NoiseParams { lambda, ..circuit.noise.clone() }).collect();
    evaluate_all(circuit, &settings, exec).into_iter().collect()
}

pub const SWEEP_CSV_HEADER: [&str; 10] =
    ["lambda", "f_zz", "f_xx", "lower", "upper", "exact", "f_zz_rows", "f_xx_rows", "success", "success_ratio"];

pub fn sweep_csv(rows: &[Outcome]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_CSV_HEADER).expect("writing to memory is infallible");
    for r in rows {
        let fields = [
            r.lambda,
            r.f_zz,
            r.f_xx,
            r.bounds.lower,
            r.bounds.upper,
            r.exact,
            r.f_zz_rows,
            r.f_xx_rows,
            r.success,
            r.success_ratio,
        ];
        w.write_record(fields.iter().map(|x| format!("{x:?}"))).expect("writing to memory is infallible");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is UTF-8")
}
