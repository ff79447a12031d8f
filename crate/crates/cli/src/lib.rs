//! Library side of the `ppbs-cnot` command: report assembly, rendering and
//! file output. `main.rs` only parses arguments and maps errors to exit codes.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ppbs_core::certify::{
    classical_fidelity, concurrence_bound, extremal_chi, process_bounds, syndrome_marginals, ChiDiagonal,
    Extremum, ProcessBounds, SyndromeMarginals, TruthTable,
};
use ppbs_core::error::ErrorClass;
use ppbs_core::gate::{entanglement_capability_sim, process_fidelity_exact, Capability, GateKraus, PreparedGate};
use ppbs_core::ingest::{normalize_to_truth_table, parse_count_table, CountTable, Format};
use ppbs_core::optics::{builtin, CircuitSpec, NoiseParams, BUILTIN_NAMES};
use ppbs_core::sweep::{evaluate_all, lambda_grid, lambda_sweep, random_settings, sweep_csv, NoiseRanges};
use ppbs_core::{Basis, Execution};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ppbs_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn class(&self) -> ErrorClass {
        match self {
            CliError::Core(e) => e.class(),
            _ => ErrorClass::Validation,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Validation => 1,
            ErrorClass::Numeric => 2,
        }
    }

    /// One line, `error[<class>]: <message>`.
    pub fn line(&self) -> String {
        let class = match self.class() {
            ErrorClass::Validation => "validation",
            ErrorClass::Numeric => "numeric",
        };
        format!("error[{class}]: {}", self.to_string().replace('\n', " "))
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// A built-in circuit name or the path of a circuit JSON document.
pub fn load_circuit(arg: &str) -> Result<CircuitSpec> {
    if let Some(c) = builtin(arg) {
        return Ok(c);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "`{arg}` is neither a built-in circuit ({}) nor a file",
            BUILTIN_NAMES.join(", ")
        )));
    }
    let text = String::from_utf8(read(path)?).map_err(|e| CliError::Usage(format!("{arg}: {e}")))?;
    Ok(CircuitSpec::from_json(&text)?)
}

pub fn load_counts(path: &Path, format: Option<Format>) -> Result<CountTable> {
    let format = format
        .or_else(|| Format::from_path(path))
        .ok_or_else(|| CliError::Usage(format!("{}: cannot infer format, pass --format", path.display())))?;
    Ok(parse_count_table(&read(path)?, format)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Data { zz: String, xx: String },
    Simulation { circuit: String, noise: NoiseParams },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTables {
    pub zz: [[f64; 4]; 4],
    pub xx: [[f64; 4]; 4],
}

/// Simulation-only diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    /// Coincidence probability averaged over inputs.
    pub success_probability: f64,
    /// Largest over smallest success probability across basis inputs.
    pub success_ratio: f64,
    /// Classical fidelities implied by the average-normalized process.
    pub f_zz_process: f64,
    pub f_xx_process: f64,
    pub bounds_process: ProcessBounds,
    pub capability: Capability,
    /// A transmittance offset was clamped into [0, 1].
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub provenance: Provenance,
    pub f_zz: f64,
    pub f_xx: f64,
    pub bounds: ProcessBounds,
    pub concurrence_bound: f64,
    pub marginals: SyndromeMarginals,
    pub chi_worst: ChiDiagonal,
    pub chi_best: ChiDiagonal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_process_fidelity: Option<f64>,
    pub truth_tables: TruthTables,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<Simulation>,
}

impl Report {
    pub fn from_tables(zz: &TruthTable, xx: &TruthTable, provenance: Provenance) -> Result<Self> {
        let marginals = syndrome_marginals(zz, xx)?;
        let f_zz = classical_fidelity(zz);
        let f_xx = classical_fidelity(xx);
        let bounds = process_bounds(f_zz, f_xx)?;
        Ok(Report {
            provenance,
            f_zz,
            f_xx,
            bounds,
            concurrence_bound: concurrence_bound(bounds.lower),
            chi_worst: extremal_chi(&marginals, Extremum::Worst)?,
            chi_best: extremal_chi(&marginals, Extremum::Best)?,
            marginals,
            exact_process_fidelity: None,
            truth_tables: TruthTables { zz: *zz.probs(), xx: *xx.probs() },
            simulation: None,
        })
    }

    /// Bounds and concurrence bound recomputed from `f_zz`, `f_xx` match
    /// the stored values bit for bit.
    pub fn is_consistent(&self) -> bool {
        match process_bounds(self.f_zz, self.f_xx) {
            Ok(b) => b == self.bounds && concurrence_bound(b.lower) == self.concurrence_bound,
            Err(_) => false,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization is infallible");
        s.push('\n');
        s
    }
}

/// Report from two count tables; the first must be ZZ and the second XX.
pub fn cmd_certify(zz: &CountTable, xx: &CountTable, provenance: Provenance) -> Result<Report> {
    let zz = normalize_to_truth_table(zz)?;
    let xx = normalize_to_truth_table(xx)?;
    Report::from_tables(&zz, &xx, provenance)
}

pub struct Simulated {
    pub report: Report,
    pub zz: TruthTable,
    pub xx: TruthTable,
}

/// Simulates `circuit` at `lambda` (the circuit's own value when `None`).
pub fn cmd_simulate(circuit: &CircuitSpec, name: &str, lambda: Option<f64>) -> Result<Simulated> {
    let lambda = lambda.unwrap_or(circuit.noise.lambda);
    let gate = PreparedGate::new(circuit)?;
    let kraus: GateKraus = gate.kraus()?;
    let zz = kraus.truth_table(Basis::ZZ, lambda)?;
    let xx = kraus.truth_table(Basis::XX, lambda)?;
    let process = kraus.process(lambda)?;
    let provenance = Provenance::Simulation {
        circuit: name.to_string(),
        noise: NoiseParams { lambda, ..circuit.noise.clone() },
    };
    let mut report = Report::from_tables(&zz, &xx, provenance)?;
    report.exact_process_fidelity = Some(process_fidelity_exact(&process));
    let f_zz_process = process.implied_fidelity(Basis::ZZ);
    let f_xx_process = process.implied_fidelity(Basis::XX);
    report.simulation = Some(Simulation {
        success_probability: process.avg_success,
        success_ratio: process.success_ratio(),
        f_zz_process,
        f_xx_process,
        bounds_process: process_bounds(f_zz_process, f_xx_process)?,
        capability: entanglement_capability_sim(&process)?,
        clamped: gate.clamped(),
    });
    Ok(Simulated { report, zz, xx })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMode {
    /// Evenly spaced lambda values with the circuit's own offsets.
    Lambda { points: usize },
    /// Seeded random lambda, transmittance and wave-plate offsets.
    Random { settings: usize, seed: u64 },
}

pub fn cmd_sweep(circuit: &CircuitSpec, mode: SweepMode, exec: Execution) -> Result<String> {
    let rows = match mode {
        SweepMode::Lambda { points } => lambda_sweep(circuit, &lambda_grid(points), exec)?,
        SweepMode::Random { settings, seed } => {
            let s = random_settings(circuit, settings, seed, NoiseRanges::default());
            evaluate_all(circuit, &s, exec).into_iter().collect::<ppbs_core::Result<Vec<_>>>()?
        }
    };
    Ok(sweep_csv(&rows))
}

/// Three decimals, never `-0.000`.
fn f3(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn render_truth_table(out: &mut String, tag: &str, basis: Basis, probs: &[[f64; 4]; 4]) {
    let labels = basis.labels();
    let _ = write!(out, "{tag:<8}|");
    for l in labels {
        let _ = write!(out, " <{l}|");
    }
    out.push('\n');
    for (i, row) in probs.iter().enumerate() {
        let _ = write!(out, "|{}> |", labels[i]);
        for p in row {
            let _ = write!(out, "  {}", f3(*p));
        }
        out.push('\n');
    }
}

fn render_chi(out: &mut String, tag: &str, values: &[[f64; 4]; 4]) {
    const ROWS: [&str; 4] = ["0X", "CX", "TX", "BX"];
    let _ = writeln!(out, "{tag:<6}|    X0     XC     XT     XB |   sum");
    let mut cols = [0.0; 4];
    for (r, row) in values.iter().enumerate() {
        let _ = write!(out, "  {}  |", ROWS[r]);
        for (j, v) in row.iter().enumerate() {
            let _ = write!(out, "  {}", f3(*v));
            cols[j] += v;
        }
        let _ = writeln!(out, " | {}", f3(row.iter().sum()));
    }
    let _ = write!(out, " sum  |");
    for c in cols {
        let _ = write!(out, "  {}", f3(c));
    }
    let _ = writeln!(out, " | {}", f3(cols.iter().sum()));
}

/// Human-readable report with tables in the layout of the published data:
/// truth tables with inputs as rows, chi diagonals with ZZ syndromes as rows
/// and XX syndromes as columns.
pub fn render_report(r: &Report) -> String {
    let mut out = String::new();
    match &r.provenance {
        Provenance::Data { zz, xx } => {
            let _ = writeln!(out, "source: measured counts (ZZ: {zz}, XX: {xx})");
        }
        Provenance::Simulation { circuit, noise } => {
            let _ = writeln!(out, "source: simulation of {circuit}, lambda = {}", f3(noise.lambda));
        }
    }
    out.push('\n');
    render_truth_table(&mut out, "(a) ZZ", Basis::ZZ, &r.truth_tables.zz);
    out.push('\n');
    render_truth_table(&mut out, "(b) XX", Basis::XX, &r.truth_tables.xx);
    out.push('\n');
    let _ = writeln!(out, "F_zz = {}   F_xx = {}", f3(r.f_zz), f3(r.f_xx));
    let _ = writeln!(out, "{} <= F_process <= {}", f3(r.bounds.lower), f3(r.bounds.upper));
    let _ = writeln!(out, "C >= {}", f3(r.concurrence_bound));
    if let Some(f) = r.exact_process_fidelity {
        let _ = writeln!(out, "exact F_process = {}", f3(f));
    }
    out.push('\n');
    let join = |v: [f64; 4]| v.map(f3).join("  ");
    let _ = writeln!(out, "ZZ syndrome sums  0X CX TX BX: {}", join(r.marginals.zz));
    let _ = writeln!(out, "XX syndrome sums  X0 XC XT XB: {}", join(r.marginals.xx));
    out.push('\n');
    render_chi(&mut out, "(a)", &r.chi_worst.values);
    let _ = writeln!(out, "worst case F_process = {}", f3(r.chi_worst.fidelity()));
    out.push('\n');
    render_chi(&mut out, "(b)", &r.chi_best.values);
    let _ = writeln!(out, "best case F_process = {}", f3(r.chi_best.fidelity()));
    if let Some(s) = &r.simulation {
        out.push('\n');
        let _ = writeln!(out, "success probability = {:.6}", s.success_probability);
        let _ = writeln!(out, "success ratio (max/min over basis inputs) = {:.6}", s.success_ratio);
        let _ = writeln!(
            out,
            "process-implied: F_zz = {}   F_xx = {}   {} <= F_process <= {}",
            f3(s.f_zz_process),
            f3(s.f_xx_process),
            f3(s.bounds_process.lower),
            f3(s.bounds_process.upper)
        );
        let _ = writeln!(
            out,
            "entanglement capability = {} (input |{}>_C |{}>_T)",
            f3(s.capability.concurrence),
            s.capability.control,
            s.capability.target
        );
        if s.clamped {
            let _ = writeln!(out, "warning: a perturbed transmittance was clamped into [0, 1]");
        }
    }
    out
}

pub fn write_report(dir: &Path, report: &Report) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    write(&dir.join("report.json"), &report.to_json())?;
    write(&dir.join("report.txt"), &render_report(report))
}

pub fn write_simulation(dir: &Path, sim: &Simulated) -> Result<()> {
    write_report(dir, &sim.report)?;
    write(&dir.join("truth_table_zz.json"), &(sim.zz.to_json() + "\n"))?;
    write(&dir.join("truth_table_xx.json"), &(sim.xx.to_json() + "\n"))
}

pub fn write_sweep(dir: &Path, csv: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    write(&dir.join("sweep.csv"), csv)
}
