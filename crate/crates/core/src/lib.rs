//! Simulation and certification of the interferometer-free linear-optical
//! CNOT gate built from partially polarizing beam splitters (PPBS).
//!
//! The crate is split along the physical pipeline:
//!
//! * [`fock`]: two-photon Fock-state algebra over labeled optical modes.
//! * [`optics`]: optical elements as polarization-resolved mode transforms,
//!   circuit composition and the built-in compact CNOT circuits.
//! * [`gate`]: qubit encoding, post-selected gate execution, conditional
//!   process (Choi) extraction and entanglement measures.
//! * [`certify`]: truth-table fidelities, process-fidelity and concurrence
//!   bounds, error syndromes, the 16-unitary operator basis and extremal
//!   process-matrix completions.
//! * [`ingest`]: coincidence-count tables (JSON/CSV) and their normalization.
//! * [`sweep`]: batch evaluation of noise settings, parallel by default.

pub mod certify;
pub mod error;
pub mod fock;
pub mod gate;
pub mod ingest;
pub mod linalg;
pub mod optics;
pub mod par;
pub mod qubits;
pub mod sweep;

pub use error::{Error, Result};
pub use par::Execution;
pub use qubits::Basis;
