//! Polarization encoding of the two logical qubits.
//!
//! Control: `|0_z> = |V>`, `|1_z> = |H>`. Target: `|0_z> = (|V> + |H>)/sqrt2`,
//! `|1_z> = (|V> - |H>)/sqrt2`. The X basis of both qubits is `|+->` in
//! logical terms, which makes the target's X basis `|V>, |H>`.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::fock::{Polarization, PolarizationAmplitudes};
use crate::linalg::{re, C64};
use crate::qubits::Basis;

/// Logical amplitudes `(a_0, a_1)` of one qubit.
pub type Qubit = [C64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Control,
    Target,
}

/// Polarization amplitudes of logical `|bit>` for this role, as `(h, v)`.
fn logical_to_polarization(role: Role, bit: usize) -> (f64, f64) {
    let s = FRAC_1_SQRT_2;
    match (role, bit) {
        (Role::Control, 0) => (0.0, 1.0),
        (Role::Control, _) => (1.0, 0.0),
        (Role::Target, 0) => (s, s),
        (Role::Target, _) => (-s, s),
    }
}

pub fn encode(role: Role, q: Qubit) -> PolarizationAmplitudes {
    let (h0, v0) = logical_to_polarization(role, 0);
    let (h1, v1) = logical_to_polarization(role, 1);
    PolarizationAmplitudes::new(q[0] * h0 + q[1] * h1, q[0] * v0 + q[1] * v1)
}

/// Projection amplitude `<bit|pol>` onto a logical state; the encoding is
/// real, so no conjugation is needed.
pub fn decode_weight(role: Role, bit: usize, pol: Polarization) -> f64 {
    let (h, v) = logical_to_polarization(role, bit);
    match pol {
        Polarization::H => h,
        Polarization::V => v,
    }
}

/// Logical amplitudes of basis state `bit` in `basis`.
pub fn basis_qubit(basis: Basis, bit: usize) -> Qubit {
    basis.single_qubit()[bit]
}

pub fn check_normalized(q: &Qubit) -> Result<()> {
    let n = q[0].norm_sqr() + q[1].norm_sqr();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(n));
    }
    Ok(())
}

/// `c_H |H> + (c_V / sqrt3) |V>`, left sub-normalized.
pub fn compensate_input(q: PolarizationAmplitudes) -> Result<PolarizationAmplitudes> {
    let n = q.norm_sqr();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(n));
    }
    Ok(PolarizationAmplitudes::new(q.h, q.v / re(3.0f64.sqrt())))
}
