//! Bosonic Fock states over labeled optical modes.
//!
//! A mode is a (spatial arm, polarization, distinguishability tag) triple.
//! States are sparse superpositions of occupation vectors; linear optics acts
//! by substituting every creation operator `a†_k -> sum_j U_jk a†_j` and
//! re-expanding, which keeps bosonic normalization factors exact.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{unitarity_deviation, C64, TOL};

/// Amplitudes below this magnitude are dropped after every operation.
pub const PRUNE_TOL: f64 = 1e-12;

/// All gate scenarios are two-photon experiments.
pub const PHOTON_NUMBER: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::H, Polarization::V];
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeLabel {
    pub spatial: String,
    pub polarization: Polarization,
    /// Distinct tags mark mutually orthogonal internal photon states.
    pub tag: u8,
}

impl ModeLabel {
    pub fn new(spatial: impl Into<String>, polarization: Polarization, tag: u8) -> Self {
        ModeLabel { spatial: spatial.into(), polarization, tag }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {:?}, tag {})", self.spatial, self.polarization, self.tag)
    }
}

/// Ordered, duplicate-free list of modes. Order is lexicographic in
/// (spatial, polarization, tag) regardless of construction order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeRegistry {
    modes: Vec<ModeLabel>,
}

impl ModeRegistry {
    pub fn new(modes: impl IntoIterator<Item = ModeLabel>) -> Result<Self> {
        let mut modes: Vec<ModeLabel> = modes.into_iter().collect();
        modes.sort();
        if let Some(w) = modes.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateMode(w[0].to_string()));
        }
        Ok(ModeRegistry { modes })
    }

    /// Every arm in both polarizations with tags `0..tags`.
    pub fn from_arms<S: AsRef<str>>(arms: &[S], tags: u8) -> Result<Self> {
        let mut modes = Vec::with_capacity(arms.len() * 2 * tags as usize);
        for arm in arms {
            for pol in Polarization::BOTH {
                for tag in 0..tags {
                    modes.push(ModeLabel::new(arm.as_ref(), pol, tag));
                }
            }
        }
        Self::new(modes)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeLabel] {
        &self.modes
    }

    pub fn index_of(&self, label: &ModeLabel) -> Option<usize> {
        self.modes.binary_search(label).ok()
    }

    pub fn has_arm(&self, arm: &str) -> bool {
        self.modes.iter().any(|m| m.spatial == arm)
    }

    pub fn tags(&self) -> Vec<u8> {
        let mut tags: Vec<u8> = self.modes.iter().map(|m| m.tag).collect();
        tags.sort_unstable();
        tags.dedup();
        tags
    }

    fn require_arm(&self, arm: &str) -> Result<()> {
        if self.has_arm(arm) {
            Ok(())
        } else {
            Err(Error::UnknownArm(arm.to_string()))
        }
    }

    /// Occupation vector with one photon in each listed mode (repeats allowed).
    pub fn occupation(&self, labels: &[&ModeLabel]) -> Result<OccupationVector> {
        let mut counts = vec![0u8; self.len()];
        for label in labels {
            let idx = self.index_of(label).ok_or_else(|| Error::UnknownArm(label.to_string()))?;
            counts[idx] += 1;
        }
        Ok(OccupationVector(counts))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupationVector(Vec<u8>);

impl OccupationVector {
    pub fn counts(&self) -> &[u8] {
        &self.0
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|&n| n as u32).sum()
    }

    fn from_mode_list(len: usize, modes: &[usize]) -> Self {
        let mut counts = vec![0u8; len];
        for &m in modes {
            counts[m] += 1;
        }
        OccupationVector(counts)
    }

    /// Creation-operator list, each mode repeated by its occupation.
    fn mode_list(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(k, &n)| std::iter::repeat(k).take(n as usize))
            .collect()
    }

    /// `sqrt(prod_k n_k!)`: the norm of `prod a†` acting on vacuum.
    fn bosonic_weight(&self) -> f64 {
        self.0.iter().map(|&n| factorial(n)).product::<f64>().sqrt()
    }
}

fn factorial(n: u8) -> f64 {
    (1..=n as u64).product::<u64>() as f64
}

/// Single-photon polarization state `h|H> + v|V>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationAmplitudes {
    pub h: C64,
    pub v: C64,
}

impl PolarizationAmplitudes {
    pub fn new(h: C64, v: C64) -> Self {
        PolarizationAmplitudes { h, v }
    }

    pub fn real(h: f64, v: f64) -> Self {
        Self::new(C64::new(h, 0.0), C64::new(v, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    pub fn get(&self, pol: Polarization) -> C64 {
        match pol {
            Polarization::H => self.h,
            Polarization::V => self.v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    registry: Arc<ModeRegistry>,
    terms: BTreeMap<OccupationVector, C64>,
}

impl FockState {
    pub fn zero(registry: Arc<ModeRegistry>) -> Self {
        FockState { registry, terms: BTreeMap::new() }
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn terms(&self) -> &BTreeMap<OccupationVector, C64> {
        &self.terms
    }

    pub fn amplitude(&self, occ: &OccupationVector) -> C64 {
        self.terms.get(occ).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Photon number of the state; `None` for the zero state.
    pub fn photon_number(&self) -> Option<u32> {
        self.terms.keys().next().map(|o| o.total())
    }

    /// Number of photons (all polarizations and tags) in `arm` for `occ`.
    pub fn photons_in_arm(&self, occ: &OccupationVector, arm: &str) -> u32 {
        self.registry
            .modes()
            .iter()
            .zip(occ.counts())
            .filter(|(m, _)| m.spatial == arm)
            .map(|(_, &n)| n as u32)
            .sum()
    }

    /// Adds `coeff * prod_k a†_{modes[k]} |vac>` to the state.
    fn add_monomial(terms: &mut BTreeMap<OccupationVector, C64>, len: usize, modes: &[usize], coeff: C64) {
        let occ = OccupationVector::from_mode_list(len, modes);
        let w = occ.bosonic_weight();
        *terms.entry(occ).or_default() += coeff * w;
    }

    fn pruned(registry: Arc<ModeRegistry>, mut terms: BTreeMap<OccupationVector, C64>) -> Self {
        terms.retain(|_, a| a.norm() >= PRUNE_TOL);
        FockState { registry, terms }
    }

    /// The same state with its global phase fixed: the first nonzero
    /// amplitude in canonical order becomes real and positive.
    pub fn phase_normalized(&self) -> Self {
        let Some(first) = self.terms.values().next().copied() else {
            return self.clone();
        };
        let phase = first.conj() / first.norm();
        FockState {
            registry: self.registry.clone(),
            terms: self.terms.iter().map(|(o, a)| (o.clone(), a * phase)).collect(),
        }
    }
}

/// `(c_H a†_{1H} + c_V a†_{1V})(d_H a†_{2H} + d_V a†_{2V})|vac>` with the two
/// photons in distinct input arms carrying the given tags.
pub fn make_two_photon_state(
    registry: Arc<ModeRegistry>,
    photon1: (&str, PolarizationAmplitudes),
    photon2: (&str, PolarizationAmplitudes),
    tags: (u8, u8),
) -> Result<FockState> {
    let (arm1, amp1) = photon1;
    let (arm2, amp2) = photon2;
    registry.require_arm(arm1)?;
    registry.require_arm(arm2)?;
    if arm1 == arm2 {
        return Err(Error::IdenticalArms(arm1.to_string()));
    }
    for amp in [amp1, amp2] {
        if amp.norm_sqr() > 1.0 + 1e-12 {
            return Err(Error::AmplitudeNorm(amp.norm_sqr()));
        }
    }
    let mode = |arm: &str, pol, tag| {
        let label = ModeLabel::new(arm, pol, tag);
        registry.index_of(&label).ok_or_else(|| Error::UnknownArm(label.to_string()))
    };
    let mut terms = BTreeMap::new();
    for p in Polarization::BOTH {
        for q in Polarization::BOTH {
            let coeff = amp1.get(p) * amp2.get(q);
            if coeff == C64::default() {
                continue;
            }
            let modes = [mode(arm1, p, tags.0)?, mode(arm2, q, tags.1)?];
            FockState::add_monomial(&mut terms, registry.len(), &modes, coeff);
        }
    }
    Ok(FockState::pruned(registry, terms))
}

/// A linear transformation of creation operators on a subset of modes.
#[derive(Debug, Clone)]
pub struct ModeTransform {
    modes: Vec<ModeLabel>,
    matrix: DMatrix<C64>,
}

impl ModeTransform {
    /// `matrix[(j, k)]` is the amplitude for `a†_{modes[k]}` to become
    /// `a†_{modes[j]}`. Must be unitary within 1e-10.
    pub fn new(modes: Vec<ModeLabel>, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != modes.len() || matrix.ncols() != modes.len() {
            return Err(Error::TransformShape { matrix: matrix.nrows(), modes: modes.len() });
        }
        let dev = unitarity_deviation(&matrix);
        if dev > TOL {
            return Err(Error::NotUnitary(dev));
        }
        let mut sorted = modes.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateMode(w[0].to_string()));
        }
        Ok(ModeTransform { modes, matrix })
    }

    pub fn modes(&self) -> &[ModeLabel] {
        &self.modes
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }
}

pub fn apply_mode_transform(state: &FockState, transform: &ModeTransform) -> Result<FockState> {
    let registry = &state.registry;
    let n = registry.len();
    let local: Vec<usize> = transform
        .modes
        .iter()
        .map(|m| registry.index_of(m).ok_or_else(|| Error::UnknownArm(m.to_string())))
        .collect::<Result<_>>()?;

    // Substitution table: registry mode -> list of (registry mode, amplitude).
    let mut subs: Vec<Vec<(usize, C64)>> = (0..n).map(|k| vec![(k, C64::new(1.0, 0.0))]).collect();
    for (col, &k) in local.iter().enumerate() {
        subs[k] = local
            .iter()
            .enumerate()
            .map(|(row, &j)| (j, transform.matrix[(row, col)]))
            .filter(|(_, a)| *a != C64::default())
            .collect();
    }

    let mut out = BTreeMap::new();
    for (occ, &amp) in &state.terms {
        let ops = occ.mode_list();
        let coeff = amp / occ.bosonic_weight();
        expand(&subs, &ops, &mut Vec::with_capacity(ops.len()), coeff, &mut |modes, c| {
            FockState::add_monomial(&mut out, n, modes, c)
        });
    }
    Ok(FockState::pruned(registry.clone(), out))
}

fn expand(
    subs: &[Vec<(usize, C64)>],
    ops: &[usize],
    chosen: &mut Vec<usize>,
    coeff: C64,
    emit: &mut dyn FnMut(&[usize], C64),
) {
    match ops.split_first() {
        None => emit(chosen, coeff),
        Some((&k, rest)) => {
            for &(j, a) in &subs[k] {
                chosen.push(j);
                expand(subs, rest, chosen, coeff * a, emit);
                chosen.pop();
            }
        }
    }
}

/// Keeps only the terms with exactly one photon in `arm_a` and one in `arm_b`.
pub fn coincidence_project(state: &FockState, arm_a: &str, arm_b: &str) -> Result<FockState> {
    state.registry.require_arm(arm_a)?;
    state.registry.require_arm(arm_b)?;
    if arm_a == arm_b {
        return Err(Error::IdenticalArms(arm_a.to_string()));
    }
    let terms = state
        .terms
        .iter()
        .filter(|(occ, _)| state.photons_in_arm(occ, arm_a) == 1 && state.photons_in_arm(occ, arm_b) == 1)
        .map(|(o, a)| (o.clone(), *a))
        .collect();
    Ok(FockState { registry: state.registry.clone(), terms })
}

/// `<a|b>`, conjugate-linear in `a`.
pub fn inner_product(a: &FockState, b: &FockState) -> Result<C64> {
    if !Arc::ptr_eq(&a.registry, &b.registry) && a.registry != b.registry {
        return Err(Error::RegistryMismatch);
    }
    Ok(a.terms
        .iter()
        .filter_map(|(occ, x)| b.terms.get(occ).map(|y| x.conj() * y))
        .sum())
}
