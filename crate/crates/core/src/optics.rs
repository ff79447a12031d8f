//! Optical elements as polarization-resolved mode transforms, circuit
//! composition and the built-in compact CNOT circuits.
//!
//! Beam splitters use the real orthogonal convention `a'1 = t a1 + r a2`,
//! `a'2 = -r a1 + t a2` independently for each polarization, so the port-1
//! photon keeps its arm on transmission and moves to arm 2 on reflection.
//! Wave plates act with their Jones matrix on the (H, V) amplitudes of one arm.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fock::{ModeLabel, ModeRegistry, ModeTransform, Polarization};
use crate::linalg::{c, re, unitarity_deviation, Op2, C64, TOL};

/// Intrinsic PPBS: reflects V perfectly, transmits 2/3 of H.
pub const PPBS_A: (f64, f64) = (2.0 / 3.0, 0.0);
/// Supplemental PPBS: transmits H perfectly, 1/3 of V.
pub const PPBS_B: (f64, f64) = (1.0, 1.0 / 3.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ElementSpec {
    /// Partially polarizing beam splitter with intensity transmittances.
    #[serde(rename = "PPBS")]
    Ppbs {
        #[serde(rename = "T_H")]
        t_h: f64,
        #[serde(rename = "T_V")]
        t_v: f64,
        arms: Vec<String>,
    },
    /// Polarizing beam splitter: transmits H, reflects V.
    #[serde(rename = "PBS")]
    Pbs { arms: Vec<String> },
    #[serde(rename = "HWP")]
    Hwp { theta: f64, arms: Vec<String> },
    #[serde(rename = "QWP")]
    Qwp { theta: f64, arms: Vec<String> },
    #[serde(rename = "PHASE")]
    Phase { phi_h: f64, phi_v: f64, arms: Vec<String> },
}

impl ElementSpec {
    pub fn ppbs(t_h: f64, t_v: f64, port1: &str, port2: &str) -> Self {
        ElementSpec::Ppbs { t_h, t_v, arms: vec![port1.into(), port2.into()] }
    }

    pub fn hwp(theta: f64, arm: &str) -> Self {
        ElementSpec::Hwp { theta, arms: vec![arm.into()] }
    }

    pub fn qwp(theta: f64, arm: &str) -> Self {
        ElementSpec::Qwp { theta, arms: vec![arm.into()] }
    }

    pub fn arms(&self) -> &[String] {
        match self {
            ElementSpec::Ppbs { arms, .. }
            | ElementSpec::Pbs { arms }
            | ElementSpec::Hwp { arms, .. }
            | ElementSpec::Qwp { arms, .. }
            | ElementSpec::Phase { arms, .. } => arms,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ElementSpec::Ppbs { .. } => "PPBS",
            ElementSpec::Pbs { .. } => "PBS",
            ElementSpec::Hwp { .. } => "HWP",
            ElementSpec::Qwp { .. } => "QWP",
            ElementSpec::Phase { .. } => "PHASE",
        }
    }

    fn expected_arms(&self) -> usize {
        match self {
            ElementSpec::Ppbs { .. } | ElementSpec::Pbs { .. } => 2,
            _ => 1,
        }
    }

    fn is_plate(&self) -> bool {
        matches!(self, ElementSpec::Hwp { .. } | ElementSpec::Qwp { .. })
    }
}

/// Which arms carry the control and target photons in and out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ports {
    pub control_in: String,
    pub target_in: String,
    pub control_out: String,
    pub target_out: String,
}

impl Default for Ports {
    /// PPBS-A reflection carries each photon into the other arm.
    fn default() -> Self {
        Ports {
            control_in: "c".into(),
            target_in: "t".into(),
            control_out: "t".into(),
            target_out: "c".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmittanceOffset {
    #[serde(rename = "dT_H", default)]
    pub d_t_h: f64,
    #[serde(rename = "dT_V", default)]
    pub d_t_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    /// Photon indistinguishability in [0, 1].
    #[serde(default = "unit")]
    pub lambda: f64,
    /// One entry per PPBS in element order; missing entries are zero.
    #[serde(default)]
    pub ppbs_offsets: Vec<TransmittanceOffset>,
    /// Axis-angle offsets (radians), one per HWP/QWP in element order.
    #[serde(default)]
    pub plate_offsets: Vec<f64>,
}

fn unit() -> f64 {
    1.0
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams { lambda: 1.0, ppbs_offsets: Vec::new(), plate_offsets: Vec::new() }
    }
}

impl NoiseParams {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn with_lambda(lambda: f64) -> Self {
        NoiseParams { lambda, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    /// Spatial arms.
    pub registry: Vec<String>,
    /// Evaluation order.
    pub elements: Vec<ElementSpec>,
    #[serde(default)]
    pub noise: NoiseParams,
    #[serde(default)]
    pub ports: Ports,
    /// Scale input V amplitudes by 1/sqrt(3) at preparation.
    #[serde(default)]
    pub compensate_inputs: bool,
}

impl CircuitSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: CircuitSpec =
            serde_json::from_str(text).map_err(|e| Error::Malformed(format!("circuit document: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serialization is infallible")
    }

    pub fn ppbs_count(&self) -> usize {
        self.elements.iter().filter(|e| matches!(e, ElementSpec::Ppbs { .. })).count()
    }

    pub fn plate_count(&self) -> usize {
        self.elements.iter().filter(|e| e.is_plate()).count()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = self.registry.clone();
        seen.sort();
        if seen.is_empty() {
            return Err(Error::Circuit("empty registry".into()));
        }
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Circuit(format!("duplicate arm `{}`", w[0])));
        }
        let known = |arm: &str| self.registry.iter().any(|a| a == arm);
        for (i, el) in self.elements.iter().enumerate() {
            let arms = el.arms();
            if arms.len() != el.expected_arms() {
                return Err(Error::Circuit(format!(
                    "element {i} ({}) needs {} arm(s), got {}",
                    el.kind(),
                    el.expected_arms(),
                    arms.len()
                )));
            }
            if let Some(bad) = arms.iter().find(|a| !known(a)) {
                return Err(Error::UnknownArm(bad.clone()));
            }
            if arms.len() == 2 && arms[0] == arms[1] {
                return Err(Error::IdenticalArms(arms[0].clone()));
            }
            check_parameters(el)?;
        }
        let p = &self.ports;
        for arm in [&p.control_in, &p.target_in, &p.control_out, &p.target_out] {
            if !known(arm) {
                return Err(Error::UnknownArm(arm.clone()));
            }
        }
        if p.control_in == p.target_in {
            return Err(Error::IdenticalArms(p.control_in.clone()));
        }
        if p.control_out == p.target_out {
            return Err(Error::IdenticalArms(p.control_out.clone()));
        }
        let n = &self.noise;
        if !(0.0..=1.0).contains(&n.lambda) {
            return Err(Error::Parameter(format!("lambda = {} outside [0, 1]", n.lambda)));
        }
        if n.ppbs_offsets.len() > self.ppbs_count() {
            return Err(Error::Circuit(format!(
                "{} PPBS offsets for {} PPBS elements",
                n.ppbs_offsets.len(),
                self.ppbs_count()
            )));
        }
        if n.plate_offsets.len() > self.plate_count() {
            return Err(Error::Circuit(format!(
                "{} plate offsets for {} wave plates",
                n.plate_offsets.len(),
                self.plate_count()
            )));
        }
        let finite = n.ppbs_offsets.iter().all(|o| o.d_t_h.is_finite() && o.d_t_v.is_finite())
            && n.plate_offsets.iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::Parameter("non-finite noise offset".into()));
        }
        Ok(())
    }
}

fn check_parameters(el: &ElementSpec) -> Result<()> {
    match *el {
        ElementSpec::Ppbs { t_h, t_v, .. } => {
            for (name, t) in [("T_H", t_h), ("T_V", t_v)] {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::Parameter(format!("{name} = {t} outside [0, 1]")));
                }
            }
        }
        ElementSpec::Hwp { theta, .. } | ElementSpec::Qwp { theta, .. } if !theta.is_finite() => {
            return Err(Error::Parameter(format!("wave-plate angle {theta}")));
        }
        ElementSpec::Phase { phi_h, phi_v, .. } if !(phi_h.is_finite() && phi_v.is_finite()) => {
            return Err(Error::Parameter("non-finite phase".into()));
        }
        _ => {}
    }
    Ok(())
}

/// Unitary on the (arm, polarization) modes touched by one element.
/// `matrix[(j, k)]` is the amplitude for mode `k` to go to mode `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementTransform {
    pub modes: Vec<(String, Polarization)>,
    pub matrix: DMatrix<C64>,
}

/// Half-wave retarder, axis at `theta` from H.
pub fn hwp_jones(theta: f64) -> Op2 {
    let (s, co) = (2.0 * theta).sin_cos();
    Op2::new(re(co), re(s), re(s), re(-co))
}

/// Quarter-wave retarder, `diag(1, i)` at `theta = 0`.
pub fn qwp_jones(theta: f64) -> Op2 {
    let (s, co) = theta.sin_cos();
    let rot = Op2::new(re(co), re(-s), re(s), re(co));
    let core = Op2::new(re(1.0), re(0.0), re(0.0), c(0.0, 1.0));
    rot * core * rot.transpose()
}

pub fn element_transform(spec: &ElementSpec) -> Result<ElementTransform> {
    check_parameters(spec)?;
    if spec.arms().len() != spec.expected_arms() {
        return Err(Error::Circuit(format!("{} needs {} arm(s)", spec.kind(), spec.expected_arms())));
    }
    let (t_h, t_v) = match *spec {
        ElementSpec::Ppbs { t_h, t_v, .. } => (t_h, t_v),
        ElementSpec::Pbs { .. } => (1.0, 0.0),
        _ => {
            let arm = &spec.arms()[0];
            let jones = match *spec {
                ElementSpec::Hwp { theta, .. } => hwp_jones(theta),
                ElementSpec::Qwp { theta, .. } => qwp_jones(theta),
                ElementSpec::Phase { phi_h, phi_v, .. } => Op2::new(
                    C64::from_polar(1.0, phi_h),
                    re(0.0),
                    re(0.0),
                    C64::from_polar(1.0, phi_v),
                ),
                _ => unreachable!(),
            };
            return Ok(ElementTransform {
                modes: vec![(arm.clone(), Polarization::H), (arm.clone(), Polarization::V)],
                matrix: DMatrix::from_fn(2, 2, |i, j| jones[(i, j)]),
            });
        }
    };
    let (a1, a2) = (&spec.arms()[0], &spec.arms()[1]);
    let modes = vec![
        (a1.clone(), Polarization::H),
        (a1.clone(), Polarization::V),
        (a2.clone(), Polarization::H),
        (a2.clone(), Polarization::V),
    ];
    let mut m = DMatrix::from_element(4, 4, C64::default());
    for (p, t2) in [(0, t_h), (1, t_v)] {
        let t = t2.sqrt();
        let r = (1.0 - t2).sqrt();
        let (i1, i2) = (p, 2 + p);
        m[(i1, i1)] = re(t);
        m[(i2, i1)] = re(-r);
        m[(i1, i2)] = re(r);
        m[(i2, i2)] = re(t);
    }
    Ok(ElementTransform { modes, matrix: m })
}

/// Total unitary of a circuit over all (arm, polarization) modes, arms in
/// lexicographic order and H before V.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitUnitary {
    pub modes: Vec<(String, Polarization)>,
    pub matrix: DMatrix<C64>,
}

impl CircuitUnitary {
    fn index(&self) -> BTreeMap<(String, Polarization), usize> {
        self.modes.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect()
    }

    /// Lifts the optical unitary onto a tagged mode registry: every tag sees
    /// the same optics, tags never mix, and arms absent from the circuit are
    /// left untouched.
    pub fn on_registry(&self, registry: &ModeRegistry) -> Result<ModeTransform> {
        let index = self.index();
        let modes = registry.modes().to_vec();
        let n = modes.len();
        let lookup = |m: &ModeLabel| index.get(&(m.spatial.clone(), m.polarization)).copied();
        let mut out = DMatrix::from_element(n, n, C64::default());
        for (k, mk) in modes.iter().enumerate() {
            for (j, mj) in modes.iter().enumerate() {
                if mj.tag != mk.tag {
                    continue;
                }
                out[(j, k)] = match (lookup(mj), lookup(mk)) {
                    (Some(jj), Some(kk)) => self.matrix[(jj, kk)],
                    _ if j == k => re(1.0),
                    _ => C64::default(),
                };
            }
        }
        ModeTransform::new(modes, out)
    }
}

pub fn compose_circuit(circuit: &CircuitSpec) -> Result<CircuitUnitary> {
    circuit.validate()?;
    let mut arms = circuit.registry.clone();
    arms.sort();
    let modes: Vec<(String, Polarization)> = arms
        .iter()
        .flat_map(|a| Polarization::BOTH.map(|p| (a.clone(), p)))
        .collect();
    let n = modes.len();
    let index: BTreeMap<&(String, Polarization), usize> = modes.iter().enumerate().map(|(i, m)| (m, i)).collect();

    let mut total = DMatrix::<C64>::identity(n, n);
    for el in &circuit.elements {
        let et = element_transform(el)?;
        let slots: Vec<usize> = et.modes.iter().map(|m| index[m]).collect();
        let mut step = DMatrix::<C64>::identity(n, n);
        for (jl, &j) in slots.iter().enumerate() {
            for (kl, &k) in slots.iter().enumerate() {
                step[(j, k)] = et.matrix[(jl, kl)];
            }
        }
        total = step * total;
    }
    let dev = unitarity_deviation(&total);
    if dev > TOL {
        return Err(Error::NotUnitary(dev));
    }
    Ok(CircuitUnitary { modes, matrix: total })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnotVariant {
    /// Three PPBSs: PPBS-B on each input arm, then PPBS-A between the arms.
    FullPpbs,
    /// PPBS-A only; the V attenuation moves into input-state preparation.
    CompensatedInput,
}

pub fn build_compact_cnot(variant: CnotVariant) -> CircuitSpec {
    let (elements, registry, compensate) = match variant {
        CnotVariant::FullPpbs => (
            vec![
                ElementSpec::ppbs(PPBS_B.0, PPBS_B.1, "c", "c_dump"),
                ElementSpec::ppbs(PPBS_B.0, PPBS_B.1, "t", "t_dump"),
                ElementSpec::ppbs(PPBS_A.0, PPBS_A.1, "c", "t"),
            ],
            vec!["c", "c_dump", "t", "t_dump"],
            false,
        ),
        CnotVariant::CompensatedInput => {
            (vec![ElementSpec::ppbs(PPBS_A.0, PPBS_A.1, "c", "t")], vec!["c", "t"], true)
        }
    };
    CircuitSpec {
        registry: registry.into_iter().map(String::from).collect(),
        elements,
        noise: NoiseParams::ideal(),
        ports: Ports::default(),
        compensate_inputs: compensate,
    }
}

/// Built-in circuits addressable by name from the command line.
pub fn builtin(name: &str) -> Option<CircuitSpec> {
    match name {
        "compact-cnot" => Some(build_compact_cnot(CnotVariant::FullPpbs)),
        "compact-cnot-compensated" => Some(build_compact_cnot(CnotVariant::CompensatedInput)),
        "compact-cnot-plates" => Some(with_preparation_plates(&build_compact_cnot(CnotVariant::FullPpbs))),
        _ => None,
    }
}

pub const BUILTIN_NAMES: [&str; 3] = ["compact-cnot", "compact-cnot-compensated", "compact-cnot-plates"];

/// Prepends a nominally-identity `HWP(0) HWP(0)` pair to each input arm,
/// giving wave-plate angle offsets something to act on.
pub fn with_preparation_plates(circuit: &CircuitSpec) -> CircuitSpec {
    let mut out = circuit.clone();
    let mut plates = Vec::new();
    for arm in [&circuit.ports.control_in, &circuit.ports.target_in] {
        plates.push(ElementSpec::hwp(0.0, arm));
        plates.push(ElementSpec::hwp(0.0, arm));
    }
    plates.extend(out.elements);
    out.elements = plates;
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbed {
    pub circuit: CircuitSpec,
    /// Set when a perturbed transmittance had to be clamped into [0, 1].
    pub clamped: bool,
}

/// Applies transmittance and wave-plate offsets to the element parameters.
/// The returned circuit carries `noise.lambda` with all offsets consumed.
pub fn perturb(circuit: &CircuitSpec, noise: &NoiseParams) -> Result<Perturbed> {
    let mut probe = circuit.clone();
    probe.noise = noise.clone();
    probe.validate()?;

    let mut clamped = false;
    let mut clamp = |t: f64| {
        let v = t.clamp(0.0, 1.0);
        clamped |= v != t;
        v
    };
    let mut ppbs_i = 0;
    let mut plate_i = 0;
    let mut elements = Vec::with_capacity(circuit.elements.len());
    for el in &circuit.elements {
        elements.push(match el {
            ElementSpec::Ppbs { t_h, t_v, arms } => {
                let off = noise.ppbs_offsets.get(ppbs_i).copied().unwrap_or_default();
                ppbs_i += 1;
                ElementSpec::Ppbs { t_h: clamp(t_h + off.d_t_h), t_v: clamp(t_v + off.d_t_v), arms: arms.clone() }
            }
            ElementSpec::Hwp { theta, arms } => {
                let off = noise.plate_offsets.get(plate_i).copied().unwrap_or(0.0);
                plate_i += 1;
                ElementSpec::Hwp { theta: theta + off, arms: arms.clone() }
            }
            ElementSpec::Qwp { theta, arms } => {
                let off = noise.plate_offsets.get(plate_i).copied().unwrap_or(0.0);
                plate_i += 1;
                ElementSpec::Qwp { theta: theta + off, arms: arms.clone() }
            }
            other => other.clone(),
        });
    }
    let out = CircuitSpec {
        elements,
        noise: NoiseParams::with_lambda(noise.lambda),
        ..circuit.clone()
    };
    Ok(Perturbed { circuit: out, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_8};

    fn dmax(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn ppbs_a_blocks() {
        let et = element_transform(&ElementSpec::ppbs(PPBS_A.0, PPBS_A.1, "c", "t")).unwrap();
        // modes: (c,H), (c,V), (t,H), (t,V)
        assert!((et.matrix[(0, 0)].re - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((et.matrix[(0, 2)].re - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(et.matrix[(1, 1)], re(0.0));
        assert_eq!(et.matrix[(3, 1)], re(-1.0));
        assert_eq!(et.matrix[(1, 3)], re(1.0));
    }

    #[test]
    fn hwp_pi_over_8_rotates_h_to_diagonal() {
        let j = hwp_jones(FRAC_PI_8);
        assert!((j[(0, 0)] - re(FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((j[(1, 0)] - re(FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn qwp_at_zero_is_diag_one_i() {
        let j = qwp_jones(0.0);
        assert_eq!(j, Op2::new(re(1.0), re(0.0), re(0.0), c(0.0, 1.0)));
    }

    #[test]
    fn ppbs_b_transmits_v_at_one_over_sqrt3() {
        let et = element_transform(&ElementSpec::ppbs(PPBS_B.0, PPBS_B.1, "c", "c_dump")).unwrap();
        assert!((et.matrix[(1, 1)].re - 1.0 / 3.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(et.matrix[(0, 0)], re(1.0));
        assert_eq!(et.matrix[(2, 0)], re(0.0));
    }

    #[test]
    fn parameter_errors() {
        assert!(element_transform(&ElementSpec::ppbs(1.2, 0.0, "a", "b")).is_err());
        assert!(element_transform(&ElementSpec::ppbs(0.5, -0.1, "a", "b")).is_err());
        assert!(element_transform(&ElementSpec::hwp(f64::NAN, "a")).is_err());
        assert!(element_transform(&ElementSpec::Hwp { theta: 0.0, arms: vec![] }).is_err());
    }

    #[test]
    fn compose_empty_and_single() {
        let empty = CircuitSpec {
            registry: vec!["c".into(), "t".into()],
            elements: vec![],
            noise: NoiseParams::ideal(),
            ports: Ports::default(),
            compensate_inputs: false,
        };
        let u = compose_circuit(&empty).unwrap();
        assert_eq!(u.matrix, DMatrix::identity(4, 4));

        let single = build_compact_cnot(CnotVariant::CompensatedInput);
        let u = compose_circuit(&single).unwrap();
        let et = element_transform(&single.elements[0]).unwrap();
        // Registry order c,t matches the element's port order, so embedding is the identity map.
        assert!(dmax(&u.matrix, &et.matrix) < 1e-15);
    }

    #[test]
    fn builds_both_variants() {
        assert_eq!(build_compact_cnot(CnotVariant::FullPpbs).elements.len(), 3);
        let comp = build_compact_cnot(CnotVariant::CompensatedInput);
        assert_eq!(comp.elements.len(), 1);
        assert!(comp.compensate_inputs);
        assert!(builtin("compact-cnot").is_some());
        assert!(builtin("nope").is_none());
        for name in BUILTIN_NAMES {
            assert!(builtin(name).is_some(), "{name}");
        }
    }

    #[test]
    fn circuit_validation() {
        let mut bad = build_compact_cnot(CnotVariant::FullPpbs);
        bad.elements.push(ElementSpec::hwp(0.1, "x"));
        assert!(matches!(bad.validate(), Err(Error::UnknownArm(_))));
        let mut bad = build_compact_cnot(CnotVariant::FullPpbs);
        bad.registry.push("c".into());
        assert!(bad.validate().is_err());
        let mut bad = build_compact_cnot(CnotVariant::FullPpbs);
        bad.noise.lambda = 1.5;
        assert!(bad.validate().is_err());
        let mut bad = build_compact_cnot(CnotVariant::FullPpbs);
        bad.ports.target_out = "t".into();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn circuit_json_schema() {
        let doc = r#"{
            "registry": ["c", "t"],
            "elements": [
                {"kind": "PPBS", "T_H": 0.6666666666666666, "T_V": 0.0, "arms": ["c", "t"]},
                {"kind": "HWP", "theta": 0.0, "arms": ["c"]}
            ],
            "noise": {"lambda": 0.9, "ppbs_offsets": [{"dT_H": 0.01}], "plate_offsets": [0.02]},
            "compensate_inputs": true
        }"#;
        let spec = CircuitSpec::from_json(doc).unwrap();
        assert_eq!(spec.elements.len(), 2);
        assert_eq!(spec.ports, Ports::default());
        assert_eq!(spec.noise.ppbs_offsets[0].d_t_v, 0.0);
        assert_eq!(CircuitSpec::from_json(&spec.to_json()).unwrap(), spec);
        assert!(CircuitSpec::from_json(r#"{"registry": ["c"], "elements": [{"kind": "LENS", "arms": ["c"]}]}"#).is_err());
    }

    #[test]
    fn perturb_examples() {
        let base = build_compact_cnot(CnotVariant::CompensatedInput);
        let same = perturb(&base, &NoiseParams::ideal()).unwrap();
        assert_eq!(same.circuit, base);
        assert!(!same.clamped);

        let noise = NoiseParams {
            ppbs_offsets: vec![TransmittanceOffset { d_t_h: 0.05, d_t_v: 0.0 }],
            ..NoiseParams::ideal()
        };
        let p = perturb(&base, &noise).unwrap();
        let ElementSpec::Ppbs { t_h, .. } = p.circuit.elements[0] else { panic!() };
        assert!((t_h - 0.716_666_666_666_666_7).abs() < 1e-15);
        assert!((t_h - 0.7167).abs() < 5e-5);
        assert!(p.circuit.noise.ppbs_offsets.is_empty());

        let full = build_compact_cnot(CnotVariant::FullPpbs);
        let noise = NoiseParams {
            ppbs_offsets: vec![TransmittanceOffset { d_t_h: 0.2, d_t_v: 0.0 }],
            ..NoiseParams::ideal()
        };
        let p = perturb(&full, &noise).unwrap();
        let ElementSpec::Ppbs { t_h, .. } = p.circuit.elements[0] else { panic!() };
        assert_eq!(t_h, 1.0);
        assert!(p.clamped);
    }

    #[test]
    fn preparation_plates_are_identity() {
        let base = build_compact_cnot(CnotVariant::FullPpbs);
        let plated = with_preparation_plates(&base);
        assert_eq!(plated.plate_count(), 4);
        let a = compose_circuit(&base).unwrap();
        let b = compose_circuit(&plated).unwrap();
        assert!(dmax(&a.matrix, &b.matrix) < 1e-15);
    }

    fn arb_element() -> impl Strategy<Value = ElementSpec> {
        prop_oneof![
            (0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(h, v)| ElementSpec::ppbs(h, v, "a", "b")),
            (-7.0f64..7.0).prop_map(|t| ElementSpec::hwp(t, "a")),
            (-7.0f64..7.0).prop_map(|t| ElementSpec::qwp(t, "b")),
            (-7.0f64..7.0, -7.0f64..7.0).prop_map(|(h, v)| ElementSpec::Phase { phi_h: h, phi_v: v, arms: vec!["a".into()] }),
            Just(ElementSpec::Pbs { arms: vec!["b".into(), "a".into()] }),
        ]
    }

    fn circuit_of(elements: Vec<ElementSpec>) -> CircuitSpec {
        CircuitSpec {
            registry: vec!["a".into(), "b".into()],
            elements,
            noise: NoiseParams::ideal(),
            ports: Ports { control_in: "a".into(), target_in: "b".into(), control_out: "b".into(), target_out: "a".into() },
            compensate_inputs: false,
        }
    }

    proptest! {
        #[test]
        fn elements_are_unitary(el in arb_element()) {
            let et = element_transform(&el).unwrap();
            prop_assert!(unitarity_deviation(&et.matrix) < 1e-12);
        }

        #[test]
        fn ppbs_never_mixes_polarizations(h in 0.0f64..=1.0, v in 0.0f64..=1.0) {
            let et = element_transform(&ElementSpec::ppbs(h, v, "a", "b")).unwrap();
            for (j, mj) in et.modes.iter().enumerate() {
                for (k, mk) in et.modes.iter().enumerate() {
                    if mj.1 != mk.1 {
                        prop_assert_eq!(et.matrix[(j, k)], C64::default());
                    }
                }
            }
        }

        #[test]
        fn hwp_is_an_involution(theta in -10.0f64..10.0) {
            let j = hwp_jones(theta);
            let sq = j * j;
            prop_assert!((sq - Op2::identity()).iter().all(|z| z.norm() < 1e-12));
        }

        #[test]
        fn composition_is_associative(
            elements in proptest::collection::vec(arb_element(), 0..8),
            split in 0usize..8,
        ) {
            let split = split.min(elements.len());
            let all = compose_circuit(&circuit_of(elements.clone())).unwrap();
            let pre = compose_circuit(&circuit_of(elements[..split].to_vec())).unwrap();
            let post = compose_circuit(&circuit_of(elements[split..].to_vec())).unwrap();
            prop_assert!(dmax(&(post.matrix * pre.matrix), &all.matrix) < 1e-10);
        }
    }
}
