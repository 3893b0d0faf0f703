//! Each 6-level edge qudit written as a qubit `a` and a qutrit `b`.
//!
//! Encoded registers use the site order `(1a, 1b, 2a, 2b, 3a, 3b, ancillas...)`.
//! Every gate here is a permutation of computational basis states, so gate
//! sequences act exactly, both on state vectors and on level tuples.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupElement, Irrep, RegularRep};
use crate::hilbert::{QuditRegister, StateVector};
use crate::plaquette::{self, ChargeSpec, Edge, MeasurementBasis, Vertex};
use crate::scalar::{cr, Real};

use GroupElement::*;

/// Default ancilla label for controlled sequences.
pub const ANCILLA: &str = plaquette::ANCILLA;

/// Qubit site of qudit `k`.
pub fn qubit_site(k: usize) -> String {
    format!("{k}a")
}

/// Qutrit site of qudit `k`.
pub fn qutrit_site(k: usize) -> String {
    format!("{k}b")
}

/// Bijection between S3 labels and `(qubit, qutrit)` level pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Enc1,
    Enc2,
}

impl Encoding {
    pub fn encode(self, g: GroupElement) -> (usize, usize) {
        match (self, g) {
            (_, E) => (1, 0),
            (_, T0) => (0, 0),
            (_, T1) => (0, 1),
            (_, T2) => (0, 2),
            (Encoding::Enc1, CPlus) | (Encoding::Enc2, CMinus) => (1, 2),
            (Encoding::Enc1, CMinus) | (Encoding::Enc2, CPlus) => (1, 1),
        }
    }

    pub fn decode(self, a: usize, b: usize) -> Option<GroupElement> {
        GroupElement::ALL.iter().copied().find(|&g| self.encode(g) == (a, b))
    }

    /// Index of `(a, b)` in the `2 × 3` block, `a` most significant.
    fn flat(self, g: GroupElement) -> usize {
        let (a, b) = self.encode(g);
        3 * a + b
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoding::Enc1 => "enc1",
            Encoding::Enc2 => "enc2",
        })
    }
}

/// The encoded image of a regular group action on one qudit, as a map
/// over `(a, b)` pairs.
pub fn induced_action(encoding: Encoding, action: RegularRep) -> [((usize, usize), (usize, usize)); 6] {
    let mut out = [((0, 0), (0, 0)); 6];
    for (i, g) in GroupElement::ALL.iter().enumerate() {
        out[i] = (encoding.encode(*g), encoding.encode(action.apply(*g)));
    }
    out
}

/// Placement of the fluxless `R2` pair on the triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChargeConfiguration {
    /// Charges on `v1` and `v3`; operations at `v1`.
    V1V3,
    /// Charges on `v1` and `v2`; operations at `v1`.
    V1V2,
    /// Charges on `v2` and `v3`; operations at `v2`.
    V2V3,
}

impl ChargeConfiguration {
    pub const ALL: [ChargeConfiguration; 3] =
        [ChargeConfiguration::V1V3, ChargeConfiguration::V1V2, ChargeConfiguration::V2V3];

    pub fn pair(self) -> (Vertex, Vertex) {
        match self {
            ChargeConfiguration::V1V3 => (Vertex::V1, Vertex::V3),
            ChargeConfiguration::V1V2 => (Vertex::V1, Vertex::V2),
            ChargeConfiguration::V2V3 => (Vertex::V2, Vertex::V3),
        }
    }

    /// Encodings of qudits 1, 2, 3.
    pub fn assignment(self) -> [Encoding; 3] {
        use Encoding::*;
        match self {
            ChargeConfiguration::V1V3 => [Enc1, Enc1, Enc2],
            ChargeConfiguration::V1V2 => [Enc1, Enc1, Enc1],
            ChargeConfiguration::V2V3 => [Enc2, Enc2, Enc1],
        }
    }

    /// Vertex where gauge transforms are applied.
    pub fn operation_vertex(self) -> Vertex {
        match self {
            ChargeConfiguration::V2V3 => Vertex::V2,
            _ => Vertex::V1,
        }
    }

    /// The edge joining the charges.
    pub fn charge_edge(self) -> Edge {
        match self {
            ChargeConfiguration::V1V3 => Edge::E2,
            ChargeConfiguration::V1V2 => Edge::E1,
            ChargeConfiguration::V2V3 => Edge::E3,
        }
    }

    /// Qudits touched by the gauge transform, ordered so that the second
    /// one is the charge edge (whose qubit starts in `|1⟩`).
    pub fn operated_qudits(self) -> [usize; 2] {
        match self {
            ChargeConfiguration::V1V3 => [1, 2],
            ChargeConfiguration::V1V2 => [2, 1],
            ChargeConfiguration::V2V3 => [1, 3],
        }
    }

    /// `map[k-1]` is the default-configuration qudit that qudit `k` plays
    /// the role of.
    pub fn label_map(self) -> [usize; 3] {
        match self {
            ChargeConfiguration::V1V3 => [1, 2, 3],
            ChargeConfiguration::V1V2 => [2, 1, 3],
            ChargeConfiguration::V2V3 => [1, 3, 2],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ChargeConfiguration::V1V3 => "(v1,v3)",
            ChargeConfiguration::V1V2 => "(v1,v2)",
            ChargeConfiguration::V2V3 => "(v2,v3)",
        }
    }
}

impl fmt::Display for ChargeConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ChargeConfiguration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        match key.as_str() {
            "v1v3" => Ok(ChargeConfiguration::V1V3),
            "v1v2" => Ok(ChargeConfiguration::V1V2),
            "v2v3" => Ok(ChargeConfiguration::V2V3),
            _ => Err(Error::OutOfRange(format!("unknown charge configuration `{s}`"))),
        }
    }
}

/// The six encoded data sites followed by `ancillas` (qubits).
pub fn encoded_register(ancillas: &[&str]) -> QuditRegister {
    let mut dims = Vec::new();
    let mut labels = Vec::new();
    for k in 1..=3 {
        dims.extend([2, 3]);
        labels.extend([qubit_site(k), qutrit_site(k)]);
    }
    for a in ancillas {
        dims.push(2);
        labels.push(a.to_string());
    }
    QuditRegister::new(dims, labels).expect("static register")
}

fn edge_number(label: &str) -> Option<usize> {
    match label {
        "e1" => Some(1),
        "e2" => Some(2),
        "e3" => Some(3),
        _ => None,
    }
}

/// Rewrites every edge site `e_k` as the pair `(ka, kb)`; other sites are
/// carried over unchanged.
pub fn encode<T: Real>(state: &StateVector<T>, assignment: &[Encoding; 3]) -> Result<StateVector<T>> {
    let reg = state.register();
    let mut dims = Vec::new();
    let mut labels = Vec::new();
    let mut plan = Vec::new();
    for (label, &d) in reg.labels().iter().zip(reg.dims()) {
        match edge_number(label) {
            Some(k) => {
                if d != 6 {
                    return Err(Error::DimensionMismatch { expected: 6, found: d });
                }
                dims.extend([2, 3]);
                labels.extend([qubit_site(k), qutrit_site(k)]);
                plan.push(Some(assignment[k - 1]));
            }
            None => {
                dims.push(d);
                labels.push(label.clone());
                plan.push(None);
            }
        }
    }
    let target = QuditRegister::new(dims, labels)?;
    state.relabel_basis(target, |levels| {
        let mut out = Vec::with_capacity(levels.len() + 3);
        for (l, p) in levels.iter().zip(&plan) {
            match p {
                Some(enc) => {
                    let g = GroupElement::from_index(*l).expect("edge level below 6");
                    let (a, b) = enc.encode(g);
                    out.extend([a, b]);
                }
                None => out.push(*l),
            }
        }
        out
    })
}

/// Inverse of [`encode`]: adjacent `(ka, kb)` pairs become `e_k`.
pub fn decode<T: Real>(state: &StateVector<T>, assignment: &[Encoding; 3]) -> Result<StateVector<T>> {
    let reg = state.register();
    let labels = reg.labels();
    let mut dims = Vec::new();
    let mut out_labels = Vec::new();
    let mut plan: Vec<(usize, Option<Encoding>)> = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let pair = (1..=3).find(|&k| labels[i] == qubit_site(k));
        match pair {
            Some(k) if i + 1 < labels.len() && labels[i + 1] == qutrit_site(k) => {
                dims.push(6);
                out_labels.push(format!("e{k}"));
                plan.push((i, Some(assignment[k - 1])));
                i += 2;
            }
            _ => {
                dims.push(reg.dims()[i]);
                out_labels.push(labels[i].clone());
                plan.push((i, None));
                i += 1;
            }
        }
    }
    let target = QuditRegister::new(dims, out_labels)?;
    let mut invalid = false;
    let out = state.relabel_basis(target.clone(), |levels| {
        plan.iter()
            .map(|&(i, enc)| match enc {
                Some(enc) => match enc.decode(levels[i], levels[i + 1]) {
                    Some(g) => g.index(),
                    None => {
                        invalid = true;
                        0
                    }
                },
                None => levels[i],
            })
            .collect()
    });
    if invalid {
        return Err(Error::DimensionMismatch { expected: 6, found: 6 * state.register().len() });
    }
    out
}

/// Primitive gate names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    Perm3,
    Swap2,
    Not,
    Cnot2lvl,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateParams {
    /// `perm[i]` is the image of level `i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perm: Option<[usize; 3]>,
    /// Level pair exchanged on the target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<[usize; 2]>,
    /// Control level that activates the gate (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_value: Option<usize>,
}

/// One primitive gate.
///
/// * `perm3`: `sites = [qutrit]`, `params.perm`.
/// * `swap2`: `sites = [target]`, `params.levels`.
/// * `not`: `sites = [qubit]`.
/// * `cnot2lvl`: `sites = [control qubit, target]`, `params.levels`; swaps the
///   two target levels when the control sits at `control_value`.
///
/// `perm3`, `swap2` and `not` may carry an extra ancilla `control`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub gate: GateKind,
    pub sites: Vec<String>,
    #[serde(default)]
    pub params: GateParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<String>,
}

impl Gate {
    pub fn perm3(site: &str, perm: [usize; 3]) -> Self {
        Gate {
            gate: GateKind::Perm3,
            sites: vec![site.into()],
            params: GateParams { perm: Some(perm), ..Default::default() },
            control: None,
        }
    }

    pub fn swap2(site: &str, levels: [usize; 2]) -> Self {
        Gate {
            gate: GateKind::Swap2,
            sites: vec![site.into()],
            params: GateParams { levels: Some(levels), ..Default::default() },
            control: None,
        }
    }

    pub fn not(site: &str) -> Self {
        Gate { gate: GateKind::Not, sites: vec![site.into()], params: GateParams::default(), control: None }
    }

    pub fn cnot2lvl(control: &str, target: &str, levels: [usize; 2]) -> Self {
        Gate {
            gate: GateKind::Cnot2lvl,
            sites: vec![control.into(), target.into()],
            params: GateParams { levels: Some(levels), ..Default::default() },
            control: None,
        }
    }

    /// Adds an ancilla control (for `perm3`, `swap2`, `not`) or sets the
    /// active control level (for `cnot2lvl`, where `site` must be the
    /// existing control).
    pub fn controlled_by(mut self, site: &str, value: usize) -> Self {
        if self.gate != GateKind::Cnot2lvl {
            self.control = Some(site.into());
        }
        self.params.control_value = Some(value);
        self
    }

    fn control_value(&self) -> usize {
        self.params.control_value.unwrap_or(1)
    }

    /// `(control site, target site)`.
    fn roles(&self) -> (Option<&str>, &str) {
        match self.gate {
            GateKind::Cnot2lvl => (self.sites.first().map(String::as_str), self.sites.get(1).map_or("", String::as_str)),
            _ => (self.control.as_deref(), self.sites.first().map_or("", String::as_str)),
        }
    }

    /// Level map on the target site.
    fn target_map(&self, dim: usize) -> Result<Vec<usize>> {
        let bad = |why: &str| Error::InvalidGate(format!("{:?} on {:?}: {why}", self.gate, self.sites));
        let mut map: Vec<usize> = (0..dim).collect();
        match self.gate {
            GateKind::Perm3 => {
                let p = self.params.perm.ok_or_else(|| bad("missing perm"))?;
                if dim != 3 {
                    return Err(bad("perm3 needs a qutrit"));
                }
                let mut seen = [false; 3];
                for &x in &p {
                    if x >= 3 || seen[x] {
                        return Err(bad("perm is not a permutation of 0..3"));
                    }
                    seen[x] = true;
                }
                map.copy_from_slice(&p);
            }
            GateKind::Swap2 | GateKind::Cnot2lvl => {
                let [i, j] = self.params.levels.ok_or_else(|| bad("missing levels"))?;
                if i >= dim || j >= dim || i == j {
                    return Err(bad("levels out of range"));
                }
                map.swap(i, j);
            }
            GateKind::Not => {
                if dim != 2 {
                    return Err(bad("not needs a qubit"));
                }
                map.swap(0, 1);
            }
        }
        Ok(map)
    }

    fn check_shape(&self) -> Result<()> {
        let want = if self.gate == GateKind::Cnot2lvl { 2 } else { 1 };
        if self.sites.len() != want {
            return Err(Error::InvalidGate(format!("{:?} expects {want} sites, got {:?}", self.gate, self.sites)));
        }
        if self.gate == GateKind::Cnot2lvl && self.control.is_some() {
            return Err(Error::InvalidGate("cnot2lvl takes its control from `sites`".into()));
        }
        Ok(())
    }

    /// Applies the gate to a level tuple in place.
    pub fn apply_levels(&self, register: &QuditRegister, levels: &mut [usize]) -> Result<()> {
        self.check_shape()?;
        let (control, target) = self.roles();
        let t = register.position(target)?;
        if let Some(c) = control {
            let cpos = register.position(c)?;
            if cpos == t {
                return Err(Error::InvalidGate("control and target coincide".into()));
            }
            if self.control_value() >= register.dims()[cpos] {
                return Err(Error::InvalidGate("control value out of range".into()));
            }
            if levels[cpos] != self.control_value() {
                return Ok(());
            }
        }
        let map = self.target_map(register.dims()[t])?;
        levels[t] = map[levels[t]];
        Ok(())
    }
}

/// Ordered list of gates; serializes as a JSON array.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GateSequence {
    pub gates: Vec<Gate>,
}

impl GateSequence {
    pub fn new(gates: Vec<Gate>) -> Self {
        GateSequence { gates }
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn then(mut self, other: GateSequence) -> Self {
        self.gates.extend(other.gates);
        self
    }

    pub fn apply_levels(&self, register: &QuditRegister, levels: &mut [usize]) -> Result<()> {
        for g in &self.gates {
            g.apply_levels(register, levels)?;
        }
        Ok(())
    }

    /// Applies the sequence to a state (first gate first).
    pub fn apply<T: Real>(&self, state: &StateVector<T>) -> Result<StateVector<T>> {
        let reg = state.register().clone();
        // validate once so the relabeling closure cannot fail
        let mut probe = vec![0; reg.len()];
        self.apply_levels(&reg, &mut probe)?;
        state.relabel_basis(reg.clone(), |levels| {
            let mut l = levels.to_vec();
            self.apply_levels(&reg, &mut l).expect("validated");
            l
        })
    }
}

/// Active qutrit levels for `T_{t_i}`.
pub fn transposition_levels(g: GroupElement) -> Option<[usize; 2]> {
    match g {
        T0 => Some([1, 2]),
        T1 => Some([0, 1]),
        T2 => Some([0, 2]),
        _ => None,
    }
}

/// Qutrit permutation implementing `T_{c±}` on the operated qutrits.
pub fn cycle_permutation(g: GroupElement) -> Option<[usize; 3]> {
    match g {
        CPlus => Some([2, 0, 1]),
        CMinus => Some([1, 2, 0]),
        _ => None,
    }
}

fn invert3(p: [usize; 3]) -> [usize; 3] {
    let mut q = [0; 3];
    for (i, &x) in p.iter().enumerate() {
        q[x] = i;
    }
    q
}

fn check_vertex(config: ChargeConfiguration, vertex: Vertex) -> Result<()> {
    if vertex != config.operation_vertex() {
        return Err(Error::UnsupportedVertex { vertex: vertex.to_string(), configuration: config.to_string() });
    }
    Ok(())
}

/// Encoded `T_g(v1)` for the default configuration.
pub fn encoded_t(g: GroupElement, vertex: Vertex, controlled: bool) -> Result<GateSequence> {
    encoded_t_in(ChargeConfiguration::V1V3, g, vertex, controlled)
}

/// Encoded `T_g` at the configuration's operation vertex. Transpositions
/// use the CNOT, NOT, CNOT form; the controlled form replaces the NOT by a
/// CNOT from the ancilla [`ANCILLA`].
pub fn encoded_t_in(config: ChargeConfiguration, g: GroupElement, vertex: Vertex, controlled: bool) -> Result<GateSequence> {
    check_vertex(config, vertex)?;
    let mut gates = Vec::new();
    for k in config.operated_qudits() {
        let (a, b) = (qubit_site(k), qutrit_site(k));
        if let Some(p) = cycle_permutation(g) {
            let gate = Gate::perm3(&b, p);
            gates.push(if controlled { gate.controlled_by(ANCILLA, 1) } else { gate });
        } else if let Some(lv) = transposition_levels(g) {
            gates.push(Gate::cnot2lvl(&a, &b, lv));
            gates.push(if controlled { Gate::cnot2lvl(ANCILLA, &a, [0, 1]) } else { Gate::not(&a) });
            gates.push(Gate::cnot2lvl(&a, &b, lv));
        }
    }
    Ok(GateSequence::new(gates))
}

/// Deterministic uncontrolled form: a NOT on the qubit and a level swap on
/// the qutrit for transpositions, a qutrit cycle for `c±`.
pub fn simplified_t_in(config: ChargeConfiguration, g: GroupElement, vertex: Vertex) -> Result<GateSequence> {
    check_vertex(config, vertex)?;
    let mut gates = Vec::new();
    for k in config.operated_qudits() {
        let (a, b) = (qubit_site(k), qutrit_site(k));
        if let Some(p) = cycle_permutation(g) {
            gates.push(Gate::perm3(&b, p));
        } else if let Some(lv) = transposition_levels(g) {
            gates.push(Gate::not(&a));
            gates.push(Gate::swap2(&b, lv));
        }
    }
    Ok(GateSequence::new(gates))
}

/// `|1_{R2}; pair⟩` written in the configuration's encoding.
pub fn build_initial_encoded_state<T: Real>(config: ChargeConfiguration) -> StateVector<T> {
    let spec = ChargeSpec::identity(Irrep::TwoDim, config.pair()).expect("identity is normalized");
    let s = plaquette::charge_pair_state::<T>(&spec);
    encode(&s, &config.assignment()).expect("edge register")
}

/// Everything needed to run experiments in one charge configuration.
#[derive(Clone, Debug)]
pub struct ConfigurationData<T: Real> {
    pub configuration: ChargeConfiguration,
    pub assignment: [Encoding; 3],
    pub state: StateVector<T>,
    /// Uncontrolled encoded `T_g` for every `g`.
    pub gate_tables: Vec<(GroupElement, GateSequence)>,
}

pub fn alternative_configuration<T: Real>(config: ChargeConfiguration) -> ConfigurationData<T> {
    let v = config.operation_vertex();
    ConfigurationData {
        configuration: config,
        assignment: config.assignment(),
        state: build_initial_encoded_state(config),
        gate_tables: GroupElement::ALL
            .iter()
            .map(|&g| (g, encoded_t_in(config, g, v, false).expect("operation vertex")))
            .collect(),
    }
}

/// Reorders the data qudits of `state` so that it can be compared with the
/// default configuration: qudit `k` is renamed to `config.label_map()[k-1]`.
pub fn to_default_labels<T: Real>(state: &StateVector<T>, config: ChargeConfiguration) -> Result<StateVector<T>> {
    let map = config.label_map();
    let renamed: Vec<String> = state
        .register()
        .labels()
        .iter()
        .map(|l| {
            for k in 1..=3 {
                if *l == qubit_site(k) {
                    return qubit_site(map[k - 1]);
                }
                if *l == qutrit_site(k) {
                    return qutrit_site(map[k - 1]);
                }
            }
            l.clone()
        })
        .collect();
    let refs: Vec<&str> = renamed.iter().map(String::as_str).collect();
    let relabeled = state.relabel(&refs)?;
    let order: Vec<String> = state.register().labels().to_vec();
    let order: Vec<&str> = order.iter().map(String::as_str).collect();
    relabeled.permute_sites(&order)
}

/// Controlled encoded `T_h` from an ancilla in `|+_x⟩`; `(P(+), P(-))`.
pub fn encoded_controlled_experiment<T: Real>(
    config: ChargeConfiguration,
    h: GroupElement,
    basis: MeasurementBasis,
) -> Result<(T, T)> {
    let state = build_initial_encoded_state::<T>(config).tensor_with(&plaquette::plus_state(ANCILLA))?;
    let seq = encoded_t_in(config, h, config.operation_vertex(), true)?;
    plaquette::measure_qubit(&seq.apply(&state)?, ANCILLA, basis)
}

/// The simplified controlled-`T_{t_i}` circuit: a two-level CNOT inside the
/// first operated pair, the deterministic level swap on the charge-edge
/// qutrit (its qubit is `|1⟩`), and NOTs on both qubits controlled by the
/// ancilla in `|0⟩`. `include_step6` appends the closing CNOTs.
pub fn controlled_tt_sequence(config: ChargeConfiguration, i: usize, include_step6: bool) -> Result<GateSequence> {
    let g = GroupElement::transposition(i).ok_or_else(|| Error::OutOfRange(format!("transposition index {i}")))?;
    let lv = transposition_levels(g).expect("transposition");
    let [p, q] = config.operated_qudits();
    let (pa, pb, qa, qb) = (qubit_site(p), qutrit_site(p), qubit_site(q), qutrit_site(q));
    let mut gates = vec![
        Gate::cnot2lvl(&pa, &pb, lv),
        Gate::swap2(&qb, lv),
        Gate::not(&pa).controlled_by(ANCILLA, 0),
        Gate::not(&qa).controlled_by(ANCILLA, 0),
    ];
    if include_step6 {
        gates.push(Gate::cnot2lvl(&pa, &pb, lv));
        gates.push(Gate::cnot2lvl(&qa, &qb, lv));
    }
    Ok(GateSequence::new(gates))
}

/// Runs [`controlled_tt_sequence`] on the initial state with the ancilla in `|+_x⟩`
/// and measures the ancilla in the x basis.
pub fn run_controlled_tt_protocol<T: Real>(i: usize, include_step6: bool) -> Result<(T, T)> {
    run_controlled_tt_protocol_in(ChargeConfiguration::V1V3, i, include_step6)
}

pub fn run_controlled_tt_protocol_in<T: Real>(config: ChargeConfiguration, i: usize, include_step6: bool) -> Result<(T, T)> {
    let state = build_initial_encoded_state::<T>(config).tensor_with(&plaquette::plus_state(ANCILLA))?;
    let out = controlled_tt_sequence(config, i, include_step6)?.apply(&state)?;
    plaquette::measure_qubit(&out, ANCILLA, MeasurementBasis::X)
}

/// Group-label statistics of the charge edge after an unconditional `T_g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbeOutcome<T: Real> {
    pub p_e: T,
    pub p_cplus: T,
    pub p_cminus: T,
    /// `2 P(e) - P(c+) - P(c-)`.
    pub w: T,
}

/// Probabilities of every group label on `edge` (6-level register).
pub fn edge_label_distribution<T: Real>(state: &StateVector<T>, edge: Edge) -> Result<[T; 6]> {
    let p = state.site_distribution(edge.label())?;
    let mut out = [T::zero(); 6];
    out.copy_from_slice(&p);
    Ok(out)
}

/// The same statistics read from `(ka, kb)` of an encoded register.
pub fn encoded_label_distribution<T: Real>(state: &StateVector<T>, qudit: usize, encoding: Encoding) -> Result<[T; 6]> {
    let (a, b) = (qubit_site(qudit), qutrit_site(qudit));
    let joint = state.joint_distribution(&[&a, &b])?;
    let mut out = [T::zero(); 6];
    for g in GroupElement::ALL {
        out[g.index()] = joint[encoding.flat(g)];
    }
    Ok(out)
}

impl<T: Real> ProbeOutcome<T> {
    /// From the six label probabilities of the charge edge.
    pub fn from_distribution(p: [T; 6]) -> Self {
        let (p_e, p_cplus, p_cminus) = (p[E.index()], p[CPlus.index()], p[CMinus.index()]);
        ProbeOutcome { p_e, p_cplus, p_cminus, w: T::lit(2.0) * p_e - p_cplus - p_cminus }
    }
}

/// Ancilla-free probe at the encoded layer.
pub fn run_ancilla_free_probe<T: Real>(g: GroupElement) -> Result<ProbeOutcome<T>> {
    run_ancilla_free_probe_in(ChargeConfiguration::V1V3, g)
}

pub fn run_ancilla_free_probe_in<T: Real>(config: ChargeConfiguration, g: GroupElement) -> Result<ProbeOutcome<T>> {
    let state = build_initial_encoded_state::<T>(config);
    let out = simplified_t_in(config, g, config.operation_vertex())?.apply(&state)?;
    let k = config.charge_edge().number();
    Ok(ProbeOutcome::from_distribution(encoded_label_distribution(&out, k, config.assignment()[k - 1])?))
}

/// The same probe on the 6-level plaquette.
pub fn abstract_probe<T: Real>(config: ChargeConfiguration, g: GroupElement) -> ProbeOutcome<T> {
    let spec = ChargeSpec::identity(Irrep::TwoDim, config.pair()).expect("identity is normalized");
    let s = plaquette::charge_pair_state::<T>(&spec)
        .apply_local(&plaquette::gauge_transform(g, config.operation_vertex()))
        .expect("edges present");
    ProbeOutcome::from_distribution(edge_label_distribution(&s, config.charge_edge()).expect("normalized"))
}

/// Entangled-control variants of the controlled `T_{c±}` chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlVariant {
    /// Ancillas `anc4`, `anc5` in `(|00⟩ + |11⟩)/√2`.
    TwoAncilla,
    /// Four ancillas in a GHZ state, one per controlled permutation.
    FourAncilla,
}

impl ControlVariant {
    pub fn ancillas(self) -> Vec<&'static str> {
        match self {
            ControlVariant::TwoAncilla => vec!["anc4", "anc5"],
            ControlVariant::FourAncilla => vec!["anc4", "anc5", "anc6", "anc7"],
        }
    }

    /// Control ancilla of each of the four controlled permutations.
    fn controls(self) -> [&'static str; 4] {
        match self {
            ControlVariant::TwoAncilla => ["anc5", "anc4", "anc4", "anc5"],
            ControlVariant::FourAncilla => ["anc4", "anc5", "anc6", "anc7"],
        }
    }
}

/// Controlled `T_{c±}` from entangled ancillas: with `Q = T⁻¹`, apply `Q`
/// on the first qutrit and then the second controlled on ancilla level 1,
/// `Q⁻¹` on both controlled on level 0, then `Q` on both. The net action is
/// `T` when the ancillas are all `|1⟩` and identity when all `|0⟩`.
pub fn entangled_control_sequence(config: ChargeConfiguration, g: GroupElement, variant: ControlVariant) -> Result<GateSequence> {
    let t = cycle_permutation(g).ok_or_else(|| Error::OutOfRange(format!("{g} is not a 3-cycle")))?;
    let q = invert3(t);
    let q_inv = t;
    let [p, r] = config.operated_qudits();
    let (pb, rb) = (qutrit_site(p), qutrit_site(r));
    let c = variant.controls();
    Ok(GateSequence::new(vec![
        Gate::perm3(&pb, q).controlled_by(c[0], 1),
        Gate::perm3(&rb, q).controlled_by(c[1], 1),
        Gate::perm3(&pb, q_inv).controlled_by(c[2], 0),
        Gate::perm3(&rb, q_inv).controlled_by(c[3], 0),
        Gate::perm3(&pb, q),
        Gate::perm3(&rb, q),
    ]))
}

/// `(|0…0⟩ + |1…1⟩)/√2` on the given qubit labels.
pub fn ghz_state<T: Real>(labels: &[&str]) -> Result<StateVector<T>> {
    let reg = QuditRegister::new(vec![2; labels.len()], labels.to_vec())?;
    let mut amps = vec![cr(T::zero()); reg.total_dim()];
    let h = T::FRAC_1_SQRT_2();
    amps[0] = cr(h);
    amps[reg.total_dim() - 1] = cr(h);
    StateVector::new(reg, amps)
}

/// Expectation of `X ⊗ … ⊗ X` on the listed qubits.
pub fn x_parity<T: Real>(state: &StateVector<T>, labels: &[&str]) -> Result<T> {
    let mut s = state.clone();
    for l in labels {
        s = s.apply_local(&plaquette::basis_rotation(l, MeasurementBasis::X))?;
    }
    let p = s.joint_distribution(labels)?;
    Ok(p.iter()
        .enumerate()
        .map(|(i, &pi)| if i.count_ones() % 2 == 0 { pi } else { -pi })
        .sum())
}

/// `⟨X^{⊗n}⟩` on the ancillas after the entangled-control chain; equals
/// `Re F` for the 3-cycle `g`.
pub fn entangled_control_experiment<T: Real>(config: ChargeConfiguration, g: GroupElement, variant: ControlVariant) -> Result<T> {
    let anc = variant.ancillas();
    let state = build_initial_encoded_state::<T>(config).tensor_with(&ghz_state(&anc)?)?;
    let out = entangled_control_sequence(config, g, variant)?.apply(&state)?;
    x_parity(&out, &anc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Side;

    #[test]
    fn encoding_examples() {
        assert_eq!(Encoding::Enc1.encode(E), (1, 0));
        assert_eq!(Encoding::Enc2.encode(CPlus), (1, 1));
        for enc in [Encoding::Enc1, Encoding::Enc2] {
            let mut seen = std::collections::HashSet::new();
            for g in GroupElement::ALL {
                assert!(seen.insert(enc.encode(g)));
                let (a, b) = enc.encode(g);
                assert_eq!(enc.decode(a, b), Some(g));
            }
        }
    }

    #[test]
    fn encode_decode_roundtrip_on_basis() {
        let reg = plaquette::PlaquetteTopology::register();
        for config in ChargeConfiguration::ALL {
            let asg = config.assignment();
            for idx in 0..216 {
                let s = StateVector::<f64>::basis(reg.clone(), &reg.levels_of(idx)).unwrap();
                let enc = encode(&s, &asg).unwrap();
                assert_eq!(decode(&enc, &asg).unwrap(), s);
            }
        }
    }

    #[test]
    fn gate_examples() {
        let reg = encoded_register(&[]);
        let mut lv = vec![1, 0, 1, 0, 1, 0];
        encoded_t(CPlus, Vertex::V1, false).unwrap().apply_levels(&reg, &mut lv).unwrap();
        assert_eq!((lv[0], lv[1]), (1, 2));

        let mut lv = vec![0, 1, 0, 1, 0, 0];
        encoded_t(T0, Vertex::V1, false).unwrap().apply_levels(&reg, &mut lv).unwrap();
        assert_eq!((lv[0], lv[1]), (1, 2));

        let mut lv = vec![1, 2, 1, 2, 0, 0];
        encoded_t(T2, Vertex::V1, false).unwrap().apply_levels(&reg, &mut lv).unwrap();
        assert_eq!((lv[0], lv[1]), (0, 0));

        assert!(matches!(encoded_t(T0, Vertex::V3, false), Err(Error::UnsupportedVertex { .. })));
    }

    #[test]
    fn gate_json_shape() {
        let seq = encoded_t(T1, Vertex::V1, true).unwrap();
        let js = serde_json::to_value(&seq).unwrap();
        assert!(js.is_array());
        assert_eq!(js[0]["gate"], "cnot2lvl");
        assert_eq!(js[0]["params"]["levels"], serde_json::json!([0, 1]));
        let back: GateSequence = serde_json::from_value(js).unwrap();
        assert_eq!(back, seq);
        let ctl = serde_json::to_value(Gate::perm3("1b", [2, 0, 1]).controlled_by("anc", 1)).unwrap();
        assert_eq!(ctl["control"], "anc");
    }

    #[test]
    fn invalid_gates() {
        let reg = encoded_register(&[]);
        let mut lv = vec![0; 6];
        assert!(Gate::perm3("1a", [2, 0, 1]).apply_levels(&reg, &mut lv).is_err());
        assert!(Gate::perm3("1b", [0, 0, 1]).apply_levels(&reg, &mut lv).is_err());
        assert!(Gate::swap2("1b", [1, 3]).apply_levels(&reg, &mut lv).is_err());
        assert!(Gate::not("9a").apply_levels(&reg, &mut lv).is_err());
    }

    #[test]
    fn gates_match_six_level_action_everywhere() {
        let reg6 = plaquette::PlaquetteTopology::register();
        for config in ChargeConfiguration::ALL {
            let asg = config.assignment();
            let v = config.operation_vertex();
            for g in GroupElement::ALL {
                let t = plaquette::gauge_transform::<f64>(g, v);
                for form in [encoded_t_in(config, g, v, false).unwrap(), simplified_t_in(config, g, v).unwrap()] {
                    for idx in 0..216 {
                        let s = StateVector::<f64>::basis(reg6.clone(), &reg6.levels_of(idx)).unwrap();
                        let want = encode(&s.apply_local(&t).unwrap(), &asg).unwrap();
                        let got = form.apply(&encode(&s, &asg).unwrap()).unwrap();
                        assert_eq!(got, want, "{config} {g} basis {idx}");
                    }
                }
            }
        }
    }

    #[test]
    fn controlled_forms_switch_on_ancilla() {
        let reg = encoded_register(&[ANCILLA]);
        for g in GroupElement::ALL {
            let ctl = encoded_t(g, Vertex::V1, true).unwrap();
            let plain = encoded_t(g, Vertex::V1, false).unwrap();
            for idx in 0..reg.total_dim() {
                let lv = reg.levels_of(idx);
                let mut got = lv.clone();
                ctl.apply_levels(&reg, &mut got).unwrap();
                let mut want = lv.clone();
                if lv[6] == 1 {
                    plain.apply_levels(&reg, &mut want).unwrap();
                }
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn right_action_under_enc2_matches_left_under_enc1() {
        // T_{c+}(v2) acts on qudit 1 as R_{c-}
        let act = induced_action(Encoding::Enc2, RegularRep::new(Side::Right, CMinus));
        for ((a, b), (a2, b2)) in act {
            assert_eq!(a, a2);
            assert_eq!(b2, [2, 0, 1][b]);
        }
    }

    #[test]
    fn initial_state_marginals() {
        let s = build_initial_encoded_state::<f64>(ChargeConfiguration::V1V3);
        assert!(s.is_normalized());
        let p2a = s.site_distribution("2a").unwrap();
        assert!(p2a[1] > 1.0 - 1e-12);
        let amp = s.amplitude(&[0, 0, 1, 0, 0, 0]);
        assert!((amp.re - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn alternative_states_match_default_after_relabeling() {
        let default = build_initial_encoded_state::<f64>(ChargeConfiguration::V1V3);
        for config in ChargeConfiguration::ALL {
            let data = alternative_configuration::<f64>(config);
            let mapped = to_default_labels(&data.state, config).unwrap();
            assert!(mapped.max_abs_diff(&default) < 1e-12, "{config}");
        }
    }

    #[test]
    fn probes() {
        let p = run_ancilla_free_probe::<f64>(E).unwrap();
        assert!((p.p_e - 2.0 / 3.0).abs() < 1e-10 && (p.w - 1.0).abs() < 1e-10);
        let p = run_ancilla_free_probe::<f64>(CPlus).unwrap();
        assert!((p.p_cplus - 2.0 / 3.0).abs() < 1e-10 && (p.w + 0.5).abs() < 1e-10);
        let p = run_ancilla_free_probe::<f64>(T0).unwrap();
        assert!(p.p_e.abs() + p.p_cplus.abs() + p.p_cminus.abs() < 1e-10);
    }

    #[test]
    fn controlled_tt_half_half() {
        for i in 0..3 {
            for step6 in [false, true] {
                let (p, m) = run_controlled_tt_protocol::<f64>(i, step6).unwrap();
                assert!((p - 0.5).abs() < 1e-10 && (m - 0.5).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn entangled_controls_reproduce_real_part() {
        for config in ChargeConfiguration::ALL {
            for g in [CPlus, CMinus] {
                for variant in [ControlVariant::TwoAncilla, ControlVariant::FourAncilla] {
                    let x = entangled_control_experiment::<f64>(config, g, variant).unwrap();
                    assert!((x + 0.5).abs() < 1e-10, "{config} {g} {variant:?}: {x}");
                }
            }
        }
    }

    #[test]
    fn entangled_control_net_action() {
        let reg = encoded_register(&["anc4", "anc5"]);
        let seq = entangled_control_sequence(ChargeConfiguration::V1V3, CPlus, ControlVariant::TwoAncilla).unwrap();
        let t = encoded_t(CPlus, Vertex::V1, false).unwrap();
        for idx in 0..reg.total_dim() {
            let lv = reg.levels_of(idx);
            if lv[6] != lv[7] {
                continue;
            }
            let mut got = lv.clone();
            seq.apply_levels(&reg, &mut got).unwrap();
            let mut want = lv.clone();
            if lv[6] == 1 {
                t.apply_levels(&reg, &mut want).unwrap();
            }
            assert_eq!(got, want);
        }
    }
}
