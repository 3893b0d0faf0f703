//! The D(S3) model on a single triangular plaquette.
//!
//! Three 6-level edge qudits `e1 = [v1, v2]`, `e2 = [v1, v3]`, `e3 = [v2, v3]`
//! bound one face. The ground state is
//!
//! ```text
//! |GS⟩ = 1/6 Σ_{g,k} |k⟩₁ |g⟩₂ |k⁻¹g⟩₃
//! ```
//!
//! and a charge pair on the endpoints of an edge `e` is `D_M(e)|GS⟩` with
//! `D_M = Σ_g tr{M R†(g)} |g⟩⟨g|`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{self, GroupElement, Irrep, RepRef, Side};
use crate::hilbert::{LocalOperator, QuditRegister, StateVector};
use crate::scalar::{self, cr, CMatrix, Real};

/// Local dimension of every edge qudit.
pub const EDGE_DIM: usize = 6;
/// Label of the interferometry ancilla qubit.
pub const ANCILLA: &str = "anc";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vertex {
    V1,
    V2,
    V3,
}

impl Vertex {
    pub const ALL: [Vertex; 3] = [Vertex::V1, Vertex::V2, Vertex::V3];

    pub fn label(self) -> &'static str {
        match self {
            Vertex::V1 => "v1",
            Vertex::V2 => "v2",
            Vertex::V3 => "v3",
        }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Vertex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v1" => Ok(Vertex::V1),
            "v2" => Ok(Vertex::V2),
            "v3" => Ok(Vertex::V3),
            other => Err(Error::OutOfRange(format!("unknown vertex `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    E1,
    E2,
    E3,
}

impl Edge {
    pub const ALL: [Edge; 3] = [Edge::E1, Edge::E2, Edge::E3];

    pub fn label(self) -> &'static str {
        match self {
            Edge::E1 => "e1",
            Edge::E2 => "e2",
            Edge::E3 => "e3",
        }
    }

    /// 1-based qudit number.
    pub fn number(self) -> usize {
        match self {
            Edge::E1 => 1,
            Edge::E2 => 2,
            Edge::E3 => 3,
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Whether an edge leaves or enters a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Incidence {
    Outgoing,
    Incoming,
}

/// Fixed triangle geometry.
#[derive(Clone, Copy, Debug, Default)]
pub struct PlaquetteTopology;

impl PlaquetteTopology {
    /// `(tail, head)` of an edge.
    pub fn endpoints(edge: Edge) -> (Vertex, Vertex) {
        match edge {
            Edge::E1 => (Vertex::V1, Vertex::V2),
            Edge::E2 => (Vertex::V1, Vertex::V3),
            Edge::E3 => (Vertex::V2, Vertex::V3),
        }
    }

    /// Edges incident on `v`, in edge order.
    pub fn star(v: Vertex) -> Vec<(Edge, Incidence)> {
        Edge::ALL
            .iter()
            .filter_map(|&e| {
                let (tail, head) = Self::endpoints(e);
                if tail == v {
                    Some((e, Incidence::Outgoing))
                } else if head == v {
                    Some((e, Incidence::Incoming))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Counterclockwise boundary starting at `e1`, with `o_f(e)`.
    pub fn face_boundary() -> [(Edge, i8); 3] {
        [(Edge::E1, 1), (Edge::E3, 1), (Edge::E2, -1)]
    }

    /// The edge oriented from `a` to `b`, if any.
    pub fn oriented_edge(a: Vertex, b: Vertex) -> Option<Edge> {
        Edge::ALL.iter().copied().find(|&e| Self::endpoints(e) == (a, b))
    }

    /// The `[6, 6, 6]` register labelled `e1, e2, e3`.
    pub fn register() -> QuditRegister {
        QuditRegister::new(vec![EDGE_DIM; 3], vec!["e1", "e2", "e3"]).expect("static register")
    }

    /// The edge register followed by the ancilla qubit.
    pub fn register_with_ancilla() -> QuditRegister {
        Self::register()
            .concat(&QuditRegister::single(ANCILLA, 2))
            .expect("static register")
    }
}

fn element(i: usize) -> GroupElement {
    GroupElement::from_index(i).expect("index below 6")
}

/// `1/6 Σ_{g,k} |k⟩₁|g⟩₂|k⁻¹g⟩₃`.
pub fn ground_state<T: Real>() -> StateVector<T> {
    let reg = PlaquetteTopology::register();
    let mut amps = vec![cr(T::zero()); reg.total_dim()];
    let sixth = T::one() / T::lit(6.0);
    for g in GroupElement::ALL {
        for k in GroupElement::ALL {
            let idx = reg.index_of(&[k.index(), g.index(), (k.inverse() * g).index()]);
            amps[idx] = cr(sixth);
        }
    }
    StateVector::new(reg, amps).expect("ground state dimensions")
}

/// `T_h(v)`: `L_h` on outgoing edges and `R_{h⁻¹}` on incoming ones.
pub fn gauge_transform<T: Real>(h: GroupElement, v: Vertex) -> LocalOperator<T> {
    let star = PlaquetteTopology::star(v);
    let mut sites = Vec::new();
    let mut m: Option<CMatrix<T>> = None;
    for (edge, inc) in star {
        let factor = match inc {
            Incidence::Outgoing => group::regular_matrix(Side::Left, h),
            Incidence::Incoming => group::regular_matrix(Side::Right, h.inverse()),
        };
        sites.push(edge.label());
        m = Some(match m {
            None => factor,
            Some(acc) => scalar::kron(&acc, &factor),
        });
    }
    let dims = vec![EDGE_DIM; sites.len()];
    LocalOperator::new(sites, dims, m.expect("every vertex has edges")).expect("gauge transform shape")
}

/// `A(v) = 1/6 Σ_g T_g(v)`.
pub fn vertex_projector<T: Real>(v: Vertex) -> LocalOperator<T> {
    let mut acc = gauge_transform::<T>(GroupElement::E, v);
    for g in &GroupElement::ALL[1..] {
        acc = acc.add(&gauge_transform(*g, v)).expect("same sites");
    }
    acc.scaled(cr(T::one() / T::lit(6.0)))
}

/// `B(f)`: diagonal projector onto boundary configurations with trivial
/// oriented holonomy `h₃ h₂ h₁ = e`, where the label on edge `k` is
/// `h_k^{-o_f(e_k)}`.
pub fn face_projector<T: Real>() -> LocalOperator<T> {
    let reg = PlaquetteTopology::register();
    let n = reg.total_dim();
    let mut m = scalar::zeros(n, n);
    for idx in 0..n {
        let levels = reg.levels_of(idx);
        let mut holonomy = GroupElement::E;
        for (edge, o) in PlaquetteTopology::face_boundary() {
            let x = element(levels[edge.number() - 1]);
            // x = h^{-o}, so h = x^{-1} for o = +1 and h = x for o = -1
            let h = if o > 0 { x.inverse() } else { x };
            holonomy = h * holonomy;
        }
        if holonomy == GroupElement::E {
            m[[idx, idx]] = cr(T::one());
        }
    }
    LocalOperator::new(vec!["e1", "e2", "e3"], vec![EDGE_DIM; 3], m).expect("face projector shape")
}

fn diagonal_on_edge<T: Real, F>(edge: Edge, mut f: F) -> LocalOperator<T>
where
    F: FnMut(GroupElement) -> Complex<T>,
{
    let mut m = scalar::zeros(EDGE_DIM, EDGE_DIM);
    for g in GroupElement::ALL {
        m[[g.index(), g.index()]] = f(g);
    }
    LocalOperator::new(vec![edge.label()], vec![EDGE_DIM], m).expect("edge operator shape")
}

/// `W_R(e) = Σ_g χ_R(g)* |g⟩⟨g|`.
pub fn ribbon_operator<T: Real>(irrep: Irrep, edge: Edge) -> LocalOperator<T> {
    diagonal_on_edge(edge, |g| irrep.character::<T>(g).conj())
}

/// `W_R^h(e) = L_h W_R L_h†`, with diagonal entry `χ_R(h⁻¹x)*` at `|x⟩`.
pub fn shifted_ribbon_operator<T: Real>(irrep: Irrep, h: GroupElement, edge: Edge) -> LocalOperator<T> {
    diagonal_on_edge(edge, |x| irrep.character::<T>(h.inverse() * x).conj())
}

/// `D_M(e) = Σ_g tr{M R†(g)} |g⟩⟨g|`.
pub fn charge_operator<T: Real>(irrep: Irrep, m: &CMatrix<T>, edge: Edge) -> LocalOperator<T> {
    diagonal_on_edge(edge, |g| scalar::trace(&m.dot(&scalar::dagger(&irrep.matrix::<T>(g)))))
}

/// An electric charge pair `|M_R; (v, v')⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChargeSpec<T: Real> {
    irrep: Irrep,
    matrix: CMatrix<T>,
    pair: (Vertex, Vertex),
}

impl<T: Real> ChargeSpec<T> {
    /// Checks `Σ|M_ab|² = |R|` and that an edge runs from `pair.0` to `pair.1`.
    pub fn new(irrep: Irrep, matrix: CMatrix<T>, pair: (Vertex, Vertex)) -> Result<Self> {
        let d = irrep.dim();
        if matrix.dim() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, found: matrix.nrows() });
        }
        let total: T = matrix.iter().map(|z| z.norm_sqr()).sum();
        let expected = T::lit(d as f64);
        if (total - expected).abs() > T::tolerance() {
            return Err(Error::ChargeNormalization {
                expected: d as f64,
                found: total.to_f64().unwrap_or(f64::NAN),
            });
        }
        if PlaquetteTopology::oriented_edge(pair.0, pair.1).is_none() {
            return Err(Error::UnsupportedVertex {
                vertex: format!("({}, {})", pair.0, pair.1),
                configuration: "single plaquette".into(),
            });
        }
        Ok(ChargeSpec { irrep, matrix, pair })
    }

    /// The fluxless pair `M = 1`.
    pub fn identity(irrep: Irrep, pair: (Vertex, Vertex)) -> Result<Self> {
        Self::new(irrep, scalar::identity(irrep.dim()), pair)
    }

    pub fn irrep(&self) -> Irrep {
        self.irrep
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn pair(&self) -> (Vertex, Vertex) {
        self.pair
    }

    /// The edge joining the pair.
    pub fn edge(&self) -> Edge {
        PlaquetteTopology::oriented_edge(self.pair.0, self.pair.1).expect("validated on construction")
    }

    /// Same pair with `M` replaced.
    pub fn with_matrix(&self, matrix: CMatrix<T>) -> Result<Self> {
        Self::new(self.irrep, matrix, self.pair)
    }
}

/// `D_M(e)|GS⟩`, normalized by Schur orthogonality.
pub fn charge_pair_state<T: Real>(spec: &ChargeSpec<T>) -> StateVector<T> {
    let op = charge_operator(spec.irrep, &spec.matrix, spec.edge());
    let s = ground_state::<T>().apply_local(&op).expect("edge in register");
    // norm is 1 up to rounding; renormalizing resets the flag cleared by D_M
    s.normalize().expect("nonzero charge state")
}

fn default_pair() -> (Vertex, Vertex) {
    (Vertex::V1, Vertex::V3)
}

/// The three independent evaluations of the vacuum fusion amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FusionAmplitude<T: Real> {
    /// `tr{R(h)} / |R|`.
    pub trace_formula: Complex<T>,
    /// `1/6 tr{W_R† W_R^h}`.
    pub ground_state_trace: Complex<T>,
    /// `⟨1_R|T_h(v1)|1_R⟩` on the pair `(v1, v3)`.
    pub overlap: Complex<T>,
}

impl<T: Real> FusionAmplitude<T> {
    /// Largest pairwise disagreement between the three paths.
    pub fn spread(&self) -> T {
        let a = (self.trace_formula - self.ground_state_trace).norm();
        let b = (self.trace_formula - self.overlap).norm();
        let c = (self.ground_state_trace - self.overlap).norm();
        a.max(b).max(c)
    }
}

/// `F(R(h) → vac) = tr{R(h)}/|R|`.
pub fn fusion_amplitude<T: Real>(irrep: Irrep, h: GroupElement) -> Complex<T> {
    irrep.character::<T>(h) / T::lit(irrep.dim() as f64)
}

pub fn fusion_amplitude_paths<T: Real>(irrep: Irrep, h: GroupElement) -> FusionAmplitude<T> {
    let trace_formula = fusion_amplitude(irrep, h);

    let w = ribbon_operator::<T>(irrep, Edge::E2);
    let wh = shifted_ribbon_operator::<T>(irrep, h, Edge::E2);
    let ground_state_trace =
        scalar::trace(&scalar::dagger(w.matrix()).dot(wh.matrix())) / T::lit(EDGE_DIM as f64);

    let spec = ChargeSpec::identity(irrep, default_pair()).expect("identity is normalized");
    let one = charge_pair_state(&spec);
    let moved = one.apply_local(&gauge_transform(h, Vertex::V1)).expect("edges present");
    let overlap = one.inner(&moved).expect("same register");

    FusionAmplitude { trace_formula, ground_state_trace, overlap }
}

/// Measurement basis of the ancilla qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementBasis {
    X,
    Y,
}

impl FromStr for MeasurementBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(MeasurementBasis::X),
            "y" | "Y" => Ok(MeasurementBasis::Y),
            other => Err(Error::OutOfRange(format!("unknown basis `{other}`"))),
        }
    }
}

impl fmt::Display for MeasurementBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasurementBasis::X => "x",
            MeasurementBasis::Y => "y",
        })
    }
}

/// `|+_x⟩ = (|0⟩ + |1⟩)/√2`.
pub fn plus_state<T: Real>(label: &str) -> StateVector<T> {
    let h = T::FRAC_1_SQRT_2();
    StateVector::single(label, vec![cr(h), cr(h)]).expect("qubit")
}

/// Unitary rotating `|+_b⟩ → |0⟩` and `|-_b⟩ → |1⟩` for the chosen basis,
/// with `|±_y⟩ = (|0⟩ ± i|1⟩)/√2`.
pub fn basis_rotation<T: Real>(label: &str, basis: MeasurementBasis) -> LocalOperator<T> {
    let h = T::FRAC_1_SQRT_2();
    let m = match basis {
        MeasurementBasis::X => ndarray::array![[cr(h), cr(h)], [cr(h), cr(-h)]],
        MeasurementBasis::Y => ndarray::array![
            [cr(h), Complex::new(T::zero(), -h)],
            [cr(h), Complex::new(T::zero(), h)]
        ],
    };
    LocalOperator::new(vec![label], vec![2], m).expect("qubit rotation")
}

/// Outcome probabilities `(P(+), P(-))` of measuring `label` in `basis`.
pub fn measure_qubit<T: Real>(state: &StateVector<T>, label: &str, basis: MeasurementBasis) -> Result<(T, T)> {
    let rotated = state.apply_local(&basis_rotation(label, basis))?;
    let p = rotated.site_distribution(label)?;
    Ok((p[0], p[1]))
}

/// Ancilla-controlled `T_h(v)` on `|1_{R2}; (v1, v3)⟩ ⊗ |+_x⟩`, followed by
/// an ancilla measurement. Returns `(P(+), P(-))`.
pub fn controlled_gauge_experiment<T: Real>(h: GroupElement, v: Vertex, basis: MeasurementBasis) -> (T, T) {
    let spec = ChargeSpec::identity(Irrep::TwoDim, default_pair()).expect("identity is normalized");
    controlled_gauge_experiment_on(&spec, h, v, basis)
}

pub fn controlled_gauge_experiment_on<T: Real>(
    spec: &ChargeSpec<T>,
    h: GroupElement,
    v: Vertex,
    basis: MeasurementBasis,
) -> (T, T) {
    let state = charge_pair_state(spec)
        .tensor_with(&plus_state(ANCILLA))
        .expect("disjoint registers");
    let ct = gauge_transform::<T>(h, v).controlled(ANCILLA, 2, 1).expect("qubit control");
    let out = state.apply_local(&ct).expect("sites present");
    measure_qubit(&out, ANCILLA, basis).expect("normalized state")
}

/// `⟨W⟩` after an unconditional gauge transform, both ways.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WExpectation<T: Real> {
    /// `1/6 tr{W† W^{h⁻¹} W}`.
    pub trace_formula: T,
    /// `⟨1_R|T_h† W T_h|1_R⟩` evaluated on state vectors.
    pub state_vector: T,
}

/// `⟨R2(h)|W_{R2}(e2)|R2(h)⟩` with the gauge transform at `v1`.
pub fn w_expectation_after<T: Real>(h: GroupElement) -> WExpectation<T> {
    w_expectation_after_in(Irrep::TwoDim, h)
}

pub fn w_expectation_after_in<T: Real>(irrep: Irrep, h: GroupElement) -> WExpectation<T> {
    let w = ribbon_operator::<T>(irrep, Edge::E2);
    let w_inv = shifted_ribbon_operator::<T>(irrep, h.inverse(), Edge::E2);
    let prod = scalar::dagger(w.matrix()).dot(w_inv.matrix()).dot(w.matrix());
    let trace_formula = (scalar::trace(&prod) / T::lit(EDGE_DIM as f64)).re;

    let spec = ChargeSpec::identity(irrep, default_pair()).expect("identity is normalized");
    let moved = charge_pair_state(&spec)
        .apply_local(&gauge_transform(h, Vertex::V1))
        .expect("edges present");
    let state_vector = moved.inner(&moved.apply_local(&w).expect("edge present")).expect("same register").re;
    WExpectation { trace_formula, state_vector }
}

/// `Q = 1/|G| Σ_g R1(g) ⊗ R2(g) ⊗ R3(g)`, with row index `(a, c, e)` and
/// column index `(b, d, f)` in mixed radix, `R1` most significant.
pub fn q_projector<T: Real>(r1: RepRef, r2: RepRef, r3: RepRef) -> CMatrix<T> {
    let n = r1.dim() * r2.dim() * r3.dim();
    let mut q = scalar::zeros(n, n);
    for g in GroupElement::ALL {
        q = q + scalar::kron(&scalar::kron(&r1.matrix::<T>(g), &r2.matrix::<T>(g)), &r3.matrix::<T>(g));
    }
    q.mapv(|z| z / T::lit(6.0))
}

fn probe_matrix<T: Real>(irrep: Irrep, h: GroupElement, m: Option<&CMatrix<T>>) -> CMatrix<T> {
    let rh = irrep.matrix::<T>(h);
    match m {
        Some(m) => rh.dot(m),
        None => rh,
    }
}

/// `⟨N|W_{R'}|N⟩` for `N = R(h) M` (default `M = 1`), from Q-matrix entries:
///
/// ```text
/// Σ_{abcde} Q^{[R* R'* R]}_{(a,c,d),(b,c,e)} N_ab N_de*
/// ```
pub fn fusion_probe<T: Real>(r: Irrep, rprime: Irrep, h: GroupElement, m: Option<&CMatrix<T>>) -> Result<T> {
    let n = probe_matrix(r, h, m);
    ChargeSpec::new(r, n.clone(), default_pair())?;
    let q = q_projector::<T>(RepRef::conj(r), RepRef::conj(rprime), RepRef::plain(r));
    let (dr, dp) = (r.dim(), rprime.dim());
    let row = |a: usize, c: usize, d: usize| (a * dp + c) * dr + d;
    let mut acc = cr(T::zero());
    for a in 0..dr {
        for b in 0..dr {
            for cc in 0..dp {
                for d in 0..dr {
                    for e in 0..dr {
                        acc = acc + q[[row(a, cc, d), row(b, cc, e)]] * n[[a, b]] * n[[d, e]].conj();
                    }
                }
            }
        }
    }
    Ok(acc.re)
}

/// The same expectation evaluated directly on the charge-pair state vector.
pub fn fusion_probe_state_vector<T: Real>(
    r: Irrep,
    rprime: Irrep,
    h: GroupElement,
    m: Option<&CMatrix<T>>,
) -> Result<T> {
    let spec = ChargeSpec::new(r, probe_matrix(r, h, m), default_pair())?;
    let s = charge_pair_state(&spec);
    let w = ribbon_operator::<T>(rprime, spec.edge());
    Ok(s.inner(&s.apply_local(&w)?)?.re)
}

/// Normalized charge matrices supported on one or two matrix units, in a
/// fixed order: every `√|R| E_ab`, then every `√(|R|/2) (E_ab + i E_cd)`
/// for `(a,b) < (c,d)`.
pub fn matrix_unit_sweep<T: Real>(irrep: Irrep) -> Vec<CMatrix<T>> {
    let d = irrep.dim();
    let units: Vec<(usize, usize)> = (0..d).flat_map(|a| (0..d).map(move |b| (a, b))).collect();
    let mut out = Vec::new();
    let s1 = T::lit(d as f64).sqrt();
    for &(a, b) in &units {
        let mut m = scalar::zeros(d, d);
        m[[a, b]] = cr(s1);
        out.push(m);
    }
    let s2 = (T::lit(d as f64) / T::lit(2.0)).sqrt();
    for (i, &(a, b)) in units.iter().enumerate() {
        for &(cc, dd) in &units[i + 1..] {
            let mut m = scalar::zeros(d, d);
            m[[a, b]] = cr(s2);
            m[[cc, dd]] = Complex::new(T::zero(), s2);
            out.push(m);
        }
    }
    out
}

/// `⟨W_{R'}⟩` must vanish when `R* ⊗ R` does not contain `R'`.
pub fn probe_must_vanish(r: Irrep, rprime: Irrep) -> bool {
    group::fusion_multiplicity(RepRef::conj(r), RepRef::plain(r), RepRef::plain(rprime)) == 0
}

/// One computed value with its oracle, for machine-readable reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub operation: String,
    pub parameters: serde_json::Value,
    pub value_re: f64,
    pub value_im: f64,
    pub oracle_value: f64,
    pub abs_error: f64,
}

impl ExperimentRecord {
    pub fn new(operation: &str, parameters: serde_json::Value, value: Complex<f64>, oracle: f64) -> Self {
        ExperimentRecord {
            operation: operation.to_string(),
            parameters,
            value_re: value.re,
            value_im: value.im,
            oracle_value: oracle,
            abs_error: (value - Complex::new(oracle, 0.0)).norm(),
        }
    }
}
