//! Linear optics on sparse Fock states.
//!
//! Logical qudits are carried by one photon spread over `d` rails; the rails
//! of a site `1b` are named `1b0`, `1b1`, `1b2`. Beam splitters follow the
//! symmetric convention
//!
//! ```text
//! a† → i√R a† + √(1-R) b†,   b† → i√R b† + √(1-R) a†
//! ```
//!
//! and phase shifters send `|n⟩ → e^{inφ}|n⟩`. Post-selected CNOTs are
//! modelled either logically (exact CNOT on the one-photon-per-block
//! subspace, scaled by the square root of a success probability) or by a
//! user-supplied beam-splitter network.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::encoding::{self, ChargeConfiguration, ControlVariant, GateKind, GateSequence};
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::hilbert::{QuditRegister, StateVector};
use crate::plaquette::{self, MeasurementBasis};
use crate::scalar::{cr, phase, Real};

/// `θ = arcsin(10/√247)`.
pub fn theta<T: Real>() -> T {
    T::lit((10.0 / 247f64.sqrt()).asin())
}

/// `φ = arcsin((7+√3)/(2√26)) − π/4`.
pub fn phi<T: Real>() -> T {
    T::lit(((7.0 + 3f64.sqrt()) / (2.0 * 26f64.sqrt())).asin() - std::f64::consts::FRAC_PI_4)
}

/// Success probability quoted for the optimised three-qutrit preparation circuit.
pub const PREP_REFERENCE_SUCCESS: f64 = 9.0 / 55.0;

/// Success probability of one post-selected CNOT in the logical model.
pub const DEFAULT_CNOT_SUCCESS: f64 = 1.0 / 9.0;

/// Rails of `site`: `site0 … site{dim-1}`.
pub fn rail_labels(site: &str, dim: usize) -> Vec<String> {
    (0..dim).map(|k| format!("{site}{k}")).collect()
}

/// Ordered optical modes with photon-number caps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSet {
    labels: Vec<String>,
    max_per_mode: usize,
    max_total: usize,
}

impl ModeSet {
    pub fn new<S: Into<String>>(labels: Vec<S>, max_per_mode: usize, max_total: usize) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::DuplicateSite(l.clone()));
            }
        }
        if max_per_mode == 0 || max_total == 0 || max_per_mode > u8::MAX as usize {
            return Err(Error::OutOfRange("photon caps must lie in 1..=255".into()));
        }
        Ok(ModeSet { labels, max_per_mode, max_total })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn max_per_mode(&self) -> usize {
        self.max_per_mode
    }

    pub fn max_total(&self) -> usize {
        self.max_total
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels.iter().position(|l| l == label).ok_or_else(|| Error::UnknownSite(label.into()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    /// The same modes followed by `extra` (all with the same caps).
    pub fn extended(&self, extra: &[String]) -> Result<Self> {
        let mut labels = self.labels.clone();
        labels.extend(extra.iter().cloned());
        ModeSet::new(labels, self.max_per_mode, self.max_total)
    }

    fn check(&self, occ: &[u8]) -> Result<()> {
        if occ.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: occ.len() });
        }
        let mut total = 0;
        for (l, &n) in self.labels.iter().zip(occ) {
            let n = n as usize;
            if n > self.max_per_mode {
                return Err(Error::TruncationOverflow { mode: l.clone(), photons: n, cap: self.max_per_mode });
            }
            total += n;
        }
        if total > self.max_total {
            return Err(Error::TruncationOverflow { mode: "<total>".into(), photons: total, cap: self.max_total });
        }
        Ok(())
    }
}

/// Sparse superposition of occupation-number basis states.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector<T: Real> {
    modes: ModeSet,
    amplitudes: BTreeMap<Vec<u8>, Complex<T>>,
}

impl<T: Real> FockVector<T> {
    pub fn zero(modes: ModeSet) -> Self {
        FockVector { modes, amplitudes: BTreeMap::new() }
    }

    pub fn vacuum(modes: ModeSet) -> Self {
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(vec![0; modes.len()], cr(T::one()));
        FockVector { modes, amplitudes }
    }

    /// Sums the given terms; every occupation must respect the caps.
    pub fn from_terms<I>(modes: ModeSet, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u8>, Complex<T>)>,
    {
        let mut out = FockVector::zero(modes);
        for (occ, a) in terms {
            out.modes.check(&occ)?;
            let e = out.amplitudes.entry(occ).or_insert_with(|| cr(T::zero()));
            *e = *e + a;
        }
        Ok(out)
    }

    /// One basis state given as `(mode, photons)` pairs; other modes empty.
    pub fn basis(modes: ModeSet, occupied: &[(&str, u8)]) -> Result<Self> {
        let mut occ = vec![0u8; modes.len()];
        for (l, n) in occupied {
            occ[modes.position(l)?] += n;
        }
        FockVector::from_terms(modes, [(occ, cr(T::one()))])
    }

    pub fn modes(&self) -> &ModeSet {
        &self.modes
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u8>, &Complex<T>)> {
        self.amplitudes.iter()
    }

    pub fn amplitude(&self, occ: &[u8]) -> Complex<T> {
        self.amplitudes.get(occ).copied().unwrap_or_else(|| cr(T::zero()))
    }

    /// Number of stored basis states.
    pub fn support(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if n <= T::tolerance() {
            return Err(Error::Unnormalized);
        }
        Ok(self.scaled(cr(n.recip())))
    }

    pub fn scaled(&self, factor: Complex<T>) -> Self {
        FockVector {
            modes: self.modes.clone(),
            amplitudes: self.amplitudes.iter().map(|(k, a)| (k.clone(), a * factor)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.modes.labels != other.modes.labels {
            return Err(Error::RegisterMismatch);
        }
        let mut out = self.clone();
        for (k, a) in &other.amplitudes {
            let e = out.amplitudes.entry(k.clone()).or_insert_with(|| cr(T::zero()));
            *e = *e + a;
        }
        Ok(out)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        if self.modes.labels != other.modes.labels {
            return Err(Error::RegisterMismatch);
        }
        Ok(self
            .amplitudes
            .iter()
            .filter_map(|(k, a)| other.amplitudes.get(k).map(|b| a.conj() * b))
            .fold(cr(T::zero()), |acc, z| acc + z))
    }

    pub fn fidelity(&self, other: &Self) -> Result<T> {
        Ok(self.inner(other)?.norm_sqr() / (self.norm_sqr() * other.norm_sqr()))
    }

    /// Largest amplitude difference; infinite if the mode lists differ.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        if self.modes.labels != other.modes.labels {
            return T::infinity();
        }
        let keys: BTreeSet<&Vec<u8>> = self.amplitudes.keys().chain(other.amplitudes.keys()).collect();
        keys.into_iter()
            .map(|k| (self.amplitude(k) - other.amplitude(k)).norm())
            .fold(T::zero(), T::max)
    }

    /// Total photon numbers present in the support.
    pub fn photon_numbers(&self) -> BTreeSet<usize> {
        self.amplitudes.keys().map(|k| k.iter().map(|&n| n as usize).sum()).collect()
    }

    /// Drops terms with modulus at most `eps`.
    pub fn prune(&self, eps: T) -> Self {
        FockVector {
            modes: self.modes.clone(),
            amplitudes: self.amplitudes.iter().filter(|(_, a)| a.norm() > eps).map(|(k, a)| (k.clone(), *a)).collect(),
        }
    }

    /// Appends empty modes.
    pub fn extend_vacuum(&self, extra: &[String]) -> Result<Self> {
        let modes = self.modes.extended(extra)?;
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|(k, a)| {
                let mut k = k.clone();
                k.resize(modes.len(), 0);
                (k, *a)
            })
            .collect();
        Ok(FockVector { modes, amplitudes })
    }

    /// Product state over the concatenated modes; caps add.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut labels = self.modes.labels.clone();
        labels.extend(other.modes.labels.iter().cloned());
        let modes = ModeSet::new(
            labels,
            self.modes.max_per_mode.max(other.modes.max_per_mode),
            self.modes.max_total + other.modes.max_total,
        )?;
        let mut amplitudes = BTreeMap::new();
        for (ka, a) in &self.amplitudes {
            for (kb, b) in &other.amplitudes {
                let mut k = ka.clone();
                k.extend_from_slice(kb);
                amplitudes.insert(k, a * b);
            }
        }
        Ok(FockVector { modes, amplitudes })
    }

    /// Keeps only the terms for which `keep` holds.
    pub fn filter<F: Fn(&[u8]) -> bool>(&self, keep: F) -> Self {
        FockVector {
            modes: self.modes.clone(),
            amplitudes: self.amplitudes.iter().filter(|(k, _)| keep(k)).map(|(k, a)| (k.clone(), *a)).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
struct FockTerm<T: Real> {
    occupation: Vec<u8>,
    re: T,
    im: T,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
struct FockJson<T: Real> {
    modes: ModeSet,
    amplitudes: Vec<FockTerm<T>>,
}

impl<T: Real> Serialize for FockVector<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FockJson {
            modes: self.modes.clone(),
            amplitudes: self
                .amplitudes
                .iter()
                .map(|(k, a)| FockTerm { occupation: k.clone(), re: a.re, im: a.im })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for FockVector<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = FockJson::<T>::deserialize(d)?;
        let modes = ModeSet::new(raw.modes.labels, raw.modes.max_per_mode, raw.modes.max_total)
            .map_err(serde::de::Error::custom)?;
        FockVector::from_terms(modes, raw.amplitudes.into_iter().map(|t| (t.occupation, Complex::new(t.re, t.im))))
            .map_err(serde::de::Error::custom)
    }
}

/// A passive element, or a post-selected CNOT in the logical model.
#[derive(Clone, Debug, PartialEq)]
pub enum OpticalElement<T: Real> {
    BeamSplitter { modes: [String; 2], reflectivity: T },
    PhaseShift { mode: String, phase: T },
    /// Modes `[c0, c1, t0, t1]`: terms with more than one photon in either
    /// pair are discarded, `t0 ↔ t1` when `c1` is occupied, and every
    /// surviving term is scaled by `√success`.
    Cnot { modes: [String; 4], success: T },
}

impl<T: Real> OpticalElement<T> {
    pub fn beam_splitter(a: &str, b: &str, reflectivity: T) -> Self {
        OpticalElement::BeamSplitter { modes: [a.into(), b.into()], reflectivity }
    }

    pub fn phase_shift(mode: &str, phase: T) -> Self {
        OpticalElement::PhaseShift { mode: mode.into(), phase }
    }

    /// A mode crossing (`R = 0`).
    pub fn swap(a: &str, b: &str) -> Self {
        Self::beam_splitter(a, b, T::zero())
    }

    pub fn cnot(control: [&str; 2], target: [&str; 2], success: T) -> Self {
        OpticalElement::Cnot {
            modes: [control[0].into(), control[1].into(), target[0].into(), target[1].into()],
            success,
        }
    }

    pub fn modes(&self) -> Vec<&str> {
        match self {
            OpticalElement::BeamSplitter { modes, .. } => modes.iter().map(String::as_str).collect(),
            OpticalElement::PhaseShift { mode, .. } => vec![mode.as_str()],
            OpticalElement::Cnot { modes, .. } => modes.iter().map(String::as_str).collect(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            OpticalElement::BeamSplitter { .. } => "beam_splitter",
            OpticalElement::PhaseShift { .. } => "phase_shift",
            OpticalElement::Cnot { .. } => "cnot",
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let modes = self.modes();
        let distinct: HashSet<&str> = modes.iter().copied().collect();
        if distinct.len() != modes.len() {
            return Err("repeated mode".into());
        }
        match self {
            OpticalElement::BeamSplitter { reflectivity: r, .. } if !(*r >= T::zero() && *r <= T::one()) => {
                Err(format!("reflectivity {r} outside [0, 1]"))
            }
            OpticalElement::PhaseShift { phase, .. } if !phase.is_finite() => Err("non-finite phase".into()),
            OpticalElement::Cnot { success: p, .. } if !(*p > T::zero() && *p <= T::one()) => {
                Err(format!("success probability {p} outside (0, 1]"))
            }
            _ => Ok(()),
        }
    }

    /// Elements undoing this one. The logical CNOT is returned unchanged
    /// (it is an involution on the subspace it keeps, up to its scale).
    pub fn inverse(&self) -> Vec<Self> {
        match self {
            OpticalElement::BeamSplitter { modes, reflectivity } => vec![
                Self::phase_shift(&modes[1], T::PI()),
                Self::beam_splitter(&modes[0], &modes[1], *reflectivity),
                Self::phase_shift(&modes[0], T::PI()),
            ],
            OpticalElement::PhaseShift { mode, phase } => vec![Self::phase_shift(mode, -*phase)],
            OpticalElement::Cnot { .. } => vec![self.clone()],
        }
    }

    /// Single-photon mode matrix of a beam splitter or phase shifter (`u[out][in]`).
    pub fn mode_matrix(&self) -> Option<[[Complex<T>; 2]; 2]> {
        match self {
            OpticalElement::BeamSplitter { reflectivity, .. } => {
                let (a, b) = bs_coefficients(*reflectivity);
                Some([[a, b], [b, a]])
            }
            _ => None,
        }
    }
}

fn bs_coefficients<T: Real>(r: T) -> (Complex<T>, Complex<T>) {
    (Complex::new(T::zero(), r.sqrt()), cr((T::one() - r).sqrt()))
}

fn factorial<T: Real>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * T::lit(k as f64))
}

fn binomial<T: Real>(n: usize, k: usize) -> T {
    factorial::<T>(n) / (factorial::<T>(k) * factorial::<T>(n - k))
}

fn accumulate<T: Real>(map: &mut BTreeMap<Vec<u8>, Complex<T>>, k: Vec<u8>, a: Complex<T>) {
    let e = map.entry(k).or_insert_with(|| cr(T::zero()));
    *e = *e + a;
}

/// Applies one element. Output occupations above the caps raise
/// [`Error::TruncationOverflow`].
pub fn apply_element<T: Real>(elem: &OpticalElement<T>, state: &FockVector<T>) -> Result<FockVector<T>> {
    elem.validate().map_err(|reason| Error::InvalidElement { index: 0, reason })?;
    let modes = &state.modes;
    let mut out = BTreeMap::new();
    match elem {
        OpticalElement::BeamSplitter { modes: [a, b], reflectivity } => {
            let (ia, ib) = (modes.position(a)?, modes.position(b)?);
            let (alpha, beta) = bs_coefficients(*reflectivity);
            for (occ, amp) in &state.amplitudes {
                let (na, nb) = (occ[ia] as usize, occ[ib] as usize);
                let norm_in = (factorial::<T>(na) * factorial::<T>(nb)).sqrt();
                for j in 0..=na {
                    for k in 0..=nb {
                        let coef = alpha.powu(j as u32)
                            * beta.powu((na - j) as u32)
                            * beta.powu(k as u32)
                            * alpha.powu((nb - k) as u32)
                            * cr(binomial::<T>(na, j) * binomial::<T>(nb, k));
                        if coef.norm_sqr() == T::zero() {
                            continue;
                        }
                        let p = j + k;
                        let q = na + nb - p;
                        for (mode, n) in [(a, p), (b, q)] {
                            if n > modes.max_per_mode {
                                return Err(Error::TruncationOverflow {
                                    mode: mode.clone(),
                                    photons: n,
                                    cap: modes.max_per_mode,
                                });
                            }
                        }
                        let scale = (factorial::<T>(p) * factorial::<T>(q)).sqrt() / norm_in;
                        let mut k2 = occ.clone();
                        k2[ia] = p as u8;
                        k2[ib] = q as u8;
                        accumulate(&mut out, k2, amp * coef * cr(scale));
                    }
                }
            }
        }
        OpticalElement::PhaseShift { mode, phase: angle } => {
            let i = modes.position(mode)?;
            for (occ, amp) in &state.amplitudes {
                accumulate(&mut out, occ.clone(), amp * phase(T::lit(occ[i] as f64) * *angle));
            }
        }
        OpticalElement::Cnot { modes: m, success } => {
            let idx = [modes.position(&m[0])?, modes.position(&m[1])?, modes.position(&m[2])?, modes.position(&m[3])?];
            let scale = cr(success.sqrt());
            for (occ, amp) in &state.amplitudes {
                if occ[idx[0]] + occ[idx[1]] > 1 || occ[idx[2]] + occ[idx[3]] > 1 {
                    continue;
                }
                let mut k = occ.clone();
                if occ[idx[1]] == 1 {
                    k.swap(idx[2], idx[3]);
                }
                accumulate(&mut out, k, amp * scale);
            }
        }
    }
    out.retain(|_, a| a.norm_sqr() != T::zero());
    Ok(FockVector { modes: modes.clone(), amplitudes: out })
}

/// Named block of rails carrying one logical qudit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RailBlock {
    pub name: String,
    pub modes: Vec<String>,
}

impl RailBlock {
    pub fn new(name: &str, dim: usize) -> Self {
        RailBlock { name: name.into(), modes: rail_labels(name, dim) }
    }
}

/// Accepts an output occupation when each block holds exactly one photon and
/// every `vacuum` mode is empty. Modes in neither list are unconstrained.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostSelectionPattern {
    #[serde(default)]
    pub blocks: Vec<RailBlock>,
    #[serde(default)]
    pub vacuum: Vec<String>,
}

struct CompiledPattern {
    blocks: Vec<Vec<usize>>,
    vacuum: Vec<usize>,
    free: Vec<String>,
}

impl PostSelectionPattern {
    /// One block per site of `register`, plus empty `vacuum` modes.
    pub fn for_register(register: &QuditRegister, vacuum: &[String]) -> Self {
        PostSelectionPattern {
            blocks: register
                .labels()
                .iter()
                .zip(register.dims())
                .map(|(l, &d)| RailBlock::new(l, d))
                .collect(),
            vacuum: vacuum.to_vec(),
        }
    }

    fn compile(&self, modes: &ModeSet) -> Result<CompiledPattern> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| b.modes.iter().map(|m| modes.position(m)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let vacuum = self.vacuum.iter().map(|m| modes.position(m)).collect::<Result<Vec<_>>>()?;
        let covered: HashSet<usize> = blocks.iter().flatten().chain(&vacuum).copied().collect();
        let free = modes
            .labels()
            .iter()
            .enumerate()
            .filter(|(i, _)| !covered.contains(i))
            .map(|(_, l)| l.clone())
            .collect();
        Ok(CompiledPattern { blocks, vacuum, free })
    }

    pub fn accepts(&self, modes: &ModeSet, occ: &[u8]) -> Result<bool> {
        Ok(self.compile(modes)?.accepts(occ))
    }

    /// The logical register read out by this pattern.
    pub fn register(&self) -> Result<QuditRegister> {
        QuditRegister::new(
            self.blocks.iter().map(|b| b.modes.len()).collect(),
            self.blocks.iter().map(|b| b.name.clone()).collect(),
        )
    }
}

impl CompiledPattern {
    fn accepts(&self, occ: &[u8]) -> bool {
        self.vacuum.iter().all(|&i| occ[i] == 0)
            && self.blocks.iter().all(|b| b.iter().map(|&i| occ[i] as usize).sum::<usize>() == 1)
    }

    fn levels(&self, occ: &[u8]) -> Vec<usize> {
        self.blocks.iter().map(|b| b.iter().position(|&i| occ[i] == 1).expect("accepted")).collect()
    }
}

/// Result of conditioning on a pattern.
#[derive(Clone, Debug)]
pub struct PostSelected<T: Real> {
    /// Weight of the accepted terms (the input is assumed normalized).
    pub probability: T,
    /// Normalized conditional state; `None` if nothing was accepted.
    pub state: Option<FockVector<T>>,
}

pub fn postselect<T: Real>(state: &FockVector<T>, pattern: &PostSelectionPattern) -> Result<PostSelected<T>> {
    let c = pattern.compile(&state.modes)?;
    let kept = state.filter(|occ| c.accepts(occ));
    let probability = kept.norm_sqr();
    Ok(PostSelected { probability, state: kept.normalize().ok() })
}

/// Logical content of the accepted terms.
#[derive(Clone, Debug)]
pub struct LogicalOutcome<T: Real> {
    pub probability: T,
    pub state: Option<StateVector<T>>,
}

/// Post-selects and reads each block as a qudit level. Every mode must be
/// either in a block or required to be empty.
pub fn decode_postselected<T: Real>(state: &FockVector<T>, pattern: &PostSelectionPattern) -> Result<LogicalOutcome<T>> {
    let c = pattern.compile(&state.modes)?;
    if let Some(m) = c.free.first() {
        return Err(Error::OutOfRange(format!("mode `{m}` is not constrained by the post-selection pattern")));
    }
    let register = pattern.register()?;
    let mut amps = vec![cr(T::zero()); register.total_dim()];
    for (occ, a) in &state.amplitudes {
        if c.accepts(occ) {
            let i = register.index_of(&c.levels(occ));
            amps[i] = amps[i] + a;
        }
    }
    let raw = StateVector::new(register, amps)?;
    let probability = raw.norm_sqr();
    Ok(LogicalOutcome { probability, state: raw.normalize().ok() })
}

/// Writes each site of a normalized logical state as one photon over its
/// rails; `extra_vacuum` modes are appended empty.
pub fn encode_rails<T: Real>(state: &StateVector<T>, extra_vacuum: &[String]) -> Result<FockVector<T>> {
    if !state.is_normalized() {
        return Err(Error::Unnormalized);
    }
    let reg = state.register();
    let mut labels = Vec::new();
    let mut offsets = Vec::new();
    for (l, &d) in reg.labels().iter().zip(reg.dims()) {
        offsets.push(labels.len());
        labels.extend(rail_labels(l, d));
    }
    labels.extend(extra_vacuum.iter().cloned());
    let photons = reg.len().max(1);
    let modes = ModeSet::new(labels, photons, photons)?;
    let terms = state.amplitudes().iter().enumerate().filter(|(_, a)| a.norm_sqr() != T::zero()).map(|(idx, a)| {
        let mut occ = vec![0u8; modes.len()];
        for (site, lvl) in reg.levels_of(idx).into_iter().enumerate() {
            occ[offsets[site] + lvl] = 1;
        }
        (occ, *a)
    });
    let terms: Vec<_> = terms.collect();
    FockVector::from_terms(modes, terms)
}

/// Qubit amplitudes on rails `site0`, `site1`.
pub fn dualrail_encode<T: Real>(site: &str, amplitudes: [Complex<T>; 2]) -> Result<FockVector<T>> {
    encode_rails(&StateVector::single(site, amplitudes.to_vec())?, &[])
}

/// Qutrit amplitudes on rails `site0`, `site1`, `site2`.
pub fn trirail_encode<T: Real>(site: &str, amplitudes: [Complex<T>; 3]) -> Result<FockVector<T>> {
    encode_rails(&StateVector::single(site, amplitudes.to_vec())?, &[])
}

/// Level carried by one block occupation, `None` unless exactly one photon.
pub fn decode_block(occupation: &[u8]) -> Option<usize> {
    if occupation.iter().map(|&n| n as usize).sum::<usize>() != 1 {
        return None;
    }
    occupation.iter().position(|&n| n == 1)
}

/// Inverse of [`encode_rails`] for a register; invalid occupations count as
/// post-selection failure.
pub fn decode_rails<T: Real>(state: &FockVector<T>, register: &QuditRegister) -> Result<LogicalOutcome<T>> {
    let covered: HashSet<String> = register
        .labels()
        .iter()
        .zip(register.dims())
        .flat_map(|(l, &d)| rail_labels(l, d))
        .collect();
    let vacuum: Vec<String> = state.modes.labels().iter().filter(|l| !covered.contains(*l)).cloned().collect();
    decode_postselected(state, &PostSelectionPattern::for_register(register, &vacuum))
}

/// A numeric angle or a named constant: `theta`, `phi`, `pi`, `pi/2`,
/// `pi/3`, `pi/4`, each optionally prefixed by `-`.
pub fn named_angle(name: &str) -> Option<f64> {
    let (sign, body) = match name.trim().strip_prefix('-') {
        Some(rest) => (-1.0, rest.trim()),
        None => (1.0, name.trim()),
    };
    let pi = std::f64::consts::PI;
    let v = match body {
        "theta" => theta::<f64>(),
        "phi" => phi::<f64>(),
        "pi" => pi,
        "pi/2" => pi / 2.0,
        "pi/3" => pi / 3.0,
        "pi/4" => pi / 4.0,
        "0" => 0.0,
        _ => return None,
    };
    Some(sign * v)
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AngleJson {
    Value(f64),
    Named(String),
}

#[derive(Serialize, Deserialize)]
struct ElementJson {
    kind: String,
    modes: Vec<String>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    reflectivity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phase: Option<AngleJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    success: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct CircuitJson {
    modes: Vec<String>,
    elements: Vec<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    postselect: Option<PostSelectionPattern>,
}

fn element_from_json<T: Real>(v: serde_json::Value) -> std::result::Result<OpticalElement<T>, String> {
    let e: ElementJson = serde_json::from_value(v).map_err(|e| e.to_string())?;
    let want = |n: usize| {
        if e.modes.len() == n {
            Ok(())
        } else {
            Err(format!("{} expects {n} modes, got {}", e.kind, e.modes.len()))
        }
    };
    let elem = match e.kind.as_str() {
        "beam_splitter" => {
            want(2)?;
            let r = e.reflectivity.ok_or("beam_splitter needs `R`")?;
            OpticalElement::beam_splitter(&e.modes[0], &e.modes[1], T::lit(r))
        }
        "phase_shift" => {
            want(1)?;
            let p = match e.phase.ok_or("phase_shift needs `phase`")? {
                AngleJson::Value(x) => x,
                AngleJson::Named(s) => named_angle(&s).ok_or_else(|| format!("unknown angle `{s}`"))?,
            };
            OpticalElement::phase_shift(&e.modes[0], T::lit(p))
        }
        "cnot" => {
            want(4)?;
            let m = &e.modes;
            OpticalElement::cnot(
                [&m[0], &m[1]],
                [&m[2], &m[3]],
                T::lit(e.success.unwrap_or(DEFAULT_CNOT_SUCCESS)),
            )
        }
        other => return Err(format!("unknown element kind `{other}`")),
    };
    elem.validate()?;
    Ok(elem)
}

fn element_to_json<T: Real>(e: &OpticalElement<T>) -> ElementJson {
    let to = |x: T| x.to_f64().unwrap_or(f64::NAN);
    let modes = e.modes().into_iter().map(String::from).collect();
    match e {
        OpticalElement::BeamSplitter { reflectivity, .. } => ElementJson {
            kind: e.kind().into(),
            modes,
            reflectivity: Some(to(*reflectivity)),
            phase: None,
            success: None,
        },
        OpticalElement::PhaseShift { phase, .. } => ElementJson {
            kind: e.kind().into(),
            modes,
            reflectivity: None,
            phase: Some(AngleJson::Value(to(*phase))),
            success: None,
        },
        OpticalElement::Cnot { success, .. } => ElementJson {
            kind: e.kind().into(),
            modes,
            reflectivity: None,
            phase: None,
            success: Some(to(*success)),
        },
    }
}

/// Ordered list of elements over named modes, with an optional pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct OpticalCircuit<T: Real> {
    pub modes: Vec<String>,
    pub elements: Vec<OpticalElement<T>>,
    pub postselect: Option<PostSelectionPattern>,
}

impl<T: Real> OpticalCircuit<T> {
    pub fn new(modes: Vec<String>) -> Self {
        OpticalCircuit { modes, elements: Vec::new(), postselect: None }
    }

    pub fn push(&mut self, e: OpticalElement<T>) -> &mut Self {
        self.elements.push(e);
        self
    }

    /// Checks every element against the mode list.
    pub fn validate(&self) -> Result<()> {
        let known: HashSet<&str> = self.modes.iter().map(String::as_str).collect();
        if known.len() != self.modes.len() {
            return Err(Error::OutOfRange("duplicate mode in circuit".into()));
        }
        for (index, e) in self.elements.iter().enumerate() {
            e.validate().map_err(|reason| Error::InvalidElement { index, reason })?;
            if let Some(m) = e.modes().into_iter().find(|m| !known.contains(m)) {
                return Err(Error::InvalidElement { index, reason: format!("unknown mode `{m}`") });
            }
        }
        Ok(())
    }

    pub fn run(&self, state: &FockVector<T>) -> Result<FockVector<T>> {
        self.elements.iter().try_fold(state.clone(), |s, e| apply_element(e, &s))
    }

    /// Appends the inverse of every element in reverse order.
    pub fn inverse(&self) -> Self {
        OpticalCircuit {
            modes: self.modes.clone(),
            elements: self.elements.iter().rev().flat_map(|e| e.inverse()).collect(),
            postselect: self.postselect.clone(),
        }
    }

    pub fn count(&self, kind: &str) -> usize {
        self.elements.iter().filter(|e| e.kind() == kind).count()
    }

    /// Beam splitters, counting each logical CNOT as `per_cnot` of them and
    /// ignoring zero-reflectivity mode crossings.
    pub fn beam_splitter_count(&self, per_cnot: usize) -> usize {
        self.elements
            .iter()
            .map(|e| match e {
                OpticalElement::BeamSplitter { reflectivity, .. } if *reflectivity > T::zero() => 1,
                OpticalElement::Cnot { .. } => per_cnot,
                _ => 0,
            })
            .sum()
    }

    /// Parses the circuit JSON; a malformed element is reported by index.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: CircuitJson = serde_json::from_str(text)?;
        let elements = raw
            .elements
            .into_iter()
            .enumerate()
            .map(|(index, v)| element_from_json(v).map_err(|reason| Error::InvalidElement { index, reason }))
            .collect::<Result<Vec<_>>>()?;
        let c = OpticalCircuit { modes: raw.modes, elements, postselect: raw.postselect };
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        let raw = CircuitJson {
            modes: self.modes.clone(),
            elements: self
                .elements
                .iter()
                .map(|e| serde_json::to_value(element_to_json(e)).expect("plain data"))
                .collect(),
            postselect: self.postselect.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("plain data")
    }
}

/// A two-mode SPDC source truncated at `n_max` pairs.
#[derive(Clone, Debug)]
pub struct SpdcSource<T: Real> {
    pub state: FockVector<T>,
    /// Probability mass beyond `n_max`, `λ^{2(n_max+1)}`.
    pub deficit: T,
}

fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if !(lambda > T::zero() && lambda < T::one()) {
        return Err(Error::OutOfRange(format!("lambda = {lambda} must lie in (0, 1)")));
    }
    Ok(())
}

/// `√(1-λ²) Σ_{n ≤ n_max} λⁿ |n n⟩` on `(mode_a, mode_b)`.
pub fn spdc_state<T: Real>(lambda: T, n_max: usize, mode_a: &str, mode_b: &str) -> Result<SpdcSource<T>> {
    check_lambda(lambda)?;
    let modes = ModeSet::new(vec![mode_a, mode_b], n_max.max(1), (2 * n_max).max(1))?;
    let norm = (T::one() - lambda * lambda).sqrt();
    let terms = (0..=n_max).map(|n| (vec![n as u8, n as u8], cr(norm * lambda.powi(n as i32))));
    Ok(SpdcSource {
        state: FockVector::from_terms(modes, terms.collect::<Vec<_>>())?,
        deficit: lambda.powi(2 * (n_max as i32 + 1)),
    })
}

/// Three crystals, crystal `j` feeding rails `1b_j` and `3b_j`. Modes are
/// ordered `1b0, 1b1, 1b2, 3b0, 3b1, 3b2`.
pub fn three_crystal_state<T: Real>(lambda: T, n_max: usize) -> Result<SpdcSource<T>> {
    let sources = (0..3)
        .map(|j| spdc_state(lambda, n_max, &format!("1b{j}"), &format!("3b{j}")))
        .collect::<Result<Vec<_>>>()?;
    let product = sources[0].state.tensor(&sources[1].state)?.tensor(&sources[2].state)?;
    let order = ["1b0", "1b1", "1b2", "3b0", "3b1", "3b2"];
    let pos: Vec<usize> = order.iter().map(|l| product.modes.position(l)).collect::<Result<_>>()?;
    let modes = ModeSet::new(order.to_vec(), n_max.max(1), (6 * n_max).max(1))?;
    let terms: Vec<_> = product.terms().map(|(k, a)| (pos.iter().map(|&p| k[p]).collect(), *a)).collect();
    let d = sources[0].deficit;
    Ok(SpdcSource {
        state: FockVector::from_terms(modes, terms)?,
        deficit: T::one() - (T::one() - d).powi(3),
    })
}

/// `(|00⟩ + |11⟩ + |22⟩)/√3` on qutrits `1b`, `3b`.
pub fn qutrit_bell_state<T: Real>() -> StateVector<T> {
    let reg = QuditRegister::new(vec![3, 3], vec!["1b", "3b"]).expect("static");
    let s = T::one() / T::lit(3.0).sqrt();
    let mut amps = vec![cr(T::zero()); 9];
    for k in 0..3 {
        amps[4 * k] = cr(s);
    }
    StateVector::new(reg, amps).expect("dimension")
}

/// Heralding outcome of the three-crystal source.
#[derive(Clone, Debug)]
pub struct Heralding<T: Real> {
    /// Probability of one photon in the `1b` rails and one in the `3b` rails.
    pub probability: T,
    /// Truncated probability mass.
    pub deficit: T,
    pub state: Option<FockVector<T>>,
    /// Fidelity of the conditional state with the maximally entangled qutrit pair.
    pub fidelity: T,
}

pub fn three_crystal_postselect<T: Real>(lambda: T, n_max: usize) -> Result<Heralding<T>> {
    let src = three_crystal_state(lambda, n_max)?;
    let pattern = PostSelectionPattern { blocks: vec![RailBlock::new("1b", 3), RailBlock::new("3b", 3)], vacuum: vec![] };
    let out = decode_postselected(&src.state, &pattern)?;
    let sel = postselect(&src.state, &pattern)?;
    let fidelity = match &out.state {
        Some(s) => s.fidelity(&qutrit_bell_state())?,
        None => T::zero(),
    };
    Ok(Heralding { probability: out.probability, deficit: src.deficit, state: sel.state, fidelity })
}

/// `Σ_s u_s |s⟩_2b Σ_x |x⟩_1b |x−s⟩_3b / √3` with `u = (2, −1, −1)/√6`,
/// on the register `(1b, 2b, 3b)`.
pub fn prep_target_state<T: Real>() -> StateVector<T> {
    let reg = QuditRegister::new(vec![3, 3, 3], vec!["1b", "2b", "3b"]).expect("static");
    let u = [T::lit(2.0), -T::one(), -T::one()];
    let norm = T::one() / T::lit(18.0).sqrt();
    let mut amps = vec![cr(T::zero()); 27];
    for (s, &us) in u.iter().enumerate() {
        for x in 0..3 {
            amps[reg.index_of(&[x, s, (x + 3 - s) % 3])] = cr(us * norm);
        }
    }
    StateVector::new(reg, amps).expect("dimension")
}

/// `|0⟩_2b ⊗ (|00⟩+|11⟩+|22⟩)/√3` on rails of `(1b, 2b, 3b)`.
pub fn prep_input_state<T: Real>() -> FockVector<T> {
    let zero2 = StateVector::single("2b", vec![cr(T::one()), cr(T::zero()), cr(T::zero())]).expect("qutrit");
    let logical = qutrit_bell_state::<T>().tensor_with(&zero2).expect("disjoint");
    let logical = logical.permute_sites(&["1b", "2b", "3b"]).expect("sites");
    encode_rails(&logical, &[]).expect("normalized")
}

/// Two-level swaps (applied in order) realising the qutrit map `i → p[i]`.
pub fn perm3_swaps(p: [usize; 3]) -> Vec<[usize; 2]> {
    let fixed = (0..3).filter(|&i| p[i] == i).count();
    match fixed {
        3 => vec![],
        1 => {
            let i = (0..3).find(|&i| p[i] != i).expect("moved level");
            vec![[i, p[i]]]
        }
        _ => {
            let inv0 = (0..3).find(|&i| p[i] == 0).expect("permutation");
            vec![[0, p[0]], [0, inv0]]
        }
    }
}

/// A single-qutrit transformation on `2b` followed by a ternary
/// subtractor `|s⟩_2b|y⟩_3b → |s⟩|y − s⟩` from four two-level CNOTs.
pub fn synthesize_prep_circuit<T: Real>() -> OpticalCircuit<T> {
    synthesize_prep_circuit_with(T::lit(DEFAULT_CNOT_SUCCESS))
}

pub fn synthesize_prep_circuit_with<T: Real>(cnot_success: T) -> OpticalCircuit<T> {
    let mut modes = Vec::new();
    for s in ["1b", "2b", "3b"] {
        modes.extend(rail_labels(s, 3));
    }
    let mut c = OpticalCircuit::new(modes);
    let half_pi = T::FRAC_PI_2();
    c.push(OpticalElement::beam_splitter("2b0", "2b1", T::lit(2.0 / 3.0)))
        .push(OpticalElement::beam_splitter("2b1", "2b2", T::lit(0.5)))
        .push(OpticalElement::phase_shift("2b0", -half_pi))
        .push(OpticalElement::phase_shift("2b1", half_pi))
        .push(OpticalElement::phase_shift("2b2", T::PI()));
    // s = 1 shifts 3b by −1, s = 2 by −2 = +1
    for (ctrl, lvl_s) in [("2b1", 1usize), ("2b2", 2)] {
        let shift: [usize; 3] = std::array::from_fn(|y| (y + 3 - lvl_s) % 3);
        for [i, j] in perm3_swaps(shift) {
            c.push(OpticalElement::cnot(["2b0", ctrl], [&format!("3b{i}"), &format!("3b{j}")], cnot_success));
        }
    }
    c.postselect = Some(PostSelectionPattern {
        blocks: vec![RailBlock::new("1b", 3), RailBlock::new("2b", 3), RailBlock::new("3b", 3)],
        vacuum: vec![],
    });
    c
}

/// Conditional outcome of a preparation run.
#[derive(Clone, Debug)]
pub struct PrepOutcome<T: Real> {
    pub success_probability: T,
    pub state: Option<StateVector<T>>,
    /// Fidelity with [`prep_target_state`], when the pattern reads out
    /// `1b`, `2b`, `3b`.
    pub fidelity: Option<T>,
}

/// Runs `circuit` on `input` and reads out the pattern blocks. Modes of the
/// input not named by the pattern must end empty.
pub fn run_prep_circuit<T: Real>(
    circuit: &OpticalCircuit<T>,
    input: &FockVector<T>,
    pattern: &PostSelectionPattern,
) -> Result<PrepOutcome<T>> {
    circuit.validate()?;
    for m in &circuit.modes {
        if !input.modes.contains(m) {
            return Err(Error::UnknownSite(m.clone()));
        }
    }
    let out = circuit.run(input)?;
    let mut pattern = pattern.clone();
    let named: HashSet<String> = pattern.blocks.iter().flat_map(|b| b.modes.iter().cloned()).chain(pattern.vacuum.iter().cloned()).collect();
    pattern.vacuum.extend(input.modes.labels().iter().filter(|l| !named.contains(*l)).cloned());
    let logical = decode_postselected(&out, &pattern)?;
    let fidelity = match &logical.state {
        Some(s) => {
            let target = prep_target_state::<T>();
            let names: Vec<&str> = s.register().labels().iter().map(String::as_str).collect();
            match target.permute_sites(&names) {
                Ok(t) if t.register() == s.register() => Some(s.fidelity(&t)?),
                _ => None,
            }
        }
        None => None,
    };
    Ok(PrepOutcome { success_probability: logical.probability, state: logical.state, fidelity })
}

/// The synthesized circuit fed by three SPDC crystals and one photon in
/// `2b0`; the success probability includes the heralding.
pub fn run_prep_from_spdc<T: Real>(lambda: T, n_max: usize) -> Result<PrepOutcome<T>> {
    let src = three_crystal_state(lambda, n_max)?;
    let photon = FockVector::basis(ModeSet::new(rail_labels("2b", 3), 1, 1)?, &[("2b0", 1)])?;
    let joint = src.state.tensor(&photon)?;
    let circuit = synthesize_prep_circuit::<T>();
    run_prep_circuit(&circuit, &joint, circuit.postselect.as_ref().expect("pattern"))
}

/// A user-supplied beam-splitter network standing in for one post-selected
/// CNOT. Its local modes are `c0, c1` (control), `t0, t1` (target levels)
/// and optionally `s`, the unused third level of a tri-rail target;
/// elements on `s` are skipped for dual-rail targets. Every other mode is an
/// ancilla that starts and must end empty.
#[derive(Clone, Debug, PartialEq)]
pub struct PhotonicCnot<T: Real> {
    pub circuit: OpticalCircuit<T>,
}

const LOCAL_MODES: [&str; 5] = ["c0", "c1", "t0", "t1", "s"];

impl<T: Real> PhotonicCnot<T> {
    pub fn new(circuit: OpticalCircuit<T>) -> Result<Self> {
        circuit.validate()?;
        for m in &LOCAL_MODES[..4] {
            if !circuit.modes.iter().any(|x| x == m) {
                return Err(Error::UnknownSite((*m).into()));
            }
        }
        Ok(PhotonicCnot { circuit })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(OpticalCircuit::from_json(text)?)
    }

    pub fn ancilla_modes(&self) -> Vec<&str> {
        self.circuit.modes.iter().map(String::as_str).filter(|m| !LOCAL_MODES.contains(m)).collect()
    }
}

/// How post-selected CNOTs are realised.
#[derive(Clone, Debug, PartialEq)]
pub enum CnotModel<T: Real> {
    Logical { success: T },
    Photonic(PhotonicCnot<T>),
}

impl<T: Real> Default for CnotModel<T> {
    fn default() -> Self {
        CnotModel::Logical { success: T::lit(DEFAULT_CNOT_SUCCESS) }
    }
}

/// Elements of one CNOT placed on concrete modes, plus the fresh ancilla
/// modes it introduces.
#[derive(Clone, Debug, PartialEq)]
pub struct CnotFragment<T: Real> {
    pub elements: Vec<OpticalElement<T>>,
    pub extra_modes: Vec<String>,
}

/// Places a CNOT with control rails `control` (active on the second) and
/// target rails `target`. `tag` keeps ancilla names of different
/// instances apart.
pub fn postselected_cnot<T: Real>(
    control: [&str; 2],
    target: [&str; 2],
    spectator: Option<&str>,
    model: &CnotModel<T>,
    tag: &str,
) -> CnotFragment<T> {
    match model {
        CnotModel::Logical { success } => CnotFragment {
            elements: vec![OpticalElement::cnot(control, target, *success)],
            extra_modes: vec![],
        },
        CnotModel::Photonic(p) => {
            let rename = |m: &str| -> Option<String> {
                match m {
                    "c0" => Some(control[0].into()),
                    "c1" => Some(control[1].into()),
                    "t0" => Some(target[0].into()),
                    "t1" => Some(target[1].into()),
                    "s" => spectator.map(String::from),
                    other => Some(format!("{tag}.{other}")),
                }
            };
            let mut elements = Vec::new();
            for e in &p.circuit.elements {
                let mapped: Option<Vec<String>> = e.modes().into_iter().map(rename).collect();
                let Some(m) = mapped else { continue };
                elements.push(match e {
                    OpticalElement::BeamSplitter { reflectivity, .. } => {
                        OpticalElement::beam_splitter(&m[0], &m[1], *reflectivity)
                    }
                    OpticalElement::PhaseShift { phase, .. } => OpticalElement::phase_shift(&m[0], *phase),
                    OpticalElement::Cnot { success, .. } => {
                        OpticalElement::cnot([&m[0], &m[1]], [&m[2], &m[3]], *success)
                    }
                });
            }
            CnotFragment { elements, extra_modes: p.ancilla_modes().iter().map(|m| format!("{tag}.{m}")).collect() }
        }
    }
}

/// Post-selected action of `model` on one control qubit and a target of
/// dimension 2 or 3 (levels 0 and 1 exchanged): `(matrix, success)` with
/// `matrix[out][in]` over `(control, target)` levels.
pub fn cnot_transfer_matrix<T: Real>(model: &CnotModel<T>, target_dim: usize) -> Result<(crate::scalar::CMatrix<T>, T)> {
    let reg = QuditRegister::new(vec![2, target_dim], vec!["c", "t"])?;
    let spectator = (target_dim == 3).then_some("t2");
    let frag = postselected_cnot(["c0", "c1"], ["t0", "t1"], spectator, model, "g");
    let n = reg.total_dim();
    let mut m = crate::scalar::zeros(n, n);
    let mut success = T::zero();
    for idx in 0..n {
        let input = StateVector::basis(reg.clone(), &reg.levels_of(idx))?;
        let fock = encode_rails(&input, &frag.extra_modes)?;
        let out = frag.elements.iter().try_fold(fock, |s, e| apply_element(e, &s))?;
        let pattern = PostSelectionPattern::for_register(&reg, &frag.extra_modes);
        let c = pattern.compile(out.modes())?;
        for (occ, a) in &out.amplitudes {
            if c.accepts(occ) {
                let r = reg.index_of(&c.levels(occ));
                m[[r, idx]] = m[[r, idx]] + a;
            }
        }
    }
    for idx in 0..n {
        success = success + m.column(idx).iter().map(|z| z.norm_sqr()).sum::<T>();
    }
    Ok((m, success / T::lit(n as f64)))
}

/// Incrementally built rail-level experiment.
struct RailProgram<'a, T: Real> {
    register: QuditRegister,
    model: &'a CnotModel<T>,
    elements: Vec<OpticalElement<T>>,
    extra_modes: Vec<String>,
    cnots: usize,
}

impl<'a, T: Real> RailProgram<'a, T> {
    fn new(register: QuditRegister, model: &'a CnotModel<T>) -> Self {
        RailProgram { register, model, elements: Vec::new(), extra_modes: Vec::new(), cnots: 0 }
    }

    fn rail(&self, site: &str, level: usize) -> String {
        format!("{site}{level}")
    }

    fn swap_levels(&mut self, site: &str, [i, j]: [usize; 2]) {
        self.elements.push(OpticalElement::swap(&self.rail(site, i), &self.rail(site, j)));
    }

    fn cnot(&mut self, control: &str, value: usize, target: &str, [i, j]: [usize; 2]) -> Result<()> {
        let (c0, c1) = (self.rail(control, 0), self.rail(control, 1));
        let ctrl = if value == 1 { [c0.as_str(), c1.as_str()] } else { [c1.as_str(), c0.as_str()] };
        let (t0, t1) = (self.rail(target, i), self.rail(target, j));
        let dim = self.register.dim_of(target)?;
        let spectator = (dim == 3).then(|| self.rail(target, 3 - i - j));
        let tag = format!("cnot{}", self.cnots);
        let frag = postselected_cnot(ctrl, [&t0, &t1], spectator.as_deref(), self.model, &tag);
        self.elements.extend(frag.elements);
        self.extra_modes.extend(frag.extra_modes);
        self.cnots += 1;
        Ok(())
    }

    /// Compiles encoded gates: uncontrolled level maps become mode
    /// crossings; every controlled one becomes post-selected CNOTs.
    fn gates(&mut self, seq: &GateSequence) -> Result<()> {
        for g in &seq.gates {
            let target_dim = |site: &str| self.register.dim_of(site);
            let swaps: Vec<[usize; 2]> = match g.gate {
                GateKind::Perm3 => {
                    let p = g.params.perm.ok_or_else(|| Error::InvalidGate("missing perm".into()))?;
                    perm3_swaps(p)
                }
                GateKind::Swap2 | GateKind::Cnot2lvl => {
                    vec![g.params.levels.ok_or_else(|| Error::InvalidGate("missing levels".into()))?]
                }
                GateKind::Not => vec![[0, 1]],
            };
            let value = g.params.control_value.unwrap_or(1);
            let (control, target) = match g.gate {
                GateKind::Cnot2lvl => (g.sites.first().cloned(), g.sites.get(1).cloned().unwrap_or_default()),
                _ => (g.control.clone(), g.sites.first().cloned().unwrap_or_default()),
            };
            target_dim(&target)?;
            for lv in swaps {
                match &control {
                    Some(c) => self.cnot(c, value, &target, lv)?,
                    None => self.swap_levels(&target, lv),
                }
            }
        }
        Ok(())
    }

    /// Rotates `site` so that rail 0 holds the `+` outcome.
    fn measure(&mut self, site: &str, basis: MeasurementBasis) {
        let (r0, r1) = (self.rail(site, 0), self.rail(site, 1));
        if basis == MeasurementBasis::X {
            self.elements.push(OpticalElement::phase_shift(&r1, T::FRAC_PI_2()));
        }
        self.elements.push(OpticalElement::beam_splitter(&r0, &r1, T::lit(0.5)));
    }

    fn run(&self, initial: &StateVector<T>) -> Result<PhotonicRun<T>> {
        let fock = encode_rails(initial, &self.extra_modes)?;
        let out = self.elements.iter().try_fold(fock, |s, e| apply_element(e, &s))?;
        let pattern = PostSelectionPattern::for_register(&self.register, &self.extra_modes);
        let logical = decode_postselected(&out, &pattern)?;
        Ok(PhotonicRun {
            success_probability: logical.probability,
            state: logical.state,
            cnot_count: self.cnots,
            support: out.support(),
        })
    }
}

/// Post-selected outcome of a compiled encoded experiment.
#[derive(Clone, Debug)]
pub struct PhotonicRun<T: Real> {
    pub success_probability: T,
    /// Logical state after the measurement rotations.
    pub state: Option<StateVector<T>>,
    pub cnot_count: usize,
    /// Number of Fock basis states in the final output.
    pub support: usize,
}

/// Encodes `initial` on rails, compiles `seq`, rotates the listed qubits to
/// their measurement basis and post-selects one photon per block.
pub fn run_photonic_sequence<T: Real>(
    initial: &StateVector<T>,
    seq: &GateSequence,
    model: &CnotModel<T>,
    measure: &[(&str, MeasurementBasis)],
) -> Result<PhotonicRun<T>> {
    let mut prog = RailProgram::new(initial.register().clone(), model);
    prog.gates(seq)?;
    for (site, basis) in measure {
        prog.measure(site, *basis);
    }
    prog.run(initial)
}

/// Conditional ancilla statistics of the controlled-`T_{t_i}` circuit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ControlledTtResult<T: Real> {
    pub p_plus: T,
    pub p_minus: T,
    pub success_probability: T,
    pub cnot_count: usize,
}

pub fn run_controlled_tt_photonic<T: Real>(i: usize, model: &CnotModel<T>, include_step6: bool) -> Result<ControlledTtResult<T>> {
    let config = ChargeConfiguration::V1V3;
    let initial = encoding::build_initial_encoded_state::<T>(config)
        .tensor_with(&plaquette::plus_state(encoding::ANCILLA))?;
    let seq = encoding::controlled_tt_sequence(config, i, include_step6)?;
    let run = run_photonic_sequence(&initial, &seq, model, &[(encoding::ANCILLA, MeasurementBasis::X)])?;
    let s = run.state.ok_or(Error::Unnormalized)?;
    let p = s.site_distribution(encoding::ANCILLA)?;
    Ok(ControlledTtResult { p_plus: p[0], p_minus: p[1], success_probability: run.success_probability, cnot_count: run.cnot_count })
}

/// `⟨X^{⊗n}⟩` on the ancillas of the entangled-control chain, with the
/// success probability.
pub fn run_entangled_control_photonic<T: Real>(
    config: ChargeConfiguration,
    g: GroupElement,
    variant: ControlVariant,
    model: &CnotModel<T>,
) -> Result<(T, T)> {
    let anc = variant.ancillas();
    let initial = encoding::build_initial_encoded_state::<T>(config).tensor_with(&encoding::ghz_state(&anc)?)?;
    let seq = encoding::entangled_control_sequence(config, g, variant)?;
    let measure: Vec<_> = anc.iter().map(|a| (*a, MeasurementBasis::X)).collect();
    let run = run_photonic_sequence(&initial, &seq, model, &measure)?;
    let s = run.state.ok_or(Error::Unnormalized)?;
    let p = s.joint_distribution(&anc)?;
    let parity = p
        .iter()
        .enumerate()
        .map(|(i, &pi)| if i.count_ones() % 2 == 0 { pi } else { -pi })
        .sum();
    Ok((parity, run.success_probability))
}

/// Ancilla-controlled encoded `T_h` on the photonic layer; `(P(+), P(-), success)`.
pub fn photonic_controlled_experiment<T: Real>(
    config: ChargeConfiguration,
    h: GroupElement,
    basis: MeasurementBasis,
    model: &CnotModel<T>,
) -> Result<(T, T, T)> {
    let initial = encoding::build_initial_encoded_state::<T>(config)
        .tensor_with(&plaquette::plus_state(encoding::ANCILLA))?;
    let seq = encoding::encoded_t_in(config, h, config.operation_vertex(), true)?;
    let run = run_photonic_sequence(&initial, &seq, model, &[(encoding::ANCILLA, basis)])?;
    let s = run.state.ok_or(Error::Unnormalized)?;
    let p = s.site_distribution(encoding::ANCILLA)?;
    Ok((p[0], p[1], run.success_probability))
}

/// Block-level view of one post-selected gate for photon bookkeeping.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockGate {
    pub control: String,
    pub target: String,
}

impl BlockGate {
    pub fn new(control: &str, target: &str) -> Self {
        BlockGate { control: control.into(), target: target.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferEvent {
    None,
    ControlToTarget,
    TargetToControl,
}

/// One assignment of events to the gates of a chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TransferPath {
    pub events: Vec<TransferEvent>,
    pub transfers: usize,
}

/// Event sequences that move photons between blocks yet leave every block
/// with exactly one photon, so per-block counting cannot see them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TransferAnalysis {
    pub undetected: Vec<TransferPath>,
}

impl TransferAnalysis {
    pub fn is_safe(&self) -> bool {
        self.undetected.is_empty()
    }

    /// Fewest transfers among the undetected paths.
    pub fn min_transfers(&self) -> Option<usize> {
        self.undetected.iter().map(|p| p.transfers).min()
    }
}

/// Enumerates, for every gate, no transfer or one photon moved between its
/// two blocks (the source must hold a photon at that point).
pub fn photon_transfer_analysis(chain: &[BlockGate], input: &BTreeMap<String, usize>) -> Result<TransferAnalysis> {
    let names: Vec<&String> = input.keys().collect();
    let index = |b: &str| {
        names.iter().position(|n| n.as_str() == b).ok_or_else(|| Error::UnknownSite(b.into()))
    };
    let gates = chain.iter().map(|g| Ok((index(&g.control)?, index(&g.target)?))).collect::<Result<Vec<_>>>()?;
    let start: Vec<usize> = input.values().copied().collect();
    let mut undetected = Vec::new();
    let mut events = Vec::with_capacity(gates.len());
    fn walk(
        gates: &[(usize, usize)],
        counts: &mut Vec<usize>,
        events: &mut Vec<TransferEvent>,
        out: &mut Vec<TransferPath>,
    ) {
        let k = events.len();
        if k == gates.len() {
            let transfers = events.iter().filter(|e| **e != TransferEvent::None).count();
            if transfers > 0 && counts.iter().all(|&n| n == 1) {
                out.push(TransferPath { events: events.clone(), transfers });
            }
            return;
        }
        let (c, t) = gates[k];
        for ev in [TransferEvent::None, TransferEvent::ControlToTarget, TransferEvent::TargetToControl] {
            let (from, to) = match ev {
                TransferEvent::None => {
                    events.push(ev);
                    walk(gates, counts, events, out);
                    events.pop();
                    continue;
                }
                TransferEvent::ControlToTarget => (c, t),
                TransferEvent::TargetToControl => (t, c),
            };
            if counts[from] == 0 {
                continue;
            }
            counts[from] -= 1;
            counts[to] += 1;
            events.push(ev);
            walk(gates, counts, events, out);
            events.pop();
            counts[to] -= 1;
            counts[from] += 1;
        }
    }
    walk(&gates, &mut start.clone(), &mut events, &mut undetected);
    Ok(TransferAnalysis { undetected })
}

/// Block-level chain of the entangled-control scheme, one gate per
/// controlled permutation.
pub fn entangled_control_chain(variant: ControlVariant) -> Vec<BlockGate> {
    match variant {
        ControlVariant::TwoAncilla => vec![
            BlockGate::new("anc5", "1b"),
            BlockGate::new("anc4", "2b"),
            BlockGate::new("anc4", "1b"),
            BlockGate::new("anc5", "2b"),
        ],
        ControlVariant::FourAncilla => vec![
            BlockGate::new("anc4", "1b"),
            BlockGate::new("anc5", "2b"),
            BlockGate::new("anc6", "1b"),
            BlockGate::new("anc7", "2b"),
        ],
    }
}

/// One control qubit reused for both qutrits.
pub fn reused_control_chain() -> Vec<BlockGate> {
    vec![BlockGate::new("anc5", "1b"), BlockGate::new("anc5", "2b")]
}

/// One entry per post-selected CNOT that [`run_photonic_sequence`] would
/// place for `seq`; uncontrolled gates are mode crossings and do not appear.
pub fn cnot_block_chain(seq: &GateSequence) -> Result<Vec<BlockGate>> {
    let mut out = Vec::new();
    for g in &seq.gates {
        let (control, target) = match g.gate {
            GateKind::Cnot2lvl => (g.sites.first(), g.sites.get(1)),
            _ => (g.control.as_ref(), g.sites.first()),
        };
        let (Some(c), Some(t)) = (control, target) else { continue };
        let n = match g.gate {
            GateKind::Perm3 => perm3_swaps(g.params.perm.ok_or_else(|| Error::InvalidGate("missing perm".into()))?).len(),
            _ => 1,
        };
        out.extend(std::iter::repeat_with(|| BlockGate::new(c, t)).take(n));
    }
    Ok(out)
}

/// One photon in every block named by `chain`.
pub fn correct_photon_numbers(chain: &[BlockGate]) -> BTreeMap<String, usize> {
    chain.iter().flat_map(|g| [g.control.clone(), g.target.clone()]).map(|b| (b, 1)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn two_modes(cap: usize) -> ModeSet {
        ModeSet::new(vec!["a", "b"], cap, cap).unwrap()
    }

    #[test]
    fn beam_splitter_single_photon() {
        let s = FockVector::<f64>::basis(two_modes(1), &[("a", 1)]).unwrap();
        let out = apply_element(&OpticalElement::beam_splitter("a", "b", 0.5), &s).unwrap();
        let h = 0.5f64.sqrt();
        assert!((out.amplitude(&[1, 0]) - c(0.0, h)).norm() < 1e-15);
        assert!((out.amplitude(&[0, 1]) - c(h, 0.0)).norm() < 1e-15);
        let swapped = apply_element(&OpticalElement::swap("a", "b"), &s).unwrap();
        assert_eq!(swapped.amplitude(&[0, 1]), c(1.0, 0.0));
        assert_eq!(swapped.support(), 1);
    }

    #[test]
    fn hong_ou_mandel_dip() {
        let s = FockVector::<f64>::basis(two_modes(2), &[("a", 1), ("b", 1)]).unwrap();
        let out = apply_element(&OpticalElement::beam_splitter("a", "b", 0.5), &s).unwrap();
        assert!(out.amplitude(&[1, 1]).norm() < 1e-15);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_photon_amplitudes_match_permanents() {
        // oracle: |1,1⟩ → per(U) |1,1⟩ + √2 U_aa U_ba |2,0⟩ + ...
        let r = 0.3f64;
        let e = OpticalElement::beam_splitter("a", "b", r);
        let [[uaa, uab], [uba, ubb]] = e.mode_matrix().unwrap();
        let s = FockVector::<f64>::basis(two_modes(2), &[("a", 1), ("b", 1)]).unwrap();
        let out = apply_element(&e, &s).unwrap();
        assert!((out.amplitude(&[1, 1]) - (uaa * ubb + uab * uba)).norm() < 1e-14);
        assert!((out.amplitude(&[2, 0]) - uaa * uab * 2f64.sqrt()).norm() < 1e-14);
        assert!((out.amplitude(&[0, 2]) - uba * ubb * 2f64.sqrt()).norm() < 1e-14);
    }

    #[test]
    fn phase_and_inverse() {
        let s = FockVector::<f64>::basis(two_modes(1), &[("a", 1)]).unwrap();
        let out = apply_element(&OpticalElement::phase_shift("a", std::f64::consts::PI), &s).unwrap();
        assert!((out.amplitude(&[1, 0]) + c(1.0, 0.0)).norm() < 1e-15);

        let s = FockVector::<f64>::from_terms(two_modes(3), [(vec![2, 1], c(0.6, 0.0)), (vec![0, 3], c(0.0, 0.8))]).unwrap();
        let bs = OpticalElement::beam_splitter("a", "b", 0.37);
        let fwd = apply_element(&bs, &s).unwrap();
        let back = bs.inverse().iter().try_fold(fwd, |x, e| apply_element(e, &x)).unwrap();
        assert!(back.max_abs_diff(&s) < 1e-12);
    }

    #[test]
    fn truncation_overflow_is_reported() {
        let s = FockVector::<f64>::from_terms(ModeSet::new(vec!["a", "b"], 1, 2).unwrap(), [(vec![1, 1], c(1.0, 0.0))]).unwrap();
        let err = apply_element(&OpticalElement::beam_splitter("a", "b", 0.5), &s).unwrap_err();
        assert!(matches!(err, Error::TruncationOverflow { .. }));
        assert!(FockVector::<f64>::basis(two_modes(1), &[("a", 2)]).is_err());
    }

    #[test]
    fn logical_cnot_truth_table() {
        let modes = ModeSet::new(vec!["c0", "c1", "t0", "t1"], 2, 4).unwrap();
        let g = OpticalElement::cnot(["c0", "c1"], ["t0", "t1"], 1.0);
        let s = FockVector::<f64>::basis(modes.clone(), &[("c1", 1), ("t0", 1)]).unwrap();
        let out = apply_element(&g, &s).unwrap();
        assert_eq!(out.amplitude(&[0, 1, 0, 1]), c(1.0, 0.0));
        let s = FockVector::<f64>::basis(modes.clone(), &[("c0", 1), ("t1", 1)]).unwrap();
        assert_eq!(apply_element(&g, &s).unwrap().amplitude(&[1, 0, 0, 1]), c(1.0, 0.0));
        let s = FockVector::<f64>::basis(modes, &[("c1", 2), ("t0", 1)]).unwrap();
        assert_eq!(apply_element(&g, &s).unwrap().support(), 0);
    }

    #[test]
    fn codecs() {
        let f = trirail_encode::<f64>("q", [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(f.amplitude(&[0, 0, 1]), c(1.0, 0.0));
        let h = 0.5f64.sqrt();
        let f = dualrail_encode::<f64>("q", [c(h, 0.0), c(h, 0.0)]).unwrap();
        assert_eq!(f.amplitude(&[1, 0]), c(h, 0.0));
        assert_eq!(f.amplitude(&[0, 1]), c(h, 0.0));
        assert_eq!(decode_block(&[1, 1, 0]), None);
        assert_eq!(decode_block(&[0, 1, 0]), Some(1));

        let reg = QuditRegister::new(vec![2, 3], vec!["x", "y"]).unwrap();
        let logical = StateVector::new(reg.clone(), (0..6).map(|k| c(k as f64, 0.5)).collect()).unwrap().normalize().unwrap();
        let back = decode_rails(&encode_rails(&logical, &[]).unwrap(), &reg).unwrap();
        assert!((back.probability - 1.0).abs() < 1e-12);
        assert!(back.state.unwrap().max_abs_diff(&logical) < 1e-12);
    }

    #[test]
    fn spdc_amplitudes() {
        let s = spdc_state(0.1f64, 3, "a", "b").unwrap();
        assert!((s.state.amplitude(&[0, 0]).re - 0.99f64.sqrt()).abs() < 1e-15);
        assert!((s.state.amplitude(&[1, 1]).re - 0.99f64.sqrt() * 0.1).abs() < 1e-15);
        assert_eq!(s.state.amplitude(&[1, 0]), c(0.0, 0.0));
        assert!((s.deficit - 1e-8).abs() < 1e-20);
        assert!(spdc_state(1.0f64, 3, "a", "b").is_err());
    }

    #[test]
    fn heralded_pair_is_maximally_entangled() {
        let h = three_crystal_postselect(0.1f64, 3).unwrap();
        assert!((h.fidelity - 1.0).abs() < 1e-12);
        // each single-pair branch carries λ²(1-λ²)³
        let branch = 0.01 * 0.99f64.powi(3);
        assert!((h.probability - 3.0 * branch).abs() < 1e-15);
        assert!(h.deficit < 1e-6);
    }

    #[test]
    fn prep_circuit_reaches_target() {
        let circuit = synthesize_prep_circuit::<f64>();
        let out = run_prep_circuit(&circuit, &prep_input_state(), circuit.postselect.as_ref().unwrap()).unwrap();
        assert!((out.fidelity.unwrap() - 1.0).abs() < 1e-12);
        assert!((out.success_probability - (1.0f64 / 9.0).powi(4)).abs() < 1e-15);
        assert_eq!(circuit.count("cnot"), 4);
        assert_eq!(circuit.beam_splitter_count(5), 22);
    }

    #[test]
    fn identity_circuit_passes_logical_content() {
        let circuit = OpticalCircuit::<f64>::new(vec![]);
        let pattern = synthesize_prep_circuit::<f64>().postselect.unwrap();
        let out = run_prep_circuit(&circuit, &prep_input_state(), &pattern).unwrap();
        let want = qutrit_bell_state::<f64>()
            .tensor_with(&StateVector::single("2b", vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap())
            .unwrap()
            .permute_sites(&["1b", "2b", "3b"])
            .unwrap();
        assert!((out.success_probability - 1.0).abs() < 1e-12);
        assert!(out.state.unwrap().max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn prep_from_spdc() {
        let out = run_prep_from_spdc(0.1f64, 3).unwrap();
        assert!((out.fidelity.unwrap() - 1.0).abs() < 1e-12);
        let herald = 3.0 * 0.01 * 0.99f64.powi(3);
        assert!((out.success_probability - herald * (1.0f64 / 9.0).powi(4)).abs() < 1e-15);
    }

    #[test]
    fn perm3_swap_decomposition() {
        for p in [[0, 1, 2], [1, 0, 2], [0, 2, 1], [2, 1, 0], [2, 0, 1], [1, 2, 0]] {
            let mut lv = [0usize, 1, 2];
            for [i, j] in perm3_swaps(p) {
                for l in lv.iter_mut() {
                    if *l == i {
                        *l = j;
                    } else if *l == j {
                        *l = i;
                    }
                }
            }
            assert_eq!(lv, p);
        }
    }

    #[test]
    fn circuit_json_roundtrip_and_errors() {
        let circuit = synthesize_prep_circuit::<f64>();
        let back = OpticalCircuit::<f64>::from_json(&circuit.to_json()).unwrap();
        assert_eq!(back, circuit);

        let text = r#"{"modes": ["a", "b"], "elements": [
            {"kind": "phase_shift", "modes": ["a"], "phase": "-theta"},
            {"kind": "beam_splitter", "modes": ["a", "b"], "R": 1.5}]}"#;
        assert!(matches!(OpticalCircuit::<f64>::from_json(text), Err(Error::InvalidElement { index: 1, .. })));
        let text = r#"{"modes": ["a"], "elements": [{"kind": "phase_shift", "modes": ["z"], "phase": "pi"}]}"#;
        assert!(matches!(OpticalCircuit::<f64>::from_json(text), Err(Error::InvalidElement { index: 0, .. })));
        let text = r#"{"modes": ["a"], "elements": [{"kind": "phase_shift", "modes": ["a"], "phase": "phi"}]}"#;
        let ok = OpticalCircuit::<f64>::from_json(text).unwrap();
        assert_eq!(ok.elements[0], OpticalElement::phase_shift("a", phi::<f64>()));
    }

    #[test]
    fn fock_json_roundtrip() {
        let s = three_crystal_state(0.2f64, 2).unwrap().state;
        let js = serde_json::to_string(&s).unwrap();
        let back: FockVector<f64> = serde_json::from_str(&js).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn angle_constants() {
        assert!((theta::<f64>().sin().powi(2) - 100.0 / 247.0).abs() < 1e-15);
        let s = (phi::<f64>() + std::f64::consts::FRAC_PI_4).sin();
        assert!((s * s * 104.0 - (7.0 + 3f64.sqrt()).powi(2)).abs() < 1e-12);
        assert_eq!(named_angle("-pi/2"), Some(-std::f64::consts::FRAC_PI_2));
        assert_eq!(named_angle("tau"), None);
    }

    #[test]
    fn logical_controlled_tt_matches_encoded_layer() {
        let model = CnotModel::default();
        for i in 0..3 {
            for step6 in [false, true] {
                let r = run_controlled_tt_photonic::<f64>(i, &model, step6).unwrap();
                let (p, m) = encoding::run_controlled_tt_protocol::<f64>(i, step6).unwrap();
                assert!((r.p_plus - p).abs() < 1e-12 && (r.p_minus - m).abs() < 1e-12);
                let n = if step6 { 5 } else { 3 };
                assert_eq!(r.cnot_count, n);
                assert!((r.success_probability - (1.0f64 / 9.0).powi(n as i32)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn logical_entangled_controls_match_encoded_layer() {
        let model = CnotModel::default();
        for variant in [ControlVariant::TwoAncilla, ControlVariant::FourAncilla] {
            for g in [GroupElement::CPlus, GroupElement::CMinus] {
                let (x, _) = run_entangled_control_photonic::<f64>(ChargeConfiguration::V1V3, g, variant, &model).unwrap();
                assert!((x + 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transfer_bookkeeping() {
        let reused = reused_control_chain();
        let adversarial: BTreeMap<String, usize> =
            [("anc5".to_string(), 1), ("1b".to_string(), 0), ("2b".to_string(), 2)].into_iter().collect();
        let a = photon_transfer_analysis(&reused, &adversarial).unwrap();
        assert_eq!(a.min_transfers(), Some(2));
        assert_eq!(a.undetected[0].events, vec![TransferEvent::ControlToTarget, TransferEvent::TargetToControl]);
        assert!(photon_transfer_analysis(&reused, &correct_photon_numbers(&reused)).unwrap().is_safe());

        let four = entangled_control_chain(ControlVariant::FourAncilla);
        assert!(photon_transfer_analysis(&four, &correct_photon_numbers(&four)).unwrap().is_safe());
        let mut adv4 = correct_photon_numbers(&four);
        adv4.insert("1b".into(), 0);
        adv4.insert("2b".into(), 2);
        assert!(photon_transfer_analysis(&four, &adv4).unwrap().is_safe());

        let two = entangled_control_chain(ControlVariant::TwoAncilla);
        let a = photon_transfer_analysis(&two, &correct_photon_numbers(&two)).unwrap();
        // no single transfer can be compensated; a closed loop through all
        // four gates still balances every block
        assert_eq!(a.min_transfers(), Some(4));
    }
}
