//! The symmetric group S3 and its representation theory.
//!
//! Elements are written as `X^s Z^k` with `Z = R2(c+)` and `X = σˣ`, where
//! `R2` is the two-dimensional irrep
//!
//! ```text
//! R2(e) = 1,   R2(t_k) = σˣ exp(i 2πk/3 σᶻ),   R2(c±) = exp(±i 2π/3 σᶻ).
//! ```
//!
//! Since `R2` is faithful, the multiplication table follows from matrix
//! products: `Z X = X Z⁻¹`, hence `(s1, k1)(s2, k2) = (s1 + s2, (-1)^s2 k1 + k2)`.
//!
//! The basis ordering used by every register in the crate is
//! `0..6 ↔ (e, t0, t1, t2, c+, c-)`.

use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::scalar::{self, CMatrix, Real};

/// An element of S3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupElement {
    E,
    T0,
    T1,
    T2,
    CPlus,
    CMinus,
}

use GroupElement::*;

impl GroupElement {
    /// All six elements in basis order.
    pub const ALL: [GroupElement; 6] = [E, T0, T1, T2, CPlus, CMinus];

    pub fn index(self) -> usize {
        match self {
            E => 0,
            T0 => 1,
            T1 => 2,
            T2 => 3,
            CPlus => 4,
            CMinus => 5,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// `(s, k)` such that `R2(g) = σˣ^s R2(c+)^k`.
    fn parts(self) -> (u8, u8) {
        match self {
            E => (0, 0),
            CPlus => (0, 1),
            CMinus => (0, 2),
            T0 => (1, 0),
            T1 => (1, 1),
            T2 => (1, 2),
        }
    }

    fn from_parts(s: u8, k: u8) -> Self {
        match (s % 2, k % 3) {
            (0, 0) => E,
            (0, 1) => CPlus,
            (0, 2) => CMinus,
            (1, 0) => T0,
            (1, 1) => T1,
            _ => T2,
        }
    }

    pub fn multiply(self, rhs: Self) -> Self {
        let (s1, k1) = self.parts();
        let (s2, k2) = rhs.parts();
        let k1 = if s2 == 1 { (3 - k1) % 3 } else { k1 };
        Self::from_parts(s1 + s2, k1 + k2)
    }

    pub fn inverse(self) -> Self {
        match self {
            CPlus => CMinus,
            CMinus => CPlus,
            g => g,
        }
    }

    pub fn is_transposition(self) -> bool {
        matches!(self, T0 | T1 | T2)
    }

    pub fn is_three_cycle(self) -> bool {
        matches!(self, CPlus | CMinus)
    }

    /// Index of the conjugacy class: 0 for `{e}`, 1 for transpositions,
    /// 2 for three-cycles.
    pub fn conjugacy_class(self) -> usize {
        match self {
            E => 0,
            T0 | T1 | T2 => 1,
            CPlus | CMinus => 2,
        }
    }

    /// Serialization token: `e`, `t0`, `t1`, `t2`, `c+`, `c-`.
    pub fn token(self) -> &'static str {
        match self {
            E => "e",
            T0 => "t0",
            T1 => "t1",
            T2 => "t2",
            CPlus => "c+",
            CMinus => "c-",
        }
    }

    /// The transposition `t_i`.
    pub fn transposition(i: usize) -> Option<Self> {
        [T0, T1, T2].get(i).copied()
    }
}

pub fn multiply(g: GroupElement, h: GroupElement) -> GroupElement {
    g.multiply(h)
}

pub fn inverse(g: GroupElement) -> GroupElement {
    g.inverse()
}

impl Mul for GroupElement {
    type Output = GroupElement;

    fn mul(self, rhs: Self) -> Self {
        self.multiply(rhs)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for GroupElement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .iter()
            .copied()
            .find(|g| g.token() == s)
            .ok_or_else(|| Error::UnknownElement(s.to_string()))
    }
}

impl Serialize for GroupElement {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.token())
    }
}

impl<'de> Deserialize<'de> for GroupElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Irreducible representations of S3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Irrep {
    Trivial,
    Sign,
    TwoDim,
}

impl Irrep {
    pub const ALL: [Irrep; 3] = [Irrep::Trivial, Irrep::Sign, Irrep::TwoDim];

    pub fn dim(self) -> usize {
        match self {
            Irrep::TwoDim => 2,
            _ => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Irrep::Trivial => "trivial",
            Irrep::Sign => "sign",
            Irrep::TwoDim => "two_dim",
        }
    }

    /// Unitary representation matrix of `g`.
    pub fn matrix<T: Real>(self, g: GroupElement) -> CMatrix<T> {
        match self {
            Irrep::Trivial => scalar::identity(1),
            Irrep::Sign => {
                let v = if g.is_transposition() { -1.0 } else { 1.0 };
                Array2::from_elem((1, 1), scalar::c(v, 0.0))
            }
            Irrep::TwoDim => {
                let (s, k) = g.parts();
                // exp(i 2πk/3 σᶻ) = diag(ω^k, ω^-k)
                let angle = T::lit(2.0) * T::PI() / T::lit(3.0) * T::lit(k as f64);
                let up = scalar::phase(angle);
                let down = up.conj();
                let zero = Complex::new(T::zero(), T::zero());
                let mut m = scalar::zeros(2, 2);
                if s == 0 {
                    m[[0, 0]] = up;
                    m[[1, 1]] = down;
                } else {
                    // σˣ diag(a, b) = [[0, b], [a, 0]]
                    m[[0, 1]] = down;
                    m[[1, 0]] = up;
                    m[[0, 0]] = zero;
                    m[[1, 1]] = zero;
                }
                m
            }
        }
    }

    pub fn character<T: Real>(self, g: GroupElement) -> Complex<T> {
        scalar::trace(&self.matrix::<T>(g))
    }
}

impl fmt::Display for Irrep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Irrep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "trivial" | "1" => Ok(Irrep::Trivial),
            "sign" => Ok(Irrep::Sign),
            "two_dim" | "R2" | "2" => Ok(Irrep::TwoDim),
            other => Err(Error::OutOfRange(format!("unknown irrep `{other}`"))),
        }
    }
}

pub fn character<T: Real>(r: Irrep, g: GroupElement) -> Complex<T> {
    r.character(g)
}

/// An irrep, optionally complex conjugated (`R*`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RepRef {
    pub irrep: Irrep,
    pub conjugate: bool,
}

impl RepRef {
    pub fn plain(irrep: Irrep) -> Self {
        RepRef { irrep, conjugate: false }
    }

    pub fn conj(irrep: Irrep) -> Self {
        RepRef { irrep, conjugate: true }
    }

    pub fn dim(self) -> usize {
        self.irrep.dim()
    }

    pub fn matrix<T: Real>(self, g: GroupElement) -> CMatrix<T> {
        let m = self.irrep.matrix(g);
        if self.conjugate {
            scalar::conj(&m)
        } else {
            m
        }
    }
}

impl From<Irrep> for RepRef {
    fn from(irrep: Irrep) -> Self {
        RepRef::plain(irrep)
    }
}

/// Multiplicity of `c` in `a ⊗ b`, from characters.
pub fn fusion_multiplicity(a: RepRef, b: RepRef, c: RepRef) -> usize {
    let total: Complex<f64> = GroupElement::ALL
        .iter()
        .map(|&g| {
            scalar::trace(&a.matrix::<f64>(g))
                * scalar::trace(&b.matrix::<f64>(g))
                * scalar::trace(&c.matrix::<f64>(g)).conj()
        })
        .sum::<Complex<f64>>()
        / 6.0;
    total.re.round() as usize
}

/// Left or right regular action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Regular permutation representation `L_g |h⟩ = |g h⟩`, `R_g |h⟩ = |h g⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegularRep {
    pub side: Side,
    pub element: GroupElement,
}

impl RegularRep {
    pub fn new(side: Side, element: GroupElement) -> Self {
        RegularRep { side, element }
    }

    /// Image of basis label `h`.
    pub fn apply(self, h: GroupElement) -> GroupElement {
        match self.side {
            Side::Left => self.element * h,
            Side::Right => h * self.element,
        }
    }

    /// `perm[j]` is the basis index that `|j⟩` is sent to.
    pub fn permutation(self) -> [usize; 6] {
        let mut p = [0; 6];
        for h in GroupElement::ALL {
            p[h.index()] = self.apply(h).index();
        }
        p
    }

    pub fn matrix<T: Real>(self) -> CMatrix<T> {
        let mut m = scalar::zeros(6, 6);
        for (j, &i) in self.permutation().iter().enumerate() {
            m[[i, j]] = Complex::new(T::one(), T::zero());
        }
        m
    }
}

pub fn regular_matrix<T: Real>(side: Side, g: GroupElement) -> CMatrix<T> {
    RegularRep::new(side, g).matrix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::max_abs_diff;

    #[test]
    fn examples_multiply_inverse() {
        assert_eq!(E * CPlus, CPlus);
        assert_eq!(CPlus * CPlus, CMinus);
        assert_eq!(T0 * CPlus, T1);
        assert_eq!(inverse(E), E);
        assert_eq!(inverse(T0), T0);
        assert_eq!(inverse(CPlus), CMinus);
    }

    #[test]
    fn table_matches_two_dim_products() {
        // matching products of the faithful irrep against its image set
        for g in GroupElement::ALL {
            for h in GroupElement::ALL {
                let prod = Irrep::TwoDim.matrix::<f64>(g).dot(&Irrep::TwoDim.matrix(h));
                let found: Vec<_> = GroupElement::ALL
                    .iter()
                    .filter(|&&x| max_abs_diff(&prod, &Irrep::TwoDim.matrix(x)) < 1e-12)
                    .collect();
                assert_eq!(found, vec![&(g * h)], "{g} * {h}");
            }
        }
    }

    #[test]
    fn characters() {
        let chi = |g| Irrep::TwoDim.character::<f64>(g);
        assert!((chi(E) - Complex::new(2.0, 0.0)).norm() < 1e-12);
        assert!((chi(CPlus) - Complex::new(-1.0, 0.0)).norm() < 1e-12);
        assert!(chi(T0).norm() < 1e-12);
        assert!((Irrep::Sign.character::<f64>(T2).re + 1.0).abs() < 1e-12);
    }

    #[test]
    fn regular_examples() {
        let l_e = regular_matrix::<f64>(Side::Left, E);
        assert!(max_abs_diff(&l_e, &scalar::identity(6)) < 1e-15);
        let l = regular_matrix::<f64>(Side::Left, CPlus);
        assert_eq!(l[[CPlus.index(), E.index()]].re, 1.0);
        let r = regular_matrix::<f64>(Side::Right, CMinus);
        assert_eq!(r[[CMinus.index(), E.index()]].re, 1.0);
    }

    #[test]
    fn tokens_roundtrip() {
        for g in GroupElement::ALL {
            assert_eq!(g.token().parse::<GroupElement>().unwrap(), g);
            let js = serde_json::to_string(&g).unwrap();
            assert_eq!(serde_json::from_str::<GroupElement>(&js).unwrap(), g);
        }
        assert!("c0".parse::<GroupElement>().is_err());
    }

    #[test]
    fn multiplicities() {
        let r2 = RepRef::plain(Irrep::TwoDim);
        for c in Irrep::ALL {
            assert_eq!(fusion_multiplicity(RepRef::conj(Irrep::TwoDim), r2, c.into()), 1);
        }
        assert_eq!(
            fusion_multiplicity(Irrep::Trivial.into(), Irrep::Trivial.into(), r2),
            0
        );
    }
}
